// randenc: frozen random sentence encoders and probe experiments.

#include <randenc/randenc.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

int run_command(const std::string& config_path, const std::string& output_override, std::optional<std::size_t> workers,
                bool timing)
{
    auto cfg = randenc::load_experiment_config(config_path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    if (workers) cfg.workers = *workers;
    if (timing) cfg.timing = true;
    const auto result = randenc::run_experiment(cfg);
    randenc::write_experiment_outputs(cfg.output_dir, result);

    std::size_t failed = 0;
    for (const auto& r : result.rows) failed += r.accuracy ? 0 : 1;
    std::cout << "wrote " << result.rows.size() << " result rows to " << cfg.output_dir << '\n';
    randenc::write_summary_csv(std::cout, randenc::aggregate(result));
    if (failed) std::cerr << failed << " configuration(s) failed; see errors.txt\n";
    return failed ? 2 : 0;
}

struct EncodeOptions {
    std::string encoder = "borep";
    std::size_t dim = 4096;
    std::uint64_t seed = 1;
    std::string pooling = "max";
    std::string embeddings;
    std::string input;
    std::string output;
    std::string trees;
    std::string checkpoint_in;
    std::string checkpoint_out;
    bool lowercase = true;
    bool clean = false;
};

int encode_command(const EncodeOptions& opt)
{
    const auto table = randenc::load_embeddings(opt.embeddings).table;
    randenc::EncoderParams params;
    if (!opt.checkpoint_in.empty()) {
        params = randenc::load_encoder(opt.checkpoint_in);
        if (params.config.input_dim != table.dim())
            throw randenc::config_error{"checkpoint input dimension does not match the embeddings"};
    } else {
        auto spec = randenc::parse_encoder_spec(opt.encoder);
        spec.base.input_dim = table.dim();
        spec.base.output_dim = opt.dim;
        spec.base.seed = opt.seed;
        params = randenc::make_encoder(spec.base);
    }
    if (!opt.checkpoint_out.empty()) randenc::save_encoder(opt.checkpoint_out, params);
    const auto pooling = randenc::parse_pooling_kind(opt.pooling);
    const bool tree_path = params.config.kind == randenc::EncoderKind::tree_lstm;
    if (tree_path && opt.trees.empty()) throw randenc::config_error{"tree_lstm needs --trees"};

    std::ifstream in{opt.input};
    if (!in) throw randenc::error{"cannot open input " + opt.input};
    std::ifstream tree_in;
    if (tree_path) {
        tree_in.open(opt.trees);
        if (!tree_in) throw randenc::error{"cannot open tree file " + opt.trees};
    }
    std::ofstream out{opt.output, std::ios::binary};
    if (!out) throw randenc::error{"cannot open output " + opt.output};

    // Lines are `id<TAB>sentence` or a bare sentence (id = 1-based line number).
    std::string line;
    std::size_t line_no = 0, written = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string id = std::to_string(line_no);
        std::string text = line;
        if (const auto tab = line.find('\t'); tab != std::string::npos) {
            id = line.substr(0, tab);
            text = line.substr(tab + 1);
        }
        randenc::EncoderInput input;
        if (tree_path) {
            std::string tree_line;
            if (!std::getline(tree_in, tree_line))
                throw randenc::parse_error{"tree file has fewer lines than the input"};
            input.tree = randenc::read_tree_line(tree_line, opt.lowercase);
            input.tokens = randenc::embed_aligned(table, input.tree->leaves);
        } else {
            auto tokens = randenc::tokenize(text, opt.lowercase);
            if (tokens.empty()) tokens.emplace_back(randenc::empty_token_placeholder);
            if (opt.clean) tokens = randenc::clean_tokens(tokens);
            input.tokens = randenc::embed_sentence(table, tokens);
        }
        const auto emb = randenc::embed(params, input, pooling);
        randenc::write_embedding_line(out, id, emb.values);
        ++written;
    }
    std::cerr << "encoded " << written << " sentences with " << randenc::to_string(params.config.kind) << " (D'="
              << params.config.output_dim << ", seed " << params.config.seed << ")\n";
    return 0;
}

int selfcheck_command()
{
    bool all = true;
    for (const auto& c : randenc::run_selfcheck()) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
        if (!c.detail.empty()) std::cout << "  (" << c.detail << ')';
        std::cout << '\n';
        all = all && c.passed;
    }
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Frozen random sentence encoders with trainable probes"};
    app.require_subcommand(1);

    std::string config_path, output_override;
    std::optional<std::size_t> workers;
    bool timing = false;
    auto* run = app.add_subcommand("run", "Run an experiment sweep from a config file");
    run->add_option("--config", config_path, "Experiment config (key=value lines)")->required()->check(CLI::ExistingFile);
    run->add_option("--output", output_override, "Override the output directory");
    run->add_option("--workers", workers, "Concurrent jobs");
    run->add_flag("--timing", timing, "Record wall-clock times in results.csv");

    EncodeOptions enc;
    auto* encode = app.add_subcommand("encode", "Embed sentences with one sampled encoder");
    encode->add_option("--encoder", enc.encoder, "Encoder kind with optional options, e.g. cnn:window=3");
    encode->add_option("--dim", enc.dim, "Output dimension D'");
    encode->add_option("--seed", enc.seed, "Sampling seed");
    encode->add_option("--pooling", enc.pooling, "max or mean")->check(CLI::IsMember({"max", "mean"}));
    encode->add_option("--embeddings", enc.embeddings, "GloVe-format word vectors")->required()->check(CLI::ExistingFile);
    encode->add_option("--input", enc.input, "Sentences, one per line")->required()->check(CLI::ExistingFile);
    encode->add_option("--output", enc.output, "Embedding dump")->required();
    encode->add_option("--trees", enc.trees, "Bracketed parses aligned with --input (tree_lstm)");
    encode->add_option("--checkpoint", enc.checkpoint_in, "Load the encoder from a checkpoint instead of sampling");
    encode->add_option("--save-checkpoint", enc.checkpoint_out, "Write the encoder checkpoint");
    encode->add_flag("!--no-lowercase", enc.lowercase, "Keep token case");
    encode->add_flag("--clean", enc.clean, "Apply token cleanup on the text path too");

    app.add_subcommand("selfcheck", "Run the built-in invariant checks");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return run_command(config_path, output_override, workers, timing);
        if (*encode) return encode_command(enc);
        return selfcheck_command();
    } catch (const std::exception& e) {
        std::cerr << "randenc: " << e.what() << '\n';
        return 1;
    }
}
