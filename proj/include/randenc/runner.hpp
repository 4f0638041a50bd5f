#pragma once

// Experiment sweeps: encoder x output dimension x pooling x seed over a set of tasks. //

#include "encode.hpp"
#include "probe.hpp"
#include "tasks.hpp"

#include <chrono>
#include <iomanip>
#include <set>
#include <tuple>

namespace randenc {

/// An encoder entry of a sweep: kind plus hyperparameter overrides, written
/// `kind[:key=value]...`, e.g. `cnn:window=3` or `self_attention:pe=0`.
struct EncoderSpec {
    std::string label;
    EncoderConfig base;  // dims and seed filled in per job
};

inline bool parse_bool(std::string_view v)
{
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    throw config_error{"expected a boolean, got '" + std::string{v} + "'"};
}

namespace detail {

template <typename T>
T parse_number(std::string_view s, std::string_view what)
{
    T v{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw config_error{"bad value '" + std::string{s} + "' for " + std::string{what}};
    return v;
}

inline std::vector<std::string> split_on(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto at = s.find(sep, start);
        out.push_back(trim(std::string{s.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start)}));
        if (at == std::string_view::npos) break;
        start = at + 1;
    }
    return out;
}

/// Splits `head:key=value:key=value` into the head and its options.
inline std::pair<std::string, std::vector<std::pair<std::string, std::string>>> parse_options(std::string_view text)
{
    auto parts = split_on(text, ':');
    std::vector<std::pair<std::string, std::string>> opts;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        if (eq == std::string::npos) throw config_error{"expected key=value in '" + std::string{text} + "'"};
        opts.emplace_back(parts[i].substr(0, eq), parts[i].substr(eq + 1));
    }
    return {parts[0], opts};
}

}  // namespace detail

inline EncoderSpec parse_encoder_spec(std::string_view text)
{
    auto [head, opts] = detail::parse_options(text);
    EncoderSpec spec;
    spec.label = std::string{text};
    spec.base.kind = parse_encoder_kind(head);
    for (const auto& [k, v] : opts) {
        auto& c = spec.base;
        if (k == "window") c.window = detail::parse_number<std::size_t>(v, k);
        else if (k == "bias") c.cnn_bias = parse_bool(v);
        else if (k == "heads") c.heads = detail::parse_number<std::size_t>(v, k);
        else if (k == "layers") c.layers = detail::parse_number<std::size_t>(v, k);
        else if (k == "pe") c.positional_encoding = parse_bool(v);
        else if (k == "rho") c.spectral_radius = detail::parse_number<double>(v, k);
        else if (k == "density") c.density = detail::parse_number<double>(v, k);
        else if (k == "leak") c.leak = detail::parse_number<double>(v, k);
        else if (k == "input_scaling") c.input_scaling = detail::parse_number<double>(v, k);
        else if (k == "tree_pool") {
            if (v == "all") c.tree_pool_domain = TreePoolDomain::all;
            else if (v == "leaves") c.tree_pool_domain = TreePoolDomain::leaves;
            else throw config_error{"tree_pool must be all or leaves"};
        } else {
            throw config_error{"unknown encoder option '" + k + "' in '" + std::string{text} + "'"};
        }
    }
    return spec;
}

/// A task entry: a manifest path or `synthetic_order[:n=..][:vocab=..][:seed=..]`.
struct TaskSpec {
    std::string source;
};

struct SyntheticEmbeddingSpec {
    std::size_t dim = 16;
    std::size_t vocab = 50;
    std::uint64_t seed = 1;
};

struct ExperimentConfig {
    /// Path to GloVe-format vectors, unless `synthetic_embeddings` is set.
    std::string embeddings;
    std::optional<SyntheticEmbeddingSpec> synthetic_embeddings;
    std::vector<TaskSpec> tasks;
    std::vector<EncoderSpec> encoders;
    std::vector<std::size_t> dims{128, 512, 1024, 2048, 4096};
    std::vector<PoolingKind> poolings{PoolingKind::max};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    ProbeConfig probe;
    bool lowercase = true;
    /// Apply token cleanup to every encoder, not only the parse-tree path.
    bool clean_all = false;
    std::size_t workers = 1;
    /// Record wall-clock times; off keeps result files byte-reproducible (wall_ms = 0).
    bool timing = false;
    std::string output_dir = "results";
};

inline void validate(const ExperimentConfig& cfg)
{
    if (cfg.embeddings.empty() && !cfg.synthetic_embeddings) throw config_error{"config: embeddings= is required"};
    if (cfg.tasks.empty()) throw config_error{"config: at least one task= is required"};
    if (cfg.encoders.empty()) throw config_error{"config: at least one encoder= is required"};
    if (cfg.dims.empty() || cfg.poolings.empty() || cfg.seeds.empty())
        throw config_error{"config: dims, poolings and seeds must be non-empty"};
    if (std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() != cfg.seeds.size())
        throw config_error{"config: seeds must be distinct"};
    if (std::set<PoolingKind>(cfg.poolings.begin(), cfg.poolings.end()).size() != cfg.poolings.size())
        throw config_error{"config: poolings must be distinct"};
}

/// Reads `key=value` lines. Repeatable keys: task, encoder. Lists are comma separated.
inline ExperimentConfig parse_experiment_config(std::istream& in)
{
    ExperimentConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    bool saw_encoder = false, saw_task = false;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        const std::string where = "config line " + std::to_string(line_no);
        if (eq == std::string::npos) throw config_error{where + ": expected key=value"};
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        try {
            if (key == "embeddings") {
                if (value == "synthetic" || value.rfind("synthetic:", 0) == 0) {
                    auto [head, opts] = detail::parse_options(value);
                    SyntheticEmbeddingSpec s;
                    for (const auto& [k, v] : opts) {
                        if (k == "dim") s.dim = detail::parse_number<std::size_t>(v, k);
                        else if (k == "vocab") s.vocab = detail::parse_number<std::size_t>(v, k);
                        else if (k == "seed") s.seed = detail::parse_number<std::uint64_t>(v, k);
                        else throw config_error{"unknown synthetic embedding option '" + k + "'"};
                    }
                    cfg.synthetic_embeddings = s;
                } else {
                    cfg.embeddings = value;
                }
            } else if (key == "task") {
                if (!saw_task) cfg.tasks.clear();
                saw_task = true;
                cfg.tasks.push_back({value});
            } else if (key == "encoder") {
                if (!saw_encoder) cfg.encoders.clear();
                saw_encoder = true;
                cfg.encoders.push_back(parse_encoder_spec(value));
            } else if (key == "dims") {
                cfg.dims.clear();
                for (const auto& d : detail::split_on(value, ',')) cfg.dims.push_back(detail::parse_number<std::size_t>(d, key));
            } else if (key == "poolings") {
                cfg.poolings.clear();
                for (const auto& p : detail::split_on(value, ',')) cfg.poolings.push_back(parse_pooling_kind(p));
            } else if (key == "seeds") {
                cfg.seeds.clear();
                for (const auto& s : detail::split_on(value, ',')) cfg.seeds.push_back(detail::parse_number<std::uint64_t>(s, key));
            } else if (key == "probe") {
                cfg.probe.kind = parse_probe_kind(value);
            } else if (key == "probe_hidden") {
                cfg.probe.hidden = detail::parse_number<std::size_t>(value, key);
            } else if (key == "probe_epochs") {
                cfg.probe.max_epochs = detail::parse_number<std::size_t>(value, key);
            } else if (key == "probe_patience") {
                cfg.probe.patience = detail::parse_number<std::size_t>(value, key);
            } else if (key == "probe_standardize") {
                cfg.probe.standardize = parse_bool(value);
            } else if (key == "l2_grid") {
                cfg.probe.l2_grid.clear();
                for (const auto& s : detail::split_on(value, ',')) cfg.probe.l2_grid.push_back(detail::parse_number<double>(s, key));
            } else if (key == "lowercase") {
                cfg.lowercase = parse_bool(value);
            } else if (key == "clean_all") {
                cfg.clean_all = parse_bool(value);
            } else if (key == "workers") {
                cfg.workers = detail::parse_number<std::size_t>(value, key);
            } else if (key == "timing") {
                cfg.timing = parse_bool(value);
            } else if (key == "output") {
                cfg.output_dir = value;
            } else {
                throw config_error{"unknown key '" + key + "'"};
            }
        } catch (const config_error& e) {
            throw config_error{where + ": " + e.what()};
        }
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path)
{
    std::ifstream in{path};
    if (!in) throw error{"cannot open config " + path.string()};
    ExperimentConfig cfg = parse_experiment_config(in);
    // Relative paths in a config file are relative to the file.
    const auto base = path.parent_path();
    auto fix = [&](std::string& p) {
        if (!p.empty() && std::filesystem::path{p}.is_relative()) p = (base / p).string();
    };
    fix(cfg.embeddings);
    for (auto& t : cfg.tasks)
        if (t.source != "synthetic_order" && t.source.rfind("synthetic_order:", 0) != 0) fix(t.source);
    return cfg;
}

// Results ----------------------------------------------------------------------------------

struct ResultRow {
    std::string task;
    std::string encoder;
    std::size_t dim = 0;
    PoolingKind pooling = PoolingKind::max;
    std::uint64_t seed = 0;
    std::optional<double> accuracy;  // empty for a failed configuration
    long long wall_ms = 0;
    std::string error_message;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
};

inline bool canonical_less(const ResultRow& a, const ResultRow& b)
{
    return std::tie(a.task, a.encoder, a.dim, a.pooling, a.seed) < std::tie(b.task, b.encoder, b.dim, b.pooling, b.seed);
}

struct SummaryRow {
    std::string task;
    std::string encoder;
    std::size_t dim = 0;
    PoolingKind pooling = PoolingKind::max;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
    bool single_seed = false;  // sd is 0 by convention
};

/// Mean and sample (n-1) standard deviation over seeds for each (task, encoder, dim, pooling).
/// Failed rows are left out.
inline std::vector<SummaryRow> aggregate(const ExperimentResult& result)
{
    std::map<std::tuple<std::string, std::string, std::size_t, PoolingKind>, std::vector<double>> groups;
    for (const auto& r : result.rows)
        if (r.accuracy) groups[{r.task, r.encoder, r.dim, r.pooling}].push_back(*r.accuracy);
    std::vector<SummaryRow> out;
    for (const auto& [key, acc] : groups) {
        SummaryRow s{std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key)};
        s.n = acc.size();
        for (double a : acc) s.mean += a;
        s.mean /= static_cast<double>(s.n);
        if (s.n > 1) {
            double ss = 0.0;
            for (double a : acc) ss += (a - s.mean) * (a - s.mean);
            s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
        } else {
            s.single_seed = true;
        }
        out.push_back(std::move(s));
    }
    return out;
}

namespace detail {

inline std::string fixed6(double x)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, 6);
    return {buf, ptr};
}

}  // namespace detail

inline void write_results_csv(std::ostream& out, const ExperimentResult& result)
{
    out << "task,encoder,dim,pooling,seed,accuracy,wall_ms\n";
    for (const auto& r : result.rows)
        out << r.task << ',' << r.encoder << ',' << r.dim << ',' << to_string(r.pooling) << ',' << r.seed << ','
            << (r.accuracy ? detail::fixed6(*r.accuracy) : std::string{"error"}) << ',' << r.wall_ms << '\n';
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& summary)
{
    out << "task,encoder,dim,pooling,mean,sd,n\n";
    for (const auto& s : summary)
        out << s.task << ',' << s.encoder << ',' << s.dim << ',' << to_string(s.pooling) << ','
            << detail::fixed6(s.mean) << ',' << detail::fixed6(s.sd) << ',' << s.n << '\n';
}

/// One table per (dim, pooling): encoders as rows, tasks as columns, cells "mean ± sd" in
/// percent, followed by the spread (max - min of the means) across encoders for every task.
inline void write_tables_markdown(std::ostream& out, const std::vector<SummaryRow>& summary)
{
    std::set<std::pair<std::size_t, PoolingKind>> panels;
    std::set<std::string> tasks;
    for (const auto& s : summary) {
        panels.emplace(s.dim, s.pooling);
        tasks.insert(s.task);
    }
    auto pct = [](double x) {
        char buf[32];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, 100.0 * x, std::chars_format::fixed, 1);
        return std::string{buf, ptr};
    };
    for (const auto& [dim, pooling] : panels) {
        out << "## dim " << dim << ", " << to_string(pooling) << " pooling\n\n| encoder |";
        for (const auto& t : tasks) out << ' ' << t << " |";
        out << "\n|---|";
        for (std::size_t i = 0; i < tasks.size(); ++i) out << "---|";
        out << '\n';
        std::map<std::string, std::map<std::string, const SummaryRow*>> grid;
        for (const auto& s : summary)
            if (s.dim == dim && s.pooling == pooling) grid[s.encoder][s.task] = &s;
        std::map<std::string, std::pair<double, double>> range;
        for (const auto& [enc, cells] : grid) {
            out << "| " << enc << " |";
            for (const auto& t : tasks) {
                auto it = cells.find(t);
                if (it == cells.end()) {
                    out << " - |";
                    continue;
                }
                out << ' ' << pct(it->second->mean) << " ± " << pct(it->second->sd) << " |";
                auto [r, fresh] = range.try_emplace(t, it->second->mean, it->second->mean);
                r->second.first = std::min(r->second.first, it->second->mean);
                r->second.second = std::max(r->second.second, it->second->mean);
            }
            out << '\n';
        }
        out << "| spread across encoders |";
        for (const auto& t : tasks) {
            auto it = range.find(t);
            out << ' ' << (it == range.end() ? std::string{"-"} : pct(it->second.second - it->second.first)) << " |";
        }
        out << "\n\n";
    }
}

// Running ----------------------------------------------------------------------------------

/// A task with its sentences ready for one input path.
struct PreparedTask {
    TaskDataset data;
    std::vector<EncoderInput> first;   // text (or text1 of pairs)
    std::vector<EncoderInput> second;  // text2 of pairs
    bool tree_ready = false;
};

namespace detail {

inline TaskDataset materialise_task(const TaskSpec& spec, bool lowercase)
{
    if (spec.source == "synthetic_order" || spec.source.rfind("synthetic_order:", 0) == 0) {
        auto [head, opts] = parse_options(spec.source);
        std::size_t n = 2000, vocab = 50;
        std::uint64_t seed = 1;
        for (const auto& [k, v] : opts) {
            if (k == "n") n = parse_number<std::size_t>(v, k);
            else if (k == "vocab") vocab = parse_number<std::size_t>(v, k);
            else if (k == "seed") seed = parse_number<std::uint64_t>(v, k);
            else throw config_error{"unknown synthetic task option '" + k + "'"};
        }
        return make_synthetic_order_task(n, vocab, seed);
    }
    return load_task(spec.source, lowercase);
}

/// Non-tree encoders read tokenised (optionally cleaned) text with out-of-vocabulary words
/// dropped; tree_lstm reads the cleaned tree leaves with unknown words as zero vectors.
inline EncoderInput make_input(const WordEmbeddingTable& table, const std::string& text,
                               const std::optional<ParseTree>& tree, const ExperimentConfig& cfg, bool tree_path)
{
    EncoderInput in;
    if (tree_path) {
        in.tokens = embed_aligned(table, tree->leaves);
        in.tree = *tree;
        return in;
    }
    auto tokens = tokenize(text, cfg.lowercase);
    if (tokens.empty()) tokens.emplace_back(empty_token_placeholder);
    if (cfg.clean_all) tokens = clean_tokens(tokens);
    in.tokens = embed_sentence(table, tokens);
    return in;
}

}  // namespace detail

inline WordEmbeddingTable load_experiment_embeddings(const ExperimentConfig& cfg)
{
    if (cfg.synthetic_embeddings)
        return make_synthetic_embeddings(cfg.synthetic_embeddings->vocab, cfg.synthetic_embeddings->dim,
                                         cfg.synthetic_embeddings->seed);
    return load_embeddings(cfg.embeddings).table;
}

struct Job {
    std::size_t task = 0;
    std::size_t encoder = 0;
    std::size_t dim = 0;
    std::uint64_t seed = 0;
};

/// Encodes the task with one sampled encoder and fits a probe per pooling.
/// Returns accuracies aligned with cfg.poolings.
inline std::vector<double> run_job(const ExperimentConfig& cfg, const PreparedTask& task, const EncoderSpec& enc,
                                   std::size_t input_dim, std::size_t dim, std::uint64_t seed)
{
    EncoderConfig ec = enc.base;
    ec.input_dim = input_dim;
    ec.output_dim = dim;
    ec.seed = seed;
    const EncoderParams params = make_encoder(ec);

    auto first = encode_batch(params, task.first, cfg.poolings, 1);
    std::vector<std::vector<Vector>> second_emb;
    if (task.data.kind == TaskKind::pair) second_emb = encode_batch(params, task.second, cfg.poolings, 1);

    const auto labels = task.data.labels();
    ProbeConfig probe = cfg.probe;
    probe.seed = seed;
    std::vector<double> acc;
    for (std::size_t p = 0; p < cfg.poolings.size(); ++p) {
        std::vector<Vector> feats;
        if (task.data.kind == TaskKind::pair) {
            for (std::size_t i = 0; i < first[p].size(); ++i) feats.push_back(pair_features(first[p][i], second_emb[p][i]));
        } else {
            feats = std::move(first[p]);
        }
        const Matrix x = stack_rows(feats);
        if (const auto* s = std::get_if<ExplicitSplits>(&task.data.splits)) {
            acc.push_back(train_probe(x, labels, SplitPlan{s->train, s->dev, s->test}, probe).report.test_accuracy);
        } else {
            acc.push_back(kfold_accuracy(x, labels, std::get<CrossValidation>(task.data.splits).folds, probe));
        }
    }
    return acc;
}

/// Runs every (task, encoder, dim, seed) job; each yields one row per pooling. A failing job
/// becomes error rows. Rows come back in canonical order.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    validate(cfg);
    const WordEmbeddingTable table = load_experiment_embeddings(cfg);

    std::vector<PreparedTask> tasks;
    for (const auto& spec : cfg.tasks) {
        PreparedTask p;
        p.data = detail::materialise_task(spec, cfg.lowercase);
        p.tree_ready = p.data.has_trees();
        tasks.push_back(std::move(p));
    }
    const bool wants_trees = std::any_of(cfg.encoders.begin(), cfg.encoders.end(),
                                         [](const EncoderSpec& e) { return e.base.kind == EncoderKind::tree_lstm; });
    if (wants_trees)
        for (const auto& t : tasks)
            if (!t.tree_ready) throw config_error{"tree_lstm requested but task '" + t.data.name + "' has no parse trees"};
    for (const auto& e : cfg.encoders)
        for (std::size_t d : cfg.dims) {
            EncoderConfig probe = e.base;
            probe.input_dim = table.dim();
            probe.output_dim = d;
            validate(probe);
        }

    // Inputs for the text path and, when needed, the tree path.
    std::vector<PreparedTask> tree_tasks;
    for (auto& t : tasks) {
        for (const auto& ex : t.data.examples) {
            t.first.push_back(detail::make_input(table, ex.text, ex.tree, cfg, false));
            if (t.data.kind == TaskKind::pair) t.second.push_back(detail::make_input(table, ex.text2, ex.tree2, cfg, false));
        }
    }
    if (wants_trees) {
        for (const auto& t : tasks) {
            PreparedTask tt;
            tt.data = t.data;
            for (const auto& ex : t.data.examples) {
                tt.first.push_back(detail::make_input(table, ex.text, ex.tree, cfg, true));
                if (t.data.kind == TaskKind::pair) tt.second.push_back(detail::make_input(table, ex.text2, ex.tree2, cfg, true));
            }
            tree_tasks.push_back(std::move(tt));
        }
    }

    std::vector<Job> jobs;
    for (std::size_t t = 0; t < tasks.size(); ++t)
        for (std::size_t e = 0; e < cfg.encoders.size(); ++e)
            for (std::size_t d : cfg.dims)
                for (std::uint64_t s : cfg.seeds) jobs.push_back({t, e, d, s});

    std::vector<std::vector<ResultRow>> per_job(jobs.size());
    auto run_one = [&](std::size_t j) {
        const Job& job = jobs[j];
        const auto& enc = cfg.encoders[job.encoder];
        const bool tree_path = enc.base.kind == EncoderKind::tree_lstm;
        const PreparedTask& task = tree_path ? tree_tasks[job.task] : tasks[job.task];
        const auto start = std::chrono::steady_clock::now();
        std::vector<double> acc;
        std::string failure;
        try {
            acc = run_job(cfg, task, enc, table.dim(), job.dim, job.seed);
        } catch (const std::exception& e) {
            failure = e.what();
        }
        const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
        for (std::size_t p = 0; p < cfg.poolings.size(); ++p) {
            ResultRow row;
            row.task = task.data.name;
            row.encoder = enc.label;
            row.dim = job.dim;
            row.pooling = cfg.poolings[p];
            row.seed = job.seed;
            if (failure.empty()) row.accuracy = acc[p];
            row.error_message = failure;
            row.wall_ms = cfg.timing ? static_cast<long long>(elapsed.count()) : 0;
            per_job[j].push_back(std::move(row));
        }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, jobs.size()));
    if (workers == 1) {
        for (std::size_t j = 0; j < jobs.size(); ++j) run_one(j);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> threads;
        for (std::size_t w = 0; w < workers; ++w)
            threads.emplace_back([&] {
                for (std::size_t j = next++; j < jobs.size(); j = next++) run_one(j);
            });
    }

    ExperimentResult result;
    for (auto& rows : per_job)
        for (auto& r : rows) result.rows.push_back(std::move(r));
    std::stable_sort(result.rows.begin(), result.rows.end(), canonical_less);
    return result;
}

/// Writes results.csv, summary.csv, tables.md and (when any job failed) errors.txt.
inline void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentResult& result)
{
    std::filesystem::create_directories(dir);
    const auto summary = aggregate(result);
    {
        std::ofstream out{dir / "results.csv", std::ios::binary};
        write_results_csv(out, result);
    }
    {
        std::ofstream out{dir / "summary.csv", std::ios::binary};
        write_summary_csv(out, summary);
    }
    {
        std::ofstream out{dir / "tables.md", std::ios::binary};
        write_tables_markdown(out, summary);
    }
    std::vector<const ResultRow*> failed;
    for (const auto& r : result.rows)
        if (!r.accuracy) failed.push_back(&r);
    const auto errors_path = dir / "errors.txt";
    if (failed.empty()) {
        std::filesystem::remove(errors_path);
        return;
    }
    std::ofstream out{errors_path, std::ios::binary};
    for (const auto* r : failed)
        out << r->task << ',' << r->encoder << ',' << r->dim << ',' << to_string(r->pooling) << ',' << r->seed << ": "
            << r->error_message << '\n';
}

}  // namespace randenc
