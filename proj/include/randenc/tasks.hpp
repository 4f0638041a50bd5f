#pragma once

// Classification task ingestion (TSV + manifest) and the synthetic word-order task. //

#include "embeddings.hpp"
#include "trees.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <variant>

namespace randenc {

enum class TaskKind { single, pair };

struct TaskExample {
    std::string text;
    std::string text2;  // pair tasks only
    std::size_t label = 0;
    std::optional<ParseTree> tree;
    std::optional<ParseTree> tree2;
};

struct ExplicitSplits {
    std::vector<std::size_t> train, dev, test;
};

struct CrossValidation {
    std::size_t folds = 10;
};

struct TaskDataset {
    std::string name;
    TaskKind kind = TaskKind::single;
    std::vector<TaskExample> examples;
    std::vector<std::string> classes;  // index -> label string
    std::variant<ExplicitSplits, CrossValidation> splits;

    bool has_trees() const
    {
        return !examples.empty()
          && std::all_of(examples.begin(), examples.end(), [&](const TaskExample& e) {
                 return e.tree && (kind == TaskKind::single || e.tree2);
             });
    }

    std::vector<std::size_t> labels() const
    {
        std::vector<std::size_t> out;
        for (const auto& e : examples) out.push_back(e.label);
        return out;
    }
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

inline std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

struct RawRow {
    std::string label, text, text2;
};

inline std::vector<RawRow> read_tsv(const std::filesystem::path& path, TaskKind kind)
{
    std::ifstream in{path};
    if (!in) throw error{"cannot open task file " + path.string()};
    std::vector<RawRow> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_tabs(line);
        const std::size_t want = kind == TaskKind::single ? 2 : 3;
        const std::string where = path.string() + " line " + std::to_string(line_no);
        if (fields.size() != want)
            throw parse_error{where + ": expected " + std::to_string(want) + " tab-separated fields, found "
                              + std::to_string(fields.size())};
        RawRow row{trim(fields[0]), fields[1], want == 3 ? fields[2] : std::string{}};
        if (row.label.empty()) throw parse_error{where + ": empty label"};
        if (trim(row.text).empty() || (kind == TaskKind::pair && trim(row.text2).empty()))
            throw parse_error{where + ": empty sentence"};
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::vector<ParseTree> read_tree_file(const std::filesystem::path& path, bool lowercase)
{
    std::ifstream in{path};
    if (!in) throw error{"cannot open tree file " + path.string()};
    std::vector<ParseTree> trees;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            trees.push_back(read_tree_line(line, lowercase));
        } catch (const parse_error& e) {
            throw parse_error{path.string() + " line " + std::to_string(line_no) + ": " + e.what()};
        }
    }
    return trees;
}

}  // namespace detail

/// Key-value manifest: `name=`, `kind=single|pair`, then either `train=` + `test=` (+ optional
/// `dev=`) or `data=` + `split=cv<k>`; optional `trees=` / `trees2=` hold one bracketed parse
/// per example, in file order (train, dev, test for explicit splits). Relative paths resolve
/// against the manifest's directory. '#' starts a comment line.
///
/// Labels map to class indices by first appearance in the training data (or the whole data file
/// under cross-validation); a dev or test label never seen in training is an error.
inline TaskDataset load_task(const std::filesystem::path& manifest, bool lowercase = true)
{
    std::ifstream in{manifest};
    if (!in) throw error{"cannot open task manifest " + manifest.string()};
    std::map<std::string, std::string> keys;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw parse_error{manifest.string() + " line " + std::to_string(line_no) + ": expected key=value"};
        const std::string key = detail::trim(line.substr(0, eq));
        static const std::array<std::string_view, 9> known{"name", "kind", "train", "dev", "test",
                                                           "data", "split", "trees", "trees2"};
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw parse_error{manifest.string() + " line " + std::to_string(line_no) + ": unknown key '" + key + "'"};
        keys[key] = detail::trim(line.substr(eq + 1));
    }
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        auto it = keys.find(k);
        if (it == keys.end() || it->second.empty()) return std::nullopt;
        return it->second;
    };
    const auto base = manifest.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path{p};
        return path.is_relative() ? base / path : path;
    };

    TaskDataset ds;
    ds.name = get("name").value_or(manifest.stem().string());
    const std::string kind = get("kind").value_or("");
    if (kind == "single") ds.kind = TaskKind::single;
    else if (kind == "pair") ds.kind = TaskKind::pair;
    else throw config_error{manifest.string() + ": unknown task kind '" + kind + "' (expected single or pair)"};

    std::vector<std::pair<std::vector<detail::RawRow>, int>> parts;  // rows, split id (0 train, 1 dev, 2 test)
    if (auto data = get("data")) {
        if (get("train") || get("test") || get("dev"))
            throw config_error{manifest.string() + ": use either data= with split= or train=/dev=/test="};
        const std::string split = get("split").value_or("");
        if (split.size() < 3 || split.rfind("cv", 0) != 0)
            throw config_error{manifest.string() + ": data= needs split=cv<k>"};
        std::size_t k = 0;
        auto [ptr, ec] = std::from_chars(split.data() + 2, split.data() + split.size(), k);
        if (ec != std::errc{} || ptr != split.data() + split.size() || k < 2)
            throw config_error{manifest.string() + ": bad split '" + split + "'"};
        ds.splits = CrossValidation{k};
        parts.emplace_back(detail::read_tsv(resolve(*data), ds.kind), 0);
    } else {
        if (!get("train") || !get("test")) throw config_error{manifest.string() + ": needs train= and test= (or data=)"};
        if (auto split = get("split"); split && *split != "explicit")
            throw config_error{manifest.string() + ": split=" + *split + " requires data="};
        ds.splits = ExplicitSplits{};
        parts.emplace_back(detail::read_tsv(resolve(*get("train")), ds.kind), 0);
        if (auto dev = get("dev")) parts.emplace_back(detail::read_tsv(resolve(*dev), ds.kind), 1);
        parts.emplace_back(detail::read_tsv(resolve(*get("test")), ds.kind), 2);
    }

    std::map<std::string, std::size_t> class_index;
    for (auto& [rows, split_id] : parts) {
        for (auto& row : rows) {
            auto it = class_index.find(row.label);
            if (it == class_index.end()) {
                if (split_id != 0)
                    throw parse_error{manifest.string() + ": label '" + row.label
                                      + "' appears in dev/test but not in the training data"};
                it = class_index.emplace(row.label, ds.classes.size()).first;
                ds.classes.push_back(row.label);
            }
            const std::size_t idx = ds.examples.size();
            ds.examples.push_back({std::move(row.text), std::move(row.text2), it->second, {}, {}});
            if (auto* s = std::get_if<ExplicitSplits>(&ds.splits))
                (split_id == 0 ? s->train : split_id == 1 ? s->dev : s->test).push_back(idx);
        }
    }
    if (ds.classes.size() < 2) throw config_error{manifest.string() + ": a task needs at least two classes"};
    if (auto* cv = std::get_if<CrossValidation>(&ds.splits); cv && ds.examples.size() < cv->folds)
        throw config_error{manifest.string() + ": " + std::to_string(ds.examples.size()) + " examples cannot fill "
                           + std::to_string(cv->folds) + " folds"};

    auto attach = [&](const std::string& key, bool second) {
        auto path = get(key);
        if (!path) return;
        if (second && ds.kind != TaskKind::pair) throw config_error{manifest.string() + ": trees2= is for pair tasks"};
        auto trees = detail::read_tree_file(resolve(*path), lowercase);
        if (trees.size() != ds.examples.size())
            throw parse_error{manifest.string() + ": " + key + " has " + std::to_string(trees.size())
                              + " parses for " + std::to_string(ds.examples.size()) + " examples"};
        for (std::size_t i = 0; i < trees.size(); ++i) (second ? ds.examples[i].tree2 : ds.examples[i].tree) = std::move(trees[i]);
    };
    attach("trees", false);
    attach("trees2", true);
    return ds;
}

// Synthetic word-order task ----------------------------------------------------------------

inline constexpr std::string_view synthetic_marker_a = "markera";
inline constexpr std::string_view synthetic_marker_b = "markerb";

/// Letters-only filler word for index i ("fa", "fb", ..., "fz", "fba", ...), so token cleanup
/// leaves it untouched.
inline std::string synthetic_filler(std::size_t i)
{
    std::string digits;
    do {
        digits.insert(digits.begin(), static_cast<char>('a' + i % 26));
        i /= 26;
    } while (i);
    return "f" + digits;
}

/// Label rule of the synthetic task: 1 iff some marker A occurs before some marker B.
inline bool marker_a_precedes_b(const std::vector<std::string>& tokens)
{
    bool seen_a = false;
    for (const auto& t : tokens) {
        if (t == synthetic_marker_a) seen_a = true;
        else if (t == synthetic_marker_b && seen_a) return true;
    }
    return false;
}

/// Random binary bracketing of a token span, e.g. "(X (X fa) (X (X markera) (X fb)))".
inline std::string random_bracketing(const std::vector<std::string>& tokens, SeededRng& rng)
{
    std::function<std::string(std::size_t, std::size_t)> build = [&](std::size_t lo, std::size_t hi) -> std::string {
        if (hi - lo == 1) return "(X " + tokens[lo] + ")";
        const std::size_t cut = lo + 1 + rng.below(hi - lo - 1);
        return "(X " + build(lo, cut) + " " + build(cut, hi) + ")";
    };
    return build(0, tokens.size());
}

/// Balanced binary task. Sentences of 4-12 tokens draw each token independently: marker A or B
/// with probability 0.12 each, otherwise a uniform filler from `vocab` words. Label 1 iff an A
/// precedes a B. Draws are rejected once their class holds n/2 examples. The two classes are
/// then shuffled and interleaved, so the first 60% (train), next 20% (dev) and last 20% (test)
/// are each balanced. Every example carries a random binary parse.
inline TaskDataset make_synthetic_order_task(std::size_t n, std::size_t vocab, std::uint64_t seed)
{
    if (n == 0 || n % 2) throw config_error{"synthetic task size must be even and positive"};
    if (vocab == 0) throw config_error{"synthetic task needs a non-empty filler vocabulary"};
    SeededRng rng{seed};
    TaskDataset ds;
    ds.name = "synthetic_order";
    ds.kind = TaskKind::single;
    ds.classes = {"0", "1"};
    std::array<std::vector<TaskExample>, 2> by_class;
    while (by_class[0].size() + by_class[1].size() < n) {
        const std::size_t length = 4 + rng.below(9);
        std::vector<std::string> tokens;
        for (std::size_t t = 0; t < length; ++t) {
            const double u = rng.uniform01();
            if (u < 0.12) tokens.emplace_back(synthetic_marker_a);
            else if (u < 0.24) tokens.emplace_back(synthetic_marker_b);
            else tokens.push_back(synthetic_filler(rng.below(vocab)));
        }
        const std::size_t label = marker_a_precedes_b(tokens) ? 1 : 0;
        const std::string bracketing = random_bracketing(tokens, rng);
        if (by_class[label].size() == n / 2) continue;
        std::string text;
        for (const auto& t : tokens) text += (text.empty() ? "" : " ") + t;
        by_class[label].push_back({std::move(text), {}, label, read_tree_line(bracketing), {}});
    }
    // Rejection fills the commoner class first; without reordering the tail would be one class.
    rng.shuffle(by_class[0]);
    rng.shuffle(by_class[1]);
    for (std::size_t i = 0; i < n / 2; ++i) {
        ds.examples.push_back(std::move(by_class[0][i]));
        ds.examples.push_back(std::move(by_class[1][i]));
    }
    ExplicitSplits splits;
    const std::size_t train_end = n * 6 / 10;
    const std::size_t dev_end = n * 8 / 10;
    for (std::size_t i = 0; i < n; ++i) (i < train_end ? splits.train : i < dev_end ? splits.dev : splits.test).push_back(i);
    ds.splits = std::move(splits);
    return ds;
}

/// Gaussian N(0, 1/dim) vectors for the synthetic vocabulary (fillers then the two markers).
inline WordEmbeddingTable make_synthetic_embeddings(std::size_t vocab, std::size_t dim, std::uint64_t seed)
{
    if (dim == 0) throw config_error{"synthetic embeddings need a positive dimension"};
    SeededRng rng{seed};
    WordEmbeddingTable table{dim};
    auto draw = [&] {
        Vector v(dim);
        for (double& x : v) x = rng.normal() / std::sqrt(static_cast<double>(dim));
        return v;
    };
    for (std::size_t i = 0; i < vocab; ++i) table.insert(synthetic_filler(i), draw());
    table.insert(std::string{synthetic_marker_a}, draw());
    table.insert(std::string{synthetic_marker_b}, draw());
    return table;
}

}  // namespace randenc
