#pragma once

// Fixed word vectors: GloVe text loading, tokenisation, token cleanup and sentence lookup. //

#include "numerics.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace randenc {

/// Vocabulary mapped to fixed vectors of a single dimension.
class WordEmbeddingTable {
    std::size_t dim_ = 0;
    std::unordered_map<std::string, Vector> entries_;

public:
    WordEmbeddingTable() = default;
    explicit WordEmbeddingTable(std::size_t dim) : dim_{dim} {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return entries_.size(); }

    /// Adds a word; returns false (and keeps the existing vector) for duplicates.
    bool insert(std::string word, Vector vec)
    {
        if (vec.size() != dim_) throw error{"embedding dimension mismatch for '" + word + "'"};
        return entries_.emplace(std::move(word), std::move(vec)).second;
    }

    const Vector* find(const std::string& word) const
    {
        auto it = entries_.find(word);
        return it == entries_.end() ? nullptr : &it->second;
    }

    bool contains(const std::string& word) const { return entries_.count(word) != 0; }
};

struct LoadedEmbeddings {
    WordEmbeddingTable table;
    std::size_t duplicates = 0;
};

namespace detail {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

inline std::vector<std::string_view> split_whitespace(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        const std::size_t start = i;
        while (i < line.size() && !is_space(line[i])) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

inline std::optional<double> parse_real(std::string_view s)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace detail

/// Reads GloVe text vectors (`word v1 ... vD` per line) from a stream.
/// Duplicate words keep their first vector. Blank lines are skipped.
inline LoadedEmbeddings read_embeddings(std::istream& in, std::optional<std::size_t> expected_dim = {})
{
    LoadedEmbeddings result;
    std::optional<std::size_t> dim = expected_dim;
    if (dim) result.table = WordEmbeddingTable{*dim};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto fields = detail::split_whitespace(line);
        if (fields.empty()) continue;
        const std::size_t d = fields.size() - 1;
        if (d == 0) throw parse_error{"embeddings line " + std::to_string(line_no) + ": no vector values"};
        if (!dim) {
            dim = d;
            result.table = WordEmbeddingTable{d};
        } else if (d != *dim) {
            throw parse_error{"embeddings line " + std::to_string(line_no) + ": expected "
                              + std::to_string(*dim) + " values, found " + std::to_string(d)};
        }
        Vector vec(d);
        for (std::size_t i = 0; i < d; ++i) {
            auto v = detail::parse_real(fields[i + 1]);
            if (!v)
                throw parse_error{"embeddings line " + std::to_string(line_no) + ": bad number '"
                                  + std::string{fields[i + 1]} + "'"};
            vec[i] = *v;
        }
        if (!result.table.insert(std::string{fields[0]}, std::move(vec))) ++result.duplicates;
    }
    if (result.table.size() == 0) throw parse_error{"embeddings file contains no entries"};
    return result;
}

inline LoadedEmbeddings load_embeddings(const std::filesystem::path& path,
                                        std::optional<std::size_t> expected_dim = {})
{
    std::ifstream in{path};
    if (!in) throw error{"cannot open embeddings file " + path.string()};
    return read_embeddings(in, expected_dim);
}

/// Writes `word v1 ... vD` lines with round-trip precision.
inline void write_embedding_line(std::ostream& out, std::string_view word, std::span<const double> vec)
{
    out << word;
    char buf[32];
    for (double x : vec) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
        out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
}

// Tokens -----------------------------------------------------------------------------------

/// Whitespace split; optional ASCII lowercasing.
inline std::vector<std::string> tokenize(std::string_view text, bool lowercase = true)
{
    std::vector<std::string> tokens;
    for (auto field : detail::split_whitespace(text)) {
        std::string tok{field};
        if (lowercase)
            for (char& c : tok)
                if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

inline constexpr std::string_view empty_token_placeholder = "*";

namespace detail {

inline bool is_punct_or_symbol(UChar32 cp)
{
    return (U_GET_GC_MASK(cp) & (U_GC_P_MASK | U_GC_S_MASK)) != 0;
}

inline bool is_decimal_digit(UChar32 cp) { return u_charType(cp) == U_DECIMAL_DIGIT_NUMBER; }

}  // namespace detail

/// Token cleanup for the parse-tree path.
///
/// Punctuation and symbol code points (Unicode P* and S*) are removed. Decimal digits (Nd)
/// survive only when the remaining token consists solely of digits. A token left empty becomes
/// "*". Token count is preserved. Invalid UTF-8 bytes are dropped.
inline std::string clean_token(std::string_view raw)
{
    std::vector<UChar32> kept;
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(raw.data());
    const auto length = static_cast<std::int32_t>(raw.size());
    std::int32_t i = 0;
    while (i < length) {
        UChar32 cp;
        U8_NEXT(bytes, i, length, cp);
        if (cp < 0 || detail::is_punct_or_symbol(cp)) continue;
        kept.push_back(cp);
    }
    const bool all_digits = !kept.empty()
      && std::all_of(kept.begin(), kept.end(), [](UChar32 cp) { return detail::is_decimal_digit(cp); });
    std::string out;
    for (UChar32 cp : kept) {
        if (!all_digits && detail::is_decimal_digit(cp)) continue;
        char buf[U8_MAX_LENGTH];
        std::int32_t n = 0;
        UBool error_flag = false;
        U8_APPEND(reinterpret_cast<std::uint8_t*>(buf), n, U8_MAX_LENGTH, cp, error_flag);
        if (!error_flag) out.append(buf, static_cast<std::size_t>(n));
    }
    if (out.empty()) out = empty_token_placeholder;
    return out;
}

inline std::vector<std::string> clean_tokens(const std::vector<std::string>& raw)
{
    std::vector<std::string> out;
    out.reserve(raw.size());
    for (const auto& t : raw) out.push_back(clean_token(t));
    return out;
}

/// A sentence as looked-up word vectors.
struct TokenSequence {
    std::vector<std::string> tokens;
    std::vector<Vector> vectors;

    std::size_t length() const noexcept { return vectors.size(); }
    std::size_t dim() const noexcept { return vectors.empty() ? 0 : vectors.front().size(); }

    /// The vectors as a T x D matrix.
    Matrix as_matrix() const
    {
        Matrix m{length(), dim()};
        for (std::size_t t = 0; t < length(); ++t)
            std::copy(vectors[t].begin(), vectors[t].end(), m.row(t).begin());
        return m;
    }
};

/// Looks tokens up, dropping out-of-vocabulary words. A sentence with no known word becomes a
/// single zero vector tagged with the placeholder token.
inline TokenSequence embed_sentence(const WordEmbeddingTable& table, const std::vector<std::string>& tokens)
{
    if (tokens.empty()) throw error{"embed_sentence: empty token list"};
    TokenSequence seq;
    for (const auto& tok : tokens) {
        if (const Vector* v = table.find(tok)) {
            seq.tokens.push_back(tok);
            seq.vectors.push_back(*v);
        }
    }
    if (seq.vectors.empty()) {
        seq.tokens.emplace_back(empty_token_placeholder);
        seq.vectors.emplace_back(table.dim(), 0.0);
    }
    return seq;
}

/// Position-preserving lookup: unknown words map to zero vectors. Used where tokens must stay
/// aligned with parse-tree leaves.
inline TokenSequence embed_aligned(const WordEmbeddingTable& table, const std::vector<std::string>& tokens)
{
    if (tokens.empty()) throw error{"embed_aligned: empty token list"};
    TokenSequence seq;
    seq.tokens = tokens;
    for (const auto& tok : tokens) {
        const Vector* v = table.find(tok);
        seq.vectors.push_back(v ? *v : Vector(table.dim(), 0.0));
    }
    return seq;
}

}  // namespace randenc
