#pragma once

// Binary container for frozen encoders (and exported probes). //
//
// Layout, all integers little-endian:
//   magic      8 bytes  "RNDENC01"
//   header     u32 byte length, then UTF-8 "key=value\n" lines
//   tensors    u32 count, then per tensor:
//                u32 name length, name bytes, u64 rows, u64 cols,
//                rows*cols IEEE-754 binary64 values (row-major, little-endian)

#include "params.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace randenc {

struct Checkpoint {
    std::vector<std::pair<std::string, std::string>> header;
    std::vector<std::pair<std::string, Matrix>> tensors;

    const std::string* find_header(std::string_view key) const
    {
        for (const auto& [k, v] : header)
            if (k == key) return &v;
        return nullptr;
    }

    const std::string& require_header(std::string_view key) const
    {
        if (const auto* v = find_header(key)) return *v;
        throw parse_error{"checkpoint header is missing '" + std::string{key} + "'"};
    }
};

inline constexpr char checkpoint_magic[8] = {'R', 'N', 'D', 'E', 'N', 'C', '0', '1'};

namespace detail {

template <typename UInt>
void write_le(std::ostream& out, UInt v)
{
    char bytes[sizeof(UInt)];
    for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(bytes, sizeof bytes);
}

template <typename UInt>
UInt read_le(std::istream& in)
{
    unsigned char bytes[sizeof(UInt)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof bytes)) throw parse_error{"checkpoint is truncated"};
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
    return v;
}

inline std::string format_real(double x)
{
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return {buf, ptr};
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ckpt)
{
    out.write(checkpoint_magic, sizeof checkpoint_magic);
    std::string header;
    for (const auto& [k, v] : ckpt.header) header += k + "=" + v + "\n";
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& [name, m] : ckpt.tensors) {
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_le<std::uint64_t>(out, m.rows());
        detail::write_le<std::uint64_t>(out, m.cols());
        for (double x : m.values()) detail::write_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
    }
    if (!out) throw error{"failed to write checkpoint"};
}

inline Checkpoint read_checkpoint(std::istream& in)
{
    char magic[sizeof checkpoint_magic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, checkpoint_magic, sizeof magic) != 0)
        throw parse_error{"not a randenc checkpoint (bad magic)"};
    Checkpoint ckpt;
    const auto header_len = detail::read_le<std::uint32_t>(in);
    std::string header(header_len, '\0');
    if (!in.read(header.data(), header_len)) throw parse_error{"checkpoint is truncated"};
    std::istringstream lines{header};
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw parse_error{"malformed checkpoint header line '" + line + "'"};
        ckpt.header.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    const auto count = detail::read_le<std::uint32_t>(in);
    for (std::uint32_t t = 0; t < count; ++t) {
        const auto name_len = detail::read_le<std::uint32_t>(in);
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw parse_error{"checkpoint is truncated"};
        const auto rows = detail::read_le<std::uint64_t>(in);
        const auto cols = detail::read_le<std::uint64_t>(in);
        Matrix m{rows, cols};
        for (double& x : m.values()) x = std::bit_cast<double>(detail::read_le<std::uint64_t>(in));
        ckpt.tensors.emplace_back(std::move(name), std::move(m));
    }
    return ckpt;
}

// Encoders ---------------------------------------------------------------------------------

inline std::vector<std::pair<std::string, std::string>> config_header(const EncoderConfig& cfg)
{
    return {
      {"kind", std::string{to_string(cfg.kind)}},
      {"seed", std::to_string(cfg.seed)},
      {"input_dim", std::to_string(cfg.input_dim)},
      {"output_dim", std::to_string(cfg.output_dim)},
      {"window", std::to_string(cfg.window)},
      {"cnn_bias", cfg.cnn_bias ? "1" : "0"},
      {"heads", std::to_string(cfg.heads)},
      {"layers", std::to_string(cfg.layers)},
      {"positional_encoding", cfg.positional_encoding ? "1" : "0"},
      {"spectral_radius", detail::format_real(cfg.spectral_radius)},
      {"density", detail::format_real(cfg.density)},
      {"leak", detail::format_real(cfg.leak)},
      {"input_scaling", detail::format_real(cfg.input_scaling)},
      {"tree_pool_domain", cfg.tree_pool_domain == TreePoolDomain::all ? "all" : "leaves"},
    };
}

namespace detail {

inline std::uint64_t header_uint(const Checkpoint& c, std::string_view key)
{
    const auto& s = c.require_header(key);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw parse_error{"checkpoint header '" + std::string{key} + "' is not an integer"};
    return v;
}

inline double header_real(const Checkpoint& c, std::string_view key)
{
    const auto& s = c.require_header(key);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw parse_error{"checkpoint header '" + std::string{key} + "' is not a number"};
    return v;
}

/// Weight container of the right kind with default (empty) tensors.
inline EncoderWeights empty_weights(const EncoderConfig& cfg)
{
    switch (cfg.kind) {
    case EncoderKind::borep: return BorepWeights{};
    case EncoderKind::rand_lstm: return BiLstmWeights{};
    case EncoderKind::esn: return EsnWeights{};
    case EncoderKind::cnn: return CnnWeights{};
    case EncoderKind::self_attention: {
        AttentionWeights w;
        w.layers.resize(cfg.layers);
        return w;
    }
    case EncoderKind::tree_lstm: return TreeLstmWeights{};
    }
    throw config_error{"unknown encoder kind"};
}

}  // namespace detail

inline Checkpoint to_checkpoint(const EncoderParams& params)
{
    Checkpoint c;
    c.header = config_header(params.config);
    params.for_each_tensor([&](const std::string& name, const Matrix& m) { c.tensors.emplace_back(name, m); });
    return c;
}

inline EncoderConfig config_from_header(const Checkpoint& c)
{
    EncoderConfig cfg;
    cfg.kind = parse_encoder_kind(c.require_header("kind"));
    cfg.seed = detail::header_uint(c, "seed");
    cfg.input_dim = detail::header_uint(c, "input_dim");
    cfg.output_dim = detail::header_uint(c, "output_dim");
    cfg.window = detail::header_uint(c, "window");
    cfg.cnn_bias = detail::header_uint(c, "cnn_bias") != 0;
    cfg.heads = detail::header_uint(c, "heads");
    cfg.layers = detail::header_uint(c, "layers");
    cfg.positional_encoding = detail::header_uint(c, "positional_encoding") != 0;
    cfg.spectral_radius = detail::header_real(c, "spectral_radius");
    cfg.density = detail::header_real(c, "density");
    cfg.leak = detail::header_real(c, "leak");
    cfg.input_scaling = detail::header_real(c, "input_scaling");
    const auto& domain = c.require_header("tree_pool_domain");
    if (domain != "all" && domain != "leaves") throw parse_error{"bad tree_pool_domain '" + domain + "'"};
    cfg.tree_pool_domain = domain == "all" ? TreePoolDomain::all : TreePoolDomain::leaves;
    return cfg;
}

/// Rebuilds an encoder from stored tensors without re-sampling.
inline EncoderParams from_checkpoint(const Checkpoint& c)
{
    EncoderConfig cfg = config_from_header(c);
    validate(cfg);
    EncoderParams params{cfg, detail::empty_weights(cfg)};
    std::map<std::string, const Matrix*> stored;
    for (const auto& [name, m] : c.tensors) stored.emplace(name, &m);
    std::size_t used = 0;
    params.for_each_tensor([&](const std::string& name, Matrix& m) {
        auto it = stored.find(name);
        if (it == stored.end()) throw parse_error{"checkpoint is missing tensor '" + name + "'"};
        m = *it->second;
        ++used;
    });
    if (used != c.tensors.size()) throw parse_error{"checkpoint holds tensors this encoder does not use"};
    return params;
}

inline void save_encoder(const std::filesystem::path& path, const EncoderParams& params)
{
    std::ofstream out{path, std::ios::binary};
    if (!out) throw error{"cannot open " + path.string() + " for writing"};
    write_checkpoint(out, to_checkpoint(params));
}

inline EncoderParams load_encoder(const std::filesystem::path& path)
{
    std::ifstream in{path, std::ios::binary};
    if (!in) throw error{"cannot open checkpoint " + path.string()};
    return from_checkpoint(read_checkpoint(in));
}

}  // namespace randenc
