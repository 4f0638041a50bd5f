#pragma once

// Encoder configuration and frozen random parameters. //
//
// Every parameter tensor is drawn from one SeededRng(seed), in the order its weight struct
// lists it in `for_each`. That order is part of the format: the same (kind, seed, dims,
// hyperparameters) reproduces identical weights in any conforming implementation.
//
//   borep           projection[D' x D]                       uniform +-1/sqrt(D)
//   rand_lstm       forward then backward LSTM direction      uniform +-1/sqrt(D)
//   esn             forward {input, reservoir} then backward  see sample_esn_direction
//   cnn             filter[D' x kD], bias[D' x 1]             uniform +-1/sqrt(D)
//   self_attention  up[D' x D], then per layer q, k, v, out   xavier uniform, no biases
//   tree_lstm       BiLSTM (as rand_lstm), then tree cell     +-1/sqrt(D), +-1/sqrt(D')
//
// An LSTM direction is {W_i, U_i, b_i, W_f, U_f, b_f, W_g, U_g, b_g, W_o, U_o, b_o}.

#include "numerics.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace randenc {

enum class EncoderKind { borep, rand_lstm, esn, cnn, self_attention, tree_lstm };

inline constexpr std::array<EncoderKind, 6> all_encoder_kinds{
  EncoderKind::borep, EncoderKind::rand_lstm,      EncoderKind::esn,
  EncoderKind::cnn,   EncoderKind::self_attention, EncoderKind::tree_lstm};

inline std::string_view to_string(EncoderKind kind)
{
    switch (kind) {
    case EncoderKind::borep: return "borep";
    case EncoderKind::rand_lstm: return "rand_lstm";
    case EncoderKind::esn: return "esn";
    case EncoderKind::cnn: return "cnn";
    case EncoderKind::self_attention: return "self_attention";
    case EncoderKind::tree_lstm: return "tree_lstm";
    }
    return "unknown";
}

inline EncoderKind parse_encoder_kind(std::string_view name)
{
    for (auto kind : all_encoder_kinds)
        if (to_string(kind) == name) return kind;
    throw config_error{"unknown encoder kind '" + std::string{name} + "'"};
}

enum class TreePoolDomain { all, leaves };

/// Everything that determines an encoder's parameters.
struct EncoderConfig {
    EncoderKind kind = EncoderKind::borep;
    std::uint64_t seed = 1;
    std::size_t input_dim = 0;   // D
    std::size_t output_dim = 0;  // D'

    // cnn
    std::size_t window = 3;
    bool cnn_bias = true;

    // self_attention
    std::size_t heads = 8;
    std::size_t layers = 2;
    bool positional_encoding = true;

    // esn
    double spectral_radius = 0.95;
    double density = 0.1;
    double leak = 1.0;
    double input_scaling = 1.0;

    // tree_lstm
    TreePoolDomain tree_pool_domain = TreePoolDomain::all;

    bool operator==(const EncoderConfig&) const = default;
};

/// Throws config_error when the configuration cannot be instantiated.
inline void validate(const EncoderConfig& cfg)
{
    if (cfg.input_dim == 0 || cfg.output_dim == 0) throw config_error{"encoder dimensions must be positive"};
    switch (cfg.kind) {
    case EncoderKind::rand_lstm:
    case EncoderKind::tree_lstm:
        if (cfg.output_dim % 2) throw config_error{"bidirectional encoders need an even output dimension"};
        break;
    case EncoderKind::esn:
        if (cfg.output_dim % 2) throw config_error{"bidirectional encoders need an even output dimension"};
        if (!(cfg.spectral_radius > 0.0)) throw config_error{"esn spectral radius must be positive"};
        if (!(cfg.density > 0.0 && cfg.density <= 1.0)) throw config_error{"esn density must lie in (0, 1]"};
        if (!(cfg.leak > 0.0 && cfg.leak <= 1.0)) throw config_error{"esn leak rate must lie in (0, 1]"};
        break;
    case EncoderKind::cnn:
        if (cfg.window == 0) throw config_error{"cnn window must be at least 1"};
        break;
    case EncoderKind::self_attention:
        if (cfg.heads == 0 || cfg.output_dim % cfg.heads)
            throw config_error{"attention output dimension must be divisible by the head count"};
        if (cfg.layers == 0) throw config_error{"attention needs at least one layer"};
        if (cfg.positional_encoding && cfg.output_dim % 2)
            throw config_error{"sinusoidal encodings need an even output dimension"};
        break;
    case EncoderKind::borep: break;
    }
}

// Weight structs ---------------------------------------------------------------------------

struct BorepWeights {
    Matrix projection;  // D' x D

    template <typename F>
    void for_each(F&& f)
    {
        f("projection", projection);
    }
};

/// One LSTM direction; gate order i, f, g, o.
struct LstmDirection {
    std::array<Matrix, 4> input;      // H x D
    std::array<Matrix, 4> recurrent;  // H x H
    std::array<Matrix, 4> bias;       // H x 1

    std::size_t hidden() const noexcept { return input[0].rows(); }

    template <typename F>
    void for_each(std::string_view prefix, F&& f)
    {
        static constexpr std::array<char, 4> gate{'i', 'f', 'g', 'o'};
        for (std::size_t g = 0; g < 4; ++g) {
            f(std::string{prefix} + "W_" + gate[g], input[g]);
            f(std::string{prefix} + "U_" + gate[g], recurrent[g]);
            f(std::string{prefix} + "b_" + gate[g], bias[g]);
        }
    }
};

struct BiLstmWeights {
    LstmDirection forward;
    LstmDirection backward;

    template <typename F>
    void for_each(F&& f)
    {
        forward.for_each("fw.", f);
        backward.for_each("bw.", f);
    }
};

struct EsnDirection {
    Matrix input;      // H x D
    Matrix reservoir;  // H x H, sparse, rescaled to the target spectral radius
};

struct EsnWeights {
    EsnDirection forward;
    EsnDirection backward;

    template <typename F>
    void for_each(F&& f)
    {
        f("fw.input", forward.input);
        f("fw.reservoir", forward.reservoir);
        f("bw.input", backward.input);
        f("bw.reservoir", backward.reservoir);
    }
};

/// Filter column j*D + d holds input feature d at window offset j.
struct CnnWeights {
    Matrix filter;  // D' x kD
    Matrix bias;    // D' x 1

    template <typename F>
    void for_each(F&& f)
    {
        f("filter", filter);
        f("bias", bias);
    }
};

/// Head h owns rows [h*d_k, (h+1)*d_k) of query, key and value.
struct AttentionLayer {
    Matrix query;   // D' x D'
    Matrix key;     // D' x D'
    Matrix value;   // D' x D'
    Matrix output;  // D' x D'
};

struct AttentionWeights {
    Matrix up;  // D' x D
    std::vector<AttentionLayer> layers;

    template <typename F>
    void for_each(F&& f)
    {
        f("up", up);
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            f(p + "query", layers[l].query);
            f(p + "key", layers[l].key);
            f(p + "value", layers[l].value);
            f(p + "output", layers[l].output);
        }
    }
};

/// Binary constituency TreeLSTM cell (two forget gates) over hidden width D'.
/// Leaves read x through input_*; internal nodes compose their children's h only.
struct TreeCellWeights {
    Matrix input_i, input_o, input_u;        // D' x D'
    Matrix left_i, right_i;                  // D' x D'
    Matrix left_fl, right_fl;                // forget gate of the left child
    Matrix left_fr, right_fr;                // forget gate of the right child
    Matrix left_o, right_o;
    Matrix left_u, right_u;
    Matrix bias_i, bias_fl, bias_fr, bias_o, bias_u;  // D' x 1

    template <typename F>
    void for_each(F&& f)
    {
        f("tree.input_i", input_i);
        f("tree.input_o", input_o);
        f("tree.input_u", input_u);
        f("tree.left_i", left_i);
        f("tree.right_i", right_i);
        f("tree.left_fl", left_fl);
        f("tree.right_fl", right_fl);
        f("tree.left_fr", left_fr);
        f("tree.right_fr", right_fr);
        f("tree.left_o", left_o);
        f("tree.right_o", right_o);
        f("tree.left_u", left_u);
        f("tree.right_u", right_u);
        f("tree.bias_i", bias_i);
        f("tree.bias_fl", bias_fl);
        f("tree.bias_fr", bias_fr);
        f("tree.bias_o", bias_o);
        f("tree.bias_u", bias_u);
    }
};

struct TreeLstmWeights {
    BiLstmWeights bilstm;
    TreeCellWeights cell;

    template <typename F>
    void for_each(F&& f)
    {
        bilstm.for_each(f);
        cell.for_each(f);
    }
};

using EncoderWeights = std::variant<BorepWeights, BiLstmWeights, EsnWeights, CnnWeights,
                                    AttentionWeights, TreeLstmWeights>;

/// A sampled encoder. Encoding functions only ever read it.
struct EncoderParams {
    EncoderConfig config;
    EncoderWeights weights;

    /// Visits (name, matrix) for every stored tensor, in sampling order.
    template <typename F>
    void for_each_tensor(F&& f)
    {
        std::visit([&](auto& w) { w.for_each(f); }, weights);
    }
    template <typename F>
    void for_each_tensor(F&& f) const
    {
        auto& self = const_cast<EncoderParams&>(*this);
        std::visit([&](auto& w) { w.for_each([&](const std::string& name, const Matrix& m) { f(name, m); }); },
                   self.weights);
    }
};

// Sampling ---------------------------------------------------------------------------------

inline LstmDirection sample_lstm_direction(SeededRng& rng, std::size_t input_dim, std::size_t hidden)
{
    LstmDirection dir;
    for (std::size_t g = 0; g < 4; ++g) {
        dir.input[g] = uniform_init(rng, hidden, input_dim, input_dim);
        dir.recurrent[g] = uniform_init(rng, hidden, hidden, input_dim);
        dir.bias[g] = uniform_init(rng, hidden, 1, input_dim);
    }
    return dir;
}

inline BiLstmWeights sample_bilstm(SeededRng& rng, std::size_t input_dim, std::size_t output_dim)
{
    BiLstmWeights w;
    w.forward = sample_lstm_direction(rng, input_dim, output_dim / 2);
    w.backward = sample_lstm_direction(rng, input_dim, output_dim / 2);
    return w;
}

/// Input weights uniform +-input_scaling/sqrt(D). Reservoir entries are drawn row-major as
/// (value uniform in [-1, 1), keep draw uniform in [0, 1)); an entry survives when keep < density.
/// The reservoir is then rescaled to the target spectral radius. A mask with zero spectral
/// radius (possible for tiny reservoirs) is redrawn, continuing the same stream.
inline EsnDirection sample_esn_direction(SeededRng& rng, const EncoderConfig& cfg)
{
    const std::size_t hidden = cfg.output_dim / 2;
    EsnDirection dir;
    dir.input = uniform_matrix(rng, hidden, cfg.input_dim,
                               cfg.input_scaling / std::sqrt(static_cast<double>(cfg.input_dim)));
    for (int attempt = 0; attempt < 64; ++attempt) {
        dir.reservoir = Matrix{hidden, hidden};
        for (double& x : dir.reservoir.values()) {
            const double value = rng.uniform(-1.0, 1.0);
            const double keep = rng.uniform01();
            x = keep < cfg.density ? value : 0.0;
        }
        const auto radius = spectral_radius(dir.reservoir, 50000, 1e-12);
        if (radius.value > 1e-9) {
            dir.reservoir *= cfg.spectral_radius / radius.value;
            return dir;
        }
    }
    throw config_error{"esn: could not draw a reservoir with non-zero spectral radius; raise density"};
}

inline EncoderWeights sample_weights(const EncoderConfig& cfg)
{
    SeededRng rng{cfg.seed};
    const std::size_t d = cfg.input_dim;
    const std::size_t dp = cfg.output_dim;
    switch (cfg.kind) {
    case EncoderKind::borep: return BorepWeights{uniform_init(rng, dp, d, d)};
    case EncoderKind::rand_lstm: return sample_bilstm(rng, d, dp);
    case EncoderKind::esn: {
        EsnWeights w;
        w.forward = sample_esn_direction(rng, cfg);
        w.backward = sample_esn_direction(rng, cfg);
        return w;
    }
    case EncoderKind::cnn: {
        CnnWeights w;
        w.filter = uniform_init(rng, dp, cfg.window * d, d);
        w.bias = uniform_init(rng, dp, 1, d);
        if (!cfg.cnn_bias) w.bias.fill(0.0);
        return w;
    }
    case EncoderKind::self_attention: {
        AttentionWeights w;
        w.up = xavier_uniform_init(rng, dp, d);
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            AttentionLayer layer;
            layer.query = xavier_uniform_init(rng, dp, dp);
            layer.key = xavier_uniform_init(rng, dp, dp);
            layer.value = xavier_uniform_init(rng, dp, dp);
            layer.output = xavier_uniform_init(rng, dp, dp);
            w.layers.push_back(std::move(layer));
        }
        return w;
    }
    case EncoderKind::tree_lstm: {
        TreeLstmWeights w;
        w.bilstm = sample_bilstm(rng, d, dp);
        w.cell.for_each([&](const std::string& name, Matrix& m) {
            const bool is_bias = name.find("bias") != std::string::npos;
            m = uniform_init(rng, dp, is_bias ? 1 : dp, dp);
        });
        return w;
    }
    }
    throw config_error{"unknown encoder kind"};
}

/// Validates the configuration and draws its parameters.
inline EncoderParams make_encoder(const EncoderConfig& cfg)
{
    validate(cfg);
    return EncoderParams{cfg, sample_weights(cfg)};
}

/// CNN with window 1 and zero bias whose filter is the BOREP projection.
inline EncoderParams cnn_from_borep(const EncoderParams& borep)
{
    const auto& w = std::get<BorepWeights>(borep.weights);
    EncoderConfig cfg = borep.config;
    cfg.kind = EncoderKind::cnn;
    cfg.window = 1;
    cfg.cnn_bias = false;
    return EncoderParams{cfg, CnnWeights{w.projection, Matrix{w.projection.rows(), 1}}};
}

}  // namespace randenc
