#pragma once

// Forward passes of the frozen sequence encoders, positional encodings and temporal pooling. //

#include "embeddings.hpp"
#include "numerics.hpp"
#include "params.hpp"

#include <cmath>

namespace randenc {

/// Encoder output H: one row per temporal position (T x D').
using ContextMatrix = Matrix;

enum class PoolingKind { max, mean };

inline std::string_view to_string(PoolingKind kind) { return kind == PoolingKind::max ? "max" : "mean"; }

inline PoolingKind parse_pooling_kind(std::string_view name)
{
    if (name == "max") return PoolingKind::max;
    if (name == "mean") return PoolingKind::mean;
    throw config_error{"unknown pooling '" + std::string{name} + "'"};
}

/// Fixed-length sentence representation and where it came from.
struct SentenceEmbedding {
    Vector values;
    EncoderKind encoder = EncoderKind::borep;
    std::uint64_t seed = 0;
    PoolingKind pooling = PoolingKind::max;
};

namespace detail {

inline void check_input(const EncoderParams& params, EncoderKind kind, const TokenSequence& seq)
{
    if (params.config.kind != kind)
        throw config_error{"encoder called with parameters of kind " + std::string{to_string(params.config.kind)}};
    if (seq.length() == 0) throw error{"cannot encode an empty sequence"};
    for (const auto& v : seq.vectors)
        if (v.size() != params.config.input_dim)
            throw error{"token vector dimension " + std::to_string(v.size()) + " does not match encoder input "
                        + std::to_string(params.config.input_dim)};
}

}  // namespace detail

// BOREP ------------------------------------------------------------------------------------

/// Row t = projection * e_t.
inline ContextMatrix encode_borep(const EncoderParams& params, const TokenSequence& seq)
{
    detail::check_input(params, EncoderKind::borep, seq);
    const auto& w = std::get<BorepWeights>(params.weights);
    return matmul_transposed(seq.as_matrix(), w.projection);
}

// LSTM -------------------------------------------------------------------------------------

/// Runs one LSTM direction from a zero state. Row t of the result is h_t; `reverse` walks the
/// sequence from the end but still stores h at the position it was computed for.
inline Matrix run_lstm_direction(const LstmDirection& dir, const Matrix& inputs, bool reverse)
{
    const std::size_t steps = inputs.rows();
    const std::size_t hidden = dir.hidden();
    Matrix out{steps, hidden};
    Vector h(hidden, 0.0), c(hidden, 0.0);
    std::array<Vector, 4> z;
    for (std::size_t n = 0; n < steps; ++n) {
        const std::size_t t = reverse ? steps - 1 - n : n;
        for (std::size_t g = 0; g < 4; ++g) {
            z[g] = matvec(dir.input[g], inputs.row(t));
            matvec_add(dir.recurrent[g], h, z[g]);
            for (std::size_t j = 0; j < hidden; ++j) z[g][j] += dir.bias[g](j, 0);
        }
        for (std::size_t j = 0; j < hidden; ++j) {
            const double i = sigmoid(z[0][j]);
            const double f = sigmoid(z[1][j]);
            const double g = std::tanh(z[2][j]);
            const double o = sigmoid(z[3][j]);
            c[j] = f * c[j] + i * g;
            h[j] = o * std::tanh(c[j]);
        }
        std::copy(h.begin(), h.end(), out.row(t).begin());
    }
    return out;
}

/// Concatenates forward and backward states per position.
inline Matrix concat_directions(const Matrix& fw, const Matrix& bw)
{
    Matrix out{fw.rows(), fw.cols() + bw.cols()};
    for (std::size_t t = 0; t < fw.rows(); ++t) {
        auto row = out.row(t);
        std::copy(fw.row(t).begin(), fw.row(t).end(), row.begin());
        std::copy(bw.row(t).begin(), bw.row(t).end(), row.begin() + static_cast<std::ptrdiff_t>(fw.cols()));
    }
    return out;
}

inline Matrix run_bilstm(const BiLstmWeights& w, const Matrix& inputs)
{
    return concat_directions(run_lstm_direction(w.forward, inputs, false),
                             run_lstm_direction(w.backward, inputs, true));
}

inline ContextMatrix encode_rand_lstm(const EncoderParams& params, const TokenSequence& seq)
{
    detail::check_input(params, EncoderKind::rand_lstm, seq);
    return run_bilstm(std::get<BiLstmWeights>(params.weights), seq.as_matrix());
}

// ESN --------------------------------------------------------------------------------------

/// Leaky reservoir update x_t = (1-a) x_{t-1} + a tanh(W_in e_t + W_rec x_{t-1}).
/// `initial` defaults to the zero state.
inline Matrix run_esn_direction(const EsnDirection& dir, const Matrix& inputs, double leak, bool reverse,
                                std::optional<Vector> initial = {})
{
    const std::size_t steps = inputs.rows();
    const std::size_t hidden = dir.reservoir.rows();
    Vector x = initial ? std::move(*initial) : Vector(hidden, 0.0);
    if (x.size() != hidden) throw error{"esn initial state has the wrong size"};
    Matrix out{steps, hidden};
    for (std::size_t n = 0; n < steps; ++n) {
        const std::size_t t = reverse ? steps - 1 - n : n;
        Vector pre = matvec(dir.input, inputs.row(t));
        matvec_add(dir.reservoir, x, pre);
        for (std::size_t j = 0; j < hidden; ++j) x[j] = (1.0 - leak) * x[j] + leak * std::tanh(pre[j]);
        std::copy(x.begin(), x.end(), out.row(t).begin());
    }
    return out;
}

inline ContextMatrix encode_esn(const EncoderParams& params, const TokenSequence& seq)
{
    detail::check_input(params, EncoderKind::esn, seq);
    const auto& w = std::get<EsnWeights>(params.weights);
    const Matrix inputs = seq.as_matrix();
    return concat_directions(run_esn_direction(w.forward, inputs, params.config.leak, false),
                             run_esn_direction(w.backward, inputs, params.config.leak, true));
}

// CNN --------------------------------------------------------------------------------------

/// Valid temporal convolution. Sequences shorter than the window are left-padded with zeros
/// to exactly one window.
inline ContextMatrix encode_cnn(const EncoderParams& params, const TokenSequence& seq)
{
    detail::check_input(params, EncoderKind::cnn, seq);
    const auto& w = std::get<CnnWeights>(params.weights);
    const std::size_t k = params.config.window;
    const std::size_t d = params.config.input_dim;
    if (w.filter.cols() != k * d) throw error{"cnn filter shape does not match window and input size"};

    std::vector<Vector> padded;
    if (seq.length() < k) padded.assign(k - seq.length(), Vector(d, 0.0));
    padded.insert(padded.end(), seq.vectors.begin(), seq.vectors.end());

    const std::size_t steps = padded.size() - k + 1;
    ContextMatrix out{steps, w.filter.rows()};
    Vector window(k * d);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t j = 0; j < k; ++j)
            std::copy(padded[t + j].begin(), padded[t + j].end(), window.begin() + static_cast<std::ptrdiff_t>(j * d));
        auto row = out.row(t);
        for (std::size_t c = 0; c < w.filter.rows(); ++c) row[c] = dot(w.filter.row(c), window) + w.bias(c, 0);
    }
    return out;
}

// Self-attention ---------------------------------------------------------------------------

/// PE(pos, 2i) = sin(pos / 10000^(2i/D')), PE(pos, 2i+1) = cos(same).
inline Matrix sinusoidal_pe(std::size_t steps, std::size_t width)
{
    if (width % 2) throw config_error{"sinusoidal_pe: width must be even"};
    Matrix pe{steps, width};
    for (std::size_t pos = 0; pos < steps; ++pos) {
        for (std::size_t i = 0; i < width / 2; ++i) {
            const double angle = static_cast<double>(pos)
              / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(width));
            pe(pos, 2 * i) = std::sin(angle);
            pe(pos, 2 * i + 1) = std::cos(angle);
        }
    }
    return pe;
}

/// Per-head attention probabilities; element [h](t, s) is how much position t reads from s.
inline std::vector<Matrix> attention_weights(const AttentionLayer& layer, const Matrix& z, std::size_t heads)
{
    const Matrix q = matmul_transposed(z, layer.query);
    const Matrix k = matmul_transposed(z, layer.key);
    const std::size_t steps = z.rows();
    const std::size_t dk = layer.query.rows() / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    std::vector<Matrix> probs;
    Vector scores(steps);
    for (std::size_t h = 0; h < heads; ++h) {
        Matrix a{steps, steps};
        for (std::size_t t = 0; t < steps; ++t) {
            auto qt = q.row(t).subspan(h * dk, dk);
            for (std::size_t s = 0; s < steps; ++s) scores[s] = dot(qt, k.row(s).subspan(h * dk, dk)) * scale;
            const Vector p = softmax(scores);
            std::copy(p.begin(), p.end(), a.row(t).begin());
        }
        probs.push_back(std::move(a));
    }
    return probs;
}

/// Multi-head attention block output (before residual and normalisation).
inline Matrix multi_head_attention(const AttentionLayer& layer, const Matrix& z, std::size_t heads)
{
    const auto probs = attention_weights(layer, z, heads);
    const Matrix v = matmul_transposed(z, layer.value);
    const std::size_t steps = z.rows();
    const std::size_t dk = layer.value.rows() / heads;
    Matrix concat{steps, layer.value.rows()};
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t t = 0; t < steps; ++t)
            for (std::size_t s = 0; s < steps; ++s) {
                const double p = probs[h](t, s);
                auto vs = v.row(s).subspan(h * dk, dk);
                auto out = concat.row(t).subspan(h * dk, dk);
                for (std::size_t j = 0; j < dk; ++j) out[j] += p * vs[j];
            }
    return matmul_transposed(concat, layer.output);
}

/// Up-projection, optional positional encodings, then per layer z <- layer_norm(z + MHA(z)).
inline ContextMatrix encode_self_attention(const EncoderParams& params, const TokenSequence& seq)
{
    detail::check_input(params, EncoderKind::self_attention, seq);
    const auto& w = std::get<AttentionWeights>(params.weights);
    Matrix z = matmul_transposed(seq.as_matrix(), w.up);
    if (params.config.positional_encoding) {
        const Matrix pe = sinusoidal_pe(z.rows(), z.cols());
        for (std::size_t i = 0; i < z.size(); ++i) z.values()[i] += pe.values()[i];
    }
    for (const auto& layer : w.layers) {
        const Matrix attended = multi_head_attention(layer, z, params.config.heads);
        for (std::size_t t = 0; t < z.rows(); ++t) {
            Vector sum(z.cols());
            for (std::size_t j = 0; j < z.cols(); ++j) sum[j] = z(t, j) + attended(t, j);
            const Vector normed = layer_norm(sum);
            std::copy(normed.begin(), normed.end(), z.row(t).begin());
        }
    }
    return z;
}

// Pooling ----------------------------------------------------------------------------------

/// Columnwise max or mean over the temporal dimension.
inline Vector pool(const ContextMatrix& h, PoolingKind kind)
{
    if (h.rows() == 0) throw error{"cannot pool an empty context matrix"};
    Vector out(h.row(0).begin(), h.row(0).end());
    for (std::size_t t = 1; t < h.rows(); ++t) {
        auto row = h.row(t);
        for (std::size_t j = 0; j < out.size(); ++j)
            out[j] = kind == PoolingKind::max ? std::max(out[j], row[j]) : out[j] + row[j];
    }
    if (kind == PoolingKind::mean)
        for (double& x : out) x /= static_cast<double>(h.rows());
    return out;
}

}  // namespace randenc
