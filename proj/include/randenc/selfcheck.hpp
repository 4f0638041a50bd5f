#pragma once

// Built-in invariant checks run by `randenc selfcheck`. //

#include "checkpoint.hpp"
#include "encode.hpp"
#include "probe.hpp"
#include "tasks.hpp"

#include <functional>
#include <numeric>
#include <sstream>

namespace randenc {

struct CheckOutcome {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline TokenSequence random_sequence(SeededRng& rng, std::size_t length, std::size_t dim)
{
    TokenSequence seq;
    for (std::size_t t = 0; t < length; ++t) {
        Vector v(dim);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        seq.tokens.push_back("t" + std::to_string(t));
        seq.vectors.push_back(std::move(v));
    }
    return seq;
}

inline TokenSequence permuted(const TokenSequence& seq, const std::vector<std::size_t>& order)
{
    TokenSequence out;
    for (std::size_t i : order) {
        out.tokens.push_back(seq.tokens[i]);
        out.vectors.push_back(seq.vectors[i]);
    }
    return out;
}

inline std::vector<std::size_t> nontrivial_permutation(SeededRng& rng, std::size_t n)
{
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (n < 2) return order;
    std::vector<std::size_t> identity = order;
    do {
        rng.shuffle(order);
    } while (order == identity);
    return order;
}

inline double max_abs(std::span<const double> v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace detail

/// Runs the invariant suite on small random instances.
inline std::vector<CheckOutcome> run_selfcheck(std::uint64_t seed = 2024)
{
    std::vector<CheckOutcome> out;
    auto check = [&](std::string name, const std::function<std::pair<bool, std::string>()>& body) {
        try {
            auto [ok, detail] = body();
            out.push_back({std::move(name), ok, std::move(detail)});
        } catch (const std::exception& e) {
            out.push_back({std::move(name), false, std::string{"exception: "} + e.what()});
        }
    };
    SeededRng rng{seed};
    const std::size_t d = 6, dp = 16;

    check("softmax sums to one", [&] {
        double worst = 0.0;
        for (int trial = 0; trial < 200; ++trial) {
            Vector v(1 + rng.below(20));
            for (double& x : v) x = rng.uniform(-50.0, 50.0);
            const Vector p = softmax(v);
            double s = 0.0;
            for (double x : p) s += x;
            worst = std::max(worst, std::abs(s - 1.0));
        }
        return std::pair{worst < 1e-9, "max |sum - 1| = " + std::to_string(worst)};
    });

    check("layer_norm shift/scale invariance", [&] {
        double worst = 0.0;
        for (int trial = 0; trial < 50; ++trial) {
            Vector v(8);
            for (double& x : v) x = rng.uniform(-10.0, 10.0);
            const Vector base = layer_norm(v);
            for (double a : {0.5, 2.0, 10.0}) {
                Vector w(v.size());
                const double b = rng.uniform(-5.0, 5.0);
                for (std::size_t i = 0; i < v.size(); ++i) w[i] = a * v[i] + b;
                worst = std::max(worst, linf_distance(layer_norm(w), base));
            }
        }
        return std::pair{worst < 1e-5, "max deviation " + std::to_string(worst)};
    });

    check("cnn(k=1) equals borep", [&] {
        const auto borep = make_encoder({EncoderKind::borep, seed, d, dp});
        const auto cnn = cnn_from_borep(borep);
        double worst = 0.0;
        for (int s = 0; s < 100; ++s) {
            const auto seq = detail::random_sequence(rng, 1 + rng.below(10), d);
            const Matrix a = encode_borep(borep, seq);
            const Matrix b = encode_cnn(cnn, seq);
            worst = std::max(worst, linf_distance(a.values(), b.values()));
        }
        return std::pair{worst <= 1e-12, "max deviation " + std::to_string(worst)};
    });

    check("borep + max pooling is permutation invariant", [&] {
        const auto borep = make_encoder({EncoderKind::borep, seed, d, dp});
        for (int s = 0; s < 20; ++s) {
            const auto seq = detail::random_sequence(rng, 2 + rng.below(8), d);
            const auto perm = detail::permuted(seq, detail::nontrivial_permutation(rng, seq.length()));
            if (pool(encode_borep(borep, seq), PoolingKind::max) != pool(encode_borep(borep, perm), PoolingKind::max))
                return std::pair{false, std::string{"pooled embeddings differ"}};
        }
        return std::pair{true, std::string{}};
    });

    check("self-attention without PE is permutation invariant", [&] {
        EncoderConfig cfg{EncoderKind::self_attention, seed, d, dp};
        cfg.heads = 4;
        cfg.positional_encoding = false;
        const auto params = make_encoder(cfg);
        double worst = 0.0;
        for (int s = 0; s < 20; ++s) {
            const auto seq = detail::random_sequence(rng, 2 + rng.below(6), d);
            const auto perm = detail::permuted(seq, detail::nontrivial_permutation(rng, seq.length()));
            for (auto kind : {PoolingKind::max, PoolingKind::mean})
                worst = std::max(worst, linf_distance(pool(encode_self_attention(params, seq), kind),
                                                      pool(encode_self_attention(params, perm), kind)));
        }
        return std::pair{worst <= 1e-10, "max deviation " + std::to_string(worst)};
    });

    check("self-attention with PE is position sensitive", [&] {
        EncoderConfig cfg{EncoderKind::self_attention, seed, d, dp};
        cfg.heads = 4;
        const auto params = make_encoder(cfg);
        double smallest = std::numeric_limits<double>::infinity();
        for (int s = 0; s < 20; ++s) {
            const auto seq = detail::random_sequence(rng, 2 + rng.below(6), d);
            const auto perm = detail::permuted(seq, detail::nontrivial_permutation(rng, seq.length()));
            smallest = std::min(smallest, linf_distance(pool(encode_self_attention(params, seq), PoolingKind::max),
                                                        pool(encode_self_attention(params, perm), PoolingKind::max)));
        }
        return std::pair{smallest > 1e-6, "smallest change " + std::to_string(smallest)};
    });

    check("attention rows are probability vectors", [&] {
        EncoderConfig cfg{EncoderKind::self_attention, seed, d, dp};
        cfg.heads = 4;
        const auto params = make_encoder(cfg);
        const auto& w = std::get<AttentionWeights>(params.weights);
        const auto seq = detail::random_sequence(rng, 7, d);
        const Matrix z = matmul_transposed(seq.as_matrix(), w.up);
        double worst = 0.0;
        for (const auto& head : attention_weights(w.layers[0], z, cfg.heads))
            for (std::size_t t = 0; t < head.rows(); ++t) {
                double s = 0.0;
                for (double p : head.row(t)) s += p;
                worst = std::max(worst, std::abs(s - 1.0));
            }
        return std::pair{worst < 1e-9, "max |row sum - 1| = " + std::to_string(worst)};
    });

    check("rand_lstm states lie in (-1, 1)", [&] {
        const auto params = make_encoder({EncoderKind::rand_lstm, seed, d, dp});
        double m = 0.0;
        for (int s = 0; s < 20; ++s) {
            const auto seq = detail::random_sequence(rng, 1 + rng.below(12), d);
            m = std::max(m, detail::max_abs(encode_rand_lstm(params, seq).values()));
        }
        return std::pair{m < 1.0, "max |h| = " + std::to_string(m)};
    });

    check("esn reservoir spectral radius and echo states", [&] {
        EncoderConfig cfg{EncoderKind::esn, seed, d, 64};
        cfg.spectral_radius = 0.9;
        const auto params = make_encoder(cfg);
        const auto& w = std::get<EsnWeights>(params.weights);
        const double radius = spectral_radius(w.forward.reservoir, 100000, 1e-13).value;
        const auto seq = detail::random_sequence(rng, 50, d);
        Vector a(32), b(32);
        for (double& x : a) x = rng.uniform(-1.0, 1.0);
        for (double& x : b) x = rng.uniform(-1.0, 1.0);
        const Matrix inputs = seq.as_matrix();
        const Matrix ra = run_esn_direction(w.forward, inputs, 1.0, false, a);
        const Matrix rb = run_esn_direction(w.forward, inputs, 1.0, false, b);
        const double gap = norm2(abs_diff(ra.row(49), rb.row(49)));
        std::ostringstream msg;
        msg.precision(10);
        msg << "radius " << radius << ", final-state distance " << gap;
        return std::pair{std::abs(radius - 0.9) <= 1e-3 && gap < 1e-3, msg.str()};
    });

    check("tree_lstm states lie in (-1, 1) and trees have 2L-1 nodes", [&] {
        const auto params = make_encoder({EncoderKind::tree_lstm, seed, d, dp});
        double m = 0.0;
        for (int s = 0; s < 20; ++s) {
            const std::size_t len = 1 + rng.below(10);
            auto seq = detail::random_sequence(rng, len, d);
            const ParseTree tree = binarize(parse_bracketed(random_bracketing(seq.tokens, rng)));
            if (!is_well_formed(tree)) return std::pair{false, std::string{"malformed binary tree"}};
            m = std::max(m, detail::max_abs(encode_tree_lstm(params, seq, tree).values()));
        }
        return std::pair{m < 1.0, "max |h| = " + std::to_string(m)};
    });

    check("probe gradient matches finite differences", [&] {
        double worst = 0.0;
        for (auto kind : {ProbeKind::logreg, ProbeKind::mlp}) {
            const ProbeShape shape{kind, 4, 3, kind == ProbeKind::mlp ? 5u : 0u};
            Matrix x{12, 4};
            std::vector<std::size_t> labels(12), rows(12);
            for (std::size_t i = 0; i < 12; ++i) {
                for (double& v : x.row(i)) v = rng.uniform(-1.0, 1.0);
                labels[i] = i % 3;
                rows[i] = i;
            }
            Vector theta(shape.size());
            for (double& v : theta) v = rng.uniform(-0.5, 0.5);
            Vector grad;
            probe_objective(shape, theta, x, labels, rows, 0.01, &grad);
            for (std::size_t i = 0; i < theta.size(); ++i) {
                Vector tp = theta, tm = theta;
                tp[i] += 1e-5;
                tm[i] -= 1e-5;
                const double fd = (probe_objective(shape, tp, x, labels, rows, 0.01)
                                   - probe_objective(shape, tm, x, labels, rows, 0.01)) / 2e-5;
                worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1e-8, std::abs(fd) + std::abs(grad[i])));
            }
        }
        return std::pair{worst < 1e-4, "max relative error " + std::to_string(worst)};
    });

    check("checkpoint round trip is bit exact", [&] {
        for (auto kind : all_encoder_kinds) {
            const auto params = make_encoder({kind, seed, d, dp});
            std::stringstream buf;
            write_checkpoint(buf, to_checkpoint(params));
            const auto back = from_checkpoint(read_checkpoint(buf));
            bool same = back.config == params.config;
            std::vector<const Matrix*> a, b;
            params.for_each_tensor([&](const std::string&, const Matrix& m) { a.push_back(&m); });
            back.for_each_tensor([&](const std::string&, const Matrix& m) { b.push_back(&m); });
            same = same && a.size() == b.size();
            for (std::size_t i = 0; same && i < a.size(); ++i) same = *a[i] == *b[i];
            if (!same) return std::pair{false, "mismatch for " + std::string{to_string(kind)}};
        }
        return std::pair{true, std::string{}};
    });

    check("sampling is deterministic", [&] {
        for (auto kind : all_encoder_kinds) {
            const auto a = to_checkpoint(make_encoder({kind, seed, d, dp}));
            const auto b = to_checkpoint(make_encoder({kind, seed, d, dp}));
            for (std::size_t i = 0; i < a.tensors.size(); ++i)
                if (!(a.tensors[i].second == b.tensors[i].second))
                    return std::pair{false, "non-deterministic " + std::string{to_string(kind)}};
        }
        return std::pair{true, std::string{}};
    });

    return out;
}

}  // namespace randenc
