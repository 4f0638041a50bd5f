#pragma once

// Trainable classifiers over frozen sentence embeddings. //
//
// The probe is multinomial logistic regression or a one-hidden-layer tanh MLP, fitted by
// full-batch gradient descent with backtracking (Armijo) step control on
//   mean cross-entropy + (l2 / 2) * ||weights||^2      (biases are not penalised).
// l2 is picked from a grid by validation accuracy; training of each candidate stops early once
// validation cross-entropy has not improved for `patience` epochs, keeping the best epoch.

#include "checkpoint.hpp"
#include "numerics.hpp"

#include <algorithm>
#include <numeric>

namespace randenc {

enum class ProbeKind { logreg, mlp };

inline std::string_view to_string(ProbeKind kind) { return kind == ProbeKind::logreg ? "logreg" : "mlp"; }

inline ProbeKind parse_probe_kind(std::string_view name)
{
    if (name == "logreg") return ProbeKind::logreg;
    if (name == "mlp") return ProbeKind::mlp;
    throw config_error{"unknown probe kind '" + std::string{name} + "'"};
}

struct ProbeConfig {
    ProbeKind kind = ProbeKind::logreg;
    std::size_t hidden = 50;
    std::vector<double> l2_grid{0.0, 1e-4, 1e-3, 1e-2, 1e-1};
    std::size_t max_epochs = 500;
    std::size_t patience = 5;
    /// z-score features with training-set statistics before fitting.
    bool standardize = true;
    /// Share of each class held out for validation when a split has no dev set.
    double validation_fraction = 0.1;
    std::uint64_t seed = 1;
};

/// Shape of the flat parameter vector.
///
/// logreg: [W (C x F), b (C)]
/// mlp:    [W1 (H x F), b1 (H), W2 (C x H), b2 (C)]
struct ProbeShape {
    ProbeKind kind = ProbeKind::logreg;
    std::size_t features = 0;
    std::size_t classes = 0;
    std::size_t hidden = 0;

    std::size_t size() const noexcept
    {
        if (kind == ProbeKind::logreg) return classes * features + classes;
        return hidden * features + hidden + classes * hidden + classes;
    }
};

class ProbeModel {
public:
    ProbeShape shape;
    Vector theta;
    double l2 = 0.0;
    Vector shift;  // subtracted from features
    Vector scale;  // then multiplied

    std::size_t features() const noexcept { return shape.features; }
    std::size_t classes() const noexcept { return shape.classes; }

    Vector logits(std::span<const double> x) const;

    /// Argmax class; ties go to the lowest index.
    std::size_t predict(std::span<const double> x) const
    {
        const Vector z = logits(x);
        return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    }
};

struct TrainReport {
    std::size_t epochs = 0;
    double best_validation_accuracy = 0.0;
    double chosen_l2 = 0.0;
    double test_accuracy = 0.0;
};

struct SplitPlan {
    std::vector<std::size_t> train;
    std::vector<std::size_t> dev;
    std::vector<std::size_t> test;
};

// Objective --------------------------------------------------------------------------------

namespace detail {

/// Logits for one standardised example given flat parameters. `hidden_out` receives the MLP
/// activations when non-null.
inline Vector forward(const ProbeShape& s, std::span<const double> theta, std::span<const double> x,
                      Vector* hidden_out = nullptr)
{
    const std::size_t f = s.features;
    const std::size_t c = s.classes;
    Vector z(c);
    if (s.kind == ProbeKind::logreg) {
        const double* b = theta.data() + c * f;
        for (std::size_t k = 0; k < c; ++k) z[k] = dot(theta.subspan(k * f, f), x) + b[k];
        return z;
    }
    const std::size_t h = s.hidden;
    const double* b1 = theta.data() + h * f;
    Vector a(h);
    for (std::size_t j = 0; j < h; ++j) a[j] = std::tanh(dot(theta.subspan(j * f, f), x) + b1[j]);
    const std::size_t w2 = h * f + h;
    const double* b2 = theta.data() + w2 + c * h;
    for (std::size_t k = 0; k < c; ++k) z[k] = dot(theta.subspan(w2 + k * h, h), a) + b2[k];
    if (hidden_out) *hidden_out = std::move(a);
    return z;
}

inline double log_sum_exp(std::span<const double> z)
{
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

}  // namespace detail

/// Mean cross-entropy over `rows` of `x` plus (l2/2)*||weights||^2. Fills `grad` when non-null.
inline double probe_objective(const ProbeShape& s, std::span<const double> theta, const Matrix& x,
                              std::span<const std::size_t> labels, std::span<const std::size_t> rows, double l2,
                              Vector* grad = nullptr)
{
    if (theta.size() != s.size()) throw error{"probe parameter vector has the wrong size"};
    if (rows.empty()) throw error{"probe objective over zero examples"};
    const std::size_t f = s.features;
    const std::size_t c = s.classes;
    const std::size_t h = s.hidden;
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    if (grad) grad->assign(theta.size(), 0.0);

    double loss = 0.0;
    Vector a;
    for (std::size_t r : rows) {
        auto xr = x.row(r);
        const Vector z = detail::forward(s, theta, xr, &a);
        const double lse = detail::log_sum_exp(z);
        loss += lse - z[labels[r]];
        if (!grad) continue;

        Vector dz(c);
        for (std::size_t k = 0; k < c; ++k) dz[k] = (std::exp(z[k] - lse) - (k == labels[r] ? 1.0 : 0.0)) * inv_n;
        auto& g = *grad;
        if (s.kind == ProbeKind::logreg) {
            for (std::size_t k = 0; k < c; ++k) {
                double* gw = g.data() + k * f;
                for (std::size_t j = 0; j < f; ++j) gw[j] += dz[k] * xr[j];
                g[c * f + k] += dz[k];
            }
            continue;
        }
        const std::size_t w2 = h * f + h;
        Vector da(h, 0.0);
        for (std::size_t k = 0; k < c; ++k) {
            double* gw = g.data() + w2 + k * h;
            const double* w = theta.data() + w2 + k * h;
            for (std::size_t j = 0; j < h; ++j) {
                gw[j] += dz[k] * a[j];
                da[j] += dz[k] * w[j];
            }
            g[w2 + c * h + k] += dz[k];
        }
        for (std::size_t j = 0; j < h; ++j) {
            const double dpre = da[j] * (1.0 - a[j] * a[j]);
            double* gw = g.data() + j * f;
            for (std::size_t i = 0; i < f; ++i) gw[i] += dpre * xr[i];
            g[h * f + j] += dpre;
        }
    }
    loss *= inv_n;

    // Penalise weight blocks only.
    auto penalise = [&](std::size_t begin, std::size_t count) {
        for (std::size_t i = begin; i < begin + count; ++i) {
            loss += 0.5 * l2 * theta[i] * theta[i];
            if (grad) (*grad)[i] += l2 * theta[i];
        }
    };
    if (l2 != 0.0) {
        if (s.kind == ProbeKind::logreg) {
            penalise(0, c * f);
        } else {
            penalise(0, h * f);
            penalise(h * f + h, c * h);
        }
    }
    return loss;
}

inline Vector ProbeModel::logits(std::span<const double> x) const
{
    if (x.size() != shape.features) throw error{"probe input width does not match the model"};
    Vector xs(x.begin(), x.end());
    if (!shift.empty())
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = (xs[i] - shift[i]) * scale[i];
    return detail::forward(shape, theta, xs);
}

/// Initial parameters: zeros for logreg; Xavier-uniform hidden layer and zero output layer for
/// the MLP.
inline Vector initial_parameters(const ProbeShape& s, std::uint64_t seed)
{
    Vector theta(s.size(), 0.0);
    if (s.kind == ProbeKind::mlp) {
        SeededRng rng{seed};
        const Matrix w1 = xavier_uniform_init(rng, s.hidden, s.features);
        std::copy(w1.values().begin(), w1.values().end(), theta.begin());
    }
    return theta;
}

// Feature helpers --------------------------------------------------------------------------

/// [u; v; |u - v|; u * v]
inline Vector pair_features(std::span<const double> u, std::span<const double> v)
{
    if (u.size() != v.size()) throw error{"pair_features: embeddings differ in width"};
    const Vector d = abs_diff(u, v);
    const Vector p = hadamard(u, v);
    return concat({u, v, d, p});
}

/// Stacks vectors as matrix rows.
inline Matrix stack_rows(const std::vector<Vector>& rows)
{
    if (rows.empty()) return {};
    Matrix m{rows.size(), rows.front().size()};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != m.cols()) throw error{"stack_rows: ragged rows"};
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

// Accuracy ---------------------------------------------------------------------------------

inline double evaluate(const ProbeModel& model, const Matrix& x, std::span<const std::size_t> labels,
                       std::span<const std::size_t> rows)
{
    if (rows.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t r : rows) correct += model.predict(x.row(r)) == labels[r] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

inline double evaluate(const ProbeModel& model, const Matrix& x, std::span<const std::size_t> labels)
{
    std::vector<std::size_t> rows(x.rows());
    std::iota(rows.begin(), rows.end(), 0);
    return evaluate(model, x, labels, rows);
}

// Training ---------------------------------------------------------------------------------

struct FitResult {
    Vector theta;
    std::size_t epochs = 0;
    double validation_loss = 0.0;
};

/// Gradient descent with backtracking on standardised features; returns the parameters with the
/// lowest validation cross-entropy seen. Every accepted step satisfies the Armijo condition, so
/// the training objective never increases.
inline FitResult fit_parameters(const ProbeShape& shape, const Matrix& x, std::span<const std::size_t> labels,
                                std::span<const std::size_t> train, std::span<const std::size_t> dev, double l2,
                                const ProbeConfig& cfg, std::vector<double>* loss_trace = nullptr)
{
    Vector theta = initial_parameters(shape, cfg.seed);
    Vector grad, candidate(theta.size());
    double loss = probe_objective(shape, theta, x, labels, train, l2, &grad);
    if (loss_trace) loss_trace->push_back(loss);

    FitResult best{theta, 0, probe_objective(shape, theta, x, labels, dev, 0.0)};
    std::size_t since_best = 0;
    double step = 1.0;
    std::size_t epoch = 0;
    for (; epoch < cfg.max_epochs; ++epoch) {
        const double g2 = dot(grad, grad);
        if (g2 < 1e-20) break;
        bool accepted = false;
        double new_loss = loss;
        for (int halving = 0; halving < 60; ++halving) {
            for (std::size_t i = 0; i < theta.size(); ++i) candidate[i] = theta[i] - step * grad[i];
            new_loss = probe_objective(shape, candidate, x, labels, train, l2);
            if (std::isfinite(new_loss) && new_loss <= loss - 1e-4 * step * g2) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;
        theta.swap(candidate);
        loss = probe_objective(shape, theta, x, labels, train, l2, &grad);
        if (loss_trace) loss_trace->push_back(loss);
        step *= 2.0;

        const double val = probe_objective(shape, theta, x, labels, dev, 0.0);
        if (val < best.validation_loss) {
            best = {theta, epoch + 1, val};
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            ++epoch;
            break;
        }
    }
    best.epochs = epoch;
    return best;
}

struct ProbeResult {
    ProbeModel model;
    TrainReport report;
};

namespace detail {

inline std::size_t count_classes(std::span<const std::size_t> labels)
{
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

/// Column shift/scale from the training rows; constant columns get scale 1.
inline void standardisation(const Matrix& x, std::span<const std::size_t> rows, Vector& shift, Vector& scale)
{
    const std::size_t f = x.cols();
    shift.assign(f, 0.0);
    scale.assign(f, 1.0);
    for (std::size_t r : rows)
        for (std::size_t j = 0; j < f; ++j) shift[j] += x(r, j);
    for (double& m : shift) m /= static_cast<double>(rows.size());
    Vector var(f, 0.0);
    for (std::size_t r : rows)
        for (std::size_t j = 0; j < f; ++j) var[j] += (x(r, j) - shift[j]) * (x(r, j) - shift[j]);
    for (std::size_t j = 0; j < f; ++j) {
        const double sd = std::sqrt(var[j] / static_cast<double>(rows.size()));
        scale[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
    }
}

/// Stratified hold-out of floor(fraction * count) members of each class. Falls back to validating on the training rows if nothing can be
/// held out.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
carve_validation(std::span<const std::size_t> rows, std::span<const std::size_t> labels, double fraction,
                 std::uint64_t seed)
{
    const std::size_t classes = count_classes(labels);
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t r : rows) by_class[labels[r]].push_back(r);
    SeededRng rng{derive_seed(seed, 0x7661)};
    std::vector<std::size_t> train, dev;
    for (auto& members : by_class) {
        rng.shuffle(members);
        const auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(members.size())));
        dev.insert(dev.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
        train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(dev.begin(), dev.end());
    if (dev.empty()) dev = train;
    return {train, dev};
}

}  // namespace detail

/// Fits the probe on plan.train, selects l2 on plan.dev (a stratified hold-out of train when
/// empty) and reports accuracy on plan.test.
inline ProbeResult train_probe(const Matrix& features, std::span<const std::size_t> labels, SplitPlan plan,
                               const ProbeConfig& cfg)
{
    if (labels.size() != features.rows()) throw error{"train_probe: one label per embedding required"};
    if (!all_finite(features.values())) throw error{"train_probe: embeddings contain non-finite values"};
    if (cfg.l2_grid.empty()) throw config_error{"probe l2 grid is empty"};
    if (plan.train.empty()) throw error{"train_probe: empty training split"};
    {
        std::vector<std::size_t> seen;
        for (std::size_t r : plan.train) seen.push_back(labels[r]);
        std::sort(seen.begin(), seen.end());
        if (std::unique(seen.begin(), seen.end()) - seen.begin() < 2)
            throw error{"degenerate task: training split contains a single class"};
    }
    if (plan.dev.empty()) {
        auto [train, dev] = detail::carve_validation(plan.train, labels, cfg.validation_fraction, cfg.seed);
        plan.train = std::move(train);
        plan.dev = std::move(dev);
    }

    ProbeModel model;
    model.shape = {cfg.kind, features.cols(), detail::count_classes(labels), cfg.kind == ProbeKind::mlp ? cfg.hidden : 0};
    Matrix x = features;
    if (cfg.standardize) {
        detail::standardisation(features, plan.train, model.shift, model.scale);
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t j = 0; j < x.cols(); ++j) x(r, j) = (x(r, j) - model.shift[j]) * model.scale[j];
    }

    ProbeModel scratch = model;
    scratch.shift.clear();
    scratch.scale.clear();
    TrainReport report;
    bool have_best = false;
    for (double l2 : cfg.l2_grid) {
        FitResult fit = fit_parameters(model.shape, x, labels, plan.train, plan.dev, l2, cfg);
        scratch.theta = std::move(fit.theta);
        const double val_acc = evaluate(scratch, x, labels, plan.dev);
        const bool better = !have_best || val_acc > report.best_validation_accuracy
          || (val_acc == report.best_validation_accuracy && l2 < report.chosen_l2);
        if (better) {
            have_best = true;
            model.theta = scratch.theta;
            model.l2 = l2;
            report.best_validation_accuracy = val_acc;
            report.chosen_l2 = l2;
            report.epochs = fit.epochs;
        }
    }
    scratch.theta = model.theta;
    report.test_accuracy = plan.test.empty() ? 0.0 : evaluate(scratch, x, labels, plan.test);
    return {std::move(model), report};
}

/// Stratified fold ids: each class is shuffled and dealt round-robin, continuing the deal across
/// classes, so fold sizes and per-class counts differ by at most one.
inline std::vector<std::size_t> stratified_folds(std::span<const std::size_t> labels, std::size_t k, std::uint64_t seed)
{
    if (k < 2) throw config_error{"k-fold needs k >= 2"};
    if (labels.size() < k) throw config_error{"k-fold needs at least k examples"};
    const std::size_t classes = detail::count_classes(labels);
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    SeededRng rng{derive_seed(seed, 0xf01d)};
    std::vector<std::size_t> fold(labels.size());
    std::size_t deal = 0;
    for (auto& members : by_class) {
        rng.shuffle(members);
        for (std::size_t i : members) fold[i] = deal++ % k;
    }
    return fold;
}

/// Mean test accuracy over k stratified folds.
inline double kfold_accuracy(const Matrix& features, std::span<const std::size_t> labels, std::size_t k,
                             const ProbeConfig& cfg)
{
    const auto fold = stratified_folds(labels, k, cfg.seed);
    double total = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
        SplitPlan plan;
        for (std::size_t i = 0; i < labels.size(); ++i) (fold[i] == f ? plan.test : plan.train).push_back(i);
        total += train_probe(features, labels, std::move(plan), cfg).report.test_accuracy;
    }
    return total / static_cast<double>(k);
}

// Export -----------------------------------------------------------------------------------

inline Checkpoint to_checkpoint(const ProbeModel& model)
{
    Checkpoint c;
    c.header = {{"kind", "probe_" + std::string{to_string(model.shape.kind)}},
                {"features", std::to_string(model.shape.features)},
                {"classes", std::to_string(model.shape.classes)},
                {"hidden", std::to_string(model.shape.hidden)},
                {"l2", detail::format_real(model.l2)}};
    c.tensors.emplace_back("theta", Matrix{model.theta.size(), 1, model.theta});
    if (!model.shift.empty()) {
        c.tensors.emplace_back("shift", Matrix{model.shift.size(), 1, model.shift});
        c.tensors.emplace_back("scale", Matrix{model.scale.size(), 1, model.scale});
    }
    return c;
}

}  // namespace randenc
