#pragma once

// Dense linear algebra, seeded initialisation and elementwise math shared by the encoders. //

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace randenc {

/// Base class of every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid encoder, probe or experiment configuration.
class config_error : public error {
public:
    using error::error;
};

/// Malformed input file or text.
class parse_error : public error {
public:
    using error::error;
};

using Vector = std::vector<double>;

/// Row-major dense matrix of doubles.
class Matrix {
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;

public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_{rows}, cols_{cols}, data_(rows * cols, fill)
    {
    }

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_{rows}, cols_{cols}, data_{std::move(data)}
    {
        if (data_.size() != rows_ * cols_)
            throw error{"matrix data length does not match its shape"};
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows)
    {
        const std::size_t n_rows = rows.size();
        const std::size_t n_cols = n_rows ? rows.begin()->size() : 0;
        Matrix m{n_rows, n_cols};
        std::size_t r = 0;
        for (const auto& row : rows) {
            if (row.size() != n_cols) throw error{"ragged matrix literal"};
            std::copy(row.begin(), row.end(), m.row(r++).begin());
        }
        return m;
    }

    static Matrix identity(std::size_t n)
    {
        Matrix m{n, n};
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept
    {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const noexcept
    {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept
    {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    Matrix& operator*=(double s)
    {
        for (double& x : data_) x *= s;
        return *this;
    }

    bool operator==(const Matrix&) const = default;
};

/// True when every entry is finite.
inline bool all_finite(std::span<const double> v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Seeded random numbers --------------------------------------------------------------------

/// Seeded generator backed by std::mt19937_64.
///
/// The engine's output sequence is fixed by the C++ standard; every derived draw below is
/// computed by hand (no std distributions) so a seed yields the same parameters with any
/// standard library.
class SeededRng {
    std::uint64_t seed_;
    std::mt19937_64 engine_;

public:
    explicit SeededRng(std::uint64_t seed) : seed_{seed}, engine_{seed} {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n), unbiased by rejection.
    std::uint64_t below(std::uint64_t n)
    {
        if (n == 0) throw error{"SeededRng::below requires n > 0"};
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()
          - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal draw (Box-Muller, one value per call).
    double normal()
    {
        double u1;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v)
    {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }
};

/// SplitMix64 finaliser, used to derive independent seeds from a base seed and a stream id.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Fills a matrix uniformly in [-bound, bound), row-major draw order.
inline Matrix uniform_matrix(SeededRng& rng, std::size_t rows, std::size_t cols, double bound)
{
    Matrix m{rows, cols};
    for (double& x : m.values()) x = rng.uniform(-bound, bound);
    return m;
}

/// Entries uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Matrix uniform_init(SeededRng& rng, std::size_t rows, std::size_t cols, std::size_t fan_in)
{
    if (fan_in == 0) throw config_error{"uniform_init: fan-in must be at least 1"};
    return uniform_matrix(rng, rows, cols, 1.0 / std::sqrt(static_cast<double>(fan_in)));
}

/// Glorot/Xavier uniform bound for a rows x cols weight.
inline double xavier_bound(std::size_t rows, std::size_t cols)
{
    return std::sqrt(6.0 / static_cast<double>(rows + cols));
}

inline Matrix xavier_uniform_init(SeededRng& rng, std::size_t rows, std::size_t cols)
{
    if (rows == 0 || cols == 0) throw config_error{"xavier_uniform_init: zero dimension"};
    return uniform_matrix(rng, rows, cols, xavier_bound(rows, cols));
}

// Elementwise ------------------------------------------------------------------------------

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vector sigmoid(std::span<const double> v)
{
    Vector out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [](double x) { return sigmoid(x); });
    return out;
}

inline Vector tanh(std::span<const double> v)
{
    Vector out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::tanh(x); });
    return out;
}

inline Vector hadamard(std::span<const double> a, std::span<const double> b)
{
    assert(a.size() == b.size());
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
    return out;
}

inline Vector abs_diff(std::span<const double> a, std::span<const double> b)
{
    assert(a.size() == b.size());
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::abs(a[i] - b[i]);
    return out;
}

inline Vector concat(std::initializer_list<std::span<const double>> parts)
{
    Vector out;
    for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

inline double dot(std::span<const double> a, std::span<const double> b)
{
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Largest absolute coordinate difference.
inline double linf_distance(std::span<const double> a, std::span<const double> b)
{
    assert(a.size() == b.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

// Products ---------------------------------------------------------------------------------

/// y = m x
inline Vector matvec(const Matrix& m, std::span<const double> x)
{
    if (m.cols() != x.size()) throw error{"matvec: dimension mismatch"};
    Vector y(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x);
    return y;
}

/// y += m x
inline void matvec_add(const Matrix& m, std::span<const double> x, std::span<double> y)
{
    if (m.cols() != x.size() || m.rows() != y.size()) throw error{"matvec_add: dimension mismatch"};
    for (std::size_t r = 0; r < m.rows(); ++r) y[r] += dot(m.row(r), x);
}

/// C = A B, accumulating over k in increasing order.
inline Matrix matmul(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.rows()) throw error{"matmul: dimension mismatch"};
    Matrix c{a.rows(), b.cols()};
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
        }
    }
    return c;
}

/// C = A B^T; row i of the result is B applied to row i of A.
inline Matrix matmul_transposed(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.cols()) throw error{"matmul_transposed: dimension mismatch"};
    Matrix c{a.rows(), b.rows()};
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i), b.row(j));
    return c;
}

inline Matrix transpose(const Matrix& m)
{
    Matrix t{m.cols(), m.rows()};
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
    return t;
}

// Normalisers ------------------------------------------------------------------------------

inline Vector softmax(std::span<const double> v)
{
    if (v.empty()) throw error{"softmax of an empty vector"};
    const double shift = *std::max_element(v.begin(), v.end());
    Vector out(v.size());
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - shift);
        total += out[i];
    }
    for (double& x : out) x /= total;
    return out;
}

inline constexpr double layer_norm_eps = 1e-5;

/// Zero-mean, unit-variance normalisation with unit gain and zero bias.
/// Uses the population variance; eps sits inside the square root.
inline Vector layer_norm(std::span<const double> v, double eps = layer_norm_eps)
{
    if (v.empty()) return {};
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    Vector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) * inv;
    return out;
}

// Spectral radius --------------------------------------------------------------------------

struct SpectralEstimate {
    double value = 0.0;
    bool converged = false;
    int iterations = 0;
};

/// Power-iteration estimate of the largest eigenvalue magnitude of a square matrix.
///
/// Each step takes the Ritz values of the two-dimensional Krylov space spanned by the
/// current iterate and its image, so a dominant complex-conjugate pair (common for
/// non-symmetric reservoirs) is resolved as well as a dominant real eigenvalue.
/// Convergence means five consecutive estimates changed by less than tol (relative).
inline SpectralEstimate spectral_radius(const Matrix& m, int max_iters = 10000, double tol = 1e-10)
{
    if (m.rows() != m.cols()) throw error{"spectral_radius: matrix is not square"};
    const std::size_t n = m.rows();
    if (n == 0) return {0.0, true, 0};

    // Sparse row view; reservoirs are mostly zeros.
    std::vector<std::size_t> row_start(n + 1, 0);
    std::vector<std::size_t> col_index;
    std::vector<double> nz;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            if (m(r, c) != 0.0) {
                col_index.push_back(c);
                nz.push_back(m(r, c));
            }
        }
        row_start[r + 1] = nz.size();
    }
    if (nz.empty()) return {0.0, true, 0};
    auto apply = [&](const Vector& x, Vector& y) {
        for (std::size_t r = 0; r < n; ++r) {
            double s = 0.0;
            for (std::size_t k = row_start[r]; k < row_start[r + 1]; ++k) s += nz[k] * x[col_index[k]];
            y[r] = s;
        }
    };

    Vector q0(n), w(n), q1(n), z(n);
    for (std::size_t i = 0; i < n; ++i) q0[i] = 1.0 + 0.5 * std::sin(static_cast<double>(i) + 1.0);
    {
        const double nrm = norm2(q0);
        for (double& x : q0) x /= nrm;
    }

    SpectralEstimate best;
    double previous = -1.0;
    int stable = 0;
    for (int it = 1; it <= max_iters; ++it) {
        apply(q0, w);
        const double w_norm = norm2(w);
        if (w_norm == 0.0) return {0.0, true, it};
        const double alpha = dot(q0, w);
        for (std::size_t i = 0; i < n; ++i) q1[i] = w[i] - alpha * q0[i];
        const double beta = norm2(q1);

        double estimate;
        if (beta <= 1e-13 * w_norm) {
            estimate = std::abs(alpha);
        } else {
            for (double& x : q1) x /= beta;
            apply(q1, z);
            // Rayleigh-Ritz matrix [[alpha, h01], [beta, h11]] in the basis {q0, q1}.
            const double h01 = dot(q0, z);
            const double h11 = dot(q1, z);
            const double half_trace = 0.5 * (alpha + h11);
            const double det = alpha * h11 - h01 * beta;
            const double disc = half_trace * half_trace - det;
            if (disc >= 0.0) {
                const double root = std::sqrt(disc);
                estimate = std::max(std::abs(half_trace + root), std::abs(half_trace - root));
            } else {
                estimate = std::sqrt(det);
            }
        }

        best = {estimate, false, it};
        if (previous >= 0.0 && std::abs(estimate - previous) <= tol * estimate) {
            if (++stable >= 5) {
                best.converged = true;
                return best;
            }
        } else {
            stable = 0;
        }
        previous = estimate;
        for (std::size_t i = 0; i < n; ++i) q0[i] = w[i] / w_norm;
    }
    return best;
}

}  // namespace randenc
