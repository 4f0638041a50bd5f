#pragma once

#include <randenc/randenc.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace testing_support {

using namespace randenc;

inline TokenSequence random_sequence(SeededRng& rng, std::size_t length, std::size_t dim)
{
    TokenSequence seq;
    for (std::size_t t = 0; t < length; ++t) {
        Vector v(dim);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        seq.tokens.push_back("w" + std::to_string(t));
        seq.vectors.push_back(std::move(v));
    }
    return seq;
}

inline std::vector<Vector> rows_of(const Matrix& m)
{
    std::vector<Vector> out;
    for (std::size_t r = 0; r < m.rows(); ++r) out.emplace_back(m.row(r).begin(), m.row(r).end());
    return out;
}

inline Matrix random_matrix(SeededRng& rng, std::size_t rows, std::size_t cols, double bound = 1.0)
{
    return uniform_matrix(rng, rows, cols, bound);
}

inline double max_distance(const std::vector<Vector>& a, const Matrix& b)
{
    EXPECT_EQ(a.size(), b.rows());
    double d = 0.0;
    for (std::size_t r = 0; r < a.size() && r < b.rows(); ++r) d = std::max(d, linf_distance(a[r], b.row(r)));
    return d;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
    std::filesystem::path path_;

public:
    TempDir()
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("randenc_test_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

    std::filesystem::path write(const std::string& name, const std::string& content) const
    {
        const auto p = path_ / name;
        std::ofstream out{p, std::ios::binary};
        out << content;
        return p;
    }
};

inline std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in{p, std::ios::binary};
    return {std::istreambuf_iterator<char>{in}, std::istreambuf_iterator<char>{}};
}

}  // namespace testing_support
