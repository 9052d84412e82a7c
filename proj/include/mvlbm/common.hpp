#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvlbm {

// Exit-code contract: 1 usage, 2 data, 3 numerical.
struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// Row-major dense matrix of doubles. Cells of discrete families store the
// 0-based level code as a double.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

class BoolMatrix {
  public:
    BoolMatrix() = default;
    BoolMatrix(std::size_t rows, std::size_t cols, bool fill = true)
        : rows_(rows), cols_(cols), data_(rows * cols, fill ? 1 : 0) {}

    void set(std::size_t i, std::size_t j, bool v) { data_[i * cols_ + j] = v ? 1 : 0; }
    bool operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j] != 0; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> data_;
};

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic per-index stream: identical draws regardless of schedule.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0) {
    std::uint64_t s = splitmix64(seed ^ splitmix64(a ^ splitmix64(b ^ splitmix64(c))));
    return Rng(s);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Draw an index from unnormalized nonnegative weights.
inline std::size_t sample_index(const std::vector<double>& weights, Rng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0) || !std::isfinite(total))
        throw numerical_error("sample_index: degenerate weight vector");
    double u = uniform01(rng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (u < acc) return i;
    }
    return weights.size() - 1;
}

// Normalized exp(logw - max(logw)); throws if everything underflows.
inline std::vector<double> softmax_from_logs(const std::vector<double>& logw) {
    double mx = neg_inf;
    for (double v : logw) mx = std::max(mx, v);
    if (mx == neg_inf) throw numerical_error("softmax_from_logs: all weights are -inf");
    std::vector<double> out(logw.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logw.size(); ++i) {
        out[i] = std::exp(logw[i] - mx);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

inline double log_sum_exp(const std::vector<double>& logw) {
    double mx = neg_inf;
    for (double v : logw) mx = std::max(mx, v);
    if (mx == neg_inf) return neg_inf;
    double total = 0.0;
    for (double v : logw) total += std::exp(v - mx);
    return mx + std::log(total);
}

}  // namespace mvlbm
