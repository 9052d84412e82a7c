#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "mvlbm/common.hpp"

namespace mvlbm {

enum class FeatureKind { Nominal, Ordinal, Continuous, Count };

inline std::string to_string(FeatureKind k) {
    switch (k) {
        case FeatureKind::Nominal: return "nominal";
        case FeatureKind::Ordinal: return "ordinal";
        case FeatureKind::Continuous: return "continuous";
        case FeatureKind::Count: return "count";
    }
    return "?";
}

inline FeatureKind feature_kind_from_string(const std::string& s) {
    if (s == "nominal") return FeatureKind::Nominal;
    if (s == "ordinal") return FeatureKind::Ordinal;
    if (s == "continuous") return FeatureKind::Continuous;
    if (s == "count") return FeatureKind::Count;
    throw data_error("unknown feature type: " + s);
}

struct FeatureType {
    FeatureKind kind = FeatureKind::Continuous;
    int levels = 0;  // m >= 2 for nominal/ordinal, unused otherwise

    bool discrete_levels() const {
        return kind == FeatureKind::Nominal || kind == FeatureKind::Ordinal;
    }
};

struct FeatureSetSchema {
    FeatureType type;
    std::size_t cols = 0;  // d_vs
};

struct ViewSchema {
    std::vector<FeatureSetSchema> feature_sets;

    std::size_t total_cols() const {
        std::size_t d = 0;
        for (const auto& fs : feature_sets) d += fs.cols;
        return d;
    }
};

// One typed feature set: values with an observation mask. Nominal/ordinal
// levels are stored 0-based internally (1..m in files).
struct FeatureSetData {
    Matrix values;
    BoolMatrix observed;
};

struct View {
    ViewSchema schema;
    std::vector<FeatureSetData> sets;
};

struct MultiViewDataset {
    std::size_t n = 0;
    std::vector<View> views;

    std::size_t total_cells() const {
        std::size_t c = 0;
        for (const auto& v : views) c += n * v.schema.total_cols();
        return c;
    }
};

// Row labels per view and column labels per feature set. Stored as label
// vectors, so the one-row-one-cluster invariant holds by construction.
struct PartitionState {
    std::vector<std::vector<int>> z;               // [view][row]
    std::vector<std::vector<std::vector<int>>> w;  // [view][set][col]
};

// V-dimensional probability array over joint row-cluster labels.
class JointMixingArray {
  public:
    JointMixingArray() = default;
    explicit JointMixingArray(std::vector<std::size_t> shape, double fill = 0.0)
        : shape_(std::move(shape)) {
        std::size_t total = 1;
        for (std::size_t k : shape_) total *= k;
        data_.assign(total, fill);
        strides_.assign(shape_.size(), 1);
        for (std::size_t v = shape_.size(); v-- > 1;)
            strides_[v - 1] = strides_[v] * shape_[v];
    }

    std::size_t size() const { return data_.size(); }
    const std::vector<std::size_t>& shape() const { return shape_; }

    std::size_t flat_index(const std::vector<int>& idx) const {
        std::size_t f = 0;
        for (std::size_t v = 0; v < shape_.size(); ++v) f += strides_[v] * idx[v];
        return f;
    }
    std::vector<int> unflatten(std::size_t f) const {
        std::vector<int> idx(shape_.size());
        for (std::size_t v = 0; v < shape_.size(); ++v) {
            idx[v] = static_cast<int>(f / strides_[v]);
            f %= strides_[v];
        }
        return idx;
    }

    double& operator[](std::size_t f) { return data_[f]; }
    double operator[](std::size_t f) const { return data_[f]; }
    double& at(const std::vector<int>& idx) { return data_[flat_index(idx)]; }
    double at(const std::vector<int>& idx) const { return data_[flat_index(idx)]; }

    double sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }
    void normalize() {
        double s = sum();
        if (s > 0.0)
            for (double& v : data_) v /= s;
    }

    // Marginal over one axis.
    std::vector<double> marginal(std::size_t axis) const {
        std::vector<double> out(shape_[axis], 0.0);
        for (std::size_t f = 0; f < data_.size(); ++f)
            out[(f / strides_[axis]) % shape_[axis]] += data_[f];
        return out;
    }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

  private:
    std::vector<std::size_t> shape_;
    std::vector<std::size_t> strides_;
    std::vector<double> data_;
};

inline MultiViewDataset extract_view(const MultiViewDataset& ds, std::size_t v) {
    if (v >= ds.views.size()) throw data_error("extract_view: view index out of range");
    MultiViewDataset out;
    out.n = ds.n;
    out.views.push_back(ds.views[v]);
    return out;
}

struct ValidationIssue {
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool ok() const { return issues.empty(); }
};

inline ValidationReport validate_dataset(const MultiViewDataset& ds) {
    ValidationReport report;
    auto add = [&](const std::string& msg) { report.issues.push_back({msg}); };

    if (ds.views.empty()) add("dataset has no views");
    for (std::size_t v = 0; v < ds.views.size(); ++v) {
        const View& view = ds.views[v];
        if (view.schema.feature_sets.empty())
            add("view " + std::to_string(v) + " has no feature sets");
        if (view.schema.feature_sets.size() != view.sets.size()) {
            add("view " + std::to_string(v) + " schema/data set count mismatch");
            continue;
        }
        for (std::size_t s = 0; s < view.sets.size(); ++s) {
            const FeatureSetSchema& fs = view.schema.feature_sets[s];
            const FeatureSetData& data = view.sets[s];
            std::string where = "view " + std::to_string(v) + " set " + std::to_string(s);
            if (data.values.rows() != ds.n)
                add(where + ": row count mismatch (" + std::to_string(data.values.rows()) +
                    " vs n=" + std::to_string(ds.n) + ")");
            if (data.values.cols() != fs.cols)
                add(where + ": column count mismatch");
            if (fs.type.discrete_levels() && fs.type.levels < 2)
                add(where + ": nominal/ordinal set needs levels >= 2");
            if (data.observed.rows() != data.values.rows() ||
                data.observed.cols() != data.values.cols()) {
                add(where + ": mask shape mismatch");
                continue;
            }
            for (std::size_t i = 0; i < data.values.rows(); ++i) {
                for (std::size_t j = 0; j < data.values.cols(); ++j) {
                    if (!data.observed(i, j)) continue;
                    double x = data.values(i, j);
                    std::ostringstream cell;
                    cell << where << " cell (" << i << "," << j << ")";
                    switch (fs.type.kind) {
                        case FeatureKind::Nominal:
                        case FeatureKind::Ordinal:
                            if (x != std::floor(x) || x < 0 || x >= fs.type.levels)
                                add(cell.str() + ": level out of range 1.." +
                                    std::to_string(fs.type.levels));
                            break;
                        case FeatureKind::Continuous:
                            if (!std::isfinite(x)) add(cell.str() + ": non-finite value");
                            break;
                        case FeatureKind::Count:
                            if (x != std::floor(x) || x < 0)
                                add(cell.str() + ": count must be a nonnegative integer");
                            break;
                    }
                }
            }
        }
    }
    return report;
}

// Adjusted Rand index with the permutation-model expected-index correction.
inline double ari(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw data_error("ari: label vectors differ in length");
    const std::size_t n = a.size();
    if (n == 0) return 1.0;

    auto relabel = [](const std::vector<int>& labels) {
        std::vector<int> sorted(labels);
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        std::vector<int> out(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i)
            out[i] = static_cast<int>(
                std::lower_bound(sorted.begin(), sorted.end(), labels[i]) - sorted.begin());
        return std::pair<std::vector<int>, std::size_t>(out, sorted.size());
    };
    auto [la, ka] = relabel(a);
    auto [lb, kb] = relabel(b);

    Matrix table(ka, kb, 0.0);
    for (std::size_t i = 0; i < n; ++i) table(la[i], lb[i]) += 1.0;

    auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double sum_ij = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (std::size_t i = 0; i < ka; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < kb; ++j) {
            sum_ij += choose2(table(i, j));
            row += table(i, j);
        }
        sum_a += choose2(row);
    }
    for (std::size_t j = 0; j < kb; ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < ka; ++i) col += table(i, j);
        sum_b += choose2(col);
    }
    double total = choose2(static_cast<double>(n));
    double expected = sum_a * sum_b / total;
    double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;  // both partitions trivial
    return (sum_ij - expected) / (max_index - expected);
}

}  // namespace mvlbm
