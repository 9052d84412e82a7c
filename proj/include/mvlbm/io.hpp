#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvlbm/common.hpp"
#include "mvlbm/core.hpp"
#include "mvlbm/engine.hpp"
#include "mvlbm/model.hpp"
#include "mvlbm/synthgen.hpp"

namespace mvlbm::io {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

inline std::string format_value(double x, const FeatureType& type) {
    if (type.discrete_levels()) return std::to_string(static_cast<int>(x) + 1);  // 1-based
    if (type.kind == FeatureKind::Count) return std::to_string(static_cast<long>(x));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline void write_feature_csv(const fs::path& path, const FeatureSetData& set,
                              const FeatureType& type) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path.string());
    for (std::size_t i = 0; i < set.values.rows(); ++i) {
        for (std::size_t j = 0; j < set.values.cols(); ++j) {
            if (j) out << ',';
            if (set.observed(i, j)) out << format_value(set.values(i, j), type);
        }
        out << '\n';
    }
}

inline FeatureSetData read_feature_csv(const fs::path& path, const FeatureType& type) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot read " + path.string());
    std::vector<std::vector<std::pair<bool, double>>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == EOF) break;
        std::vector<std::pair<bool, double>> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (cell.empty()) {
                row.emplace_back(false, 0.0);
            } else {
                double x = std::stod(cell);
                if (type.discrete_levels()) x -= 1.0;  // to 0-based
                row.emplace_back(true, x);
            }
        }
        if (!line.empty() && line.back() == ',') row.emplace_back(false, 0.0);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw data_error("empty CSV: " + path.string());
    std::size_t cols = rows[0].size();
    FeatureSetData set;
    set.values = Matrix(rows.size(), cols);
    set.observed = BoolMatrix(rows.size(), cols, true);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols)
            throw data_error("ragged CSV: " + path.string() + " row " + std::to_string(i));
        for (std::size_t j = 0; j < cols; ++j) {
            set.observed.set(i, j, rows[i][j].first);
            set.values(i, j) = rows[i][j].second;
        }
    }
    return set;
}

inline void write_labels_csv(const fs::path& path, const std::vector<int>& labels) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path.string());
    for (int l : labels) out << (l + 1) << '\n';
}

inline std::vector<int> read_labels_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot read " + path.string());
    std::vector<int> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        labels.push_back(std::stoi(line) - 1);
    }
    return labels;
}

// Dataset manifest: views with typed feature sets, CSV paths relative to the
// manifest location.
inline void save_dataset(const MultiViewDataset& ds, const fs::path& dir,
                         const std::string& stem = "dataset") {
    fs::create_directories(dir);
    json manifest;
    manifest["views"] = json::array();
    for (std::size_t v = 0; v < ds.views.size(); ++v) {
        json view;
        view["feature_sets"] = json::array();
        for (std::size_t s = 0; s < ds.views[v].sets.size(); ++s) {
            const auto& fs_schema = ds.views[v].schema.feature_sets[s];
            std::string csv =
                stem + "_v" + std::to_string(v) + "_s" + std::to_string(s) + ".csv";
            write_feature_csv(dir / csv, ds.views[v].sets[s], fs_schema.type);
            json entry;
            entry["type"] = to_string(fs_schema.type.kind);
            if (fs_schema.type.discrete_levels()) entry["levels"] = fs_schema.type.levels;
            entry["csv"] = csv;
            view["feature_sets"].push_back(entry);
        }
        manifest["views"].push_back(view);
    }
    std::ofstream out(dir / (stem + ".json"));
    out << manifest.dump(2) << '\n';
}

inline MultiViewDataset load_dataset(const fs::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw data_error("cannot read " + manifest_path.string());
    json manifest = json::parse(in);
    fs::path dir = manifest_path.parent_path();

    MultiViewDataset ds;
    for (const auto& view_json : manifest.at("views")) {
        View view;
        for (const auto& entry : view_json.at("feature_sets")) {
            FeatureType type;
            type.kind = feature_kind_from_string(entry.at("type").get<std::string>());
            if (type.discrete_levels()) type.levels = entry.at("levels").get<int>();
            FeatureSetData set = read_feature_csv(dir / entry.at("csv").get<std::string>(), type);
            view.schema.feature_sets.push_back({type, set.values.cols()});
            view.sets.push_back(std::move(set));
        }
        ds.views.push_back(std::move(view));
    }
    if (ds.views.empty()) throw data_error("manifest has no views");
    ds.n = ds.views[0].sets.empty() ? 0 : ds.views[0].sets[0].values.rows();
    return ds;
}

inline json block_params_to_json(const dist::BlockParams& params) {
    json out;
    if (const auto* mn = std::get_if<dist::Multinomial>(&params)) {
        out["family"] = "multinomial";
        out["p"] = mn->p;
    } else if (const auto* b = std::get_if<dist::Bos>(&params)) {
        out["family"] = "bos";
        out["m"] = b->m;
        out["mu"] = b->mu;
        out["beta"] = b->beta;
    } else if (const auto* g = std::get_if<dist::Gaussian>(&params)) {
        out["family"] = "gaussian";
        out["mu"] = g->mu;
        out["sigma2"] = g->sigma2;
    } else {
        out["family"] = "poisson";
        out["delta"] = std::get<dist::Poisson>(params).delta;
    }
    return out;
}

inline dist::BlockParams block_params_from_json(const json& j) {
    std::string family = j.at("family").get<std::string>();
    if (family == "multinomial")
        return dist::Multinomial{j.at("p").get<std::vector<double>>()};
    if (family == "bos")
        return dist::Bos{j.at("m").get<int>(), j.at("mu").get<int>(),
                         j.at("beta").get<double>()};
    if (family == "gaussian")
        return dist::Gaussian{j.at("mu").get<double>(), j.at("sigma2").get<double>()};
    if (family == "poisson") return dist::Poisson{j.at("delta").get<double>()};
    throw data_error("unknown block family: " + family);
}

inline json model_to_json(const ModelState& model) {
    json out;
    out["K"] = model.K;
    out["L"] = model.L;
    out["schema"] = json::array();
    for (const auto& schema : model.schema) {
        json sets = json::array();
        for (const auto& fs_schema : schema.feature_sets) {
            json entry;
            entry["type"] = to_string(fs_schema.type.kind);
            if (fs_schema.type.discrete_levels()) entry["levels"] = fs_schema.type.levels;
            entry["cols"] = fs_schema.cols;
            sets.push_back(entry);
        }
        out["schema"].push_back(sets);
    }
    out["pi"] = {{"shape", model.pi.shape()}, {"values", model.pi.data()}};
    out["rho"] = model.rho;
    out["alpha"] = json::array();
    for (std::size_t v = 0; v < model.alpha.size(); ++v) {
        json view = json::array();
        for (std::size_t s = 0; s < model.alpha[v].size(); ++s) {
            json blocks = json::array();
            for (const auto& params : model.alpha[v][s])
                blocks.push_back(block_params_to_json(params));
            view.push_back(blocks);
        }
        out["alpha"].push_back(view);
    }
    return out;
}

inline ModelState model_from_json(const json& j) {
    ModelState model;
    model.K = j.at("K").get<std::vector<std::size_t>>();
    model.L = j.at("L").get<std::vector<std::vector<std::size_t>>>();
    for (const auto& sets : j.at("schema")) {
        ViewSchema schema;
        for (const auto& entry : sets) {
            FeatureType type;
            type.kind = feature_kind_from_string(entry.at("type").get<std::string>());
            if (type.discrete_levels()) type.levels = entry.at("levels").get<int>();
            schema.feature_sets.push_back({type, entry.at("cols").get<std::size_t>()});
        }
        model.schema.push_back(schema);
    }
    model.pi = JointMixingArray(j.at("pi").at("shape").get<std::vector<std::size_t>>());
    auto values = j.at("pi").at("values").get<std::vector<double>>();
    if (values.size() != model.pi.size()) throw data_error("model JSON: pi shape mismatch");
    for (std::size_t f = 0; f < values.size(); ++f) model.pi[f] = values[f];
    model.rho = j.at("rho").get<std::vector<std::vector<std::vector<double>>>>();
    for (const auto& view : j.at("alpha")) {
        std::vector<std::vector<dist::BlockParams>> view_alpha;
        for (const auto& blocks : view) {
            std::vector<dist::BlockParams> set_alpha;
            for (const auto& b : blocks) set_alpha.push_back(block_params_from_json(b));
            view_alpha.push_back(std::move(set_alpha));
        }
        model.alpha.push_back(std::move(view_alpha));
    }
    return model;
}

inline json fit_config_to_json(const FitConfig& config) {
    json out;
    out["total_iters"] = config.total_iters;
    out["burn_in"] = config.burn_in;
    out["resample_iters"] = config.effective_resample_iters();
    out["resample_fraction"] = config.resample_fraction;
    out["lambda"] = config.lambda;
    out["seed"] = config.seed;
    out["variance_floor"] = config.variance_floor;
    return out;
}

inline FitConfig fit_config_from_json(const json& j) {
    FitConfig config;
    if (j.contains("total_iters")) config.total_iters = j.at("total_iters").get<int>();
    if (j.contains("burn_in")) config.burn_in = j.at("burn_in").get<int>();
    if (j.contains("resample_iters")) config.resample_iters = j.at("resample_iters").get<int>();
    if (j.contains("resample_fraction"))
        config.resample_fraction = j.at("resample_fraction").get<double>();
    if (j.contains("lambda")) config.lambda = j.at("lambda").get<double>();
    if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("variance_floor"))
        config.variance_floor = j.at("variance_floor").get<double>();
    return config;
}

inline void save_fit(const FitResult& fit, const FitConfig& config, const fs::path& dir,
                     const std::string& stem = "model") {
    fs::create_directories(dir);
    json out = model_to_json(fit.model);
    out["config"] = fit_config_to_json(config);
    json trace;
    trace["complete_loglik"] = json::array();
    for (const auto& point : fit.trace) trace["complete_loglik"].push_back(point.complete_loglik);
    out["trace"] = trace;
    std::ofstream file(dir / (stem + ".json"));
    file << out.dump(2) << '\n';

    for (std::size_t v = 0; v < fit.partitions.z.size(); ++v) {
        write_labels_csv(dir / (stem + "_rows_v" + std::to_string(v) + ".csv"),
                         fit.partitions.z[v]);
        for (std::size_t s = 0; s < fit.partitions.w[v].size(); ++s)
            write_labels_csv(
                dir / (stem + "_cols_v" + std::to_string(v) + "_s" + std::to_string(s) + ".csv"),
                fit.partitions.w[v][s]);
    }
}

inline json generator_spec_to_json(const synthgen::GeneratorSpec& spec) {
    json out;
    out["n"] = spec.n;
    out["K"] = spec.K;
    out["delta_dep"] = spec.delta_dep;
    out["missing_fraction"] = spec.missing_fraction;
    out["seed"] = spec.seed;
    out["views"] = json::array();
    for (std::size_t v = 0; v < spec.schema.size(); ++v) {
        json view;
        view["feature_sets"] = json::array();
        for (std::size_t s = 0; s < spec.schema[v].feature_sets.size(); ++s) {
            const auto& fs_schema = spec.schema[v].feature_sets[s];
            json entry;
            entry["type"] = to_string(fs_schema.type.kind);
            if (fs_schema.type.discrete_levels()) entry["levels"] = fs_schema.type.levels;
            entry["cols"] = fs_schema.cols;
            entry["L"] = spec.L[v][s];
            entry["rho"] = spec.rho[v][s];
            json blocks = json::array();
            for (const auto& params : spec.alpha[v][s])
                blocks.push_back(block_params_to_json(params));
            entry["alpha"] = blocks;
            view["feature_sets"].push_back(entry);
        }
        out["views"].push_back(view);
    }
    return out;
}

inline synthgen::GeneratorSpec generator_spec_from_json(const json& j) {
    synthgen::GeneratorSpec spec;
    spec.n = j.at("n").get<std::size_t>();
    spec.K = j.at("K").get<std::size_t>();
    spec.delta_dep = j.at("delta_dep").get<double>();
    if (j.contains("missing_fraction"))
        spec.missing_fraction = j.at("missing_fraction").get<double>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& view_json : j.at("views")) {
        ViewSchema schema;
        std::vector<std::size_t> L;
        std::vector<std::vector<double>> rho;
        std::vector<std::vector<dist::BlockParams>> alpha;
        for (const auto& entry : view_json.at("feature_sets")) {
            FeatureType type;
            type.kind = feature_kind_from_string(entry.at("type").get<std::string>());
            if (type.discrete_levels()) type.levels = entry.at("levels").get<int>();
            schema.feature_sets.push_back({type, entry.at("cols").get<std::size_t>()});
            L.push_back(entry.at("L").get<std::size_t>());
            rho.push_back(entry.at("rho").get<std::vector<double>>());
            std::vector<dist::BlockParams> blocks;
            for (const auto& b : entry.at("alpha"))
                blocks.push_back(block_params_from_json(b));
            alpha.push_back(std::move(blocks));
        }
        spec.schema.push_back(std::move(schema));
        spec.L.push_back(std::move(L));
        spec.rho.push_back(std::move(rho));
        spec.alpha.push_back(std::move(alpha));
    }
    return spec;
}

inline void write_json(const json& j, const fs::path& path) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw data_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot read " + path.string());
    return json::parse(in);
}

}  // namespace mvlbm::io
