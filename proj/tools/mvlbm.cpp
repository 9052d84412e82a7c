// mvlbm: simulate / fit / test / impute / eval command-line front end.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvlbm/common.hpp"
#include "mvlbm/core.hpp"
#include "mvlbm/engine.hpp"
#include "mvlbm/indeptest.hpp"
#include "mvlbm/io.hpp"
#include "mvlbm/metrics.hpp"
#include "mvlbm/select.hpp"
#include "mvlbm/synthgen.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mvlbm;

namespace {

constexpr const char* kVersion = "0.1.0";

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GlobalOpts {
    std::uint64_t seed = 0;
    int jobs = 1;  // accepted for interface stability; execution is sequential
    std::string out = "out";
};

struct ManifestWriter {
    json manifest;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    ManifestWriter(const std::string& command, const GlobalOpts& g) {
        manifest["command"] = command;
        manifest["version"] = kVersion;
        manifest["seed"] = g.seed;
        manifest["jobs"] = g.jobs;
        manifest["out"] = g.out;
        manifest["inputs"] = json::object();
        manifest["outputs"] = json::array();
    }
    void input(const std::string& key, const json& value) { manifest["inputs"][key] = value; }
    void output(const fs::path& path) { manifest["outputs"].push_back(path.string()); }
    void write(const fs::path& dir) {
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                          .count();
        manifest["wall_clock_seconds"] = secs;
        io::write_json(manifest, dir / "run_manifest.json");
    }
};

std::vector<std::size_t> parse_k(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stoul(tok));
    if (out.empty()) throw CLI::ValidationError("--K", "expected a comma-separated list");
    return out;
}

std::vector<std::vector<std::size_t>> parse_l(const std::string& text) {
    std::vector<std::vector<std::size_t>> out;
    std::stringstream views(text);
    std::string view_tok;
    while (std::getline(views, view_tok, ';')) {
        std::vector<std::size_t> sets;
        std::stringstream ss(view_tok);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) sets.push_back(std::stoul(tok));
        out.push_back(std::move(sets));
    }
    if (out.empty())
        throw CLI::ValidationError("--L", "expected semicolon-separated per-view lists");
    return out;
}

void write_trace_csv(const std::vector<TracePoint>& trace, const fs::path& path) {
    std::ofstream out(path);
    out << "iter,complete_loglik";
    std::size_t pis = trace.empty() ? 0 : trace[0].pi.size();
    for (std::size_t f = 0; f < pis; ++f) out << ",pi" << f;
    out << '\n';
    char buf[32];
    for (std::size_t t = 0; t < trace.size(); ++t) {
        std::snprintf(buf, sizeof(buf), "%.17g", trace[t].complete_loglik);
        out << t << ',' << buf;
        for (double p : trace[t].pi) {
            std::snprintf(buf, sizeof(buf), "%.17g", p);
            out << ',' << buf;
        }
        out << '\n';
    }
}

void write_search_log_csv(const std::vector<select::SearchLogEntry>& log,
                          const fs::path& path) {
    std::ofstream out(path);
    out << "sweep,proposal,icl,accepted\n";
    char buf[32];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%.17g", e.icl);
        out << e.iteration << ',' << e.proposal << ',' << buf << ','
            << (e.accepted ? 1 : 0) << '\n';
    }
}

json icl_to_json(const select::IclBreakdown& icl) {
    json out;
    out["complete_loglik"] = icl.complete_loglik;
    out["row_penalty"] = icl.row_penalty;
    out["col_penalty"] = icl.col_penalty;
    out["block_penalty"] = icl.block_penalty;
    out["icl"] = icl.total();
    return out;
}

// Loads the hard partitions saved next to a model JSON (same stem).
PartitionState load_partitions(const fs::path& model_path, const ModelState& model) {
    fs::path dir = model_path.parent_path();
    std::string stem = model_path.stem().string();
    PartitionState parts;
    for (std::size_t v = 0; v < model.n_views(); ++v) {
        parts.z.push_back(
            io::read_labels_csv(dir / (stem + "_rows_v" + std::to_string(v) + ".csv")));
        std::vector<std::vector<int>> w;
        for (std::size_t s = 0; s < model.L[v].size(); ++s)
            w.push_back(io::read_labels_csv(dir / (stem + "_cols_v" + std::to_string(v) +
                                                   "_s" + std::to_string(s) + ".csv")));
        parts.w.push_back(std::move(w));
    }
    return parts;
}

void require_valid(const MultiViewDataset& ds) {
    auto report = validate_dataset(ds);
    if (!report.ok()) {
        std::string msg = "invalid dataset:";
        for (std::size_t i = 0; i < report.issues.size() && i < 10; ++i)
            msg += "\n  " + report.issues[i].message;
        throw data_error(msg);
    }
}

// --- simulate ---------------------------------------------------------------

int cmd_simulate(const GlobalOpts& g, const std::string& spec_path, bool benchmark,
                 std::size_t n, double delta, std::size_t d, int replicates,
                 double missing) {
    ManifestWriter mw("simulate", g);
    mw.input("spec", spec_path);
    mw.input("benchmark", benchmark);
    mw.input("replicates", replicates);
    mw.input("missing", missing);

    synthgen::GeneratorSpec base;
    if (benchmark) {
        base = synthgen::benchmark_spec(n, delta, d, g.seed);
    } else if (!spec_path.empty()) {
        base = io::generator_spec_from_json(io::read_json(spec_path));
    } else {
        throw usage_error("simulate: provide --spec or --benchmark");
    }
    if (missing >= 0.0) base.missing_fraction = missing;

    fs::path root(g.out);
    for (int r = 0; r < replicates; ++r) {
        synthgen::GeneratorSpec spec = base;
        spec.seed = splitmix64(g.seed ^ (0xABC0ULL + static_cast<std::uint64_t>(r)));
        double mask_fraction = spec.missing_fraction;
        spec.missing_fraction = 0.0;  // generate fully observed, mask explicitly below
        auto gen = synthgen::generate(spec);
        char name[32];
        std::snprintf(name, sizeof(name), "rep%03d", r);
        fs::path dir = root / name;
        if (mask_fraction > 0.0) {
            io::save_dataset(gen.dataset, dir, "full");
            gen.dataset = synthgen::mask_missing(gen.dataset, mask_fraction,
                                                 derive_rng(spec.seed, 0xF1));
        }
        spec.missing_fraction = mask_fraction;
        io::save_dataset(gen.dataset, dir);
        for (std::size_t v = 0; v < gen.row_labels.size(); ++v) {
            io::write_labels_csv(dir / ("truth_rows_v" + std::to_string(v) + ".csv"),
                                 gen.row_labels[v]);
            for (std::size_t s = 0; s < gen.col_labels[v].size(); ++s)
                io::write_labels_csv(dir / ("truth_cols_v" + std::to_string(v) + "_s" +
                                            std::to_string(s) + ".csv"),
                                     gen.col_labels[v][s]);
        }
        io::write_json(io::generator_spec_to_json(spec), dir / "spec.json");
        mw.output(dir / "dataset.json");
    }
    mw.write(root);
    std::cout << "simulate: wrote " << replicates << " dataset(s) under " << root.string()
              << "\n";
    return 0;
}

// --- fit --------------------------------------------------------------------

int cmd_fit(const GlobalOpts& g, const std::string& data_path, int view,
            const std::string& k_text, const std::string& l_text, bool search, bool no_test,
            const FitConfig& base_config, int gate_B, double gate_alpha,
            const select::SearchOptions& search_opts) {
    ManifestWriter mw("fit", g);
    mw.input("data", data_path);
    mw.input("view", view);
    mw.input("K", k_text);
    mw.input("L", l_text);
    mw.input("search", search);
    mw.input("no_test", no_test);
    mw.input("lambda", base_config.lambda);

    MultiViewDataset ds = io::load_dataset(data_path);
    if (view >= 0) ds = extract_view(ds, static_cast<std::size_t>(view));
    require_valid(ds);
    const std::size_t V = ds.views.size();
    fs::path dir(g.out);
    fs::create_directories(dir);

    FitConfig config = base_config;
    config.seed = g.seed;

    FitResult fit;
    std::vector<select::SearchLogEntry> full_log;

    if (!search) {
        if (k_text.empty() || l_text.empty())
            throw usage_error("fit: provide --K and --L, or --search");
        auto K = parse_k(k_text);
        auto L = parse_l(l_text);
        fit = run_sem_gibbs(ds, K, L, config);
    } else {
        // single-view searches
        std::vector<select::ModelCard> cards;
        for (std::size_t v = 0; v < V; ++v) {
            MultiViewDataset vds = extract_view(ds, v);
            FitConfig vc = config;
            vc.seed = splitmix64(config.seed ^ (v + 1));
            std::vector<select::SearchLogEntry> log;
            cards.push_back(select::greedy_search_single_view(vds, vc, search_opts, &log));
            for (auto& e : log) e.proposal = "view" + std::to_string(v) + ":" + e.proposal;
            full_log.insert(full_log.end(), log.begin(), log.end());
        }

        // pairwise independence gate
        bool dependent = no_test || V == 1;
        json gate = json::array();
        if (!no_test && V > 1) {
            for (std::size_t v1 = 0; v1 < V; ++v1)
                for (std::size_t v2 = v1 + 1; v2 < V; ++v2) {
                    MultiViewDataset d1 = extract_view(ds, v1);
                    MultiViewDataset d2 = extract_view(ds, v2);
                    auto psi1 = indeptest::density_matrix(d1, cards[v1].fit.model,
                                                          cards[v1].fit.partitions);
                    auto psi2 = indeptest::density_matrix(d2, cards[v2].fit.model,
                                                          cards[v2].fit.partitions);
                    auto res = indeptest::permutation_test(
                        psi1.psi, psi2.psi, cards[v1].fit.model.pi.data(),
                        cards[v2].fit.model.pi.data(), gate_B,
                        splitmix64(g.seed ^ (0xDEULL + v1 * 64 + v2)));
                    json entry;
                    entry["view1"] = v1;
                    entry["view2"] = v2;
                    entry["log_lambda"] = res.log_lambda;
                    entry["p_value"] = res.p_value;
                    entry["rejected"] = res.p_value < gate_alpha;
                    gate.push_back(entry);
                    if (res.p_value < gate_alpha) dependent = true;
                }
            io::write_json({{"alpha", gate_alpha}, {"B", gate_B}, {"pairs", gate}},
                           dir / "gate_report.json");
            mw.output(dir / "gate_report.json");
        }

        if (V == 1) {
            fit = std::move(cards[0].fit);
        } else {
            std::vector<std::size_t> init_K;
            std::vector<std::vector<std::size_t>> init_L;
            PartitionState init_parts;
            for (std::size_t v = 0; v < V; ++v) {
                init_K.push_back(cards[v].K[0]);
                init_L.push_back(cards[v].L[0]);
                init_parts.z.push_back(cards[v].fit.partitions.z[0]);
                init_parts.w.push_back(cards[v].fit.partitions.w[0]);
            }
            if (dependent) {
                std::vector<select::SearchLogEntry> log;
                auto card = select::search_multi_view(ds, init_K, init_L, init_parts, config,
                                                      search_opts, &log);
                for (auto& e : log) e.proposal = "joint:" + e.proposal;
                full_log.insert(full_log.end(), log.begin(), log.end());
                fit = std::move(card.fit);
            } else {
                // views look independent: keep the per-view sizes, one joint fit
                fit = run_sem_gibbs(ds, init_K, init_L, config, &init_parts);
            }
        }
        mw.input("gate_dependent", dependent);
    }

    io::save_fit(fit, config, dir);
    write_trace_csv(fit.trace, dir / "trace.csv");
    io::write_json(icl_to_json(select::compute_icl_breakdown(ds, fit)), dir / "icl.json");
    io::save_dataset(fit.imputed, dir, "imputed");
    if (!full_log.empty()) {
        write_search_log_csv(full_log, dir / "search_log.csv");
        mw.output(dir / "search_log.csv");
    }
    mw.output(dir / "model.json");
    mw.output(dir / "trace.csv");
    mw.output(dir / "icl.json");
    mw.output(dir / "imputed.json");
    mw.write(dir);

    std::cout << "fit: K =";
    for (std::size_t k : fit.model.K) std::cout << ' ' << k;
    std::cout << ", L =";
    for (const auto& lv : fit.model.L) {
        std::cout << " (";
        for (std::size_t s = 0; s < lv.size(); ++s) std::cout << (s ? "," : "") << lv[s];
        std::cout << ')';
    }
    std::cout << ", ICL = " << select::compute_icl(ds, fit) << "\n";
    return 0;
}

// --- test -------------------------------------------------------------------

int cmd_test(const GlobalOpts& g, const std::string& data_path,
             const std::vector<std::string>& fit_paths, const std::string& pairs, int B) {
    ManifestWriter mw("test", g);
    mw.input("data", data_path);
    mw.input("fits", fit_paths);
    mw.input("pairs", pairs);
    mw.input("B", B);

    MultiViewDataset ds = io::load_dataset(data_path);
    require_valid(ds);
    if (fit_paths.size() != ds.views.size())
        throw data_error("test: need one fitted marginal model per view");

    std::vector<ModelState> models;
    std::vector<PartitionState> parts;
    for (const auto& p : fit_paths) {
        models.push_back(io::model_from_json(io::read_json(p)));
        if (models.back().n_views() != 1)
            throw data_error("test: " + p + " is not a single-view model");
        parts.push_back(load_partitions(p, models.back()));
    }

    std::vector<std::pair<std::size_t, std::size_t>> view_pairs;
    if (pairs == "all") {
        for (std::size_t a = 0; a < ds.views.size(); ++a)
            for (std::size_t b = a + 1; b < ds.views.size(); ++b)
                view_pairs.emplace_back(a, b);
    } else {
        std::stringstream ss(pairs);
        std::string tok;
        std::vector<std::size_t> idx;
        while (std::getline(ss, tok, ',')) idx.push_back(std::stoul(tok));
        if (idx.size() != 2) throw usage_error("test: --pairs takes 'all' or 'v1,v2'");
        view_pairs.emplace_back(idx[0], idx[1]);
    }

    json report;
    report["B"] = B;
    report["pairs"] = json::array();
    for (auto [v1, v2] : view_pairs) {
        MultiViewDataset d1 = extract_view(ds, v1);
        MultiViewDataset d2 = extract_view(ds, v2);
        auto psi1 = indeptest::density_matrix(d1, models[v1], parts[v1]);
        auto psi2 = indeptest::density_matrix(d2, models[v2], parts[v2]);
        auto res = indeptest::permutation_test(psi1.psi, psi2.psi, models[v1].pi.data(),
                                               models[v2].pi.data(), B,
                                               splitmix64(g.seed ^ (0xDEULL + v1 * 64 + v2)));
        json entry;
        entry["view1"] = v1;
        entry["view2"] = v2;
        entry["log_lambda"] = res.log_lambda;
        entry["p_value"] = res.p_value;
        entry["dropped_clusters_view1"] = res.dropped_clusters_view1;
        entry["dropped_clusters_view2"] = res.dropped_clusters_view2;
        entry["permutation_stats"] = res.permutation_stats;
        report["pairs"].push_back(entry);
        std::cout << "test: views " << v1 << "," << v2 << " log_lambda = " << res.log_lambda
                  << " p = " << res.p_value << "\n";
    }
    fs::path dir(g.out);
    io::write_json(report, dir / "test_report.json");
    mw.output(dir / "test_report.json");
    mw.write(dir);
    return 0;
}

// --- impute -----------------------------------------------------------------

int cmd_impute(const GlobalOpts& g, const std::string& data_path,
               const std::string& model_path) {
    ManifestWriter mw("impute", g);
    mw.input("data", data_path);
    mw.input("model", model_path);

    MultiViewDataset ds = io::load_dataset(data_path);
    require_valid(ds);
    ModelState model = io::model_from_json(io::read_json(model_path));
    PartitionState parts = load_partitions(fs::path(model_path), model);

    MultiViewDataset out = ds;
    std::size_t fs_index = 0;
    for (std::size_t v = 0; v < ds.views.size(); ++v) {
        for (std::size_t s = 0; s < ds.views[v].sets.size(); ++s, ++fs_index) {
            auto& set = out.views[v].sets[s];
            bool is_count =
                model.schema[v].feature_sets[s].type.kind == FeatureKind::Count;
            dist::PoissonMargins margins;
            if (is_count) margins = dist::compute_margins(ds.views[v].sets[s]);
            std::size_t cell = 0;
            for (std::size_t i = 0; i < set.values.rows(); ++i)
                for (std::size_t j = 0; j < set.values.cols(); ++j) {
                    if (set.observed(i, j)) continue;
                    int k = parts.z[v][i];
                    int l = parts.w[v][s][j];
                    Rng rng = derive_rng(g.seed, 0x30, fs_index, cell++);
                    set.values(i, j) =
                        dist::sample(model.block(v, s, k, l), rng,
                                     is_count ? &margins : nullptr, {i, j});
                }
        }
    }
    fs::path dir(g.out);
    io::save_dataset(out, dir, "imputed");
    mw.output(dir / "imputed.json");
    mw.write(dir);
    std::cout << "impute: wrote " << (dir / "imputed.json").string() << "\n";
    return 0;
}

// --- eval -------------------------------------------------------------------

int cmd_eval(const GlobalOpts& g, const std::string& pred_path,
             const std::string& truth_dir_path, const std::string& truth_spec_path,
             const std::string& data_path, const std::string& truth_data_path,
             const std::string& imputed_path) {
    ManifestWriter mw("eval", g);
    mw.input("pred", pred_path);
    mw.input("truth_labels", truth_dir_path);
    mw.input("truth_spec", truth_spec_path);
    mw.input("data", data_path);

    ModelState model = io::model_from_json(io::read_json(pred_path));
    PartitionState parts = load_partitions(fs::path(pred_path), model);
    fs::path truth_dir(truth_dir_path);

    fs::path dir(g.out);
    fs::create_directories(dir);
    std::ofstream csv(dir / "metrics.csv");
    csv << "metric,view,set,component,value\n";
    char buf[32];
    auto emit = [&](const std::string& metric, const std::string& v, const std::string& s,
                    const std::string& comp, double value) {
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        csv << metric << ',' << v << ',' << s << ',' << comp << ',' << buf << '\n';
    };

    if (!truth_dir_path.empty()) {
        for (std::size_t v = 0; v < model.n_views(); ++v) {
            auto truth_rows =
                io::read_labels_csv(truth_dir / ("truth_rows_v" + std::to_string(v) + ".csv"));
            emit("row_ari", std::to_string(v), "", "", ari(parts.z[v], truth_rows));
            for (std::size_t s = 0; s < model.L[v].size(); ++s) {
                auto truth_cols = io::read_labels_csv(
                    truth_dir / ("truth_cols_v" + std::to_string(v) + "_s" +
                                 std::to_string(s) + ".csv"));
                emit("col_ari", std::to_string(v), std::to_string(s), "",
                     ari(parts.w[v][s], truth_cols));
            }
        }
    }

    if (!truth_spec_path.empty()) {
        if (data_path.empty())
            throw usage_error("eval: parameter MAE needs --data for the count-rate scale");
        MultiViewDataset ds = io::load_dataset(data_path);
        auto spec = io::generator_spec_from_json(io::read_json(truth_spec_path));
        for (std::size_t v = 0; v < model.n_views(); ++v) {
            auto truth_table = metrics::table_from_spec(spec, v);
            auto est_table = metrics::table_from_model(model, v, ds);
            auto res = metrics::aligned_param_error(truth_table, est_table);
            emit("param_mae", std::to_string(v), "", "", res.overall_mae);
            for (std::size_t s = 0; s < res.component_mae.size(); ++s)
                for (std::size_t c = 0; c < res.component_mae[s].size(); ++c)
                    emit("param_mae_component", std::to_string(v), std::to_string(s),
                         std::to_string(c), res.component_mae[s][c]);
        }
    }

    if (!truth_data_path.empty() && !imputed_path.empty()) {
        if (data_path.empty())
            throw usage_error("eval: imputation MAE needs --data for the missing mask");
        MultiViewDataset truth = io::load_dataset(truth_data_path);
        MultiViewDataset masked = io::load_dataset(data_path);
        MultiViewDataset imputed = io::load_dataset(imputed_path);
        auto err = metrics::imputation_mae(truth, masked, imputed);
        emit("imputation_mae", "", "", "", err.mae);
        emit("imputation_cells", "", "", "", static_cast<double>(err.cells));
    }

    csv.close();
    mw.output(dir / "metrics.csv");
    mw.write(dir);
    std::cout << "eval: wrote " << (dir / "metrics.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-view latent block model toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "RNG seed")->capture_default_str();
    app.add_option("--jobs", g.jobs, "worker count (runs sequentially)")
        ->capture_default_str();
    app.add_option("--out", g.out, "output directory")->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate synthetic multi-view datasets");
    std::string spec_path;
    bool benchmark = false;
    std::size_t sim_n = 300, sim_d = 60;
    double sim_delta = 0.5, sim_missing = -1.0;
    int replicates = 1;
    sim->add_option("--spec", spec_path, "generator spec JSON");
    sim->add_flag("--benchmark", benchmark, "use the built-in mixed-type benchmark spec");
    sim->add_option("--n", sim_n, "rows (benchmark spec)")->capture_default_str();
    sim->add_option("--delta", sim_delta, "view dependency in [0,1] (benchmark spec)")
        ->capture_default_str();
    sim->add_option("--d", sim_d, "columns per feature set (benchmark spec)")
        ->capture_default_str();
    sim->add_option("--replicates", replicates, "replicate datasets")->capture_default_str();
    sim->add_option("--missing", sim_missing, "missing-cell fraction override");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "fit the model to a dataset");
    std::string data_path, k_text, l_text, config_path;
    bool search = false, no_test = false;
    FitConfig fit_config;
    int gate_B = 100;
    double gate_alpha = 0.05;
    select::SearchOptions search_opts;
    int fit_view = -1;
    fit_cmd->add_option("--data", data_path, "dataset manifest JSON")->required();
    fit_cmd->add_option("--view", fit_view, "restrict the fit to one view (-1: all)")
        ->capture_default_str();
    fit_cmd->add_option("--K", k_text, "row clusters per view, e.g. 3,3");
    fit_cmd->add_option("--L", l_text, "column clusters, e.g. 3,3,3,3;3,3,3,3");
    fit_cmd->add_flag("--search", search, "search over K and L by ICL");
    fit_cmd->add_flag("--no-test", no_test, "skip the independence gate during --search");
    fit_cmd->add_option("--lambda", fit_config.lambda, "sparsity penalty on the joint weights")
        ->capture_default_str();
    fit_cmd->add_option("--iters", fit_config.total_iters, "total SEM-Gibbs iterations")
        ->capture_default_str();
    fit_cmd->add_option("--burn-in", fit_config.burn_in, "burn-in iterations")
        ->capture_default_str();
    fit_cmd->add_option("--resample-iters", fit_config.resample_iters,
                        "iterations with empty-cluster resampling (-1: burn-in)")
        ->capture_default_str();
    fit_cmd
        ->add_option("--resample-fraction", fit_config.resample_fraction,
                     "fraction of labels redrawn on empty clusters")
        ->capture_default_str();
    fit_cmd->add_option("--config", config_path, "JSON file with fit settings");
    fit_cmd->add_option("--gate-B", gate_B, "gate permutations")->capture_default_str();
    fit_cmd->add_option("--gate-alpha", gate_alpha, "gate significance level")
        ->capture_default_str();
    fit_cmd->add_option("--k-max", search_opts.k_max, "search bound on K")
        ->capture_default_str();
    fit_cmd->add_option("--l-max", search_opts.l_max, "search bound on L")
        ->capture_default_str();

    // test
    auto* test_cmd = app.add_subcommand("test", "permutation test of view independence");
    std::string test_data, pairs = "all";
    std::vector<std::string> fit_paths;
    int B = 200;
    test_cmd->add_option("--data", test_data, "dataset manifest JSON")->required();
    test_cmd->add_option("--fits", fit_paths, "fitted single-view model JSONs, one per view")
        ->required()
        ->delimiter(',');
    test_cmd->add_option("--pairs", pairs, "'all' or a pair 'v1,v2'")->capture_default_str();
    test_cmd->add_option("--B", B, "permutations")->capture_default_str();

    // impute
    auto* imp = app.add_subcommand("impute", "fill missing cells from a fitted model");
    std::string imp_data, imp_model;
    imp->add_option("--data", imp_data, "dataset manifest JSON")->required();
    imp->add_option("--model", imp_model, "fitted model JSON")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
    std::string pred_path, truth_dir, truth_spec, eval_data, truth_data, imputed_path;
    ev->add_option("--pred", pred_path, "fitted model JSON")->required();
    ev->add_option("--truth-labels", truth_dir, "directory with truth_*.csv label files");
    ev->add_option("--truth-spec", truth_spec, "generator spec JSON for parameter MAE");
    ev->add_option("--data", eval_data, "dataset manifest the model was fit on");
    ev->add_option("--truth-data", truth_data, "fully observed dataset manifest");
    ev->add_option("--imputed", imputed_path, "imputed dataset manifest");

    // accept the global options after the subcommand name too
    for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*sim)
            return cmd_simulate(g, spec_path, benchmark, sim_n, sim_delta, sim_d, replicates,
                                sim_missing);
        if (*fit_cmd) {
            if (!config_path.empty()) {
                double lambda = fit_config.lambda;
                fit_config = io::fit_config_from_json(io::read_json(config_path));
                if (fit_cmd->count("--lambda")) fit_config.lambda = lambda;
            }
            return cmd_fit(g, data_path, fit_view, k_text, l_text, search, no_test,
                           fit_config, gate_B, gate_alpha, search_opts);
        }
        if (*test_cmd) return cmd_test(g, test_data, fit_paths, pairs, B);
        if (*imp) return cmd_impute(g, imp_data, imp_model);
        if (*ev)
            return cmd_eval(g, pred_path, truth_dir, truth_spec, eval_data, truth_data,
                            imputed_path);
    } catch (const usage_error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const numerical_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
