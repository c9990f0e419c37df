// Command-line front end: simulate, fit, select, evaluate.
//
// Exit codes: 0 success (including a fit that stopped without converging),
// 2 invalid input or an input the model cannot be estimated from, 3 file
// system failure.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ghgmm/em.hpp"
#include "ghgmm/io.hpp"
#include "ghgmm/selection.hpp"
#include "ghgmm/simulate.hpp"

namespace {

using ghgmm::io::Json;
using Clock = std::chrono::steady_clock;

constexpr int kExitInput = 2;
constexpr int kExitIo = 3;

struct CommonFit {
    std::string data;
    std::string out;
    std::vector<std::string> times;
    double center = 0.0;
    int q = 2;
    int starts = 3;
    std::uint64_t seed = 1;
    double eps = 1e-5;
    int max_iter = 1000;
    std::string init = "kmeans";
    bool covariate_mixing = false;
};

void add_common(CLI::App* cmd, CommonFit& c) {
    cmd->add_option("--data", c.data, "dataset CSV (id,t1..tT[,x1..xm])")->required();
    cmd->add_option("--out", c.out, "report path; stdout when omitted");
    cmd->add_option("--times", c.times, "time scores, one per occasion (default 0..T-1)")->delimiter(',');
    cmd->add_option("--center", c.center, "time centering constant");
    cmd->add_option("--q", c.q, "number of growth factors");
    cmd->add_option("--starts", c.starts, "number of initializations");
    cmd->add_option("--seed", c.seed, "random seed");
    cmd->add_option("--eps", c.eps, "Aitken stopping tolerance");
    cmd->add_option("--max-iter", c.max_iter, "EM iteration cap");
    cmd->add_option("--init", c.init, "initialization")->check(CLI::IsMember({"kmeans", "random"}));
    cmd->add_flag("--covariate-mixing", c.covariate_mixing, "class probabilities depend on covariates");
}

ghgmm::FitConfig fit_config(const CommonFit& c) {
    ghgmm::FitConfig cfg;
    cfg.n_starts = c.starts;
    cfg.seed = c.seed;
    cfg.aitken_eps = c.eps;
    cfg.max_iter = c.max_iter;
    cfg.init = c.init == "random" ? ghgmm::InitMethod::RandomPartition : ghgmm::InitMethod::KMeansLike;
    return cfg;
}

Json config_json(const ghgmm::FitConfig& cfg) {
    return {{"max_iter", cfg.max_iter}, {"aitken_eps", cfg.aitken_eps}, {"n_starts", cfg.n_starts},
            {"init", cfg.init == ghgmm::InitMethod::RandomPartition ? "random" : "kmeans"},
            {"seed", cfg.seed},         {"ridge", cfg.ridge},           {"index_steps", cfg.index_steps}};
}

ghgmm::io::Table load_data(const CommonFit& c) {
    ghgmm::io::Table tab = ghgmm::io::read_dataset_csv(c.data);
    if (!c.times.empty()) {
        Eigen::VectorXd t(static_cast<Eigen::Index>(c.times.size()));
        for (std::size_t i = 0; i < c.times.size(); ++i) {
            try {
                t[static_cast<Eigen::Index>(i)] = std::stod(c.times[i]);
            } catch (const std::exception&) {
                throw ghgmm::InputError("--times: not a number: '" + c.times[i] + "'");
            }
        }
        tab.data.time_scores = t;
    }
    tab.data.center = c.center;
    ghgmm::validate(tab.data);
    return tab;
}

void emit(const std::string& path, const Json& report) {
    const std::string text = report.dump(2) + "\n";
    if (path.empty())
        std::cout << text;
    else
        ghgmm::io::write_file_atomic(path, text);
}

ghgmm::io::RunManifest manifest(const std::string& command, const Json& config, std::uint64_t seed,
                                const std::vector<std::string>& inputs, Clock::time_point started) {
    ghgmm::io::RunManifest m;
    m.command = command;
    m.config_digest = ghgmm::io::sha256_hex(config.dump());
    m.seed = seed;
    m.version = ghgmm::io::software_version();
    m.wall_seconds = std::chrono::duration<double>(Clock::now() - started).count();
    for (const auto& p : inputs) m.inputs.emplace_back(p, ghgmm::io::sha256_hex(ghgmm::io::read_file(p)));
    return m;
}

std::vector<ghgmm::Variant> variants_from(const std::vector<std::string>& weights,
                                          const std::vector<std::string>& skews) {
    std::vector<ghgmm::Variant> out;
    std::set<ghgmm::Variant> seen;
    for (const auto& w : weights)
        for (const auto& s : skews) {
            const ghgmm::Variant v = ghgmm::io::parse_variant(w, s);
            if (seen.insert(v).second) out.push_back(v);
        }
    return out;
}

ghgmm::Parameterization parameterization_from(const std::string& s) {
    if (s == "general") return ghgmm::Parameterization::General;
    if (s == "constrained") return ghgmm::Parameterization::Constrained;
    throw ghgmm::InputError("param must be 'general' or 'constrained'");
}

int cmd_simulate(const std::string& scenario, std::optional<std::uint64_t> seed, const std::string& out) {
    const auto started = Clock::now();
    ghgmm::ScenarioConfig cfg;
    std::vector<std::string> inputs;
    const bool numeric = !scenario.empty() && scenario.find_first_not_of("0123456789") == std::string::npos;
    if (numeric) {
        cfg = ghgmm::builtin_scenario(std::stoi(scenario));
    } else {
        Json j;
        try {
            j = Json::parse(ghgmm::io::read_file(scenario));
        } catch (const Json::parse_error& e) {
            throw ghgmm::InputError("scenario file '" + scenario + "': " + e.what());
        }
        cfg = ghgmm::io::scenario_from_json(j);
        inputs.push_back(scenario);
    }
    if (seed) cfg.seed = *seed;
    const ghgmm::SimulatedData sim = ghgmm::generate(cfg);

    std::vector<std::string> ids(sim.labels.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = std::to_string(i + 1);
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw ghgmm::IoError("cannot create output directory '" + out + "'");
    const std::filesystem::path dir(out);
    ghgmm::io::write_file_atomic((dir / "data.csv").string(), ghgmm::io::format_dataset_csv(ids, sim.data));
    ghgmm::io::write_file_atomic((dir / "labels.csv").string(), ghgmm::io::format_labels_csv(ids, sim.labels));
    const Json scen = ghgmm::io::to_json(cfg);
    Json man = ghgmm::io::to_json(manifest("simulate", scen, cfg.seed, inputs, started));
    man["scenario"] = scen;
    man["outputs"] = Json::array();
    for (const char* f : {"data.csv", "labels.csv"})
        man["outputs"].push_back(
            {{"path", f}, {"sha256", ghgmm::io::sha256_hex(ghgmm::io::read_file((dir / f).string()))}});
    ghgmm::io::write_file_atomic((dir / "manifest.json").string(), man.dump(2) + "\n");
    return 0;
}

int cmd_fit(const CommonFit& c, const std::string& weights, const std::string& skew, const std::string& param, int K,
            bool with_resp) {
    const auto started = Clock::now();
    const ghgmm::io::Table tab = load_data(c);
    ghgmm::ModelSpec spec;
    spec.variant = ghgmm::io::parse_variant(weights, skew);
    spec.parameterization = parameterization_from(param);
    spec.K = K;
    spec.q = c.q;
    spec.use_covariate_mixing = c.covariate_mixing;
    const ghgmm::FitConfig cfg = fit_config(c);
    const ghgmm::FittedModel fm = ghgmm::fit(tab.data, spec, cfg);
    Json report = ghgmm::io::to_json(fm, with_resp);
    report["ids"] = tab.ids;
    const Json config = {{"spec", ghgmm::io::to_json(spec)}, {"fit", config_json(cfg)}};
    report["config"] = config;
    report["manifest"] = ghgmm::io::to_json(manifest("fit", config, cfg.seed, {c.data}, started));
    emit(c.out, report);
    return 0;
}

int cmd_select(const CommonFit& c, const std::vector<std::string>& weights, const std::vector<std::string>& skews,
               const std::vector<std::string>& params, int k_min, int k_max) {
    const auto started = Clock::now();
    const ghgmm::io::Table tab = load_data(c);
    std::vector<ghgmm::Parameterization> ps;
    for (const auto& p : params) ps.push_back(parameterization_from(p));
    ghgmm::ModelSpec base;
    base.q = c.q;
    base.use_covariate_mixing = c.covariate_mixing;
    const ghgmm::FitConfig cfg = fit_config(c);
    const auto variants = variants_from(weights, skews);
    const ghgmm::SelectionReport rep = ghgmm::sweep(tab.data, variants, ps, k_min, k_max, base, cfg);
    Json report = ghgmm::io::to_json(rep);
    Json vs = Json::array();
    for (auto v : variants) vs.push_back(ghgmm::to_string(v));
    Json pj = Json::array();
    for (auto p : ps) pj.push_back(ghgmm::to_string(p));
    const Json config = {{"variants", vs},  {"parameterizations", pj}, {"k_min", k_min},
                         {"k_max", k_max},  {"q", c.q},                {"fit", config_json(cfg)}};
    report["config"] = config;
    report["manifest"] = ghgmm::io::to_json(manifest("select", config, cfg.seed, {c.data}, started));
    emit(c.out, report);
    return 0;
}

int cmd_evaluate(const std::string& truth_path, const std::string& pred_path, const std::string& out) {
    const auto started = Clock::now();
    const ghgmm::io::Labels truth = ghgmm::io::read_labels_csv(truth_path);
    const ghgmm::io::Labels pred = ghgmm::io::read_labels_csv(pred_path);
    if (truth.ids.size() != pred.ids.size())
        throw ghgmm::InputError("label files differ in length (" + std::to_string(truth.ids.size()) + " vs " +
                                std::to_string(pred.ids.size()) + ")");
    std::map<std::string, int> by_id;
    for (std::size_t i = 0; i < pred.ids.size(); ++i)
        if (!by_id.emplace(pred.ids[i], pred.labels[i]).second)
            throw ghgmm::InputError("duplicate id '" + pred.ids[i] + "' in " + pred_path);
    std::vector<int> predicted(truth.ids.size());
    for (std::size_t i = 0; i < truth.ids.size(); ++i) {
        const auto it = by_id.find(truth.ids[i]);
        if (it == by_id.end()) throw ghgmm::InputError("id '" + truth.ids[i] + "' missing from " + pred_path);
        predicted[i] = it->second;
    }
    const Eigen::MatrixXi conf = ghgmm::confusion(truth.labels, predicted);
    Json rows = Json::array();
    for (Eigen::Index r = 0; r < conf.rows(); ++r) {
        Json row = Json::array();
        for (Eigen::Index c = 0; c < conf.cols(); ++c) row.push_back(conf(r, c));
        rows.push_back(row);
    }
    std::set<int> tl(truth.labels.begin(), truth.labels.end());
    std::set<int> pl(predicted.begin(), predicted.end());
    Json mapping = Json::object();
    for (const auto& [p, t] : ghgmm::match_labels(truth.labels, predicted)) mapping[std::to_string(p)] = t;
    Json report = {{"schema_version", ghgmm::io::kSchemaVersion},
                   {"kind", "evaluation"},
                   {"n", truth.ids.size()},
                   {"ari", ghgmm::ari(truth.labels, predicted)},
                   {"err", ghgmm::err(truth.labels, predicted)},
                   {"confusion", {{"truth_labels", tl}, {"predicted_labels", pl}, {"counts", rows}}},
                   {"matching", mapping}};
    report["manifest"] =
        ghgmm::io::to_json(manifest("evaluate", Json::object(), 0, {truth_path, pred_path}, started));
    emit(out, report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Growth mixture models with generalized hyperbolic and skew-t weights"};
    app.require_subcommand(1);
    app.set_version_flag("--version", ghgmm::io::software_version());

    std::string scenario;
    std::optional<std::uint64_t> sim_seed;
    std::string sim_out;
    auto* sim = app.add_subcommand("simulate", "generate a dataset from a built-in or JSON scenario");
    sim->add_option("--scenario", scenario, "built-in id 1..4 or scenario JSON path")->required();
    sim->add_option("--seed", sim_seed, "random seed (overrides the scenario's)");
    sim->add_option("--out", sim_out, "output directory")->required();

    CommonFit fit_opts;
    std::string weights = "ghd";
    std::string skew = "latent";
    std::string param = "general";
    int K = 2;
    bool with_resp = false;
    auto* fit = app.add_subcommand("fit", "fit one model");
    add_common(fit, fit_opts);
    fit->add_option("--variant", weights, "weight law: ghd, gst, gaussian");
    fit->add_option("--skew", skew, "skewness location: latent or observed");
    fit->add_option("--param", param, "general or constrained");
    fit->add_option("--K", K, "number of classes");
    fit->add_flag("--responsibilities", with_resp, "include posterior class probabilities");

    CommonFit sel_opts;
    std::vector<std::string> sel_weights{"ghd"};
    std::vector<std::string> sel_skews{"latent"};
    std::vector<std::string> sel_params{"general"};
    int k_min = 1;
    int k_max = 4;
    auto* sel = app.add_subcommand("select", "fit a grid of models and rank them by BIC");
    add_common(sel, sel_opts);
    sel->add_option("--variant", sel_weights, "weight laws, comma separated")->delimiter(',');
    sel->add_option("--skew", sel_skews, "skewness locations, comma separated")->delimiter(',');
    sel->add_option("--param", sel_params, "parameterizations, comma separated")->delimiter(',');
    sel->add_option("--k-min", k_min, "smallest K");
    sel->add_option("--k-max", k_max, "largest K");

    std::string truth_path;
    std::string pred_path;
    std::string eval_out;
    auto* ev = app.add_subcommand("evaluate", "compare two label files (ARI, ERR, confusion)");
    ev->add_option("truth", truth_path, "reference labels CSV")->required();
    ev->add_option("predicted", pred_path, "predicted labels CSV")->required();
    ev->add_option("--out", eval_out, "report path; stdout when omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*sim) return cmd_simulate(scenario, sim_seed, sim_out);
        if (*fit) return cmd_fit(fit_opts, weights, skew, param, K, with_resp);
        if (*sel) return cmd_select(sel_opts, sel_weights, sel_skews, sel_params, k_min, k_max);
        if (*ev) return cmd_evaluate(truth_path, pred_path, eval_out);
    } catch (const ghgmm::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
