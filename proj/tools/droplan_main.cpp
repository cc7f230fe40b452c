// droplan : experiment driver for the decentralized two-stage pipeline.
//
// Exit codes: 0 success, 2 capability skip (failed validation checks,
// unsupported risk for a solver, skipped sweep cells), 1 hard error.
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "droplan/datadriven.hpp"
#include "droplan/experiments.hpp"
#include "droplan/instancegen.hpp"
#include "droplan/lowerlevel.hpp"
#include "droplan/mechanism.hpp"
#include "droplan/model.hpp"
#include "droplan/rng.hpp"
#include "droplan/tldr.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitSkip = 2;

std::string fmt(double v) {
    char buf[40];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ec == std::errc() ? end : buf);
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path);
    return json::parse(in);
}

// dump() emits keys in sorted order, so equal configs hash equally
std::string config_hash(const json& resolved) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(droplan::hash_str(resolved.dump())));
    return buf;
}

droplan::RiskSpec risk_from_json(const json& j) {
    if (j.is_null()) return droplan::RiskSpec::expectation();
    std::string kind = j.value("kind", "expectation");
    if (kind == "expectation") return droplan::RiskSpec::expectation();
    if (kind == "cvar") return droplan::RiskSpec::cvar(j.value("beta", 0.05));
    if (kind == "var") return droplan::RiskSpec::var(j.value("beta", 0.05));
    if (kind == "mean_semideviation" || kind == "mean-semideviation")
        return droplan::RiskSpec::mean_semideviation(j.value("lambda", 0.5), j.value("q", 1.0));
    throw std::runtime_error("unknown risk kind: " + kind);
}

const char* status_name(droplan::SolveStatus s) {
    switch (s) {
        case droplan::SolveStatus::optimal: return "optimal";
        case droplan::SolveStatus::infeasible: return "infeasible";
        case droplan::SolveStatus::unbounded: return "unbounded";
        default: return "numeric_failure";
    }
}

std::vector<droplan::GeneratedInstance> select_instances(const json& cfg) {
    droplan::FamilyConfig fc;
    if (cfg.contains("structures")) fc.structures = cfg["structures"].get<std::vector<std::string>>();
    if (cfg.contains("budget_multipliers"))
        fc.budget_multipliers = cfg["budget_multipliers"].get<std::vector<double>>();
    if (cfg.contains("structure_seed")) fc.structure_seed = cfg["structure_seed"].get<std::uint64_t>();
    std::vector<droplan::GeneratedInstance> all = droplan::enumerate_instance_family(fc);
    if (cfg.contains("filter")) {
        const std::string needle = cfg["filter"].get<std::string>();
        std::erase_if(all, [&](const droplan::GeneratedInstance& gi) {
            return gi.desc.id().find(needle) == std::string::npos;
        });
    }
    const std::size_t cap = cfg.value("max_instances", std::size_t{0});
    if (cap > 0 && all.size() > cap) all.resize(cap);
    return all;
}

droplan::MomentInfo moments_of(const droplan::Instance& inst) {
    if (const auto* m = std::get_if<droplan::MomentInfo>(&inst.ambiguity)) return *m;
    const auto& w = std::get<droplan::WassersteinInfo>(inst.ambiguity);
    return droplan::MomentInfo{w.mu_hat, droplan::wasserstein_sigma_hat(w)};
}

json vec_to_json(const droplan::Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

void write_dataset_csv(const droplan::Dataset& d, const std::vector<std::string>& labels,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (std::size_t j = 0; j < labels.size(); ++j) out << (j ? "," : "") << labels[j];
    out << '\n';
    for (Eigen::Index i = 0; i < d.samples.rows(); ++i) {
        for (Eigen::Index j = 0; j < d.samples.cols(); ++j)
            out << (j ? "," : "") << fmt(d.samples(i, j));
        out << '\n';
    }
}

int cmd_validate(const std::string& instance_path) {
    droplan::Instance inst = droplan::load_instance_json(instance_path);
    droplan::ValidationReport rep = droplan::validate_problem(inst.pd);
    for (const droplan::ValidationCheck& c : rep.checks) {
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name;
        if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
        std::cout << '\n';
    }
    droplan::AssumptionReport ar = droplan::check_assumptions(inst.pd, moments_of(inst));
    std::cout << "INFO V0 at k=1: " << fmt(ar.v0) << (ar.nontrivial ? " (nontrivial)" : " (trivial)")
              << '\n';
    std::cout << "INFO profit margin on some product: " << (ar.margin_condition ? "yes" : "no")
              << '\n';
    if (!rep.single_nonzero_per_H_column)
        std::cout << "WARN H column structure blocks the recourse-ratio policy construction\n";
    return rep.all_pass ? kExitOk : kExitSkip;
}

int cmd_gen_instances(const json& cfg, const std::string& out_dir) {
    std::vector<droplan::GeneratedInstance> insts = select_instances(cfg);
    fs::create_directories(out_dir);
    std::ofstream index(fs::path(out_dir) / "instances.csv");
    if (!index) throw std::runtime_error("cannot write instance index");
    index << "id,structure,cost_variant,markup_variant,moment_variant,budget_multiplier,"
             "n_x,n_y,n_d\n";
    for (const droplan::GeneratedInstance& gi : insts) {
        const std::string id = gi.desc.id();
        droplan::Instance inst{gi.pd, gi.moments, id};
        std::ofstream out(fs::path(out_dir) / (id + ".json"));
        if (!out) throw std::runtime_error("cannot write instance " + id);
        out << droplan::instance_to_json(inst) << '\n';
        index << id << ',' << gi.desc.structure_id << ',' << gi.desc.cost_variant << ','
              << gi.desc.markup_variant << ',' << gi.desc.moment_variant << ','
              << fmt(gi.desc.budget_multiplier) << ',' << gi.pd.n_x() << ',' << gi.pd.n_y() << ','
              << gi.pd.n_d() << '\n';
    }
    std::cout << "wrote " << insts.size() << " instances to " << out_dir << '\n';
    return kExitOk;
}

int cmd_lower_level(const std::string& instance_path, const json& cfg, double kappa, double eta,
                    double k, double s, const std::string& out_dir) {
    droplan::Instance inst = droplan::load_instance_json(instance_path);
    droplan::MomentInfo m = moments_of(inst);
    droplan::RiskSpec risk = risk_from_json(cfg.value("risk", json()));
    droplan::MechanismParams mech = droplan::mechanism_from_ratios(kappa, eta, m.mu, m.sigma);
    droplan::TwoPointDistribution d2 = droplan::build_two_point(m.mu, mech, {k, s});

    droplan::LowerLevelSolution sol;
    try {
        sol = droplan::solve_lower_level(inst.pd, d2, risk, {k, s});
    } catch (const std::invalid_argument& e) {
        std::cerr << "skip: " << e.what() << '\n';
        return kExitSkip;
    }
    json out;
    out["status"] = status_name(sol.status);
    out["value"] = sol.value;
    out["x"] = vec_to_json(sol.x);
    out["y_l"] = vec_to_json(sol.y_l);
    if (sol.has_high) out["y_h"] = vec_to_json(sol.y_h);
    out["mechanism"] = {{"kappa", kappa},
                        {"eta", eta},
                        {"tau", d2.tau},
                        {"d_l", vec_to_json(d2.d_l)},
                        {"d_h", vec_to_json(d2.d_h)}};
    out["risk"] = risk.name();
    if (out_dir.empty()) {
        std::cout << out.dump(2) << '\n';
    } else {
        fs::create_directories(out_dir);
        std::ofstream f(fs::path(out_dir) / "lower_level.json");
        f << out.dump(2) << '\n';
        std::cout << "wrote " << (fs::path(out_dir) / "lower_level.json").string() << '\n';
    }
    return sol.status == droplan::SolveStatus::optimal ? kExitOk : kExitError;
}

int cmd_scale_sweep(json cfg, const std::string& out_dir, std::optional<int> jobs) {
    droplan::ScaleSweepConfig sc;
    sc.instances = select_instances(cfg);
    if (cfg.contains("k_values")) sc.k_values = cfg["k_values"].get<std::vector<double>>();
    sc.s = cfg.value("s", 1.0);
    if (cfg.contains("mechanisms")) {
        sc.mechanisms.clear();
        for (const auto& pair : cfg["mechanisms"])
            sc.mechanisms.push_back({pair.at(0).get<double>(), pair.at(1).get<double>()});
    }
    if (jobs) cfg["jobs"] = *jobs;
    sc.jobs = cfg.value("jobs", 1);
    sc.config_tag = config_hash(cfg);

    droplan::ScaleSweepResult res = droplan::run_scale_sweep(sc);
    fs::create_directories(out_dir);
    const std::string rows_path = (fs::path(out_dir) / "scale_sweep.csv").string();
    const std::string summary_path = (fs::path(out_dir) / "scale_sweep_summary.csv").string();
    droplan::write_scale_sweep_csv(res, rows_path);
    droplan::write_scale_sweep_summary_csv(res, summary_path);
    std::cout << "wrote " << res.rows.size() << " rows to " << rows_path << " (skipped "
              << res.skipped_cells << " cells), summary to " << summary_path << '\n';
    return res.skipped_cells > 0 ? kExitSkip : kExitOk;
}

int cmd_robustness(json cfg, const std::string& out_dir, std::optional<std::uint64_t> seed,
                   std::optional<int> jobs) {
    droplan::RobustnessConfig rc;
    rc.instances = select_instances(cfg);
    if (cfg.contains("rho_pairs")) {
        rc.rho_pairs.clear();
        for (const auto& pair : cfg["rho_pairs"])
            rc.rho_pairs.emplace_back(pair.at(0).get<double>(), pair.at(1).get<double>());
    }
    if (cfg.contains("n_tr")) rc.n_tr_values = cfg["n_tr"].get<std::vector<int>>();
    rc.n_te = cfg.value("n_te", 1000);
    rc.repetitions = cfg.value("repetitions", 1);
    rc.beta = cfg.value("beta", 0.05);
    rc.grid_step = cfg.value("grid_step", 0.05);
    rc.folds = cfg.value("folds", 5);
    rc.reject_instead_of_clamp = cfg.value("reject_instead_of_clamp", false);
    if (seed) cfg["master_seed"] = *seed;
    if (jobs) cfg["jobs"] = *jobs;
    rc.master_seed = cfg.value("master_seed", std::uint64_t{0});
    rc.jobs = cfg.value("jobs", 1);
    rc.config_tag = config_hash(cfg);

    droplan::RobustnessResult res = droplan::run_robustness(rc);
    fs::create_directories(out_dir);
    const std::string rows_path = (fs::path(out_dir) / "robustness.csv").string();
    const std::string tests_path = (fs::path(out_dir) / "sign_tests.csv").string();
    droplan::write_robustness_csv(res, rows_path);
    droplan::write_sign_test_csv(res.sign_tests, tests_path);
    std::cout << "wrote " << res.rows.size() << " rows to " << rows_path << " ("
              << res.undefined_index_cells << " cells with undefined index), sign tests to "
              << tests_path << '\n';
    return kExitOk;
}

int cmd_signtest(const std::string& csv_path, const std::string& out_dir) {
    std::vector<droplan::SignTestSummaryRow> rows = droplan::sign_tests_from_csv(csv_path);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const std::string path = (fs::path(out_dir) / "sign_tests.csv").string();
        droplan::write_sign_test_csv(rows, path);
        std::cout << "wrote " << rows.size() << " groups to " << path << '\n';
        return kExitOk;
    }
    std::cout << "budget_ratio,shift,n,mech_wins,p_plus,p_minus\n";
    for (const droplan::SignTestSummaryRow& r : rows) {
        std::cout << fmt(r.budget_ratio) << ',' << fmt(r.shift) << ',' << r.n << ',' << r.mech_wins
                  << ',' << (r.p_plus ? fmt(*r.p_plus) : "") << ','
                  << (r.p_minus ? fmt(*r.p_minus) : "") << '\n';
    }
    return kExitOk;
}

int cmd_ingest_sales(const std::string& csv_path, const json& cfg, const std::string& out_dir,
                     std::optional<std::uint64_t> seed_flag) {
    const int n_select = cfg.value("n_select", 100);
    const double test_percent = cfg.value("test_percent", 25.0);
    const std::uint64_t seed = seed_flag.value_or(cfg.value("master_seed", std::uint64_t{0}));
    droplan::SalesIngest si = droplan::ingest_sales_csv(csv_path, n_select, test_percent, seed);

    fs::create_directories(out_dir);
    droplan::MomentInfo m = droplan::empirical_moments(si.train);
    droplan::Instance inst{si.pd, m,
                           "ingested from " + fs::path(csv_path).filename().string() +
                               ", seed " + std::to_string(seed)};
    const fs::path dir(out_dir);
    std::ofstream f(dir / "instance.json");
    if (!f) throw std::runtime_error("cannot write instance.json");
    f << droplan::instance_to_json(inst) << '\n';
    write_dataset_csv(si.train, si.entry_labels, (dir / "train.csv").string());
    write_dataset_csv(si.test, si.entry_labels, (dir / "test.csv").string());
    std::cout << "kept " << si.entry_labels.size() << " entries; train " << si.train.size()
              << " / test " << si.test.size() << " days; wrote instance.json, train.csv, test.csv to "
              << out_dir << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decentralized two-stage distributionally robust planning driver"};
    app.require_subcommand(1);

    std::string config_path, out_dir, instance_path, csv_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "master seed override");
    app.add_option("--jobs", jobs, "parallel cell workers");
    app.add_option("--out", out_dir, "output directory");

    // fallthrough lets the shared --config/--seed/--jobs/--out flags appear
    // after the subcommand name
    CLI::App* validate = app.add_subcommand("validate", "check an instance file's assumptions");
    validate->fallthrough();
    validate->add_option("instance", instance_path, "instance JSON")->required();
    CLI::App* gen = app.add_subcommand("gen-instances", "emit the synthetic instance family");
    gen->fallthrough();
    CLI::App* lower = app.add_subcommand("lower-level", "solve one two-scenario program");
    lower->fallthrough();
    lower->add_option("instance", instance_path, "instance JSON")->required();
    double kappa = 1.0, eta = 1.0, k = 1.0, s = 1.0;
    lower->add_option("--kappa", kappa, "spread ratio in [0,1]");
    lower->add_option("--eta", eta, "tau ratio in [0,1]");
    lower->add_option("--k", k, "scale index");
    lower->add_option("--s", s, "growth exponent in [1,2)");
    CLI::App* sweep = app.add_subcommand("scale-sweep", "mechanism grid x scale sweep");
    sweep->fallthrough();
    CLI::App* robust = app.add_subcommand("robustness", "data-driven robustness experiment");
    robust->fallthrough();
    CLI::App* signtest = app.add_subcommand("signtest", "recompute sign tests from a robustness CSV");
    signtest->fallthrough();
    signtest->add_option("csv", csv_path, "robustness CSV")->required();
    CLI::App* ingest = app.add_subcommand("ingest-sales", "build an instance from sales records");
    ingest->fallthrough();
    ingest->add_option("csv", csv_path, "sales CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        json cfg = load_config(config_path);
        if (out_dir.empty()) out_dir = cfg.value("out_dir", std::string());
        if (validate->parsed()) return cmd_validate(instance_path);
        if (gen->parsed()) return cmd_gen_instances(cfg, out_dir.empty() ? "." : out_dir);
        if (lower->parsed()) return cmd_lower_level(instance_path, cfg, kappa, eta, k, s, out_dir);
        if (sweep->parsed()) return cmd_scale_sweep(cfg, out_dir.empty() ? "." : out_dir, jobs);
        if (robust->parsed())
            return cmd_robustness(cfg, out_dir.empty() ? "." : out_dir, seed, jobs);
        if (signtest->parsed()) return cmd_signtest(csv_path, out_dir);
        if (ingest->parsed())
            return cmd_ingest_sales(csv_path, cfg, out_dir.empty() ? "." : out_dir, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
