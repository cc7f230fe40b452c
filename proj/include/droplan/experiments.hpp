// experiments.hpp : orchestration of the scale sweeps and data-driven
// robustness runs, with CSV emission.
//
// Cells are independent tasks; each derives its seed from
// (master_seed, instance id, role), so results do not depend on the
// execution order. jobs == 1 runs the serial reference path, jobs > 1 the
// OpenMP path; outputs are identical.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "droplan/datadriven.hpp"
#include "droplan/instancegen.hpp"
#include "droplan/model.hpp"

namespace droplan {

struct MechanismRatios {
    double kappa = 0.0;
    double eta = 0.0;
};

struct ScaleSweepConfig {
    std::vector<GeneratedInstance> instances;
    std::vector<double> k_values = {1, 2, 5, 10, 20, 50};
    double s = 1.0;
    std::vector<MechanismRatios> mechanisms = {{0, 0}, {0.5, 0.5}, {0.5, 1}, {1, 0.5}, {1, 1}};
    int jobs = 1;
    std::string config_tag;  // stamped on every CSV row so files identify their run
};

struct ScaleSweepRow {
    std::string instance_id;
    double budget_ratio = 0.0;
    double kappa = 0.0, eta = 0.0, k = 1.0;
    double V0 = 0.0, Vbar = 0.0, C_mech = 0.0, C_tldr = 0.0;
    std::optional<double> wcr;
    double loss_bound = 0.0, value_bound = 0.0;
    double solve_ms_mech = 0.0, solve_ms_tldr = 0.0;
    bool skipped = false;
    std::string skip_reason;
};

struct ScaleSweepResult {
    std::vector<ScaleSweepRow> rows;  // sorted by (id, kappa, eta, k)
    int skipped_cells = 0;
    std::string config_tag;
};

ScaleSweepResult run_scale_sweep(const ScaleSweepConfig& cfg);

void write_scale_sweep_csv(const ScaleSweepResult& res, const std::string& path);
/// Average WCR per (budget_ratio, kappa, eta, k) over instances.
void write_scale_sweep_summary_csv(const ScaleSweepResult& res, const std::string& path);

struct RobustnessConfig {
    std::vector<GeneratedInstance> instances;
    std::vector<std::pair<double, double>> rho_pairs = {{0, 0}, {0, 1}, {1, 0}};
    std::vector<int> n_tr_values = {100};
    int n_te = 1000;
    int repetitions = 1;
    double beta = 0.05;
    double grid_step = 0.05;
    int folds = 5;
    std::uint64_t master_seed = 0;
    int jobs = 1;
    bool reject_instead_of_clamp = false;
    std::string config_tag;
};

struct RobustnessRow {
    std::string instance_id;
    double budget_ratio = 0.0;
    double rho_tr = 0.0, rho_te = 0.0;
    int n_tr = 0;
    std::uint64_t seed = 0;
    double kappa_star = 0.0, eta_star = 0.0;
    double J_mech = 0.0, J_saa = 0.0, J_star = 0.0;
    std::optional<double> robustness_index;
};

struct SignTestSummaryRow {
    double budget_ratio = 0.0;
    double shift = 0.0;  // rho_te - rho_tr
    int n = 0;
    int mech_wins = 0;
    std::optional<double> p_plus, p_minus;
};

struct RobustnessResult {
    std::vector<RobustnessRow> rows;
    std::vector<SignTestSummaryRow> sign_tests;
    int undefined_index_cells = 0;
    std::string config_tag;
};

RobustnessResult run_robustness(const RobustnessConfig& cfg);

void write_robustness_csv(const RobustnessResult& res, const std::string& path);
void write_sign_test_csv(const std::vector<SignTestSummaryRow>& rows, const std::string& path);

/// Recomputes the sign-test summary from a written robustness CSV.
std::vector<SignTestSummaryRow> sign_tests_from_csv(const std::string& path);

}  // namespace droplan
