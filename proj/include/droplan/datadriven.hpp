// datadriven.hpp : sampling, SAA baseline, cross-validated mechanism tuning,
// out-of-sample scoring, robustness index and sign tests.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "droplan/lowerlevel.hpp"
#include "droplan/mechanism.hpp"
#include "droplan/model.hpp"
#include "droplan/risk.hpp"
#include "droplan/tldr.hpp"

namespace droplan {

struct Dataset {
    Mat samples;  // n x n_d, entries >= 0
    std::uint64_t seed = 0;

    Eigen::Index size() const { return samples.rows(); }
    Vec row(Eigen::Index i) const { return samples.row(i).transpose(); }
};

/// Multivariate normal with Sigma_ii = sigma_i^2, Sigma_ij = rho sigma_i
/// sigma_j, transformed by the symmetric square root and clamped at 0
/// componentwise (clamping keeps n fixed; switchable to rejection).
Dataset generate_truncated_mvn(const Vec& mu, const Vec& sigma, double rho, int n,
                               std::uint64_t seed, bool reject_instead_of_clamp = false);

/// Componentwise mean and population (divide by n) standard deviation.
MomentInfo empirical_moments(const Dataset& d);

/// Sample average approximation with per-sample recourse:
///   min c'x + rho_hat(-p'y_w)  s.t. x in X(b), y_w >= 0, Ay_w <= x,
///   Hy_w <= d_w, equal weights. Supported risks: expectation, CVaR.
struct SaaSolution {
    Vec x;
    double value = 0.0;
    SolveStatus status = SolveStatus::numeric_failure;
};

SaaSolution solve_saa(const ProblemData& pd, const Dataset& d, const RiskSpec& r);

/// Per-sample losses g(x, d_w) = min{-p'y : y >= 0, Ay <= x, Hy <= d_w},
/// one small LP each. jobs > 1 runs the OpenMP kernel; jobs == 1 is the
/// serial reference; both orderings produce identical vectors.
std::vector<double> batch_recourse_losses(const ProblemData& pd, const Vec& x, const Dataset& d,
                                          int jobs = 1);

/// Out-of-sample score J(x, D) = c'x + rho_hat(g(x, d_w)) on equal weights.
double evaluate_J(const ProblemData& pd, const Vec& x, const Dataset& d, const RiskSpec& r,
                  int jobs = 1);

/// 5-fold cross-validation over the (kappa, eta) grid {0, step, ..., 1}^2.
/// Per fold and cell: estimate fold moments, build the mechanism, solve the
/// lower level for x, fit the policy, score the validation fold as
/// c'x + rho(-p' min{v, U d_w}). Ties break to smallest kappa then eta.
struct CVResult {
    double kappa_star = 0.0;
    double eta_star = 0.0;
    std::vector<double> kappa_grid;
    std::vector<double> eta_grid;
    Mat avg_validation_cost;            // kappa index x eta index
    std::vector<int> fold_of_sample;    // deterministic fold assignment
};

CVResult cross_validate(const ProblemData& pd, const Dataset& d_tr, const RiskSpec& r, int folds,
                        std::uint64_t seed, double grid_step = 0.05);

/// (J_mech - J_saa) / J_star; |J_star| < 1e-9 is undefined and flagged.
std::optional<double> robustness_index(double J_mech, double J_saa, double J_star);

/// One-sided exact binomial sign test. diffs are J_mech - J_saa per cell;
/// k counts negatives (mechanism strictly better), exact zeros are dropped.
/// direction plus  -> P(Bin(n,1/2) >= k): small when the mechanism wins,
/// direction minus -> P(Bin(n,1/2) <= k): small when SAA wins.
/// Exact integer summation up to n = 64, log-domain accumulation beyond.
enum class SignDirection { plus, minus };

std::optional<double> sign_test(const std::vector<double>& diffs, SignDirection dir);

}  // namespace droplan
