// model.hpp : two-stage problem data, ambiguity descriptions, scaling.
#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace droplan {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Deterministic data of the two-stage problem
///   min c'x + (risk of recourse loss),  x in X(b) = {x >= 0 : Gx <= b},
/// recourse g(x,d) = min{ -p'y : y >= 0, Ay <= x, Hy <= d }.
struct ProblemData {
    Vec c;  // first-stage unit costs, length n_x
    Mat G;  // budget rows, n_b x n_x
    Vec b;  // budget rhs, length n_b
    Vec p;  // second-stage unit prices, length n_y
    Mat A;  // first-stage linking, n_x x n_y
    Mat H;  // demand linking, n_d x n_y

    Eigen::Index n_x() const { return c.size(); }
    Eigen::Index n_y() const { return p.size(); }
    Eigen::Index n_d() const { return H.rows(); }
    Eigen::Index n_b() const { return b.size(); }

    bool identity_H(double tol = 0.0) const;
};

/// Mean vector and componentwise standard-deviation upper bounds.
struct MomentInfo {
    Vec mu;
    Vec sigma;
};

/// Nominal distribution summary for a 2-Wasserstein ball.
struct WassersteinInfo {
    Vec mu_hat;
    Mat sigma_hat;  // nominal covariance, symmetric PSD
    double epsilon = 0.0;
};

using AmbiguityInfo = std::variant<MomentInfo, WassersteinInfo>;

/// Growth regime: budgets and means scale with k, standard deviations with
/// k^(s/2). s in [1,2) per Taylor's law; s=2 would stop the relative spread
/// from vanishing and the asymptotics would fail.
struct ScaleIndex {
    double k = 1.0;
    double s = 1.0;
};

struct ValidationCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool all_pass = false;
    // H columns each have exactly one nonzero; required by the ratio
    // construction behind the value-gap bound.
    bool single_nonzero_per_H_column = false;
};

ValidationReport validate_problem(const ProblemData& pd);

/// Applies the (k,s) scheme: moment case (k*mu, k^{s/2}*sigma, k*b);
/// Wasserstein case (k*mu_hat, k^s*Sigma_hat, k^{s/2}*eps, k*b).
/// Throws std::domain_error for s outside [1,2) or k < 1.
std::pair<AmbiguityInfo, Vec> apply_scaling(const AmbiguityInfo& info, const Vec& b,
                                            const ScaleIndex& idx);

/// One instance as stored on disk: problem data plus its ambiguity block.
struct Instance {
    ProblemData pd;
    AmbiguityInfo ambiguity;
    std::string meta;  // free-form provenance, kept verbatim
};

Instance load_instance_json(const std::string& path);
Instance parse_instance_json(const std::string& text);
std::string instance_to_json(const Instance& inst);

}  // namespace droplan
