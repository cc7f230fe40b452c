// tldr.hpp : truncated linear decision rules, worst-case costs, gap bounds.
#pragma once

#include "droplan/conic.hpp"
#include "droplan/lowerlevel.hpp"
#include "droplan/mechanism.hpp"
#include "droplan/model.hpp"
#include "droplan/risk.hpp"

namespace droplan {

/// Recourse policy d -> min{v, U d} componentwise; with anchoring x it is
/// implementable iff A v <= x and H U <= I (entrywise).
struct TLDRPolicy {
    Vec v;
    Mat U;

    Vec apply(const Vec& d) const { return v.cwiseMin(U * d); }
};

bool policy_feasible(const ProblemData& pd, const Vec& x, const TLDRPolicy& pol,
                     double tol = 1e-8);

/// Fits the policy to a two-point forecast at a fixed first stage:
/// minimizes c'x + rho(-p'w(omega)) over v, U >= 0, Av <= x, HU <= I with
/// per-atom auxiliaries w_w <= v, w_w <= U d_w (tight at optimum because
/// larger w lowers the loss). Returns the bound Vbar and the policy. The
/// fit can be tied across many threshold vectors; when v_anchor is given,
/// a second pass picks the optimal v closest to it in Euclidean norm.
std::pair<double, TLDRPolicy> fit_tldr(const ProblemData& pd, const Vec& x_fixed,
                                       const TwoPointDistribution& d2, const RiskSpec& r,
                                       const ScaleIndex& idx, const Vec* v_anchor = nullptr);

/// Worst-case expected loss sup E[-p' min{v, d}] over laws on [0,inf)^n
/// with mean k*mu and marginal second moment at most (k mu)^2 + k^s sigma^2.
/// Requires the identity demand structure (H = I, so U = I is optimal) and
/// p >= 0. The problem separates per coordinate and each coordinate has a
/// two-atom worst law with a closed-form value, evaluated here directly.
/// Scaling is applied internally to the given moments.
double worst_case_expected_loss(const Vec& v, const Vec& p, const MomentInfo& m,
                                const ScaleIndex& idx);

/// The same worst case evaluated through its second-order cone dual with
/// per-coordinate variables (lambda, s, r, q1, q2) and two 3-d cones per
/// coordinate. Agrees with the closed form to solver accuracy; kept as the
/// cross-check path and the template for embedding the worst case into
/// larger programs.
double worst_case_expected_loss_socp(const Vec& v, const Vec& p, const MomentInfo& m,
                                     const ScaleIndex& idx);

/// Joint benchmark: min c'x + sup E[-p' min{v, d}] over x in X(kb), v >= 0,
/// Av <= x, one SOCP. Requires H = I; throws std::invalid_argument else.
struct TldrDroSolution {
    double cost = 0.0;
    Vec x;
    Vec v;
    SolveStatus status = SolveStatus::numeric_failure;
};

TldrDroSolution solve_tldr_dro(const ProblemData& pd, const MomentInfo& m, const ScaleIndex& idx);

/// Ratio construction turning a recourse decision at one demand point into
/// a policy: U_{ji} = y_j / d_i for the unique i with H_{ij} > 0 (zero row
/// where y_j = 0), v = y. Requires one nonzero per H column and
/// H y <= anchor_d. Guarantees H U <= I and U anchor_d = y.
TLDRPolicy construct_tldr_from_recourse(const Vec& y_at, const Vec& anchor_d, const Mat& H);

/// Inputs echoed with the analytic bounds; alpha is the standard risk
/// coefficient of the risk measure in use.
struct GapBoundInputs {
    double alpha = 0.0;
    double k = 1.0;
    double s = 1.0;
    double tau = 0.0;
    Vec varsigma;
    Vec sigma;
    Vec p;
};

struct GapBounds {
    double loss_bound = 0.0;   // bounds C - Vbar
    double value_bound = 0.0;  // bounds Vbar - V0
    GapBoundInputs inputs;
};

/// Evaluates the closed-form bounds:
///   loss:  (1/2+alpha) k^{s/2} p'U_mech sigma
///            + sqrt((1-tau)/tau) k^{s/2} p'U_mech varsigma
///   value: (1/2+alpha) k^{s/2} p'U_exp sigma
///            + (sqrt((1-tau)/tau)+sqrt(tau/(1-tau))) k^{s/2} p'Ubar varsigma
/// The Dirac case tau = 0 gives loss (1/2+alpha) k^{s/2} p'U_exp sigma and
/// value 0 (the Dirac fit is exact). tau = 1 is a pole and rejected.
GapBounds analytic_gap_bounds(const Mat& U_mech, const Mat& U_exp, const GapBoundInputs& in,
                              const Mat& Ubar);

/// Worst-case cost of running policy pol from first stage x. Exact when the
/// risk is expectation, H = I and U is diagonal (then min{v,Ud} rewrites as
/// an identity-slope policy and the worst case is the per-coordinate SOCP);
/// otherwise returns the certified upper bound
///   c'x + rho(two-point loss of pol) + loss_bound(U)
/// with exact=false. The bound path needs the mechanism the policy was
/// fitted against; passing mech=nullptr there throws.
struct CostEval {
    double value = 0.0;
    bool exact = false;
    double vbar = 0.0;        // bound path only
    double loss_bound = 0.0;  // bound path only
};

CostEval evaluate_cost(const ProblemData& pd, const Vec& x, const TLDRPolicy& pol,
                       const MomentInfo& m, const ScaleIndex& idx, const RiskSpec& r,
                       const MechanismParams* mech = nullptr);

}  // namespace droplan
