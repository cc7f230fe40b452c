// lowerlevel.hpp : the operations team's problems under a communicated law.
#pragma once

#include "droplan/conic.hpp"
#include "droplan/mechanism.hpp"
#include "droplan/model.hpp"
#include "droplan/risk.hpp"

namespace droplan {

struct LowerLevelSolution {
    double value = 0.0;
    Vec x;
    Vec y_l;
    Vec y_h;            // empty for the Dirac case
    bool has_high = false;
    SolveStatus status = SolveStatus::numeric_failure;
};

/// Expectation problem under the Dirac forecast at k*mu:
///   min c'x - p'y  s.t.  x in X(kb), y >= 0, Ay <= x, Hy <= k*mu.
/// Always feasible (x = y = 0).
LowerLevelSolution solve_V0(const ProblemData& pd, const MomentInfo& m, const ScaleIndex& idx);

/// Two-scenario risk-averse program under a two-point forecast:
///   min c'x + rho(-p'y(omega))  over x in X(kb), y_l, y_h >= 0,
///   A y_w <= x, H y_w <= d_w.
/// Supported risks: expectation, CVaR (epigraph), mean-semideviation q=1.
/// A Dirac input reduces to the V0 program at its atom. Throws
/// std::invalid_argument for unsupported risk specs.
LowerLevelSolution solve_lower_level(const ProblemData& pd, const TwoPointDistribution& d2,
                                     const RiskSpec& r, const ScaleIndex& idx);

/// Non-triviality diagnostic: V0 at k=1 must be < 0 for the instance to be
/// interesting; p <= A'c everywhere forces V0 = 0 (no profitable product).
struct AssumptionReport {
    double v0 = 0.0;
    bool nontrivial = false;        // V0 < -1e-9
    bool margin_condition = false;  // some j with p_j > (A'c)_j
};

AssumptionReport check_assumptions(const ProblemData& pd, const MomentInfo& m);

}  // namespace droplan
