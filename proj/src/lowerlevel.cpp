#include "droplan/lowerlevel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace droplan {

namespace {

// Products sharing one margin rate leave the recourse on a tied face, and an
// interior-point iterate can land anywhere on it. The second pass pins the
// optimal value and returns the cost-weighted smallest recourse in
// fill-fraction units (ties resolve to proportional rationing), so the
// reported decisions cannot move between runs or solver revisions.
void refine_tied_recourse(ConicProblem& lp, const ProblemData& pd,
                          const std::vector<std::pair<int, const Vec*>>& recourse,
                          SolveResult& sol) {
    const int ny = static_cast<int>(pd.n_y());
    const int nd = static_cast<int>(pd.n_d());
    const Vec spend = pd.A.transpose() * pd.c;

    ConicProblem::Terms pin;
    Vec obj = lp.objective();
    for (int i = 0; i < obj.size(); ++i)
        if (obj[i] != 0.0) pin.emplace_back(i, obj[i]);
    lp.add_le(pin, sol.objective + 1e-7 * (1.0 + std::abs(sol.objective)));
    lp.clear_objective();

    std::vector<std::pair<int, double>> weighted;  // variable, sqrt(weight)
    for (const auto& [y0, dcap] : recourse) {
        for (int j = 0; j < ny; ++j) {
            double cap = std::numeric_limits<double>::infinity();
            for (int i = 0; i < nd; ++i)
                if (pd.H(i, j) > 1e-12) cap = std::min(cap, (*dcap)[i] / pd.H(i, j));
            if (!std::isfinite(cap)) cap = std::max(dcap->maxCoeff(), 1.0);
            if (cap <= 1e-12) continue;  // the demand cap already forces zero
            double w = std::max(spend[j], 1e-9) / cap;
            weighted.emplace_back(y0 + j, std::sqrt(w));
        }
    }
    if (weighted.empty()) return;

    int t = lp.add_block(ConeKind::soc, 1 + static_cast<int>(weighted.size()));
    lp.set_objective(t, 1.0);
    for (int e = 0; e < static_cast<int>(weighted.size()); ++e)
        lp.add_eq({{t + 1 + e, 1.0}, {weighted[e].first, -weighted[e].second}}, 0.0);
    SolveResult ref = solve(lp);
    // the refined point is optional; the phase-one value stays authoritative
    if (ref.ok()) sol.x = ref.x;
}

// shared constraint block: x in X(k b), y >= 0, A y <= x, H y <= dcap.
// returns the first index of the y block.
int add_stage_pair(ConicProblem& lp, const ProblemData& pd, int x0, const Vec& dcap) {
    const int nx = static_cast<int>(pd.n_x());
    const int ny = static_cast<int>(pd.n_y());
    const int nd = static_cast<int>(pd.n_d());
    int y0 = lp.add_block(ConeKind::nonneg, ny);
    for (int i = 0; i < nx; ++i) {
        ConicProblem::Terms t;
        for (int j = 0; j < ny; ++j)
            if (pd.A(i, j) != 0.0) t.emplace_back(y0 + j, pd.A(i, j));
        t.emplace_back(x0 + i, -1.0);
        lp.add_le(t, 0.0);
    }
    for (int i = 0; i < nd; ++i) {
        ConicProblem::Terms t;
        for (int j = 0; j < ny; ++j)
            if (pd.H(i, j) != 0.0) t.emplace_back(y0 + j, pd.H(i, j));
        lp.add_le(t, dcap[i]);
    }
    return y0;
}

int add_first_stage(ConicProblem& lp, const ProblemData& pd, const ScaleIndex& idx) {
    const int nx = static_cast<int>(pd.n_x());
    int x0 = lp.add_block(ConeKind::nonneg, nx);
    for (int i = 0; i < nx; ++i) lp.set_objective(x0 + i, pd.c[i]);
    for (int r = 0; r < pd.n_b(); ++r) {
        ConicProblem::Terms t;
        for (int i = 0; i < nx; ++i)
            if (pd.G(r, i) != 0.0) t.emplace_back(x0 + i, pd.G(r, i));
        lp.add_le(t, idx.k * pd.b[r]);
    }
    return x0;
}

LowerLevelSolution solve_single_scenario(const ProblemData& pd, const Vec& dcap,
                                         const ScaleIndex& idx) {
    const int nx = static_cast<int>(pd.n_x());
    const int ny = static_cast<int>(pd.n_y());
    ConicProblem lp;
    int x0 = add_first_stage(lp, pd, idx);
    int y0 = add_stage_pair(lp, pd, x0, dcap);
    for (int j = 0; j < ny; ++j) lp.set_objective(y0 + j, -pd.p[j]);
    SolveResult r = solve(lp);
    LowerLevelSolution out;
    out.status = r.status;
    if (!r.ok()) return out;
    out.value = r.objective;
    refine_tied_recourse(lp, pd, {{y0, &dcap}}, r);
    // interior-point iterates sit 1e-10 inside the cone on either side; a
    // negative x coordinate would make downstream recourse programs with
    // x as capacity infeasible
    out.x = r.x.segment(x0, nx).cwiseMax(0.0);
    out.y_l = r.x.segment(y0, ny).cwiseMax(0.0);
    out.has_high = false;
    return out;
}

}  // namespace

LowerLevelSolution solve_V0(const ProblemData& pd, const MomentInfo& m, const ScaleIndex& idx) {
    return solve_single_scenario(pd, idx.k * m.mu, idx);
}

LowerLevelSolution solve_lower_level(const ProblemData& pd, const TwoPointDistribution& d2,
                                     const RiskSpec& r, const ScaleIndex& idx) {
    if (d2.is_dirac(1e-12)) return solve_single_scenario(pd, d2.d_l, idx);

    const int ny = static_cast<int>(pd.n_y());
    const double tau = d2.tau;
    const double prob[2] = {1.0 - tau, tau};

    ConicProblem lp;
    int x0 = add_first_stage(lp, pd, idx);
    int y0[2];
    y0[0] = add_stage_pair(lp, pd, x0, d2.d_l);
    y0[1] = add_stage_pair(lp, pd, x0, d2.d_h);

    auto loss_terms = [&](int w, double scale, ConicProblem::Terms& t) {
        // contributes scale * (-p'y_w)
        for (int j = 0; j < ny; ++j) t.emplace_back(y0[w] + j, -scale * pd.p[j]);
    };

    switch (r.kind) {
        case RiskSpec::Kind::expectation: {
            for (int w = 0; w < 2; ++w)
                for (int j = 0; j < ny; ++j) lp.set_objective(y0[w] + j, -prob[w] * pd.p[j]);
            break;
        }
        case RiskSpec::Kind::cvar: {
            // t + sum prob_w u_w / beta with u_w >= -p'y_w - t, u_w >= 0
            int tvar = lp.add_block(ConeKind::free_var, 1);
            int u = lp.add_block(ConeKind::nonneg, 2);
            lp.set_objective(tvar, 1.0);
            for (int w = 0; w < 2; ++w) {
                lp.set_objective(u + w, prob[w] / r.beta);
                ConicProblem::Terms t;
                loss_terms(w, 1.0, t);
                t.emplace_back(tvar, -1.0);
                t.emplace_back(u + w, -1.0);
                lp.add_le(t, 0.0);
            }
            break;
        }
        case RiskSpec::Kind::mean_semideviation: {
            if (r.q != 1.0)
                throw std::invalid_argument("two-scenario program supports semideviation order 1 only");
            // mean + lambda * E[(loss - mean)_+] with the mean written out as
            // the probability-weighted loss expression
            int dev = lp.add_block(ConeKind::nonneg, 2);
            for (int w = 0; w < 2; ++w)
                for (int j = 0; j < ny; ++j) lp.set_objective(y0[w] + j, -prob[w] * pd.p[j]);
            for (int w = 0; w < 2; ++w) {
                lp.set_objective(dev + w, r.lambda * prob[w]);
                ConicProblem::Terms t;
                loss_terms(w, 1.0, t);
                loss_terms(0, -prob[0], t);
                loss_terms(1, -prob[1], t);
                t.emplace_back(dev + w, -1.0);
                lp.add_le(t, 0.0);
            }
            break;
        }
        default:
            throw std::invalid_argument("unsupported risk for the two-scenario program: " + r.name());
    }

    SolveResult sol = solve(lp);
    LowerLevelSolution out;
    out.status = sol.status;
    if (!sol.ok()) return out;
    out.value = sol.objective;
    refine_tied_recourse(lp, pd, {{y0[0], &d2.d_l}, {y0[1], &d2.d_h}}, sol);
    // clamped for the same capacity reason as the single-scenario path
    out.x = sol.x.segment(x0, pd.n_x()).cwiseMax(0.0);
    out.y_l = sol.x.segment(y0[0], ny).cwiseMax(0.0);
    out.y_h = sol.x.segment(y0[1], ny).cwiseMax(0.0);
    out.has_high = true;
    return out;
}

AssumptionReport check_assumptions(const ProblemData& pd, const MomentInfo& m) {
    AssumptionReport rep;
    LowerLevelSolution v0 = solve_V0(pd, m, ScaleIndex{1.0, 1.0});
    rep.v0 = v0.value;
    rep.nontrivial = v0.status == SolveStatus::optimal && v0.value < -1e-9;
    Vec margin = pd.p - pd.A.transpose() * pd.c;
    rep.margin_condition = (margin.array() > 1e-12).any();
    return rep;
}

}  // namespace droplan
