#include "droplan/tldr.hpp"

#include <cmath>
#include <stdexcept>

namespace droplan {

namespace {

// adds the per-coordinate dual variables and cones of the worst-case
// expected loss sup E[-p_i min(v_i, d_i)] over laws on [0,inf) with mean
// mubar_i and second moment at most mubar_i^2 + varbar_i.
//
// vars: lambda, r free; s, q1, q2 >= 0; two 3-d cones linked by equalities
//   (s + r + p v, q1 - lambda, s - r - p v) and
//   (s + r,       q2 - lambda - p, s - r).
// objective contribution: mubar*lambda + (mubar^2 + varbar)*s + r.
// v enters either as a constant (v_fixed >= 0, v_var < 0) or as the
// variable with index v_var.
void add_wc_coordinate(ConicProblem& cp, double price, double mubar, double varbar,
                       double v_fixed, int v_var) {
    int lam = cp.add_block(ConeKind::free_var, 2);  // lambda, r
    int s = cp.add_block(ConeKind::nonneg, 3);      // s, q1, q2
    int c1 = cp.add_block(ConeKind::soc, 3);
    int c2 = cp.add_block(ConeKind::soc, 3);
    cp.set_objective(lam, mubar);
    cp.set_objective(lam + 1, 1.0);
    cp.set_objective(s, mubar * mubar + varbar);

    ConicProblem::Terms t;
    // cone 1, first coordinate: a = s + r + p*v
    t = {{c1, 1.0}, {s, -1.0}, {lam + 1, -1.0}};
    if (v_var >= 0) t.emplace_back(v_var, -price);
    cp.add_eq(t, v_var >= 0 ? 0.0 : price * v_fixed);
    // cone 1, second: b = q1 - lambda
    cp.add_eq({{c1 + 1, 1.0}, {s + 1, -1.0}, {lam, 1.0}}, 0.0);
    // cone 1, third: c = s - r - p*v
    t = {{c1 + 2, 1.0}, {s, -1.0}, {lam + 1, 1.0}};
    if (v_var >= 0) t.emplace_back(v_var, price);
    cp.add_eq(t, v_var >= 0 ? 0.0 : -price * v_fixed);
    // cone 2: (s + r, q2 - lambda - p, s - r)
    cp.add_eq({{c2, 1.0}, {s, -1.0}, {lam + 1, -1.0}}, 0.0);
    cp.add_eq({{c2 + 1, 1.0}, {s + 2, -1.0}, {lam, 1.0}}, -price);
    cp.add_eq({{c2 + 2, 1.0}, {s, -1.0}, {lam + 1, 1.0}}, 0.0);
}

DiscreteLossDistribution two_point_losses(const Vec& p, const TLDRPolicy& pol,
                                          const TwoPointDistribution& d2) {
    DiscreteLossDistribution dist;
    if (d2.is_dirac(1e-12)) {
        dist.loss = {-p.dot(pol.apply(d2.d_l))};
        dist.prob = {1.0};
    } else {
        dist.loss = {-p.dot(pol.apply(d2.d_l)), -p.dot(pol.apply(d2.d_h))};
        dist.prob = {1.0 - d2.tau, d2.tau};
    }
    return dist;
}

}  // namespace

bool policy_feasible(const ProblemData& pd, const Vec& x, const TLDRPolicy& pol, double tol) {
    if (pol.v.size() != pd.n_y() || pol.U.rows() != pd.n_y() || pol.U.cols() != pd.n_d())
        return false;
    double scale = 1.0 + x.lpNorm<Eigen::Infinity>();
    if (pol.v.minCoeff() < -tol * scale) return false;
    if (pol.U.minCoeff() < -tol) return false;
    if ((pd.A * pol.v - x).maxCoeff() > tol * scale) return false;
    Mat hu = pd.H * pol.U - Mat::Identity(pd.n_d(), pd.n_d());
    return hu.maxCoeff() <= tol;
}

std::pair<double, TLDRPolicy> fit_tldr(const ProblemData& pd, const Vec& x_fixed,
                                       const TwoPointDistribution& d2, const RiskSpec& r,
                                       const ScaleIndex& idx, const Vec* v_anchor) {
    (void)idx;  // atoms arrive already scaled; x_fixed already sized for k
    const int ny = static_cast<int>(pd.n_y());
    const int nd = static_cast<int>(pd.n_d());
    const bool diag = pd.identity_H(1e-12);
    const bool dirac = d2.is_dirac(1e-12);
    const int nsc = dirac ? 1 : 2;
    const Vec* atoms[2] = {&d2.d_l, &d2.d_h};
    double prob[2] = {1.0, 0.0};
    if (!dirac) {
        prob[0] = 1.0 - d2.tau;
        prob[1] = d2.tau;
    }

    ConicProblem lp;
    int v0 = lp.add_block(ConeKind::nonneg, ny);
    int u0;
    if (diag) {
        u0 = lp.add_block(ConeKind::nonneg, ny);  // diagonal of U
        for (int j = 0; j < ny; ++j) lp.add_le({{u0 + j, 1.0}}, 1.0);
    } else {
        u0 = lp.add_block(ConeKind::nonneg, ny * nd);  // U(j,i) at u0 + j*nd + i
        for (int row = 0; row < nd; ++row)
            for (int col = 0; col < nd; ++col) {
                ConicProblem::Terms t;
                for (int j = 0; j < ny; ++j)
                    if (pd.H(row, j) != 0.0) t.emplace_back(u0 + j * nd + col, pd.H(row, j));
                if (!t.empty()) lp.add_le(t, row == col ? 1.0 : 0.0);
            }
    }
    // anchoring: A v <= x_fixed
    for (int i = 0; i < pd.n_x(); ++i) {
        ConicProblem::Terms t;
        for (int j = 0; j < ny; ++j)
            if (pd.A(i, j) != 0.0) t.emplace_back(v0 + j, pd.A(i, j));
        lp.add_le(t, x_fixed[i]);
    }
    // per-atom recourse w <= v, w <= U d
    int w0[2] = {-1, -1};
    for (int w = 0; w < nsc; ++w) {
        w0[w] = lp.add_block(ConeKind::nonneg, ny);
        const Vec& d = *atoms[w];
        for (int j = 0; j < ny; ++j) {
            lp.add_le({{w0[w] + j, 1.0}, {v0 + j, -1.0}}, 0.0);
            ConicProblem::Terms t{{w0[w] + j, 1.0}};
            if (diag) {
                t.emplace_back(u0 + j, -d[j]);
            } else {
                for (int i = 0; i < nd; ++i)
                    if (d[i] != 0.0) t.emplace_back(u0 + j * nd + i, -d[i]);
            }
            lp.add_le(t, 0.0);
        }
    }

    auto loss_terms = [&](int w, double scale, ConicProblem::Terms& t) {
        for (int j = 0; j < ny; ++j) t.emplace_back(w0[w] + j, -scale * pd.p[j]);
    };
    switch (r.kind) {
        case RiskSpec::Kind::expectation:
            for (int w = 0; w < nsc; ++w)
                for (int j = 0; j < ny; ++j) lp.set_objective(w0[w] + j, -prob[w] * pd.p[j]);
            break;
        case RiskSpec::Kind::cvar: {
            int tvar = lp.add_block(ConeKind::free_var, 1);
            int u = lp.add_block(ConeKind::nonneg, nsc);
            lp.set_objective(tvar, 1.0);
            for (int w = 0; w < nsc; ++w) {
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
                throw std::invalid_argument("policy fit supports semideviation order 1 only");
            int dev = lp.add_block(ConeKind::nonneg, nsc);
            for (int w = 0; w < nsc; ++w)
                for (int j = 0; j < ny; ++j) lp.set_objective(w0[w] + j, -prob[w] * pd.p[j]);
            for (int w = 0; w < nsc; ++w) {
                lp.set_objective(dev + w, r.lambda * prob[w]);
                ConicProblem::Terms t;
                loss_terms(w, 1.0, t);
                for (int w2 = 0; w2 < nsc; ++w2) loss_terms(w2, -prob[w2], t);
                t.emplace_back(dev + w, -1.0);
                lp.add_le(t, 0.0);
            }
            break;
        }
        default:
            throw std::invalid_argument("unsupported risk for the policy fit: " + r.name());
    }

    SolveResult sol = solve(lp);
    if (!sol.ok()) throw std::runtime_error("policy fit failed: " + sol.message);
    const double fit_value = sol.objective;
    if (v_anchor != nullptr) {
        if (v_anchor->size() != ny)
            throw std::invalid_argument("policy fit: anchor dimension mismatch");
        // the fit can be tied across a face of threshold vectors; pinning
        // the value and minimizing the distance to the anchor picks one
        // point of that face deterministically
        ConicProblem::Terms pin;
        Vec obj = lp.objective();
        for (int i = 0; i < obj.size(); ++i)
            if (obj[i] != 0.0) pin.emplace_back(i, obj[i]);
        lp.add_le(pin, fit_value + 1e-7 * (1.0 + std::abs(fit_value)));
        lp.clear_objective();
        int t = lp.add_block(ConeKind::soc, 1 + ny);
        lp.set_objective(t, 1.0);
        for (int j = 0; j < ny; ++j)
            lp.add_eq({{t + 1 + j, 1.0}, {v0 + j, -1.0}}, -(*v_anchor)[j]);
        SolveResult ref = solve(lp);
        if (ref.ok()) sol.x = ref.x;
    }
    TLDRPolicy pol;
    pol.v = sol.x.segment(v0, ny);
    if (diag) {
        pol.U = Mat::Zero(ny, nd);
        for (int j = 0; j < ny; ++j) pol.U(j, j) = std::min(1.0, std::max(0.0, sol.x[u0 + j]));
    } else {
        pol.U = Mat(ny, nd);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nd; ++i) pol.U(j, i) = std::max(0.0, sol.x[u0 + j * nd + i]);
    }
    pol.v = pol.v.cwiseMax(0.0);
    return {pd.c.dot(x_fixed) + fit_value, pol};
}

double worst_case_expected_loss(const Vec& v, const Vec& p, const MomentInfo& m,
                                const ScaleIndex& idx) {
    const int n = static_cast<int>(v.size());
    if (p.size() != n || m.mu.size() != n || m.sigma.size() != n)
        throw std::invalid_argument("worst-case loss: dimension mismatch");
    if (n == 0) return 0.0;
    if (v.minCoeff() < -1e-12) throw std::invalid_argument("worst-case loss: negative threshold");
    if (p.minCoeff() < 0.0) throw std::invalid_argument("worst-case loss: negative price");
    const double khs = std::pow(idx.k, idx.s);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double mubar = idx.k * m.mu[i];
        const double varbar = khs * m.sigma[i] * m.sigma[i];
        const double vi = std::max(0.0, v[i]);
        const double m2 = mubar * mubar + varbar;
        if (p[i] == 0.0 || m2 == 0.0) continue;
        // the worst law puts mass on two atoms. Below the knee
        // (mu^2+var)/(2 mu) one atom sits at zero and the value is linear in
        // the threshold; above it the atoms straddle the threshold at
        // distance sqrt(var + (v-mu)^2)
        if (2.0 * mubar * vi <= m2) {
            total += -p[i] * vi * (mubar * mubar) / m2;
        } else {
            const double delta = vi - mubar;
            const double S = std::sqrt(varbar + delta * delta);
            total += p[i] * (S + delta) / 2.0 - p[i] * vi;
        }
    }
    return total;
}

double worst_case_expected_loss_socp(const Vec& v, const Vec& p, const MomentInfo& m,
                                     const ScaleIndex& idx) {
    const int n = static_cast<int>(v.size());
    if (p.size() != n || m.mu.size() != n || m.sigma.size() != n)
        throw std::invalid_argument("worst-case loss: dimension mismatch");
    if (n == 0) return 0.0;
    if (v.minCoeff() < -1e-12) throw std::invalid_argument("worst-case loss: negative threshold");
    const double khs = std::pow(idx.k, idx.s);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double mubar = idx.k * m.mu[i];
        const double varbar = khs * m.sigma[i] * m.sigma[i];
        const double vi = std::max(0.0, v[i]);
        if (p[i] == 0.0) continue;
        if (varbar == 0.0) {
            // a zero-variance moment set pins the law to a point mass
            total += -p[i] * std::min(vi, mubar);
            continue;
        }
        // each coordinate is an independent moment problem and positively
        // homogeneous in demand units, so it is solved at unit scale (its
        // data then stays O(1) in k) and the value is scaled back
        const double beta = std::max({mubar, std::sqrt(varbar), 1.0});
        ConicProblem cp;
        add_wc_coordinate(cp, p[i], mubar / beta, varbar / (beta * beta), vi / beta, -1);
        // callers compare this path against the closed form, so it runs
        // past the default accuracy
        Tolerances tight;
        tight.rel_gap = 1e-9;
        tight.feas = 1e-9;
        SolveResult sol = solve(cp, tight);
        if (!sol.ok()) throw std::runtime_error("worst-case loss solve failed: " + sol.message);
        total += beta * sol.objective;
    }
    return total;
}

TldrDroSolution solve_tldr_dro(const ProblemData& pd, const MomentInfo& m, const ScaleIndex& idx) {
    if (!pd.identity_H(1e-12))
        throw std::invalid_argument("the joint benchmark needs the identity demand structure");
    const int nx = static_cast<int>(pd.n_x());
    const int ny = static_cast<int>(pd.n_y());
    // solved in unit demand scale (budget b, variance k^{s-2} sigma^2) with
    // value and decisions scaled back by k, keeping the data O(1) in k
    const double khs2 = std::pow(idx.k, idx.s - 2.0);

    ConicProblem cp;
    int x0 = cp.add_block(ConeKind::nonneg, nx);
    int v0 = cp.add_block(ConeKind::nonneg, ny);
    for (int i = 0; i < nx; ++i) cp.set_objective(x0 + i, pd.c[i]);
    for (int r = 0; r < pd.n_b(); ++r) {
        ConicProblem::Terms t;
        for (int i = 0; i < nx; ++i)
            if (pd.G(r, i) != 0.0) t.emplace_back(x0 + i, pd.G(r, i));
        cp.add_le(t, pd.b[r]);
    }
    for (int i = 0; i < nx; ++i) {
        ConicProblem::Terms t;
        for (int j = 0; j < ny; ++j)
            if (pd.A(i, j) != 0.0) t.emplace_back(v0 + j, pd.A(i, j));
        t.emplace_back(x0 + i, -1.0);
        cp.add_le(t, 0.0);
    }
    for (int j = 0; j < ny; ++j)
        add_wc_coordinate(cp, pd.p[j], m.mu[j], khs2 * m.sigma[j] * m.sigma[j], 0.0, v0 + j);

    // the benchmark must not sit farther from its optimum than the policies
    // it is compared against, or cost ratios drift above one
    Tolerances tight;
    tight.rel_gap = 1e-9;
    tight.feas = 1e-9;
    SolveResult sol = solve(cp, tight);
    TldrDroSolution out;
    out.status = sol.status;
    if (!sol.ok()) return out;
    out.cost = idx.k * sol.objective;
    out.x = idx.k * sol.x.segment(x0, nx).cwiseMax(0.0);
    out.v = idx.k * sol.x.segment(v0, ny).cwiseMax(0.0);
    return out;
}

TLDRPolicy construct_tldr_from_recourse(const Vec& y_at, const Vec& anchor_d, const Mat& H) {
    const int ny = static_cast<int>(y_at.size());
    const int nd = static_cast<int>(H.rows());
    if (H.cols() != ny || anchor_d.size() != nd)
        throw std::invalid_argument("ratio construction: dimension mismatch");
    Vec hy = H * y_at;
    // recourse vectors come out of a solver that guarantees feasibility only
    // to about 1e-8, so small overshoot is renormalized while anything larger
    // is a structurally wrong input
    Vec cap = Vec::Ones(nd);
    for (int i = 0; i < nd; ++i) {
        if (hy[i] > anchor_d[i] + 1e-6 * (1.0 + std::abs(anchor_d[i])))
            throw std::invalid_argument("ratio construction: recourse violates the anchor demand");
        if (hy[i] > anchor_d[i] && anchor_d[i] > 0.0) cap[i] = anchor_d[i] / hy[i];
    }
    TLDRPolicy pol;
    pol.v = y_at.cwiseMax(0.0);
    pol.U = Mat::Zero(ny, nd);
    for (int j = 0; j < ny; ++j) {
        int owner = -1;
        for (int i = 0; i < nd; ++i) {
            if (H(i, j) < 0.0) throw std::invalid_argument("ratio construction: negative H entry");
            if (H(i, j) > 0.0) {
                if (owner >= 0)
                    throw std::invalid_argument("ratio construction: H column with several nonzeros");
                owner = i;
            }
        }
        if (owner < 0) throw std::invalid_argument("ratio construction: zero H column");
        if (pol.v[j] <= 0.0) continue;
        if (anchor_d[owner] <= 0.0)
            throw std::invalid_argument("ratio construction: positive recourse at zero anchor demand");
        pol.U(j, owner) = cap[owner] * pol.v[j] / anchor_d[owner];
    }
    return pol;
}

GapBounds analytic_gap_bounds(const Mat& U_mech, const Mat& U_exp, const GapBoundInputs& in,
                              const Mat& Ubar) {
    if (in.tau >= 1.0) throw std::domain_error("tau = 1 is a pole of the gap bounds");
    if (in.tau < 0.0) throw std::domain_error("tau must be nonnegative");
    const double khalf = std::pow(in.k, in.s / 2.0);
    auto weighted = [&](const Mat& U, const Vec& vec) { return in.p.dot(U * vec); };
    GapBounds out;
    out.inputs = in;
    if (in.tau <= 0.0) {
        out.loss_bound = (0.5 + in.alpha) * khalf * weighted(U_exp, in.sigma);
        out.value_bound = 0.0;
        return out;
    }
    const double hi = std::sqrt((1.0 - in.tau) / in.tau);
    const double lo = std::sqrt(in.tau / (1.0 - in.tau));
    out.loss_bound =
        (0.5 + in.alpha) * khalf * weighted(U_mech, in.sigma) + hi * khalf * weighted(U_mech, in.varsigma);
    out.value_bound =
        (0.5 + in.alpha) * khalf * weighted(U_exp, in.sigma) + (hi + lo) * khalf * weighted(Ubar, in.varsigma);
    return out;
}

CostEval evaluate_cost(const ProblemData& pd, const Vec& x, const TLDRPolicy& pol,
                       const MomentInfo& m, const ScaleIndex& idx, const RiskSpec& r,
                       const MechanismParams* mech) {
    CostEval out;
    if (r.kind == RiskSpec::Kind::expectation && pd.identity_H(1e-12)) {
        // with H = I feasibility forces U diagonal with entries in [0,1], so
        // the identity-slope policy min{v, d} dominates the fitted one at the
        // same x and thresholds; its worst case is the per-coordinate SOCP
        out.value = pd.c.dot(x) + worst_case_expected_loss(pol.v, pd.p, m, idx);
        out.exact = true;
        return out;
    }
    if (mech == nullptr)
        throw std::invalid_argument("cost bound needs the mechanism the policy was fitted against");
    TwoPointDistribution d2 = build_two_point(m.mu, *mech, idx);
    out.vbar = pd.c.dot(x) + evaluate_risk(r, two_point_losses(pd.p, pol, d2));
    const double alpha = standard_coefficient(r);
    const double khalf = std::pow(idx.k, idx.s / 2.0);
    out.loss_bound = (0.5 + alpha) * khalf * pd.p.dot(pol.U * m.sigma);
    if (!d2.is_dirac(1e-12))
        out.loss_bound +=
            std::sqrt((1.0 - d2.tau) / d2.tau) * khalf * pd.p.dot(pol.U * mech->varsigma);
    out.value = out.vbar + out.loss_bound;
    out.exact = false;
    return out;
}

}  // namespace droplan
