#include "droplan/datadriven.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "droplan/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace droplan {

Dataset generate_truncated_mvn(const Vec& mu, const Vec& sigma, double rho, int n,
                               std::uint64_t seed, bool reject_instead_of_clamp) {
    const int d = static_cast<int>(mu.size());
    if (sigma.size() != d) throw std::invalid_argument("mvn: mu/sigma size mismatch");
    if (n <= 0) throw std::invalid_argument("mvn: sample count must be positive");
    // equicorrelated covariance D ((1-rho) I + rho 11') D
    Mat cov(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) cov(i, j) = (i == j ? 1.0 : rho) * sigma[i] * sigma[j];
    Eigen::SelfAdjointEigenSolver<Mat> es(cov);
    Vec ev = es.eigenvalues().cwiseMax(0.0);  // clip roundoff negatives
    Mat root = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();

    Dataset out;
    out.seed = seed;
    out.samples.resize(n, d);
    CounterRng rng(seed);
    Vec z(d);
    for (int row = 0; row < n; ++row) {
        int attempts = 0;
        for (;;) {
            for (int j = 0; j < d; ++j) z[j] = rng.next_normal();
            Vec x = mu + root * z;
            if (!reject_instead_of_clamp) {
                out.samples.row(row) = x.cwiseMax(0.0).transpose();
                break;
            }
            if (x.minCoeff() >= 0.0) {
                out.samples.row(row) = x.transpose();
                break;
            }
            if (++attempts > 100000)
                throw std::runtime_error("mvn rejection sampling: acceptance region too small");
        }
    }
    return out;
}

MomentInfo empirical_moments(const Dataset& d) {
    const Eigen::Index n = d.samples.rows();
    if (n == 0) throw std::invalid_argument("empirical moments of an empty dataset");
    MomentInfo m;
    m.mu = d.samples.colwise().mean().transpose();
    Mat centered = d.samples.rowwise() - m.mu.transpose();
    m.sigma = (centered.array().square().colwise().sum() / static_cast<double>(n))
                  .sqrt()
                  .matrix()
                  .transpose();
    return m;
}

SaaSolution solve_saa(const ProblemData& pd, const Dataset& d, const RiskSpec& r) {
    const int nx = static_cast<int>(pd.n_x());
    const int ny = static_cast<int>(pd.n_y());
    const int nd = static_cast<int>(pd.n_d());
    const int n = static_cast<int>(d.size());
    if (n == 0) throw std::invalid_argument("SAA over an empty dataset");
    const double w = 1.0 / static_cast<double>(n);

    ConicProblem lp;
    int x0 = lp.add_block(ConeKind::nonneg, nx);
    for (int i = 0; i < nx; ++i) lp.set_objective(x0 + i, pd.c[i]);
    for (int row = 0; row < pd.n_b(); ++row) {
        ConicProblem::Terms t;
        for (int i = 0; i < nx; ++i)
            if (pd.G(row, i) != 0.0) t.emplace_back(x0 + i, pd.G(row, i));
        lp.add_le(t, pd.b[row]);
    }
    int y0 = lp.add_block(ConeKind::nonneg, n * ny);
    for (int wi = 0; wi < n; ++wi) {
        int yw = y0 + wi * ny;
        for (int i = 0; i < nx; ++i) {
            ConicProblem::Terms t;
            for (int j = 0; j < ny; ++j)
                if (pd.A(i, j) != 0.0) t.emplace_back(yw + j, pd.A(i, j));
            t.emplace_back(x0 + i, -1.0);
            lp.add_le(t, 0.0);
        }
        for (int i = 0; i < nd; ++i) {
            ConicProblem::Terms t;
            for (int j = 0; j < ny; ++j)
                if (pd.H(i, j) != 0.0) t.emplace_back(yw + j, pd.H(i, j));
            lp.add_le(t, d.samples(wi, i));
        }
    }
    switch (r.kind) {
        case RiskSpec::Kind::expectation:
            for (int wi = 0; wi < n; ++wi)
                for (int j = 0; j < ny; ++j) lp.set_objective(y0 + wi * ny + j, -w * pd.p[j]);
            break;
        case RiskSpec::Kind::cvar: {
            int tvar = lp.add_block(ConeKind::free_var, 1);
            int u0 = lp.add_block(ConeKind::nonneg, n);
            lp.set_objective(tvar, 1.0);
            for (int wi = 0; wi < n; ++wi) {
                lp.set_objective(u0 + wi, w / r.beta);
                ConicProblem::Terms t;
                for (int j = 0; j < ny; ++j) t.emplace_back(y0 + wi * ny + j, -pd.p[j]);
                t.emplace_back(tvar, -1.0);
                t.emplace_back(u0 + wi, -1.0);
                lp.add_le(t, 0.0);
            }
            break;
        }
        default:
            throw std::invalid_argument("SAA supports expectation and CVaR only: " + r.name());
    }

    SolveResult sol = solve(lp);
    SaaSolution out;
    out.status = sol.status;
    if (!sol.ok()) return out;
    out.x = sol.x.segment(x0, nx).cwiseMax(0.0);
    out.value = sol.objective;
    return out;
}

namespace {

double recourse_loss(const ProblemData& pd, const Vec& x, const Vec& demand) {
    const int nx = static_cast<int>(pd.n_x());
    const int ny = static_cast<int>(pd.n_y());
    const int nd = static_cast<int>(pd.n_d());
    ConicProblem lp;
    int y0 = lp.add_block(ConeKind::nonneg, ny);
    for (int j = 0; j < ny; ++j) lp.set_objective(y0 + j, -pd.p[j]);
    for (int i = 0; i < nx; ++i) {
        ConicProblem::Terms t;
        for (int j = 0; j < ny; ++j)
            if (pd.A(i, j) != 0.0) t.emplace_back(y0 + j, pd.A(i, j));
        lp.add_le(t, x[i]);
    }
    for (int i = 0; i < nd; ++i) {
        ConicProblem::Terms t;
        for (int j = 0; j < ny; ++j)
            if (pd.H(i, j) != 0.0) t.emplace_back(y0 + j, pd.H(i, j));
        lp.add_le(t, demand[i]);
    }
    SolveResult sol = solve(lp);
    if (!sol.ok()) throw std::runtime_error("recourse LP failed: " + sol.message);
    return sol.objective;
}

}  // namespace

std::vector<double> batch_recourse_losses(const ProblemData& pd, const Vec& x, const Dataset& d,
                                          int jobs) {
    const int n = static_cast<int>(d.size());
    std::vector<double> losses(static_cast<std::size_t>(n));
#ifdef _OPENMP
    if (jobs > 1) {
        // per-sample LPs are independent; indexed writes keep the output
        // identical to the serial path. Exceptions cannot cross the parallel
        // region, so failures are collected and rethrown after it.
        bool failed = false;
#pragma omp parallel for num_threads(jobs) schedule(dynamic)
        for (int i = 0; i < n; ++i) {
            try {
                losses[static_cast<std::size_t>(i)] = recourse_loss(pd, x, d.row(i));
            } catch (const std::exception&) {
#pragma omp atomic write
                failed = true;
            }
        }
        if (failed) throw std::runtime_error("recourse LP failed inside the parallel batch");
        return losses;
    }
#endif
    for (int i = 0; i < n; ++i) losses[static_cast<std::size_t>(i)] = recourse_loss(pd, x, d.row(i));
    return losses;
}

double evaluate_J(const ProblemData& pd, const Vec& x, const Dataset& d, const RiskSpec& r,
                  int jobs) {
    return pd.c.dot(x) + evaluate_risk(r, batch_recourse_losses(pd, x, d, jobs));
}

CVResult cross_validate(const ProblemData& pd, const Dataset& d_tr, const RiskSpec& r, int folds,
                        std::uint64_t seed, double grid_step) {
    const int n = static_cast<int>(d_tr.size());
    if (folds < 2 || folds > n) throw std::invalid_argument("cross-validation fold count out of range");
    if (grid_step <= 0.0 || grid_step > 1.0) throw std::invalid_argument("grid step out of range");

    CVResult res;
    for (double g = 0.0; g <= 1.0 + 1e-12; g += grid_step) {
        double v = std::min(1.0, g);
        res.kappa_grid.push_back(v);
        res.eta_grid.push_back(v);
    }
    const int nk = static_cast<int>(res.kappa_grid.size());

    // deterministic balanced fold assignment by seeded shuffle
    CounterRng rng(hash_combine(seed, hash_str("cv-folds")));
    std::vector<std::size_t> perm = rng.permutation(static_cast<std::size_t>(n));
    res.fold_of_sample.assign(n, 0);
    for (int i = 0; i < n; ++i) res.fold_of_sample[perm[static_cast<std::size_t>(i)]] = i % folds;

    res.avg_validation_cost = Mat::Zero(nk, nk);
    const ScaleIndex unit{1.0, 1.0};
    for (int f = 0; f < folds; ++f) {
        // split
        std::vector<int> tr_rows, va_rows;
        for (int i = 0; i < n; ++i)
            (res.fold_of_sample[i] == f ? va_rows : tr_rows).push_back(i);
        if (tr_rows.empty() || va_rows.empty())
            throw std::invalid_argument("cross-validation produced an empty fold");
        Dataset dt;
        dt.samples.resize(static_cast<Eigen::Index>(tr_rows.size()), d_tr.samples.cols());
        for (std::size_t i = 0; i < tr_rows.size(); ++i) dt.samples.row(static_cast<Eigen::Index>(i)) = d_tr.samples.row(tr_rows[i]);
        MomentInfo mhat = empirical_moments(dt);

        for (int ki = 0; ki < nk; ++ki) {
            for (int ei = 0; ei < nk; ++ei) {
                MechanismParams mech =
                    mechanism_from_ratios(res.kappa_grid[ki], res.eta_grid[ei], mhat.mu, mhat.sigma);
                TwoPointDistribution d2 = build_two_point(mhat.mu, mech, unit);
                LowerLevelSolution ll = solve_lower_level(pd, d2, r, unit);
                if (ll.status != SolveStatus::optimal) {
                    res.avg_validation_cost(ki, ei) = std::numeric_limits<double>::infinity();
                    continue;
                }
                const Vec& plan = ll.has_high ? ll.y_h : ll.y_l;
                auto [vbar, pol] = fit_tldr(pd, ll.x, d2, r, unit, &plan);
                (void)vbar;
                std::vector<double> losses;
                losses.reserve(va_rows.size());
                for (int row : va_rows) losses.push_back(-pd.p.dot(pol.apply(d_tr.row(row))));
                res.avg_validation_cost(ki, ei) +=
                    (pd.c.dot(ll.x) + evaluate_risk(r, losses)) / static_cast<double>(folds);
            }
        }
    }

    // smallest average; ties break to smallest kappa, then eta
    double best = std::numeric_limits<double>::infinity();
    for (int ki = 0; ki < nk; ++ki)
        for (int ei = 0; ei < nk; ++ei)
            if (res.avg_validation_cost(ki, ei) < best) {
                best = res.avg_validation_cost(ki, ei);
                res.kappa_star = res.kappa_grid[ki];
                res.eta_star = res.eta_grid[ei];
            }
    if (!std::isfinite(best)) throw std::runtime_error("cross-validation failed on every grid cell");
    return res;
}

std::optional<double> robustness_index(double J_mech, double J_saa, double J_star) {
    if (std::abs(J_star) < 1e-9) return std::nullopt;
    return (J_mech - J_saa) / J_star;
}

std::optional<double> sign_test(const std::vector<double>& diffs, SignDirection dir) {
    int n = 0, k = 0;
    for (double v : diffs) {
        if (v == 0.0) continue;  // exact ties carry no sign information
        ++n;
        if (v < 0.0) ++k;
    }
    if (n == 0) return std::nullopt;

    // plus: P(Bin(n,1/2) >= k); minus: P(Bin(n,1/2) <= k)
    if (n <= 64) {
        unsigned __int128 sum = 0;
        for (int j = 0; j <= n; ++j) {
            bool in_tail = dir == SignDirection::plus ? (j >= k) : (j <= k);
            if (!in_tail) continue;
            // C(n, j) via running product in 128-bit
            unsigned __int128 c = 1;
            for (int t = 1; t <= j; ++t) c = c * static_cast<unsigned>(n - j + t) / static_cast<unsigned>(t);
            sum += c;
        }
        return static_cast<double>(static_cast<long double>(sum) / std::pow(2.0L, n));
    }
    // log-domain accumulation for large n
    auto log_choose = [&](int j) {
        return std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0);
    };
    double log_p = -std::numeric_limits<double>::infinity();
    const double log_half_n = -n * std::log(2.0);
    for (int j = 0; j <= n; ++j) {
        bool in_tail = dir == SignDirection::plus ? (j >= k) : (j <= k);
        if (!in_tail) continue;
        double term = log_choose(j) + log_half_n;
        log_p = std::max(log_p, term) + std::log1p(std::exp(-std::abs(log_p - term)));
        if (!std::isfinite(log_p)) log_p = term;
    }
    return std::min(1.0, std::exp(log_p));
}

}  // namespace droplan
