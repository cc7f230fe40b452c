#include "droplan/mechanism.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace droplan {

double tau_max(const Vec& mu, const Vec& varsigma) {
    if (mu.size() != varsigma.size()) throw std::invalid_argument("mu/varsigma length mismatch");
    double gamma = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
        if (varsigma[i] < 0) throw std::domain_error("negative spread component");
        if (varsigma[i] == 0.0) continue;  // no spread, no bound from this coordinate
        if (mu[i] <= 0.0)
            throw std::domain_error("spread on a zero-mean coordinate forces tau_max = 0");
        gamma = std::min(gamma, mu[i] / varsigma[i]);
    }
    if (std::isinf(gamma)) return 1.0;  // all-zero spread: only the Dirac arises
    return gamma * gamma / (1.0 + gamma * gamma);
}

MechanismParams mechanism_from_ratios(double kappa, double eta, const Vec& mu, const Vec& sigma) {
    if (!(kappa >= 0.0 && kappa <= 1.0)) throw std::domain_error("kappa outside [0,1]");
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::domain_error("eta outside [0,1]");
    MechanismParams p;
    p.varsigma = kappa * sigma;
    p.tau = (kappa == 0.0) ? 0.0 : eta * tau_max(mu, p.varsigma);
    return p;
}

TwoPointDistribution build_two_point(const Vec& mu, const MechanismParams& params,
                                     const ScaleIndex& idx) {
    if (mu.size() != params.varsigma.size())
        throw std::invalid_argument("mu/varsigma length mismatch");
    if (!(idx.k >= 1.0) || !(idx.s >= 1.0 && idx.s < 2.0))
        throw std::domain_error("invalid scale index");
    const double k = idx.k;

    TwoPointDistribution out;
    const bool zero_spread = params.varsigma.size() == 0 || params.varsigma.maxCoeff() == 0.0;
    if (params.tau <= 0.0 || zero_spread) {
        out.d_l = k * mu;
        out.d_h = out.d_l;
        out.tau = 0.0;
        return out;
    }
    const double tmax = tau_max(mu, params.varsigma);
    if (params.tau > tmax + 1e-12)
        throw std::range_error("tau exceeds tau_max for this spread");
    const double tau = params.tau;
    const double k_half_s = std::pow(k, idx.s / 2.0);
    const double lo = std::sqrt(tau / (1.0 - tau));
    const double hi = std::sqrt((1.0 - tau) / tau);
    out.d_l = k * mu - lo * k_half_s * params.varsigma;
    out.d_h = k * mu + hi * k_half_s * params.varsigma;
    out.tau = tau;
    // tau <= tau_max makes k*mu_i >= sqrt(tau/(1-tau)) * varsigma_i, and
    // k >= k^{s/2} fails only for s > 2, so a negative atom means a bug.
    if (out.d_l.minCoeff() < -1e-9 * std::max(1.0, k * mu.maxCoeff()))
        throw std::logic_error("two-point construction produced a negative low atom");
    out.d_l = out.d_l.cwiseMax(0.0);  // clear roundoff dust at the boundary
    return out;
}

Vec wasserstein_sigma_hat(const WassersteinInfo& w) {
    const double val = std::sqrt(2.0 * w.sigma_hat.trace() + 2.0 * w.epsilon * w.epsilon);
    return Vec::Constant(w.mu_hat.size(), val);
}

bool outer_membership(const Vec& mean, const Vec& marginal_vars, const WassersteinInfo& w,
                      const ScaleIndex& idx) {
    const double k = idx.k;
    const double k_half_s = std::pow(k, idx.s / 2.0);
    if ((mean - k * w.mu_hat).norm() > k_half_s * w.epsilon + 1e-12) return false;
    const Vec bound = std::pow(k, idx.s) * wasserstein_sigma_hat(w).array().square().matrix();
    for (Eigen::Index i = 0; i < marginal_vars.size(); ++i)
        if (marginal_vars[i] > bound[i] + 1e-12) return false;
    return true;
}

}  // namespace droplan
