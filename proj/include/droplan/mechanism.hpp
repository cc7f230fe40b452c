// mechanism.hpp : two-point forecast distributions and their diagnostics.
#pragma once

#include "droplan/model.hpp"

namespace droplan {

/// Forecast law with atoms d_l (prob 1-tau) and d_h (prob tau). tau = 0 or
/// d_l = d_h encodes the Dirac / expectation mechanism.
struct TwoPointDistribution {
    Vec d_l;
    Vec d_h;
    double tau = 0.0;

    bool is_dirac(double tol = 0.0) const {
        return tau <= tol || (d_h - d_l).lpNorm<Eigen::Infinity>() <= tol;
    }
};

/// Raw mechanism parameters: spread vector varsigma <= sigma componentwise
/// and tau in [0, tau_max(mu, varsigma)].
struct MechanismParams {
    Vec varsigma;
    double tau = 0.0;
};

/// tau_max = gamma^2/(1+gamma^2) with gamma = min over {i : varsigma_i > 0}
/// of mu_i/varsigma_i. Coordinates with zero spread impose no bound; all-zero
/// spread returns 1 (only the Dirac law arises). Throws std::domain_error
/// when some varsigma_i > 0 has mu_i = 0 (gamma = 0 forces tau_max = 0).
double tau_max(const Vec& mu, const Vec& varsigma);

/// Ratio parameterization varsigma = kappa*sigma, tau = eta*tau_max; this is
/// the form the cross-validation grid tunes.
MechanismParams mechanism_from_ratios(double kappa, double eta, const Vec& mu, const Vec& sigma);

/// Atoms d_l = k*mu - sqrt(tau/(1-tau)) k^{s/2} varsigma,
///       d_h = k*mu + sqrt((1-tau)/tau) k^{s/2} varsigma, P(d_h) = tau.
/// The law has mean exactly k*mu and marginal variance exactly k^s varsigma^2.
/// tau = 0 or zero spread routes to the Dirac at k*mu. Throws
/// std::range_error when tau exceeds tau_max. d_l >= 0 is asserted: it holds
/// whenever tau <= tau_max and k >= 1.
TwoPointDistribution build_two_point(const Vec& mu, const MechanismParams& params,
                                     const ScaleIndex& idx);

/// Constant spread bound sigma_hat_i = sqrt(2 trace(Sigma_hat) + 2 eps^2)
/// used to run the moment machinery on Wasserstein ambiguity.
Vec wasserstein_sigma_hat(const WassersteinInfo& w);

/// Membership in the outer moment set R(k mu_hat, k^{s/2} sigma_hat,
/// k^{s/2} eps): mean within the scaled epsilon-ball of k*mu_hat and
/// marginal variances below k^s sigma_hat^2.
bool outer_membership(const Vec& mean, const Vec& marginal_vars, const WassersteinInfo& w,
                      const ScaleIndex& idx);

}  // namespace droplan
