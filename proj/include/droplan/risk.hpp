// risk.hpp : risk-measure specifications and exact evaluation on finite laws.
#pragma once

#include <string>
#include <vector>

namespace droplan {

/// One of four law-invariant risk measures. beta is the tail mass for
/// CVaR/VaR; lambda and q parameterize mean-semideviation (q named so it
/// cannot be confused with the CVaR tail mass).
struct RiskSpec {
    enum class Kind { expectation, cvar, var, mean_semideviation };
    Kind kind = Kind::expectation;
    double beta = 0.0;    // in (0,1) for cvar/var
    double lambda = 0.0;  // in [0,1] for mean_semideviation
    double q = 1.0;       // in [1,2] for mean_semideviation

    static RiskSpec expectation() { return RiskSpec{}; }
    static RiskSpec cvar(double beta);
    static RiskSpec var(double beta);
    static RiskSpec mean_semideviation(double lambda, double q = 1.0);

    std::string name() const;
};

/// Finite loss law; probabilities positive and summing to 1 (1e-10 slack).
struct DiscreteLossDistribution {
    std::vector<double> loss;
    std::vector<double> prob;
    void validate() const;  // throws std::domain_error on violation
};

/// Worst risk value over zero-mean unit-variance losses: 0 for expectation,
/// sqrt((1-beta)/beta) for CVaR and VaR, lambda for mean-semideviation.
double standard_coefficient(const RiskSpec& r);

/// Exact evaluation. CVaR averages the top beta probability mass of the
/// sorted losses, splitting the boundary atom, which equals
/// inf_t { t + E[(loss-t)_+]/beta }; for n equal-weight atoms it reduces to
/// the mean of the ceil(beta*n) largest values only when beta*n is integral
/// or the split falls inside the top atom group, so the split rule is the
/// one implemented. VaR(beta) is the smallest t with P(loss <= t) >= 1-beta.
double evaluate_risk(const RiskSpec& r, const DiscreteLossDistribution& d);

/// Equal-weight convenience wrapper.
double evaluate_risk(const RiskSpec& r, const std::vector<double>& losses);

}  // namespace droplan
