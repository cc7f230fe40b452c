#include "droplan/risk.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace droplan {

RiskSpec RiskSpec::cvar(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error("CVaR beta outside (0,1)");
    RiskSpec r;
    r.kind = Kind::cvar;
    r.beta = beta;
    return r;
}

RiskSpec RiskSpec::var(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw std::domain_error("VaR beta outside (0,1)");
    RiskSpec r;
    r.kind = Kind::var;
    r.beta = beta;
    return r;
}

RiskSpec RiskSpec::mean_semideviation(double lambda, double q) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::domain_error("semideviation lambda outside [0,1]");
    if (!(q >= 1.0 && q <= 2.0)) throw std::domain_error("semideviation exponent outside [1,2]");
    RiskSpec r;
    r.kind = Kind::mean_semideviation;
    r.lambda = lambda;
    r.q = q;
    return r;
}

std::string RiskSpec::name() const {
    switch (kind) {
        case Kind::expectation: return "expectation";
        case Kind::cvar: return "cvar(" + std::to_string(beta) + ")";
        case Kind::var: return "var(" + std::to_string(beta) + ")";
        case Kind::mean_semideviation:
            return "mean_semideviation(" + std::to_string(lambda) + "," + std::to_string(q) + ")";
    }
    return "?";
}

void DiscreteLossDistribution::validate() const {
    if (loss.empty()) throw std::domain_error("empty loss distribution");
    if (loss.size() != prob.size()) throw std::domain_error("loss/prob length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
        if (!(prob[i] > 0.0)) throw std::domain_error("probabilities must be positive");
        if (!std::isfinite(loss[i])) throw std::domain_error("non-finite loss value");
        total += prob[i];
    }
    if (std::abs(total - 1.0) > 1e-10) throw std::domain_error("probabilities do not sum to 1");
}

double standard_coefficient(const RiskSpec& r) {
    switch (r.kind) {
        case RiskSpec::Kind::expectation: return 0.0;
        case RiskSpec::Kind::cvar:
        case RiskSpec::Kind::var: return std::sqrt((1.0 - r.beta) / r.beta);
        case RiskSpec::Kind::mean_semideviation: return r.lambda;
    }
    return 0.0;
}

namespace {

double expectation_of(const DiscreteLossDistribution& d) {
    double m = 0.0;
    for (std::size_t i = 0; i < d.loss.size(); ++i) m += d.prob[i] * d.loss[i];
    return m;
}

// Average of the top beta probability mass, splitting the boundary atom.
// Equals inf_t { t + E[(loss-t)_+] / beta } with the infimum at an atom.
double cvar_of(double beta, const DiscreteLossDistribution& d) {
    std::vector<std::size_t> order(d.loss.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&d](std::size_t a, std::size_t b) { return d.loss[a] > d.loss[b]; });
    double remaining = beta;
    double acc = 0.0;
    for (std::size_t idx : order) {
        double take = std::min(remaining, d.prob[idx]);
        acc += take * d.loss[idx];
        remaining -= take;
        if (remaining <= 0.0) break;
    }
    // remaining > 0 can only be roundoff in the probability sum
    return acc / beta;
}

double var_of(double beta, const DiscreteLossDistribution& d) {
    // smallest t with P(loss <= t) >= 1 - beta
    std::vector<std::size_t> order(d.loss.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&d](std::size_t a, std::size_t b) { return d.loss[a] < d.loss[b]; });
    double cum = 0.0;
    const double target = 1.0 - beta;
    for (std::size_t idx : order) {
        cum += d.prob[idx];
        if (cum >= target - 1e-15) return d.loss[idx];
    }
    return d.loss[order.back()];
}

double semideviation_of(double lambda, double q, const DiscreteLossDistribution& d) {
    const double m = expectation_of(d);
    double acc = 0.0;
    for (std::size_t i = 0; i < d.loss.size(); ++i)
        acc += d.prob[i] * std::pow(std::max(d.loss[i] - m, 0.0), q);
    return m + lambda * std::pow(acc, 1.0 / q);
}

}  // namespace

double evaluate_risk(const RiskSpec& r, const DiscreteLossDistribution& d) {
    d.validate();
    switch (r.kind) {
        case RiskSpec::Kind::expectation: return expectation_of(d);
        case RiskSpec::Kind::cvar: return cvar_of(r.beta, d);
        case RiskSpec::Kind::var: return var_of(r.beta, d);
        case RiskSpec::Kind::mean_semideviation: return semideviation_of(r.lambda, r.q, d);
    }
    throw std::logic_error("unreachable risk kind");
}

double evaluate_risk(const RiskSpec& r, const std::vector<double>& losses) {
    DiscreteLossDistribution d;
    d.loss = losses;
    d.prob.assign(losses.size(), losses.empty() ? 0.0 : 1.0 / static_cast<double>(losses.size()));
    return evaluate_risk(r, d);
}

}  // namespace droplan
