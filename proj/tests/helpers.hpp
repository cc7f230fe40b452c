// helpers.hpp : shared fixtures for the test binaries.
#pragma once

#include <cmath>
#include <cstdint>

#include "droplan/model.hpp"
#include "droplan/rng.hpp"

namespace testfix {

using droplan::Mat;
using droplan::MomentInfo;
using droplan::ProblemData;
using droplan::Vec;

/// Scalar newsvendor: buy at 1, sell at 3, demand mean 10, variance 10,
/// budget slack enough never to bind.
inline ProblemData newsvendor() {
    ProblemData pd;
    pd.c = Vec::Constant(1, 1.0);
    pd.G = Mat::Constant(1, 1, 1.0);
    pd.b = Vec::Constant(1, 1e6);
    pd.p = Vec::Constant(1, 3.0);
    pd.A = Mat::Identity(1, 1);
    pd.H = Mat::Identity(1, 1);
    return pd;
}

inline MomentInfo newsvendor_moments() {
    MomentInfo m;
    m.mu = Vec::Constant(1, 10.0);
    m.sigma = Vec::Constant(1, std::sqrt(10.0));
    return m;
}

/// N independent products under one budget row: A = H = I, G = c', unit
/// costs in [1,2), prices at double the cost, budget half the cost of the
/// mean demand bundle.
inline ProblemData identity_instance(int N, std::uint64_t seed, MomentInfo* moments) {
    droplan::CounterRng rng(seed);
    ProblemData pd;
    pd.c = Vec::NullaryExpr(N, [&](Eigen::Index) { return 1.0 + rng.next_uniform(); });
    pd.p = 2.0 * pd.c;
    pd.A = Mat::Identity(N, N);
    pd.H = Mat::Identity(N, N);
    pd.G = pd.c.transpose();
    MomentInfo m;
    m.mu = Vec::NullaryExpr(N, [&](Eigen::Index) { return 5.0 + 10.0 * rng.next_uniform(); });
    m.sigma = 0.4 * m.mu;
    pd.b = Vec::Constant(1, 0.5 * pd.c.dot(m.mu));
    if (moments != nullptr) *moments = m;
    return pd;
}

/// Relative closeness with an absolute floor of 1.
inline bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * (1.0 + std::max(std::abs(a), std::abs(b)));
}

}  // namespace testfix
