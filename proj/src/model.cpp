#include "droplan/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace droplan {

using nlohmann::json;

bool ProblemData::identity_H(double tol) const {
    if (H.rows() != H.cols()) return false;
    return (H - Mat::Identity(H.rows(), H.cols())).lpNorm<Eigen::Infinity>() <= tol;
}

namespace {

bool all_nonneg(const Mat& m) { return m.size() == 0 || m.minCoeff() >= 0.0; }
bool all_nonneg(const Vec& v) { return v.size() == 0 || v.minCoeff() >= 0.0; }

void require_shape(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("problem data shape mismatch: " + what);
}

}  // namespace

ValidationReport validate_problem(const ProblemData& pd) {
    require_shape(pd.G.cols() == pd.n_x(), "G columns vs c length");
    require_shape(pd.G.rows() == pd.n_b(), "G rows vs b length");
    require_shape(pd.A.rows() == pd.n_x(), "A rows vs c length");
    require_shape(pd.A.cols() == pd.n_y(), "A columns vs p length");
    require_shape(pd.H.cols() == pd.n_y(), "H columns vs p length");

    ValidationReport rep;
    auto push = [&rep](const std::string& name, bool pass, const std::string& detail = "") {
        rep.checks.push_back({name, pass, detail});
    };

    push("nonnegative data",
         all_nonneg(pd.c) && all_nonneg(pd.b) && all_nonneg(pd.p) && all_nonneg(pd.A) &&
             all_nonneg(pd.H) && all_nonneg(pd.G));
    push("A nonzero", pd.A.cwiseAbs().sum() > 0.0);
    push("H nonzero", pd.H.cwiseAbs().sum() > 0.0);

    bool single = true;
    std::ostringstream bad;
    for (Eigen::Index j = 0; j < pd.H.cols(); ++j) {
        int nz = 0;
        for (Eigen::Index i = 0; i < pd.H.rows(); ++i)
            if (pd.H(i, j) != 0.0) ++nz;
        if (nz != 1) {
            single = false;
            bad << " col " << j << " has " << nz << " nonzeros";
        }
    }
    // More than one nonzero per column only disables the ratio-based value
    // bound, so it is a warning-grade check, not a structural error.
    push("one nonzero per H column", single, bad.str());
    rep.single_nonzero_per_H_column = single;

    // x = 0 satisfies Gx <= b whenever b >= 0, so the budget set is nonempty.
    push("budget set nonempty", all_nonneg(pd.b));

    rep.all_pass = true;
    for (const auto& c : rep.checks) rep.all_pass = rep.all_pass && c.pass;
    return rep;
}

std::pair<AmbiguityInfo, Vec> apply_scaling(const AmbiguityInfo& info, const Vec& b,
                                            const ScaleIndex& idx) {
    if (!(idx.s >= 1.0 && idx.s < 2.0)) throw std::domain_error("scale exponent s outside [1,2)");
    if (!(idx.k >= 1.0)) throw std::domain_error("scale factor k must be >= 1");
    const double k = idx.k;
    const double k_half_s = std::pow(k, idx.s / 2.0);
    Vec b_scaled = k * b;
    if (std::holds_alternative<MomentInfo>(info)) {
        const auto& m = std::get<MomentInfo>(info);
        MomentInfo out{k * m.mu, k_half_s * m.sigma};
        return {AmbiguityInfo{out}, b_scaled};
    }
    const auto& w = std::get<WassersteinInfo>(info);
    // The covariance bound used downstream is k^s Sigma_hat; the radius
    // grows as k^{s/2} so the ball does not escalate relative to the mean.
    WassersteinInfo out{k * w.mu_hat, std::pow(k, idx.s) * w.sigma_hat, k_half_s * w.epsilon};
    return {AmbiguityInfo{out}, b_scaled};
}

namespace {

Vec vec_from_json(const json& j) {
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

Mat mat_from_json(const json& j) {
    if (j.empty()) return Mat(0, 0);
    Mat m(j.size(), j[0].size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (j[i].size() != j[0].size()) throw std::invalid_argument("ragged matrix in instance");
        for (std::size_t c = 0; c < j[i].size(); ++c)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
    return m;
}

json vec_to_json(const Vec& v) {
    json j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

json mat_to_json(const Mat& m) {
    json j = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
        j.push_back(row);
    }
    return j;
}

}  // namespace

Instance parse_instance_json(const std::string& text) {
    json j = json::parse(text);
    Instance inst;
    inst.pd.c = vec_from_json(j.at("c"));
    inst.pd.G = mat_from_json(j.at("G"));
    inst.pd.b = vec_from_json(j.at("b"));
    inst.pd.p = vec_from_json(j.at("p"));
    inst.pd.A = mat_from_json(j.at("A"));
    inst.pd.H = mat_from_json(j.at("H"));
    const json& amb = j.at("ambiguity");
    const std::string kind = amb.at("kind").get<std::string>();
    if (kind == "moment") {
        inst.ambiguity = MomentInfo{vec_from_json(amb.at("mu")), vec_from_json(amb.at("sigma"))};
    } else if (kind == "wasserstein") {
        WassersteinInfo w;
        w.mu_hat = vec_from_json(amb.at("mu_hat"));
        w.sigma_hat = mat_from_json(amb.at("sigma_hat_matrix"));
        w.epsilon = amb.at("epsilon").get<double>();
        if ((w.sigma_hat - w.sigma_hat.transpose()).lpNorm<Eigen::Infinity>() > 1e-10)
            throw std::invalid_argument("sigma_hat_matrix not symmetric");
        if (w.epsilon < 0) throw std::invalid_argument("negative Wasserstein radius");
        inst.ambiguity = w;
    } else {
        throw std::invalid_argument("unknown ambiguity kind: " + kind);
    }
    if (j.contains("meta")) {
        const json& jm = j.at("meta");
        inst.meta = jm.is_string() ? jm.get<std::string>() : jm.dump();
    }
    return inst;
}

Instance load_instance_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open instance file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_instance_json(ss.str());
}

std::string instance_to_json(const Instance& inst) {
    json j;
    j["c"] = vec_to_json(inst.pd.c);
    j["G"] = mat_to_json(inst.pd.G);
    j["b"] = vec_to_json(inst.pd.b);
    j["p"] = vec_to_json(inst.pd.p);
    j["A"] = mat_to_json(inst.pd.A);
    j["H"] = mat_to_json(inst.pd.H);
    if (std::holds_alternative<MomentInfo>(inst.ambiguity)) {
        const auto& m = std::get<MomentInfo>(inst.ambiguity);
        j["ambiguity"] = {{"kind", "moment"}, {"mu", vec_to_json(m.mu)}, {"sigma", vec_to_json(m.sigma)}};
    } else {
        const auto& w = std::get<WassersteinInfo>(inst.ambiguity);
        j["ambiguity"] = {{"kind", "wasserstein"},
                          {"mu_hat", vec_to_json(w.mu_hat)},
                          {"sigma_hat_matrix", mat_to_json(w.sigma_hat)},
                          {"epsilon", w.epsilon}};
    }
    j["meta"] = inst.meta;
    return j.dump(2);
}

}  // namespace droplan
