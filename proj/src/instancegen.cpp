#include "droplan/instancegen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "droplan/rng.hpp"

namespace droplan {

std::string InstanceDescriptor::id() const {
    std::ostringstream os;
    os << structure_id << "-c" << cost_variant << "-g" << markup_variant << "-m" << moment_variant
       << "-b" << budget_multiplier;
    return os.str();
}

Mat build_parametric_A(int N, double nu, const Vec* vartheta) {
    if (N < 2) throw std::invalid_argument("assembly matrix needs N >= 2");
    Vec th;
    if (vartheta != nullptr) {
        if (vartheta->size() != N - 1) throw std::invalid_argument("vartheta needs length N-1");
        th = *vartheta;
    } else {
        th.resize(N - 1);
        for (int i = 0; i < N - 1; ++i) th[i] = static_cast<double>(i + 1);
    }
    Mat A = Mat::Zero(N, N);
    A.topLeftCorner(N - 1, N - 1).setIdentity();
    A.topRightCorner(N - 1, 1).setConstant(nu);
    A.bottomLeftCorner(1, N - 1) = th.transpose();
    A(N - 1, N - 1) = nu;
    return A;
}

Mat build_substitution_H(const std::vector<int>& segment_sizes) {
    int cols = 0;
    for (int s : segment_sizes) {
        if (s <= 0) throw std::invalid_argument("segment sizes must be positive");
        cols += s;
    }
    Mat H = Mat::Zero(static_cast<int>(segment_sizes.size()), cols);
    int col = 0;
    for (std::size_t r = 0; r < segment_sizes.size(); ++r)
        for (int j = 0; j < segment_sizes[r]; ++j) H(static_cast<int>(r), col++) = 1.0;
    return H;
}

ProblemData build_two_echelon(const std::vector<std::vector<int>>& product_sets, const Vec& prices,
                              const Vec& costs) {
    const int nx = static_cast<int>(costs.size());
    int ny = 0;
    for (const auto& set : product_sets) ny += static_cast<int>(set.size());
    if (prices.size() != ny)
        throw std::invalid_argument("two-echelon: one price per (store, product) pair");
    ProblemData pd;
    pd.c = costs;
    pd.p = prices;
    pd.A = Mat::Zero(nx, ny);
    int col = 0;
    for (const auto& set : product_sets)
        for (int wh : set) {
            if (wh < 0 || wh >= nx) throw std::invalid_argument("two-echelon: warehouse index out of range");
            pd.A(wh, col++) = 1.0;
        }
    pd.H = Mat::Identity(ny, ny);
    pd.G = pd.c.transpose();
    // default budget: one unit of recourse everywhere is affordable
    pd.b = Vec::Constant(1, pd.c.dot(pd.A * Vec::Ones(ny)));
    return pd;
}

const std::vector<std::string>& family_structure_ids() {
    static const std::vector<std::string> ids = {"par10", "par20", "par30", "id2",
                                                 "w3",    "m5",    "ser8",  "gen14"};
    return ids;
}

namespace {

Mat structure_matrix(const std::string& id, std::uint64_t seed) {
    if (id == "par10") return build_parametric_A(10);
    if (id == "par20") return build_parametric_A(20);
    if (id == "par30") return build_parametric_A(30);
    if (id == "id2") return Mat::Identity(2, 2);
    if (id == "w3") {
        Mat A(3, 3);
        A << 1, 0, 0, 0, 1, 0, 1, 1, 1;
        return A;
    }
    if (id == "m5") {
        Mat A(5, 5);
        A << 1, 0, 0, 0, 1, 0, 1, 0, 0, 1, 0, 0, 1, 0, 1, 0, 0, 0, 1, 1, 1, 1, 1, 1, 2;
        return A;
    }
    if (id == "ser8") {
        // serial chain: producing product j consumes one unit at every
        // upstream stage i <= j
        Mat A = Mat::Zero(8, 8);
        for (int i = 0; i < 8; ++i)
            for (int j = i; j < 8; ++j) A(i, j) = 1.0;
        return A;
    }
    if (id == "gen14") {
        const int N = 14;
        Mat A(N, N);
        CounterRng rng(hash_combine(seed, hash_str("structure-gen14")));
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j) A(i, j) = static_cast<double>(rng.next_below(3));
        for (int i = 0; i < N; ++i) A(i, i) = std::max(A(i, i), 1.0);  // keep it nonsingular-ish
        return A;
    }
    throw std::invalid_argument("unknown structure id: " + id);
}

}  // namespace

std::vector<GeneratedInstance> enumerate_instance_family(const FamilyConfig& cfg) {
    const std::vector<std::string>& structs =
        cfg.structures.empty() ? family_structure_ids() : cfg.structures;
    const double mu_pat[5][3] = {{20, 20, 20}, {20, 30, 20}, {20, 40, 20}, {20, 40, 20}, {20, 30, 40}};
    const double var_pat[5][3] = {{20, 20, 20}, {20, 20, 20}, {20, 40, 20}, {20, 60, 20}, {20, 40, 60}};
    const int pat_len[5] = {2, 2, 2, 2, 3};

    std::vector<GeneratedInstance> out;
    for (const std::string& sid : structs) {
        Mat A = structure_matrix(sid, cfg.structure_seed);
        const int N = static_cast<int>(A.rows());
        for (int cost = 1; cost <= 2; ++cost) {
            Vec c(N);
            for (int i = 0; i < N; ++i) c[i] = cost == 1 ? 1.0 : (i % 2 == 0 ? 1.5 : 2.0);
            for (int markup = 1; markup <= 4; ++markup) {
                Vec gamma(N);
                for (int j = 0; j < N; ++j) {
                    switch (markup) {
                        case 1: gamma[j] = 1.1; break;
                        case 2: gamma[j] = 3.0; break;
                        case 3: gamma[j] = j % 2 == 0 ? 2.0 : 1.5; break;
                        default: gamma[j] = j % 2 == 0 ? 3.0 : 1.1; break;
                    }
                }
                Vec p = gamma.asDiagonal() * (A.transpose() * c);
                for (int moment = 1; moment <= 5; ++moment) {
                    Vec mu(N), sigma(N);
                    for (int i = 0; i < N; ++i) {
                        mu[i] = mu_pat[moment - 1][i % pat_len[moment - 1]];
                        sigma[i] = std::sqrt(var_pat[moment - 1][i % pat_len[moment - 1]]);
                    }
                    for (double mult : cfg.budget_multipliers) {
                        GeneratedInstance gi;
                        gi.desc = {sid, cost, markup, moment, mult};
                        gi.pd.c = c;
                        gi.pd.p = p;
                        gi.pd.A = A;
                        gi.pd.H = Mat::Identity(N, N);
                        gi.pd.G = c.transpose();
                        gi.pd.b = Vec::Constant(1, mult * c.dot(A * mu));
                        gi.moments = {mu, sigma};
                        out.push_back(std::move(gi));
                    }
                }
            }
        }
    }
    return out;
}

SalesIngest ingest_sales_csv(const std::string& path, int n_select, double r_test_percent,
                             std::uint64_t seed) {
    if (n_select <= 0) throw std::invalid_argument("sales ingest: n_select must be positive");
    if (r_test_percent <= 0.0 || r_test_percent >= 100.0)
        throw std::invalid_argument("sales ingest: test percentage must lie in (0, 100)");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open sales file: " + path);

    struct EntryData {
        std::map<std::string, double> units_by_date;
        double price_sum = 0.0, cost_sum = 0.0;
        int records = 0;
    };
    std::map<std::pair<std::string, std::string>, EntryData> entries;
    std::set<std::string> dates;

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("sales file is empty: " + path);
    {
        std::string expect = "store_id,product_id,date,units_sold,unit_cost,unit_price";
        std::string head = line;
        head.erase(std::remove(head.begin(), head.end(), ' '), head.end());
        if (!head.empty() && head.back() == '\r') head.pop_back();
        if (head != expect)
            throw std::runtime_error("sales file header mismatch, expected: " + expect);
    }
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string store, product, date, units, cost, price;
        if (!std::getline(ls, store, ',') || !std::getline(ls, product, ',') ||
            !std::getline(ls, date, ',') || !std::getline(ls, units, ',') ||
            !std::getline(ls, cost, ',') || !std::getline(ls, price, ','))
            throw std::runtime_error("sales file: short record at line " + std::to_string(lineno));
        EntryData& e = entries[{store, product}];
        double u = std::stod(units);
        if (u < 0.0) throw std::runtime_error("sales file: negative units at line " + std::to_string(lineno));
        e.units_by_date[date] += u;
        e.cost_sum += std::stod(cost);
        e.price_sum += std::stod(price);
        e.records += 1;
        dates.insert(date);
    }
    if (dates.size() < 2) throw std::runtime_error("sales file needs at least two distinct dates");

    // keep complete series only, in deterministic (store, product) order
    std::vector<std::pair<std::string, std::string>> complete;
    for (const auto& [key, e] : entries)
        if (e.units_by_date.size() == dates.size()) complete.push_back(key);
    if (complete.empty()) throw std::runtime_error("sales file has no complete (store, product) series");

    CounterRng pick_rng(hash_combine(seed, hash_str("sales-select")));
    std::vector<std::size_t> perm = pick_rng.permutation(complete.size());
    int keep = std::min<int>(n_select, static_cast<int>(complete.size()));
    std::vector<std::pair<std::string, std::string>> selected;
    for (int i = 0; i < keep; ++i) selected.push_back(complete[perm[static_cast<std::size_t>(i)]]);
    std::sort(selected.begin(), selected.end());

    // group by store, assign one warehouse per distinct product
    std::vector<std::string> stores, products;
    for (const auto& [s, pprod] : selected) {
        if (stores.empty() || stores.back() != s) stores.push_back(s);
        products.push_back(pprod);
    }
    std::sort(products.begin(), products.end());
    products.erase(std::unique(products.begin(), products.end()), products.end());
    auto product_index = [&](const std::string& pr) {
        return static_cast<int>(std::lower_bound(products.begin(), products.end(), pr) - products.begin());
    };

    std::vector<std::vector<int>> product_sets(stores.size());
    Vec prices(static_cast<Eigen::Index>(selected.size()));
    Vec cost_sum = Vec::Zero(static_cast<Eigen::Index>(products.size()));
    Vec cost_cnt = Vec::Zero(static_cast<Eigen::Index>(products.size()));
    {
        int col = 0;
        std::size_t store_idx = 0;
        for (const auto& key : selected) {
            while (stores[store_idx] != key.first) ++store_idx;
            int pi = product_index(key.second);
            product_sets[store_idx].push_back(pi);
            const EntryData& e = entries[key];
            prices[col] = e.price_sum / e.records;
            cost_sum[pi] += e.cost_sum / e.records;
            cost_cnt[pi] += 1.0;
            ++col;
        }
    }
    Vec costs = (cost_sum.array() / cost_cnt.array()).matrix();

    SalesIngest out;
    out.pd = build_two_echelon(product_sets, prices, costs);
    for (const auto& [s, pprod] : selected) out.entry_labels.push_back(s + "/" + pprod);

    // date split: seeded shuffle, test share first, then chronological order
    std::vector<std::string> date_list(dates.begin(), dates.end());
    CounterRng split_rng(hash_combine(seed, hash_str("sales-split")));
    std::vector<std::size_t> dperm = split_rng.permutation(date_list.size());
    std::size_t n_test = static_cast<std::size_t>(
        std::max(1.0, std::round(r_test_percent / 100.0 * static_cast<double>(date_list.size()))));
    n_test = std::min(n_test, date_list.size() - 1);
    std::vector<std::string> te_dates, tr_dates;
    for (std::size_t i = 0; i < date_list.size(); ++i)
        (i < n_test ? te_dates : tr_dates).push_back(date_list[dperm[i]]);
    std::sort(te_dates.begin(), te_dates.end());
    std::sort(tr_dates.begin(), tr_dates.end());

    auto fill = [&](const std::vector<std::string>& ds, Dataset& dset) {
        dset.seed = seed;
        dset.samples.resize(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(selected.size()));
        for (std::size_t r = 0; r < ds.size(); ++r)
            for (std::size_t ccol = 0; ccol < selected.size(); ++ccol)
                dset.samples(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(ccol)) =
                    entries[selected[ccol]].units_by_date[ds[r]];
    };
    fill(tr_dates, out.train);
    fill(te_dates, out.test);

    // size the budget so the mean demand bundle is affordable
    out.pd.b = Vec::Constant(1, out.pd.c.dot(out.pd.A * empirical_moments(out.train).mu));
    return out;
}

}  // namespace droplan
