// test_instancegen.cpp : structure builders, the synthetic family, and
// sales-data ingestion.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "droplan/instancegen.hpp"
#include "droplan/lowerlevel.hpp"

using namespace droplan;

TEST_CASE("parametric assembly matrix has the documented layout") {
    const Mat A = build_parametric_A(3);
    Mat want(3, 3);
    want << 1, 0, 2, 0, 1, 2, 1, 2, 2;
    CHECK((A - want).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));

    Vec theta(3);
    theta << 5.0, 6.0, 7.0;
    const Mat B = build_parametric_A(4, 3.0, &theta);
    CHECK(B.rows() == 4);
    CHECK(B(0, 3) == doctest::Approx(3.0));  // nu column
    CHECK(B(3, 0) == doctest::Approx(5.0));  // vartheta row
    CHECK(B(3, 3) == doctest::Approx(3.0));
    CHECK(B(0, 0) == doctest::Approx(1.0));
    CHECK(B(0, 1) == doctest::Approx(0.0));

    CHECK_THROWS_AS(build_parametric_A(1), std::invalid_argument);
}

TEST_CASE("substitution demand matrix covers segments disjointly") {
    const Mat H = build_substitution_H({2, 1});
    Mat want(2, 3);
    want << 1, 1, 0, 0, 0, 1;
    CHECK((H - want).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
    // every column has exactly one nonzero
    for (int j = 0; j < H.cols(); ++j) CHECK(H.col(j).lpNorm<1>() == doctest::Approx(1.0));
    CHECK_THROWS_AS(build_substitution_H({}), std::invalid_argument);
    CHECK_THROWS_AS(build_substitution_H({2, 0}), std::invalid_argument);
}

TEST_CASE("two-echelon topology routes products to their warehouses") {
    Vec prices(3), costs(2);
    prices << 4.0, 5.0, 6.0;
    costs << 1.0, 2.0;
    const auto pd = build_two_echelon({{0, 1}, {1}}, prices, costs);
    Mat wantA(2, 3);
    wantA << 1, 0, 0, 0, 1, 1;
    CHECK((pd.A - wantA).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
    CHECK(pd.H.isIdentity(0.0));
    CHECK(pd.G.rows() == 1);
    CHECK((pd.G.transpose() - pd.c).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
    // one unit everywhere: c'A1 = 1 + 2 + 2
    CHECK(pd.b[0] == doctest::Approx(5.0));
    CHECK_THROWS_AS(build_two_echelon({{0, 2}}, Vec::Constant(2, 1.0), costs),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_two_echelon({{0}}, prices, costs), std::invalid_argument);
}

TEST_CASE("family enumeration produces the full cross product") {
    const auto family = enumerate_instance_family();
    CHECK(family.size() == 640);
    CHECK(family_structure_ids().size() == 8);

    std::set<std::string> ids;
    for (const auto& inst : family) {
        ids.insert(inst.desc.id());
        REQUIRE(inst.pd.identity_H());
        REQUIRE(inst.pd.n_b() == 1);
        // single budget row G = c'
        CHECK((inst.pd.G.transpose() - inst.pd.c).lpNorm<Eigen::Infinity>() ==
              doctest::Approx(0.0));
        CHECK(inst.moments.mu.minCoeff() > 0.0);
        CHECK(inst.moments.sigma.minCoeff() > 0.0);
        CHECK(inst.pd.b[0] > 0.0);
        CHECK(inst.pd.c.minCoeff() > 0.0);
        CHECK(inst.pd.p.minCoeff() > 0.0);
    }
    CHECK(ids.size() == 640);  // ids are unique
}

TEST_CASE("family budgets follow the mean-bundle multipliers") {
    const auto family = enumerate_instance_family();
    for (const auto& inst : family) {
        const double bundle = inst.pd.c.dot(inst.pd.A * inst.moments.mu);
        CHECK(inst.pd.b[0] ==
              doctest::Approx(inst.desc.budget_multiplier * bundle).epsilon(1e-9));
    }
}

TEST_CASE("family instances clear the non-triviality screen") {
    FamilyConfig cfg;
    cfg.structures = {"id2", "w3", "m5"};
    for (const auto& inst : enumerate_instance_family(cfg)) {
        const auto rep = check_assumptions(inst.pd, inst.moments);
        CHECK(rep.nontrivial);
        CHECK(rep.margin_condition);
    }
}

TEST_CASE("family filters and determinism") {
    FamilyConfig cfg;
    cfg.structures = {"par10"};
    const auto a = enumerate_instance_family(cfg);
    CHECK(a.size() == 80);  // 2 x 4 x 5 x 2 variants of one structure
    for (const auto& inst : a) CHECK(inst.desc.structure_id == "par10");

    cfg.structures = {"gen14"};
    const auto g1 = enumerate_instance_family(cfg);
    const auto g2 = enumerate_instance_family(cfg);
    REQUIRE(g1.size() == g2.size());
    for (std::size_t i = 0; i < g1.size(); ++i) {
        CHECK(g1[i].desc.id() == g2[i].desc.id());
        CHECK((g1[i].pd.A - g2[i].pd.A).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
        CHECK((g1[i].moments.mu - g2[i].moments.mu).lpNorm<Eigen::Infinity>() ==
              doctest::Approx(0.0));
    }
    cfg.structure_seed = 816;  // reseeding moves the seeded structure
    const auto g3 = enumerate_instance_family(cfg);
    CHECK((g3[0].pd.A - g1[0].pd.A).lpNorm<Eigen::Infinity>() > 0.0);

    cfg.structures = {"unknown"};
    CHECK_THROWS_AS(enumerate_instance_family(cfg), std::invalid_argument);
}

TEST_CASE("structure ids map to their advertised dimensions") {
    const auto family = enumerate_instance_family();
    for (const auto& inst : family) {
        const auto& sid = inst.desc.structure_id;
        if (sid == "par10") CHECK(inst.pd.n_y() == 10);
        if (sid == "par30") CHECK(inst.pd.n_y() == 30);
        if (sid == "id2") CHECK(inst.pd.n_y() == 2);
        if (sid == "gen14") CHECK(inst.pd.n_y() == 14);
    }
}

TEST_CASE("sales csv ingestion selects complete series and splits dates") {
    const std::string path = "sales_fixture.csv";
    {
        std::ofstream out(path);
        out << "store_id,product_id,date,units_sold,unit_cost,unit_price\n";
        // two stores, two products, four dates; pair (s2, b) misses one
        // date and must be dropped
        for (int day = 1; day <= 4; ++day) {
            out << "s1,a,2024-01-0" << day << "," << 10 + day << ",1.5,4.0\n";
            out << "s1,b,2024-01-0" << day << "," << 20 + day << ",2.0,5.0\n";
            out << "s2,a,2024-01-0" << day << "," << 30 + day << ",1.0,3.0\n";
            if (day != 2) out << "s2,b,2024-01-0" << day << "," << 5 + day << ",2.5,6.0\n";
        }
    }
    const auto ing = ingest_sales_csv(path, 3, 25.0, 4242);
    CHECK(ing.entry_labels.size() == 3);
    CHECK(ing.pd.n_d() == 3);
    CHECK(ing.pd.identity_H());
    // 25 percent of four dates -> one test date, three train dates
    CHECK(ing.train.samples.rows() == 3);
    CHECK(ing.test.samples.rows() == 1);
    CHECK(ing.train.samples.cols() == 3);
    CHECK(ing.train.samples.minCoeff() >= 0.0);
    // deterministic under the same seed
    const auto again = ingest_sales_csv(path, 3, 25.0, 4242);
    CHECK((again.train.samples - ing.train.samples).lpNorm<Eigen::Infinity>() ==
          doctest::Approx(0.0));
    CHECK(again.entry_labels == ing.entry_labels);
    // requesting more series than survive the completeness screen fails
    CHECK_THROWS_AS(ingest_sales_csv(path, 4, 25.0, 1), std::invalid_argument);
    std::remove(path.c_str());
    CHECK_THROWS(ingest_sales_csv("missing_sales.csv", 1, 25.0, 1));
}
