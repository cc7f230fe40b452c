// instancegen.hpp : synthetic instance families, assembly topologies,
// sales-data ingestion.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "droplan/datadriven.hpp"
#include "droplan/model.hpp"

namespace droplan {

/// Identifies one instance of the synthetic family:
/// 8 structures x 2 cost variants x 4 markup variants x 5 moment variants
/// x 2 budget multipliers = 640 instances.
struct InstanceDescriptor {
    std::string structure_id;  // par10 par20 par30 id2 w3 m5 ser8 gen14
    int cost_variant = 1;      // 1..2
    int markup_variant = 1;    // 1..4
    int moment_variant = 1;    // 1..5
    double budget_multiplier = 0.5;  // 0.5 or 2.0

    std::string id() const;
};

struct GeneratedInstance {
    InstanceDescriptor desc;
    ProblemData pd;
    MomentInfo moments;
};

/// Square assembly matrix [[I, nu*1],[vartheta', nu]] of size N >= 2 with
/// vartheta = (1,...,N-1) by default.
Mat build_parametric_A(int N, double nu = 2.0, const Vec* vartheta = nullptr);

/// Block row-of-ones demand matrix: one row per segment, columns covering
/// that segment's products. Every column has exactly one nonzero.
Mat build_substitution_H(const std::vector<int>& segment_sizes);

/// Warehouse/store topology: one recourse variable per (store, product)
/// pair; A column = unit vector of the product's warehouse index; H = I.
/// product_sets uses 0-based warehouse indices over [0, N_x).
ProblemData build_two_echelon(const std::vector<std::vector<int>>& product_sets, const Vec& prices,
                              const Vec& costs);

struct FamilyConfig {
    std::vector<std::string> structures;  // empty = all 8
    std::vector<double> budget_multipliers = {0.5, 2.0};
    std::uint64_t structure_seed = 815;   // for the seeded general structure
};

/// Full cross product in stable id order. All instances use H = I and the
/// single budget row G = c'.
std::vector<GeneratedInstance> enumerate_instance_family(const FamilyConfig& cfg = {});

const std::vector<std::string>& family_structure_ids();

/// Sales CSV ingestion. Expected columns:
///   store_id,product_id,date,units_sold,unit_cost,unit_price
/// Only (store, product) entries present on every distinct date are kept;
/// n_select of them are chosen by seeded draw, and dates are split
/// r_test_percent / (100 - r_test_percent) into test/train by seeded
/// shuffle. Demand layout follows build_two_echelon over the selected
/// entries grouped by store.
struct SalesIngest {
    ProblemData pd;
    Dataset train;
    Dataset test;
    std::vector<std::string> entry_labels;  // store/product per demand coord
};

SalesIngest ingest_sales_csv(const std::string& path, int n_select, double r_test_percent,
                             std::uint64_t seed);

}  // namespace droplan
