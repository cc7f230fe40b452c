// conic.hpp : narrow optimization kernel for LPs and SOCPs.
//
// Problems are stated over variable blocks tagged free / nonneg / soc plus
// sparse equality and <= rows. The backend behind solve() is an interior
// point method; the interface, not the backend, is the contract.
#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace droplan {

enum class ConeKind {
    free_var,  // no sign restriction
    nonneg,    // x_i >= 0 per coordinate
    soc        // x_0 >= ||x_1..x_{w-1}||_2, width >= 2
};

enum class SolveStatus { optimal, infeasible, unbounded, numeric_failure };

struct Tolerances {
    double rel_gap = 1e-7;  // relative duality gap at optimality
    double feas = 1e-8;     // primal/dual residual bound (relative)
    int max_iter = 200;
};

struct SolveResult {
    SolveStatus status = SolveStatus::numeric_failure;
    Eigen::VectorXd x;
    double objective = 0.0;
    double max_primal_residual = 0.0;  // measured on the original data
    double max_cone_violation = 0.0;
    int iterations = 0;
    std::string message;
    bool ok() const { return status == SolveStatus::optimal; }
};

class ConicProblem {
  public:
    using Terms = std::vector<std::pair<int, double>>;

    /// Declares `size` new variables under one cone tag; returns the index
    /// of the first. SOC blocks need size >= 2 (first coordinate is the
    /// radius).
    int add_block(ConeKind kind, int size);

    void set_objective(int var, double coef);        // accumulates
    void clear_objective();                          // drops all coefficients
    void add_eq(const Terms& terms, double rhs);     // sum == rhs
    void add_le(const Terms& terms, double rhs);     // sum <= rhs

    int num_vars() const { return n_; }
    int num_eq() const { return static_cast<int>(eq_rhs_.size()); }
    int num_le() const { return static_cast<int>(le_rhs_.size()); }

    struct Block {
        ConeKind kind;
        int start;
        int size;
    };
    struct Row {
        Terms terms;
        double rhs;
    };

    const std::vector<Block>& blocks() const { return blocks_; }
    const Eigen::VectorXd objective() const;
    const std::vector<Row>& eq_rows() const { return eq_; }
    const std::vector<Row>& le_rows() const { return le_; }

    /// Checks block/row index consistency; throws std::invalid_argument.
    void validate() const;

  private:
    int n_ = 0;
    std::vector<Block> blocks_;
    std::vector<std::pair<int, double>> obj_;
    std::vector<Row> eq_;
    std::vector<Row> le_;
    std::vector<double> eq_rhs_;
    std::vector<double> le_rhs_;
};

SolveResult solve(const ConicProblem& p, const Tolerances& tol = Tolerances{});

/// Plain-text standard-form dump for external cross-checks.
void dump_problem(const ConicProblem& p, std::ostream& os);

}  // namespace droplan
