#pragma once

#include <vector>

#include "mcigle/numeric_core.hpp"

namespace mcigle {

// Fused transport problem between a visual node set (size n) and a textual
// node set (size m). `cost` is the cross-modal feature cost; the structure
// matrices hold intra-modality distances whose mismatch forms the quadratic
// term. lambda1 trades the two off; epsilon scales the entropy regularizer.
struct OtProblem {
    Matrix cost;           // n x m, entries >= 0
    Matrix structure_vis;  // n x n, symmetric, zero diagonal
    Matrix structure_txt;  // m x m, symmetric, zero diagonal
    double lambda1 = 0.5;
    double epsilon = 0.05;
    Vector marginal_src;   // length n, sums to 1
    Vector marginal_tgt;   // length m, sums to 1
};

struct TransportPlan {
    Matrix plan;                         // n x m, nonnegative coupling
    double objective = 0.0;              // fused objective at `plan`
    int iterations = 0;                  // outer iterations performed
    bool converged = false;
    std::vector<double> objective_trace; // objective after each outer iteration
};

// Uniform marginal vector of the given length.
Vector uniform_marginal(int n);

// Fused objective value: lambda1 <P,C> + (1-lambda1) * quadratic structure
// mismatch + epsilon * sum P (log P - 1).
double fused_objective(const OtProblem& problem, const Matrix& plan);

// Solves the fused problem. Outer iterations linearize the quadratic term at
// the current plan; the inner loop is log-domain entropic scaling run to
// marginal tolerance `tol`. Each outer step is backtracked so the fused
// objective never increases. Non-convergence within the budgets returns
// converged=false rather than throwing.
TransportPlan fused_ot_solve(const OtProblem& problem, int max_outer,
                             int max_sinkhorn, double tol);

// Barycentric projection: row j of the result is the plan-weighted average of
// visual feature rows, rescaled by the j-th plan column mass.
Matrix apply_plan(const TransportPlan& plan, const Matrix& features_vis);

// Columnwise concatenation [projected | features_txt]; row counts must agree.
Matrix concat_fuse(const Matrix& projected, const Matrix& features_txt);

}  // namespace mcigle
