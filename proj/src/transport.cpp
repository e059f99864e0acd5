#include "mcigle/transport.hpp"

#include <cmath>
#include <limits>

namespace mcigle {

namespace {

void validate_problem(const OtProblem& p) {
    const Eigen::Index n = p.cost.rows();
    const Eigen::Index m = p.cost.cols();
    if (n == 0 || m == 0) {
        throw InputError("fused_ot_solve: empty cost matrix");
    }
    require_finite(p.cost, "fused_ot_solve: cost");
    if (p.cost.minCoeff() < 0.0) {
        throw InputError("fused_ot_solve: negative cost entries");
    }
    auto check_structure = [](const Matrix& s, Eigen::Index dim, const char* name) {
        if (s.rows() != dim || s.cols() != dim) {
            throw InputError(std::string("fused_ot_solve: ") + name + " has wrong shape");
        }
        require_finite(s, name);
        if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
            throw InputError(std::string("fused_ot_solve: ") + name + " not symmetric");
        }
        if (s.diagonal().cwiseAbs().maxCoeff() > 1e-12) {
            throw InputError(std::string("fused_ot_solve: ") + name + " has nonzero diagonal");
        }
    };
    check_structure(p.structure_vis, n, "structure_vis");
    check_structure(p.structure_txt, m, "structure_txt");
    if (p.lambda1 < 0.0 || p.lambda1 > 1.0) {
        throw InputError("fused_ot_solve: lambda1 outside [0,1]");
    }
    if (!(p.epsilon > 0.0)) {
        throw InputError("fused_ot_solve: epsilon must be positive");
    }
    auto check_marginal = [](const Vector& a, Eigen::Index dim, const char* name) {
        if (a.size() != dim) {
            throw InputError(std::string("fused_ot_solve: ") + name + " has wrong length");
        }
        require_finite(a, name);
        if (a.minCoeff() < 0.0) {
            throw InputError(std::string("fused_ot_solve: ") + name + " has negative mass");
        }
        if (std::abs(a.sum() - 1.0) > 1e-12) {
            throw InputError(std::string("fused_ot_solve: ") + name + " does not sum to 1");
        }
    };
    check_marginal(p.marginal_src, n, "marginal_src");
    check_marginal(p.marginal_tgt, m, "marginal_tgt");
}

// Gradient of the quadratic structure term divided by 2: G(P)_ij =
// sum_{i'j'} |dv(i,i') - dt(j,j')|^2 P_{i'j'}, expanded through the standard
// three-term decomposition dv^2 + dt^2 - 2 dv dt.
Matrix gromov_linearization(const OtProblem& p, const Matrix& plan) {
    const Vector row_mass = plan.rowwise().sum();
    const Vector col_mass = plan.colwise().sum().transpose();
    const Vector v = p.structure_vis.cwiseProduct(p.structure_vis) * row_mass;
    const Vector t = p.structure_txt.cwiseProduct(p.structure_txt) * col_mass;
    Matrix g = v.replicate(1, plan.cols());
    g.rowwise() += t.transpose();
    g.noalias() -= 2.0 * (p.structure_vis * plan * p.structure_txt);
    return g;
}

double entropy_term(const Matrix& plan) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < plan.rows(); ++i) {
        for (Eigen::Index j = 0; j < plan.cols(); ++j) {
            const double v = plan(i, j);
            if (v > 0.0) {
                acc += v * (std::log(v) - 1.0);
            }
        }
    }
    return acc;
}

double logsumexp(const Vector& v) {
    const double mx = v.maxCoeff();
    if (!std::isfinite(mx)) {
        return mx;  // all -inf: empty mass
    }
    return mx + std::log((v.array() - mx).exp().sum());
}

struct SinkhornResult {
    Matrix plan;
    bool converged = false;
};

// Log-domain scaling iterations for the linear cost `M`; robust to small
// epsilon. Potentials are warm-started across outer iterations.
SinkhornResult sinkhorn_log(const Matrix& M, const Vector& a, const Vector& b,
                            double eps, int max_iter, double tol,
                            Vector& f, Vector& g) {
    const Eigen::Index n = M.rows();
    const Eigen::Index m = M.cols();
    const double neg_inf = -std::numeric_limits<double>::infinity();
    Vector log_a(n), log_b(m);
    for (Eigen::Index i = 0; i < n; ++i) log_a(i) = a(i) > 0.0 ? std::log(a(i)) : neg_inf;
    for (Eigen::Index j = 0; j < m; ++j) log_b(j) = b(j) > 0.0 ? std::log(b(j)) : neg_inf;

    auto make_plan = [&]() {
        Matrix plan(n, m);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < m; ++j) {
                const double e = (f(i) + g(j) - M(i, j)) / eps;
                plan(i, j) = std::isfinite(e) ? std::exp(e) : 0.0;
            }
        }
        return plan;
    };

    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) {
            Vector scratch = (g - M.row(i).transpose()) / eps;
            f(i) = std::isfinite(log_a(i)) ? eps * (log_a(i) - logsumexp(scratch)) : neg_inf;
        }
        for (Eigen::Index j = 0; j < m; ++j) {
            Vector scratch = (f - M.col(j)) / eps;
            g(j) = std::isfinite(log_b(j)) ? eps * (log_b(j) - logsumexp(scratch)) : neg_inf;
        }
        // Column marginals are exact after the g update; only rows can drift.
        Matrix plan = make_plan();
        const double row_err = (plan.rowwise().sum() - a).cwiseAbs().maxCoeff();
        if (row_err < tol) {
            return {std::move(plan), true};
        }
    }
    return {make_plan(), converged};
}

}  // namespace

Vector uniform_marginal(int n) {
    if (n <= 0) {
        throw InputError("uniform_marginal: size must be positive");
    }
    return Vector::Constant(n, 1.0 / n);
}

double fused_objective(const OtProblem& p, const Matrix& plan) {
    double obj = p.lambda1 * (plan.cwiseProduct(p.cost)).sum();
    if (p.lambda1 < 1.0) {
        obj += (1.0 - p.lambda1) * (plan.cwiseProduct(gromov_linearization(p, plan))).sum();
    }
    obj += p.epsilon * entropy_term(plan);
    return obj;
}

TransportPlan fused_ot_solve(const OtProblem& p, int max_outer, int max_sinkhorn,
                             double tol) {
    validate_problem(p);
    if (max_outer < 1 || max_sinkhorn < 1 || !(tol > 0.0)) {
        throw InputError("fused_ot_solve: invalid iteration budgets or tolerance");
    }

    const Eigen::Index n = p.cost.rows();
    const Eigen::Index m = p.cost.cols();

    TransportPlan out;
    out.plan = p.marginal_src * p.marginal_tgt.transpose();  // feasible start
    double obj = fused_objective(p, out.plan);

    Vector f = Vector::Zero(n), g = Vector::Zero(m);
    bool inner_ok = false;

    for (int it = 0; it < max_outer; ++it) {
        Matrix lin_cost = p.lambda1 * p.cost;
        if (p.lambda1 < 1.0) {
            lin_cost.noalias() += (2.0 * (1.0 - p.lambda1)) * gromov_linearization(p, out.plan);
        }
        SinkhornResult inner =
            sinkhorn_log(lin_cost, p.marginal_src, p.marginal_tgt, p.epsilon,
                         max_sinkhorn, tol, f, g);
        inner_ok = inner.converged;

        // Backtrack along the segment to the Sinkhorn candidate so the fused
        // objective never increases.
        double step = 1.0;
        double new_obj = obj;
        Matrix accepted = out.plan;
        while (step > 1e-8) {
            Matrix trial = (1.0 - step) * out.plan + step * inner.plan;
            const double trial_obj = fused_objective(p, trial);
            if (trial_obj <= obj + 1e-12 * (1.0 + std::abs(obj))) {
                accepted = std::move(trial);
                new_obj = trial_obj;
                break;
            }
            step *= 0.5;
        }

        const double plan_delta = (accepted - out.plan).cwiseAbs().maxCoeff();
        out.plan = std::move(accepted);
        out.iterations = it + 1;
        out.objective_trace.push_back(new_obj);

        const bool stalled = std::abs(obj - new_obj) <= tol * (1.0 + std::abs(new_obj));
        obj = new_obj;
        if (inner_ok && (stalled || plan_delta < tol)) {
            out.converged = true;
            break;
        }
    }

    out.objective = obj;
    require_finite(out.plan, "fused_ot_solve: plan");
    return out;
}

Matrix apply_plan(const TransportPlan& tp, const Matrix& features_vis) {
    const Matrix& plan = tp.plan;
    if (plan.rows() != features_vis.rows()) {
        throw InputError("apply_plan: plan rows do not match feature rows");
    }
    const Vector col_mass = plan.colwise().sum().transpose();
    for (Eigen::Index j = 0; j < col_mass.size(); ++j) {
        if (col_mass(j) == 0.0) {
            throw NumericError("apply_plan: zero marginal mass at target index " +
                               std::to_string(j));
        }
    }
    Matrix projected = plan.transpose() * features_vis;
    projected.array().colwise() /= col_mass.array();
    return projected;
}

Matrix concat_fuse(const Matrix& projected, const Matrix& features_txt) {
    if (projected.rows() != features_txt.rows()) {
        throw InputError("concat_fuse: row counts differ");
    }
    Matrix fused(projected.rows(), projected.cols() + features_txt.cols());
    fused.leftCols(projected.cols()) = projected;
    fused.rightCols(features_txt.cols()) = features_txt;
    return fused;
}

}  // namespace mcigle
