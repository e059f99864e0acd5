#include "mcigle/numeric_core.hpp"

#include <cmath>
#include <string>

namespace mcigle {

namespace {
constexpr double kSingularTol = 1e-12;
}

void require_finite(const Eigen::Ref<const Matrix>& m, const char* what) {
    if (!m.allFinite()) {
        throw InputError(std::string(what) + ": non-finite entries");
    }
}

Matrix ridge_solve(const Matrix& X, const Matrix& Y, double gamma) {
    if (X.rows() != Y.rows()) {
        throw InputError("ridge_solve: X and Y row counts differ");
    }
    if (gamma < 0.0) {
        throw InputError("ridge_solve: gamma must be nonnegative");
    }
    require_finite(X, "ridge_solve: X");
    require_finite(Y, "ridge_solve: Y");

    const Eigen::Index d = X.cols();
    Matrix normal = X.transpose() * X;
    normal.diagonal().array() += gamma;
    const Matrix rhs = X.transpose() * Y;

    Matrix W;
    if (gamma > 0.0) {
        // SPD by construction.
        Eigen::LLT<Matrix> llt(normal);
        if (llt.info() != Eigen::Success) {
            throw NumericError("ridge_solve: Cholesky factorization failed");
        }
        W = llt.solve(rhs);
    } else {
        Eigen::FullPivLU<Matrix> lu(normal);
        lu.setThreshold(kSingularTol * static_cast<double>(d));
        if (!lu.isInvertible()) {
            throw NumericError("ridge_solve: singular normal equations at gamma == 0");
        }
        W = lu.solve(rhs);
    }
    require_finite(W, "ridge_solve: result");
    return W;
}

Matrix sherman_morrison_update(const Matrix& A_inv, const Vector& u, const Vector& v) {
    if (A_inv.rows() != A_inv.cols()) {
        throw InputError("sherman_morrison_update: A_inv must be square");
    }
    if (u.size() != A_inv.rows() || v.size() != A_inv.rows()) {
        throw InputError("sherman_morrison_update: vector sizes do not match A_inv");
    }
    require_finite(A_inv, "sherman_morrison_update: A_inv");
    require_finite(u, "sherman_morrison_update: u");
    require_finite(v, "sherman_morrison_update: v");

    const Vector Au = A_inv * u;
    const Vector Atv = A_inv.transpose() * v;
    const double vAu = v.dot(Au);
    const double denom = 1.0 + vAu;
    if (std::abs(denom) < kSingularTol * (1.0 + std::abs(vAu))) {
        throw NumericError("sherman_morrison_update: rank-one update singular");
    }
    Matrix result = A_inv - (Au * Atv.transpose()) / denom;
    require_finite(result, "sherman_morrison_update: result");
    return result;
}

Matrix woodbury_block_update(const Matrix& A_inv, const Matrix& U, double beta) {
    if (A_inv.rows() != A_inv.cols()) {
        throw InputError("woodbury_block_update: A_inv must be square");
    }
    if (U.cols() != A_inv.cols()) {
        throw InputError("woodbury_block_update: U column count must equal dim(A)");
    }
    if (beta <= 0.0 || beta > 1.0) {
        throw InputError("woodbury_block_update: beta must lie in (0, 1]");
    }
    require_finite(A_inv, "woodbury_block_update: A_inv");
    require_finite(U, "woodbury_block_update: U");

    const Eigen::Index m = U.rows();
    if (m == 0) {
        return A_inv / beta;
    }

    // (beta A + U^T U)^-1 = P - P U^T (I_m + U P U^T)^-1 U P, with P = A_inv/beta.
    const Matrix P = A_inv / beta;
    const Matrix UP = U * P;                           // m x d
    Matrix cap = UP * U.transpose();                   // m x m
    cap.diagonal().array() += 1.0;

    Eigen::PartialPivLU<Matrix> lu(cap);
    const Matrix solved = lu.solve(UP);                // m x d
    const double rel_resid = (cap * solved - UP).cwiseAbs().maxCoeff() /
                             (1.0 + UP.cwiseAbs().maxCoeff());
    if (!solved.allFinite() || rel_resid > 1e-6) {
        throw NumericError("woodbury_block_update: singular capacitance matrix");
    }

    Matrix result = P - UP.transpose() * solved;
    require_finite(result, "woodbury_block_update: result");
    return result;
}

}  // namespace mcigle
