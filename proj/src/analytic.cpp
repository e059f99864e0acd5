#include "mcigle/analytic.hpp"

#include <cmath>

#include "mcigle/checkpoint.hpp"

namespace mcigle {

namespace {

// Symmetrize and verify positive definiteness via Cholesky feasibility.
void close_phase(AnalyticState& state) {
    state.phi_inv = (0.5 * (state.phi_inv + state.phi_inv.transpose())).eval();
    Eigen::LLT<Matrix> llt(state.phi_inv);
    if (llt.info() != Eigen::Success) {
        throw NumericError("analytic state: inverse autocorrelation lost positive definiteness");
    }
    state.phase += 1;
}

}  // namespace

AnalyticState analytic_init(int dim, double gamma, double beta, bool track_cross) {
    if (dim < 1) {
        throw InputError("analytic_init: dimension must be positive");
    }
    if (!(gamma > 0.0)) {
        throw InputError("analytic_init: gamma must be positive");
    }
    if (!(beta > 0.0) || beta > 1.0) {
        throw InputError("analytic_init: beta must lie in (0, 1]");
    }
    AnalyticState state;
    state.weights = Matrix::Zero(dim, 0);
    state.phi_inv = Matrix::Identity(dim, dim) / gamma;
    state.cross = Matrix::Zero(dim, 0);
    state.gamma = gamma;
    state.beta = beta;
    state.track_cross = track_cross;
    return state;
}

void expand_labels(AnalyticState& state, int new_class_count) {
    if (new_class_count < 1) {
        throw InputError("expand_labels: new class count must be >= 1");
    }
    const Eigen::Index d = state.weights.rows();
    const Eigen::Index old = state.weights.cols();
    Matrix w = Matrix::Zero(d, old + new_class_count);
    w.leftCols(old) = state.weights;
    state.weights = std::move(w);
    if (state.track_cross) {
        Matrix z = Matrix::Zero(d, old + new_class_count);
        z.leftCols(old) = state.cross;
        state.cross = std::move(z);
    }
    state.classes_before_phase = state.seen_classes;
    state.seen_classes += new_class_count;
}

void phase_update_padded(AnalyticState& state, const Matrix& x, const Matrix& y_padded,
                         UpdateMode mode) {
    const Eigen::Index d = state.phi_inv.rows();
    if (x.cols() != d) {
        throw InputError("phase_update: feature width does not match state dimension");
    }
    if (y_padded.cols() != state.seen_classes) {
        throw InputError("phase_update: target width does not match seen class count");
    }
    if (x.rows() != y_padded.rows()) {
        throw InputError("phase_update: sample counts differ between x and targets");
    }
    require_finite(x, "phase_update: x");
    require_finite(y_padded, "phase_update: targets");

    if (x.rows() == 0) {
        state.phase += 1;  // empty phase leaves the learned state untouched
        return;
    }

    if (mode == UpdateMode::Block) {
        const Matrix phi_new = woodbury_block_update(state.phi_inv, x, state.beta);
        const Matrix gain = phi_new * x.transpose();  // d x N
        state.weights += gain * (y_padded - x * state.weights);
        state.phi_inv = phi_new;
        if (state.track_cross) {
            state.cross = state.beta * state.cross + x.transpose() * y_padded;
        }
    } else {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            // The forgetting factor scales the correlations once per phase, so
            // only the first row of the phase carries it.
            const double b = (i == 0) ? state.beta : 1.0;
            const Vector xi = x.row(i).transpose();
            const Vector px = state.phi_inv * xi;
            const double denom = b + xi.dot(px);
            const Vector gain = px / denom;
            state.weights += gain * (y_padded.row(i) - x.row(i) * state.weights);
            state.phi_inv = sherman_morrison_update(state.phi_inv / b, xi, xi);
            if (state.track_cross) {
                state.cross = b * state.cross + xi * y_padded.row(i);
            }
        }
    }
    close_phase(state);
}

void phase_update(AnalyticState& state, const Matrix& x, const Matrix& y_new,
                  UpdateMode mode) {
    const Eigen::Index c_new = y_new.cols();
    if (c_new > state.seen_classes) {
        throw InputError("phase_update: state not expanded for the new classes");
    }
    for (Eigen::Index i = 0; i < y_new.rows(); ++i) {
        double row_sum = 0.0;
        for (Eigen::Index j = 0; j < c_new; ++j) {
            const double v = y_new(i, j);
            if (v != 0.0 && v != 1.0) {
                throw InputError("phase_update: targets must be one-hot");
            }
            row_sum += v;
        }
        if (row_sum != 1.0) {
            throw InputError("phase_update: each target row must select exactly one class");
        }
    }
    Matrix padded = Matrix::Zero(y_new.rows(), state.seen_classes);
    padded.rightCols(c_new) = y_new;
    phase_update_padded(state, x, padded, mode);
}

Matrix predict_mainstream(const AnalyticState& state, const Matrix& x) {
    if (x.cols() != state.weights.rows()) {
        throw InputError("predict_mainstream: feature width mismatch");
    }
    return x * state.weights;
}

void save_analytic_state(const std::filesystem::path& path, const AnalyticState& state) {
    NamedMatrices tensors;
    tensors.emplace_back("weights", state.weights);
    tensors.emplace_back("phi_inv", state.phi_inv);
    tensors.emplace_back("cross", state.cross);
    tensors.emplace_back("meta.phase", scalar_tensor(state.phase));
    tensors.emplace_back("meta.gamma", scalar_tensor(state.gamma));
    tensors.emplace_back("meta.beta", scalar_tensor(state.beta));
    tensors.emplace_back("meta.seen_classes", scalar_tensor(state.seen_classes));
    tensors.emplace_back("meta.classes_before_phase",
                         scalar_tensor(state.classes_before_phase));
    tensors.emplace_back("meta.track_cross", scalar_tensor(state.track_cross ? 1.0 : 0.0));
    save_tensor_file(path, tensors);
}

AnalyticState load_analytic_state(const std::filesystem::path& path) {
    const NamedMatrices tensors = load_tensor_file(path);
    AnalyticState state;
    state.weights = find_tensor(tensors, "weights");
    state.phi_inv = find_tensor(tensors, "phi_inv");
    state.cross = find_tensor(tensors, "cross");
    state.phase = static_cast<int>(tensor_scalar(tensors, "meta.phase"));
    state.gamma = tensor_scalar(tensors, "meta.gamma");
    state.beta = tensor_scalar(tensors, "meta.beta");
    state.seen_classes = static_cast<int>(tensor_scalar(tensors, "meta.seen_classes"));
    state.classes_before_phase =
        static_cast<int>(tensor_scalar(tensors, "meta.classes_before_phase"));
    state.track_cross = tensor_scalar(tensors, "meta.track_cross") != 0.0;
    return state;
}

}  // namespace mcigle
