#pragma once

#include <filesystem>

#include "mcigle/numeric_core.hpp"

namespace mcigle {

// Recursive least-squares state over a concatenated label space. With
// beta == 1 the state after phases 1..k is algebraically identical to the
// one-shot ridge solution on the union of all phase data; no samples are
// retained, so the state footprint is O(d^2 + d*c) regardless of history.
struct AnalyticState {
    Matrix weights;   // d x seen_classes
    Matrix phi_inv;   // d x d, inverse of the regularized autocorrelation
    Matrix cross;     // d x seen_classes, cross-correlation kept for audit
    int phase = 0;
    double gamma = 1.0;
    double beta = 1.0;  // forgetting factor, applied once per phase boundary
    int seen_classes = 0;
    int classes_before_phase = 0;  // label width prior to the latest expansion
    bool track_cross = true;
};

enum class UpdateMode { PerSample, Block };

// phi_inv starts at (gamma I)^-1; the weight matrix starts with zero columns.
AnalyticState analytic_init(int dim, double gamma, double beta, bool track_cross = true);

// Appends zero columns for the phase's new classes. Predictions on old
// classes are unchanged by construction.
void expand_labels(AnalyticState& state, int new_class_count);

// Targets already padded to the full current label width (old-class columns
// zero). Per-sample mode walks the rows through rank-one gain updates; block
// mode uses the capacitance-system inverse. The two agree to 1e-9.
void phase_update_padded(AnalyticState& state, const Matrix& x, const Matrix& y_padded,
                         UpdateMode mode = UpdateMode::Block);

// Protocol entry point: y_new is one-hot over the phase's new classes, i.e.
// the trailing new_class_count columns of the expanded label space; old-class
// columns are padded with zeros internally.
void phase_update(AnalyticState& state, const Matrix& x, const Matrix& y_new,
                  UpdateMode mode = UpdateMode::Block);

// Scores x * W; argmax per row is the predicted class.
Matrix predict_mainstream(const AnalyticState& state, const Matrix& x);

// Checkpoints use the shared tensor-file format; round-trip is exact.
void save_analytic_state(const std::filesystem::path& path, const AnalyticState& state);
AnalyticState load_analytic_state(const std::filesystem::path& path);

}  // namespace mcigle
