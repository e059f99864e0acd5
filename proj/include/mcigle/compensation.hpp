#pragma once

#include <cstdint>
#include <vector>

#include "mcigle/analytic.hpp"

namespace mcigle {

enum class CompActivation { Tanh, Mish };

// Embedding pipeline of the compensation stream: a small 1-D convolution over
// the feature vector, flattened, pushed through a frozen random buffer
// projection, then a nonlinearity that deliberately differs from the
// mainstream backbone's activation.
struct CompensationEmbed {
    Matrix conv_kernels;  // channels x kernel width
    Matrix buffer_proj;   // (channels * d_in) x d_c, never trained
    CompActivation activation = CompActivation::Tanh;
    bool frozen = false;
};

// Residual-fitting state: the same recursive least-squares core as the
// mainstream, applied to cleansed residual targets.
struct CompensationState {
    CompensationEmbed embed;
    AnalyticState core;  // weights = W_C, phi_inv = R_C
    double lambda2 = 0.6;
};

// Residual matrix after previous-label cleansing; columns [0, old_width) are
// exactly zero by construction.
struct ResidualTarget {
    Matrix matrix;  // N x c_k
    int old_width = 0;
};

inline constexpr int kCompConvChannels = 4;
inline constexpr int kCompConvWidth = 3;

CompensationEmbed init_compensation_embed(int d_in, int d_c, CompActivation activation,
                                          std::uint64_t seed);

// sigma_C(B flat(conv(x))) applied row-wise; zero padding keeps the conv
// output the same length as the input.
Matrix compensation_embed(const CompensationEmbed& embed, const Matrix& x_raw);

struct CompEmbedTrainResult {
    std::vector<double> loss_history;
};

// Trains the convolution kernels on the base phase against the ridge
// objective (inner head solved in closed form each epoch), then freezes the
// embedding. The buffer projection is never touched.
CompEmbedTrainResult train_compensation_embed(CompensationEmbed& embed, const Matrix& x,
                                              const Matrix& y_onehot, double gamma,
                                              int epochs, double lr);

CompensationState init_compensation(CompensationEmbed embed, int d_c, double gamma,
                                    double beta, double lambda2);

// Mirrors the mainstream label expansion (zero-padded W_C columns).
void expand_compensation(CompensationState& state, int new_class_count);

// [0 | Y_new] - X W_M followed by previous-label cleansing.
ResidualTarget residual_matrix(const AnalyticState& mainstream, const Matrix& x_m,
                               const Matrix& y_padded);

// C-RLS update of W_C against the cleansed residual target.
void compensation_update(CompensationState& state, const Matrix& x_c,
                         const ResidualTarget& target,
                         UpdateMode mode = UpdateMode::Block);

Matrix predict_compensation(const CompensationState& state, const Matrix& x_raw);

// lambda2 * mainstream scores + (1 - lambda2) * compensation scores.
Matrix predict_combined(const AnalyticState& mainstream, const CompensationState& comp,
                        const Matrix& x_raw);

}  // namespace mcigle
