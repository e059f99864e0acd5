#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mcigle/numeric_core.hpp"

namespace mcigle {

enum class FanActivation { Gelu, Relu };

// One Fourier-analysis layer: output is [cos(x W_p) | sin(x W_p) | act(x W_pbar + b)].
struct FanLayerParams {
    Matrix w_p;     // d_in x d_p, periodic branch
    Matrix w_pbar;  // d_in x d_pbar
    Vector b_pbar;  // d_pbar
    FanActivation activation = FanActivation::Gelu;
};

// Stacked layers plus a linear classifier head used only during base-phase
// training; the head is dropped when the stack freezes and downstream modules
// consume fan_forward output directly. Normalization statistics come from the
// base phase and are never updated afterwards.
struct FanStack {
    std::vector<FanLayerParams> layers;
    Matrix head;  // d_out x num_classes while training, 0x0 once frozen
    bool frozen = false;
    Vector norm_mean;
    Vector norm_std;
};

struct FanLayerDims {
    int d_p = 0;
    int d_pbar = 0;
};

// Splits a layer width between the periodic and standard branches so that
// 2*d_p + d_pbar == width and d_p/(d_p + d_pbar) ~= p_ratio. p_ratio == 0
// yields a plain nonlinear layer (used by the equal-parameter comparisons).
FanLayerDims fan_layer_dims(int width, double p_ratio);

FanStack init_fan_stack(int d_in, int width, int layer_count, double p_ratio,
                        FanActivation activation, int num_classes, std::uint64_t seed);

// Normalizes the input with the stored statistics and applies every layer.
Matrix fan_forward(const FanStack& stack, const Matrix& x);

// As fan_forward but returns each layer's output (last entry == fan_forward).
std::vector<Matrix> fan_forward_all_layers(const FanStack& stack, const Matrix& x);

// Class probabilities through the training head (head must be present).
Matrix fan_classify(const FanStack& stack, const Matrix& x);

struct FanGradients {
    std::vector<FanLayerParams> layers;  // reuses the layer layout for grads
    Matrix head;
};

// Cross-entropy loss through the head, with exact analytic gradients.
double fan_loss_and_gradients(const FanStack& stack, const Matrix& x,
                              const std::vector<int>& labels, FanGradients* grads);

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
};

struct FanTrainResult {
    std::vector<double> loss_history;
    double final_train_accuracy = 0.0;
};

// Fits normalization statistics, jointly trains layers and head with AdamW on
// cross-entropy, then freezes the stack and discards the head.
FanTrainResult train_fan(FanStack& stack, const Matrix& x, const std::vector<int>& labels,
                         int epochs, const AdamWConfig& opt);

// Versioned binary checkpoint (see docs/formats.md); round-trip is exact.
void save_fan_stack(const std::filesystem::path& path, const FanStack& stack);
FanStack load_fan_stack(const std::filesystem::path& path);

}  // namespace mcigle
