#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mcigle/graph.hpp"
#include "mcigle/transport.hpp"

namespace mcigle {

enum class Modality { Visual, Textual };

struct GnnConfig {
    int layers = 2;
    int hidden = 32;
    double lambda1 = 0.5;       // transport feature/structure tradeoff
    double epsilon = 0.05;      // transport entropy strength
    double ot_tol = 1e-6;
    int ot_max_outer = 20;
    int ot_max_sinkhorn = 500;
    double align_weight = 0.1;  // cross-modal projection alignment loss weight
};

// Per-modality layer stacks, the tanh-affine-softmax classifier head, and the
// visual->textual projection that feeds the transport cost. Once frozen no
// training entry point may mutate the parameters.
struct GnnParams {
    std::vector<Matrix> w_vis;  // layer l: d_{l-1} x d_l
    std::vector<Matrix> w_txt;
    Matrix classifier_w;        // (2*hidden) x num_classes
    Vector classifier_b;
    Matrix ot_projection;       // hidden x hidden
    bool frozen = false;
};

struct GnnGradients {
    std::vector<Matrix> w_vis;
    std::vector<Matrix> w_txt;
    Matrix classifier_w;
    Vector classifier_b;
    Matrix ot_projection;
};

GnnParams init_gnn_params(int d_v, int d_t, const GnnConfig& cfg, int num_classes,
                          std::uint64_t seed);

// Softmax over cosine similarities between the center node's features and
// each neighbor's; weights are positive and sum to one. Zero-norm feature
// rows contribute similarity 0.
Vector correlation_weights(const Matrix& h_prev, int node, std::span<const int> neighbors);

// Runs one modality's message-passing stack; aggregation is the
// correlation-weighted sum over N(u) plus u itself, activation ReLU.
Matrix gnn_forward(const MultimodalGraph& g, const GnnParams& p, Modality modality);

// Builds the fused transport problem from the final-layer embeddings of both
// modalities and solves it.
TransportPlan compute_transport_plan(const MultimodalGraph& g, const GnnParams& p,
                                     const GnnConfig& cfg);

// Pre-classifier fused embeddings [projected visual | textual]; solves the
// plan internally when none is supplied.
Matrix fused_embeddings(const MultimodalGraph& g, const GnnParams& p,
                        const GnnConfig& cfg, const TransportPlan* plan = nullptr);

// Row-stochastic class probabilities softmax(tanh(W h' + b)).
Matrix fuse_and_classify(const MultimodalGraph& g, const GnnParams& p,
                         const GnnConfig& cfg);

// Cross-entropy plus projection-alignment loss and its exact gradients, with
// the transport plan held fixed. Used both by training and the
// finite-difference checks.
double gnn_loss_and_gradients(const MultimodalGraph& g, const GnnParams& p,
                              const GnnConfig& cfg, const TransportPlan& plan,
                              GnnGradients* grads);

struct GnnTrainResult {
    std::vector<double> loss_history;
};

// Full-batch gradient descent with momentum on the base-phase graph; the
// transport plan is re-solved each epoch and held constant within the
// backward pass. Freezes the parameters on return.
GnnTrainResult train_base(const MultimodalGraph& g, GnnParams& p, const GnnConfig& cfg,
                          int epochs, double lr, double momentum);

}  // namespace mcigle
