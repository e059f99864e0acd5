#include "mcigle/gnn.hpp"

#include <cmath>
#include <random>

namespace mcigle {

namespace {

double cosine_or_zero(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return a.dot(b) / (na * nb);
}

Vector softmax(const Vector& v) {
    const double mx = v.maxCoeff();
    Vector e = (v.array() - mx).exp();
    return e / e.sum();
}

struct LayerCache {
    Matrix h_in;
    std::vector<Vector> sims;     // per node, aligned with neighborhood order
    std::vector<Vector> weights;  // softmax of sims
    Matrix agg;
    Matrix pre;  // agg * W, pre-activation
};

struct StackCache {
    std::vector<LayerCache> layers;
    Matrix h_out;
};

StackCache forward_stack(const Matrix& features, const std::vector<Matrix>& weights,
                         const std::vector<std::vector<int>>& nbrs) {
    const int n = static_cast<int>(features.rows());
    StackCache cache;
    Matrix h = features;
    for (const Matrix& w : weights) {
        LayerCache layer;
        layer.h_in = h;
        layer.sims.resize(n);
        layer.weights.resize(n);
        layer.agg = Matrix::Zero(n, h.cols());
        for (int u = 0; u < n; ++u) {
            const auto& nb = nbrs[u];
            Vector sims(nb.size());
            for (std::size_t k = 0; k < nb.size(); ++k) {
                sims(static_cast<Eigen::Index>(k)) = cosine_or_zero(h.row(u), h.row(nb[k]));
            }
            Vector wts = softmax(sims);
            for (std::size_t k = 0; k < nb.size(); ++k) {
                layer.agg.row(u) += wts(static_cast<Eigen::Index>(k)) * h.row(nb[k]);
            }
            layer.sims[u] = std::move(sims);
            layer.weights[u] = std::move(wts);
        }
        layer.pre = layer.agg * w;
        h = layer.pre.cwiseMax(0.0);
        cache.layers.push_back(std::move(layer));
    }
    cache.h_out = h;
    return cache;
}

// Backpropagates dH through the stack, accumulating layer weight gradients.
// Gradients flow through the aggregation weights (softmax of cosines) as well
// as the direct weighted-sum path.
void backward_stack(const std::vector<Matrix>& weights,
                    const std::vector<std::vector<int>>& nbrs, const StackCache& cache,
                    Matrix dH, std::vector<Matrix>& grad_w) {
    const int layer_count = static_cast<int>(weights.size());
    grad_w.resize(layer_count);
    for (int l = layer_count - 1; l >= 0; --l) {
        const LayerCache& layer = cache.layers[l];
        const Matrix dPre =
            dH.cwiseProduct((layer.pre.array() > 0.0).cast<double>().matrix());
        grad_w[l] = layer.agg.transpose() * dPre;
        const Matrix dAgg = dPre * weights[l].transpose();

        const Matrix& h = layer.h_in;
        Matrix dHin = Matrix::Zero(h.rows(), h.cols());
        for (int u = 0; u < static_cast<int>(h.rows()); ++u) {
            const auto& nb = nbrs[u];
            const Vector& wts = layer.weights[u];
            const Vector& sims = layer.sims[u];

            Vector de(nb.size());
            for (std::size_t k = 0; k < nb.size(); ++k) {
                const auto ki = static_cast<Eigen::Index>(k);
                de(ki) = dAgg.row(u).dot(h.row(nb[k]));
                dHin.row(nb[k]) += wts(ki) * dAgg.row(u);
            }
            const double mixed = wts.dot(de);
            const Vector ds = wts.cwiseProduct((de.array() - mixed).matrix());

            const Eigen::RowVectorXd a = h.row(u);
            const double na = a.norm();
            if (na == 0.0) {
                continue;  // zero-norm center: similarity fixed at 0
            }
            for (std::size_t k = 0; k < nb.size(); ++k) {
                const auto ki = static_cast<Eigen::Index>(k);
                const Eigen::RowVectorXd b = h.row(nb[k]);
                const double nbn = b.norm();
                if (nbn == 0.0 || ds(ki) == 0.0) {
                    continue;
                }
                const double s = sims(ki);
                dHin.row(u) += ds(ki) * (b / (na * nbn) - s * a / (na * na));
                dHin.row(nb[k]) += ds(ki) * (a / (na * nbn) - s * b / (nbn * nbn));
            }
        }
        dH = std::move(dHin);
    }
}

Matrix random_init(int rows, int cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = dist(rng);
        }
    }
    return m;
}

const std::vector<Matrix>& stack_weights(const GnnParams& p, Modality m) {
    return m == Modality::Visual ? p.w_vis : p.w_txt;
}

Matrix cosine_distance_cost(const Matrix& projected, const Matrix& txt) {
    Matrix cost(projected.rows(), txt.rows());
    for (Eigen::Index i = 0; i < projected.rows(); ++i) {
        for (Eigen::Index j = 0; j < txt.rows(); ++j) {
            cost(i, j) = std::max(0.0, 1.0 - cosine_or_zero(projected.row(i), txt.row(j)));
        }
    }
    return cost;
}

Matrix pairwise_distances(const Matrix& rows) {
    const Eigen::Index n = rows.rows();
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            d(i, j) = d(j, i) = (rows.row(i) - rows.row(j)).norm();
        }
    }
    return d;
}

}  // namespace

GnnParams init_gnn_params(int d_v, int d_t, const GnnConfig& cfg, int num_classes,
                          std::uint64_t seed) {
    if (cfg.layers < 1 || cfg.hidden < 1 || num_classes < 1) {
        throw InputError("init_gnn_params: invalid dimensions");
    }
    std::mt19937_64 rng(seed);
    GnnParams p;
    auto build_stack = [&](int d_in) {
        std::vector<Matrix> stack;
        int in = d_in;
        for (int l = 0; l < cfg.layers; ++l) {
            stack.push_back(random_init(in, cfg.hidden, std::sqrt(2.0 / in), rng));
            in = cfg.hidden;
        }
        return stack;
    };
    p.w_vis = build_stack(d_v);
    p.w_txt = build_stack(d_t);
    const int fused = 2 * cfg.hidden;
    p.classifier_w =
        random_init(fused, num_classes, std::sqrt(2.0 / (fused + num_classes)), rng);
    p.classifier_b = Vector::Zero(num_classes);
    p.ot_projection =
        random_init(cfg.hidden, cfg.hidden, std::sqrt(1.0 / cfg.hidden), rng);
    return p;
}

Vector correlation_weights(const Matrix& h_prev, int node, std::span<const int> neighbors) {
    if (neighbors.empty()) {
        throw InputError("correlation_weights: empty neighbor list");
    }
    if (node < 0 || node >= h_prev.rows()) {
        throw InputError("correlation_weights: node index out of range");
    }
    Vector sims(static_cast<Eigen::Index>(neighbors.size()));
    for (std::size_t k = 0; k < neighbors.size(); ++k) {
        const int v = neighbors[k];
        if (v < 0 || v >= h_prev.rows()) {
            throw InputError("correlation_weights: neighbor index out of range");
        }
        sims(static_cast<Eigen::Index>(k)) = cosine_or_zero(h_prev.row(node), h_prev.row(v));
    }
    return softmax(sims);
}

Matrix gnn_forward(const MultimodalGraph& g, const GnnParams& p, Modality modality) {
    const Matrix& features =
        modality == Modality::Visual ? g.features_vis : g.features_txt;
    const auto& weights = stack_weights(p, modality);
    if (weights.empty()) {
        throw InputError("gnn_forward: uninitialized parameters");
    }
    if (features.cols() != weights.front().rows()) {
        throw InputError("gnn_forward: feature width does not match layer weights");
    }
    return forward_stack(features, weights, neighborhoods_with_self(g)).h_out;
}

TransportPlan compute_transport_plan(const MultimodalGraph& g, const GnnParams& p,
                                     const GnnConfig& cfg) {
    const Matrix hv = gnn_forward(g, p, Modality::Visual);
    const Matrix ht = gnn_forward(g, p, Modality::Textual);
    OtProblem problem;
    problem.cost = cosine_distance_cost(hv * p.ot_projection, ht);
    problem.structure_vis = pairwise_distances(hv);
    problem.structure_txt = pairwise_distances(ht);
    problem.lambda1 = cfg.lambda1;
    problem.epsilon = cfg.epsilon;
    problem.marginal_src = uniform_marginal(g.num_nodes);
    problem.marginal_tgt = uniform_marginal(g.num_nodes);
    return fused_ot_solve(problem, cfg.ot_max_outer, cfg.ot_max_sinkhorn, cfg.ot_tol);
}

Matrix fused_embeddings(const MultimodalGraph& g, const GnnParams& p,
                        const GnnConfig& cfg, const TransportPlan* plan) {
    TransportPlan local;
    if (plan == nullptr) {
        local = compute_transport_plan(g, p, cfg);
        plan = &local;
    }
    const Matrix hv = gnn_forward(g, p, Modality::Visual);
    const Matrix ht = gnn_forward(g, p, Modality::Textual);
    return concat_fuse(apply_plan(*plan, hv), ht);
}

Matrix fuse_and_classify(const MultimodalGraph& g, const GnnParams& p,
                         const GnnConfig& cfg) {
    const Matrix fused = fused_embeddings(g, p, cfg);
    Matrix logits = (fused * p.classifier_w).rowwise() + p.classifier_b.transpose();
    logits = logits.array().tanh();
    Matrix probs(logits.rows(), logits.cols());
    for (Eigen::Index u = 0; u < logits.rows(); ++u) {
        probs.row(u) = softmax(logits.row(u).transpose()).transpose();
    }
    return probs;
}

double gnn_loss_and_gradients(const MultimodalGraph& g, const GnnParams& p,
                              const GnnConfig& cfg, const TransportPlan& plan,
                              GnnGradients* grads) {
    const auto nbrs = neighborhoods_with_self(g);
    const int n = g.num_nodes;
    const int num_classes = static_cast<int>(p.classifier_w.cols());
    for (int label : g.labels) {
        if (label >= num_classes) {
            throw InputError("gnn_loss_and_gradients: label exceeds classifier width");
        }
    }

    const StackCache cache_v = forward_stack(g.features_vis, p.w_vis, nbrs);
    const StackCache cache_t = forward_stack(g.features_txt, p.w_txt, nbrs);
    const Matrix& hv = cache_v.h_out;
    const Matrix& ht = cache_t.h_out;

    const Vector col_mass = plan.plan.colwise().sum().transpose();
    const Matrix projected = apply_plan(plan, hv);
    const Matrix fused = concat_fuse(projected, ht);

    Matrix z = (fused * p.classifier_w).rowwise() + p.classifier_b.transpose();
    const Matrix logits = z.array().tanh();
    Matrix probs(n, num_classes);
    for (int u = 0; u < n; ++u) {
        probs.row(u) = softmax(logits.row(u).transpose()).transpose();
    }

    double ce = 0.0;
    for (int u = 0; u < n; ++u) {
        ce -= std::log(std::max(probs(u, g.labels[u]), 1e-300));
    }
    ce /= n;

    const Matrix align_gap = hv * p.ot_projection - ht;
    const double aux = cfg.align_weight * align_gap.squaredNorm() / n;
    const double loss = ce + aux;

    if (grads == nullptr) {
        return loss;
    }

    Matrix dlogits = probs;
    for (int u = 0; u < n; ++u) {
        dlogits(u, g.labels[u]) -= 1.0;
    }
    dlogits /= n;
    const Matrix dz = dlogits.cwiseProduct((1.0 - logits.array().square()).matrix());

    grads->classifier_w = fused.transpose() * dz;
    grads->classifier_b = dz.colwise().sum().transpose();
    const Matrix dfused = dz * p.classifier_w.transpose();

    const Eigen::Index h_cols = hv.cols();
    const Matrix dprojected = dfused.leftCols(h_cols);
    Matrix dht = dfused.rightCols(ht.cols());

    // projected = diag(1/col_mass) plan^T hv, plan held constant.
    Matrix dhv = plan.plan * (dprojected.array().colwise() / col_mass.array()).matrix();

    const double aux_scale = 2.0 * cfg.align_weight / n;
    dhv.noalias() += aux_scale * align_gap * p.ot_projection.transpose();
    dht.noalias() -= aux_scale * align_gap;
    grads->ot_projection = aux_scale * hv.transpose() * align_gap;

    backward_stack(p.w_vis, nbrs, cache_v, std::move(dhv), grads->w_vis);
    backward_stack(p.w_txt, nbrs, cache_t, std::move(dht), grads->w_txt);
    return loss;
}

GnnTrainResult train_base(const MultimodalGraph& g, GnnParams& p, const GnnConfig& cfg,
                          int epochs, double lr, double momentum) {
    if (p.frozen) {
        throw ProtocolError("train_base: parameters already frozen");
    }
    if (epochs < 0 || lr < 0.0) {
        throw InputError("train_base: invalid epochs or learning rate");
    }

    GnnGradients vel;
    vel.w_vis.assign(p.w_vis.size(), Matrix());
    vel.w_txt.assign(p.w_txt.size(), Matrix());
    for (std::size_t l = 0; l < p.w_vis.size(); ++l) {
        vel.w_vis[l] = Matrix::Zero(p.w_vis[l].rows(), p.w_vis[l].cols());
    }
    for (std::size_t l = 0; l < p.w_txt.size(); ++l) {
        vel.w_txt[l] = Matrix::Zero(p.w_txt[l].rows(), p.w_txt[l].cols());
    }
    vel.classifier_w = Matrix::Zero(p.classifier_w.rows(), p.classifier_w.cols());
    vel.classifier_b = Vector::Zero(p.classifier_b.size());
    vel.ot_projection = Matrix::Zero(p.ot_projection.rows(), p.ot_projection.cols());

    GnnTrainResult result;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        const TransportPlan plan = compute_transport_plan(g, p, cfg);
        GnnGradients grads;
        const double loss = gnn_loss_and_gradients(g, p, cfg, plan, &grads);
        if (!std::isfinite(loss)) {
            throw NumericError("train_base: non-finite loss at epoch " +
                               std::to_string(epoch));
        }
        result.loss_history.push_back(loss);

        auto step = [&](Matrix& param, Matrix& v, const Matrix& grad) {
            v = momentum * v - lr * grad;
            param += v;
        };
        for (std::size_t l = 0; l < p.w_vis.size(); ++l) {
            step(p.w_vis[l], vel.w_vis[l], grads.w_vis[l]);
        }
        for (std::size_t l = 0; l < p.w_txt.size(); ++l) {
            step(p.w_txt[l], vel.w_txt[l], grads.w_txt[l]);
        }
        step(p.classifier_w, vel.classifier_w, grads.classifier_w);
        step(p.ot_projection, vel.ot_projection, grads.ot_projection);
        vel.classifier_b = momentum * vel.classifier_b - lr * grads.classifier_b;
        p.classifier_b += vel.classifier_b;
    }
    p.frozen = true;
    return result;
}

}  // namespace mcigle
