#include "mcigle/fan.hpp"

#include <cmath>
#include <random>

#include "mcigle/checkpoint.hpp"

namespace mcigle {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

double activation_value(FanActivation act, double x) {
    if (act == FanActivation::Relu) {
        return x > 0.0 ? x : 0.0;
    }
    return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double activation_grad(FanActivation act, double x) {
    if (act == FanActivation::Relu) {
        return x > 0.0 ? 1.0 : 0.0;
    }
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Matrix normalize_input(const FanStack& stack, const Matrix& x) {
    if (stack.norm_mean.size() == 0) {
        throw InputError("fan_forward: normalization statistics not set");
    }
    if (x.cols() != stack.norm_mean.size()) {
        throw InputError("fan_forward: input width does not match normalization stats");
    }
    Matrix normed = x;
    normed.rowwise() -= stack.norm_mean.transpose();
    normed.array().rowwise() /= stack.norm_std.transpose().array();
    return normed;
}

struct FanLayerCache {
    Matrix x_in;
    Matrix zp;  // x W_p
    Matrix zb;  // x W_pbar + b
    Matrix out;
};

FanLayerCache layer_forward(const FanLayerParams& layer, const Matrix& x) {
    if (x.cols() != layer.w_pbar.rows()) {
        throw InputError("fan_forward: input width does not match layer");
    }
    FanLayerCache cache;
    cache.x_in = x;
    const Eigen::Index d_p = layer.w_p.cols();
    const Eigen::Index d_pbar = layer.w_pbar.cols();
    cache.zp = x * layer.w_p;
    cache.zb = (x * layer.w_pbar).rowwise() + layer.b_pbar.transpose();
    cache.out.resize(x.rows(), 2 * d_p + d_pbar);
    cache.out.leftCols(d_p) = cache.zp.array().cos();
    cache.out.middleCols(d_p, d_p) = cache.zp.array().sin();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < d_pbar; ++j) {
            cache.out(i, 2 * d_p + j) = activation_value(layer.activation, cache.zb(i, j));
        }
    }
    return cache;
}

Vector softmax_row(const Eigen::RowVectorXd& v) {
    const double mx = v.maxCoeff();
    Vector e = (v.array() - mx).exp().transpose();
    return e / e.sum();
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

}  // namespace

FanLayerDims fan_layer_dims(int width, double p_ratio) {
    if (width < 3 && p_ratio > 0.0) {
        throw InputError("fan_layer_dims: width too small for a periodic branch");
    }
    if (p_ratio < 0.0 || p_ratio >= 1.0) {
        throw InputError("fan_layer_dims: p_ratio must lie in [0, 1)");
    }
    FanLayerDims dims;
    if (p_ratio == 0.0) {
        dims.d_p = 0;
        dims.d_pbar = width;
        return dims;
    }
    dims.d_p = std::max(1, static_cast<int>(std::lround(p_ratio * width / (1.0 + p_ratio))));
    dims.d_p = std::min(dims.d_p, (width - 1) / 2);
    dims.d_pbar = width - 2 * dims.d_p;
    return dims;
}

FanStack init_fan_stack(int d_in, int width, int layer_count, double p_ratio,
                        FanActivation activation, int num_classes, std::uint64_t seed) {
    if (d_in < 1 || layer_count < 1 || num_classes < 1) {
        throw InputError("init_fan_stack: invalid dimensions");
    }
    std::mt19937_64 rng(seed);
    FanStack stack;
    int in = d_in;
    for (int l = 0; l < layer_count; ++l) {
        const FanLayerDims dims = fan_layer_dims(width, p_ratio);
        FanLayerParams layer;
        layer.activation = activation;
        layer.w_p = random_init(in, dims.d_p, std::sqrt(1.0 / in), rng);
        layer.w_pbar = random_init(in, dims.d_pbar, std::sqrt(2.0 / in), rng);
        layer.b_pbar = Vector::Zero(dims.d_pbar);
        stack.layers.push_back(std::move(layer));
        in = width;
    }
    stack.head = random_init(in, num_classes, std::sqrt(1.0 / in), rng);
    stack.norm_mean = Vector();
    stack.norm_std = Vector();
    return stack;
}

Matrix fan_forward(const FanStack& stack, const Matrix& x) {
    Matrix h = normalize_input(stack, x);
    for (const FanLayerParams& layer : stack.layers) {
        h = layer_forward(layer, h).out;
    }
    return h;
}

std::vector<Matrix> fan_forward_all_layers(const FanStack& stack, const Matrix& x) {
    std::vector<Matrix> outputs;
    Matrix h = normalize_input(stack, x);
    for (const FanLayerParams& layer : stack.layers) {
        h = layer_forward(layer, h).out;
        outputs.push_back(h);
    }
    return outputs;
}

Matrix fan_classify(const FanStack& stack, const Matrix& x) {
    if (stack.head.size() == 0) {
        throw ProtocolError("fan_classify: head has been discarded");
    }
    const Matrix feats = fan_forward(stack, x);
    Matrix probs(feats.rows(), stack.head.cols());
    const Matrix logits = feats * stack.head;
    for (Eigen::Index u = 0; u < logits.rows(); ++u) {
        probs.row(u) = softmax_row(logits.row(u)).transpose();
    }
    return probs;
}

double fan_loss_and_gradients(const FanStack& stack, const Matrix& x,
                              const std::vector<int>& labels, FanGradients* grads) {
    if (static_cast<Eigen::Index>(labels.size()) != x.rows()) {
        throw InputError("fan_loss_and_gradients: label count mismatch");
    }
    if (stack.head.size() == 0) {
        throw ProtocolError("fan_loss_and_gradients: head has been discarded");
    }
    const int n = static_cast<int>(x.rows());
    const int num_classes = static_cast<int>(stack.head.cols());
    for (int label : labels) {
        if (label < 0 || label >= num_classes) {
            throw InputError("fan_loss_and_gradients: label out of range");
        }
    }

    std::vector<FanLayerCache> caches;
    Matrix h = normalize_input(stack, x);
    for (const FanLayerParams& layer : stack.layers) {
        caches.push_back(layer_forward(layer, h));
        h = caches.back().out;
    }

    const Matrix logits = h * stack.head;
    Matrix probs(n, num_classes);
    for (int u = 0; u < n; ++u) {
        probs.row(u) = softmax_row(logits.row(u)).transpose();
    }
    double loss = 0.0;
    for (int u = 0; u < n; ++u) {
        loss -= std::log(std::max(probs(u, labels[u]), 1e-300));
    }
    loss /= n;

    if (grads == nullptr) {
        return loss;
    }

    Matrix dlogits = probs;
    for (int u = 0; u < n; ++u) {
        dlogits(u, labels[u]) -= 1.0;
    }
    dlogits /= n;

    grads->head = h.transpose() * dlogits;
    Matrix dh = dlogits * stack.head.transpose();

    grads->layers.resize(stack.layers.size());
    for (int l = static_cast<int>(stack.layers.size()) - 1; l >= 0; --l) {
        const FanLayerParams& layer = stack.layers[l];
        const FanLayerCache& cache = caches[l];
        const Eigen::Index d_p = layer.w_p.cols();
        const Eigen::Index d_pbar = layer.w_pbar.cols();

        const Matrix dcos = dh.leftCols(d_p);
        const Matrix dsin = dh.middleCols(d_p, d_p);
        const Matrix dact = dh.rightCols(d_pbar);

        const Matrix dzp = dsin.cwiseProduct(cache.zp.array().cos().matrix()) -
                           dcos.cwiseProduct(cache.zp.array().sin().matrix());
        Matrix dzb(dact.rows(), d_pbar);
        for (Eigen::Index i = 0; i < dzb.rows(); ++i) {
            for (Eigen::Index j = 0; j < d_pbar; ++j) {
                dzb(i, j) = dact(i, j) * activation_grad(layer.activation, cache.zb(i, j));
            }
        }

        FanLayerParams& g = grads->layers[l];
        g.activation = layer.activation;
        g.w_p = cache.x_in.transpose() * dzp;
        g.w_pbar = cache.x_in.transpose() * dzb;
        g.b_pbar = dzb.colwise().sum().transpose();
        dh = dzp * layer.w_p.transpose() + dzb * layer.w_pbar.transpose();
    }
    return loss;
}

FanTrainResult train_fan(FanStack& stack, const Matrix& x, const std::vector<int>& labels,
                         int epochs, const AdamWConfig& opt) {
    if (stack.frozen) {
        throw ProtocolError("train_fan: stack already frozen");
    }
    if (epochs < 0) {
        throw InputError("train_fan: negative epoch count");
    }

    // Base-phase normalization statistics; fixed for the rest of the run.
    stack.norm_mean = x.colwise().mean().transpose();
    Vector var = ((x.rowwise() - stack.norm_mean.transpose()).array().square())
                     .colwise()
                     .mean()
                     .transpose();
    stack.norm_std = var.array().sqrt().max(0.0).matrix();
    for (Eigen::Index j = 0; j < stack.norm_std.size(); ++j) {
        if (stack.norm_std(j) < 1e-12) {
            stack.norm_std(j) = 1.0;
        }
    }

    struct Moments {
        Matrix m, v;
    };
    auto zero_like = [](const Matrix& p) { return Moments{Matrix::Zero(p.rows(), p.cols()), Matrix::Zero(p.rows(), p.cols())}; };
    std::vector<std::array<Moments, 3>> layer_moments;
    for (const FanLayerParams& layer : stack.layers) {
        layer_moments.push_back({zero_like(layer.w_p), zero_like(layer.w_pbar),
                                 Moments{Matrix::Zero(layer.b_pbar.size(), 1),
                                         Matrix::Zero(layer.b_pbar.size(), 1)}});
    }
    Moments head_moments = zero_like(stack.head);

    int t = 0;
    auto adamw_step = [&](Matrix& param, Moments& mom, const Matrix& grad) {
        mom.m = opt.beta1 * mom.m + (1.0 - opt.beta1) * grad;
        mom.v = opt.beta2 * mom.v.array().matrix() +
                (1.0 - opt.beta2) * grad.cwiseProduct(grad);
        const double bc1 = 1.0 - std::pow(opt.beta1, t);
        const double bc2 = 1.0 - std::pow(opt.beta2, t);
        param.array() -= opt.lr * ((mom.m.array() / bc1) /
                                       ((mom.v.array() / bc2).sqrt() + opt.eps) +
                                   opt.weight_decay * param.array());
    };

    FanTrainResult result;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        FanGradients grads;
        const double loss = fan_loss_and_gradients(stack, x, labels, &grads);
        if (!std::isfinite(loss)) {
            throw NumericError("train_fan: non-finite loss at epoch " + std::to_string(epoch));
        }
        result.loss_history.push_back(loss);
        ++t;
        for (std::size_t l = 0; l < stack.layers.size(); ++l) {
            adamw_step(stack.layers[l].w_p, layer_moments[l][0], grads.layers[l].w_p);
            adamw_step(stack.layers[l].w_pbar, layer_moments[l][1], grads.layers[l].w_pbar);
            Matrix b = stack.layers[l].b_pbar;
            adamw_step(b, layer_moments[l][2], Matrix(grads.layers[l].b_pbar));
            stack.layers[l].b_pbar = b;
        }
        adamw_step(stack.head, head_moments, grads.head);
    }

    const Matrix probs = fan_classify(stack, x);
    int correct = 0;
    for (Eigen::Index u = 0; u < probs.rows(); ++u) {
        Eigen::Index arg;
        probs.row(u).maxCoeff(&arg);
        if (static_cast<int>(arg) == labels[u]) {
            ++correct;
        }
    }
    result.final_train_accuracy = static_cast<double>(correct) / probs.rows();

    stack.frozen = true;
    stack.head.resize(0, 0);  // features, not logits, feed the analytic streams
    return result;
}

void save_fan_stack(const std::filesystem::path& path, const FanStack& stack) {
    NamedMatrices tensors;
    tensors.emplace_back("meta.layer_count", scalar_tensor(static_cast<double>(stack.layers.size())));
    tensors.emplace_back("meta.frozen", scalar_tensor(stack.frozen ? 1.0 : 0.0));
    tensors.emplace_back("norm.mean", Matrix(stack.norm_mean.transpose()));
    tensors.emplace_back("norm.std", Matrix(stack.norm_std.transpose()));
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        const std::string prefix = "layer" + std::to_string(l);
        const FanLayerParams& layer = stack.layers[l];
        tensors.emplace_back(prefix + ".w_p", layer.w_p);
        tensors.emplace_back(prefix + ".w_pbar", layer.w_pbar);
        tensors.emplace_back(prefix + ".b_pbar", Matrix(layer.b_pbar.transpose()));
        tensors.emplace_back(prefix + ".activation",
                             scalar_tensor(layer.activation == FanActivation::Gelu ? 0.0 : 1.0));
    }
    tensors.emplace_back("head", stack.head);
    save_tensor_file(path, tensors);
}

FanStack load_fan_stack(const std::filesystem::path& path) {
    const NamedMatrices tensors = load_tensor_file(path);
    FanStack stack;
    const int layer_count = static_cast<int>(tensor_scalar(tensors, "meta.layer_count"));
    stack.frozen = tensor_scalar(tensors, "meta.frozen") != 0.0;
    stack.norm_mean = find_tensor(tensors, "norm.mean").row(0).transpose();
    stack.norm_std = find_tensor(tensors, "norm.std").row(0).transpose();
    for (int l = 0; l < layer_count; ++l) {
        const std::string prefix = "layer" + std::to_string(l);
        FanLayerParams layer;
        layer.w_p = find_tensor(tensors, prefix + ".w_p");
        layer.w_pbar = find_tensor(tensors, prefix + ".w_pbar");
        layer.b_pbar = find_tensor(tensors, prefix + ".b_pbar").row(0).transpose();
        layer.activation = tensor_scalar(tensors, prefix + ".activation") == 0.0
                               ? FanActivation::Gelu
                               : FanActivation::Relu;
        stack.layers.push_back(std::move(layer));
    }
    stack.head = find_tensor(tensors, "head");
    return stack;
}

}  // namespace mcigle
