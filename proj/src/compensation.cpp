#include "mcigle/compensation.hpp"

#include <cmath>
#include <random>

namespace mcigle {

namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double comp_activation_value(CompActivation act, double x) {
    if (act == CompActivation::Tanh) {
        return std::tanh(x);
    }
    return x * std::tanh(softplus(x));
}

double comp_activation_grad(CompActivation act, double x) {
    if (act == CompActivation::Tanh) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    }
    const double t = std::tanh(softplus(x));
    const double sig = 1.0 / (1.0 + std::exp(-x));
    return t + x * (1.0 - t * t) * sig;
}

// 1-D convolution over each feature row, zero-padded to keep the length;
// output is flattened channel-major: [channel0 positions..., channel1 ...].
Matrix conv_flatten(const Matrix& kernels, const Matrix& x) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    const Eigen::Index channels = kernels.rows();
    const Eigen::Index width = kernels.cols();
    const Eigen::Index half = width / 2;
    Matrix flat = Matrix::Zero(n, channels * d);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < channels; ++c) {
            for (Eigen::Index i = 0; i < d; ++i) {
                double acc = 0.0;
                for (Eigen::Index t = 0; t < width; ++t) {
                    const Eigen::Index src = i + t - half;
                    if (src >= 0 && src < d) {
                        acc += kernels(c, t) * x(r, src);
                    }
                }
                flat(r, c * d + i) = acc;
            }
        }
    }
    return flat;
}

// Adjoint of conv_flatten with respect to the kernels.
Matrix conv_kernel_grad(const Matrix& dflat, const Matrix& x, Eigen::Index channels,
                        Eigen::Index width) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    const Eigen::Index half = width / 2;
    Matrix grad = Matrix::Zero(channels, width);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < channels; ++c) {
            for (Eigen::Index i = 0; i < d; ++i) {
                const double g = dflat(r, c * d + i);
                if (g == 0.0) {
                    continue;
                }
                for (Eigen::Index t = 0; t < width; ++t) {
                    const Eigen::Index src = i + t - half;
                    if (src >= 0 && src < d) {
                        grad(c, t) += g * x(r, src);
                    }
                }
            }
        }
    }
    return grad;
}

}  // namespace

CompensationEmbed init_compensation_embed(int d_in, int d_c, CompActivation activation,
                                          std::uint64_t seed) {
    if (d_in < 1 || d_c < 1) {
        throw InputError("init_compensation_embed: invalid dimensions");
    }
    std::mt19937_64 rng(seed);
    CompensationEmbed embed;
    embed.activation = activation;
    std::normal_distribution<double> kdist(0.0, std::sqrt(1.0 / kCompConvWidth));
    embed.conv_kernels = Matrix(kCompConvChannels, kCompConvWidth);
    for (int c = 0; c < kCompConvChannels; ++c) {
        for (int t = 0; t < kCompConvWidth; ++t) {
            embed.conv_kernels(c, t) = kdist(rng);
        }
    }
    const int flat_dim = kCompConvChannels * d_in;
    std::normal_distribution<double> bdist(0.0, std::sqrt(1.0 / flat_dim));
    embed.buffer_proj = Matrix(flat_dim, d_c);
    for (int i = 0; i < flat_dim; ++i) {
        for (int j = 0; j < d_c; ++j) {
            embed.buffer_proj(i, j) = bdist(rng);
        }
    }
    return embed;
}

Matrix compensation_embed(const CompensationEmbed& embed, const Matrix& x_raw) {
    const Eigen::Index d = embed.buffer_proj.rows() / embed.conv_kernels.rows();
    if (x_raw.cols() != d) {
        throw InputError("compensation_embed: input width mismatch");
    }
    require_finite(x_raw, "compensation_embed: input");
    const Matrix flat = conv_flatten(embed.conv_kernels, x_raw);
    Matrix pre = flat * embed.buffer_proj;
    for (Eigen::Index i = 0; i < pre.rows(); ++i) {
        for (Eigen::Index j = 0; j < pre.cols(); ++j) {
            pre(i, j) = comp_activation_value(embed.activation, pre(i, j));
        }
    }
    return pre;
}

CompEmbedTrainResult train_compensation_embed(CompensationEmbed& embed, const Matrix& x,
                                              const Matrix& y_onehot, double gamma,
                                              int epochs, double lr) {
    if (embed.frozen) {
        throw ProtocolError("train_compensation_embed: embedding already frozen");
    }
    if (x.rows() != y_onehot.rows()) {
        throw InputError("train_compensation_embed: sample count mismatch");
    }
    const Eigen::Index n = x.rows();
    CompEmbedTrainResult result;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        const Matrix flat = conv_flatten(embed.conv_kernels, x);
        const Matrix pre = flat * embed.buffer_proj;
        Matrix xc(pre.rows(), pre.cols());
        Matrix dxc_dpre(pre.rows(), pre.cols());
        for (Eigen::Index i = 0; i < pre.rows(); ++i) {
            for (Eigen::Index j = 0; j < pre.cols(); ++j) {
                xc(i, j) = comp_activation_value(embed.activation, pre(i, j));
                dxc_dpre(i, j) = comp_activation_grad(embed.activation, pre(i, j));
            }
        }

        // Inner head solved in closed form; kernels take the gradient step.
        const Matrix w = ridge_solve(xc, y_onehot, gamma);
        const Matrix err = xc * w - y_onehot;
        const double loss = (err.squaredNorm() + gamma * w.squaredNorm()) / n;
        if (!std::isfinite(loss)) {
            throw NumericError("train_compensation_embed: non-finite loss at epoch " +
                               std::to_string(epoch));
        }
        result.loss_history.push_back(loss);

        const Matrix dxc = (2.0 / n) * err * w.transpose();
        const Matrix dpre = dxc.cwiseProduct(dxc_dpre);
        const Matrix dflat = dpre * embed.buffer_proj.transpose();
        const Matrix dk = conv_kernel_grad(dflat, x, embed.conv_kernels.rows(),
                                           embed.conv_kernels.cols());
        embed.conv_kernels -= lr * dk;
    }
    embed.frozen = true;
    return result;
}

CompensationState init_compensation(CompensationEmbed embed, int d_c, double gamma,
                                    double beta, double lambda2) {
    if (lambda2 < 0.0 || lambda2 > 1.0) {
        throw InputError("init_compensation: lambda2 outside [0,1]");
    }
    if (embed.buffer_proj.cols() != d_c) {
        throw InputError("init_compensation: embedding output width mismatch");
    }
    CompensationState state;
    state.embed = std::move(embed);
    state.core = analytic_init(d_c, gamma, beta);
    state.lambda2 = lambda2;
    return state;
}

void expand_compensation(CompensationState& state, int new_class_count) {
    expand_labels(state.core, new_class_count);
}

ResidualTarget residual_matrix(const AnalyticState& mainstream, const Matrix& x_m,
                               const Matrix& y_padded) {
    if (y_padded.cols() != mainstream.seen_classes) {
        throw InputError("residual_matrix: target width does not match mainstream classes");
    }
    ResidualTarget target;
    target.old_width = mainstream.classes_before_phase;
    target.matrix = y_padded - predict_mainstream(mainstream, x_m);
    // Previous-label cleansing: old-class columns are exactly zero.
    target.matrix.leftCols(target.old_width).setZero();
    return target;
}

void compensation_update(CompensationState& state, const Matrix& x_c,
                         const ResidualTarget& target, UpdateMode mode) {
    if (target.matrix.cols() != state.core.seen_classes) {
        throw InputError("compensation_update: state not expanded for the target width");
    }
    phase_update_padded(state.core, x_c, target.matrix, mode);
}

Matrix predict_compensation(const CompensationState& state, const Matrix& x_raw) {
    return compensation_embed(state.embed, x_raw) * state.core.weights;
}

Matrix predict_combined(const AnalyticState& mainstream, const CompensationState& comp,
                        const Matrix& x_raw) {
    if (mainstream.seen_classes != comp.core.seen_classes) {
        throw ProtocolError("predict_combined: streams disagree on class count");
    }
    const Matrix main_scores = predict_mainstream(mainstream, x_raw);
    const Matrix comp_scores = predict_compensation(comp, x_raw);
    return comp.lambda2 * main_scores + (1.0 - comp.lambda2) * comp_scores;
}

}  // namespace mcigle
