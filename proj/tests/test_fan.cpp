#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "mcigle/fan.hpp"
#include "test_util.hpp"

using namespace mcigle;
using namespace mcigle::testutil;

namespace {

void identity_stats(FanStack& stack, int d_in) {
    stack.norm_mean = Vector::Zero(d_in);
    stack.norm_std = Vector::Ones(d_in);
}

// Naive second implementation of the layer map, used as the evaluation oracle.
Matrix reference_fan(const FanStack& stack, const Matrix& x) {
    Matrix h = x;
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
        for (Eigen::Index i = 0; i < h.rows(); ++i) {
            h(i, j) = (h(i, j) - stack.norm_mean(j)) / stack.norm_std(j);
        }
    }
    for (const FanLayerParams& layer : stack.layers) {
        const Eigen::Index d_p = layer.w_p.cols();
        const Eigen::Index d_pb = layer.w_pbar.cols();
        Matrix out(h.rows(), 2 * d_p + d_pb);
        for (Eigen::Index r = 0; r < h.rows(); ++r) {
            for (Eigen::Index c = 0; c < d_p; ++c) {
                double z = 0.0;
                for (Eigen::Index k = 0; k < h.cols(); ++k) {
                    z += h(r, k) * layer.w_p(k, c);
                }
                out(r, c) = std::cos(z);
                out(r, d_p + c) = std::sin(z);
            }
            for (Eigen::Index c = 0; c < d_pb; ++c) {
                double z = layer.b_pbar(c);
                for (Eigen::Index k = 0; k < h.cols(); ++k) {
                    z += h(r, k) * layer.w_pbar(k, c);
                }
                if (layer.activation == FanActivation::Relu) {
                    out(r, 2 * d_p + c) = z > 0.0 ? z : 0.0;
                } else {
                    out(r, 2 * d_p + c) = 0.5 * z * (1.0 + std::erf(z / std::numbers::sqrt2));
                }
            }
        }
        h = out;
    }
    return h;
}

int count_params(const FanStack& stack) {
    int total = 0;
    for (const FanLayerParams& layer : stack.layers) {
        total += static_cast<int>(layer.w_p.size() + layer.w_pbar.size() +
                                  layer.b_pbar.size());
    }
    total += static_cast<int>(stack.head.size());
    return total;
}

// Binary task whose decision boundary is the sign of a sinusoid over the
// first coordinate; several full periods make it hard for a small
// piecewise-linear stack under a fixed budget.
void periodic_task(int n, std::uint64_t seed, Matrix& x, std::vector<int>& labels) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(0.0, 12.0 * std::numbers::pi);
    std::normal_distribution<double> unit(0.0, 1.0);
    x = Matrix(n, 4);
    labels.assign(n, 0);
    for (int i = 0; i < n; ++i) {
        double u = pos(rng);
        while (std::abs(std::sin(u)) < 0.05) {
            u = pos(rng);  // keep a margin around the decision boundary
        }
        x(i, 0) = u;
        for (int j = 1; j < 4; ++j) {
            x(i, j) = unit(rng);
        }
        labels[i] = std::sin(u) > 0.0 ? 1 : 0;
    }
}

}  // namespace

TEST_CASE("fan_layer_dims respects the p-ratio within rounding") {
    const FanLayerDims dims = fan_layer_dims(64, 0.25);
    CHECK(2 * dims.d_p + dims.d_pbar == 64);
    const double ratio = static_cast<double>(dims.d_p) / (dims.d_p + dims.d_pbar);
    CHECK(std::abs(ratio - 0.25) < 1.0 / (dims.d_p + dims.d_pbar));

    const FanLayerDims plain = fan_layer_dims(32, 0.0);
    CHECK(plain.d_p == 0);
    CHECK(plain.d_pbar == 32);

    CHECK_THROWS_AS(fan_layer_dims(2, 0.5), InputError);
    CHECK_THROWS_AS(fan_layer_dims(8, 1.0), InputError);
}

TEST_CASE("zero parameters give the [1|0|0] pattern") {
    FanStack stack;
    FanLayerParams layer;
    layer.activation = FanActivation::Relu;
    layer.w_p = Matrix::Zero(3, 2);
    layer.w_pbar = Matrix::Zero(3, 2);
    layer.b_pbar = Vector::Zero(2);
    stack.layers.push_back(layer);
    identity_stats(stack, 3);

    std::mt19937_64 rng(5);
    const Matrix out = fan_forward(stack, random_matrix(4, 3, rng));
    for (int i = 0; i < 4; ++i) {
        CHECK(out(i, 0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(out(i, 1) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(out(i, 2) == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(out(i, 3) == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(out(i, 4) == doctest::Approx(0.0).epsilon(1e-15));
        CHECK(out(i, 5) == doctest::Approx(0.0).epsilon(1e-15));
    }
}

TEST_CASE("periodicity at two pi on integer inputs") {
    FanStack stack;
    FanLayerParams layer;
    layer.w_p = Matrix(1, 1);
    layer.w_p << 2.0 * std::numbers::pi;
    layer.w_pbar = Matrix::Zero(1, 1);
    layer.b_pbar = Vector::Zero(1);
    stack.layers.push_back(layer);
    identity_stats(stack, 1);

    Matrix x(4, 1);
    x << -2.0, 0.0, 1.0, 5.0;
    const Matrix out = fan_forward(stack, x);
    for (int i = 0; i < 4; ++i) {
        CHECK(std::abs(out(i, 0) - 1.0) < 1e-12);  // cos(2 pi k)
        CHECK(std::abs(out(i, 1)) < 1e-12);        // sin(2 pi k)
    }
}

TEST_CASE("periodic block is invariant to two-pi shifts of the projection") {
    FanStack stack;
    FanLayerParams layer;
    layer.w_p = Matrix(1, 2);
    layer.w_p << 1.0, 2.0;
    std::mt19937_64 rng(31);
    layer.w_pbar = random_matrix(1, 3, rng);
    layer.b_pbar = Vector::Zero(3);
    stack.layers.push_back(layer);
    identity_stats(stack, 1);

    Matrix x(3, 1);
    x << 0.3, -1.7, 2.9;
    Matrix shifted = x.array() + 2.0 * std::numbers::pi;  // w_p maps it to 2pi,4pi

    const Matrix a = fan_forward(stack, x);
    const Matrix b = fan_forward(stack, shifted);
    CHECK(max_abs_diff(a.leftCols(4), b.leftCols(4)) < 1e-9);
}

TEST_CASE("cos/sin unit pairs lie on the unit circle at every layer") {
    FanStack stack = init_fan_stack(5, 12, 3, 0.3, FanActivation::Gelu, 2, 77);
    identity_stats(stack, 5);
    std::mt19937_64 rng(8);
    const auto outputs = fan_forward_all_layers(stack, random_matrix(6, 5, rng));
    REQUIRE(outputs.size() == 3);
    for (std::size_t l = 0; l < outputs.size(); ++l) {
        const Eigen::Index d_p = stack.layers[l].w_p.cols();
        for (Eigen::Index i = 0; i < outputs[l].rows(); ++i) {
            for (Eigen::Index c = 0; c < d_p; ++c) {
                const double s = outputs[l](i, c) * outputs[l](i, c) +
                                 outputs[l](i, d_p + c) * outputs[l](i, d_p + c);
                CHECK(std::abs(s - 1.0) < 1e-12);
            }
        }
    }
}

TEST_CASE("seeded stack matches the reference implementation") {
    FanStack stack = init_fan_stack(4, 10, 3, 0.25, FanActivation::Gelu, 3, 99);
    std::mt19937_64 rng(12);
    stack.norm_mean = random_vector(4, rng);
    stack.norm_std = random_vector(4, rng).cwiseAbs() + Vector::Ones(4);

    const Matrix x = random_matrix(7, 4, rng);
    CHECK(max_abs_diff(fan_forward(stack, x), reference_fan(stack, x)) < 1e-12);

    // Frozen-stable: identical input, identical output, bit for bit.
    const Matrix again = fan_forward(stack, x);
    CHECK((again.array() == fan_forward(stack, x).array()).all());
}

TEST_CASE("analytic gradients match central finite differences") {
    FanStack stack = init_fan_stack(3, 8, 2, 0.25, FanActivation::Gelu, 2, 7);
    identity_stats(stack, 3);
    std::mt19937_64 rng(40);
    const Matrix x = random_matrix(9, 3, rng);
    std::vector<int> labels;
    for (int i = 0; i < 9; ++i) {
        labels.push_back(i % 2);
    }

    FanGradients grads;
    fan_loss_and_gradients(stack, x, labels, &grads);

    const double h = 1e-5;
    double worst = 0.0;
    auto fd_check = [&](double* slot, double analytic) {
        const double saved = *slot;
        *slot = saved + h;
        const double up = fan_loss_and_gradients(stack, x, labels, nullptr);
        *slot = saved - h;
        const double down = fan_loss_and_gradients(stack, x, labels, nullptr);
        *slot = saved;
        const double fd = (up - down) / (2.0 * h);
        if (std::max(std::abs(fd), std::abs(analytic)) < 1e-8) {
            return;
        }
        worst = std::max(worst,
                         std::abs(fd - analytic) / std::max(std::abs(fd), std::abs(analytic)));
    };

    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        FanLayerParams& layer = stack.layers[l];
        for (int i = 0; i < layer.w_p.rows(); ++i) {
            for (int j = 0; j < layer.w_p.cols(); ++j) {
                fd_check(&layer.w_p(i, j), grads.layers[l].w_p(i, j));
            }
        }
        for (int i = 0; i < layer.w_pbar.rows(); ++i) {
            for (int j = 0; j < layer.w_pbar.cols(); ++j) {
                fd_check(&layer.w_pbar(i, j), grads.layers[l].w_pbar(i, j));
            }
        }
        for (int i = 0; i < layer.b_pbar.size(); ++i) {
            fd_check(&layer.b_pbar(i), grads.layers[l].b_pbar(i));
        }
    }
    for (int i = 0; i < stack.head.rows(); ++i) {
        for (int j = 0; j < stack.head.cols(); ++j) {
            fd_check(&stack.head(i, j), grads.head(i, j));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("train_fan with zero epochs only freezes") {
    FanStack stack = init_fan_stack(3, 8, 2, 0.25, FanActivation::Gelu, 2, 3);
    const Matrix w_p_before = stack.layers[0].w_p;
    std::mt19937_64 rng(60);
    const Matrix x = random_matrix(6, 3, rng);
    const std::vector<int> labels{0, 1, 0, 1, 0, 1};

    train_fan(stack, x, labels, 0, AdamWConfig{});
    CHECK(stack.frozen);
    CHECK((stack.layers[0].w_p.array() == w_p_before.array()).all());
    CHECK(stack.head.size() == 0);  // head dropped at freeze

    CHECK_THROWS_AS(train_fan(stack, x, labels, 1, AdamWConfig{}), ProtocolError);
}

TEST_CASE("periodic branch beats an equal-parameter relu stack on a sinusoid task") {
    Matrix x;
    std::vector<int> labels;
    periodic_task(512, 1234, x, labels);

    FanStack fan = init_fan_stack(4, 32, 2, 0.25, FanActivation::Relu, 2, 21);
    // Width chosen so the plain stack's parameter count brackets the
    // periodic stack's within a few percent.
    FanStack relu = init_fan_stack(4, 27, 2, 0.0, FanActivation::Relu, 2, 21);
    const int fan_params = count_params(fan);
    const int relu_params = count_params(relu);
    REQUIRE(std::abs(fan_params - relu_params) <
            std::max(fan_params, relu_params) / 10);

    AdamWConfig opt;
    opt.lr = 0.01;
    opt.weight_decay = 0.0;
    const FanTrainResult fan_result = train_fan(fan, x, labels, 500, opt);
    const FanTrainResult relu_result = train_fan(relu, x, labels, 500, opt);

    CHECK(fan_result.final_train_accuracy >= 0.9);
    CHECK(relu_result.final_train_accuracy < 0.8);
}

TEST_CASE("checkpoint round-trips a frozen stack bitwise") {
    FanStack stack = init_fan_stack(5, 12, 2, 0.25, FanActivation::Gelu, 3, 17);
    std::mt19937_64 rng(71);
    const Matrix x = random_matrix(20, 5, rng);
    std::vector<int> labels;
    for (int i = 0; i < 20; ++i) {
        labels.push_back(i % 3);
    }
    train_fan(stack, x, labels, 5, AdamWConfig{});

    const auto path = std::filesystem::temp_directory_path() / "mcigle_fan_test.bin";
    save_fan_stack(path, stack);
    const FanStack loaded = load_fan_stack(path);
    std::filesystem::remove(path);

    REQUIRE(loaded.layers.size() == stack.layers.size());
    CHECK(loaded.frozen == stack.frozen);
    for (std::size_t l = 0; l < stack.layers.size(); ++l) {
        CHECK((loaded.layers[l].w_p.array() == stack.layers[l].w_p.array()).all());
        CHECK((loaded.layers[l].w_pbar.array() == stack.layers[l].w_pbar.array()).all());
        CHECK((loaded.layers[l].b_pbar.array() == stack.layers[l].b_pbar.array()).all());
        CHECK(loaded.layers[l].activation == stack.layers[l].activation);
    }
    CHECK((loaded.norm_mean.array() == stack.norm_mean.array()).all());
    CHECK((loaded.norm_std.array() == stack.norm_std.array()).all());
    CHECK(max_abs_diff(fan_forward(loaded, x), fan_forward(stack, x)) == 0.0);
}
