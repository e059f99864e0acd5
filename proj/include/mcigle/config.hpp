#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace mcigle {

// Full experiment configuration. Every module hyperparameter lives here; the
// file format is flat `key = value` lines with '#' comments. Unknown keys are
// errors, and a seed must always be given explicitly.
struct ProtocolConfig {
    std::uint64_t seed = 0;

    // Synthetic stream shape.
    int num_classes = 10;
    int classes_per_phase = 2;
    int nodes_per_class = 40;
    int test_nodes_per_class = 20;
    int d_v = 8;
    int d_t = 6;
    double noise = 0.3;
    double class_separation = 2.5;
    double sin_amplitude = 1.5;
    double sin_freq_min = 1.0;
    double sin_freq_max = 3.0;
    double p_intra = 0.3;
    double p_inter = 0.02;

    // Analytic streams.
    double gamma = 0.1;
    double beta = 1.0;
    double lambda2 = 0.6;
    double gamma_comp = -1.0;  // negative means "use gamma"

    // Transport.
    double lambda1 = 0.5;
    double epsilon = 0.05;
    double ot_tol = 1e-6;
    int ot_max_outer = 20;
    int ot_max_sinkhorn = 500;

    // Graph network.
    int gnn_layers = 2;
    int gnn_hidden = 32;
    int gnn_epochs = 150;
    double gnn_lr = 0.05;
    double gnn_momentum = 0.9;
    double align_weight = 0.1;

    // Periodic feature stack.
    double p_ratio = 0.25;
    int fan_layers = 3;
    int fan_width = 64;
    int fan_epochs = 300;
    double fan_lr = 0.003;
    double fan_weight_decay = 1e-4;
    std::string fan_activation = "gelu";  // gelu | relu

    // Compensation stream.
    bool comp_enabled = true;
    int comp_dim = 96;
    std::string comp_activation = "tanh";  // tanh | mish
    int comp_epochs = 60;
    double comp_lr = 0.05;

    // Naive baseline head.
    int naive_epochs = 100;
    double naive_lr = 0.5;

    double effective_gamma_comp() const { return gamma_comp < 0.0 ? gamma : gamma_comp; }
    int phase_count() const { return num_classes / classes_per_phase; }
};

// Throws ConfigError on malformed lines, unknown keys, bad values, or a
// missing seed.
ProtocolConfig parse_config_text(const std::string& text);
ProtocolConfig parse_config_file(const std::filesystem::path& path);

// Range/consistency checks shared by the parser and programmatic callers.
void validate_config(const ProtocolConfig& cfg);

}  // namespace mcigle
