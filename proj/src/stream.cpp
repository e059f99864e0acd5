#include "mcigle/stream.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace mcigle {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    // splitmix64 over the combined value.
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

namespace {

struct ClassModel {
    Vector txt_mean;
    double frequency = 1.0;
    double phase_shift = 0.0;
};

MultimodalGraph sample_phase_graph(const ProtocolConfig& cfg,
                                   const std::vector<ClassModel>& models,
                                   const std::vector<int>& class_ids,
                                   const Matrix& vis_map, int per_class,
                                   std::mt19937_64& rng) {
    const int n = static_cast<int>(class_ids.size()) * per_class;
    MultimodalGraph g;
    g.num_nodes = n;
    g.features_txt = Matrix::Zero(n, cfg.d_t);
    g.features_vis = Matrix::Zero(n, cfg.d_v);
    g.labels.resize(n);

    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

    for (int c = 0; c < static_cast<int>(class_ids.size()); ++c) {
        const ClassModel& model = models[class_ids[c]];
        for (int s = 0; s < per_class; ++s) {
            const int u = c * per_class + s;
            g.labels[u] = class_ids[c];
            for (int j = 0; j < cfg.d_t; ++j) {
                g.features_txt(u, j) = model.txt_mean(j) + cfg.noise * unit(rng);
            }
            g.features_txt(u, 0) =
                cfg.sin_amplitude *
                std::sin(model.frequency * angle(rng) + model.phase_shift);
            for (int j = 0; j < cfg.d_v; ++j) {
                double v = vis_map.row(j).dot(g.features_txt.row(u));
                g.features_vis(u, j) = v + cfg.noise * unit(rng);
            }
        }
    }

    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double p = g.labels[i] == g.labels[j] ? cfg.p_intra : cfg.p_inter;
            if (coin(rng) < p) {
                g.edges.emplace_back(i, j);
            }
        }
    }
    normalize_and_validate(g);
    return g;
}

}  // namespace

std::vector<PhaseData> generate_stream(const ProtocolConfig& cfg) {
    validate_config(cfg);

    std::mt19937_64 model_rng(derive_seed(cfg.seed, 1));
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

    std::vector<ClassModel> models(cfg.num_classes);
    for (int c = 0; c < cfg.num_classes; ++c) {
        models[c].txt_mean = Vector(cfg.d_t);
        for (int j = 0; j < cfg.d_t; ++j) {
            models[c].txt_mean(j) = cfg.class_separation * unit(model_rng);
        }
        const double span = cfg.sin_freq_max - cfg.sin_freq_min;
        models[c].frequency =
            cfg.sin_freq_min +
            span * (cfg.num_classes == 1 ? 0.0
                                         : static_cast<double>(c) / (cfg.num_classes - 1));
        models[c].phase_shift = angle(model_rng);
    }

    std::mt19937_64 map_rng(derive_seed(cfg.seed, 2));
    Matrix vis_map(cfg.d_v, cfg.d_t);
    for (int i = 0; i < cfg.d_v; ++i) {
        for (int j = 0; j < cfg.d_t; ++j) {
            vis_map(i, j) = unit(map_rng) / std::sqrt(static_cast<double>(cfg.d_t));
        }
    }

    const int phases = cfg.phase_count();
    std::vector<PhaseData> stream;
    stream.reserve(phases);
    for (int k = 0; k < phases; ++k) {
        PhaseData phase;
        for (int c = 0; c < cfg.classes_per_phase; ++c) {
            phase.class_ids.push_back(k * cfg.classes_per_phase + c);
        }
        std::mt19937_64 train_rng(derive_seed(cfg.seed, 100 + 2 * k));
        std::mt19937_64 test_rng(derive_seed(cfg.seed, 101 + 2 * k));
        phase.train = sample_phase_graph(cfg, models, phase.class_ids, vis_map,
                                         cfg.nodes_per_class, train_rng);
        phase.test = sample_phase_graph(cfg, models, phase.class_ids, vis_map,
                                        cfg.test_nodes_per_class, test_rng);
        stream.push_back(std::move(phase));
    }
    return stream;
}

}  // namespace mcigle
