#include "mcigle/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mcigle {

namespace {

Matrix row_softmax(const Matrix& logits) {
    Matrix probs(logits.rows(), logits.cols());
    for (Eigen::Index u = 0; u < logits.rows(); ++u) {
        const double mx = logits.row(u).maxCoeff();
        Eigen::RowVectorXd e = (logits.row(u).array() - mx).exp();
        probs.row(u) = e / e.sum();
    }
    return probs;
}

double accuracy_of(const Matrix& scores, const std::vector<int>& labels) {
    int correct = 0;
    for (Eigen::Index u = 0; u < scores.rows(); ++u) {
        Eigen::Index arg;
        scores.row(u).maxCoeff(&arg);
        if (static_cast<int>(arg) == labels[u]) {
            ++correct;
        }
    }
    return scores.rows() == 0 ? 0.0 : static_cast<double>(correct) / scores.rows();
}

// One-hot targets over the phase's new classes; column c maps to global class
// first_class + c.
Matrix onehot_new_classes(const std::vector<int>& labels, const std::vector<int>& class_ids) {
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()),
                            static_cast<Eigen::Index>(class_ids.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int local = labels[i] - class_ids.front();
        if (local < 0 || local >= static_cast<int>(class_ids.size())) {
            throw ProtocolError("stream label outside the phase's class block");
        }
        y(static_cast<Eigen::Index>(i), local) = 1.0;
    }
    return y;
}

Matrix onehot_global(const std::vector<int>& labels, int num_classes) {
    Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
    }
    return y;
}

template <typename Fn>
auto with_phase_context(int phase, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const InputError& e) {
        throw InputError("phase " + std::to_string(phase) + ": " + e.what());
    } catch (const ProtocolError& e) {
        throw ProtocolError("phase " + std::to_string(phase) + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError("phase " + std::to_string(phase) + ": " + e.what());
    }
}

}  // namespace

StreamProvider::StreamProvider(std::vector<PhaseData> phases)
    : phases_(std::move(phases)), taken_(phases_.size(), false) {}

const std::vector<int>& StreamProvider::class_ids(int k) const {
    return phases_.at(k).class_ids;
}

MultimodalGraph StreamProvider::take_train(int k) {
    if (k < 0 || k >= phase_count()) {
        throw ProtocolError("take_train: phase index out of range");
    }
    if (taken_[k]) {
        throw ProtocolError("take_train: phase " + std::to_string(k) +
                            " training data was already consumed");
    }
    taken_[k] = true;
    if (logger_) {
        logger_(k);
    }
    return std::move(phases_[k].train);
}

const MultimodalGraph& StreamProvider::test(int k) const { return phases_.at(k).test; }

FrozenPipeline train_base_pipeline(const ProtocolConfig& cfg,
                                   const MultimodalGraph& base_train) {
    FrozenPipeline pipeline;
    pipeline.gnn_cfg.layers = cfg.gnn_layers;
    pipeline.gnn_cfg.hidden = cfg.gnn_hidden;
    pipeline.gnn_cfg.lambda1 = cfg.lambda1;
    pipeline.gnn_cfg.epsilon = cfg.epsilon;
    pipeline.gnn_cfg.ot_tol = cfg.ot_tol;
    pipeline.gnn_cfg.ot_max_outer = cfg.ot_max_outer;
    pipeline.gnn_cfg.ot_max_sinkhorn = cfg.ot_max_sinkhorn;
    pipeline.gnn_cfg.align_weight = cfg.align_weight;

    // Base-phase labels are remapped to a local 0..c0-1 block for the
    // classifier heads used during backbone training.
    const int base_classes = cfg.classes_per_phase;
    MultimodalGraph local = base_train;
    const int min_label =
        local.labels.empty()
            ? 0
            : *std::min_element(local.labels.begin(), local.labels.end());
    for (int& label : local.labels) {
        label -= min_label;
    }

    pipeline.gnn = init_gnn_params(cfg.d_v, cfg.d_t, pipeline.gnn_cfg, base_classes,
                                   derive_seed(cfg.seed, 11));
    train_base(local, pipeline.gnn, pipeline.gnn_cfg, cfg.gnn_epochs, cfg.gnn_lr,
               cfg.gnn_momentum);

    const Matrix fused = fused_embeddings(local, pipeline.gnn, pipeline.gnn_cfg);
    const FanActivation act =
        cfg.fan_activation == "relu" ? FanActivation::Relu : FanActivation::Gelu;
    pipeline.fan =
        init_fan_stack(static_cast<int>(fused.cols()), cfg.fan_width, cfg.fan_layers,
                       cfg.p_ratio, act, base_classes, derive_seed(cfg.seed, 12));
    AdamWConfig opt;
    opt.lr = cfg.fan_lr;
    opt.weight_decay = cfg.fan_weight_decay;
    train_fan(pipeline.fan, fused, local.labels, cfg.fan_epochs, opt);
    return pipeline;
}

Matrix pipeline_features(const FrozenPipeline& pipeline, const MultimodalGraph& g) {
    return fan_forward(pipeline.fan, fused_embeddings(g, pipeline.gnn, pipeline.gnn_cfg));
}

RunResult run_mcigle(const ProtocolConfig& cfg, const RunHooks* hooks) {
    StreamProvider provider(generate_stream(cfg));
    return run_mcigle(cfg, provider, hooks);
}

RunResult run_mcigle(const ProtocolConfig& cfg, StreamProvider& provider,
                     const RunHooks* hooks) {
    validate_config(cfg);
    const int K = provider.phase_count();
    const double gamma_c = cfg.effective_gamma_comp();

    AnalyticState mainstream;
    CompensationState comp;
    FrozenPipeline pipeline;
    AccuracyMatrix matrix;

    for (int k = 0; k < K; ++k) {
        with_phase_context(k, [&] {
            const MultimodalGraph train = provider.take_train(k);
            const int c_new = static_cast<int>(provider.class_ids(k).size());

            if (k == 0) {
                pipeline = train_base_pipeline(cfg, train);
            }

            const Matrix x = pipeline_features(pipeline, train);
            const Matrix y_new = onehot_new_classes(train.labels, provider.class_ids(k));

            if (k == 0) {
                mainstream =
                    analytic_init(static_cast<int>(x.cols()), cfg.gamma, cfg.beta);
            }

            expand_labels(mainstream, c_new);
            phase_update(mainstream, x, y_new);

            if (cfg.comp_enabled) {
                if (k == 0) {
                    const CompActivation act = cfg.comp_activation == "mish"
                                                   ? CompActivation::Mish
                                                   : CompActivation::Tanh;
                    CompensationEmbed embed =
                        init_compensation_embed(static_cast<int>(x.cols()), cfg.comp_dim,
                                                act, derive_seed(cfg.seed, 13));
                    train_compensation_embed(embed, x, y_new, gamma_c, cfg.comp_epochs,
                                             cfg.comp_lr);
                    comp = init_compensation(std::move(embed), cfg.comp_dim, gamma_c,
                                             cfg.beta, cfg.lambda2);
                }
                expand_compensation(comp, c_new);
                Matrix y_padded = Matrix::Zero(y_new.rows(), mainstream.seen_classes);
                y_padded.rightCols(y_new.cols()) = y_new;
                const ResidualTarget target = residual_matrix(mainstream, x, y_padded);
                if (hooks != nullptr && hooks->on_residual) {
                    hooks->on_residual(k, target);
                }
                compensation_update(comp, compensation_embed(comp.embed, x), target);
            }
        });

        // Past training splits are gone; evaluation touches test splits only.
        matrix.a.emplace_back();
        for (int j = 0; j <= k; ++j) {
            with_phase_context(k, [&] {
                const MultimodalGraph& test = provider.test(j);
                const Matrix feats = pipeline_features(pipeline, test);
                const Matrix scores = cfg.comp_enabled
                                          ? predict_combined(mainstream, comp, feats)
                                          : predict_mainstream(mainstream, feats);
                matrix.a[k].push_back(accuracy_of(scores, test.labels));
            });
        }

        if (hooks != nullptr && hooks->on_phase_end) {
            hooks->on_phase_end(k, pipeline.gnn, pipeline.fan);
        }
    }

    RunResult result;
    result.accuracy = std::move(matrix);
    result.metrics = compute_metrics(result.accuracy);
    return result;
}

RunResult run_baseline_naive(const ProtocolConfig& cfg) {
    validate_config(cfg);
    StreamProvider provider(generate_stream(cfg));
    const int K = provider.phase_count();

    FrozenPipeline pipeline;
    Matrix head;  // d x seen_classes, re-fit on current-phase data each phase
    AccuracyMatrix matrix;

    for (int k = 0; k < K; ++k) {
        with_phase_context(k, [&] {
            const MultimodalGraph train = provider.take_train(k);
            if (k == 0) {
                pipeline = train_base_pipeline(cfg, train);
            }
            const Matrix x = pipeline_features(pipeline, train);
            if (k == 0) {
                head = Matrix::Zero(x.cols(), 0);
            }
            const int seen = (k + 1) * cfg.classes_per_phase;
            Matrix grown = Matrix::Zero(head.rows(), seen);
            grown.leftCols(head.cols()) = head;
            head = std::move(grown);

            const Matrix y = onehot_global(train.labels, seen);
            const double n = static_cast<double>(x.rows());
            for (int epoch = 0; epoch < cfg.naive_epochs; ++epoch) {
                const Matrix probs = row_softmax(x * head);
                head -= cfg.naive_lr * (x.transpose() * (probs - y)) / n;
            }
        });

        matrix.a.emplace_back();
        for (int j = 0; j <= k; ++j) {
            const Matrix feats = pipeline_features(pipeline, provider.test(j));
            matrix.a[k].push_back(accuracy_of(feats * head, provider.test(j).labels));
        }
    }

    RunResult result;
    result.accuracy = std::move(matrix);
    result.metrics = compute_metrics(result.accuracy);
    return result;
}

double run_joint_upper(const ProtocolConfig& cfg) {
    validate_config(cfg);
    StreamProvider provider(generate_stream(cfg));
    const int K = provider.phase_count();

    FrozenPipeline pipeline;
    std::vector<Matrix> xs;
    std::vector<Matrix> ys;
    Eigen::Index total_rows = 0;
    for (int k = 0; k < K; ++k) {
        const MultimodalGraph train = provider.take_train(k);
        if (k == 0) {
            pipeline = train_base_pipeline(cfg, train);
        }
        xs.push_back(pipeline_features(pipeline, train));
        ys.push_back(onehot_global(train.labels, cfg.num_classes));
        total_rows += xs.back().rows();
    }

    Matrix x_all(total_rows, xs.front().cols());
    Matrix y_all(total_rows, cfg.num_classes);
    Eigen::Index row = 0;
    for (int k = 0; k < K; ++k) {
        x_all.middleRows(row, xs[k].rows()) = xs[k];
        y_all.middleRows(row, ys[k].rows()) = ys[k];
        row += xs[k].rows();
    }
    const Matrix w = ridge_solve(x_all, y_all, cfg.gamma);

    double acc = 0.0;
    for (int j = 0; j < K; ++j) {
        const MultimodalGraph& test = provider.test(j);
        const Matrix feats = pipeline_features(pipeline, test);
        acc += accuracy_of(feats * w, test.labels);
    }
    return acc / K;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open for writing: " + path.string());
    }
    out << "metric,value\n";
    out << "acc," << format_double(report.acc) << '\n';
    out << "forgetting_f," << format_double(report.forgetting_f) << '\n';
    out << "bwf," << format_double(report.bwf) << '\n';
    out << "transfer_f," << format_double(report.transfer_f) << '\n';
}

void write_accuracy_matrix_csv(const std::filesystem::path& path,
                               const AccuracyMatrix& matrix) {
    matrix.validate();
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open for writing: " + path.string());
    }
    for (const auto& row : matrix.a) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j > 0) out << ',';
            out << format_double(row[j]);
        }
        out << '\n';
    }
}

void write_curve_csv(const std::filesystem::path& path, const MetricsReport& report,
                     int classes_per_phase) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw InputError("cannot open for writing: " + path.string());
    }
    out << "cumulative_classes,accuracy\n";
    for (std::size_t k = 0; k < report.curve.size(); ++k) {
        out << (static_cast<int>(k) + 1) * classes_per_phase << ','
            << format_double(report.curve[k]) << '\n';
    }
}

AccuracyMatrix read_accuracy_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open for reading: " + path.string());
    }
    AccuracyMatrix matrix;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw InputError("accuracy matrix csv: bad value '" + cell + "'");
            }
        }
        matrix.a.push_back(std::move(row));
    }
    matrix.validate();
    return matrix;
}

void run_experiment_to_dir(const ProtocolConfig& cfg, const std::filesystem::path& out_dir,
                           const std::string& method) {
    std::filesystem::create_directories(out_dir);
    if (method == "joint") {
        const double acc = run_joint_upper(cfg);
        std::ofstream out(out_dir / "metrics.csv", std::ios::trunc);
        if (!out) {
            throw InputError("cannot open for writing: " + (out_dir / "metrics.csv").string());
        }
        out << "metric,value\n";
        out << "joint_acc," << format_double(acc) << '\n';
        return;
    }
    RunResult result;
    if (method == "mcigle") {
        result = run_mcigle(cfg);
    } else if (method == "naive") {
        result = run_baseline_naive(cfg);
    } else {
        throw ConfigError("unknown method: " + method);
    }
    write_metrics_csv(out_dir / "metrics.csv", result.metrics);
    write_accuracy_matrix_csv(out_dir / "accuracy_matrix.csv", result.accuracy);
    write_curve_csv(out_dir / "curve.csv", result.metrics, cfg.classes_per_phase);
}

}  // namespace mcigle
