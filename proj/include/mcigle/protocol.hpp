#pragma once

#include <filesystem>
#include <functional>

#include "mcigle/compensation.hpp"
#include "mcigle/fan.hpp"
#include "mcigle/gnn.hpp"
#include "mcigle/metrics.hpp"
#include "mcigle/stream.hpp"

namespace mcigle {

// Forward-only access to phase training splits. A train split can be taken
// exactly once and is destroyed by the take; test splits remain readable for
// evaluation. This is the interface-level exemplar-free guarantee.
class StreamProvider {
public:
    explicit StreamProvider(std::vector<PhaseData> phases);

    int phase_count() const { return static_cast<int>(phases_.size()); }
    const std::vector<int>& class_ids(int k) const;
    MultimodalGraph take_train(int k);
    const MultimodalGraph& test(int k) const;

    // Test instrumentation: called with the phase index of every train take.
    void set_access_logger(std::function<void(int)> logger) { logger_ = std::move(logger); }

private:
    std::vector<PhaseData> phases_;
    std::vector<bool> taken_;
    std::function<void(int)> logger_;
};

// Base-phase backbone, frozen after training: graph network + transport
// fusion feeding the periodic feature stack.
struct FrozenPipeline {
    GnnParams gnn;
    GnnConfig gnn_cfg;
    FanStack fan;
};

FrozenPipeline train_base_pipeline(const ProtocolConfig& cfg,
                                   const MultimodalGraph& base_train);

// Frozen feature extraction: fused embeddings through the periodic stack.
Matrix pipeline_features(const FrozenPipeline& pipeline, const MultimodalGraph& g);

// Observation points for tests; all optional.
struct RunHooks {
    std::function<void(int phase, const ResidualTarget&)> on_residual;
    std::function<void(int phase, const GnnParams&, const FanStack&)> on_phase_end;
};

struct RunResult {
    AccuracyMatrix accuracy;
    MetricsReport metrics;
};

// Full incremental run: base-phase training, then per phase analytic
// mainstream and residual compensation updates, evaluating all seen phases.
RunResult run_mcigle(const ProtocolConfig& cfg, const RunHooks* hooks = nullptr);
RunResult run_mcigle(const ProtocolConfig& cfg, StreamProvider& provider,
                     const RunHooks* hooks = nullptr);

// Lower anchor: same frozen features, linear head re-fit by gradient descent
// on each phase's data alone.
RunResult run_baseline_naive(const ProtocolConfig& cfg);

// Upper anchor: ridge classifier over all phases' features at once; returns
// the mean per-phase test accuracy.
double run_joint_upper(const ProtocolConfig& cfg);

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);
void write_accuracy_matrix_csv(const std::filesystem::path& path,
                               const AccuracyMatrix& matrix);
void write_curve_csv(const std::filesystem::path& path, const MetricsReport& report,
                     int classes_per_phase);
AccuracyMatrix read_accuracy_matrix_csv(const std::filesystem::path& path);

// `run` subcommand body: executes the configured experiment and writes
// metrics.csv, accuracy_matrix.csv, and curve.csv into out_dir.
void run_experiment_to_dir(const ProtocolConfig& cfg, const std::filesystem::path& out_dir,
                           const std::string& method);

}  // namespace mcigle
