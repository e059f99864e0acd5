#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mcigle/protocol.hpp"
#include "test_util.hpp"

using namespace mcigle;
using namespace mcigle::testutil;

namespace {

// Desk-scale config that keeps the full pipeline fast in unit tests.
ProtocolConfig tiny_config(std::uint64_t seed) {
    ProtocolConfig cfg;
    cfg.seed = seed;
    cfg.num_classes = 4;
    cfg.classes_per_phase = 2;
    cfg.nodes_per_class = 12;
    cfg.test_nodes_per_class = 8;
    cfg.gnn_epochs = 15;
    cfg.gnn_hidden = 8;
    cfg.fan_epochs = 40;
    cfg.fan_width = 16;
    cfg.fan_layers = 2;
    cfg.comp_dim = 24;
    cfg.comp_epochs = 10;
    cfg.ot_max_sinkhorn = 200;
    cfg.naive_epochs = 40;
    return cfg;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

TEST_CASE("config parser round-trips keys and rejects junk") {
    const ProtocolConfig cfg = parse_config_text(
        "seed = 7\n"
        "num_classes = 6\n"
        "classes_per_phase = 3  # trailing comment\n"
        "gamma = 0.25\n"
        "comp_enabled = false\n");
    CHECK(cfg.seed == 7);
    CHECK(cfg.num_classes == 6);
    CHECK(cfg.classes_per_phase == 3);
    CHECK(cfg.gamma == doctest::Approx(0.25));
    CHECK(!cfg.comp_enabled);

    CHECK_THROWS_AS(parse_config_text("num_classes = 6\n"), ConfigError);  // no seed
    CHECK_THROWS_AS(parse_config_text("seed = 1\nnot_a_key = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("seed = 1\ngamma = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("seed = 1\ngamma\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("seed = 1\nnum_classes = 7\nclasses_per_phase = 2\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text("seed = 1\nbeta = 0\n"), ConfigError);
}

TEST_CASE("stream generation is deterministic per seed") {
    ProtocolConfig cfg = tiny_config(42);
    const auto a = generate_stream(cfg);
    const auto b = generate_stream(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].train.edges == b[k].train.edges);
        CHECK(a[k].train.labels == b[k].train.labels);
        CHECK((a[k].train.features_vis.array() == b[k].train.features_vis.array()).all());
        CHECK((a[k].train.features_txt.array() == b[k].train.features_txt.array()).all());
        CHECK((a[k].test.features_vis.array() == b[k].test.features_vis.array()).all());
    }

    cfg.seed = 43;
    const auto c = generate_stream(cfg);
    CHECK((a[0].train.features_txt.array() != c[0].train.features_txt.array()).any());
}

TEST_CASE("zero noise makes visual features an exact linear image") {
    ProtocolConfig cfg = tiny_config(7);
    cfg.noise = 0.0;
    const auto phases = generate_stream(cfg);

    // Recover the map from one phase and verify it on another.
    const Matrix& t0 = phases[0].train.features_txt;
    const Matrix& v0 = phases[0].train.features_vis;
    const Matrix map = ridge_solve(t0, v0, 0.0);  // d_t x d_v
    const Matrix& t1 = phases[1].train.features_txt;
    const Matrix& v1 = phases[1].train.features_vis;
    CHECK(max_abs_diff(t1 * map, v1) < 1e-8);
}

TEST_CASE("stream labels follow the phase schedule") {
    const ProtocolConfig cfg = tiny_config(11);
    const auto phases = generate_stream(cfg);
    REQUIRE(static_cast<int>(phases.size()) == cfg.phase_count());
    for (int k = 0; k < static_cast<int>(phases.size()); ++k) {
        CHECK(phases[k].class_ids ==
              std::vector<int>{2 * k, 2 * k + 1});
        for (int label : phases[k].train.labels) {
            CHECK(label >= 2 * k);
            CHECK(label <= 2 * k + 1);
        }
        CHECK(phases[k].train.num_nodes == cfg.classes_per_phase * cfg.nodes_per_class);
        CHECK(phases[k].test.num_nodes == cfg.classes_per_phase * cfg.test_nodes_per_class);
    }
}

TEST_CASE("oracle features are ridge separable on defaults") {
    ProtocolConfig cfg;  // full default scale
    cfg.seed = 5;
    const auto phases = generate_stream(cfg);

    Eigen::Index train_rows = 0, test_rows = 0;
    for (const auto& p : phases) {
        train_rows += p.train.num_nodes;
        test_rows += p.test.num_nodes;
    }
    const int feat_dim = cfg.d_v + cfg.d_t;
    Matrix x_train(train_rows, feat_dim), x_test(test_rows, feat_dim);
    Matrix y_train = Matrix::Zero(train_rows, cfg.num_classes);
    std::vector<int> test_labels;
    Eigen::Index r = 0;
    for (const auto& p : phases) {
        for (int i = 0; i < p.train.num_nodes; ++i, ++r) {
            x_train.row(r) << p.train.features_vis.row(i), p.train.features_txt.row(i);
            y_train(r, p.train.labels[i]) = 1.0;
        }
    }
    r = 0;
    for (const auto& p : phases) {
        for (int i = 0; i < p.test.num_nodes; ++i, ++r) {
            x_test.row(r) << p.test.features_vis.row(i), p.test.features_txt.row(i);
            test_labels.push_back(p.test.labels[i]);
        }
    }

    const Matrix w = ridge_solve(x_train, y_train, 0.1);
    const Matrix scores = x_test * w;
    int correct = 0;
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index arg;
        scores.row(i).maxCoeff(&arg);
        correct += static_cast<int>(arg) == test_labels[i];
    }
    CHECK(static_cast<double>(correct) / scores.rows() >= 0.9);
}

TEST_CASE("metric definitions on hand examples") {
    AccuracyMatrix m;
    m.a = {{1.0}, {0.8, 0.9}};
    const MetricsReport r = compute_metrics(m);
    CHECK(r.acc == doctest::Approx(0.85).epsilon(1e-12));
    CHECK(r.forgetting_f == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(r.bwf == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(r.transfer_f == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(r.transfer_matrix(1, 0) == doctest::Approx(0.2).epsilon(1e-12));

    AccuracyMatrix constant;
    constant.a = {{0.7}, {0.7, 0.7}, {0.7, 0.7, 0.7}};
    const MetricsReport rc = compute_metrics(constant);
    CHECK(rc.acc == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(rc.forgetting_f == 0.0);
    CHECK(rc.bwf == 0.0);
    CHECK(rc.transfer_f == 0.0);

    AccuracyMatrix single;
    single.a = {{0.95}};
    const MetricsReport rs = compute_metrics(single);
    CHECK(rs.acc == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(rs.forgetting_f == 0.0);
    CHECK(rs.bwf == 0.0);
    CHECK(rs.transfer_f == 0.0);

    AccuracyMatrix bad;
    bad.a = {{1.0}, {0.5}};
    CHECK_THROWS_AS(compute_metrics(bad), InputError);
    AccuracyMatrix outside;
    outside.a = {{1.5}};
    CHECK_THROWS_AS(compute_metrics(outside), InputError);
}

TEST_CASE("metrics survive the append-then-remove construction") {
    AccuracyMatrix m;
    m.a = {{0.9}, {0.7, 0.95}, {0.65, 0.9, 0.85}};
    const MetricsReport before = compute_metrics(m);

    AccuracyMatrix extended = m;
    std::vector<double> extra = m.a.back();
    extra.push_back(extra.back());
    extended.a.push_back(extra);
    extended.a.pop_back();

    const MetricsReport after = compute_metrics(extended);
    CHECK(after.acc == before.acc);
    CHECK(after.forgetting_f == before.forgetting_f);
    CHECK(after.bwf == before.bwf);
    CHECK(after.transfer_f == before.transfer_f);
}

TEST_CASE("csv writers round-trip the accuracy matrix") {
    AccuracyMatrix m;
    m.a = {{0.5}, {0.25, 0.75}};
    const auto dir = std::filesystem::temp_directory_path();
    const auto path = dir / "mcigle_matrix_test.csv";
    write_accuracy_matrix_csv(path, m);
    const AccuracyMatrix loaded = read_accuracy_matrix_csv(path);
    REQUIRE(loaded.a.size() == 2);
    CHECK(loaded.a[1][0] == 0.25);
    CHECK(loaded.a[1][1] == 0.75);
    std::filesystem::remove(path);
}

TEST_CASE("stream provider enforces single consumption") {
    StreamProvider provider(generate_stream(tiny_config(3)));
    std::vector<int> accesses;
    provider.set_access_logger([&accesses](int k) { accesses.push_back(k); });

    provider.take_train(0);
    provider.take_train(1);
    CHECK_THROWS_AS(provider.take_train(0), ProtocolError);
    CHECK_THROWS_AS(provider.take_train(1), ProtocolError);
    CHECK_THROWS_AS(provider.take_train(9), ProtocolError);
    CHECK(accesses == std::vector<int>{0, 1});
    provider.test(0);  // test splits stay accessible
}

TEST_CASE("full run is exemplar-free, frozen, and deterministic") {
    const ProtocolConfig cfg = tiny_config(19);

    std::vector<int> takes;
    StreamProvider provider(generate_stream(cfg));
    provider.set_access_logger([&takes](int k) { takes.push_back(k); });

    std::vector<std::string> gnn_snapshots;
    std::vector<bool> residual_plc_ok;
    RunHooks hooks;
    hooks.on_phase_end = [&](int, const GnnParams& gnn, const FanStack& fan) {
        std::ostringstream snap;
        for (const Matrix& w : gnn.w_vis) {
            snap.write(reinterpret_cast<const char*>(w.data()),
                       static_cast<std::streamsize>(sizeof(double) * w.size()));
        }
        snap.write(reinterpret_cast<const char*>(gnn.classifier_w.data()),
                   static_cast<std::streamsize>(sizeof(double) * gnn.classifier_w.size()));
        for (const FanLayerParams& layer : fan.layers) {
            snap.write(reinterpret_cast<const char*>(layer.w_p.data()),
                       static_cast<std::streamsize>(sizeof(double) * layer.w_p.size()));
        }
        gnn_snapshots.push_back(snap.str());
    };
    hooks.on_residual = [&](int, const ResidualTarget& target) {
        bool ok = true;
        for (Eigen::Index i = 0; i < target.matrix.rows(); ++i) {
            for (int j = 0; j < target.old_width; ++j) {
                ok = ok && target.matrix(i, j) == 0.0;
            }
        }
        residual_plc_ok.push_back(ok);
    };

    const RunResult result = run_mcigle(cfg, provider, &hooks);

    // Exemplar-free: each train split taken exactly once, in phase order.
    CHECK(takes == std::vector<int>{0, 1});
    // Frozen backbone: parameter bytes identical across phases.
    REQUIRE(gnn_snapshots.size() == 2);
    CHECK(gnn_snapshots[0] == gnn_snapshots[1]);
    // Cleansed residual targets all had bitwise-zero old columns.
    for (bool ok : residual_plc_ok) {
        CHECK(ok);
    }

    result.accuracy.validate();
    CHECK(result.accuracy.phases() == 2);
    CHECK(result.metrics.curve.size() == 2);

    // Identical config, byte-identical outputs.
    const auto dir_a = std::filesystem::temp_directory_path() / "mcigle_run_a";
    const auto dir_b = std::filesystem::temp_directory_path() / "mcigle_run_b";
    run_experiment_to_dir(cfg, dir_a, "mcigle");
    run_experiment_to_dir(cfg, dir_b, "mcigle");
    CHECK(read_file(dir_a / "metrics.csv") == read_file(dir_b / "metrics.csv"));
    CHECK(read_file(dir_a / "accuracy_matrix.csv") == read_file(dir_b / "accuracy_matrix.csv"));
    CHECK(read_file(dir_a / "curve.csv") == read_file(dir_b / "curve.csv"));
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
}

TEST_CASE("single-phase run defines the forgetting metrics as zero") {
    ProtocolConfig cfg = tiny_config(23);
    cfg.num_classes = 2;  // one phase
    const RunResult result = run_mcigle(cfg);
    REQUIRE(result.accuracy.phases() == 1);
    CHECK(result.metrics.acc == result.accuracy.a[0][0]);
    CHECK(result.metrics.forgetting_f == 0.0);
    CHECK(result.metrics.bwf == 0.0);
    CHECK(result.metrics.transfer_f == 0.0);

    // The naive baseline fits the same base data; single-phase accuracies are
    // close.
    const RunResult naive = run_baseline_naive(cfg);
    CHECK(std::abs(naive.accuracy.a[0][0] - result.accuracy.a[0][0]) <= 0.05);
}
