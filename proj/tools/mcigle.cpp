#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <random>

#include "mcigle/protocol.hpp"

namespace {

using namespace mcigle;

int cmd_generate(const std::string& config_path, const std::string& out_dir) {
    const ProtocolConfig cfg = parse_config_file(config_path);
    const auto phases = generate_stream(cfg);
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    for (std::size_t k = 0; k < phases.size(); ++k) {
        save_graph(dir / ("phase" + std::to_string(k) + "_train.txt"), phases[k].train);
        save_graph(dir / ("phase" + std::to_string(k) + "_test.txt"), phases[k].test);
    }
    std::cout << "wrote " << phases.size() << " phase splits to " << out_dir << "\n";
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const std::string& method) {
    const ProtocolConfig cfg = parse_config_file(config_path);
    run_experiment_to_dir(cfg, out_dir, method);
    std::cout << "wrote results to " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& matrix_path, const std::string& out_dir) {
    const AccuracyMatrix matrix = read_accuracy_matrix_csv(matrix_path);
    const MetricsReport report = compute_metrics(matrix);
    std::filesystem::create_directories(out_dir);
    write_metrics_csv(std::filesystem::path(out_dir) / "metrics.csv", report);
    std::cout << "acc=" << format_double(report.acc)
              << " forgetting_f=" << format_double(report.forgetting_f)
              << " bwf=" << format_double(report.bwf)
              << " transfer_f=" << format_double(report.transfer_f) << "\n";
    return 0;
}

// Quick self-check battery over the numeric kernels and solver invariants.
int cmd_check() {
    int failures = 0;
    auto report = [&failures](const char* name, bool ok) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
        if (!ok) {
            ++failures;
        }
    };
    std::mt19937_64 rng(7);
    std::normal_distribution<double> unit(0.0, 1.0);
    auto random_matrix = [&](int r, int c) {
        Matrix m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = unit(rng);
        return m;
    };

    {
        const Matrix x = random_matrix(30, 6);
        const Matrix y = random_matrix(30, 3);
        const Matrix w = ridge_solve(x, y, 0.5);
        const double resid =
            ((x.transpose() * x + 0.5 * Matrix::Identity(6, 6)) * w - x.transpose() * y)
                .cwiseAbs()
                .maxCoeff();
        report("ridge solution satisfies normal equations", resid < 1e-8);
    }
    {
        Matrix a = random_matrix(16, 16);
        a = 0.1 * (a * a.transpose()).eval();
        a.diagonal().array() += 1.0;
        const Matrix a_inv = a.inverse();
        Vector u(16), v(16);
        for (int i = 0; i < 16; ++i) {
            u(i) = unit(rng);
            v(i) = unit(rng);
        }
        const Matrix upd = sherman_morrison_update(a_inv, u, v);
        const Matrix direct = (a + u * v.transpose()).inverse();
        report("rank-one inverse update matches direct inversion",
               (upd - direct).cwiseAbs().maxCoeff() < 1e-10);
    }
    {
        Matrix a = Matrix::Identity(8, 8) * 0.5;
        const Matrix u = random_matrix(5, 8);
        const Matrix upd = woodbury_block_update(a, u, 1.0);
        const Matrix direct =
            (Matrix::Identity(8, 8) * 2.0 + u.transpose() * u).inverse();
        report("block inverse update matches direct inversion",
               (upd - direct).cwiseAbs().maxCoeff() < 1e-10);
    }
    {
        OtProblem p;
        p.cost = random_matrix(6, 6).cwiseAbs();
        p.structure_vis = Matrix::Zero(6, 6);
        p.structure_txt = Matrix::Zero(6, 6);
        p.lambda1 = 1.0;
        p.epsilon = 0.05;
        p.marginal_src = uniform_marginal(6);
        p.marginal_tgt = uniform_marginal(6);
        const TransportPlan tp = fused_ot_solve(p, 20, 2000, 1e-7);
        const bool feasible =
            tp.converged &&
            (tp.plan.rowwise().sum() - p.marginal_src).cwiseAbs().maxCoeff() < 1e-7 &&
            (tp.plan.colwise().sum().transpose() - p.marginal_tgt).cwiseAbs().maxCoeff() <
                1e-7;
        report("transport plan satisfies both marginals", feasible);
        bool monotone = true;
        for (std::size_t i = 1; i < tp.objective_trace.size(); ++i) {
            monotone = monotone &&
                       tp.objective_trace[i] <= tp.objective_trace[i - 1] + 1e-9;
        }
        report("transport objective is non-increasing", monotone);
    }
    {
        AnalyticState state = analytic_init(6, 0.5, 1.0);
        expand_labels(state, 2);
        const Matrix x1 = random_matrix(12, 6);
        Matrix y1 = Matrix::Zero(12, 2);
        for (int i = 0; i < 12; ++i) y1(i, i % 2) = 1.0;
        phase_update(state, x1, y1);
        expand_labels(state, 2);
        const Matrix x2 = random_matrix(9, 6);
        Matrix y2 = Matrix::Zero(9, 2);
        for (int i = 0; i < 9; ++i) y2(i, i % 2) = 1.0;
        phase_update(state, x2, y2);

        Matrix x_all(21, 6);
        x_all << x1, x2;
        Matrix y_all = Matrix::Zero(21, 4);
        y_all.block(0, 0, 12, 2) = y1;
        y_all.block(12, 2, 9, 2) = y2;
        const Matrix w = ridge_solve(x_all, y_all, 0.5);
        report("recursive phase updates equal one-shot ridge",
               (state.weights - w).cwiseAbs().maxCoeff() < 1e-8);
    }
    {
        AccuracyMatrix m;
        m.a = {{1.0}, {0.8, 0.9}};
        const MetricsReport r = compute_metrics(m);
        report("metric definitions on the hand example",
               std::abs(r.acc - 0.85) < 1e-12 && std::abs(r.forgetting_f - 0.2) < 1e-12 &&
                   std::abs(r.bwf - 0.2) < 1e-12 && std::abs(r.transfer_f - 0.2) < 1e-12);
    }

    std::cout << (failures == 0 ? "all checks passed" : "checks FAILED") << "\n";
    return failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mcigle: exemplar-free class-incremental learning on multimodal graph streams"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string method = "mcigle";
    std::string matrix_path;

    auto* generate = app.add_subcommand("generate", "emit synthetic stream files");
    generate->add_option("--config", config_path, "config file")->required();
    generate->add_option("--out", out_dir, "output directory");

    auto* run = app.add_subcommand("run", "run the full experiment and write metrics");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--method", method, "mcigle | naive | joint")
        ->check(CLI::IsMember({"mcigle", "naive", "joint"}));

    auto* eval = app.add_subcommand("eval", "recompute metrics from a saved accuracy matrix");
    eval->add_option("--matrix", matrix_path, "accuracy_matrix.csv path")->required();
    eval->add_option("--out", out_dir, "output directory");

    auto* check = app.add_subcommand("check", "run the oracle/invariant self-check suite");

    try {
        app.parse(argc, argv);
        if (generate->parsed()) {
            return cmd_generate(config_path, out_dir);
        }
        if (run->parsed()) {
            return cmd_run(config_path, out_dir, method);
        }
        if (eval->parsed()) {
            return cmd_eval(matrix_path, out_dir);
        }
        if (check->parsed()) {
            return cmd_check();
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const mcigle::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
