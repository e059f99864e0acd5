#include "mcigle/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "mcigle/errors.hpp"

namespace mcigle {

void AccuracyMatrix::validate() const {
    if (a.empty()) {
        throw InputError("accuracy matrix: no phases");
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k].size() != k + 1) {
            throw InputError("accuracy matrix: row " + std::to_string(k) +
                             " is incomplete");
        }
        for (double v : a[k]) {
            if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
                throw InputError("accuracy matrix: entry outside [0,1]");
            }
        }
    }
}

MetricsReport compute_metrics(const AccuracyMatrix& matrix) {
    matrix.validate();
    const int K = matrix.phases();
    const auto& a = matrix.a;

    MetricsReport report;
    double acc = 0.0;
    for (int j = 0; j < K; ++j) {
        acc += a[K - 1][j];
    }
    report.acc = acc / K;

    report.transfer_matrix = Matrix::Zero(K, K);
    if (K > 1) {
        double f = 0.0, bwf = 0.0;
        for (int j = 0; j < K - 1; ++j) {
            double peak = 0.0;
            for (int k = j; k < K; ++k) {
                peak = std::max(peak, a[k][j]);
            }
            f += peak - a[K - 1][j];
            bwf += a[j][j] - a[K - 1][j];
        }
        report.forgetting_f = f / (K - 1);
        report.bwf = bwf / (K - 1);

        double t_sum = 0.0;
        int t_count = 0;
        for (int i = 1; i < K; ++i) {
            for (int j = 0; j < i; ++j) {
                const double drop = a[i - 1][j] - a[i][j];
                report.transfer_matrix(i, j) = drop;
                t_sum += drop;
                ++t_count;
            }
        }
        report.transfer_f = t_sum / t_count;
    }

    report.curve.resize(K);
    for (int k = 0; k < K; ++k) {
        double sum = 0.0;
        for (int j = 0; j <= k; ++j) {
            sum += a[k][j];
        }
        report.curve[k] = sum / (k + 1);
    }
    return report;
}

}  // namespace mcigle
