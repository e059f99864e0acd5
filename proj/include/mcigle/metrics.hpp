#pragma once

#include <vector>

#include "mcigle/numeric_core.hpp"

namespace mcigle {

// Lower-triangular accuracy record: a[k][j] is the test accuracy on phase-j
// classes after training through phase k (defined for j <= k only).
struct AccuracyMatrix {
    std::vector<std::vector<double>> a;

    int phases() const { return static_cast<int>(a.size()); }
    void validate() const;  // completeness and [0,1] bounds
};

struct MetricsReport {
    double acc = 0.0;           // mean of the final row
    double forgetting_f = 0.0;  // mean peak-to-final drop over old phases
    double bwf = 0.0;           // mean diagonal-to-final drop
    double transfer_f = 0.0;    // mean of the defined transfer entries
    Matrix transfer_matrix;     // K x K, strictly lower-triangular in (i, j)
    std::vector<double> curve;  // cumulative accuracy after each phase
};

// Metric definitions over a complete matrix:
//   Acc   = mean_j a[K-1][j]
//   F     = mean_{j<K-1} (max_{k>=j} a[k][j] - a[K-1][j])
//   BwF   = mean_{j<K-1} (a[j][j] - a[K-1][j])
//   T_F(j<-i) = a[i-1][j] - a[i][j] for j < i; scalar = mean over entries
// K == 1 defines F, BwF, and T_F as 0.
MetricsReport compute_metrics(const AccuracyMatrix& matrix);

}  // namespace mcigle
