#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "metaselect/data.hpp"

namespace testutil {

// Random meta-analytic dataset: `metric` standard-normal covariates followed
// by `binary` 0/1 covariates; y = 0.3 + 0.4 * x0 + noise.
inline metaselect::MetaDataset random_dataset(std::size_t k, std::size_t metric, std::size_t binary, unsigned seed,
                                              double tau = 0.3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.02, 0.3);
    metaselect::MetaDataset ds;
    for (std::size_t j = 0; j < metric + binary; ++j) {
        metaselect::CovariateMeta m;
        m.name = (j < metric ? "m" : "b") + std::to_string(j);
        m.scale = j < metric ? metaselect::Scale::metric : metaselect::Scale::binary;
        if (j >= metric) {
            m.reference_level = "0";
            m.other_level = "1";
        }
        ds.covariates.push_back(m);
    }
    for (std::size_t i = 0; i < k; ++i) {
        metaselect::StudyRecord s;
        s.v = u(rng);
        s.n = 50 + static_cast<int>(i);
        for (std::size_t j = 0; j < metric + binary; ++j) {
            s.x.push_back(j < metric ? z(rng) : static_cast<double>(rng() % 2));
        }
        const double x0 = s.x.empty() ? 0.0 : s.x[0];
        s.y = 0.3 + 0.4 * x0 + tau * z(rng) + std::sqrt(s.v) * z(rng);
        ds.studies.push_back(s);
    }
    return ds;
}

// Dense Gaussian elimination with partial pivoting; solves A x = b.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::fabs(A[r][c]) > std::fabs(A[piv][c])) piv = r;
        }
        std::swap(A[c], A[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = A[r][c] / A[c][c];
            for (std::size_t cc = c; cc < n; ++cc) A[r][cc] -= f * A[c][cc];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= A[i][c] * x[c];
        x[i] = s / A[i][i];
    }
    return x;
}

// Determinant via the same elimination.
inline double gauss_det(std::vector<std::vector<double>> A) {
    const std::size_t n = A.size();
    double det = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::fabs(A[r][c]) > std::fabs(A[piv][c])) piv = r;
        }
        if (piv != c) {
            std::swap(A[c], A[piv]);
            det = -det;
        }
        det *= A[c][c];
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = A[r][c] / A[c][c];
            for (std::size_t cc = c; cc < n; ++cc) A[r][cc] -= f * A[c][cc];
        }
    }
    return det;
}

}  // namespace testutil
