#pragma once

// Independent reference computations used by the tests. None of these call
// the solver under test.

#include <algorithm>
#include <cmath>

#include "advrobust/model.hpp"

namespace oracle {

using advrobust::MatrixXd;
using advrobust::SplitMix64;
using advrobust::VectorXd;

/// d^T A^T A d - 2 d^T A^T b
inline double perturbation_objective(const MatrixXd& a, const VectorXd& b, const VectorXd& d) {
    const VectorXd ad = a * d;
    return ad.squaredNorm() - 2.0 * ad.dot(b);
}

inline VectorXd random_unit(SplitMix64& eng, Eigen::Index n) {
    VectorXd z = advrobust::standard_normal(eng, n);
    double nz = z.norm();
    while (nz == 0.0) {
        z = advrobust::standard_normal(eng, n);
        nz = z.norm();
    }
    return z / nz;
}

/// Best objective over uniformly sampled points of the sphere of radius eps.
inline double sphere_sampling_max(const MatrixXd& a, const VectorXd& b, double eps, int n_points,
                                  SplitMix64& eng) {
    const MatrixXd ata = a.transpose() * a;
    const VectorXd atb = a.transpose() * b;
    double best = 0.0;  // d = 0 is feasible
    for (int i = 0; i < n_points; ++i) {
        const VectorXd d = eps * random_unit(eng, a.cols());
        best = std::max(best, d.dot(ata * d) - 2.0 * d.dot(atb));
    }
    return best;
}

/// Projected gradient ascent from random boundary starts.
inline double projected_gradient_max(const MatrixXd& a, const VectorXd& b, double eps,
                                     int restarts, int iters, SplitMix64& eng) {
    const MatrixXd ata = a.transpose() * a;
    const VectorXd atb = a.transpose() * b;
    const double lip = 2.0 * ata.norm() + 1e-12;
    double best = 0.0;
    for (int r = 0; r < restarts; ++r) {
        VectorXd d = eps * random_unit(eng, a.cols());
        for (int t = 0; t < iters; ++t) {
            d += (2.0 * (ata * d - atb)) / lip;
            const double nd = d.norm();
            if (nd > eps) d *= eps / nd;
        }
        best = std::max(best, d.dot(ata * d) - 2.0 * d.dot(atb));
    }
    return best;
}

inline MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, SplitMix64& eng) {
    MatrixXd m(rows, cols);
    advrobust::fill_standard_normal(eng, m);
    return m;
}

inline MatrixXd random_spd(Eigen::Index n, SplitMix64& eng, double ridge = 0.1) {
    const MatrixXd g = gaussian_matrix(n, n, eng);
    return g * g.transpose() / static_cast<double>(n) + ridge * MatrixXd::Identity(n, n);
}

}  // namespace oracle
