#pragma once

// Exact maximizer of the l2-bounded quadratic
//
//   maximize  d^T A^T A d - 2 d^T A^T b   subject to  ||d||_2 <= eps,
//
// i.e. the worst-case input perturbation for the residual b - A d. The
// solver works in the coordinates of a full SVD of A, so one factorization
// can be reused across many right-hand sides b.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "advrobust/errors.hpp"

namespace advrobust {

enum class Branch { easy, hard, degenerate };

inline const char* to_string(Branch b) {
    switch (b) {
        case Branch::easy: return "easy";
        case Branch::hard: return "hard";
        case Branch::degenerate: return "degenerate";
    }
    return "?";
}

template <typename Scalar>
struct SvdFactorization {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Matrix u;                // p x p
    Vector singular_values;  // min(n, p), nonincreasing
    Matrix v;                // n x n

    Eigen::Index rows() const { return u.rows(); }
    Eigen::Index cols() const { return v.rows(); }
    Scalar sigma1() const { return singular_values.size() ? singular_values(0) : Scalar(0); }
};

template <typename Scalar>
struct PerturbationResult {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> delta;
    Scalar dual_lambda = 0;
    Scalar objective_gain = 0;
    Branch branch = Branch::degenerate;
};

template <typename Scalar>
struct TrsTolerances {
    // sigma_i joins the top cluster when sigma_1 - sigma_i <= cluster * max(sigma_1, 1).
    Scalar cluster = Scalar(1e-9);
    // hard case requires the off-top sum below eps^2 * (1 - hard_margin).
    Scalar hard_margin = Scalar(1e-9);
    Scalar root_rel_tol = Scalar(1e-12);
    int root_max_iter = 200;
};

template <typename Derived>
SvdFactorization<typename Derived::Scalar> svd_full(const Eigen::MatrixBase<Derived>& a) {
    using Scalar = typename Derived::Scalar;
    using Matrix = typename SvdFactorization<Scalar>::Matrix;
    if (!a.allFinite()) throw ConfigError("svd_full: matrix has non-finite entries");
    if (a.rows() == 0 || a.cols() == 0) throw ConfigError("svd_full: empty matrix");
    Eigen::JacobiSVD<Matrix> svd(a.derived().eval(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

/// Unique root mu > 0 of g(mu) = sum_i w_i / (mu + gap_i)^2 = eps^2 with all
/// gap_i >= 0. Working with the offset mu = lambda - sigma_1^2 keeps full
/// relative precision when the root is close to sigma_1^2. Safeguarded Newton
/// on phi(mu) = g^{-1/2} - 1/eps, which is increasing and concave.
template <typename Scalar>
Scalar secular_offset(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& weights,
                      const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& gaps, Scalar eps,
                      const TrsTolerances<Scalar>& tol = {}) {
    if (weights.size() != gaps.size())
        throw ConfigError("secular_root: weights and shifts differ in length");
    if (!(eps > 0)) throw ConfigError("secular_root: eps must be positive");
    const Scalar total = weights.sum();
    if (!(total > 0)) throw NumericalError("secular_root: all weights are zero");

    const Scalar target = eps * eps;
    auto g = [&](Scalar mu) {
        Scalar s = 0;
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            if (weights(i) == 0) continue;
            const Scalar d = mu + gaps(i);
            s += weights(i) / (d * d);
        }
        return s;
    };
    auto gprime_half = [&](Scalar mu) {  // -g'(mu) / 2
        Scalar s = 0;
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            if (weights(i) == 0) continue;
            const Scalar d = mu + gaps(i);
            s += weights(i) / (d * d * d);
        }
        return s;
    };

    // g(sqrt(total) / eps) <= eps^2 in exact arithmetic; the equality case
    // (all weight at gap 0) needs a little room under rounding.
    Scalar lo = 0;
    Scalar hi = std::sqrt(total) / eps;
    for (int grow = 0; grow < 8 && !(g(hi) <= target); ++grow) hi *= 2;
    if (!(g(hi) <= target)) throw NumericalError("secular_root: failed to bracket the root");
    if (g(lo) <= target) return lo;

    Scalar mu = hi;
    for (int it = 0; it < tol.root_max_iter; ++it) {
        const Scalar gv = g(mu);
        if (std::abs(gv - target) <= tol.root_rel_tol * target) return mu;
        if (gv > target) lo = std::max(lo, mu);
        else hi = std::min(hi, mu);
        if (!(hi - lo > 4 * std::numeric_limits<Scalar>::epsilon() * std::abs(hi))) break;

        const Scalar phi = Scalar(1) / std::sqrt(gv) - Scalar(1) / eps;
        const Scalar dphi = gprime_half(mu) / (gv * std::sqrt(gv));
        Scalar next = mu - phi / dphi;
        if (!(next > lo && next < hi) || !std::isfinite(next)) next = lo + (hi - lo) / 2;
        mu = next;
    }
    const Scalar glo = g(lo), ghi = g(hi);
    return std::abs(glo - target) < std::abs(ghi - target) ? lo : hi;
}

/// Unique root lambda > lower of f(lambda) = sum_i w_i / (lambda - s_i)^2 = eps^2,
/// where every shift s_i <= lower.
template <typename Scalar>
Scalar secular_root(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& weights,
                    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& shifts, Scalar lower,
                    Scalar eps, const TrsTolerances<Scalar>& tol = {}) {
    if (weights.size() != shifts.size())
        throw ConfigError("secular_root: weights and shifts differ in length");
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gaps =
        (Scalar(lower) - shifts.array()).cwiseMax(Scalar(0)).matrix();
    return lower + secular_offset<Scalar>(weights, gaps, eps, tol);
}

/// Solves the perturbation problem for one residual b given a factorization of A.
template <typename Scalar, typename DerivedB>
PerturbationResult<Scalar> worst_case_perturbation(const SvdFactorization<Scalar>& svd,
                                                   const Eigen::MatrixBase<DerivedB>& b, Scalar eps,
                                                   const TrsTolerances<Scalar>& tol = {}) {
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    const Eigen::Index p = svd.rows(), n = svd.cols();
    const Eigen::Index m = svd.singular_values.size();
    if (b.size() != p) throw ConfigError("worst_case_perturbation: b has wrong length");
    if (!b.allFinite()) throw ConfigError("worst_case_perturbation: b has non-finite entries");
    if (!(eps >= 0) || !std::isfinite(eps))
        throw ConfigError("worst_case_perturbation: eps must be finite and nonnegative");

    PerturbationResult<Scalar> out;
    out.delta = Vector::Zero(n);
    const Scalar s1 = svd.sigma1();
    const Scalar s1sq = s1 * s1;
    if (eps == 0 || s1 == 0 || m == 0) {
        out.dual_lambda = s1sq;
        out.branch = Branch::degenerate;
        return out;
    }

    const Vector c = svd.u.leftCols(m).transpose() * b;
    const Vector& s = svd.singular_values;
    const Scalar cluster_tol = tol.cluster * std::max(s1, Scalar(1));
    Eigen::Index top = 0;
    while (top < m && s1 - s(top) <= cluster_tol) ++top;

    Vector weights = (c.array() * s.array()).square().matrix();
    // sigma_1^2 - sigma_i^2, formed as a product to avoid cancellation.
    Vector gaps = ((s1 - s.array()) * (s1 + s.array())).cwiseMax(Scalar(0)).matrix();
    gaps.head(top).setZero();
    const Scalar atb_norm = std::sqrt(weights.sum());
    const Scalar top_weight = weights.head(top).sum();
    Scalar off_top = 0;
    for (Eigen::Index i = top; i < m; ++i) off_top += weights(i) / (gaps(i) * gaps(i));
    // Top-space component of A^T b below this level would only perturb the
    // KKT residual by far less than its tolerance.
    const bool top_negligible =
        std::sqrt(top_weight) <= Scalar(1e-10) * (s1sq * eps + atb_norm);

    Vector z = Vector::Zero(n);
    if (top_negligible && off_top < eps * eps * (Scalar(1) - tol.hard_margin)) {
        for (Eigen::Index i = top; i < m; ++i) z(i) = -s(i) * c(i) / gaps(i);
        const Scalar cz = std::sqrt(std::max(Scalar(0), eps * eps - off_top));
        z(0) = (c(0) > 0 ? -cz : cz);
        out.dual_lambda = s1sq;
        out.branch = Branch::hard;
    } else {
        if (top_negligible) weights.head(top).setZero();
        const Scalar mu = secular_offset<Scalar>(weights, gaps, eps, tol);
        for (Eigen::Index i = 0; i < m; ++i) {
            const Scalar d = mu + gaps(i);
            z(i) = d > 0 ? -s(i) * c(i) / d : Scalar(0);
        }
        out.dual_lambda = s1sq + mu;
        out.branch = Branch::easy;
    }
    // At the root ||z|| = eps; remove the residual root-finding error so the
    // maximizer sits exactly on the sphere.
    const Scalar zn = z.norm();
    if (zn > 0) z *= eps / zn;

    Scalar gain = 0;
    for (Eigen::Index i = 0; i < m; ++i) gain += s(i) * z(i) * (s(i) * z(i) - 2 * c(i));
    out.objective_gain = std::max(Scalar(0), gain);
    out.delta = svd.v * z;
    return out;
}

template <typename DerivedA, typename DerivedB>
PerturbationResult<typename DerivedA::Scalar> worst_case_perturbation(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
    typename DerivedA::Scalar eps) {
    if (b.size() != a.rows()) throw ConfigError("worst_case_perturbation: b has wrong length");
    return worst_case_perturbation(svd_full(a), b, eps);
}

/// ||(lambda I - A^T A) delta + A^T b||_2, the stationarity residual.
template <typename DerivedA, typename DerivedB, typename Scalar>
Scalar kkt_residual(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                    const PerturbationResult<Scalar>& r) {
    return (r.dual_lambda * r.delta - a.transpose() * (a * r.delta) + a.transpose() * b).norm();
}

}  // namespace advrobust
