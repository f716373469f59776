#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "advrobust/errors.hpp"

namespace advrobust {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kPsdTol = 1e-10;

// ---------------------------------------------------------------------------
// Symmetric eigen utilities, templated on the scalar type.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct EigenExtremes {
    Scalar min;
    Scalar max;
};

template <typename Derived>
EigenExtremes<typename Derived::Scalar> eigen_extremes(const Eigen::MatrixBase<Derived>& sym) {
    using Scalar = typename Derived::Scalar;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (sym.rows() == 0) return {Scalar(0), Scalar(0)};
    Mat s = (sym + sym.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
    return {es.eigenvalues()(0), es.eigenvalues()(s.rows() - 1)};
}

/// Symmetric PSD square root via eigendecomposition; eigenvalues below zero
/// (rounding) are clamped.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
psd_sqrt(const Eigen::MatrixBase<Derived>& sym) {
    using Scalar = typename Derived::Scalar;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (sym.rows() == 0) return Mat(0, 0);
    Mat s = (sym + sym.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Mat> es(s);
    const auto roots = es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt();
    Mat out = es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
    return (out + out.transpose()) / Scalar(2);
}

/// tr(S^{1/2}) for symmetric PSD S.
template <typename Derived>
typename Derived::Scalar trace_sqrt(const Eigen::MatrixBase<Derived>& sym) {
    using Scalar = typename Derived::Scalar;
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (sym.rows() == 0) return Scalar(0);
    Mat s = (sym + sym.transpose()) / Scalar(2);
    Eigen::SelfAdjointEigenSolver<Mat> es(s, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseMax(Scalar(0)).cwiseSqrt().sum();
}

// ---------------------------------------------------------------------------
// Covariances and problems
// ---------------------------------------------------------------------------

/// A validated, symmetrized covariance. Only constructible through
/// validate_covariance().
class CovarianceSpec {
public:
    CovarianceSpec() = default;

    const MatrixXd& matrix() const { return matrix_; }
    Index dim() const { return matrix_.rows(); }
    bool strict() const { return strict_; }
    double lambda_min() const { return lambda_min_; }
    double lambda_max() const { return lambda_max_; }

    /// True when the matrix equals s * I within `tol` (absolute, entrywise).
    bool is_isotropic(double tol = 1e-10) const;

private:
    friend CovarianceSpec validate_covariance(const MatrixXd& m, bool strict);

    MatrixXd matrix_;
    bool strict_ = false;
    double lambda_min_ = 0.0;
    double lambda_max_ = 0.0;
};

/// Throws ConfigError on non-square, non-finite, asymmetric (> 1e-10),
/// not PSD (eigenvalue < -1e-10) or, when `strict`, not positive definite.
CovarianceSpec validate_covariance(const MatrixXd& m, bool strict);

MatrixXd symmetric_sqrt(const CovarianceSpec& s);

/// Lower Cholesky factor L with L L^T = S. Throws NumericalError when S is
/// not numerically positive definite.
MatrixXd cholesky_factor(const CovarianceSpec& s);

/// y = A_star x + w with x ~ N(0, sigma_x), w ~ N(0, sigma_w), and an l2
/// adversarial budget epsilon on x.
struct LinearInverseProblem {
    MatrixXd a_star;
    CovarianceSpec sigma_x;
    CovarianceSpec sigma_w;
    double epsilon = 0.0;

    Index input_dim() const { return a_star.cols(); }
    Index output_dim() const { return a_star.rows(); }
};

LinearInverseProblem make_problem(const MatrixXd& a_star, const MatrixXd& sigma_x,
                                  const MatrixXd& sigma_w, double epsilon);

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// SplitMix64; small-state generator that is cheap to seed per sample.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }

    result_type operator()() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

/// Keyed family of independent streams. substream(i) is a pure function of
/// (seed, stream_id, i), so sample i never depends on how work is sharded.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    SplitMix64 substream(std::uint64_t index) const;
    RngStream child(std::uint64_t id) const;
};

template <typename Derived>
void fill_standard_normal(SplitMix64& engine, Eigen::MatrixBase<Derived>& out) {
    std::normal_distribution<typename Derived::Scalar> normal;
    for (Index j = 0; j < out.cols(); ++j)
        for (Index i = 0; i < out.rows(); ++i) out(i, j) = normal(engine);
}

inline VectorXd standard_normal(SplitMix64& engine, Index dim) {
    VectorXd z(dim);
    fill_standard_normal(engine, z);
    return z;
}

struct SampleBatch {
    std::vector<VectorXd> xs;
    std::vector<VectorXd> ws;
    std::vector<VectorXd> ys;
    std::uint64_t seed = 0;
    std::uint64_t base_index = 0;
};

/// Pre-factored sampler for one problem. draw(i) uses substream(i) and
/// produces x first, then w, then y = A_star x + w.
class ProblemSampler {
public:
    explicit ProblemSampler(const LinearInverseProblem& problem);

    void draw(const RngStream& stream, std::uint64_t index, VectorXd& x, VectorXd& w,
              VectorXd& y) const;

private:
    MatrixXd a_star_;
    MatrixXd chol_x_;
    MatrixXd chol_w_;
};

SampleBatch sample_batch(const LinearInverseProblem& problem, std::size_t count,
                         const RngStream& stream, std::uint64_t base_index);

}  // namespace advrobust
