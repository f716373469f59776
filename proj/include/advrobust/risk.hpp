#pragma once

#include <cstdint>

#include "advrobust/model.hpp"
#include "advrobust/montecarlo.hpp"
#include "advrobust/trs.hpp"

namespace advrobust {

struct RiskEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t n_samples = 0;
    std::uint64_t seed = 0;

    static RiskEstimate from(const RunningStats& s, std::uint64_t seed) {
        return {s.mean, s.std_error(), s.count, seed};
    }
};

/// Analytic sandwich for AR(A) - SR(A). `cross_term` estimates
/// E||A^T (y - A x)||_2.
struct GapBounds {
    double lower = 0.0;
    double upper = 0.0;
    double lambda_min = 0.0;  // lambda_min(A^T A)
    double lambda_max = 0.0;  // lambda_max(A^T A)
    double cross_term = 0.0;
    double cross_term_std_error = 0.0;
};

/// Monte Carlo estimates that share one set of samples.
struct GapEstimate {
    RiskEstimate standard;     // ||y - A x||^2
    RiskEstimate adversarial;  // max over the ball
    RiskEstimate gap;          // pathwise difference (objective gain)
    GapBounds bounds;          // lower/upper evaluated on the same samples
};

/// tr(Sigma_w) + tr((A - A_star) Sigma_x (A - A_star)^T)
double standard_risk_closed(const MatrixXd& a, const LinearInverseProblem& problem);

RiskEstimate standard_risk_mc(const MatrixXd& a, const LinearInverseProblem& problem,
                              std::uint64_t n_samples, const RngStream& stream);

/// Per sample: ||b||^2 + objective gain with b = y - A x; the SVD of A is
/// computed once.
RiskEstimate adversarial_risk_mc(const MatrixXd& a, const LinearInverseProblem& problem,
                                 std::uint64_t n_samples, const RngStream& stream);

/// lambda_min(A^T A): sigma_n^2 when p >= n, otherwise 0.
double gram_lambda_min(const SvdFactorization<double>& svd);
double gram_lambda_max(const SvdFactorization<double>& svd);

GapBounds gap_bounds_mc(const MatrixXd& a, const LinearInverseProblem& problem,
                        std::uint64_t n_samples, const RngStream& stream);

/// SR, AR, their pathwise gap and the gap bounds from a single common set of
/// samples.
GapEstimate gap_estimate_mc(const MatrixXd& a, const LinearInverseProblem& problem,
                            std::uint64_t n_samples, const RngStream& stream);

/// Closed-form bounds at A = A_star under isotropic noise Sigma_w = sigma_w^2 I.
GapBounds astar_gap_bounds(const LinearInverseProblem& problem);

}  // namespace advrobust
