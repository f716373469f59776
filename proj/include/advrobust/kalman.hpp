#pragma once

// Finite-horizon state estimation for x_{t+1} = A x_t + w_t, y_t = C x_t + v_t,
// viewed as a linear inverse problem from the stacked measurements
// Y_N = (y_0, ..., y_N) to the state x_k, with an l2-bounded adversary on Y_N.

#include <cstdint>
#include <optional>
#include <vector>

#include "advrobust/model.hpp"
#include "advrobust/risk.hpp"
#include "advrobust/training.hpp"

namespace advrobust {

struct LtiSystem {
    MatrixXd a;  // n x n
    MatrixXd c;  // p x n
    CovarianceSpec sigma0;
    CovarianceSpec sigma_w;
    CovarianceSpec sigma_v;
    int horizon = 0;  // N

    Index state_dim() const { return a.rows(); }
    Index output_dim() const { return c.rows(); }
    Index stacked_dim() const { return c.rows() * (horizon + 1); }
};

LtiSystem make_system(const MatrixXd& a, const MatrixXd& c, const MatrixXd& sigma0,
                      const MatrixXd& sigma_w, const MatrixXd& sigma_v, int horizon);

/// Y_N = obs x_0 + toeplitz W_N and x_k = a_pow_k x_0 + gamma_k W_N.
struct StackedModel {
    MatrixXd obs;       // p(N+1) x n
    MatrixXd toeplitz;  // p(N+1) x nN, strictly block lower triangular
    MatrixXd gamma_k;   // n x nN: [A^{k-1} ... A I 0 ... 0]
    MatrixXd a_pow_k;   // A^k
    int k = 0;
};

StackedModel build_stacked(const LtiSystem& system, int k);

MatrixXd observability_matrix(const MatrixXd& a, const MatrixXd& c, int n_steps);

struct GramianSummary {
    MatrixXd gramian;  // O_N^T O_N
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double frobenius = 0.0;
};

GramianSummary observability_gramian(const LtiSystem& system, int n_steps);

/// rank(O_{n-1}) == n with singular values below 1e-10 * sigma_1 treated as zero.
bool is_observable(const LtiSystem& system);

/// Isotropic covariances and A^T A = rho^2 I.
struct IsotropicParameters {
    double rho = 0.0;
    double sigma0_sq = 0.0;
    double sigma_w_sq = 0.0;
    double sigma_v_sq = 0.0;
};

std::optional<IsotropicParameters> isotropic_parameters(const LtiSystem& system,
                                                        double tol = 1e-9);

/// sum_{j=0}^{k-1} rho^{2j}; equals k at rho = 1.
double r_factor(double rho, int k);

/// Cov(x_k) = A^k Sigma_0 A^k^T + sum_{i=1}^k A^{k-i} Sigma_w A^{k-i}^T.
MatrixXd state_covariance(const LtiSystem& system, int k);

/// Cov(Y_N) = O Sigma_0 O^T + tau (I_N (x) Sigma_w) tau^T + I_{N+1} (x) Sigma_v.
MatrixXd measurement_covariance(const LtiSystem& system);

/// Cov(x_k, Y_N) = A^k Sigma_0 O^T + Gamma_k (I_N (x) Sigma_w) tau^T.
MatrixXd state_measurement_covariance(const LtiSystem& system, int k);

/// Minimum mean-square linear estimator of x_k from Y_N (n x p(N+1)).
MatrixXd kalman_estimator(const LtiSystem& system, int k);

/// The isotropic closed form; throws ConfigError unless the covariances are isotropic.
MatrixXd kalman_estimator_isotropic(const LtiSystem& system, int k);

/// Filtered means x_k^+ for k = 0..N from the covariance recursion.
std::vector<VectorXd> recursive_kf(const LtiSystem& system,
                                   const std::vector<VectorXd>& measurements);

struct Rollout {
    std::vector<VectorXd> states;        // x_0 .. x_N
    std::vector<VectorXd> measurements;  // y_0 .. y_N
    VectorXd process_noise;              // W_N
    VectorXd measurement_noise;          // V_N
};

/// Step-by-step simulation: draws x_0, then v_t and w_t for each t in order.
Rollout simulate(const LtiSystem& system, SplitMix64& engine);

VectorXd stack(const std::vector<VectorXd>& blocks);

double estimator_sr_closed(const MatrixXd& l, const LtiSystem& system, int k);

/// Cov(x_k - L Y_N) = S Sigma_0 S^T + T (I (x) Sigma_w) T^T + L (I (x) Sigma_v) L^T
/// with S = A^k - L O_N and T = Gamma_k - L tau_N.
CovarianceSpec residual_covariance(const MatrixXd& l, const LtiSystem& system, int k);

/// State estimation as a linear inverse problem: input Y_N, target x_k.
EstimationTask as_estimation_problem(const LtiSystem& system, int k, double epsilon);

RiskEstimate estimator_ar_mc(const MatrixXd& l, const LtiSystem& system, int k, double epsilon,
                             std::uint64_t n_samples, const RngStream& stream);

GapEstimate estimator_gap_mc(const MatrixXd& l, const LtiSystem& system, int k, double epsilon,
                             std::uint64_t n_samples, const RngStream& stream);

struct LowerBounds {
    double general = 0.0;    // 2 sqrt(2/pi) eps/sqrt(n) tr((L^T Sigma L)^{1/2})
    double frobenius = 0.0;  // 2 sqrt(2/pi) eps/sqrt(n) lambda_min(Sigma_v)^{1/2} ||L||_F^2
};

LowerBounds gap_lower_bounds(const MatrixXd& l, const LtiSystem& system, int k, double epsilon);

/// 2 eps ||L||_2 ||Sigma^{1/2}||_F + eps^2 ||L||_2^2 with Sigma the residual covariance.
double gap_upper_bound_general(const MatrixXd& l, const LtiSystem& system, int k, double epsilon);

enum class BoundForm { isotropic, general };
enum class ObservabilityRegime { high_observability, low_observability };

const char* to_string(BoundForm f);
const char* to_string(ObservabilityRegime r);

struct KalmanLowerBound {
    double value = 0.0;
    BoundForm form = BoundForm::general;
};

struct KalmanUpperBound {
    double value = 0.0;
    ObservabilityRegime regime = ObservabilityRegime::low_observability;
    BoundForm form = BoundForm::general;
};

/// Lower bound on AR - SR of the Kalman estimator in terms of ||W_o(N)||_F.
KalmanLowerBound kalman_gap_lower_bound(const LtiSystem& system, int k, double epsilon);

/// Upper bound on AR - SR of the Kalman estimator in terms of lambda_min(W_o(N));
/// the sharper form applies when lambda_min(W_o)^{1/2} >= sigma_v / sigma_wedge^2.
KalmanUpperBound kalman_gap_upper_bound(const LtiSystem& system, int k, double epsilon);

struct EstimatorBoundReport {
    double gap_lower_general = 0.0;
    double gap_lower_frobenius = 0.0;
    std::optional<double> kalman_gap_lower;
    double gap_upper_general = 0.0;
    std::optional<double> kalman_gap_upper;
    ObservabilityRegime regime = ObservabilityRegime::low_observability;
};

/// Bounds for a given estimator; without `l` the Kalman estimator is used and
/// the Kalman-specific bounds are filled in.
EstimatorBoundReport bound_report(const LtiSystem& system, int k, double epsilon,
                                  const std::optional<MatrixXd>& l = std::nullopt);

}  // namespace advrobust
