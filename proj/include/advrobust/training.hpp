#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "advrobust/model.hpp"
#include "advrobust/risk.hpp"

namespace advrobust {

/// A zero-mean linear estimation problem seen through its second moments:
/// predict `target` t from `input` u with a matrix M, loss ||t - M u||^2, and
/// an adversary that perturbs u inside an l2 ball of radius epsilon.
///
/// The linear inverse problem uses u = x, t = y; state estimation uses
/// u = Y_N (stacked measurements), t = x_k.
struct EstimationTask {
    using Sampler = std::function<void(const RngStream&, std::uint64_t, VectorXd& input,
                                       VectorXd& target)>;

    MatrixXd input_cov;   // E[u u^T]
    MatrixXd cross_cov;   // E[t u^T]
    MatrixXd target_cov;  // E[t t^T]
    double epsilon = 0.0;
    Sampler sample;

    Index input_dim() const { return input_cov.rows(); }
    Index output_dim() const { return target_cov.rows(); }
};

EstimationTask make_task(const LinearInverseProblem& problem);

double task_standard_risk(const EstimationTask& task, const MatrixXd& m);
MatrixXd task_standard_risk_gradient(const EstimationTask& task, const MatrixXd& m);
/// argmin of the standard risk, cross_cov * input_cov^{-1}.
MatrixXd task_standard_minimizer(const EstimationTask& task);

/// SR, AR and pathwise gap of M on common samples.
GapEstimate task_gap_mc(const EstimationTask& task, const MatrixXd& m, std::uint64_t n_samples,
                        const RngStream& stream);

/// Envelope gradient of max_{||d|| <= eps} ||y - A(x + d)||^2 with respect to A:
/// -2 (y - A(x + d*)) (x + d*)^T.
MatrixXd adversarial_loss_grad(const MatrixXd& a, const VectorXd& x, const VectorXd& y,
                               double eps);

/// Same, reusing a factorization of A.
MatrixXd adversarial_loss_grad(const MatrixXd& a, const SvdFactorization<double>& svd,
                               const VectorXd& x, const VectorXd& y, double eps);

/// Value of the inner maximum, max_{||d|| <= eps} ||y - A(x + d)||^2.
double adversarial_loss(const MatrixXd& a, const VectorXd& x, const VectorXd& y, double eps);

enum class InitKind { nominal, zeros, given };

struct TrainConfig {
    static constexpr double kPureAdversarial = std::numeric_limits<double>::infinity();

    double lambda = 0.0;  // infinity selects the pure adversarial objective
    double epsilon = 0.0;
    std::uint64_t batch_size = 32;
    std::uint64_t n_iters = 5000;
    double step_c0 = 0.5;
    double step_decay = 0.5;
    std::uint64_t seed = 0;
    InitKind init = InitKind::nominal;
    MatrixXd init_matrix;  // used when init == given
    double tail_fraction = 0.1;

    bool pure_adversarial() const { return std::isinf(lambda); }
    void validate() const;
};

struct TrainTrace {
    std::vector<double> objective;  // SR part of the objective at each iterate (lambda == 0 only)
};

/// Preconditioned SGD on SR(M) + lambda AR(M). The SR gradient is exact, the
/// AR gradient is a minibatch envelope gradient; every step is right-multiplied
/// by (2 (1 + lambda) E[u u^T])^{-1}. Returns the average of the final
/// tail_fraction of iterates.
MatrixXd train(const EstimationTask& task, const TrainConfig& config,
               TrainTrace* trace = nullptr);

MatrixXd train(const LinearInverseProblem& problem, const TrainConfig& config);

struct ParetoPoint {
    double lambda = 0.0;
    MatrixXd a;
    double sr = 0.0;
    RiskEstimate ar;
};

/// Trains along a nondecreasing lambda grid, warm-starting each point from the
/// previous solution. All points are evaluated on one shared evaluation stream.
std::vector<ParetoPoint> pareto_trace(const EstimationTask& task,
                                      const std::vector<double>& lambda_grid,
                                      const TrainConfig& config, std::uint64_t eval_samples);

std::vector<ParetoPoint> pareto_trace(const LinearInverseProblem& problem,
                                      const std::vector<double>& lambda_grid,
                                      const TrainConfig& config, std::uint64_t eval_samples);

/// 15 log-spaced points in [1e-3, 1e2] with the endpoints 0 and infinity.
std::vector<double> default_lambda_grid();

}  // namespace advrobust
