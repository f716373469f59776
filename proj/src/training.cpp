#include "advrobust/training.hpp"

#include <cmath>
#include <memory>
#include <string>

namespace advrobust {

namespace {

constexpr std::uint64_t kTrainStream = 0x7261696e;  // per-grid-point offset added
constexpr std::uint64_t kEvalStream = 0x6576616c;
constexpr double kDivergenceNorm = 1e6;

void check_task_shape(const EstimationTask& task, const MatrixXd& m) {
    if (m.rows() != task.output_dim() || m.cols() != task.input_dim())
        throw ConfigError("model matrix has shape " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()) + ", expected " +
                          std::to_string(task.output_dim()) + "x" +
                          std::to_string(task.input_dim()));
}

}  // namespace

EstimationTask make_task(const LinearInverseProblem& problem) {
    EstimationTask task;
    const MatrixXd& sx = problem.sigma_x.matrix();
    task.input_cov = sx;
    task.cross_cov = problem.a_star * sx;
    task.target_cov = problem.a_star * sx * problem.a_star.transpose() + problem.sigma_w.matrix();
    task.epsilon = problem.epsilon;
    auto sampler = std::make_shared<ProblemSampler>(problem);
    task.sample = [sampler](const RngStream& stream, std::uint64_t i, VectorXd& u, VectorXd& t) {
        VectorXd w;
        sampler->draw(stream, i, u, w, t);
    };
    return task;
}

double task_standard_risk(const EstimationTask& task, const MatrixXd& m) {
    check_task_shape(task, m);
    return task.target_cov.trace() - 2.0 * (m * task.cross_cov.transpose()).trace() +
           (m * task.input_cov * m.transpose()).trace();
}

MatrixXd task_standard_risk_gradient(const EstimationTask& task, const MatrixXd& m) {
    check_task_shape(task, m);
    return 2.0 * (m * task.input_cov - task.cross_cov);
}

MatrixXd task_standard_minimizer(const EstimationTask& task) {
    Eigen::LLT<MatrixXd> llt(task.input_cov);
    if (llt.info() != Eigen::Success)
        throw NumericalError("input covariance is not positive definite");
    return llt.solve(task.cross_cov.transpose()).transpose();
}

GapEstimate task_gap_mc(const EstimationTask& task, const MatrixXd& m, std::uint64_t n_samples,
                        const RngStream& stream) {
    check_task_shape(task, m);
    if (n_samples == 0) throw ConfigError("n_samples must be positive");
    const auto svd = svd_full(m);
    const double eps = task.epsilon;
    auto stats = sharded_stats<4>(n_samples, [&](std::uint64_t i) {
        VectorXd u, t;
        task.sample(stream, i, u, t);
        const VectorXd b = t - m * u;
        const double base = b.squaredNorm();
        const double gain = worst_case_perturbation(svd, b, eps).objective_gain;
        return std::array<double, 4>{base, base + gain, gain, (m.transpose() * b).norm()};
    });
    GapEstimate out;
    out.standard = RiskEstimate::from(stats[0], stream.seed);
    out.adversarial = RiskEstimate::from(stats[1], stream.seed);
    out.gap = RiskEstimate::from(stats[2], stream.seed);
    out.bounds.lambda_min = gram_lambda_min(svd);
    out.bounds.lambda_max = gram_lambda_max(svd);
    out.bounds.cross_term = stats[3].mean;
    out.bounds.cross_term_std_error = stats[3].std_error();
    out.bounds.lower = 2.0 * eps * out.bounds.cross_term + eps * eps * out.bounds.lambda_min;
    out.bounds.upper = 2.0 * eps * out.bounds.cross_term + eps * eps * out.bounds.lambda_max;
    return out;
}

MatrixXd adversarial_loss_grad(const MatrixXd& a, const SvdFactorization<double>& svd,
                               const VectorXd& x, const VectorXd& y, double eps) {
    if (x.size() != a.cols() || y.size() != a.rows())
        throw ConfigError("adversarial_loss_grad: dimension mismatch");
    const VectorXd b = y - a * x;
    const VectorXd z = x + worst_case_perturbation(svd, b, eps).delta;
    return -2.0 * (y - a * z) * z.transpose();
}

MatrixXd adversarial_loss_grad(const MatrixXd& a, const VectorXd& x, const VectorXd& y,
                               double eps) {
    return adversarial_loss_grad(a, svd_full(a), x, y, eps);
}

double adversarial_loss(const MatrixXd& a, const VectorXd& x, const VectorXd& y, double eps) {
    const VectorXd b = y - a * x;
    return b.squaredNorm() + worst_case_perturbation(a, b, eps).objective_gain;
}

void TrainConfig::validate() const {
    if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw ConfigError("epsilon must be finite and nonnegative");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (n_iters == 0) throw ConfigError("n_iters must be positive");
    if (!(step_c0 > 0.0) || !std::isfinite(step_c0)) throw ConfigError("step_c0 must be positive");
    if (!(step_decay >= 0.5 && step_decay <= 1.0))
        throw ConfigError("step_decay must lie in [0.5, 1]");
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
        throw ConfigError("tail_fraction must lie in (0, 1]");
}

namespace {

MatrixXd train_impl(const EstimationTask& task, const TrainConfig& config, const MatrixXd& init,
                    std::uint64_t stream_id, TrainTrace* trace) {
    config.validate();
    check_task_shape(task, init);
    if (config.epsilon != task.epsilon)
        throw ConfigError("training epsilon differs from the task's adversarial budget");
    const double eps = config.epsilon;
    const bool pure_ar = config.pure_adversarial();
    const bool use_ar = pure_ar || config.lambda > 0.0;
    const double ar_weight = pure_ar ? 1.0 : config.lambda;
    const double curvature = 2.0 * (pure_ar ? 1.0 : 1.0 + config.lambda);

    Eigen::LLT<MatrixXd> precond(task.input_cov);
    if (precond.info() != Eigen::Success)
        throw NumericalError("input covariance is not positive definite");

    const RngStream stream{config.seed, stream_id};
    const auto tail_len = std::max<std::uint64_t>(
        1, static_cast<std::uint64_t>(std::ceil(config.tail_fraction *
                                                static_cast<double>(config.n_iters))));
    const std::uint64_t tail_start = config.n_iters - tail_len + 1;

    MatrixXd a = init;
    MatrixXd tail_sum = MatrixXd::Zero(a.rows(), a.cols());
    MatrixXd grad(a.rows(), a.cols());
    VectorXd u, t;
    for (std::uint64_t it = 1; it <= config.n_iters; ++it) {
        if (pure_ar) grad.setZero();
        else grad = task_standard_risk_gradient(task, a);

        if (use_ar) {
            const auto svd = svd_full(a);
            MatrixXd g_ar = MatrixXd::Zero(a.rows(), a.cols());
            const std::uint64_t base = (it - 1) * config.batch_size;
            for (std::uint64_t j = 0; j < config.batch_size; ++j) {
                task.sample(stream, base + j, u, t);
                g_ar += adversarial_loss_grad(a, svd, u, t, eps);
            }
            grad += (ar_weight / static_cast<double>(config.batch_size)) * g_ar;
        }

        const double step =
            config.step_c0 / std::pow(static_cast<double>(it), config.step_decay) / curvature;
        a -= step * precond.solve(grad.transpose()).transpose();

        const double norm = a.norm();
        if (!std::isfinite(norm) || norm > kDivergenceNorm)
            throw NumericalError("training diverged at iteration " + std::to_string(it) +
                                 " (||A||_F = " + std::to_string(norm) +
                                 "); reduce step_c0 (currently " +
                                 std::to_string(config.step_c0) + ")");
        if (trace) trace->objective.push_back(task_standard_risk(task, a));
        if (it >= tail_start) tail_sum += a;
    }
    return tail_sum / static_cast<double>(tail_len);
}

MatrixXd initial_matrix(const EstimationTask& task, const TrainConfig& config) {
    switch (config.init) {
        case InitKind::nominal: return task_standard_minimizer(task);
        case InitKind::zeros: return MatrixXd::Zero(task.output_dim(), task.input_dim());
        case InitKind::given: return config.init_matrix;
    }
    return {};
}

}  // namespace

MatrixXd train(const EstimationTask& task, const TrainConfig& config, TrainTrace* trace) {
    return train_impl(task, config, initial_matrix(task, config), kTrainStream, trace);
}

MatrixXd train(const LinearInverseProblem& problem, const TrainConfig& config) {
    return train(make_task(problem), config);
}

std::vector<ParetoPoint> pareto_trace(const EstimationTask& task,
                                      const std::vector<double>& lambda_grid,
                                      const TrainConfig& config, std::uint64_t eval_samples) {
    if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
    for (std::size_t i = 1; i < lambda_grid.size(); ++i)
        if (!(lambda_grid[i] >= lambda_grid[i - 1]))
            throw ConfigError("lambda grid must be nondecreasing");
    if (eval_samples == 0) throw ConfigError("eval_samples must be positive");

    const RngStream eval{config.seed, kEvalStream};
    std::vector<ParetoPoint> out;
    MatrixXd current = initial_matrix(task, config);
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        TrainConfig c = config;
        c.lambda = lambda_grid[i];
        current = train_impl(task, c, current, kTrainStream + i, nullptr);
        ParetoPoint pt;
        pt.lambda = lambda_grid[i];
        pt.a = current;
        pt.sr = task_standard_risk(task, current);
        pt.ar = task_gap_mc(task, current, eval_samples, eval).adversarial;
        out.push_back(std::move(pt));
    }
    return out;
}

std::vector<ParetoPoint> pareto_trace(const LinearInverseProblem& problem,
                                      const std::vector<double>& lambda_grid,
                                      const TrainConfig& config, std::uint64_t eval_samples) {
    return pareto_trace(make_task(problem), lambda_grid, config, eval_samples);
}

std::vector<double> default_lambda_grid() {
    std::vector<double> grid{0.0};
    for (int i = 0; i < 15; ++i) grid.push_back(std::pow(10.0, -3.0 + 5.0 * i / 14.0));
    grid.push_back(TrainConfig::kPureAdversarial);
    return grid;
}

}  // namespace advrobust
