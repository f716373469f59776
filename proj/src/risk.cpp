#include "advrobust/risk.hpp"

#include <cmath>
#include <numbers>

namespace advrobust {

namespace {

void check_model_shape(const MatrixXd& a, const LinearInverseProblem& problem) {
    if (a.rows() != problem.output_dim() || a.cols() != problem.input_dim())
        throw ConfigError("model matrix must have the shape of A_star");
}

}  // namespace

double standard_risk_closed(const MatrixXd& a, const LinearInverseProblem& problem) {
    check_model_shape(a, problem);
    const MatrixXd e = a - problem.a_star;
    return problem.sigma_w.matrix().trace() + (e * problem.sigma_x.matrix() * e.transpose()).trace();
}

RiskEstimate standard_risk_mc(const MatrixXd& a, const LinearInverseProblem& problem,
                              std::uint64_t n_samples, const RngStream& stream) {
    check_model_shape(a, problem);
    const ProblemSampler sampler(problem);
    auto stats = sharded_stats<1>(n_samples, [&](std::uint64_t i) {
        VectorXd x, w, y;
        sampler.draw(stream, i, x, w, y);
        return std::array<double, 1>{(y - a * x).squaredNorm()};
    });
    return RiskEstimate::from(stats[0], stream.seed);
}

RiskEstimate adversarial_risk_mc(const MatrixXd& a, const LinearInverseProblem& problem,
                                 std::uint64_t n_samples, const RngStream& stream) {
    return gap_estimate_mc(a, problem, n_samples, stream).adversarial;
}

double gram_lambda_min(const SvdFactorization<double>& svd) {
    if (svd.rows() < svd.cols()) return 0.0;
    const double s = svd.singular_values(svd.singular_values.size() - 1);
    return s * s;
}

double gram_lambda_max(const SvdFactorization<double>& svd) { return svd.sigma1() * svd.sigma1(); }

GapEstimate gap_estimate_mc(const MatrixXd& a, const LinearInverseProblem& problem,
                            std::uint64_t n_samples, const RngStream& stream) {
    check_model_shape(a, problem);
    if (n_samples == 0) throw ConfigError("n_samples must be positive");
    const ProblemSampler sampler(problem);
    const auto svd = svd_full(a);
    const double eps = problem.epsilon;

    // standard loss, adversarial loss, gain, ||A^T b||
    auto stats = sharded_stats<4>(n_samples, [&](std::uint64_t i) {
        VectorXd x, w, y;
        sampler.draw(stream, i, x, w, y);
        const VectorXd b = y - a * x;
        const double base = b.squaredNorm();
        const double gain = worst_case_perturbation(svd, b, eps).objective_gain;
        return std::array<double, 4>{base, base + gain, gain, (a.transpose() * b).norm()};
    });

    GapEstimate out;
    out.standard = RiskEstimate::from(stats[0], stream.seed);
    out.adversarial = RiskEstimate::from(stats[1], stream.seed);
    out.gap = RiskEstimate::from(stats[2], stream.seed);
    GapBounds& g = out.bounds;
    g.lambda_min = gram_lambda_min(svd);
    g.lambda_max = gram_lambda_max(svd);
    g.cross_term = stats[3].mean;
    g.cross_term_std_error = stats[3].std_error();
    g.lower = 2.0 * eps * g.cross_term + eps * eps * g.lambda_min;
    g.upper = 2.0 * eps * g.cross_term + eps * eps * g.lambda_max;
    return out;
}

GapBounds gap_bounds_mc(const MatrixXd& a, const LinearInverseProblem& problem,
                        std::uint64_t n_samples, const RngStream& stream) {
    return gap_estimate_mc(a, problem, n_samples, stream).bounds;
}

GapBounds astar_gap_bounds(const LinearInverseProblem& problem) {
    if (!problem.sigma_w.is_isotropic(1e-10))
        throw ConfigError("astar_gap_bounds requires isotropic noise Sigma_w = sigma_w^2 I");
    const double eps = problem.epsilon;
    const double sigma_w = std::sqrt(problem.sigma_w.matrix()(0, 0));
    const double p = static_cast<double>(problem.output_dim());
    const auto svd = svd_full(problem.a_star);

    GapBounds g;
    g.lambda_min = gram_lambda_min(svd);
    g.lambda_max = gram_lambda_max(svd);
    const double trace_sqrt_gram = svd.singular_values.sum();
    const double frob = std::sqrt(svd.singular_values.squaredNorm());
    g.lower = 2.0 * eps * sigma_w * std::sqrt(2.0 / (std::numbers::pi * p)) * trace_sqrt_gram +
              eps * eps * g.lambda_min;
    g.upper = 2.0 * eps * sigma_w * frob + eps * eps * g.lambda_max;
    g.cross_term = sigma_w * frob;  // Jensen upper value of E||A_star^T w||
    return g;
}

}  // namespace advrobust
