#include "advrobust/kalman.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace advrobust {

namespace {

MatrixXd block_diag_repeat(const MatrixXd& block, int count) {
    const Index b = block.rows();
    MatrixXd out = MatrixXd::Zero(b * count, b * count);
    for (int i = 0; i < count; ++i) out.block(i * b, i * b, b, b) = block;
    return out;
}

MatrixXd matrix_power(const MatrixXd& a, int k) {
    MatrixXd out = MatrixXd::Identity(a.rows(), a.cols());
    for (int i = 0; i < k; ++i) out = a * out;
    return out;
}

void check_index(const LtiSystem& system, int k) {
    if (k < 0 || k > system.horizon)
        throw ConfigError("estimation index k = " + std::to_string(k) + " outside [0, " +
                          std::to_string(system.horizon) + "]");
}

void check_estimator(const MatrixXd& l, const LtiSystem& system) {
    if (l.rows() != system.state_dim() || l.cols() != system.stacked_dim())
        throw ConfigError("estimator must be n x p(N+1)");
}

double gaussian_bound_scale(const LtiSystem& system, double epsilon) {
    return 2.0 * std::sqrt(2.0 / std::numbers::pi) * epsilon /
           std::sqrt(static_cast<double>(system.state_dim()));
}

MatrixXd symmetrized(const MatrixXd& m) { return (m + m.transpose()) / 2.0; }

}  // namespace

LtiSystem make_system(const MatrixXd& a, const MatrixXd& c, const MatrixXd& sigma0,
                      const MatrixXd& sigma_w, const MatrixXd& sigma_v, int horizon) {
    if (a.rows() != a.cols() || a.rows() == 0) throw ConfigError("A must be square and nonempty");
    if (c.cols() != a.rows() || c.rows() == 0) throw ConfigError("C must be p x n");
    if (!a.allFinite() || !c.allFinite()) throw ConfigError("A and C must be finite");
    if (sigma0.rows() != a.rows() || sigma_w.rows() != a.rows())
        throw ConfigError("Sigma_0 and Sigma_w must be n x n");
    if (sigma_v.rows() != c.rows()) throw ConfigError("Sigma_v must be p x p");
    if (horizon < 0) throw ConfigError("horizon must be nonnegative");
    LtiSystem s;
    s.a = a;
    s.c = c;
    s.sigma0 = validate_covariance(sigma0, true);
    s.sigma_w = validate_covariance(sigma_w, true);
    s.sigma_v = validate_covariance(sigma_v, true);
    s.horizon = horizon;
    return s;
}

MatrixXd observability_matrix(const MatrixXd& a, const MatrixXd& c, int n_steps) {
    if (n_steps < 0) throw ConfigError("n_steps must be nonnegative");
    const Index p = c.rows(), n = a.rows();
    MatrixXd obs(p * (n_steps + 1), n);
    MatrixXd ca = c;
    for (int i = 0; i <= n_steps; ++i) {
        obs.middleRows(i * p, p) = ca;
        ca = ca * a;
    }
    return obs;
}

StackedModel build_stacked(const LtiSystem& system, int k) {
    check_index(system, k);
    const int N = system.horizon;
    const Index n = system.state_dim(), p = system.output_dim();
    StackedModel m;
    m.k = k;
    m.obs = observability_matrix(system.a, system.c, N);
    m.toeplitz = MatrixXd::Zero(p * (N + 1), n * N);
    for (int i = 1; i <= N; ++i)
        for (int j = 0; j < i; ++j)
            m.toeplitz.block(i * p, j * n, p, n) = system.c * matrix_power(system.a, i - 1 - j);
    m.gamma_k = MatrixXd::Zero(n, n * N);
    for (int j = 0; j < k; ++j) m.gamma_k.block(0, j * n, n, n) = matrix_power(system.a, k - 1 - j);
    m.a_pow_k = matrix_power(system.a, k);
    return m;
}

GramianSummary observability_gramian(const LtiSystem& system, int n_steps) {
    const MatrixXd obs = observability_matrix(system.a, system.c, n_steps);
    GramianSummary g;
    g.gramian = obs.transpose() * obs;
    const auto ext = eigen_extremes(g.gramian);
    g.lambda_min = std::max(0.0, ext.min);
    g.lambda_max = ext.max;
    g.frobenius = g.gramian.norm();
    return g;
}

bool is_observable(const LtiSystem& system) {
    const Index n = system.state_dim();
    const MatrixXd obs = observability_matrix(system.a, system.c, static_cast<int>(n) - 1);
    Eigen::JacobiSVD<MatrixXd> svd(obs);
    const auto& s = svd.singularValues();
    if (s.size() < n || s(0) == 0.0) return false;
    return s(n - 1) > 1e-10 * s(0);
}

std::optional<IsotropicParameters> isotropic_parameters(const LtiSystem& system, double tol) {
    if (!system.sigma0.is_isotropic(tol) || !system.sigma_w.is_isotropic(tol) ||
        !system.sigma_v.is_isotropic(tol))
        return std::nullopt;
    const MatrixXd ata = system.a.transpose() * system.a;
    const double rho_sq = ata(0, 0);
    if ((ata - rho_sq * MatrixXd::Identity(ata.rows(), ata.cols())).cwiseAbs().maxCoeff() > tol)
        return std::nullopt;
    return IsotropicParameters{std::sqrt(rho_sq), system.sigma0.matrix()(0, 0),
                               system.sigma_w.matrix()(0, 0), system.sigma_v.matrix()(0, 0)};
}

double r_factor(double rho, int k) {
    double sum = 0.0, term = 1.0;
    for (int j = 0; j < k; ++j) {
        sum += term;
        term *= rho * rho;
    }
    return sum;
}

MatrixXd state_covariance(const LtiSystem& system, int k) {
    if (k < 0) throw ConfigError("k must be nonnegative");
    const MatrixXd ak = matrix_power(system.a, k);
    MatrixXd cov = ak * system.sigma0.matrix() * ak.transpose();
    for (int i = 1; i <= k; ++i) {
        const MatrixXd ap = matrix_power(system.a, k - i);
        cov += ap * system.sigma_w.matrix() * ap.transpose();
    }
    return symmetrized(cov);
}

MatrixXd measurement_covariance(const LtiSystem& system) {
    const StackedModel m = build_stacked(system, 0);
    const int N = system.horizon;
    return symmetrized(m.obs * system.sigma0.matrix() * m.obs.transpose() +
                       m.toeplitz * block_diag_repeat(system.sigma_w.matrix(), N) *
                           m.toeplitz.transpose() +
                       block_diag_repeat(system.sigma_v.matrix(), N + 1));
}

MatrixXd state_measurement_covariance(const LtiSystem& system, int k) {
    const StackedModel m = build_stacked(system, k);
    return m.a_pow_k * system.sigma0.matrix() * m.obs.transpose() +
           m.gamma_k * block_diag_repeat(system.sigma_w.matrix(), system.horizon) *
               m.toeplitz.transpose();
}

MatrixXd kalman_estimator(const LtiSystem& system, int k) {
    check_index(system, k);
    Eigen::LLT<MatrixXd> llt(measurement_covariance(system));
    if (llt.info() != Eigen::Success)
        throw NumericalError("measurement covariance is not positive definite");
    return llt.solve(state_measurement_covariance(system, k).transpose()).transpose();
}

MatrixXd kalman_estimator_isotropic(const LtiSystem& system, int k) {
    check_index(system, k);
    if (!system.sigma0.is_isotropic(1e-9) || !system.sigma_w.is_isotropic(1e-9) ||
        !system.sigma_v.is_isotropic(1e-9))
        throw ConfigError("isotropic Kalman form needs Sigma_0, Sigma_w, Sigma_v proportional to I");
    const double s0 = system.sigma0.matrix()(0, 0);
    const double sw = system.sigma_w.matrix()(0, 0);
    const double sv = system.sigma_v.matrix()(0, 0);
    const StackedModel m = build_stacked(system, k);
    const MatrixXd lhs = s0 * m.a_pow_k * m.obs.transpose() + sw * m.gamma_k * m.toeplitz.transpose();
    const MatrixXd gram = s0 * m.obs * m.obs.transpose() + sw * m.toeplitz * m.toeplitz.transpose() +
                          sv * MatrixXd::Identity(m.obs.rows(), m.obs.rows());
    return gram.ldlt().solve(lhs.transpose()).transpose();
}

std::vector<VectorXd> recursive_kf(const LtiSystem& system,
                                   const std::vector<VectorXd>& measurements) {
    if (measurements.size() != static_cast<std::size_t>(system.horizon) + 1)
        throw ConfigError("recursive_kf expects N+1 measurements");
    const Index n = system.state_dim();
    const MatrixXd& a = system.a;
    const MatrixXd& c = system.c;
    VectorXd x_prior = VectorXd::Zero(n);
    MatrixXd p_prior = system.sigma0.matrix();
    std::vector<VectorXd> out;
    out.reserve(measurements.size());
    for (const VectorXd& y : measurements) {
        if (y.size() != c.rows()) throw ConfigError("measurement has wrong length");
        const MatrixXd innovation_cov = c * p_prior * c.transpose() + system.sigma_v.matrix();
        Eigen::LLT<MatrixXd> llt(innovation_cov);
        if (llt.info() != Eigen::Success)
            throw NumericalError("innovation covariance is not invertible");
        const MatrixXd gain = llt.solve(c * p_prior).transpose();  // P C^T S^{-1}
        const VectorXd x_post = x_prior + gain * (y - c * x_prior);
        const MatrixXd p_post = symmetrized(p_prior - gain * c * p_prior);
        out.push_back(x_post);
        x_prior = a * x_post;
        p_prior = symmetrized(a * p_post * a.transpose() + system.sigma_w.matrix());
    }
    return out;
}

Rollout simulate(const LtiSystem& system, SplitMix64& engine) {
    const int N = system.horizon;
    const Index n = system.state_dim(), p = system.output_dim();
    const MatrixXd l0 = cholesky_factor(system.sigma0);
    const MatrixXd lw = cholesky_factor(system.sigma_w);
    const MatrixXd lv = cholesky_factor(system.sigma_v);
    Rollout r;
    r.process_noise.resize(n * N);
    r.measurement_noise.resize(p * (N + 1));
    VectorXd x = l0 * standard_normal(engine, n);
    for (int t = 0; t <= N; ++t) {
        const VectorXd v = lv * standard_normal(engine, p);
        r.measurement_noise.segment(t * p, p) = v;
        r.states.push_back(x);
        r.measurements.push_back(system.c * x + v);
        if (t < N) {
            const VectorXd w = lw * standard_normal(engine, n);
            r.process_noise.segment(t * n, n) = w;
            x = system.a * x + w;
        }
    }
    return r;
}

VectorXd stack(const std::vector<VectorXd>& blocks) {
    Index total = 0;
    for (const auto& b : blocks) total += b.size();
    VectorXd out(total);
    Index off = 0;
    for (const auto& b : blocks) {
        out.segment(off, b.size()) = b;
        off += b.size();
    }
    return out;
}

CovarianceSpec residual_covariance(const MatrixXd& l, const LtiSystem& system, int k) {
    check_estimator(l, system);
    const StackedModel m = build_stacked(system, k);
    const int N = system.horizon;
    const MatrixXd s = m.a_pow_k - l * m.obs;
    const MatrixXd t = m.gamma_k - l * m.toeplitz;
    const MatrixXd cov = s * system.sigma0.matrix() * s.transpose() +
                         t * block_diag_repeat(system.sigma_w.matrix(), N) * t.transpose() +
                         l * block_diag_repeat(system.sigma_v.matrix(), N + 1) * l.transpose();
    return validate_covariance(symmetrized(cov), false);
}

double estimator_sr_closed(const MatrixXd& l, const LtiSystem& system, int k) {
    check_estimator(l, system);
    const StackedModel m = build_stacked(system, k);
    const int N = system.horizon;
    const MatrixXd s = (m.a_pow_k - l * m.obs) * symmetric_sqrt(system.sigma0);
    const MatrixXd t = (m.gamma_k - l * m.toeplitz) *
                       block_diag_repeat(symmetric_sqrt(system.sigma_w), N);
    const MatrixXd v = l * block_diag_repeat(symmetric_sqrt(system.sigma_v), N + 1);
    return s.squaredNorm() + t.squaredNorm() + v.squaredNorm();
}

EstimationTask as_estimation_problem(const LtiSystem& system, int k, double epsilon) {
    check_index(system, k);
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw ConfigError("epsilon must be finite and nonnegative");
    EstimationTask task;
    task.input_cov = measurement_covariance(system);
    task.cross_cov = state_measurement_covariance(system, k);
    task.target_cov = state_covariance(system, k);
    task.epsilon = epsilon;
    task.sample = [system, k](const RngStream& stream, std::uint64_t i, VectorXd& u, VectorXd& t) {
        SplitMix64 engine = stream.substream(i);
        const Rollout r = simulate(system, engine);
        u = stack(r.measurements);
        t = r.states[static_cast<std::size_t>(k)];
    };
    return task;
}

GapEstimate estimator_gap_mc(const MatrixXd& l, const LtiSystem& system, int k, double epsilon,
                             std::uint64_t n_samples, const RngStream& stream) {
    check_estimator(l, system);
    return task_gap_mc(as_estimation_problem(system, k, epsilon), l, n_samples, stream);
}

RiskEstimate estimator_ar_mc(const MatrixXd& l, const LtiSystem& system, int k, double epsilon,
                             std::uint64_t n_samples, const RngStream& stream) {
    return estimator_gap_mc(l, system, k, epsilon, n_samples, stream).adversarial;
}

LowerBounds gap_lower_bounds(const MatrixXd& l, const LtiSystem& system, int k, double epsilon) {
    const CovarianceSpec res = residual_covariance(l, system, k);
    const double scale = gaussian_bound_scale(system, epsilon);
    LowerBounds b;
    b.general = scale * trace_sqrt(l.transpose() * res.matrix() * l);
    b.frobenius = scale * std::sqrt(system.sigma_v.lambda_min()) * l.squaredNorm();
    return b;
}

double gap_upper_bound_general(const MatrixXd& l, const LtiSystem& system, int k, double epsilon) {
    const CovarianceSpec res = residual_covariance(l, system, k);
    Eigen::JacobiSVD<MatrixXd> svd(l);
    const double spectral = svd.singularValues()(0);
    // ||Sigma^{1/2}||_F^2 = tr(Sigma)
    return 2.0 * epsilon * spectral * std::sqrt(std::max(0.0, res.matrix().trace())) +
           epsilon * epsilon * spectral * spectral;
}

const char* to_string(BoundForm f) { return f == BoundForm::isotropic ? "isotropic" : "general"; }

const char* to_string(ObservabilityRegime r) {
    return r == ObservabilityRegime::high_observability ? "high_observability"
                                                        : "low_observability";
}

namespace {

// Spectral summaries the Kalman bounds are built from. Under isotropic noise
// and scaled-orthogonal dynamics these reduce to sigma_0^2, sigma_w^2,
// sigma_v^2 and rho^{2k} sigma_0^2 + r_k(rho) sigma_w^2.
struct KalmanBoundInputs {
    double state_min = 0.0;   // lambda_min(Cov x_k)
    double state_max = 0.0;   // lambda_max(Cov x_k)
    double prior_min = 0.0;   // sigma_wedge^2 = lambda_min(blockdiag(Sigma_0, Sigma_w))
    double prior_max = 0.0;   // sigma_vee^2
    double noise_min = 0.0;   // lambda_min(Sigma_v)
    double noise_max = 0.0;   // lambda_max(Sigma_v)
    double gram_min = 0.0;    // lambda_min(W_o(N))
    double gram_frob = 0.0;   // ||W_o(N)||_F
    double c_frob_sq = 0.0;   // ||C||_F^2
    BoundForm form = BoundForm::general;
};

KalmanBoundInputs bound_inputs(const LtiSystem& system, int k) {
    check_index(system, k);
    KalmanBoundInputs in;
    const GramianSummary g = observability_gramian(system, system.horizon);
    in.gram_min = g.lambda_min;
    in.gram_frob = g.frobenius;
    in.c_frob_sq = system.c.squaredNorm();
    if (auto iso = isotropic_parameters(system)) {
        in.form = BoundForm::isotropic;
        const double h = std::pow(iso->rho, 2 * k) * iso->sigma0_sq +
                         r_factor(iso->rho, k) * iso->sigma_w_sq;
        in.state_min = in.state_max = h;
        in.prior_min = std::min(iso->sigma0_sq, iso->sigma_w_sq);
        in.prior_max = std::max(iso->sigma0_sq, iso->sigma_w_sq);
        in.noise_min = in.noise_max = iso->sigma_v_sq;
        // Sigma-bar only contains Sigma_w blocks when N >= 1.
        if (system.horizon == 0) in.prior_min = in.prior_max = iso->sigma0_sq;
        return in;
    }
    const auto state = eigen_extremes(state_covariance(system, k));
    in.state_min = state.min;
    in.state_max = state.max;
    in.prior_min = system.sigma0.lambda_min();
    in.prior_max = system.sigma0.lambda_max();
    if (system.horizon > 0) {
        in.prior_min = std::min(in.prior_min, system.sigma_w.lambda_min());
        in.prior_max = std::max(in.prior_max, system.sigma_w.lambda_max());
    }
    in.noise_min = system.sigma_v.lambda_min();
    in.noise_max = system.sigma_v.lambda_max();
    return in;
}

}  // namespace

KalmanLowerBound kalman_gap_lower_bound(const LtiSystem& system, int k, double epsilon) {
    const KalmanBoundInputs in = bound_inputs(system, k);
    const double denom =
        static_cast<double>(system.horizon + 1) * in.prior_max * in.gram_frob + in.noise_max;
    const double ratio = in.state_min / denom;
    return {gaussian_bound_scale(system, epsilon) * std::sqrt(in.noise_min) * in.c_frob_sq * ratio *
                ratio,
            in.form};
}

KalmanUpperBound kalman_gap_upper_bound(const LtiSystem& system, int k, double epsilon) {
    const KalmanBoundInputs in = bound_inputs(system, k);
    KalmanUpperBound out;
    out.form = in.form;
    const double root_gram = std::sqrt(in.gram_min);
    const bool high = root_gram >= std::sqrt(in.noise_min) / in.prior_min;
    out.regime = high ? ObservabilityRegime::high_observability
                      : ObservabilityRegime::low_observability;
    if (epsilon == 0.0) {
        out.value = 0.0;
        return out;
    }
    if (!(in.gram_min > 0.0)) {
        out.value = std::numeric_limits<double>::infinity();
        return out;
    }
    // Bound on ||L_k||_2 / ||H_k||_2.
    const double gain =
        high ? in.prior_min * root_gram / (in.prior_min * in.prior_min * in.gram_min + in.noise_min)
             : 1.0 / (in.prior_min * root_gram);
    const double n = static_cast<double>(system.state_dim());
    out.value = epsilon * in.state_max * gain *
                (2.0 * std::sqrt(n) * std::sqrt(in.prior_max + in.noise_max * gain * gain) +
                 epsilon * gain);
    return out;
}

EstimatorBoundReport bound_report(const LtiSystem& system, int k, double epsilon,
                                  const std::optional<MatrixXd>& l) {
    EstimatorBoundReport r;
    const MatrixXd est = l ? *l : kalman_estimator(system, k);
    const LowerBounds lb = gap_lower_bounds(est, system, k, epsilon);
    r.gap_lower_general = lb.general;
    r.gap_lower_frobenius = lb.frobenius;
    r.gap_upper_general = gap_upper_bound_general(est, system, k, epsilon);
    const KalmanUpperBound ub = kalman_gap_upper_bound(system, k, epsilon);
    r.regime = ub.regime;
    if (!l) {
        r.kalman_gap_lower = kalman_gap_lower_bound(system, k, epsilon).value;
        r.kalman_gap_upper = ub.value;
    }
    return r;
}

}  // namespace advrobust
