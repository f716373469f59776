#include "advrobust/model.hpp"

#include <cmath>
#include <string>

namespace advrobust {

bool CovarianceSpec::is_isotropic(double tol) const {
    if (matrix_.rows() == 0) return true;
    const double s = matrix_.diagonal().mean();
    return (matrix_ - s * MatrixXd::Identity(dim(), dim())).cwiseAbs().maxCoeff() <= tol;
}

CovarianceSpec validate_covariance(const MatrixXd& m, bool strict) {
    if (m.rows() != m.cols())
        throw ConfigError("covariance must be square, got " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
    if (!m.allFinite()) throw ConfigError("covariance has non-finite entries");
    if (m.rows() > 0 && (m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol)
        throw ConfigError("covariance is not symmetric");

    CovarianceSpec spec;
    spec.matrix_ = (m + m.transpose()) / 2.0;
    spec.strict_ = strict;
    const auto ext = eigen_extremes(spec.matrix_);
    spec.lambda_min_ = ext.min;
    spec.lambda_max_ = ext.max;
    if (ext.min < -kPsdTol)
        throw ConfigError("covariance is not PSD (lambda_min = " + std::to_string(ext.min) + ")");
    if (strict && !(ext.min > 0.0))
        throw ConfigError("covariance is not positive definite (lambda_min = " +
                          std::to_string(ext.min) + ")");
    return spec;
}

MatrixXd symmetric_sqrt(const CovarianceSpec& s) { return psd_sqrt(s.matrix()); }

MatrixXd cholesky_factor(const CovarianceSpec& s) {
    if (s.dim() == 0) return MatrixXd(0, 0);
    Eigen::LLT<MatrixXd> llt(s.matrix());
    if (llt.info() != Eigen::Success)
        throw NumericalError("Cholesky factorization failed: covariance not positive definite");
    return llt.matrixL();
}

LinearInverseProblem make_problem(const MatrixXd& a_star, const MatrixXd& sigma_x,
                                  const MatrixXd& sigma_w, double epsilon) {
    if (!a_star.allFinite()) throw ConfigError("A_star has non-finite entries");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw ConfigError("epsilon must be finite and nonnegative");
    if (sigma_x.rows() != a_star.cols())
        throw ConfigError("sigma_x must be n x n with n = cols(A_star)");
    if (sigma_w.rows() != a_star.rows())
        throw ConfigError("sigma_w must be p x p with p = rows(A_star)");
    LinearInverseProblem p;
    p.a_star = a_star;
    p.sigma_x = validate_covariance(sigma_x, true);
    p.sigma_w = validate_covariance(sigma_w, true);
    p.epsilon = epsilon;
    return p;
}

namespace {
std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace

SplitMix64 RngStream::substream(std::uint64_t index) const {
    std::uint64_t key = mix64(seed + 0x9E3779B97F4A7C15ULL);
    key = mix64(key ^ (stream_id * 0xD1B54A32D192ED03ULL + 0x632BE59BD9B4E019ULL));
    key = mix64(key ^ (index * 0x8CB92BA72F3D8DD7ULL + 0xA0761D6478BD642FULL));
    return SplitMix64(key);
}

RngStream RngStream::child(std::uint64_t id) const {
    return RngStream{mix64(seed ^ mix64(stream_id + 0x2545F4914F6CDD1DULL)), id};
}

ProblemSampler::ProblemSampler(const LinearInverseProblem& problem)
    : a_star_(problem.a_star),
      chol_x_(cholesky_factor(problem.sigma_x)),
      chol_w_(cholesky_factor(problem.sigma_w)) {}

void ProblemSampler::draw(const RngStream& stream, std::uint64_t index, VectorXd& x, VectorXd& w,
                          VectorXd& y) const {
    SplitMix64 engine = stream.substream(index);
    x = chol_x_ * standard_normal(engine, chol_x_.rows());
    w = chol_w_ * standard_normal(engine, chol_w_.rows());
    y = a_star_ * x + w;
}

SampleBatch sample_batch(const LinearInverseProblem& problem, std::size_t count,
                         const RngStream& stream, std::uint64_t base_index) {
    SampleBatch batch;
    batch.seed = stream.seed;
    batch.base_index = base_index;
    if (count == 0) return batch;
    const ProblemSampler sampler(problem);
    batch.xs.resize(count);
    batch.ws.resize(count);
    batch.ys.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        sampler.draw(stream, base_index + i, batch.xs[i], batch.ws[i], batch.ys[i]);
    return batch;
}

}  // namespace advrobust
