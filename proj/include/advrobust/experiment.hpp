#pragma once

// Experiment configurations and runners behind the command-line tool.
//
// Configuration files are JSON objects. Matrices are arrays of rows; a bare
// number or a 1x1 matrix stands for that multiple of the identity wherever a
// larger square matrix is expected. Infinite lambda values are written "inf".

#include <cstdint>
#include <string>
#include <vector>

#include "advrobust/kalman.hpp"
#include "advrobust/model.hpp"
#include "advrobust/table.hpp"
#include "advrobust/training.hpp"

namespace advrobust {

enum class ExperimentKind {
    perturb,
    risk,
    bounds,
    pareto,
    kalman_bounds,
    fig_condition,
    fig_observability,
    fig_kf_vs_adv,
};

const char* to_string(ExperimentKind k);
/// Accepts the hyphenated names ("kalman-bounds", "fig-condition", ...).
ExperimentKind parse_experiment_kind(const std::string& name);

/// Linear inverse problem. An empty a_star is drawn with
/// generate_conditioned_matrix(dim, condition, ...).
struct ProblemConfig {
    int dim = 4;
    double condition = 1.0;
    MatrixXd a_star;
    MatrixXd sigma_x = MatrixXd::Identity(1, 1);
    MatrixXd sigma_w = MatrixXd::Constant(1, 1, 0.1);
    double epsilon = 0.5;
    MatrixXd a_eval;  // model evaluated by risk/bounds; empty means a_star
};

struct PerturbConfig {
    MatrixXd a = MatrixXd::Constant(1, 1, 2.0);
    VectorXd b = VectorXd::Constant(1, 3.0);
    double epsilon = 0.5;
};

struct SystemConfig {
    std::string label;
    MatrixXd a;
    MatrixXd c;
    MatrixXd sigma0 = MatrixXd::Identity(1, 1);
    MatrixXd sigma_w = MatrixXd::Constant(1, 1, 0.1);
    MatrixXd sigma_v = MatrixXd::Constant(1, 1, 0.1);
    int horizon = 5;
    int k = 0;
    double epsilon = 0.5;
};

/// [[alpha, beta], [-beta, alpha]] with alpha^2 + beta^2 = 1, C = [1 0],
/// Sigma_0 = I, Sigma_w = 0.1 I, Sigma_v = 0.1, N = 5.
SystemConfig rotation_system(double alpha, int k = 0);
/// [[1, rho], [0, 1]] with the same C, covariances and horizon.
SystemConfig shear_system(double rho, int k = 0);

LtiSystem build_system(const SystemConfig& s);
LinearInverseProblem build_problem(const ProblemConfig& p, const RngStream& stream);

struct TrainingSettings {
    std::uint64_t batch_size = 32;
    std::uint64_t n_iters = 5000;
    double step_c0 = 0.5;
    double step_decay = 0.5;
    InitKind init = InitKind::nominal;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::pareto;
    std::uint64_t seed = 1;
    std::uint64_t n_samples = 100000;
    std::vector<double> lambda_grid = default_lambda_grid();
    std::string output_path;  // empty: CSV to stdout
    bool svg = false;

    ProblemConfig problem;
    PerturbConfig perturb;
    std::vector<SystemConfig> systems{rotation_system(0.95), rotation_system(0.98),
                                      rotation_system(0.99)};
    TrainingSettings training;

    std::vector<double> conditions{1.0, 3.0, 10.0};
    std::vector<double> alphas{0.95, 0.98, 0.99};
    std::vector<int> estimate_indices{0, 5};
    std::vector<double> rhos = default_rho_sweep();
    double robust_lambda = TrainConfig::kPureAdversarial;

    void validate() const;

    /// 12 log-spaced values from 0.1 to sqrt(10).
    static std::vector<double> default_rho_sweep();
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
/// Complete JSON form; parse_config(config_to_json(c)) reproduces c.
std::string config_to_json(const ExperimentConfig& config);
/// FNV-1a of the canonical JSON with output_path and svg removed.
std::string config_hash(const ExperimentConfig& config);

/// U D V^T with Haar-random orthogonal U, V and geometric positive diagonal
/// D, d_max / d_min = condition, ||diag(D)||_2 = 1.
MatrixXd generate_conditioned_matrix(int n, double condition, const RngStream& stream);

/// Orthogonal matrix distributed by Haar measure (QR of a Gaussian matrix with
/// the signs of diag(R) folded into Q).
MatrixXd haar_orthogonal(int n, SplitMix64& engine);

struct ExperimentResult {
    ResultTable table;
    ChartSpec chart;  // empty series when the kind has no natural plot
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Writes the CSV (stdout when output_path is empty) and, if requested, the
/// SVG next to it with the extension replaced by ".svg".
void write_outputs(const ExperimentResult& result, const ExperimentConfig& config);

inline constexpr const char* kToolVersion = "advrobust 1.0.0";

}  // namespace advrobust
