#include "advrobust/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "advrobust/risk.hpp"
#include "advrobust/trs.hpp"

namespace advrobust {

using nlohmann::json;

namespace {

constexpr std::uint64_t kMatrixStream = 0x6d617472;
constexpr std::uint64_t kEvalStream = 0x65766131;

struct KindName {
    ExperimentKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {ExperimentKind::perturb, "perturb"},
    {ExperimentKind::risk, "risk"},
    {ExperimentKind::bounds, "bounds"},
    {ExperimentKind::pareto, "pareto"},
    {ExperimentKind::kalman_bounds, "kalman-bounds"},
    {ExperimentKind::fig_condition, "fig-condition"},
    {ExperimentKind::fig_observability, "fig-observability"},
    {ExperimentKind::fig_kf_vs_adv, "fig-kf-vs-adv"},
};

// ---- JSON helpers ---------------------------------------------------------

json number_json(double v) {
    if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
    if (std::isnan(v)) return json("nan");
    return json(v);
}

double parse_number(const json& j, const std::string& what) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
        if (s == "-inf" || s == "-Infinity") return -std::numeric_limits<double>::infinity();
    }
    throw ConfigError(what + ": expected a number");
}

json matrix_json(const MatrixXd& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(number_json(m(i, j)));
        rows.push_back(row);
    }
    return rows;
}

MatrixXd parse_matrix(const json& j, const std::string& what) {
    if (j.is_number()) return MatrixXd::Constant(1, 1, j.get<double>());
    if (!j.is_array()) throw ConfigError(what + ": expected a number or an array of rows");
    if (j.empty()) return MatrixXd();
    const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
    if (cols == 0) throw ConfigError(what + ": rows must be nonempty arrays");
    MatrixXd m(static_cast<Index>(j.size()), static_cast<Index>(cols));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array() || j[i].size() != cols)
            throw ConfigError(what + ": rows have different lengths");
        for (std::size_t k = 0; k < cols; ++k)
            m(static_cast<Index>(i), static_cast<Index>(k)) = parse_number(j[i][k], what);
    }
    return m;
}

json vector_json(const VectorXd& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(number_json(v(i)));
    return out;
}

VectorXd parse_vector(const json& j, const std::string& what) {
    if (j.is_number()) return VectorXd::Constant(1, j.get<double>());
    if (!j.is_array()) throw ConfigError(what + ": expected an array of numbers");
    VectorXd v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = parse_number(j[i], what);
    return v;
}

json doubles_json(const std::vector<double>& v) {
    json out = json::array();
    for (double x : v) out.push_back(number_json(x));
    return out;
}

std::vector<double> parse_doubles(const json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError(what + ": expected an array");
    std::vector<double> out;
    for (const auto& x : j) out.push_back(parse_number(x, what));
    return out;
}

template <typename T>
T parse_integer(const json& j, const std::string& what) {
    if (!j.is_number_integer()) throw ConfigError(what + ": expected an integer");
    if constexpr (std::is_unsigned_v<T>) {
        if (j.is_number_unsigned()) return j.get<T>();
        if (j.get<std::int64_t>() < 0) throw ConfigError(what + ": must be nonnegative");
    }
    return j.get<T>();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys,
                    const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& item : obj.items())
        if (!allowed.count(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
}

const char* init_name(InitKind k) {
    switch (k) {
        case InitKind::nominal: return "nominal";
        case InitKind::zeros: return "zeros";
        case InitKind::given: return "given";
    }
    return "?";
}

InitKind parse_init(const json& j) {
    const auto s = j.is_string() ? j.get<std::string>() : std::string();
    if (s == "nominal") return InitKind::nominal;
    if (s == "zeros") return InitKind::zeros;
    throw ConfigError("training.init must be \"nominal\" or \"zeros\"");
}

json problem_json(const ProblemConfig& p) {
    return {{"dim", p.dim},
            {"condition", number_json(p.condition)},
            {"a_star", matrix_json(p.a_star)},
            {"sigma_x", matrix_json(p.sigma_x)},
            {"sigma_w", matrix_json(p.sigma_w)},
            {"epsilon", number_json(p.epsilon)},
            {"a_eval", matrix_json(p.a_eval)}};
}

ProblemConfig parse_problem(const json& j) {
    reject_unknown(j, {"dim", "condition", "a_star", "sigma_x", "sigma_w", "epsilon", "a_eval"},
                   "problem");
    ProblemConfig p;
    if (j.contains("dim")) p.dim = parse_integer<int>(j["dim"], "problem.dim");
    if (j.contains("condition")) p.condition = parse_number(j["condition"], "problem.condition");
    if (j.contains("a_star")) p.a_star = parse_matrix(j["a_star"], "problem.a_star");
    if (j.contains("sigma_x")) p.sigma_x = parse_matrix(j["sigma_x"], "problem.sigma_x");
    if (j.contains("sigma_w")) p.sigma_w = parse_matrix(j["sigma_w"], "problem.sigma_w");
    if (j.contains("epsilon")) p.epsilon = parse_number(j["epsilon"], "problem.epsilon");
    if (j.contains("a_eval")) p.a_eval = parse_matrix(j["a_eval"], "problem.a_eval");
    return p;
}

json perturb_json(const PerturbConfig& p) {
    return {{"a", matrix_json(p.a)}, {"b", vector_json(p.b)}, {"epsilon", number_json(p.epsilon)}};
}

PerturbConfig parse_perturb(const json& j) {
    reject_unknown(j, {"a", "b", "epsilon"}, "perturb");
    PerturbConfig p;
    if (j.contains("a")) p.a = parse_matrix(j["a"], "perturb.a");
    if (j.contains("b")) p.b = parse_vector(j["b"], "perturb.b");
    if (j.contains("epsilon")) p.epsilon = parse_number(j["epsilon"], "perturb.epsilon");
    return p;
}

json system_json(const SystemConfig& s) {
    return {{"label", s.label},
            {"a", matrix_json(s.a)},
            {"c", matrix_json(s.c)},
            {"sigma0", matrix_json(s.sigma0)},
            {"sigma_w", matrix_json(s.sigma_w)},
            {"sigma_v", matrix_json(s.sigma_v)},
            {"horizon", s.horizon},
            {"k", s.k},
            {"epsilon", number_json(s.epsilon)}};
}

SystemConfig parse_system(const json& j) {
    reject_unknown(j, {"label", "a", "c", "sigma0", "sigma_w", "sigma_v", "horizon", "k", "epsilon"},
                   "systems[]");
    SystemConfig s;
    if (!j.contains("a") || !j.contains("c")) throw ConfigError("systems[]: 'a' and 'c' are required");
    if (j.contains("label")) {
        if (!j["label"].is_string()) throw ConfigError("systems[].label must be a string");
        s.label = j["label"].get<std::string>();
    }
    s.a = parse_matrix(j["a"], "systems[].a");
    s.c = parse_matrix(j["c"], "systems[].c");
    if (j.contains("sigma0")) s.sigma0 = parse_matrix(j["sigma0"], "systems[].sigma0");
    if (j.contains("sigma_w")) s.sigma_w = parse_matrix(j["sigma_w"], "systems[].sigma_w");
    if (j.contains("sigma_v")) s.sigma_v = parse_matrix(j["sigma_v"], "systems[].sigma_v");
    if (j.contains("horizon")) s.horizon = parse_integer<int>(j["horizon"], "systems[].horizon");
    if (j.contains("k")) s.k = parse_integer<int>(j["k"], "systems[].k");
    if (j.contains("epsilon")) s.epsilon = parse_number(j["epsilon"], "systems[].epsilon");
    return s;
}

json training_json(const TrainingSettings& t) {
    return {{"batch_size", t.batch_size},
            {"n_iters", t.n_iters},
            {"step_c0", number_json(t.step_c0)},
            {"step_decay", number_json(t.step_decay)},
            {"init", init_name(t.init)}};
}

TrainingSettings parse_training(const json& j) {
    reject_unknown(j, {"batch_size", "n_iters", "step_c0", "step_decay", "init"}, "training");
    TrainingSettings t;
    if (j.contains("batch_size"))
        t.batch_size = parse_integer<std::uint64_t>(j["batch_size"], "training.batch_size");
    if (j.contains("n_iters"))
        t.n_iters = parse_integer<std::uint64_t>(j["n_iters"], "training.n_iters");
    if (j.contains("step_c0")) t.step_c0 = parse_number(j["step_c0"], "training.step_c0");
    if (j.contains("step_decay")) t.step_decay = parse_number(j["step_decay"], "training.step_decay");
    if (j.contains("init")) t.init = parse_init(j["init"]);
    return t;
}

json config_json(const ExperimentConfig& c) {
    json systems = json::array();
    for (const auto& s : c.systems) systems.push_back(system_json(s));
    return {{"kind", to_string(c.kind)},
            {"seed", c.seed},
            {"n_samples", c.n_samples},
            {"lambda_grid", doubles_json(c.lambda_grid)},
            {"output_path", c.output_path},
            {"svg", c.svg},
            {"problem", problem_json(c.problem)},
            {"perturb", perturb_json(c.perturb)},
            {"systems", systems},
            {"training", training_json(c.training)},
            {"conditions", doubles_json(c.conditions)},
            {"alphas", doubles_json(c.alphas)},
            {"estimate_indices", c.estimate_indices},
            {"rhos", doubles_json(c.rhos)},
            {"robust_lambda", number_json(c.robust_lambda)}};
}

// ---- construction helpers -------------------------------------------------

MatrixXd expand_square(const MatrixXd& m, Index dim, const std::string& what) {
    if (m.rows() == 1 && m.cols() == 1 && dim != 1)
        return m(0, 0) * MatrixXd::Identity(dim, dim);
    if (m.rows() != dim || m.cols() != dim)
        throw ConfigError(what + " must be " + std::to_string(dim) + "x" + std::to_string(dim));
    return m;
}

TrainConfig make_train_config(const ExperimentConfig& c, double epsilon) {
    TrainConfig t;
    t.epsilon = epsilon;
    t.batch_size = c.training.batch_size;
    t.n_iters = c.training.n_iters;
    t.step_c0 = c.training.step_c0;
    t.step_decay = c.training.step_decay;
    t.init = c.training.init;
    t.seed = c.seed;
    return t;
}

std::string short_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

void base_metadata(ResultTable& t, const ExperimentConfig& c) {
    t.set_metadata("tool", kToolVersion);
    t.set_metadata("kind", to_string(c.kind));
    t.set_metadata("seed", std::to_string(c.seed));
    t.set_metadata("config_hash", config_hash(c));
    t.set_metadata("n_samples", std::to_string(c.n_samples));
}

ChartSeries frontier_series(const std::string& label, const std::vector<ParetoPoint>& pts) {
    ChartSeries s;
    s.label = label;
    for (const auto& p : pts) {
        s.x.push_back(p.sr);
        s.y.push_back(p.ar.mean);
    }
    return s;
}

// ---- runners --------------------------------------------------------------

ExperimentResult run_perturb(const ExperimentConfig& c) {
    const PerturbConfig& p = c.perturb;
    const auto r = worst_case_perturbation(p.a, p.b, p.epsilon);
    std::vector<std::string> header;
    for (Index i = 0; i < r.delta.size(); ++i) header.push_back("delta_" + std::to_string(i));
    for (const char* h : {"dual_lambda", "objective_gain", "branch", "kkt_residual"})
        header.emplace_back(h);
    ExperimentResult out{ResultTable(header), {}};
    std::vector<double> row(r.delta.data(), r.delta.data() + r.delta.size());
    row.push_back(r.dual_lambda);
    row.push_back(r.objective_gain);
    row.push_back(static_cast<double>(static_cast<int>(r.branch)));
    row.push_back(kkt_residual(p.a, p.b, r));
    out.table.add_row(row);
    base_metadata(out.table, c);
    out.table.set_metadata("branch", to_string(r.branch));
    out.table.set_metadata("branch_codes", "0=easy 1=hard 2=degenerate");
    return out;
}

ExperimentResult run_risk(const ExperimentConfig& c) {
    const auto problem = build_problem(c.problem, RngStream{c.seed, kMatrixStream});
    const MatrixXd a = c.problem.a_eval.size() ? c.problem.a_eval : problem.a_star;
    const auto g = gap_estimate_mc(a, problem, c.n_samples, RngStream{c.seed, kEvalStream});
    ExperimentResult out{ResultTable({"sr_closed", "sr_mc", "sr_stderr", "ar_mean", "ar_stderr",
                                      "gap_mean", "gap_stderr"}),
                         {}};
    out.table.add_row({standard_risk_closed(a, problem), g.standard.mean, g.standard.std_error,
                       g.adversarial.mean, g.adversarial.std_error, g.gap.mean, g.gap.std_error});
    base_metadata(out.table, c);
    return out;
}

ExperimentResult run_bounds(const ExperimentConfig& c) {
    const auto problem = build_problem(c.problem, RngStream{c.seed, kMatrixStream});
    const bool at_star = c.problem.a_eval.size() == 0;
    const MatrixXd a = at_star ? problem.a_star : c.problem.a_eval;
    const auto g = gap_estimate_mc(a, problem, c.n_samples, RngStream{c.seed, kEvalStream});
    double star_lower = std::nan(""), star_upper = std::nan("");
    if (at_star && problem.sigma_w.is_isotropic(1e-10)) {
        const auto s = astar_gap_bounds(problem);
        star_lower = s.lower;
        star_upper = s.upper;
    }
    ExperimentResult out{
        ResultTable({"gap_mean", "gap_stderr", "lower", "upper", "cross_term", "cross_term_stderr",
                     "lambda_min", "lambda_max", "astar_lower", "astar_upper"}),
        {}};
    out.table.add_row({g.gap.mean, g.gap.std_error, g.bounds.lower, g.bounds.upper,
                       g.bounds.cross_term, g.bounds.cross_term_std_error, g.bounds.lambda_min,
                       g.bounds.lambda_max, star_lower, star_upper});
    base_metadata(out.table, c);
    return out;
}

ExperimentResult run_pareto(const ExperimentConfig& c) {
    const auto problem = build_problem(c.problem, RngStream{c.seed, kMatrixStream});
    const auto pts =
        pareto_trace(problem, c.lambda_grid, make_train_config(c, problem.epsilon), c.n_samples);
    ExperimentResult out{ResultTable({"lambda", "sr", "ar_mean", "ar_stderr"}), {}};
    for (const auto& p : pts) out.table.add_row({p.lambda, p.sr, p.ar.mean, p.ar.std_error});
    base_metadata(out.table, c);
    out.chart = {"Pareto frontier", "standard risk", "adversarial risk",
                 {frontier_series("frontier", pts)}};
    return out;
}

ExperimentResult run_kalman_bounds(const ExperimentConfig& c) {
    ExperimentResult out{
        ResultTable({"system_id", "k", "sr", "ar_mean", "ar_stderr", "gap_mean", "gap_stderr",
                     "lb_general", "lb_frobenius", "lb_kalman", "ub_general", "ub_kalman",
                     "lambda_min_gramian", "sigma_min_obs", "frob_gramian", "high_observability"}),
        {}};
    base_metadata(out.table, c);
    for (std::size_t i = 0; i < c.systems.size(); ++i) {
        const SystemConfig& sc = c.systems[i];
        const LtiSystem sys = build_system(sc);
        const MatrixXd l = kalman_estimator(sys, sc.k);
        const auto g = estimator_gap_mc(l, sys, sc.k, sc.epsilon, c.n_samples,
                                        RngStream{c.seed, kEvalStream}.child(i));
        const auto rep = bound_report(sys, sc.k, sc.epsilon);
        const auto gram = observability_gramian(sys, sys.horizon);
        out.table.add_row({static_cast<double>(i), static_cast<double>(sc.k),
                           estimator_sr_closed(l, sys, sc.k), g.adversarial.mean,
                           g.adversarial.std_error, g.gap.mean, g.gap.std_error,
                           rep.gap_lower_general, rep.gap_lower_frobenius, *rep.kalman_gap_lower,
                           rep.gap_upper_general, *rep.kalman_gap_upper, gram.lambda_min,
                           std::sqrt(gram.lambda_min), gram.frobenius,
                           rep.regime == ObservabilityRegime::high_observability ? 1.0 : 0.0});
        out.table.set_metadata("system_" + std::to_string(i),
                               sc.label.empty() ? std::string("unlabeled") : sc.label);
    }
    return out;
}

ExperimentResult run_fig_condition(const ExperimentConfig& c) {
    ExperimentResult out{ResultTable({"kappa", "lambda", "sr", "ar_mean", "ar_stderr"}), {}};
    out.chart = {"Pareto frontiers by condition number", "standard risk", "adversarial risk", {}};
    for (double kappa : c.conditions) {
        ProblemConfig pc = c.problem;
        pc.condition = kappa;
        pc.a_star.resize(0, 0);
        // Same orthogonal factors for every kappa; only the spectrum changes.
        const auto problem = build_problem(pc, RngStream{c.seed, kMatrixStream});
        const auto pts = pareto_trace(problem, c.lambda_grid, make_train_config(c, problem.epsilon),
                                      c.n_samples);
        for (const auto& p : pts) out.table.add_row({kappa, p.lambda, p.sr, p.ar.mean, p.ar.std_error});
        out.chart.series.push_back(frontier_series("kappa = " + short_number(kappa), pts));
    }
    base_metadata(out.table, c);
    return out;
}

ExperimentResult run_fig_observability(const ExperimentConfig& c) {
    ExperimentResult out{ResultTable({"alpha", "k", "lambda_min_gramian", "sigma_min_obs", "lambda",
                                      "sr", "ar_mean", "ar_stderr"}),
                         {}};
    out.chart = {"Pareto frontiers by observability", "standard risk", "adversarial risk", {}};
    for (int k : c.estimate_indices) {
        for (double alpha : c.alphas) {
            SystemConfig sc = rotation_system(alpha, k);
            sc.epsilon = c.problem.epsilon;
            const LtiSystem sys = build_system(sc);
            const auto gram = observability_gramian(sys, sys.horizon);
            const auto task = as_estimation_problem(sys, k, sc.epsilon);
            const auto pts =
                pareto_trace(task, c.lambda_grid, make_train_config(c, sc.epsilon), c.n_samples);
            for (const auto& p : pts)
                out.table.add_row({alpha, static_cast<double>(k), gram.lambda_min,
                                   std::sqrt(gram.lambda_min), p.lambda, p.sr, p.ar.mean,
                                   p.ar.std_error});
            out.chart.series.push_back(frontier_series(
                "alpha = " + short_number(alpha) + ", k = " + std::to_string(k), pts));
        }
    }
    base_metadata(out.table, c);
    return out;
}

ExperimentResult run_fig_kf_vs_adv(const ExperimentConfig& c) {
    ExperimentResult out{
        ResultTable({"rho", "lambda_min_gramian", "nominal_sr", "nominal_ar", "nominal_ar_stderr",
                     "robust_sr", "robust_ar", "robust_ar_stderr", "ar_margin"}),
        {}};
    out.chart = {"Nominal vs robust smoother", "standard risk", "adversarial risk", {}};
    ChartSeries nominal{"nominal smoother", {}, {}}, robust{"robust smoother", {}, {}};
    TrainConfig tc = make_train_config(c, c.problem.epsilon);
    tc.lambda = c.robust_lambda;
    for (double rho : c.rhos) {
        SystemConfig sc = shear_system(rho, 0);
        sc.epsilon = c.problem.epsilon;
        const LtiSystem sys = build_system(sc);
        const auto task = as_estimation_problem(sys, 0, sc.epsilon);
        const auto gram = observability_gramian(sys, sys.horizon);
        const RngStream eval{c.seed, kEvalStream};
        const MatrixXd l_nom = task_standard_minimizer(task);
        const MatrixXd l_rob = train(task, tc);
        const auto g_nom = task_gap_mc(task, l_nom, c.n_samples, eval);
        const auto g_rob = task_gap_mc(task, l_rob, c.n_samples, eval);
        const double sr_nom = task_standard_risk(task, l_nom);
        const double sr_rob = task_standard_risk(task, l_rob);
        out.table.add_row({rho, gram.lambda_min, sr_nom, g_nom.adversarial.mean,
                           g_nom.adversarial.std_error, sr_rob, g_rob.adversarial.mean,
                           g_rob.adversarial.std_error,
                           g_nom.adversarial.mean - g_rob.adversarial.mean});
        nominal.x.push_back(sr_nom);
        nominal.y.push_back(g_nom.adversarial.mean);
        robust.x.push_back(sr_rob);
        robust.y.push_back(g_rob.adversarial.mean);
    }
    out.chart.series = {nominal, robust};
    base_metadata(out.table, c);
    out.table.set_metadata("robust_lambda", format_double(c.robust_lambda));
    return out;
}

}  // namespace

const char* to_string(ExperimentKind k) {
    for (const auto& kn : kKindNames)
        if (kn.kind == k) return kn.name;
    return "?";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
    for (const auto& kn : kKindNames)
        if (name == kn.name) return kn.kind;
    throw ConfigError("unknown experiment kind '" + name + "'");
}

SystemConfig rotation_system(double alpha, int k) {
    if (!(alpha >= -1.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [-1, 1]");
    const double beta = std::sqrt(1.0 - alpha * alpha);
    SystemConfig s;
    s.label = "rotation alpha=" + short_number(alpha);
    s.a.resize(2, 2);
    s.a << alpha, beta, -beta, alpha;
    s.c.resize(1, 2);
    s.c << 1.0, 0.0;
    s.k = k;
    return s;
}

SystemConfig shear_system(double rho, int k) {
    SystemConfig s;
    s.label = "shear rho=" + short_number(rho);
    s.a.resize(2, 2);
    s.a << 1.0, rho, 0.0, 1.0;
    s.c.resize(1, 2);
    s.c << 1.0, 0.0;
    s.k = k;
    return s;
}

LtiSystem build_system(const SystemConfig& s) {
    if (s.a.rows() == 0 || s.a.rows() != s.a.cols()) throw ConfigError("system A must be square");
    if (s.c.rows() == 0 || s.c.cols() != s.a.rows()) throw ConfigError("system C must be p x n");
    const Index n = s.a.rows(), p = s.c.rows();
    return make_system(s.a, s.c, expand_square(s.sigma0, n, "sigma0"),
                       expand_square(s.sigma_w, n, "sigma_w"),
                       expand_square(s.sigma_v, p, "sigma_v"), s.horizon);
}

LinearInverseProblem build_problem(const ProblemConfig& p, const RngStream& stream) {
    MatrixXd a_star = p.a_star;
    if (a_star.size() == 0) {
        if (p.dim < 1) throw ConfigError("problem.dim must be positive");
        a_star = generate_conditioned_matrix(p.dim, p.condition, stream);
    }
    const Index n = a_star.cols(), m = a_star.rows();
    if (p.a_eval.size() && (p.a_eval.rows() != m || p.a_eval.cols() != n))
        throw ConfigError("problem.a_eval must have the shape of a_star");
    return make_problem(a_star, expand_square(p.sigma_x, n, "sigma_x"),
                        expand_square(p.sigma_w, m, "sigma_w"), p.epsilon);
}

std::vector<double> ExperimentConfig::default_rho_sweep() {
    std::vector<double> out;
    const double lo = std::log(0.1), hi = std::log(std::sqrt(10.0));
    for (int i = 0; i < 12; ++i) out.push_back(std::exp(lo + (hi - lo) * i / 11.0));
    out.back() = std::sqrt(10.0);
    return out;
}

void ExperimentConfig::validate() const {
    if (n_samples == 0) throw ConfigError("n_samples must be positive");
    if (lambda_grid.empty()) throw ConfigError("lambda_grid is empty");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] >= 0.0)) throw ConfigError("lambda_grid values must be nonnegative");
        if (i && !(lambda_grid[i] >= lambda_grid[i - 1]))
            throw ConfigError("lambda_grid must be nondecreasing");
    }
    if (svg && output_path.empty()) throw ConfigError("svg output needs an output path");
    if (!(problem.epsilon >= 0.0) || !std::isfinite(problem.epsilon))
        throw ConfigError("problem.epsilon must be finite and nonnegative");
    if (!(problem.condition >= 1.0)) throw ConfigError("problem.condition must be >= 1");
    for (double k : conditions)
        if (!(k >= 1.0) || !std::isfinite(k)) throw ConfigError("conditions must be finite and >= 1");
    for (double a : alphas)
        if (!(a >= -1.0 && a <= 1.0)) throw ConfigError("alphas must lie in [-1, 1]");
    for (int k : estimate_indices)
        if (k < 0 || k > 5) throw ConfigError("estimate_indices must lie in [0, 5]");
    for (double r : rhos)
        if (!std::isfinite(r)) throw ConfigError("rhos must be finite");
    for (const auto& s : systems) {
        if (s.k < 0 || s.k > s.horizon) throw ConfigError("systems[].k must lie in [0, horizon]");
        if (!(s.epsilon >= 0.0) || !std::isfinite(s.epsilon))
            throw ConfigError("systems[].epsilon must be finite and nonnegative");
    }
    if (!(robust_lambda >= 0.0)) throw ConfigError("robust_lambda must be nonnegative");
    TrainConfig t;
    t.batch_size = training.batch_size;
    t.n_iters = training.n_iters;
    t.step_c0 = training.step_c0;
    t.step_decay = training.step_decay;
    t.validate();
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    reject_unknown(j,
                   {"kind", "seed", "n_samples", "lambda_grid", "output_path", "svg", "problem",
                    "perturb", "systems", "training", "conditions", "alphas", "estimate_indices",
                    "rhos", "robust_lambda"},
                   "config");
    ExperimentConfig c;
    try {
        if (j.contains("kind")) {
            if (!j["kind"].is_string()) throw ConfigError("kind must be a string");
            c.kind = parse_experiment_kind(j["kind"].get<std::string>());
        }
        if (j.contains("seed")) c.seed = parse_integer<std::uint64_t>(j["seed"], "seed");
        if (j.contains("n_samples"))
            c.n_samples = parse_integer<std::uint64_t>(j["n_samples"], "n_samples");
        if (j.contains("lambda_grid")) c.lambda_grid = parse_doubles(j["lambda_grid"], "lambda_grid");
        if (j.contains("output_path")) {
            if (!j["output_path"].is_string()) throw ConfigError("output_path must be a string");
            c.output_path = j["output_path"].get<std::string>();
        }
        if (j.contains("svg")) {
            if (!j["svg"].is_boolean()) throw ConfigError("svg must be true or false");
            c.svg = j["svg"].get<bool>();
        }
        if (j.contains("problem")) c.problem = parse_problem(j["problem"]);
        if (j.contains("perturb")) c.perturb = parse_perturb(j["perturb"]);
        if (j.contains("systems")) {
            if (!j["systems"].is_array()) throw ConfigError("systems must be an array");
            c.systems.clear();
            for (const auto& s : j["systems"]) c.systems.push_back(parse_system(s));
        }
        if (j.contains("training")) c.training = parse_training(j["training"]);
        if (j.contains("conditions")) c.conditions = parse_doubles(j["conditions"], "conditions");
        if (j.contains("alphas")) c.alphas = parse_doubles(j["alphas"], "alphas");
        if (j.contains("estimate_indices")) {
            if (!j["estimate_indices"].is_array())
                throw ConfigError("estimate_indices must be an array");
            c.estimate_indices.clear();
            for (const auto& k : j["estimate_indices"])
                c.estimate_indices.push_back(parse_integer<int>(k, "estimate_indices"));
        }
        if (j.contains("rhos")) c.rhos = parse_doubles(j["rhos"], "rhos");
        if (j.contains("robust_lambda"))
            c.robust_lambda = parse_number(j["robust_lambda"], "robust_lambda");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open config file " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    if (f.bad()) throw IoError("failed reading config file " + path);
    return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& config) {
    return config_json(config).dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& config) {
    json j = config_json(config);
    j.erase("output_path");
    j.erase("svg");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

MatrixXd haar_orthogonal(int n, SplitMix64& engine) {
    MatrixXd g(n, n);
    fill_standard_normal(engine, g);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(n, n);
    const MatrixXd& r = qr.matrixQR();
    for (int j = 0; j < n; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    return q;
}

MatrixXd generate_conditioned_matrix(int n, double condition, const RngStream& stream) {
    if (n < 1) throw ConfigError("matrix dimension must be positive");
    if (!(condition >= 1.0) || !std::isfinite(condition))
        throw ConfigError("condition number must be finite and >= 1");
    if (n == 1 && condition != 1.0) throw ConfigError("a 1x1 matrix has condition number 1");
    SplitMix64 eu = stream.substream(0), ev = stream.substream(1);
    const MatrixXd u = haar_orthogonal(n, eu);
    const MatrixXd v = haar_orthogonal(n, ev);
    VectorXd d(n);
    for (int i = 0; i < n; ++i)
        d(i) = n == 1 ? 1.0 : std::pow(condition, -static_cast<double>(i) / (n - 1));
    d /= d.norm();
    return u * d.asDiagonal() * v.transpose();
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    switch (config.kind) {
        case ExperimentKind::perturb: return run_perturb(config);
        case ExperimentKind::risk: return run_risk(config);
        case ExperimentKind::bounds: return run_bounds(config);
        case ExperimentKind::pareto: return run_pareto(config);
        case ExperimentKind::kalman_bounds: return run_kalman_bounds(config);
        case ExperimentKind::fig_condition: return run_fig_condition(config);
        case ExperimentKind::fig_observability: return run_fig_observability(config);
        case ExperimentKind::fig_kf_vs_adv: return run_fig_kf_vs_adv(config);
    }
    throw ConfigError("unknown experiment kind");
}

void write_outputs(const ExperimentResult& result, const ExperimentConfig& config) {
    const std::string csv = result.table.to_csv();
    if (config.output_path.empty()) {
        std::cout << csv;
        std::cout.flush();
        if (!std::cout) throw IoError("failed writing to standard output");
    } else {
        write_text_file(config.output_path, csv);
    }
    if (config.svg) {
        if (config.output_path.empty()) throw ConfigError("svg output needs an output path");
        std::string path = config.output_path;
        const auto slash = path.find_last_of('/');
        const auto dot = path.find_last_of('.');
        if (dot != std::string::npos && (slash == std::string::npos || dot > slash))
            path.erase(dot);
        write_text_file(path + ".svg", render_svg(result.chart));
    }
}

}  // namespace advrobust
