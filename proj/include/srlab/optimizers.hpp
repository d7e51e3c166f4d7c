#ifndef SRLAB_OPTIMIZERS_HPP
#define SRLAB_OPTIMIZERS_HPP

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "srlab/expr.hpp"
#include "srlab/rng.hpp"

namespace srlab {

enum class OptimizerKind { NoOpt, BFGS, CG, LS, PSO, NelderMead, DE, DualAnnealing };
enum class InitStrategy { Current, RandomNormal };

std::string_view kind_name(OptimizerKind kind) noexcept; // "noopt", "bfgs", ... config spelling
std::optional<OptimizerKind> kind_from_name(std::string_view name) noexcept;
std::string_view init_name(InitStrategy init) noexcept; // "current" | "random"
std::optional<InitStrategy> init_from_name(std::string_view name) noexcept;

// Default per-call budget in objective evaluations.
std::size_t default_budget(OptimizerKind kind) noexcept;

struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::NoOpt;
    InitStrategy init = InitStrategy::Current;
    std::size_t budget = 0;  // 0 = default_budget(kind)
    double tolerance = 1e-12;
    std::size_t population = 15; // PSO particles / DE agents

    std::size_t effective_budget() const noexcept { return budget == 0 ? default_budget(kind) : budget; }
};

// Loss over a parameter vector. When built from residuals, loss is the mean of
// squared residuals and +inf whenever the residual function reports failure.
class Objective {
public:
    // Writes residuals into `out` (pre-sized); returns false when nonviable.
    using ResidualFn = std::function<bool(ParamVector const&, Eigen::VectorXd&)>;
    using LossFn = std::function<double(ParamVector const&)>;

    static Objective from_residuals(std::size_t dim, std::size_t n_residuals, ResidualFn fn);
    static Objective from_loss(std::size_t dim, LossFn fn);

    std::size_t dimension() const noexcept { return dim_; }
    std::size_t residual_count() const noexcept { return nResiduals_; }
    bool has_residuals() const noexcept { return static_cast<bool>(residualFn_); }

    double loss(ParamVector const& p) const;
    // Returns false when nonviable or when the objective has no residual form.
    bool residuals(ParamVector const& p, Eigen::VectorXd& out) const;

private:
    std::size_t dim_ = 0;
    std::size_t nResiduals_ = 0;
    ResidualFn residualFn_;
    LossFn lossFn_;
};

struct OptimizeResult {
    ParamVector params;
    double loss = 0.0;
    std::size_t evaluations = 0;
};

// Runs one constant-optimization pass. The returned loss is never worse than
// the loss at the chosen starting point, and at most budget evaluations are
// spent (NoOpt and zero-dimensional objectives spend exactly one).
OptimizeResult optimize(OptimizerSpec const& spec, Objective const& obj, ParamVector const& current, Rng& rng);

// ---------------------------------------------------------------------------
// Building blocks. Each *_step performs one textbook iteration and is exposed
// for testing; optimize() drives them under a shared evaluation budget.

// Counts evaluations against a budget and keeps the best point seen.
class TrackedLoss {
public:
    TrackedLoss(Objective const& obj, std::size_t budget) : obj_(obj), budget_(budget) {}

    double operator()(ParamVector const& p);

    bool exhausted() const noexcept { return evaluations_ >= budget_; }
    std::size_t remaining() const noexcept { return exhausted() ? 0 : budget_ - evaluations_; }
    std::size_t evaluations() const noexcept { return evaluations_; }
    ParamVector const& best() const noexcept { return best_; }
    double best_loss() const noexcept { return bestLoss_; }
    Objective const& objective() const noexcept { return obj_; }

    // Charges evaluations made outside operator() (e.g. residual Jacobians).
    void charge(std::size_t n) noexcept { evaluations_ += n; }
    void offer(ParamVector const& p, double loss);

private:
    Objective const& obj_;
    std::size_t budget_;
    std::size_t evaluations_ = 0;
    ParamVector best_;
    double bestLoss_ = std::numeric_limits<double>::infinity();
    bool hasBest_ = false;
};

using LossFunction = std::function<double(ParamVector const&)>;

struct Gradient {
    Eigen::VectorXd value;
    bool degraded = false; // some coordinate had no finite probe
};

// Central differences with h_i = sqrt(eps) * max(1, |p_i|); a coordinate whose
// probe is non-finite falls back to a one-sided difference against f(p).
Gradient numeric_gradient(LossFunction const& f, ParamVector const& p, std::optional<double> fp = std::nullopt);

// Levenberg-Marquardt ----------------------------------------------------------
struct LmState {
    ParamVector params;
    double lambda = 1e-3;
    double loss = 0.0;
    bool accepted = false;
};

// One damped Gauss-Newton proposal with Marquardt diagonal scaling. Accepts if
// the loss does not increase (lambda /= 10), otherwise keeps params and
// multiplies lambda by 10. Requires a residual objective.
LmState lm_step(TrackedLoss& f, LmState state);

// Particle swarm -------------------------------------------------------------
struct PsoCoefficients {
    double inertia = 0.7298;
    double cognitive = 1.49618;
    double social = 1.49618;
};

struct Swarm {
    Eigen::MatrixXd positions;  // dim x particles
    Eigen::MatrixXd velocities;
    Eigen::MatrixXd personalBest;
    Eigen::VectorXd personalBestLoss;
    ParamVector globalBest;
    double globalBestLoss = std::numeric_limits<double>::infinity();
};

// Particle 0 sits on `center`, the rest at center + N(0,1); zero velocities.
Swarm init_swarm(LossFunction const& f, ParamVector const& center, std::size_t particles, Rng& rng);
void pso_step(Swarm& swarm, LossFunction const& f, Rng& rng, PsoCoefficients const& c = {});

// Nelder-Mead ------------------------------------------------------------------
struct NelderMeadCoefficients {
    double reflection = 1.0;
    double expansion = 2.0;
    double contraction = 0.5;
    double shrink = 0.5;
};

struct Simplex {
    Eigen::MatrixXd vertices; // dim x (dim + 1)
    Eigen::VectorXd losses;
};

Simplex make_simplex(LossFunction const& f, Eigen::MatrixXd vertices);
// Axis-aligned start: perturb each coordinate by 5% (0.00025 if zero).
Simplex initial_simplex(LossFunction const& f, ParamVector const& start);
void nelder_mead_step(Simplex& simplex, LossFunction const& f, NelderMeadCoefficients const& c = {});
// Index of the lowest-loss vertex.
Eigen::Index simplex_best(Simplex const& simplex);

// Differential evolution (rand/1/bin) -----------------------------------------
struct DeCoefficients {
    double weight = 0.8;
    double crossover = 0.9;
};

struct DePopulation {
    Eigen::MatrixXd agents; // dim x agents
    Eigen::VectorXd losses;
};

DePopulation init_de(LossFunction const& f, ParamVector const& center, std::size_t agents, Rng& rng);
void de_step(DePopulation& pop, LossFunction const& f, Rng& rng, DeCoefficients const& c = {});

// Generalized simulated annealing (dual annealing) ----------------------------
struct AnnealingParameters {
    double visiting = 2.62;
    double acceptance = -5.0;
    double initialTemperature = 5230.0;
    double restartRatio = 2e-5;
};

struct AnnealingState {
    ParamVector current;
    double currentLoss = std::numeric_limits<double>::infinity();
    ParamVector best;
    double bestLoss = std::numeric_limits<double>::infinity();
    ParamVector lower; // search box
    ParamVector upper;
    std::size_t iteration = 0; // temperature schedule index
};

AnnealingState init_annealing(LossFunction const& f, ParamVector const& start);
double annealing_temperature(AnnealingParameters const& a, std::size_t iteration);
// Tsallis-distributed visiting step for one coordinate at a temperature.
double visiting_step(AnnealingParameters const& a, double temperature, Rng& rng);
// One Markov chain of 2*dim candidate moves at the current temperature.
void dual_annealing_step(AnnealingState& state, LossFunction const& f, Rng& rng, AnnealingParameters const& a = {});

// Quasi-Newton / conjugate gradient ------------------------------------------
struct LineSearchParameters {
    double armijo = 1e-4;
    double backtrack = 0.5;
    std::size_t maxBacktracks = 40;
};

struct BfgsState {
    ParamVector params;
    double loss = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd inverseHessian;
    bool converged = false;
    bool firstStep = true;
};

BfgsState init_bfgs(LossFunction const& f, ParamVector const& start);
void bfgs_step(BfgsState& state, LossFunction const& f, LineSearchParameters const& ls = {});

struct CgState {
    ParamVector params;
    double loss = 0.0;
    Eigen::VectorXd gradient;
    Eigen::VectorXd direction;
    double lastStep = 1.0;
    bool converged = false;
};

CgState init_cg(LossFunction const& f, ParamVector const& start);
// Polak-Ribiere+ update, steepest-descent restart on non-descent directions.
void cg_step(CgState& state, LossFunction const& f, LineSearchParameters const& ls = {});

} // namespace srlab

#endif
