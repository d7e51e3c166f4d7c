#include "srlab/optimizers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace srlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct KindInfo {
    OptimizerKind kind;
    std::string_view name;
};

constexpr std::array<KindInfo, 8> kKinds{{
    {OptimizerKind::NoOpt, "noopt"},
    {OptimizerKind::BFGS, "bfgs"},
    {OptimizerKind::CG, "cg"},
    {OptimizerKind::LS, "ls"},
    {OptimizerKind::PSO, "pso"},
    {OptimizerKind::NelderMead, "neldermead"},
    {OptimizerKind::DE, "de"},
    {OptimizerKind::DualAnnealing, "dualannealing"},
}};

// Improvement below tol * (1 + |f|) counts as stagnation.
bool stalled(double before, double after, double tol)
{
    if (!std::isfinite(before) || !std::isfinite(after)) return false;
    return before - after <= tol * (1.0 + std::abs(after));
}

double actual_step(double x, double h)
{
    volatile double moved = x + h;
    return moved - x;
}

// Armijo backtracking along `direction`. Returns the accepted step length or 0.
double backtrack(LossFunction const& f, ParamVector const& p, double fp, Eigen::VectorXd const& g,
                 Eigen::VectorXd const& direction, double alpha, LineSearchParameters const& ls, ParamVector& out,
                 double& fout)
{
    double const slope = g.dot(direction);
    for (std::size_t i = 0; i <= ls.maxBacktracks; ++i) {
        out = p + alpha * direction;
        fout = f(out);
        if (std::isfinite(fout) && fout <= fp + ls.armijo * alpha * slope) return alpha;
        alpha *= ls.backtrack;
    }
    return 0.0;
}

void wrap_into_box(ParamVector& x, ParamVector const& lower, ParamVector const& upper)
{
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double const range = upper[i] - lower[i];
        if (x[i] >= lower[i] && x[i] <= upper[i]) continue;
        double r = std::fmod(x[i] - lower[i], range);
        if (r < 0.0) r += range;
        x[i] = lower[i] + r;
    }
}

ParamVector random_normal(std::size_t n, Rng& rng)
{
    ParamVector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
    return v;
}

void run_bfgs(TrackedLoss& tracked, LossFunction const& f, ParamVector const& start, double tol)
{
    BfgsState state = init_bfgs(f, start);
    while (!tracked.exhausted() && !state.converged) {
        double const before = state.loss;
        bfgs_step(state, f);
        if (stalled(before, state.loss, tol)) break;
    }
}

void run_cg(TrackedLoss& tracked, LossFunction const& f, ParamVector const& start, double tol)
{
    CgState state = init_cg(f, start);
    while (!tracked.exhausted() && !state.converged) {
        double const before = state.loss;
        cg_step(state, f);
        if (stalled(before, state.loss, tol)) break;
    }
}

void run_lm(TrackedLoss& tracked, ParamVector const& start, double tol)
{
    if (!tracked.objective().has_residuals())
        throw std::invalid_argument("optimize: Levenberg-Marquardt needs a residual objective");
    LmState state{start, 1e-3, tracked.best_loss(), false};
    while (!tracked.exhausted()) {
        double const before = state.loss;
        state = lm_step(tracked, state);
        if (!std::isfinite(state.loss) || state.lambda > 1e16) break;
        if (state.accepted && (state.loss == 0.0 || stalled(before, state.loss, tol))) break;
    }
}

// Both the loss spread and the vertex spread must be small; equal losses on
// a symmetric simplex alone do not mean convergence.
bool simplex_converged(Simplex const& simplex, double tol)
{
    double const best = simplex.losses.minCoeff();
    double const worst = simplex.losses.maxCoeff();
    if (!std::isfinite(worst) || worst - best > tol * (1.0 + std::abs(best))) return false;
    Eigen::Index const b = simplex_best(simplex);
    double const scale = 1.0 + simplex.vertices.col(b).cwiseAbs().maxCoeff();
    double const spread = (simplex.vertices.colwise() - simplex.vertices.col(b)).cwiseAbs().maxCoeff();
    return spread <= std::sqrt(tol) * scale;
}

void run_nelder_mead(TrackedLoss& tracked, LossFunction const& f, ParamVector const& start, double tol)
{
    Simplex simplex = initial_simplex(f, start);
    while (!tracked.exhausted()) {
        if (!std::isfinite(simplex.losses.minCoeff()) || simplex_converged(simplex, tol)) break;
        nelder_mead_step(simplex, f);
    }
}

void run_pso(TrackedLoss& tracked, LossFunction const& f, ParamVector const& start, std::size_t particles, double tol,
             Rng& rng)
{
    Swarm swarm = init_swarm(f, start, particles, rng);
    while (!tracked.exhausted()) {
        pso_step(swarm, f, rng);
        double const spread = swarm.personalBestLoss.maxCoeff() - swarm.globalBestLoss;
        if (std::isfinite(spread) && spread <= tol * (1.0 + std::abs(swarm.globalBestLoss))) break;
    }
}

void run_de(TrackedLoss& tracked, LossFunction const& f, ParamVector const& start, std::size_t agents, double tol,
            Rng& rng)
{
    DePopulation pop = init_de(f, start, std::max<std::size_t>(agents, 4), rng);
    while (!tracked.exhausted()) {
        de_step(pop, f, rng);
        double const best = pop.losses.minCoeff();
        double const spread = pop.losses.maxCoeff() - best;
        if (std::isfinite(spread) && spread <= tol * (1.0 + std::abs(best))) break;
    }
}

void run_dual_annealing(TrackedLoss& tracked, LossFunction const& f, ParamVector const& start, double tol, Rng& rng)
{
    // The last fifth of the budget is reserved for a Nelder-Mead polish.
    std::size_t const polishReserve = std::max<std::size_t>(tracked.remaining() / 5, 1);
    AnnealingState state = init_annealing(f, start);
    auto const chainCost = 2 * static_cast<std::size_t>(start.size());
    while (tracked.remaining() > polishReserve + chainCost) dual_annealing_step(state, f, rng);

    Simplex simplex = initial_simplex(f, tracked.best());
    while (!tracked.exhausted()) {
        if (!std::isfinite(simplex.losses.minCoeff()) || simplex_converged(simplex, tol)) break;
        nelder_mead_step(simplex, f);
    }
}

} // namespace

std::string_view kind_name(OptimizerKind kind) noexcept
{
    for (auto const& k : kKinds)
        if (k.kind == kind) return k.name;
    return "?";
}

std::optional<OptimizerKind> kind_from_name(std::string_view name) noexcept
{
    for (auto const& k : kKinds)
        if (k.name == name) return k.kind;
    return std::nullopt;
}

std::string_view init_name(InitStrategy init) noexcept { return init == InitStrategy::Current ? "current" : "random"; }

std::optional<InitStrategy> init_from_name(std::string_view name) noexcept
{
    if (name == "current") return InitStrategy::Current;
    if (name == "random") return InitStrategy::RandomNormal;
    return std::nullopt;
}

std::size_t default_budget(OptimizerKind kind) noexcept
{
    switch (kind) {
    case OptimizerKind::NoOpt: return 1;
    case OptimizerKind::PSO:
    case OptimizerKind::DE:
    case OptimizerKind::DualAnnealing: return 50 * 15;
    default: return 100;
    }
}

Objective Objective::from_residuals(std::size_t dim, std::size_t n_residuals, ResidualFn fn)
{
    if (n_residuals == 0) throw std::invalid_argument("Objective: residual count must be positive");
    Objective o;
    o.dim_ = dim;
    o.nResiduals_ = n_residuals;
    o.residualFn_ = std::move(fn);
    return o;
}

Objective Objective::from_loss(std::size_t dim, LossFn fn)
{
    Objective o;
    o.dim_ = dim;
    o.lossFn_ = std::move(fn);
    return o;
}

double Objective::loss(ParamVector const& p) const
{
    if (lossFn_) {
        double const v = lossFn_(p);
        return std::isfinite(v) ? v : kInf;
    }
    Eigen::VectorXd r(static_cast<Eigen::Index>(nResiduals_));
    if (!residualFn_(p, r)) return kInf;
    double const v = r.squaredNorm() / static_cast<double>(nResiduals_);
    return std::isfinite(v) ? v : kInf;
}

bool Objective::residuals(ParamVector const& p, Eigen::VectorXd& out) const
{
    if (!residualFn_) return false;
    out.resize(static_cast<Eigen::Index>(nResiduals_));
    return residualFn_(p, out) && out.allFinite();
}

double TrackedLoss::operator()(ParamVector const& p)
{
    if (exhausted()) return kInf;
    ++evaluations_;
    double const v = obj_.loss(p);
    offer(p, v);
    return v;
}

void TrackedLoss::offer(ParamVector const& p, double loss)
{
    if (hasBest_ && !(loss < bestLoss_)) return;
    best_ = p;
    bestLoss_ = loss;
    hasBest_ = true;
}

Gradient numeric_gradient(LossFunction const& f, ParamVector const& p, std::optional<double> fp)
{
    Gradient g{Eigen::VectorXd::Zero(p.size()), false};
    double const sqrtEps = std::sqrt(std::numeric_limits<double>::epsilon());
    ParamVector probe = p;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        double const h = actual_step(p[i], sqrtEps * std::max(1.0, std::abs(p[i])));
        probe[i] = p[i] + h;
        double const up = f(probe);
        probe[i] = p[i] - h;
        double const down = f(probe);
        probe[i] = p[i];
        bool const upOk = std::isfinite(up), downOk = std::isfinite(down);
        if (upOk && downOk) {
            g.value[i] = (up - down) / (2.0 * h);
            continue;
        }
        if (!upOk && !downOk) {
            g.degraded = true;
            continue;
        }
        if (!fp) fp = f(p);
        if (!std::isfinite(*fp)) {
            g.degraded = true;
            continue;
        }
        g.value[i] = upOk ? (up - *fp) / h : (*fp - down) / h;
    }
    return g;
}

LmState lm_step(TrackedLoss& f, LmState state)
{
    Objective const& obj = f.objective();
    auto const n = state.params.size();
    auto const m = static_cast<Eigen::Index>(obj.residual_count());
    state.accepted = false;

    Eigen::VectorXd r0(m);
    if (f.exhausted()) return state;
    f.charge(1);
    if (!obj.residuals(state.params, r0)) {
        state.loss = kInf;
        f.offer(state.params, kInf);
        return state;
    }
    state.loss = r0.squaredNorm() / static_cast<double>(m);
    f.offer(state.params, state.loss);

    // Model Jacobian d(yhat)/dp = -d(r)/dp by forward differences.
    double const sqrtEps = std::sqrt(std::numeric_limits<double>::epsilon());
    Eigen::MatrixXd jac(m, n);
    Eigen::VectorXd ri(m);
    ParamVector probe = state.params;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (f.exhausted()) return state;
        double const h = actual_step(state.params[j], sqrtEps * std::max(1.0, std::abs(state.params[j])));
        probe[j] = state.params[j] + h;
        f.charge(1);
        bool ok = obj.residuals(probe, ri);
        if (!ok) {
            probe[j] = state.params[j] - h;
            f.charge(1);
            ok = obj.residuals(probe, ri);
            if (ok) jac.col(j) = (ri - r0) / h;
        }
        else {
            jac.col(j) = -(ri - r0) / h;
        }
        if (!ok) jac.col(j).setZero();
        probe[j] = state.params[j];
    }

    Eigen::MatrixXd const normal = jac.transpose() * jac;
    Eigen::VectorXd const rhs = jac.transpose() * r0;
    Eigen::VectorXd diag = normal.diagonal();
    double const floor = 1e-12 * std::max(1.0, diag.maxCoeff());
    diag = diag.cwiseMax(floor);

    Eigen::MatrixXd damped = normal;
    damped.diagonal() += state.lambda * diag;
    Eigen::LDLT<Eigen::MatrixXd> solver(damped);
    Eigen::VectorXd delta = solver.solve(rhs);
    if (solver.info() != Eigen::Success || !delta.allFinite()) {
        state.lambda *= 10.0;
        return state;
    }

    ParamVector const proposal = state.params + delta;
    double const proposed = f(proposal);
    if (std::isfinite(proposed) && proposed <= state.loss) {
        state.params = proposal;
        state.loss = proposed;
        state.accepted = true;
        state.lambda /= 10.0;
    }
    else {
        state.lambda *= 10.0;
    }
    return state;
}

Swarm init_swarm(LossFunction const& f, ParamVector const& center, std::size_t particles, Rng& rng)
{
    auto const dim = center.size();
    auto const np = static_cast<Eigen::Index>(std::max<std::size_t>(particles, 1));
    Swarm s;
    s.positions.resize(dim, np);
    for (Eigen::Index k = 0; k < np; ++k) {
        s.positions.col(k) = center;
        if (k > 0)
            for (Eigen::Index i = 0; i < dim; ++i) s.positions(i, k) += rng.normal();
    }
    s.velocities = Eigen::MatrixXd::Zero(dim, np);
    s.personalBest = s.positions;
    s.personalBestLoss.resize(np);
    for (Eigen::Index k = 0; k < np; ++k) s.personalBestLoss[k] = f(s.positions.col(k));
    Eigen::Index best = 0;
    s.globalBestLoss = s.personalBestLoss.minCoeff(&best);
    s.globalBest = s.personalBest.col(best);
    return s;
}

void pso_step(Swarm& s, LossFunction const& f, Rng& rng, PsoCoefficients const& c)
{
    auto const dim = s.positions.rows();
    for (Eigen::Index k = 0; k < s.positions.cols(); ++k) {
        for (Eigen::Index i = 0; i < dim; ++i) {
            double const r1 = rng.uniform(), r2 = rng.uniform();
            s.velocities(i, k) = c.inertia * s.velocities(i, k) +
                                 c.cognitive * r1 * (s.personalBest(i, k) - s.positions(i, k)) +
                                 c.social * r2 * (s.globalBest[i] - s.positions(i, k));
        }
        s.positions.col(k) += s.velocities.col(k);
        double const loss = f(s.positions.col(k));
        if (loss < s.personalBestLoss[k]) {
            s.personalBestLoss[k] = loss;
            s.personalBest.col(k) = s.positions.col(k);
        }
    }
    Eigen::Index best = 0;
    double const bestLoss = s.personalBestLoss.minCoeff(&best);
    if (bestLoss < s.globalBestLoss) {
        s.globalBestLoss = bestLoss;
        s.globalBest = s.personalBest.col(best);
    }
}

Simplex make_simplex(LossFunction const& f, Eigen::MatrixXd vertices)
{
    Simplex s{std::move(vertices), {}};
    s.losses.resize(s.vertices.cols());
    for (Eigen::Index k = 0; k < s.vertices.cols(); ++k) s.losses[k] = f(s.vertices.col(k));
    return s;
}

Simplex initial_simplex(LossFunction const& f, ParamVector const& start)
{
    auto const n = start.size();
    Eigen::MatrixXd v(n, n + 1);
    v.col(0) = start;
    for (Eigen::Index i = 0; i < n; ++i) {
        v.col(i + 1) = start;
        v(i, i + 1) = start[i] != 0.0 ? 1.05 * start[i] : 0.00025;
    }
    return make_simplex(f, std::move(v));
}

Eigen::Index simplex_best(Simplex const& simplex)
{
    Eigen::Index best = 0;
    simplex.losses.minCoeff(&best);
    return best;
}

void nelder_mead_step(Simplex& s, LossFunction const& f, NelderMeadCoefficients const& c)
{
    auto const count = s.vertices.cols();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return s.losses[a] < s.losses[b]; });
    Eigen::Index const best = order.front();
    Eigen::Index const worst = order.back();
    Eigen::Index const second = order[order.size() - 2];

    ParamVector centroid = ParamVector::Zero(s.vertices.rows());
    for (Eigen::Index k = 0; k < count; ++k)
        if (k != worst) centroid += s.vertices.col(k);
    centroid /= static_cast<double>(count - 1);

    auto replace = [&](ParamVector const& p, double loss) {
        s.vertices.col(worst) = p;
        s.losses[worst] = loss;
    };

    ParamVector const reflected = centroid + c.reflection * (centroid - s.vertices.col(worst));
    double const fr = f(reflected);
    if (fr < s.losses[best]) {
        ParamVector const expanded = centroid + c.expansion * (reflected - centroid);
        double const fe = f(expanded);
        if (fe < fr) replace(expanded, fe);
        else replace(reflected, fr);
        return;
    }
    if (fr < s.losses[second]) {
        replace(reflected, fr);
        return;
    }
    if (fr < s.losses[worst]) {
        ParamVector const outside = centroid + c.contraction * (reflected - centroid);
        double const fc = f(outside);
        if (fc <= fr) {
            replace(outside, fc);
            return;
        }
    }
    else {
        ParamVector const inside = centroid + c.contraction * (s.vertices.col(worst) - centroid);
        double const fc = f(inside);
        if (fc < s.losses[worst]) {
            replace(inside, fc);
            return;
        }
    }
    for (Eigen::Index k = 0; k < count; ++k) {
        if (k == best) continue;
        s.vertices.col(k) = s.vertices.col(best) + c.shrink * (s.vertices.col(k) - s.vertices.col(best));
        s.losses[k] = f(s.vertices.col(k));
    }
}

DePopulation init_de(LossFunction const& f, ParamVector const& center, std::size_t agents, Rng& rng)
{
    auto const dim = center.size();
    auto const np = static_cast<Eigen::Index>(agents);
    DePopulation pop;
    pop.agents.resize(dim, np);
    pop.losses.resize(np);
    for (Eigen::Index k = 0; k < np; ++k) {
        pop.agents.col(k) = center;
        if (k > 0)
            for (Eigen::Index i = 0; i < dim; ++i) pop.agents(i, k) += rng.normal();
        pop.losses[k] = f(pop.agents.col(k));
    }
    return pop;
}

void de_step(DePopulation& pop, LossFunction const& f, Rng& rng, DeCoefficients const& c)
{
    auto const dim = pop.agents.rows();
    auto const np = static_cast<std::size_t>(pop.agents.cols());
    if (np < 4) throw std::invalid_argument("de_step: rand/1 needs at least 4 agents");
    Eigen::MatrixXd next = pop.agents;
    Eigen::VectorXd nextLoss = pop.losses;
    ParamVector trial(dim);
    for (std::size_t i = 0; i < np; ++i) {
        std::size_t a, b, d;
        do a = rng.index(np); while (a == i);
        do b = rng.index(np); while (b == i || b == a);
        do d = rng.index(np); while (d == i || d == a || d == b);
        auto const col = [](std::size_t k) { return static_cast<Eigen::Index>(k); };
        ParamVector const mutant = pop.agents.col(col(a)) + c.weight * (pop.agents.col(col(b)) - pop.agents.col(col(d)));
        auto const forced = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(dim)));
        for (Eigen::Index j = 0; j < dim; ++j)
            trial[j] = (j == forced || rng.uniform() < c.crossover) ? mutant[j] : pop.agents(j, col(i));
        double const loss = f(trial);
        if (loss <= pop.losses[col(i)]) {
            next.col(col(i)) = trial;
            nextLoss[col(i)] = loss;
        }
    }
    pop.agents = std::move(next);
    pop.losses = std::move(nextLoss);
}

AnnealingState init_annealing(LossFunction const& f, ParamVector const& start)
{
    AnnealingState s;
    s.current = start;
    s.currentLoss = f(start);
    s.best = start;
    s.bestLoss = s.currentLoss;
    ParamVector radius = (10.0 * start.cwiseAbs()).cwiseMax(10.0);
    s.lower = start - radius;
    s.upper = start + radius;
    return s;
}

double annealing_temperature(AnnealingParameters const& a, std::size_t iteration)
{
    double const qv1 = a.visiting - 1.0;
    double const t1 = std::exp(qv1 * std::log(2.0)) - 1.0;
    double const t2 = std::exp(qv1 * std::log(static_cast<double>(iteration) + 2.0)) - 1.0;
    return a.initialTemperature * t1 / t2;
}

double visiting_step(AnnealingParameters const& a, double temperature, Rng& rng)
{
    double const qv = a.visiting;
    double const factor1 = std::exp(std::log(temperature) / (qv - 1.0));
    double const factor2 = std::exp((4.0 - qv) * std::log(qv - 1.0));
    double const factor3 = std::exp((2.0 - qv) * std::log(2.0) / (qv - 1.0));
    double const factor4 = std::sqrt(std::numbers::pi) * factor1 * factor2 / (factor3 * (3.0 - qv));
    double const factor5 = 1.0 / (qv - 1.0) - 0.5;
    double const d1 = 2.0 - factor5;
    double const factor6 =
        std::numbers::pi * (1.0 - factor5) / std::sin(std::numbers::pi * (1.0 - factor5)) / std::tgamma(d1);
    double const sigma = std::exp(-(qv - 1.0) * std::log(factor6 / factor4) / (3.0 - qv));
    double const x = sigma * rng.normal();
    double const y = rng.normal();
    double const den = std::exp((qv - 1.0) * std::log(std::abs(y)) / (3.0 - qv));
    double step = x / den;
    constexpr double tail = 1e8;
    if (!std::isfinite(step) || step > tail) step = tail * rng.uniform();
    else if (step < -tail) step = -tail * rng.uniform();
    return step;
}

void dual_annealing_step(AnnealingState& s, LossFunction const& f, Rng& rng, AnnealingParameters const& a)
{
    double temperature = annealing_temperature(a, s.iteration);
    if (temperature < a.initialTemperature * a.restartRatio) {
        for (Eigen::Index i = 0; i < s.current.size(); ++i) s.current[i] = rng.uniform(s.lower[i], s.upper[i]);
        s.currentLoss = f(s.current);
        s.iteration = 0;
        temperature = annealing_temperature(a, 0);
    }
    double const temperatureStep = temperature / static_cast<double>(s.iteration + 1);
    auto const dim = s.current.size();
    ParamVector candidate(dim);
    for (Eigen::Index j = 0; j < 2 * dim; ++j) {
        candidate = s.current;
        if (j < dim) {
            for (Eigen::Index i = 0; i < dim; ++i) candidate[i] += visiting_step(a, temperature, rng);
        }
        else {
            candidate[j - dim] += visiting_step(a, temperature, rng);
        }
        wrap_into_box(candidate, s.lower, s.upper);
        double const e = f(candidate);
        bool accept = e < s.currentLoss;
        if (!accept && std::isfinite(e)) {
            double const r = rng.uniform();
            double const pqvTemp = 1.0 - (1.0 - a.acceptance) * (e - s.currentLoss) / temperatureStep;
            double const pqv = pqvTemp <= 0.0 ? 0.0 : std::exp(std::log(pqvTemp) / (1.0 - a.acceptance));
            accept = r <= pqv;
        }
        if (accept) {
            s.current = candidate;
            s.currentLoss = e;
        }
        if (e < s.bestLoss) {
            s.best = candidate;
            s.bestLoss = e;
        }
    }
    ++s.iteration;
}

BfgsState init_bfgs(LossFunction const& f, ParamVector const& start)
{
    BfgsState s;
    s.params = start;
    s.loss = f(start);
    s.inverseHessian = Eigen::MatrixXd::Identity(start.size(), start.size());
    if (!std::isfinite(s.loss)) {
        s.converged = true;
        s.gradient = Eigen::VectorXd::Zero(start.size());
        return s;
    }
    s.gradient = numeric_gradient(f, start, s.loss).value;
    return s;
}

void bfgs_step(BfgsState& s, LossFunction const& f, LineSearchParameters const& ls)
{
    if (s.converged) return;
    if (s.gradient.squaredNorm() == 0.0) {
        s.converged = true;
        return;
    }
    Eigen::VectorXd direction = -s.inverseHessian * s.gradient;
    if (!(s.gradient.dot(direction) < 0.0)) {
        s.inverseHessian.setIdentity();
        direction = -s.gradient;
    }
    ParamVector next;
    double nextLoss = kInf;
    double const alpha = backtrack(f, s.params, s.loss, s.gradient, direction, 1.0, ls, next, nextLoss);
    if (alpha == 0.0) {
        s.converged = true;
        return;
    }
    Eigen::VectorXd const nextGradient = numeric_gradient(f, next, nextLoss).value;
    Eigen::VectorXd const step = next - s.params;
    Eigen::VectorXd const change = nextGradient - s.gradient;
    double const curvature = change.dot(step);
    if (curvature > 1e-12 * step.norm() * change.norm() && curvature > 0.0) {
        if (s.firstStep) s.inverseHessian *= curvature / change.squaredNorm();
        double const rho = 1.0 / curvature;
        auto const n = step.size();
        Eigen::MatrixXd const left = Eigen::MatrixXd::Identity(n, n) - rho * step * change.transpose();
        s.inverseHessian = left * s.inverseHessian * left.transpose() + rho * step * step.transpose();
        s.firstStep = false;
    }
    s.params = next;
    s.loss = nextLoss;
    s.gradient = nextGradient;
}

CgState init_cg(LossFunction const& f, ParamVector const& start)
{
    CgState s;
    s.params = start;
    s.loss = f(start);
    if (!std::isfinite(s.loss)) {
        s.converged = true;
        s.gradient = s.direction = Eigen::VectorXd::Zero(start.size());
        return s;
    }
    s.gradient = numeric_gradient(f, start, s.loss).value;
    s.direction = -s.gradient;
    s.lastStep = 1.0 / std::max(1.0, s.gradient.norm());
    return s;
}

void cg_step(CgState& s, LossFunction const& f, LineSearchParameters const& ls)
{
    if (s.converged) return;
    if (s.gradient.squaredNorm() == 0.0) {
        s.converged = true;
        return;
    }
    if (!(s.gradient.dot(s.direction) < 0.0)) s.direction = -s.gradient;

    ParamVector next;
    double nextLoss = kInf;
    double alpha = backtrack(f, s.params, s.loss, s.gradient, s.direction, s.lastStep, ls, next, nextLoss);
    if (alpha == 0.0) {
        // Retry once from a unit step along steepest descent before giving up.
        s.direction = -s.gradient;
        alpha = backtrack(f, s.params, s.loss, s.gradient, s.direction, 1.0, ls, next, nextLoss);
        if (alpha == 0.0) {
            s.converged = true;
            return;
        }
    }
    else if (alpha == s.lastStep) {
        // The first trial was accepted: probe longer steps while they keep improving.
        for (int k = 0; k < 10; ++k) {
            ParamVector const longer = s.params + 2.0 * alpha * s.direction;
            double const fl = f(longer);
            if (!(std::isfinite(fl) && fl < nextLoss)) break;
            alpha *= 2.0;
            next = longer;
            nextLoss = fl;
        }
    }

    Eigen::VectorXd const nextGradient = numeric_gradient(f, next, nextLoss).value;
    double const beta =
        std::max(0.0, nextGradient.dot(nextGradient - s.gradient) / s.gradient.squaredNorm());
    Eigen::VectorXd nextDirection = -nextGradient + beta * s.direction;
    if (!(nextGradient.dot(nextDirection) < 0.0)) nextDirection = -nextGradient;

    double const slopeBefore = s.gradient.dot(s.direction);
    double const slopeAfter = nextGradient.dot(nextDirection);
    s.lastStep = slopeAfter != 0.0 ? std::clamp(alpha * slopeBefore / slopeAfter, 1e-10, 1e10) : 1.0;

    s.params = next;
    s.loss = nextLoss;
    s.gradient = nextGradient;
    s.direction = nextDirection;
}

OptimizeResult optimize(OptimizerSpec const& spec, Objective const& obj, ParamVector const& current, Rng& rng)
{
    auto const dim = static_cast<Eigen::Index>(obj.dimension());
    if (current.size() != dim)
        throw std::invalid_argument("optimize: params have length " + std::to_string(current.size()) +
                                    " but the objective has dimension " + std::to_string(dim));
    if (spec.tolerance <= 0.0) throw std::invalid_argument("optimize: tolerance must be positive");
    if (spec.kind == OptimizerKind::NoOpt || dim == 0) return {current, obj.loss(current), 1};

    std::size_t const budget = std::max<std::size_t>(spec.effective_budget(), 1);
    TrackedLoss tracked(obj, budget);
    LossFunction const f = [&tracked](ParamVector const& p) { return tracked(p); };

    ParamVector const start =
        spec.init == InitStrategy::Current ? current : random_normal(static_cast<std::size_t>(dim), rng);
    double const startLoss = tracked(start);
    bool const localMethod = spec.kind == OptimizerKind::BFGS || spec.kind == OptimizerKind::CG ||
                             spec.kind == OptimizerKind::LS || spec.kind == OptimizerKind::NelderMead;
    if (!std::isfinite(startLoss) && localMethod) return {start, kInf, tracked.evaluations()};

    switch (spec.kind) {
    case OptimizerKind::BFGS: run_bfgs(tracked, f, start, spec.tolerance); break;
    case OptimizerKind::CG: run_cg(tracked, f, start, spec.tolerance); break;
    case OptimizerKind::LS: run_lm(tracked, start, spec.tolerance); break;
    case OptimizerKind::NelderMead: run_nelder_mead(tracked, f, start, spec.tolerance); break;
    case OptimizerKind::PSO: run_pso(tracked, f, start, spec.population, spec.tolerance, rng); break;
    case OptimizerKind::DE: run_de(tracked, f, start, spec.population, spec.tolerance, rng); break;
    case OptimizerKind::DualAnnealing: run_dual_annealing(tracked, f, start, spec.tolerance, rng); break;
    case OptimizerKind::NoOpt: break;
    }
    return {tracked.best(), tracked.best_loss(), tracked.evaluations()};
}

} // namespace srlab
