#include "srlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

namespace srlab {

namespace {

void check_pair(Eigen::ArrayXd const& y, Eigen::ArrayXd const& yhat)
{
    if (y.size() == 0 || y.size() != yhat.size()) throw std::invalid_argument("metrics: need equal non-zero lengths");
}

// Lentz's method for the continued fraction of I_x(a, b).
double beta_fraction(double a, double b, double x)
{
    constexpr double tiny = 1e-300;
    constexpr double eps = 1e-16;
    double const qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        double const m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double const del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

struct TableRow {
    char const* method;
    char const* init;
    char const* label;
};

constexpr TableRow kTableOrder[] = {
    {"bfgs", "current", "BFGS"},
    {"bfgs", "random", "BFGS Random"},
    {"cg", "current", "CG"},
    {"cg", "random", "CG Random"},
    {"ls", "current", "LS"},
    {"ls", "random", "LS Random"},
    {"pso", "current", "PSO"},
    {"neldermead", "current", "Nelder-Mead"},
    {"neldermead", "random", "Nelder-Mead Random"},
    {"noopt", "current", "NoOpt"},
    {"de", "current", "Differential Evolution"},
    {"dualannealing", "current", "Dual Annealing"},
};

std::size_t table_rank(std::string const& method, std::string const& init)
{
    for (std::size_t i = 0; i < std::size(kTableOrder); ++i)
        if (method == kTableOrder[i].method && init == kTableOrder[i].init) return i;
    return std::size(kTableOrder);
}

} // namespace

double mse(Eigen::ArrayXd const& y, Eigen::ArrayXd const& yhat)
{
    check_pair(y, yhat);
    return (y - yhat).square().sum() / static_cast<double>(y.size());
}

std::optional<double> r2(Eigen::ArrayXd const& y, Eigen::ArrayXd const& yhat)
{
    check_pair(y, yhat);
    double const denom = (y - y.mean()).square().sum();
    if (!(denom > 0.0)) return std::nullopt;
    return 1.0 - (y - yhat).square().sum() / denom;
}

double regularized_incomplete_beta(double a, double b, double x)
{
    if (!(a > 0.0) || !(b > 0.0) || !(x >= 0.0 && x <= 1.0))
        throw std::invalid_argument("regularized_incomplete_beta: need a, b > 0 and x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double const lnFront =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    double const front = std::exp(lnFront);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
    return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df)
{
    if (!(df > 0.0)) throw std::invalid_argument("student_t_two_sided: df must be positive");
    if (std::isinf(t)) return 0.0;
    double const t2 = t * t;
    return regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t2));
}

std::optional<CorrelationResult> pearson(std::vector<double> const& a, std::vector<double> const& b)
{
    if (a.size() != b.size()) throw std::invalid_argument("pearson: sequences differ in length");
    std::size_t const n = a.size();
    if (n < 3) return std::nullopt;
    Eigen::Map<Eigen::ArrayXd const> x(a.data(), static_cast<Eigen::Index>(n));
    Eigen::Map<Eigen::ArrayXd const> y(b.data(), static_cast<Eigen::Index>(n));
    Eigen::ArrayXd const dx = x - x.mean();
    Eigen::ArrayXd const dy = y - y.mean();
    double const sxx = dx.square().sum();
    double const syy = dy.square().sum();
    if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
    double r = (dx * dy).sum() / std::sqrt(sxx * syy);
    r = std::clamp(r, -1.0, 1.0);

    CorrelationResult out{r, 0.0, n};
    double const df = static_cast<double>(n - 2);
    double const oneMinus = 1.0 - r * r;
    if (oneMinus <= 0.0) return out;
    out.p_value = student_t_two_sided(r * std::sqrt(df / oneMinus), df);
    return out;
}

bool SuccessCriterion::satisfied(RunRecord const& r) const noexcept
{
    if (kind == Kind::MseMax) return r.mse <= threshold;
    return r.r2 && *r.r2 >= threshold;
}

std::vector<std::size_t> cumulative_success(std::vector<RunRecord> const& records, SuccessCriterion criterion,
                                            long max_ted)
{
    if (max_ted < 0) throw std::invalid_argument("cumulative_success: max_ted must be non-negative");
    std::vector<std::size_t> counts(static_cast<std::size_t>(max_ted) + 1, 0);
    for (auto const& r : records) {
        if (!criterion.satisfied(r) || r.ted > max_ted) continue;
        for (long k = std::max(r.ted, 0L); k <= max_ted; ++k) ++counts[static_cast<std::size_t>(k)];
    }
    return counts;
}

std::string method_label(std::string const& method, std::string const& init)
{
    std::size_t const rank = table_rank(method, init);
    if (rank < std::size(kTableOrder)) return kTableOrder[rank].label;
    return init == "random" ? method + " Random" : method;
}

std::vector<MethodSummary> summarize(std::vector<RunRecord> const& records)
{
    using Key = std::tuple<std::size_t, std::string, std::string>;
    struct Acc {
        std::size_t n = 0, nR2 = 0;
        double mse = 0, r2 = 0, ted = 0, time = 0, size = 0;
    };
    std::map<Key, Acc> groups;
    for (auto const& r : records) {
        auto& g = groups[{table_rank(r.method, r.init), r.method, r.init}];
        ++g.n;
        g.mse += r.mse;
        g.ted += static_cast<double>(r.ted);
        g.time += r.train_time_s;
        g.size += static_cast<double>(r.size);
        if (r.r2) {
            ++g.nR2;
            g.r2 += *r.r2;
        }
    }
    std::vector<MethodSummary> out;
    for (auto const& [key, g] : groups) {
        auto const& [rank, method, init] = key;
        MethodSummary s;
        s.method = method;
        s.init = init;
        s.label = method_label(method, init);
        s.count = g.n;
        double const n = static_cast<double>(g.n);
        s.mse = g.mse / n;
        s.ted = g.ted / n;
        s.train_time_s = g.time / n;
        s.size = g.size / n;
        if (g.nR2 > 0) s.r2 = g.r2 / static_cast<double>(g.nR2);
        s.r2_undefined = g.n - g.nR2;
        out.push_back(std::move(s));
    }
    return out;
}

double quantile(std::vector<double> values, double q)
{
    if (values.empty()) throw std::invalid_argument("quantile: empty input");
    std::sort(values.begin(), values.end());
    double const pos = q * static_cast<double>(values.size() - 1);
    auto const lo = static_cast<std::size_t>(std::floor(pos));
    auto const hi = std::min(lo + 1, values.size() - 1);
    double const frac = pos - static_cast<double>(lo);
    if (frac == 0.0) return values[lo];
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<bool> iqr_outliers(std::vector<double> const& values)
{
    std::vector<bool> flags(values.size(), false);
    if (values.size() < 4) return flags;
    std::vector<double> finite;
    for (double v : values)
        if (std::isfinite(v)) finite.push_back(v);
    if (finite.empty()) return flags;
    double const q1 = quantile(finite, 0.25), q3 = quantile(finite, 0.75);
    double const iqr = q3 - q1;
    double const lo = q1 - 1.5 * iqr, hi = q3 + 1.5 * iqr;
    for (std::size_t i = 0; i < values.size(); ++i) flags[i] = !(values[i] >= lo && values[i] <= hi);
    return flags;
}

} // namespace srlab
