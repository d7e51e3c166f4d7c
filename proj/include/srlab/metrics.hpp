#ifndef SRLAB_METRICS_HPP
#define SRLAB_METRICS_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "srlab/record.hpp"

namespace srlab {

// Both throw std::invalid_argument on empty or mismatched input.
double mse(Eigen::ArrayXd const& y, Eigen::ArrayXd const& yhat);
// Empty when y is constant.
std::optional<double> r2(Eigen::ArrayXd const& y, Eigen::ArrayXd const& yhat);

struct CorrelationResult {
    double r = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

// Sample Pearson r with a two-sided p-value from Student's t on n-2 degrees of
// freedom. Empty when n < 3 or either input is constant.
std::optional<CorrelationResult> pearson(std::vector<double> const& a, std::vector<double> const& b);

// I_x(a, b) by continued fraction.
double regularized_incomplete_beta(double a, double b, double x);
// P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided(double t, double df);

struct SuccessCriterion {
    enum class Kind { MseMax, R2Min };
    Kind kind = Kind::MseMax;
    double threshold = 1e-6;

    static SuccessCriterion mse_max(double t = 1e-6) { return {Kind::MseMax, t}; }
    static SuccessCriterion r2_min(double t = 0.99) { return {Kind::R2Min, t}; }
    bool satisfied(RunRecord const& r) const noexcept;
};

// count[k] = records meeting the criterion with TED <= k, for k in [0, max_ted].
std::vector<std::size_t> cumulative_success(std::vector<RunRecord> const& records, SuccessCriterion criterion,
                                            long max_ted = 10);

struct MethodSummary {
    std::string method;
    std::string init;
    std::string label; // table label, e.g. "Nelder-Mead Random"
    std::size_t count = 0;
    double mse = 0.0;
    std::optional<double> r2; // mean over defined values
    std::size_t r2_undefined = 0;
    double ted = 0.0;
    double train_time_s = 0.0;
    double size = 0.0;
};

std::string method_label(std::string const& method, std::string const& init);
// Means grouped by (method, init). Known methods come first in the fixed table
// order; any others follow alphabetically.
std::vector<MethodSummary> summarize(std::vector<RunRecord> const& records);

// 1.5*IQR fences with linearly interpolated quartiles.
std::vector<bool> iqr_outliers(std::vector<double> const& values);
// Linear interpolation between order statistics, q in [0, 1].
double quantile(std::vector<double> values, double q);

} // namespace srlab

#endif
