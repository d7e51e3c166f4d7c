#ifndef SRLAB_RECORD_HPP
#define SRLAB_RECORD_HPP

#include <cstdint>
#include <optional>
#include <string>

namespace srlab {

// Outcome of one (problem, variant, method, init, seed) cell.
struct RunRecord {
    std::string run_id;
    std::string problem;
    std::string variant; // "standard" | "specific"
    std::string method;  // optimizer kind name, e.g. "bfgs"
    std::string init;    // "current" | "random"
    std::uint64_t seed = 0;
    double mse = 0.0;
    std::optional<double> r2; // empty when the target is constant
    long ted = 0;
    long size = 0;
    double train_time_s = 0.0;
    std::string expr_raw;
    std::string expr_canonical;

    friend bool operator==(RunRecord const&, RunRecord const&) = default;
};

} // namespace srlab

#endif
