#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace condwalk {

/// CDF of (x + S_n) / (sigma sqrt n) on {tau_x > n}, tabulated on a u grid.
/// Values are P(. <= u | tau_x > n) (left-closed convention).
struct EmpiricalCdf {
    std::vector<double> u;
    std::vector<double> value;
    /// Scaled start t = x / (sigma sqrt n).
    double t = 0.0;
    bool exact = false;
    /// Number of conditioning samples (survivors); 0 for exact tables.
    std::int64_t effective_trials = 0;

    /// max_k |value[k] - reference(u[k])|.
    double sup_gap(const std::function<double(double)>& reference) const;
};

/// Throws DomainError unless the grid is nonempty, finite, nonnegative and strictly increasing.
void validate_u_grid(const std::vector<double>& u);

void write_cdf_csv(std::ostream& os, const EmpiricalCdf& cdf);

}  // namespace condwalk
