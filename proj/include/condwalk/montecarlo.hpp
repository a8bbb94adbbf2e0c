#pragma once

// Monte Carlo estimation for killed walks. Trial i always draws from
// RandomStream(seed, i) and all per-trial accumulators are integers, so every
// estimate is identical for any number of workers.

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "condwalk/cdf.hpp"
#include "condwalk/increments.hpp"
#include "condwalk/random.hpp"

namespace condwalk::mc {

struct ExitRecord {
    bool exited = false;
    std::optional<long> exit_step;
    /// x + S_n when the walk survived the horizon, x + S_{tau_x} otherwise.
    double final_position = 0.0;
    /// Lattice offset j of the final position x + j * span.
    std::int64_t final_offset = 0;
    double path_max_abs_increment = 0.0;
};

/// Walks until the first position < 0 or until `horizon` steps.
ExitRecord simulate_exit(const LatticeDistribution& dist, double x, long horizon, RandomStream& stream);

struct EstimateWithCI {
    double point = 0.0;
    double half_width = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::int64_t trials = 0;
    std::int64_t effective_trials = 0;
    std::uint64_t seed = 0;

    bool covers(double value) const { return lower <= value && value <= upper; }
    nlohmann::json to_json() const;
};

struct McOptions {
    unsigned workers = 1;
    /// Two-sided confidence level.
    double level = 0.99;
};

/// Two-sided standard normal quantile for the given confidence level.
double normal_quantile_two_sided(double level);

/// Wilson score interval around successes / trials; point is the raw proportion.
EstimateWithCI wilson_interval(std::int64_t successes, std::int64_t trials, double level);

EstimateWithCI estimate_survival(const LatticeDistribution& dist, double x, long n, std::int64_t trials,
                                 std::uint64_t seed, McOptions opts = {});

struct ConditionedCdfEstimate {
    EmpiricalCdf cdf;
    /// Survival proportion; effective_trials = number of survivors.
    EstimateWithCI survival;
};

/// Throws EmptyConditioningError when no trial survives.
ConditionedCdfEstimate estimate_conditioned_cdf(const LatticeDistribution& dist, double x, long n,
                                                const std::vector<double>& u_grid, std::int64_t trials,
                                                std::uint64_t seed, McOptions opts = {});

struct HarmonicMcEstimate {
    /// Mean of -S_{tau_x} over trials that exited within the horizon.
    EstimateWithCI estimate;
    /// Fraction of trials still alive at the horizon; the estimate ignores them.
    double unfinished_fraction = 0.0;
};

HarmonicMcEstimate estimate_V_mc(const LatticeDistribution& dist, double x, long horizon, std::int64_t trials,
                                 std::uint64_t seed, McOptions opts = {});

}  // namespace condwalk::mc
