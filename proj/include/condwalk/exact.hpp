#pragma once

// Exact computation for lattice walks killed on leaving [0, inf): the walk is
// carried as a sub-probability mass on x + span * Z and zeroed below 0 after
// every step.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include "condwalk/cdf.hpp"
#include "condwalk/increments.hpp"

namespace condwalk::exact {

struct ExactOptions {
    /// Largest number of lattice cells held at once.
    std::size_t max_cells = std::size_t{1} << 26;
    /// Masses below this are dropped after each step. Zero keeps results exact.
    double prune_threshold = 0.0;
};

/// P(x + S_n = position, tau_x > n) on the lattice x + span * (first_index + i).
struct KilledMass {
    double span = 1.0;
    double base = 0.0;
    long step = 0;
    std::int64_t first_index = 0;
    std::vector<double> masses;

    double position(std::size_t i) const {
        return base + static_cast<double>(first_index + static_cast<std::int64_t>(i)) * span;
    }
    /// P(tau_x > step).
    double total() const;
    /// E(x + S_n; tau_x > n).
    double expectation() const;
    /// Killed mass at positions <= level (lattice points within kBarrierEps * span included).
    double mass_at_or_below(double level) const;
};

/// Step-by-step killed evolution; reuses its buffers across steps.
class KilledEvolution {
public:
    KilledEvolution(const LatticeDistribution& dist, double x, ExactOptions opts = {});

    void step();
    void advance_to(long n);
    const KilledMass& state() const { return state_; }

private:
    const LatticeDistribution* dist_;
    ExactOptions opts_;
    std::int64_t min_index_;
    KilledMass state_;
    std::vector<double> scratch_;
};

KilledMass evolve_killed(const LatticeDistribution& dist, double x, long n, ExactOptions opts = {});

double exact_survival(const LatticeDistribution& dist, double x, long n, ExactOptions opts = {});

/// P((x + S_n) / (sigma sqrt n) <= u, tau_x > n).
double exact_joint_cdf(const LatticeDistribution& dist, double x, long n, double u, ExactOptions opts = {});

/// E(x + S_n; tau_x > n).
double killed_expectation(const LatticeDistribution& dist, double x, long n, ExactOptions opts = {});

/// Survival probabilities P(tau_x > k) for k = 1..n.
std::vector<double> survival_curve(const LatticeDistribution& dist, double x, long n, ExactOptions opts = {});

/// Lattice approximation of V(x) = -E S_{tau_x}.
///
/// V(x) = E(x + S_n; tau_x > n) + E(g(x + S_n); tau_x > n) where g(y) is the
/// expected undershoot below 0 from y >= 0. On the coset x + span * Z the
/// undershoot lies in [under_min, under_max], which brackets V(x) between
/// `lower` and `upper`. Both are monotone in n; for laws whose smallest step is
/// one lattice unit the bracket is degenerate and V is exact.
struct HarmonicEstimate {
    double x = 0.0;
    /// Certified lower bound for V(x); never below the killed expectation.
    double value = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double killed_expectation = 0.0;
    double survival = 0.0;
    long n_used = 0;
    /// Change of `value` over the last doubling.
    double last_increment = 0.0;
    /// upper - lower <= tol at n_used.
    bool converged = false;

    double gap() const { return upper - lower; }
};

HarmonicEstimate harmonic_V(const LatticeDistribution& dist, double x, double tol = 1e-10,
                            long n_max = long{1} << 14, ExactOptions opts = {});

struct RenewalEstimate {
    double value = 0.0;
    bool converged = false;
};

/// U(x) = V(x) / V(0).
RenewalEstimate renewal_U(const LatticeDistribution& dist, double x, double tol = 1e-10,
                          long n_max = long{1} << 14, ExactOptions opts = {});

/// Exhaustive path enumeration, independent of the mass propagation.
struct PathEnumeration {
    double survival = 0.0;
    /// Final lattice offset j (position x + j * span) -> probability, survivors only.
    std::map<std::int64_t, double> histogram;
};

PathEnumeration enumerate_paths_oracle(const LatticeDistribution& dist, double x, long n,
                                       double max_paths = 1e8);

/// P(tau_{base + j span} > n) for j = j_lo..j_hi by backward recursion over
/// the start point; one pass covers every start on the coset.
std::vector<double> survival_by_start(const LatticeDistribution& dist, double base, std::int64_t j_lo,
                                      std::int64_t j_hi, long n, ExactOptions opts = {});

/// Law of the unkilled S_n: P(S_n = (first_index + i) span).
struct FreeMass {
    std::int64_t first_index = 0;
    std::vector<double> masses;
};

FreeMass free_distribution(const LatticeDistribution& dist, long n, ExactOptions opts = {});

void write_killed_mass_csv(std::ostream& os, const KilledMass& km);
void write_survival_curve_csv(std::ostream& os, const std::vector<double>& survival);


/// Exact P((x + S_n) / (sigma sqrt n) <= u | tau_x > n) on a u grid.
/// Throws EmptyConditioningError when P(tau_x > n) = 0.
EmpiricalCdf exact_conditioned_cdf(const LatticeDistribution& dist, double x, long n,
                                   const std::vector<double>& u_grid, ExactOptions opts = {});

/// Same, from an already evolved killed mass.
EmpiricalCdf conditioned_cdf_from(const KilledMass& km, double sigma, const std::vector<double>& u_grid);

}  // namespace condwalk::exact
