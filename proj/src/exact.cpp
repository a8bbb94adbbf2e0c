#include "condwalk/exact.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "condwalk/format.hpp"

namespace condwalk::exact {
namespace {

void require_cells(std::size_t cells, const ExactOptions& opts) {
    if (cells > opts.max_cells)
        throw ResourceError("lattice grid of " + std::to_string(cells) + " cells exceeds the cap of " +
                            std::to_string(opts.max_cells));
}

void require_steps(long n, long min_n, const char* what) {
    if (n < min_n) throw DomainError(std::string(what) + ": n must be >= " + std::to_string(min_n));
}

}  // namespace

double KilledMass::total() const { return std::accumulate(masses.begin(), masses.end(), 0.0); }

double KilledMass::expectation() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < masses.size(); ++i) sum += position(i) * masses[i];
    return sum;
}

double KilledMass::mass_at_or_below(double level) const {
    const double cut = level + kBarrierEps * span;
    double sum = 0.0;
    for (std::size_t i = 0; i < masses.size() && position(i) <= cut; ++i) sum += masses[i];
    return sum;
}

KilledEvolution::KilledEvolution(const LatticeDistribution& dist, double x, ExactOptions opts)
    : dist_(&dist), opts_(opts), min_index_(min_surviving_index(x, dist.span())) {
    if (!std::isfinite(x)) throw DomainError("killed evolution: non-finite start");
    state_.span = dist.span();
    state_.base = x;
    state_.step = 0;
    state_.first_index = 0;
    state_.masses = {1.0};
}

void KilledEvolution::step() {
    auto& s = state_;
    ++s.step;
    if (s.masses.empty()) return;

    const std::int64_t lo = std::max(s.first_index + dist_->min_offset(), min_index_);
    const std::int64_t hi = s.first_index + static_cast<std::int64_t>(s.masses.size()) - 1 + dist_->max_offset();
    if (hi < lo) {
        s.masses.clear();
        s.first_index = min_index_;
        return;
    }
    const auto cells = static_cast<std::size_t>(hi - lo + 1);
    require_cells(cells, opts_);
    scratch_.assign(cells, 0.0);

    const auto len = static_cast<std::int64_t>(s.masses.size());
    for (const auto& atom : dist_->atoms()) {
        // target index = first + i + offset - lo; keep i where target >= 0
        const std::int64_t shift = s.first_index + atom.offset - lo;
        const std::int64_t i0 = std::max<std::int64_t>(0, -shift);
        const double p = atom.prob;
        const double* src = s.masses.data();
        double* dst = scratch_.data();
        for (std::int64_t i = i0; i < len; ++i) dst[i + shift] += p * src[i];
    }

    if (opts_.prune_threshold > 0.0) {
        for (auto& m : scratch_)
            if (m < opts_.prune_threshold) m = 0.0;
        const auto first_nz = std::find_if(scratch_.begin(), scratch_.end(), [](double m) { return m != 0.0; });
        if (first_nz == scratch_.end()) {
            s.masses.clear();
            s.first_index = min_index_;
            return;
        }
        const auto last_nz = std::find_if(scratch_.rbegin(), scratch_.rend(), [](double m) { return m != 0.0; });
        const auto skip = first_nz - scratch_.begin();
        s.masses.assign(first_nz, last_nz.base());
        s.first_index = lo + skip;
        return;
    }
    s.masses.swap(scratch_);
    s.first_index = lo;
}

void KilledEvolution::advance_to(long n) {
    while (state_.step < n) step();
}

KilledMass evolve_killed(const LatticeDistribution& dist, double x, long n, ExactOptions opts) {
    require_steps(n, 0, "evolve_killed");
    KilledEvolution evo(dist, x, opts);
    evo.advance_to(n);
    return evo.state();
}

double exact_survival(const LatticeDistribution& dist, double x, long n, ExactOptions opts) {
    require_steps(n, 1, "exact_survival");
    return evolve_killed(dist, x, n, opts).total();
}

double exact_joint_cdf(const LatticeDistribution& dist, double x, long n, double u, ExactOptions opts) {
    require_steps(n, 1, "exact_joint_cdf");
    if (std::isnan(u)) throw DomainError("exact_joint_cdf: u is NaN");
    if (u < 0.0) return 0.0;
    const auto km = evolve_killed(dist, x, n, opts);
    if (std::isinf(u)) return km.total();
    return km.mass_at_or_below(u * dist.sigma() * std::sqrt(static_cast<double>(n)));
}

double killed_expectation(const LatticeDistribution& dist, double x, long n, ExactOptions opts) {
    require_steps(n, 1, "killed_expectation");
    return evolve_killed(dist, x, n, opts).expectation();
}

std::vector<double> survival_curve(const LatticeDistribution& dist, double x, long n, ExactOptions opts) {
    require_steps(n, 1, "survival_curve");
    KilledEvolution evo(dist, x, opts);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (long k = 1; k <= n; ++k) {
        evo.step();
        out.push_back(evo.state().total());
    }
    return out;
}

HarmonicEstimate harmonic_V(const LatticeDistribution& dist, double x, double tol, long n_max,
                            ExactOptions opts) {
    if (!(tol > 0.0)) throw DomainError("harmonic_V: tol must be > 0");
    if (n_max < 4) throw DomainError("harmonic_V: n_max must be >= 4");

    // Exits from y >= 0 land on coset indices [k0 + min_offset, k0 - 1].
    const double h = dist.span();
    const std::int64_t k0 = min_surviving_index(x, h);
    const double under_min = -(x + static_cast<double>(k0 - 1) * h);
    const double under_max = -(x + static_cast<double>(k0 + dist.min_offset()) * h);

    HarmonicEstimate est;
    est.x = x;
    KilledEvolution evo(dist, x, opts);
    bool first = true;
    for (long n = 4; n <= n_max; n *= 2) {
        evo.advance_to(n);
        const auto& km = evo.state();
        const double e = km.expectation();
        const double p = km.total();
        const double lower = e + p * under_min;
        const double upper = e + p * under_max;
        est.last_increment = first ? lower : lower - est.lower;
        first = false;
        est.killed_expectation = e;
        est.survival = p;
        est.lower = lower;
        est.upper = upper;
        est.value = lower;
        est.n_used = n;
        est.converged = (upper - lower) <= tol;
        if (est.converged) break;
    }
    return est;
}

RenewalEstimate renewal_U(const LatticeDistribution& dist, double x, double tol, long n_max, ExactOptions opts) {
    const auto vx = harmonic_V(dist, x, tol, n_max, opts);
    const auto v0 = harmonic_V(dist, 0.0, tol, n_max, opts);
    if (!(v0.value > 0.0)) throw DomainError("renewal_U: V(0) estimate is not positive");
    return {vx.value / v0.value, vx.converged && v0.converged};
}

namespace {

struct Enumerator {
    const LatticeDistribution& dist;
    std::int64_t min_index;
    long n;
    long double survival = 0.0L;
    std::map<std::int64_t, long double> hist;

    void walk(long depth, std::int64_t index, long double prob) {
        if (depth == n) {
            survival += prob;
            hist[index] += prob;
            return;
        }
        for (const auto& a : dist.atoms()) {
            const std::int64_t next = index + a.offset;
            if (next < min_index) continue;  // this path and all its extensions are killed
            walk(depth + 1, next, prob * static_cast<long double>(a.prob));
        }
    }
};

}  // namespace

PathEnumeration enumerate_paths_oracle(const LatticeDistribution& dist, double x, long n, double max_paths) {
    require_steps(n, 0, "enumerate_paths_oracle");
    const double paths = std::pow(static_cast<double>(dist.atoms().size()), static_cast<double>(n));
    if (paths > max_paths)
        throw ResourceError("enumeration of " + format_double(paths) + " paths exceeds the cap of " +
                            format_double(max_paths));
    PathEnumeration out;
    if (n == 0) {
        out.survival = 1.0;
        out.histogram[0] = 1.0;
        return out;
    }
    Enumerator en{dist, min_surviving_index(x, dist.span()), n, 0.0L, {}};
    en.walk(0, 0, 1.0L);
    out.survival = static_cast<double>(en.survival);
    for (const auto& [j, p] : en.hist) out.histogram[j] = static_cast<double>(p);
    return out;
}

std::vector<double> survival_by_start(const LatticeDistribution& dist, double base, std::int64_t j_lo,
                                      std::int64_t j_hi, long n, ExactOptions opts) {
    require_steps(n, 1, "survival_by_start");
    if (j_hi < j_lo) throw DomainError("survival_by_start: empty start range");

    const std::int64_t k0 = min_surviving_index(base, dist.span());
    const std::int64_t down = -dist.min_offset();
    // q_m(k) = 1 whenever k >= k0 + m * down, so indices above `top` are saturated.
    const std::int64_t top = std::max(j_hi, k0) + static_cast<std::int64_t>(n) * down;
    const auto cells = static_cast<std::size_t>(top - k0 + 1);
    require_cells(cells, opts);

    std::vector<double> q(cells, 1.0), next(cells, 0.0);
    auto value = [&](const std::vector<double>& v, std::int64_t k) {
        if (k < k0) return 0.0;
        if (k > top) return 1.0;
        return v[static_cast<std::size_t>(k - k0)];
    };
    for (long m = 1; m < n; ++m) {
        for (std::int64_t k = k0; k <= top; ++k) {
            double s = 0.0;
            for (const auto& a : dist.atoms()) s += a.prob * value(q, k + a.offset);
            next[static_cast<std::size_t>(k - k0)] = s;
        }
        q.swap(next);
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(j_hi - j_lo + 1));
    for (std::int64_t j = j_lo; j <= j_hi; ++j) {
        double s = 0.0;
        for (const auto& a : dist.atoms()) s += a.prob * value(q, j + a.offset);
        out.push_back(s);
    }
    return out;
}

FreeMass free_distribution(const LatticeDistribution& dist, long n, ExactOptions opts) {
    require_steps(n, 0, "free_distribution");
    const std::int64_t width = dist.max_offset() - dist.min_offset();
    require_cells(static_cast<std::size_t>(width * n + 1), opts);
    FreeMass fm;
    fm.first_index = 0;
    fm.masses = {1.0};
    for (long k = 0; k < n; ++k) {
        std::vector<double> out(fm.masses.size() + static_cast<std::size_t>(width), 0.0);
        for (const auto& a : dist.atoms()) {
            const auto shift = static_cast<std::size_t>(a.offset - dist.min_offset());
            for (std::size_t i = 0; i < fm.masses.size(); ++i) out[i + shift] += a.prob * fm.masses[i];
        }
        fm.masses.swap(out);
        fm.first_index += dist.min_offset();
    }
    return fm;
}

void write_killed_mass_csv(std::ostream& os, const KilledMass& km) {
    os << "position,mass\n";
    for (std::size_t i = 0; i < km.masses.size(); ++i)
        os << format_double(km.position(i)) << ',' << format_double(km.masses[i]) << '\n';
}

void write_survival_curve_csv(std::ostream& os, const std::vector<double>& survival) {
    os << "n,survival\n";
    for (std::size_t k = 0; k < survival.size(); ++k) os << (k + 1) << ',' << format_double(survival[k]) << '\n';
}

}  // namespace condwalk::exact

namespace condwalk::exact {

EmpiricalCdf conditioned_cdf_from(const KilledMass& km, double sigma, const std::vector<double>& u_grid) {
    validate_u_grid(u_grid);
    const double total = km.total();
    if (!(total > 0.0)) throw EmptyConditioningError("conditioned CDF: survival probability is 0");
    const double scale = sigma * std::sqrt(static_cast<double>(km.step));
    EmpiricalCdf cdf;
    cdf.exact = true;
    cdf.t = km.base / scale;
    cdf.u = u_grid;
    cdf.value.reserve(u_grid.size());
    // single sweep: grid and lattice positions are both increasing
    double acc = 0.0;
    std::size_t i = 0;
    for (double u : u_grid) {
        const double cut = u * scale + kBarrierEps * km.span;
        while (i < km.masses.size() && km.position(i) <= cut) acc += km.masses[i++];
        cdf.value.push_back(std::min(1.0, acc / total));
    }
    return cdf;
}

EmpiricalCdf exact_conditioned_cdf(const LatticeDistribution& dist, double x, long n,
                                   const std::vector<double>& u_grid, ExactOptions opts) {
    require_steps(n, 1, "exact_conditioned_cdf");
    return conditioned_cdf_from(evolve_killed(dist, x, n, opts), dist.sigma(), u_grid);
}

}  // namespace condwalk::exact
