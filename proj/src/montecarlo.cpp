#include "condwalk/montecarlo.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "condwalk/parallel.hpp"

namespace condwalk::mc {
namespace {

constexpr std::int64_t kBlock = 1024;

struct Block {
    std::int64_t begin;
    std::int64_t end;
};

std::vector<Block> blocks_for(std::int64_t trials) {
    std::vector<Block> out;
    for (std::int64_t b = 0; b < trials; b += kBlock) out.push_back({b, std::min(trials, b + kBlock)});
    return out;
}

void require_trials(std::int64_t trials, std::int64_t min_trials) {
    if (trials < min_trials) throw DomainError("trials must be >= " + std::to_string(min_trials));
}

}  // namespace

ExitRecord simulate_exit(const LatticeDistribution& dist, double x, long horizon, RandomStream& stream) {
    if (horizon < 1) throw DomainError("simulate_exit: horizon must be >= 1");
    const std::int64_t k0 = min_surviving_index(x, dist.span());
    ExitRecord rec;
    std::int64_t k = 0;
    std::int64_t max_abs = 0;
    for (long step = 1; step <= horizon; ++step) {
        const std::int64_t a = dist.sample_offset(stream);
        k += a;
        max_abs = std::max(max_abs, a < 0 ? -a : a);
        if (k < k0) {
            rec.exited = true;
            rec.exit_step = step;
            break;
        }
    }
    rec.final_offset = k;
    rec.final_position = x + static_cast<double>(k) * dist.span();
    rec.path_max_abs_increment = static_cast<double>(max_abs) * dist.span();
    return rec;
}

nlohmann::json EstimateWithCI::to_json() const {
    return {{"point", point},   {"half_width", half_width},
            {"lower", lower},   {"upper", upper},
            {"trials", trials}, {"effective_trials", effective_trials},
            {"seed", seed}};
}

double normal_quantile_two_sided(double level) {
    if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
    return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

EstimateWithCI wilson_interval(std::int64_t successes, std::int64_t trials, double level) {
    if (trials <= 0) throw DomainError("wilson_interval: trials must be > 0");
    const double z = normal_quantile_two_sided(level);
    const double nn = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / nn;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / nn;
    const double center = (p + z2 / (2.0 * nn)) / denom;
    const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
    EstimateWithCI e;
    e.point = p;
    e.lower = std::max(0.0, center - half);
    e.upper = std::min(1.0, center + half);
    e.half_width = 0.5 * (e.upper - e.lower);
    e.trials = trials;
    return e;
}

EstimateWithCI estimate_survival(const LatticeDistribution& dist, double x, long n, std::int64_t trials,
                                 std::uint64_t seed, McOptions opts) {
    require_trials(trials, 100);
    const auto blocks = blocks_for(trials);
    std::vector<std::int64_t> alive(blocks.size(), 0);
    parallel_for(blocks.size(), opts.workers, [&](std::size_t b) {
        std::int64_t count = 0;
        for (std::int64_t i = blocks[b].begin; i < blocks[b].end; ++i) {
            RandomStream stream(seed, static_cast<std::uint64_t>(i));
            if (!simulate_exit(dist, x, n, stream).exited) ++count;
        }
        alive[b] = count;
    });
    std::int64_t survivors = 0;
    for (auto c : alive) survivors += c;
    auto e = wilson_interval(survivors, trials, opts.level);
    e.effective_trials = trials;
    e.seed = seed;
    return e;
}

ConditionedCdfEstimate estimate_conditioned_cdf(const LatticeDistribution& dist, double x, long n,
                                                const std::vector<double>& u_grid, std::int64_t trials,
                                                std::uint64_t seed, McOptions opts) {
    validate_u_grid(u_grid);
    require_trials(trials, 1);
    if (n < 1) throw DomainError("estimate_conditioned_cdf: n must be >= 1");
    const double scale = dist.sigma() * std::sqrt(static_cast<double>(n));
    const double slack = kBarrierEps * dist.span() / scale;
    const auto blocks = blocks_for(trials);
    // bins[b][k]: survivors whose first grid point at or above the value is k;
    // the extra last bin holds survivors above the whole grid.
    std::vector<std::vector<std::int64_t>> bins(blocks.size(), std::vector<std::int64_t>(u_grid.size() + 1, 0));
    parallel_for(blocks.size(), opts.workers, [&](std::size_t b) {
        auto& local = bins[b];
        for (std::int64_t i = blocks[b].begin; i < blocks[b].end; ++i) {
            RandomStream stream(seed, static_cast<std::uint64_t>(i));
            const auto rec = simulate_exit(dist, x, n, stream);
            if (rec.exited) continue;
            const double value = rec.final_position / scale - slack;
            const auto k = std::lower_bound(u_grid.begin(), u_grid.end(), value) - u_grid.begin();
            ++local[static_cast<std::size_t>(k)];
        }
    });
    std::vector<std::int64_t> counts(u_grid.size() + 1, 0);
    for (const auto& local : bins)
        for (std::size_t k = 0; k < local.size(); ++k) counts[k] += local[k];
    std::int64_t survivors = 0;
    for (auto c : counts) survivors += c;
    if (survivors == 0) throw EmptyConditioningError("no trial survived to step " + std::to_string(n));

    ConditionedCdfEstimate out;
    out.cdf.u = u_grid;
    out.cdf.t = x / scale;
    out.cdf.exact = false;
    out.cdf.effective_trials = survivors;
    std::int64_t acc = 0;
    for (std::size_t k = 0; k < u_grid.size(); ++k) {
        acc += counts[k];
        out.cdf.value.push_back(static_cast<double>(acc) / static_cast<double>(survivors));
    }
    out.survival = wilson_interval(survivors, trials, opts.level);
    out.survival.effective_trials = survivors;
    out.survival.seed = seed;
    return out;
}

HarmonicMcEstimate estimate_V_mc(const LatticeDistribution& dist, double x, long horizon, std::int64_t trials,
                                 std::uint64_t seed, McOptions opts) {
    require_trials(trials, 2);
    struct Partial {
        std::int64_t exited = 0;
        std::int64_t sum = 0;     // sum of exit offsets j (S_tau = j * span)
        long double sum_sq = 0;  // exact for |j| < 2^32 and block sizes in use
    };
    const auto blocks = blocks_for(trials);
    std::vector<Partial> parts(blocks.size());
    parallel_for(blocks.size(), opts.workers, [&](std::size_t b) {
        Partial p;
        for (std::int64_t i = blocks[b].begin; i < blocks[b].end; ++i) {
            RandomStream stream(seed, static_cast<std::uint64_t>(i));
            const auto rec = simulate_exit(dist, x, horizon, stream);
            if (!rec.exited) continue;
            ++p.exited;
            p.sum += rec.final_offset;
            p.sum_sq += static_cast<long double>(rec.final_offset) * static_cast<long double>(rec.final_offset);
        }
        parts[b] = p;
    });
    Partial total;
    for (const auto& p : parts) {
        total.exited += p.exited;
        total.sum += p.sum;
        total.sum_sq += p.sum_sq;
    }
    HarmonicMcEstimate out;
    out.unfinished_fraction = static_cast<double>(trials - total.exited) / static_cast<double>(trials);
    auto& e = out.estimate;
    e.trials = trials;
    e.effective_trials = total.exited;
    e.seed = seed;
    if (total.exited == 0) {
        e.point = e.lower = e.upper = std::nan("");
        e.half_width = std::nan("");
        return out;
    }
    const double h = dist.span();
    const double m = static_cast<double>(total.exited);
    const double mean_j = static_cast<double>(total.sum) / m;
    e.point = -h * mean_j;
    double var = 0.0;
    if (total.exited > 1) {
        const long double s = static_cast<long double>(total.sum);
        const long double ss = total.sum_sq - s * s / static_cast<long double>(total.exited);
        var = std::max(0.0, static_cast<double>(ss) / (m - 1.0)) * h * h;
    }
    e.half_width = normal_quantile_two_sided(opts.level) * std::sqrt(var / m);
    e.lower = e.point - e.half_width;
    e.upper = e.point + e.half_width;
    return out;
}

}  // namespace condwalk::mc
