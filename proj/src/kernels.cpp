#include "condwalk/kernels.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "condwalk/error.hpp"

namespace condwalk::kernels {
namespace {

void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite argument");
}

constexpr int kGaussPoints = 20;

struct GaussLegendre {
    std::array<double, kGaussPoints> node{};
    std::array<double, kGaussPoints> weight{};

    GaussLegendre() {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        constexpr int n = kGaussPoints;
        for (int i = 0; i < n; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = z;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (z * p1 - p0) / (z * z - 1.0);
                const double dz = p1 / dp;
                z -= dz;
                if (std::abs(dz) < 1e-16) break;
            }
            node[i] = z;
            weight[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        }
    }
};

const GaussLegendre& gauss() {
    static const GaussLegendre rule;
    return rule;
}

// (1 / h) * int_{c-h}^{c+h} phi(s) ds, an average-type quantity that stays
// well conditioned as h -> 0 (limit 2 phi(c)). Odd in h apart from the 1/h.
double window_average(double c, double h) {
    const double ah = std::abs(h);
    if (ah < 0.5 && 2.0 * ah * std::abs(c) <= 4.0) {
        const auto& gl = gauss();
        double sum = 0.0;
        for (int i = 0; i < kGaussPoints; ++i) sum += gl.weight[i] * std_normal_pdf(c + ah * gl.node[i]);
        return sum;
    }
    const double lo = c - ah;
    const double hi = c + ah;
    double mass = 0.0;
    if (lo >= 0.0) {
        mass = std_normal_sf(lo) - std_normal_sf(hi);
    } else if (hi <= 0.0) {
        mass = std_normal_cdf(hi) - std_normal_cdf(lo);
    } else {
        mass = 1.0 - std_normal_sf(hi) - std_normal_cdf(lo);
    }
    return mass / ah;
}

}  // namespace

double std_normal_pdf(double x) {
    require_finite(x, "std_normal_pdf");
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) {
    require_finite(x, "std_normal_cdf");
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double std_normal_sf(double x) {
    require_finite(x, "std_normal_sf");
    return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

double heat_H(double x) {
    require_finite(x, "heat_H");
    return std::erf(x / std::numbers::sqrt2);
}

double level_L(double x) {
    require_finite(x, "level_L");
    const double ax = std::abs(x);
    if (ax < 1e-2) {
        // sqrt(2/pi) * sum_k (-1)^k x^{2k} / ((2k + 1) 2^k k!)
        const double x2 = x * x;
        double term = 1.0;  // x^{2k} / (2^k k!) with sign
        double sum = 1.0;
        for (int k = 1; k < 20; ++k) {
            term *= -x2 / (2.0 * k);
            const double next = term / (2.0 * k + 1.0);
            sum += next;
            if (std::abs(next) < 1e-16) break;
        }
        return kLevelAtZero * sum;
    }
    return heat_H(ax) / ax;
}

double heat_kernel_psi(double x, double y) {
    require_finite(x, "heat_kernel_psi");
    require_finite(y, "heat_kernel_psi");
    const double xy = x * y;
    // phi(x-y) - phi(x+y) = phi(x+y) expm1(2xy) = -phi(x-y) expm1(-2xy);
    // pick the form whose exponential cannot overflow.
    if (xy >= 0.0) return -std_normal_pdf(x - y) * std::expm1(-2.0 * xy);
    return std_normal_pdf(x + y) * std::expm1(2.0 * xy);
}

double rayleigh_density(double y) {
    require_finite(y, "rayleigh_density");
    return y * std::exp(-0.5 * y * y);
}

double rayleigh_cdf(double u) {
    require_finite(u, "rayleigh_cdf");
    if (u <= 0.0) return 0.0;
    return -std::expm1(-0.5 * u * u);
}

double ell_H(double x, double y) {
    require_finite(x, "ell_H");
    require_finite(y, "ell_H");
    if (std::abs(x) < 1e-8) return rayleigh_density(y);
    return heat_kernel_psi(x, y) / heat_H(x);
}

double ell_h(double x, double y) {
    require_finite(x, "ell_h");
    require_finite(y, "ell_h");
    if (std::abs(x) < 1e-8) return level_L(x) * rayleigh_density(y);
    return heat_kernel_psi(x, y) / x;
}

double heat_kernel_mass(double x, double a, double b) {
    require_finite(x, "heat_kernel_mass");
    return x * ell_h_mass(x, a, b);
}

double ell_h_mass(double x, double a, double b) {
    require_finite(x, "ell_h_mass");
    if (std::isnan(a) || std::isnan(b)) throw DomainError("ell_h_mass: NaN window end");
    // int_a^b psi(x, y) dy = D(x, a) - D(x, b),  D(x, u) = Phi(u + x) - Phi(u - x);
    // an infinite end contributes nothing.
    const double da = std::isinf(a) ? 0.0 : window_average(a, x);
    const double db = std::isinf(b) ? 0.0 : window_average(b, x);
    return da - db;
}

double conditioned_limit_cdf(double t, double u) {
    require_finite(t, "conditioned_limit_cdf");
    require_finite(u, "conditioned_limit_cdf");
    if (t < 0.0) throw DomainError("conditioned_limit_cdf: t must be >= 0");
    if (u <= 0.0) return 0.0;
    if (t == 0.0) return rayleigh_cdf(u);
    // 1 + (Phi(u - t) - Phi(u + t)) / H(t), both ratios taken per unit t.
    const double value = 1.0 - window_average(u, t) / level_L(t);
    return value < 0.0 ? 0.0 : value;
}

double main_term(double v_x, double x, double sigma, long n) {
    require_finite(v_x, "main_term");
    require_finite(x, "main_term");
    require_finite(sigma, "main_term");
    if (v_x < 0.0) throw DomainError("main_term: V(x) must be >= 0");
    if (!(sigma > 0.0)) throw DomainError("main_term: sigma must be > 0");
    if (n < 1) throw DomainError("main_term: n must be >= 1");
    const double scale = sigma * std::sqrt(static_cast<double>(n));
    return v_x * level_L(x / scale) / scale;
}

std::string_view to_string(RemainderVariant v) {
    return v == RemainderVariant::General ? "general" : "delta-ge-one";
}

RemainderVariant parse_remainder_variant(std::string_view s) {
    if (s == "general") return RemainderVariant::General;
    if (s == "delta-ge-one") return RemainderVariant::DeltaGeOne;
    throw ConfigError("unknown remainder variant '" + std::string(s) + "' (expected general|delta-ge-one)");
}

void RemainderSpec::validate() const {
    if (!std::isfinite(delta) || !(delta > 0.0)) throw ConfigError("remainder: delta must be a finite value > 0");
    if (variant == RemainderVariant::DeltaGeOne && delta < 1.0)
        throw ConfigError("remainder: the delta-ge-one variant requires delta >= 1");
}

double remainder_shape(const RemainderSpec& spec, double v_x, double x, double sigma, long n) {
    spec.validate();
    if (n < 2) throw DomainError("remainder_shape: n must be >= 2");
    require_finite(v_x, "remainder_shape");
    require_finite(x, "remainder_shape");
    if (!(sigma > 0.0)) throw DomainError("remainder_shape: sigma must be > 0");
    const double nd = static_cast<double>(n);
    const double scale = sigma * std::sqrt(nd);
    const double exponent =
        spec.variant == RemainderVariant::General ? spec.delta / (4.0 * (3.0 + spec.delta)) : 0.25;
    return std::pow(nd, -spec.delta / 4.0) + v_x * level_L(x / scale) * std::pow(nd, -exponent) * std::log(nd);
}

}  // namespace condwalk::kernels
