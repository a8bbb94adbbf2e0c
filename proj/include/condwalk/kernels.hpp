#pragma once

// Closed-form Gaussian and heat-kernel functions used by the persistence and
// conditioned-limit approximations. All functions are pure and reject
// non-finite arguments with DomainError.

#include <string_view>

namespace condwalk::kernels {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
/// L(0) = 2 / sqrt(2 pi).
inline constexpr double kLevelAtZero = 0.797884560802865355879892119869;

double std_normal_pdf(double x);
double std_normal_cdf(double x);
/// Upper tail 1 - Phi(x), accurate for large positive x.
double std_normal_sf(double x);

/// H(x) = 2 Phi(x) - 1, evaluated as erf(x / sqrt 2).
double heat_H(double x);

/// L(x) = H(x) / x, continuously extended by L(0) = 2 / sqrt(2 pi).
double level_L(double x);

/// Dirichlet heat kernel psi(x, y) = phi(x - y) - phi(x + y).
double heat_kernel_psi(double x, double y);

/// phi+(y) = y exp(-y^2 / 2); the Rayleigh density on y >= 0.
double rayleigh_density(double y);
/// Rayleigh distribution function; 0 for u <= 0.
double rayleigh_cdf(double u);

/// psi(x, y) / H(x), with the Rayleigh density at x = 0.
double ell_H(double x, double y);
/// psi(x, y) / x, with L(0) phi+(y) at x = 0.
double ell_h(double x, double y);

/// Integral of psi(x, .) over [a, b]; either end may be infinite.
double heat_kernel_mass(double x, double a, double b);
/// Integral of ell_h(x, .) over [a, b]; continuous in x through x = 0.
double ell_h_mass(double x, double a, double b);

/// Conditioned limit law  u -> int_0^u ell_H(t, y) dy  for a scaled start t >= 0.
double conditioned_limit_cdf(double t, double u);

/// V L(x / (sigma sqrt n)) / (sigma sqrt n).
double main_term(double v_x, double x, double sigma, long n);

enum class RemainderVariant { General, DeltaGeOne };

std::string_view to_string(RemainderVariant v);
RemainderVariant parse_remainder_variant(std::string_view s);

struct RemainderSpec {
    double delta = 1.0;
    RemainderVariant variant = RemainderVariant::General;

    /// Throws ConfigError unless delta > 0, and delta >= 1 for DeltaGeOne.
    void validate() const;
};

/// Shape of the persistence remainder:
///   n^{-delta/4} + V L(x / (sigma sqrt n)) n^{-e} log n,
/// with e = delta / (4 (3 + delta)) for General and e = 1/4 for DeltaGeOne.
double remainder_shape(const RemainderSpec& spec, double v_x, double x, double sigma, long n);

}  // namespace condwalk::kernels
