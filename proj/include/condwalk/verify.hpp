#pragma once

// Audits comparing exact or simulated truth for killed walks against the
// Brownian main terms, plus the analytic inequality suite.
//
// Unknown constants are never invented: suites assert monotone trends and
// constant-free inequalities, and report fitted constants everywhere else.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "condwalk/exact.hpp"
#include "condwalk/increments.hpp"
#include "condwalk/kernels.hpp"

namespace condwalk::verify {

enum class Method { Exact, MC };

std::string_view to_string(Method m);
/// "exact" | "mc"; throws ConfigError otherwise.
Method parse_method(std::string_view s);

/// A start point: either an absolute x, or t * sigma * sqrt(n) resolved per n.
struct XPoint {
    double value = 0.0;
    bool scaled = false;

    double resolve(double sigma, long n) const;
    /// "5" or "t0.5".
    std::string token() const;
    bool operator==(const XPoint&) const = default;
};

/// Parses "5", "-1.5" or "t0.5".
XPoint parse_x_point(std::string_view token);

std::vector<XPoint> default_x_grid();
std::vector<long> default_n_grid();
/// 81 points on [0, 4].
std::vector<double> default_u_grid();

struct AuditOptions {
    Method method = Method::Exact;
    std::int64_t trials = 100000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    double level = 0.99;
    double harmonic_tol = 1e-10;
    long harmonic_n_max = 1L << 14;
    exact::ExactOptions exact;
};

/// Flagging tolerance for |ratio - 1| at horizon n: 3 / sqrt(n).
double ratio_tolerance(long n);

struct VerificationRow {
    XPoint point;
    double x = 0.0;
    long n = 0;
    double truth = 0.0;
    /// 0 for exact truth.
    double truth_half_width = 0.0;
    double V = 0.0;
    /// Certified width of the V bracket.
    double V_gap = 0.0;
    double main = 0.0;
    double abs_err = 0.0;
    std::optional<double> ratio;
    double remainder = 0.0;
    /// abs_err * sigma sqrt(n) / remainder.
    double normalized_err = 0.0;
    std::string source;
    /// V(x) = 0: both sides vanish.
    bool degenerate = false;
    bool flagged = false;
};

/// A named assertion (or report-only diagnostic) in a suite.
struct Check {
    std::string name;
    bool asserted = true;
    bool pass = true;
    /// Measured statistic and the bound it is held to.
    double value = 0.0;
    double bound = 0.0;
    /// Amount by which the bound is exceeded, 0 when passing.
    double violation = 0.0;
    std::string detail;
};

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t used = 0;
    std::vector<std::string> warnings;
};

/// Least squares of log err on log n. Nonpositive or non-finite errors are
/// dropped with a warning; fewer than 3 remaining points throw FitError.
RateFit fit_rate(const std::vector<std::pair<double, double>>& series);

struct SuiteReport {
    std::string suite;
    std::vector<Check> checks;
    nlohmann::json fitted_constants = nlohmann::json::object();
    nlohmann::json rows = nlohmann::json::array();

    /// All asserted checks pass.
    bool pass() const;
    double max_violation() const;
    /// First failing asserted check, if any.
    const Check* first_violation() const;
    nlohmann::json to_json() const;
};

struct PersistenceAudit {
    std::vector<VerificationRow> rows;
    /// Min/max of truth/main over non-degenerate rows: proxies for the two-sided bound constants.
    double bound_min = 0.0;
    double bound_max = 0.0;
    /// (n, sup over the grid of |ratio - 1|), in increasing n.
    std::vector<std::pair<long, double>> uniform_stat;
    SuiteReport report;
};

PersistenceAudit audit_persistence(const LatticeDistribution& dist, const std::vector<XPoint>& x_grid,
                                   const std::vector<long>& n_grid, const kernels::RemainderSpec& spec,
                                   const AuditOptions& opts = {});

struct CdfAuditRow {
    XPoint point;
    double x = 0.0;
    long n = 0;
    double t = 0.0;
    double u = 0.0;
    double truth_cdf = 0.0;
    double limit_cdf = 0.0;
};

struct CdfAuditSummary {
    XPoint point;
    double x = 0.0;
    long n = 0;
    double t = 0.0;
    double survival = 0.0;
    /// max over the u grid of |truth - limit|.
    double sup_gap = 0.0;
    /// Kolmogorov distance over all atoms (exact method only, NaN otherwise).
    double ks_exact = 0.0;
    std::int64_t effective_trials = 0;
    std::string source;
};

struct CltAudit {
    std::vector<CdfAuditRow> rows;
    std::vector<CdfAuditSummary> summaries;
    SuiteReport report;
};

/// Throws EmptyConditioningError if some (x, n) has no surviving mass.
CltAudit audit_conditioned_clt(const LatticeDistribution& dist, const std::vector<XPoint>& x_grid,
                               const std::vector<long>& n_grid, const std::vector<double>& u_grid,
                               const AuditOptions& opts = {});

struct RegimeRow {
    /// "A1", "A2", "B1" or "B2".
    std::string regime;
    XPoint point;
    double x = 0.0;
    long n = 0;
    double u = 0.0;
    double truth = 0.0;
    double limit = 0.0;
    /// A1: truth sigma sqrt(2 pi n) / (2 V) - 1; others: truth - limit (B1: sup gap).
    double gap = 0.0;
};

struct RegimeAudit {
    std::vector<RegimeRow> rows;
    SuiteReport report;
};

/// A1/B1 at x in {0, 1, 2}; A2/B2 at x = t sigma sqrt(n), t in {0.5, 1, 2}, u in {0.5, 1, 2}.
RegimeAudit audit_regimes(const LatticeDistribution& dist, const std::vector<long>& n_grid,
                          const AuditOptions& opts = {});

struct NagaevRow {
    XPoint point;
    double x = 0.0;
    long n = 0;
    double truth = 0.0;
    double limit = 0.0;
    /// sqrt(n) |truth - H(x / (sigma sqrt n))|.
    double scaled_gap = 0.0;
};

struct NagaevAudit {
    std::vector<NagaevRow> rows;
    double fitted_constant = 0.0;
    SuiteReport report;
};

/// Bounded-ness of sqrt(n)|P(tau_x > n) - H| proxied by the per-n maxima growing by at most 2x across the grid.
NagaevAudit audit_nagaev(const LatticeDistribution& dist, const std::vector<XPoint>& x_grid,
                         const std::vector<long>& n_grid, const AuditOptions& opts = {});

std::vector<XPoint> default_nagaev_x_grid();
std::vector<long> default_nagaev_n_grid();

/// The analytic inequality suite over the built-in laws.
SuiteReport audit_kernel_and_lemma_suite(const AuditOptions& opts = {});

void write_verification_csv(std::ostream& os, const std::vector<VerificationRow>& rows);
void write_cdf_audit_csv(std::ostream& os, const std::vector<CdfAuditRow>& rows);
void write_cdf_summary_csv(std::ostream& os, const std::vector<CdfAuditSummary>& rows);
void write_regime_csv(std::ostream& os, const std::vector<RegimeRow>& rows);
void write_nagaev_csv(std::ostream& os, const std::vector<NagaevRow>& rows);
void write_checks_csv(std::ostream& os, const std::vector<Check>& checks);

nlohmann::json to_json(const VerificationRow& r);
nlohmann::json to_json(const CdfAuditSummary& r);
nlohmann::json to_json(const RegimeRow& r);
nlohmann::json to_json(const NagaevRow& r);
nlohmann::json to_json(const Check& c);

}  // namespace condwalk::verify
