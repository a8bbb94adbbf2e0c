#pragma once

// Finitely supported, exactly centered increment laws on a lattice span * Z.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "condwalk/error.hpp"
#include "condwalk/random.hpp"

namespace condwalk {

struct Atom {
    std::int64_t offset = 0;
    double prob = 0.0;

    friend bool operator==(const Atom&, const Atom&) = default;
};

enum class ValidationCode {
    BadSpan,
    Empty,
    NonFiniteProbability,
    NegativeProbability,
    ProbabilitySum,
    NonzeroMean,
    ZeroVariance,
    Syntax,
};

std::string_view to_string(ValidationCode code);

class ValidationError : public Error {
public:
    ValidationError(ValidationCode code, const std::string& what);
    ValidationCode code() const { return code_; }

private:
    ValidationCode code_;
};

/// Relative tolerance (in units of the span) of the barrier test x + k h >= 0.
inline constexpr double kBarrierEps = 1e-12;

/// Smallest k with x + k * span >= 0 (up to kBarrierEps * span).
std::int64_t min_surviving_index(double x, double span);

class LatticeDistribution {
public:
    /// Validates and normalizes (sorts by offset, merges duplicates, drops zero atoms).
    /// Uncentered input is rejected, never recentered.
    static LatticeDistribution make(double span, std::vector<Atom> atoms);

    double span() const { return span_; }
    std::span<const Atom> atoms() const { return atoms_; }
    std::int64_t min_offset() const { return atoms_.front().offset; }
    std::int64_t max_offset() const { return atoms_.back().offset; }

    double variance() const { return variance_; }
    double sigma() const { return sigma_; }

    /// E|X|^r.
    double moment(double r) const;

    /// Offset drawn with the law's probabilities; the increment is offset * span.
    std::int64_t sample_offset(RandomStream& stream) const;

    /// Canonical literal `span:<h> atoms:<o>:<p>,...`; parses back to an equal law.
    std::string literal() const;
    nlohmann::json to_json() const;

    friend bool operator==(const LatticeDistribution& a, const LatticeDistribution& b) {
        return a.span_ == b.span_ && a.atoms_ == b.atoms_;
    }

private:
    LatticeDistribution() = default;

    double span_ = 1.0;
    std::vector<Atom> atoms_;
    std::vector<double> cumulative_;
    double variance_ = 0.0;
    double sigma_ = 0.0;
};

LatticeDistribution make_lattice(double span, std::vector<Atom> atoms);

/// E|X_1|^r as an exact finite sum. Requires r > 0.
double moments(const LatticeDistribution& dist, double r);

/// Membership in supp V: some atom keeps x + X_1 >= 0.
bool in_support_V(const LatticeDistribution& dist, double x);

/// One increment offset * span.
double sample(const LatticeDistribution& dist, RandomStream& stream);

/// Moment metadata for the remainder shapes.
struct MomentSummary {
    double sigma2 = 0.0;
    double delta_declared = 1.0;
    std::shared_ptr<const LatticeDistribution> dist;

    double beta(double r) const { return moments(*dist, r); }
};

MomentSummary summarize(const LatticeDistribution& dist, double delta_declared);

/// Named laws: rademacher, skew3, tri.
std::vector<std::string> builtin_distribution_names();
LatticeDistribution builtin_distribution(std::string_view name);

/// Accepts a built-in name, a literal `span:1 atoms:-1:0.5,+1:0.5`
/// (probabilities may be written as fractions, e.g. -1:1/2), or a JSON object.
LatticeDistribution parse_distribution(std::string_view text);
LatticeDistribution distribution_from_json(const nlohmann::json& j);

}  // namespace condwalk
