#include "condwalk/increments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include "condwalk/format.hpp"

namespace condwalk {

std::string_view to_string(ValidationCode code) {
    switch (code) {
        case ValidationCode::BadSpan: return "bad-span";
        case ValidationCode::Empty: return "empty";
        case ValidationCode::NonFiniteProbability: return "non-finite-probability";
        case ValidationCode::NegativeProbability: return "negative-probability";
        case ValidationCode::ProbabilitySum: return "probability-sum";
        case ValidationCode::NonzeroMean: return "nonzero-mean";
        case ValidationCode::ZeroVariance: return "zero-variance";
        case ValidationCode::Syntax: return "syntax";
    }
    return "unknown";
}

ValidationError::ValidationError(ValidationCode code, const std::string& what)
    : Error("invalid distribution (" + std::string(to_string(code)) + "): " + what), code_(code) {}

std::int64_t min_surviving_index(double x, double span) {
    return static_cast<std::int64_t>(std::ceil(-x / span - kBarrierEps));
}

LatticeDistribution LatticeDistribution::make(double span, std::vector<Atom> atoms) {
    if (!std::isfinite(span) || !(span > 0.0))
        throw ValidationError(ValidationCode::BadSpan, "span must be finite and > 0");
    if (atoms.empty()) throw ValidationError(ValidationCode::Empty, "no atoms");

    std::map<std::int64_t, double> merged;
    for (const auto& a : atoms) {
        if (!std::isfinite(a.prob))
            throw ValidationError(ValidationCode::NonFiniteProbability, "atom " + std::to_string(a.offset));
        if (a.prob < 0.0)
            throw ValidationError(ValidationCode::NegativeProbability,
                                  "atom " + std::to_string(a.offset) + " has probability " + format_double(a.prob));
        merged[a.offset] += a.prob;
    }

    double total = 0.0;
    for (const auto& [off, p] : merged) total += p;
    if (std::abs(total - 1.0) > 1e-12)
        throw ValidationError(ValidationCode::ProbabilitySum, "probabilities sum to " + format_double(total));

    double mean = 0.0;
    for (const auto& [off, p] : merged) mean += static_cast<double>(off) * span * p;
    if (std::abs(mean) > 1e-12 * span)
        throw ValidationError(ValidationCode::NonzeroMean, "mean is " + format_double(mean));

    LatticeDistribution d;
    d.span_ = span;
    for (const auto& [off, p] : merged)
        if (p > 0.0) d.atoms_.push_back({off, p});

    double var = 0.0;
    for (const auto& a : d.atoms_) {
        const double v = static_cast<double>(a.offset) * span;
        var += a.prob * v * v;
    }
    if (!(var > 0.0) || d.atoms_.size() < 2)
        throw ValidationError(ValidationCode::ZeroVariance, "variance must be > 0");
    d.variance_ = var;
    d.sigma_ = std::sqrt(var);

    double cum = 0.0;
    for (const auto& a : d.atoms_) {
        cum += a.prob;
        d.cumulative_.push_back(cum);
    }
    d.cumulative_.back() = 2.0;  // every u in [0, 1) lands on some atom
    return d;
}

double LatticeDistribution::moment(double r) const {
    if (!(r > 0.0)) throw DomainError("moment order must be > 0");
    double sum = 0.0;
    for (const auto& a : atoms_) sum += a.prob * std::pow(std::abs(static_cast<double>(a.offset) * span_), r);
    return sum;
}

std::int64_t LatticeDistribution::sample_offset(RandomStream& stream) const {
    const double u = stream.next_unit();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return atoms_[static_cast<std::size_t>(it - cumulative_.begin())].offset;
}

std::string LatticeDistribution::literal() const {
    std::string out = "span:" + format_double(span_) + " atoms:";
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
        if (i) out += ',';
        if (atoms_[i].offset >= 0) out += '+';
        out += std::to_string(atoms_[i].offset) + ":" + format_double(atoms_[i].prob);
    }
    return out;
}

nlohmann::json LatticeDistribution::to_json() const {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : atoms_) atoms.push_back(nlohmann::json::array({a.offset, a.prob}));
    return {{"span", span_}, {"atoms", atoms}};
}

LatticeDistribution make_lattice(double span, std::vector<Atom> atoms) {
    return LatticeDistribution::make(span, std::move(atoms));
}

double moments(const LatticeDistribution& dist, double r) { return dist.moment(r); }

bool in_support_V(const LatticeDistribution& dist, double x) {
    if (!std::isfinite(x)) return false;
    return dist.max_offset() >= min_surviving_index(x, dist.span());
}

double sample(const LatticeDistribution& dist, RandomStream& stream) {
    return static_cast<double>(dist.sample_offset(stream)) * dist.span();
}

MomentSummary summarize(const LatticeDistribution& dist, double delta_declared) {
    if (!(delta_declared > 0.0)) throw ConfigError("declared delta must be > 0");
    return {dist.variance(), delta_declared, std::make_shared<const LatticeDistribution>(dist)};
}

std::vector<std::string> builtin_distribution_names() { return {"rademacher", "skew3", "tri"}; }

LatticeDistribution builtin_distribution(std::string_view name) {
    if (name == "rademacher") return make_lattice(1.0, {{-1, 0.5}, {1, 0.5}});
    if (name == "skew3") return make_lattice(1.0, {{-1, 0.75}, {3, 0.25}});
    if (name == "tri") return make_lattice(1.0, {{-1, 0.25}, {0, 0.5}, {1, 0.25}});
    throw ValidationError(ValidationCode::Syntax, "unknown distribution name '" + std::string(name) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view s, std::string_view what) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ValidationError(ValidationCode::Syntax, "cannot parse " + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

double parse_probability(std::string_view s) {
    const auto slash = s.find('/');
    if (slash == std::string_view::npos) return parse_number(s, "probability");
    const double num = parse_number(s.substr(0, slash), "probability numerator");
    const double den = parse_number(s.substr(slash + 1), "probability denominator");
    if (den == 0.0) throw ValidationError(ValidationCode::Syntax, "zero denominator in probability");
    return num / den;
}

std::int64_t parse_offset(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ValidationError(ValidationCode::Syntax, "cannot parse offset '" + std::string(s) + "'");
    return v;
}

LatticeDistribution parse_literal(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string token;
    double span = 1.0;
    bool have_atoms = false;
    std::vector<Atom> atoms;
    while (in >> token) {
        std::string_view tok = token;
        if (tok.starts_with("span:")) {
            span = parse_number(tok.substr(5), "span");
        } else if (tok.starts_with("atoms:")) {
            have_atoms = true;
            std::string_view list = tok.substr(6);
            while (!list.empty()) {
                const auto comma = list.find(',');
                const std::string_view item = list.substr(0, comma);
                const auto colon = item.find(':');
                if (colon == std::string_view::npos)
                    throw ValidationError(ValidationCode::Syntax, "atom '" + std::string(item) + "' lacks ':'");
                atoms.push_back({parse_offset(item.substr(0, colon)), parse_probability(item.substr(colon + 1))});
                if (comma == std::string_view::npos) break;
                list.remove_prefix(comma + 1);
            }
        } else {
            throw ValidationError(ValidationCode::Syntax, "unexpected token '" + token + "'");
        }
    }
    if (!have_atoms) throw ValidationError(ValidationCode::Syntax, "literal has no atoms: field");
    return make_lattice(span, std::move(atoms));
}

}  // namespace

LatticeDistribution distribution_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("atoms"))
        throw ValidationError(ValidationCode::Syntax, "JSON distribution needs an 'atoms' field");
    const double span = j.value("span", 1.0);
    std::vector<Atom> atoms;
    for (const auto& a : j.at("atoms")) {
        if (a.is_array() && a.size() == 2) {
            atoms.push_back({a[0].get<std::int64_t>(), a[1].get<double>()});
        } else if (a.is_object()) {
            atoms.push_back({a.at("offset").get<std::int64_t>(), a.at("prob").get<double>()});
        } else {
            throw ValidationError(ValidationCode::Syntax, "atom must be [offset, prob] or {offset, prob}");
        }
    }
    return make_lattice(span, std::move(atoms));
}

LatticeDistribution parse_distribution(std::string_view text) {
    text = trim(text);
    if (text.empty()) throw ValidationError(ValidationCode::Syntax, "empty distribution");
    if (text.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(ValidationCode::Syntax, e.what());
        }
        try {
            return distribution_from_json(j);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(ValidationCode::Syntax, e.what());
        }
    }
    if (text.find(':') == std::string_view::npos) return builtin_distribution(text);
    return parse_literal(text);
}

}  // namespace condwalk
