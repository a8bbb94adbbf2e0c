#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "condwalk/increments.hpp"
#include "oracles.hpp"

using namespace condwalk;

namespace {
ValidationCode code_of(double span, std::vector<Atom> atoms) {
    try {
        make_lattice(span, std::move(atoms));
    } catch (const ValidationError& e) {
        return e.code();
    }
    FAIL("expected a validation error");
    return ValidationCode::Syntax;
}
}  // namespace

TEST_CASE("make_lattice accepts centered laws") {
    const auto rad = make_lattice(1.0, {{-1, 0.5}, {+1, 0.5}});
    CHECK(rad.variance() == 1.0);
    const auto skew = make_lattice(1.0, {{-1, 0.75}, {+3, 0.25}});
    CHECK(skew.variance() == doctest::Approx(3.0).epsilon(1e-15));
    const auto tri = builtin_distribution("tri");
    CHECK(tri.variance() == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(tri.atoms().size() == 3);

    // unsorted, duplicated and zero atoms are normalized
    const auto merged = make_lattice(2.0, {{1, 0.25}, {-1, 0.25}, {1, 0.25}, {-1, 0.25}, {5, 0.0}});
    REQUIRE(merged.atoms().size() == 2);
    CHECK(merged.atoms()[0] == Atom{-1, 0.5});
    CHECK(merged.variance() == 4.0);
}

TEST_CASE("make_lattice rejects each invalid input with its own code") {
    CHECK(code_of(1.0, {{1, 1.0}}) == ValidationCode::NonzeroMean);
    CHECK(code_of(1.0, {{-1, 0.5}, {1, 0.4}}) == ValidationCode::ProbabilitySum);
    CHECK(code_of(1.0, {{-1, 1.5}, {1, -0.5}}) == ValidationCode::NegativeProbability);
    CHECK(code_of(1.0, {{0, 1.0}}) == ValidationCode::ZeroVariance);
    CHECK(code_of(0.0, {{-1, 0.5}, {1, 0.5}}) == ValidationCode::BadSpan);
    CHECK(code_of(1.0, {}) == ValidationCode::Empty);
    CHECK(code_of(1.0, {{-1, std::nan("")}, {1, 0.5}}) == ValidationCode::NonFiniteProbability);
    CHECK(code_of(1.0, {{-1, 0.5}, {2, 0.5}}) == ValidationCode::NonzeroMean);
}

TEST_CASE("moments") {
    const auto rad = builtin_distribution("rademacher");
    CHECK(moments(rad, 2.0) == 1.0);
    CHECK(moments(rad, 3.0) == 1.0);
    CHECK(moments(builtin_distribution("skew3"), 3.0) == doctest::Approx(7.5).epsilon(1e-15));
    CHECK_THROWS_AS(moments(rad, 0.0), DomainError);
    const auto ms = summarize(builtin_distribution("skew3"), 1.0);
    CHECK(ms.sigma2 == ms.beta(2.0));

    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        const auto d = oracle::random_centered_law(rng);
        double var = 0.0;
        for (const auto& a : d.atoms()) var += a.prob * static_cast<double>(a.offset * a.offset);
        CHECK(std::abs(moments(d, 2.0) - var) <= 1e-14);
    }
}

TEST_CASE("in_support_V") {
    const auto rad = builtin_distribution("rademacher");
    CHECK(in_support_V(rad, 0.0));
    CHECK_FALSE(in_support_V(rad, -3.0));
    CHECK(in_support_V(rad, -1.0));
    CHECK_FALSE(in_support_V(rad, -1.0000001));
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto d = oracle::random_centered_law(rng);
        bool seen = false;
        for (double x = -6.0; x <= 3.0; x += 0.125) {
            const bool in = in_support_V(d, x);
            if (seen) CHECK(in);
            seen = seen || in;
        }
    }
}

TEST_CASE("literal and JSON forms round-trip") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        const auto d = oracle::random_centered_law(rng);
        CHECK(parse_distribution(d.literal()) == d);
        CHECK(parse_distribution(d.to_json().dump()) == d);
        // accepted laws re-validate
        std::vector<Atom> atoms(d.atoms().begin(), d.atoms().end());
        CHECK(make_lattice(d.span(), atoms) == d);
    }
    const auto lit = parse_distribution("span:1 atoms:-1:0.5,+1:0.5");
    CHECK(lit == builtin_distribution("rademacher"));
    CHECK(parse_distribution("span:1 atoms:-1:3/4,+3:1/4") == builtin_distribution("skew3"));
    CHECK(parse_distribution(R"({"span": 1, "atoms": [{"offset": -1, "prob": 0.25}, {"offset": 0, "prob": 0.5},
                                 {"offset": 1, "prob": 0.25}]})") == builtin_distribution("tri"));
    CHECK_THROWS_AS(parse_distribution("span:1 atoms:-1"), ValidationError);
    CHECK_THROWS_AS(parse_distribution("gaussian"), ValidationError);
    CHECK_THROWS_AS(parse_distribution("{not json"), ValidationError);
}

TEST_CASE("sampling is reproducible") {
    const auto rad = builtin_distribution("rademacher");
    RandomStream a(42, 7), b(42, 7), c(42, 8);
    bool differs = false;
    for (int i = 0; i < 1000; ++i) {
        const double va = sample(rad, a);
        CHECK(va == sample(rad, b));
        differs = differs || va != sample(rad, c);
    }
    CHECK(differs);
}

TEST_CASE("sample frequencies match the law (single stream and split streams)") {
    const auto d = make_lattice(0.5, {{-1, 0.5}, {0, 0.125}, {1, 0.25}, {2, 0.125}});
    constexpr int draws = 1000000;
    std::map<std::int64_t, int> single, split;
    RandomStream s(2024, 0);
    for (int i = 0; i < draws; ++i) ++single[d.sample_offset(s)];
    for (int i = 0; i < draws; ++i) {
        RandomStream t(2024, static_cast<std::uint64_t>(i));
        ++split[d.sample_offset(t)];
    }
    CHECK(single != split);
    for (const auto& a : d.atoms()) {
        const double tol = 4.0 * std::sqrt(a.prob * (1.0 - a.prob) / draws);
        CHECK(std::abs(single[a.offset] / double(draws) - a.prob) <= tol);
        CHECK(std::abs(split[a.offset] / double(draws) - a.prob) <= tol);
    }
}
