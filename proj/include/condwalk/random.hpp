#pragma once

#include <cstdint>
#include <limits>

namespace condwalk {

/// Counter-based random stream: draw k of stream (seed, id) is a pure function
/// of (seed, id, k), so trial i can always be replayed from its index alone.
class RandomStream {
public:
    using result_type = std::uint64_t;

    RandomStream(std::uint64_t seed, std::uint64_t stream_id);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return next_u64(); }
    result_type next_u64();
    /// Uniform on [0, 1) with 53 random bits.
    double next_unit();

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace condwalk
