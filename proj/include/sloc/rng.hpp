#pragma once

#include <array>
#include <cstdint>

#include "sloc/types.hpp"

namespace sloc {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds.
Philox4x32Counter philox4x32(Philox4x32Counter ctr, Philox4x32Key key);

/// Sub-streams of one (seed, stream_id) pair. Each consumer of randomness inside
/// a path uses its own lane so adding draws in one place never shifts another.
enum class Lane : std::uint32_t {
    wiener = 0,
    initial = 1,
    target = 2,
    inner = 3,
    aux = 4,
};

/// Counter-based stream: key = seed, counter = (block, lane, stream_id).
/// Any (seed, stream_id, lane) triple can be materialized independently,
/// which is what makes path ensembles independent of worker count.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t stream_id, Lane lane = Lane::wiener);
    Stream(std::uint64_t seed, std::uint64_t stream_id, std::uint32_t lane);

    std::uint32_t next_u32();
    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 bits.
    double uniform();
    /// Uniform on (0, 1).
    double uniform_open();
    double normal();
    Vector normal_vector(Eigen::Index d);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

private:
    void refill();

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint32_t lane_;
    std::uint32_t block_ = 0;
    Philox4x32Counter buf_{};
    int pos_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace sloc
