#pragma once

#include <array>
#include <cstdint>

namespace enscond::rng {

// Philox4x32-10 counter-based generator. A draw is a pure function of
// (key, counter), so independent streams are just distinct counter prefixes:
// results do not depend on evaluation order or thread scheduling.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// One logical random stream, identified by (seed, stream_id). Streams with
// different ids never overlap. Copyable; copies continue independently.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint32_t next_u32();
    double uniform();  // in (0,1), never exactly 0 or 1
    double normal();   // standard normal via Box-Muller

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_id_ = 0;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int buf_pos_ = 4;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

} // namespace enscond::rng
