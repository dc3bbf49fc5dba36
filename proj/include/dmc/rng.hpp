#pragma once

#include <cstdint>
#include <random>

namespace dmc {

using Rng = std::mt19937_64;

/// Independent stream families; each (seed, family, epoch, episode) gets its own engine.
enum class StreamFamily : std::uint32_t {
    training = 1,
    evaluation = 2,
    static_baseline = 3,
    initialization = 4,
    test = 99,
};

struct StreamId {
    std::uint64_t seed = 0;
    StreamFamily family = StreamFamily::training;
    std::uint64_t epoch = 0;
    std::uint64_t episode = 0;
};

/// Engine seeded from every word of the id, so streams never depend on
/// which worker or in which order episodes run.
inline Rng make_stream(const StreamId& id) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(id.seed),  hi(id.seed),    static_cast<std::uint32_t>(id.family),
                      lo(id.epoch), hi(id.epoch),   lo(id.episode),
                      hi(id.episode)};
    return Rng(seq);
}

}  // namespace dmc
