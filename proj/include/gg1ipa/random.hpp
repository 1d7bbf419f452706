#pragma once

#include <cstdint>

namespace gg1ipa {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

enum class StreamChannel : std::uint64_t { service = 1, arrival = 2, probe = 3 };

/// Counter-based uniform stream: draw i of (seed, replication, channel) is
/// mix64(key + i * golden), a pure function of its coordinates. Separate channels
/// keep the service variates identical whatever happens on the arrival side, which
/// is what common-random-number comparisons rely on.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t replication, StreamChannel channel)
        : key_(mix64(mix64(seed) ^ mix64(replication * 0x632be59bd9b4e019ULL + static_cast<std::uint64_t>(channel)))) {}

    /// Uniform on [0, 1) with 53 bits.
    double at(std::uint64_t index) const {
        const std::uint64_t bits = mix64(key_ + index * 0x9e3779b97f4a7c15ULL);
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    double next() { return at(counter_++); }
    std::uint64_t position() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace gg1ipa
