#pragma once

#include <cstdint>

namespace mvr {

// Counter-based stream: sample i of stream (seed, tag) is a pure function of
// (seed, tag, i), so per-level streams are independent by construction and
// cloned streams can be handed to different workers.
class SampleStream {
public:
    SampleStream() = default;
    SampleStream(std::uint64_t seed, std::uint64_t level_tag = 0)
        : seed_(seed), tag_(level_tag) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t level_tag() const { return tag_; }
    std::uint64_t counter() const { return counter_; }

    // Uniform in [0, 1).
    double next_double() {
        const std::uint64_t bits = mix(counter_++);
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    void skip(std::uint64_t n) { counter_ += n; }

    // Independent stream for replication r of level l under the same seed.
    static SampleStream derive(std::uint64_t seed, std::uint64_t replication,
                               std::uint64_t level) {
        return SampleStream(seed, (replication << 8) ^ level);
    }

private:
    // splitmix64-style finalizer over the (seed, tag, counter) triple
    std::uint64_t mix(std::uint64_t i) const {
        std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (i + 1);
        z ^= fmix(tag_ + 0xbf58476d1ce4e5b9ULL);
        z = fmix(z);
        return z;
    }
    static std::uint64_t fmix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t seed_ = 0;
    std::uint64_t tag_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace mvr
