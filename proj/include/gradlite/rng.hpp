#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace gradlite {

/// SplitMix64 stream. Every random quantity in the library is drawn from one of
/// these so that runs are reproducible from a single 64-bit seed.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on the open interval (0, 1); never returns 0 so log() is safe.
    double uniform() noexcept {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t state_;
};

/// Standard normal draws via Box-Muller on a SplitMix64 stream. Both values of
/// each pair are used, cosine branch first.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed = 0) noexcept : uniform_(seed) {}

    double next() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_.uniform();
        const double u2 = uniform_.uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double uniform() noexcept { return uniform_.uniform(); }

private:
    SplitMix64 uniform_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives an independent sub-stream seed, e.g. one per parameter block.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    SplitMix64 mix(seed ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
    return mix.next();
}

}  // namespace gradlite
