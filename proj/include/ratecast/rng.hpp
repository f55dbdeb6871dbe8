#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace ratecast {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable sub-stream derivation. Every random draw in the library is keyed by
// the root seed, a purpose tag and integer coordinates, so results never
// depend on call order, worker count or scheduling.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(root);
    for (unsigned char c : tag) h = (h ^ c) * 0x100000001b3ULL;
    return splitmix64(h);
}

template <typename... Ids>
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, Ids... ids) {
    std::uint64_t h = derive_seed(root, tag);
    ((h = splitmix64(h ^ static_cast<std::uint64_t>(ids))), ...);
    return h;
}

// Deterministic generator with explicit uniform and gaussian draws. The
// gaussian path is a hand-rolled Box-Muller so streams are identical across
// standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n)
    int uniform_int(int n) {
        return static_cast<int>(gen_() % static_cast<std::uint64_t>(n));
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace ratecast
