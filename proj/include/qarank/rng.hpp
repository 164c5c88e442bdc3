#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace qarank {

/// SplitMix64 step (Steele, Lea, Flood 2014). Used to expand seeds.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// 64-bit FNV-1a, for deriving per-key seeds from string ids.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// xoshiro256** 1.0 (Blackman, Vigna). State is seeded from one 64-bit value through
/// SplitMix64, so a given seed yields the same stream on every platform. Bounded draws
/// use rejection sampling rather than std distributions, whose output is
/// implementation-defined.
class Xoshiro256 {
  public:
    using result_type = std::uint64_t;

    explicit Xoshiro256(std::uint64_t seed) noexcept
    {
        for (auto& word : s_) word = splitmix64(seed);
    }

    /// Seed derived from a base seed and a string key, independent of draw order elsewhere.
    static Xoshiro256 for_key(std::uint64_t seed, std::string_view key) noexcept
    {
        std::uint64_t mixed = seed ^ fnv1a64(key);
        return Xoshiro256(splitmix64(mixed));
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept
    {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform integer in [0, bound). bound must be >= 1.
    std::uint64_t below(std::uint64_t bound) noexcept
    {
        // Reject the low `2^64 mod bound` values so every residue is equally likely.
        const std::uint64_t threshold = (0 - bound) % bound;
        while (true) {
            std::uint64_t r = (*this)();
            if (r >= threshold) return r % bound;
        }
    }

    template <typename T>
    void shuffle(std::span<T> items) noexcept
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

  private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
    {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> s_{};
};

}  // namespace qarank
