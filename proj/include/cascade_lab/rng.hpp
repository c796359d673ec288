#ifndef CASCADE_LAB_RNG_HPP
#define CASCADE_LAB_RNG_HPP

#include <cstdint>

namespace cascade_lab {

/// SplitMix64 output finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Counter-based random stream. The state is a hash of
/// (seed, trial, vertex index); draws advance it as a SplitMix64 sequence.
/// Every vertex of every trial therefore owns an independent stream and
/// results do not depend on traversal or thread scheduling.
class CounterStream {
public:
    CounterStream(std::uint64_t seed, std::uint64_t trial, std::uint64_t vertex) noexcept
        : state_(mix64(mix64(mix64(seed ^ 0x6a09e667f3bcc909ull) + trial * kGamma) + vertex * kGamma + 1)) {}

    std::uint64_t next_u64() noexcept {
        state_ += kGamma;
        return mix64(state_);
    }

    /// Uniform in the open interval (0,1), 53-bit resolution.
    double next_open01() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;
    std::uint64_t state_;
};

} // namespace cascade_lab

#endif // CASCADE_LAB_RNG_HPP
