#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace epcgaze {

/// Seeded random source. All randomness in a run flows from one top-level
/// seed through named derived streams, so results never depend on call
/// order across unrelated components.
///
/// Uniform and normal variates are computed from raw engine bits rather than
/// std:: distributions, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Independent stream keyed by a name, e.g. "data", "init", "adapt".
    Rng derive(std::string_view name) const;
    /// Independent stream keyed by an integer, e.g. a subject or sample id.
    Rng derive(std::uint64_t id) const;

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    /// Uniform integer in [0, n). n must be > 0.
    std::size_t below(std::size_t n);

    /// k distinct indices drawn uniformly from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

    std::string state() const;
    void set_state(const std::string& state);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace epcgaze
