#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace symscope {

// 64-bit FNV-1a. Used for cache fingerprints, id checksums and seed
// derivation; not cryptographic.
std::uint64_t fnv1a64(std::string_view data);

// Lowercase zero-padded 16-char hex rendering of a 64-bit value.
std::string to_hex16(std::uint64_t value);

// Derives an independent stream seed from a top-level seed and a label,
// e.g. derive_seed(7, "diff_matrix", trial). Adding a new labelled consumer
// never perturbs the streams of existing ones.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0);

// mt19937_64 with hand-rolled variate transforms. The standard fully
// specifies the engine but not the distributions, so the distributions are
// implemented here to keep every run byte-reproducible across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0,1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t uniform_int(std::uint64_t n);

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller; caches the second variate.
    double normal();

    // Draws an index from a discrete distribution given cumulative weights
    // (cum.back() == 1 expected within float tolerance).
    std::size_t categorical(const std::vector<double>& cum);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace symscope
