#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "lumir/tensor.hpp"

namespace lumir {

// Deterministic random stream. Gaussians come from Box-Muller on top of
// mt19937_64 so sequences are reproducible bit-for-bit for a fixed seed,
// independent of the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // [0,1) with 53-bit resolution
    double uniform();
    double uniform(double lo, double hi);
    // inclusive bounds
    int uniform_int(int lo, int hi);
    double normal();

    Tensor normal_tensor(std::vector<int> shape);
    void fill_normal(Tensor& t);

    // Independent stream derived from this rng's seed and a stream index;
    // insensitive to how much the parent has already consumed.
    Rng child(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i) - 1));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// SplitMix64-style hash used for stream derivation and stable id hashing.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t hash_string(const std::string& s);

}  // namespace lumir
