#pragma once

#include <cstdint>
#include <random>

namespace qled {

// Deterministic random stream: a fixed seed fixes every draw. mt19937_64 is fully
// specified by the standard and every transform below is implemented here, so
// sequences do not depend on the standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t raw() { return eng_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Exponential with rate > 0, mean 1/rate.
    double exponential(double rate) { return -std::log1p(-uniform01()) / rate; }

    // Standard normal; Box-Muller with cached spare.
    double gaussian();
    double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

    // Poisson count: Knuth product below mean 50, rounded normal above.
    std::uint64_t poisson(double mean);

    // Index in [0,4) with probabilities p[0..3]; p is normalized by its own sum.
    int categorical4(const double p[4]);

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Documented sub-seed derivation (one splitmix64 step of base + index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace qled
