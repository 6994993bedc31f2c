#include "qled/rng.hpp"

#include <cmath>
#include <numbers>

namespace qled {

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t Rng::poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 50.0) {
        const double limit = std::exp(-mean);
        std::uint64_t n = 0;
        double prod = uniform01();
        while (prod > limit) {
            ++n;
            prod *= uniform01();
        }
        return n;
    }
    const double g = gaussian(mean, std::sqrt(mean));
    return g <= 0.0 ? 0 : static_cast<std::uint64_t>(std::llround(g));
}

int Rng::categorical4(const double p[4]) {
    const double total = p[0] + p[1] + p[2] + p[3];
    const double u = uniform01() * total;
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) {
        acc += p[i];
        if (u < acc) return i;
    }
    return 3;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace qled
