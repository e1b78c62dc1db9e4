#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace loopcert {

/// mt19937_64 with hand-rolled derivations so that streams are bit-stable
/// across standard libraries (std::uniform_real_distribution is not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gaussian() {
        // Box-Muller; one value per call keeps the stream layout simple.
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    std::vector<double> gaussian_vector(int n) {
        std::vector<double> v(n);
        for (auto& x : v) x = gaussian();
        return v;
    }

    /// Uniform direction on the unit sphere in R^n.
    std::vector<double> unit_vector(int n) {
        std::vector<double> v = gaussian_vector(n);
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) { v[0] = 1.0; norm = 1.0; }
        for (double& x : v) x /= norm;
        return v;
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

}  // namespace loopcert
