#pragma once

#include <cstdint>
#include <random>

namespace hhmm {

// Seedable generator with a stream that is identical on every platform.
//
// Raw bits come from std::mt19937_64, whose output sequence is fixed by the
// C++ standard. The standard library distributions are implementation-defined,
// so every variate below is derived from the raw 64-bit words by hand:
//   uniform()  - top 53 bits scaled to [0, 1)
//   normal()   - Marsaglia polar method, second variate cached
//   gamma()    - Marsaglia-Tsang squeeze, boosted for shape < 1
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    double gamma(double shape);
    double chi_squared(double dof) { return 2.0 * gamma(0.5 * dof); }

    // Index drawn from an unnormalised probability vector.
    template <typename Vec>
    int discrete(const Vec& probabilities) {
        using Size = decltype(probabilities.size());
        double total = 0.0;
        for (Size i = 0; i < probabilities.size(); ++i) total += probabilities[i];
        const double u = uniform() * total;
        double acc = 0.0;
        const auto last = static_cast<int>(probabilities.size()) - 1;
        for (int i = 0; i < last; ++i) {
            acc += probabilities[i];
            if (u < acc) return i;
        }
        return last;
    }

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// SplitMix64 finaliser; derives independent child seeds (one per start,
// replication, ...) from a single user seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace hhmm
