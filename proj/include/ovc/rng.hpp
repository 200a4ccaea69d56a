#ifndef OVC_RNG_HPP
#define OVC_RNG_HPP

#include <cstdint>

namespace ovc {

// Counter-based generator (splitmix64 over seed ^ counter). Every stochastic
// op takes one of these explicitly so runs replay bit-identically.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : seed_(seed), counter_(0) {}

    uint64_t next_u64() {
        uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (++counter_);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float uniform(float lo, float hi) {
        return lo + static_cast<float>(uniform()) * (hi - lo);
    }

    // Derive an independent stream; `tag` picks the substream.
    Rng fork(uint64_t tag) const {
        Rng r(seed_ ^ (0xd1342543de82ef95ULL * (tag + 1)));
        return r;
    }

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    uint64_t counter_;
};

}  // namespace ovc

#endif
