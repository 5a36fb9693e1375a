#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "forge/error.hpp"

namespace forge {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) from the top 53 bits; stable across standard
// libraries, unlike std::uniform_real_distribution.
inline double unit_double(Rng &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(Rng &rng, std::size_t n) {
    auto i = static_cast<std::size_t>(unit_double(rng) * static_cast<double>(n));
    return std::min(i, n - 1);
}

template <typename T>
void seeded_shuffle(std::vector<T> &v, Rng &rng) {
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

// Sampling with replacement from a fixed non-negative weight vector, by
// inverse CDF over the running sums.
class WeightedIndex {
public:
    explicit WeightedIndex(std::span<const double> weights) {
        cumulative_.reserve(weights.size());
        double acc = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0))
                throw ValidationError("sampling weights must be non-negative");
            acc += w;
            cumulative_.push_back(acc);
        }
        if (!(acc > 0.0))
            throw ValidationError("sampling weights sum to zero");
    }

    std::size_t size() const noexcept { return cumulative_.size(); }
    double total() const noexcept { return cumulative_.back(); }

    // Exact probability the sampler assigns to index i.
    double probability(std::size_t i) const {
        double lo = i == 0 ? 0.0 : cumulative_[i - 1];
        return (cumulative_[i] - lo) / total();
    }

    std::size_t sample(Rng &rng) const {
        double u = unit_double(rng) * total();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        auto i = static_cast<std::size_t>(it - cumulative_.begin());
        if (i >= cumulative_.size())
            i = cumulative_.size() - 1;
        // skip zero-width slots that upper_bound can land on only at the end
        while (i > 0 && probability(i) == 0.0)
            --i;
        return i;
    }

private:
    std::vector<double> cumulative_;
};

} // namespace forge
