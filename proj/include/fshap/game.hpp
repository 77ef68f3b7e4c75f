#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <unordered_map>
#include <vector>

#include "fshap/error.hpp"
#include "fshap/rng.hpp"
#include "fshap/tensor.hpp"

namespace fshap {

inline constexpr int kExactPlayerLimit = 20;

// Subset of the player set {0..n-1}, stored as a bitmask.
struct Coalition {
    std::uint32_t mask = 0;

    static Coalition empty() { return {0}; }
    static Coalition full(int n) { return {n >= 32 ? ~0u : ((1u << n) - 1u)}; }
    static Coalition of(std::initializer_list<int> members) {
        Coalition c;
        for (int i : members) c.mask |= (1u << i);
        return c;
    }

    bool contains(int player) const { return (mask >> player) & 1u; }
    Coalition with(int player) const { return {mask | (1u << player)}; }
    int size() const { return __builtin_popcount(mask); }
};

// One Shapley value per player plus the game's anchor payoffs. For every
// exact computation (and each telescoping sampled permutation) the values
// sum to v_full - v_empty.
struct AttributionVector {
    Vector values;
    double v_empty = 0.0;
    double v_full = 0.0;

    int players() const { return static_cast<int>(values.size()); }
    double total() const { return values.sum(); }
};

// Payoff table over all 2^n coalitions; the workhorse for axiom fixtures.
struct TabularGame {
    int n = 0;
    std::vector<double> v;  // size 1 << n, indexed by coalition mask

    double operator()(std::uint32_t mask) const { return v[mask]; }
};

namespace detail {

inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace detail

// Exact Shapley values by full coalition enumeration with the factorial
// weights |S|! (n-|S|-1)! / n!, computed as 1 / (n * C(n-1, |S|)). The game
// is any callable double(uint32_t coalition_mask); values are memoized so
// each coalition is evaluated once.
template <typename Game>
AttributionVector shapley_exact_fn(int n, Game&& game) {
    require(n >= 1, "parameter-error", "player count must be >= 1");
    require(n <= kExactPlayerLimit, "enumeration-limit",
            "exact enumeration supports at most " + std::to_string(kExactPlayerLimit) +
                " players; use shapley_sampled");

    const std::uint32_t count = 1u << n;
    std::vector<double> table(count);
    for (std::uint32_t mask = 0; mask < count; ++mask) table[mask] = game(mask);

    std::vector<double> weight(n);
    for (int s = 0; s < n; ++s) weight[s] = 1.0 / (n * detail::binomial(n - 1, s));

    AttributionVector attr;
    attr.values = Vector::Zero(n);
    attr.v_empty = table[0];
    attr.v_full = table[count - 1];
    for (std::uint32_t mask = 0; mask < count; ++mask) {
        const double w = weight[__builtin_popcount(mask)];
        for (int p = 0; p < n; ++p) {
            if (mask & (1u << p)) continue;
            attr.values[p] += w * (table[mask | (1u << p)] - table[mask]);
        }
    }
    return attr;
}

inline AttributionVector shapley_exact(const TabularGame& game) {
    return shapley_exact_fn(game.n, game);
}

namespace detail {

template <typename Game, typename Cache>
double cached_value(Game&& game, Cache& cache, std::uint32_t mask) {
    auto it = cache.find(mask);
    if (it != cache.end()) return it->second;
    double v = game(mask);
    cache.emplace(mask, v);
    return v;
}

}  // namespace detail

// Permutation-sampling Shapley estimator: averages marginal contributions
// over player orderings. When num_permutations covers n! the estimator
// enumerates every ordering exactly once and reproduces shapley_exact;
// otherwise orderings are drawn uniformly from a seeded substream, one
// stream per permutation so results do not depend on evaluation order.
template <typename Game>
AttributionVector shapley_sampled_fn(int n, Game&& game, int num_permutations,
                                     std::uint64_t seed) {
    require(n >= 1 && n < 32, "parameter-error", "player count must be in [1, 31]");
    require(num_permutations >= 1, "parameter-error", "num_permutations must be >= 1");

    std::unordered_map<std::uint32_t, double> cache;
    AttributionVector attr;
    attr.values = Vector::Zero(n);
    attr.v_empty = detail::cached_value(game, cache, 0u);
    const std::uint32_t full = (n >= 32 ? ~0u : ((1u << n) - 1u));
    attr.v_full = detail::cached_value(game, cache, full);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    double factorial = 1.0;
    bool exhaustive = false;
    if (n <= 12) {
        for (int i = 2; i <= n; ++i) factorial *= i;
        exhaustive = factorial <= static_cast<double>(num_permutations);
    }

    auto accumulate_order = [&](const std::vector<int>& perm) {
        std::uint32_t mask = 0;
        double prev = attr.v_empty;
        for (int p : perm) {
            mask |= (1u << p);
            double cur = mask == full ? attr.v_full : detail::cached_value(game, cache, mask);
            attr.values[p] += cur - prev;
            prev = cur;
        }
    };

    int used = 0;
    if (exhaustive) {
        do {
            accumulate_order(order);
            ++used;
        } while (std::next_permutation(order.begin(), order.end()));
    } else {
        for (int k = 0; k < num_permutations; ++k) {
            auto eng = rng::engine(seed, "permutation", static_cast<std::uint64_t>(k));
            std::shuffle(order.begin(), order.end(), eng);
            accumulate_order(order);
        }
        used = num_permutations;
    }
    attr.values /= static_cast<double>(used);
    return attr;
}

inline AttributionVector shapley_sampled(const TabularGame& game, int num_permutations,
                                         std::uint64_t seed) {
    return shapley_sampled_fn(game.n, game, num_permutations, seed);
}

// Players whose membership never changes the payoff.
inline std::vector<int> null_players(const TabularGame& game, double tol = 1e-9) {
    std::vector<int> out;
    const std::uint32_t count = 1u << game.n;
    for (int p = 0; p < game.n; ++p) {
        bool is_null = true;
        for (std::uint32_t mask = 0; mask < count && is_null; ++mask) {
            if (mask & (1u << p)) continue;
            if (std::abs(game.v[mask | (1u << p)] - game.v[mask]) > tol) is_null = false;
        }
        if (is_null) out.push_back(p);
    }
    return out;
}

// Unordered pairs (i, j) interchangeable in the payoff.
inline std::vector<std::pair<int, int>> symmetric_pairs(const TabularGame& game,
                                                        double tol = 1e-9) {
    std::vector<std::pair<int, int>> out;
    const std::uint32_t count = 1u << game.n;
    for (int i = 0; i < game.n; ++i) {
        for (int j = i + 1; j < game.n; ++j) {
            bool sym = true;
            for (std::uint32_t mask = 0; mask < count && sym; ++mask) {
                if (mask & ((1u << i) | (1u << j))) continue;
                if (std::abs(game.v[mask | (1u << i)] - game.v[mask | (1u << j)]) > tol)
                    sym = false;
            }
            if (sym) out.emplace_back(i, j);
        }
    }
    return out;
}

}  // namespace fshap
