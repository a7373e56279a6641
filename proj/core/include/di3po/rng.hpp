#pragma once

#include <cstdint>
#include <random>

#include "di3po/grid.hpp"

namespace di3po {

/// splitmix64 step; used to derive independent child seeds from a master
/// seed so that parallel stages stay deterministic regardless of scheduling.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic child seed for a (seed, stream) pair.
inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream));
}

inline std::mt19937_64 make_engine(uint64_t seed) { return std::mt19937_64(seed); }

/// Standard normal grid draw, deterministic given the seed.
inline Grid gaussian_grid(int w, int h, uint64_t seed) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Grid g(w, h);
    for (auto& v : g.values) v = n(eng);
    return g;
}

}  // namespace di3po
