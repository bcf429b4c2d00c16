#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "wsfn/measure.hpp"

namespace wsfn {

// Every random draw in the toolkit goes through a 64-bit Mersenne twister
// seeded from a std::seed_seq over (seed, stream ids...) and
// std::normal_distribution. Results are reproducible within a build.
using Rng = std::mt19937_64;

Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {});

double standard_normal(Rng& rng);

/// Matrix of i.i.d. N(0, 1) entries, filled row by row.
RowMatrix standard_normal_matrix(Index rows, Index cols, Rng& rng);

}  // namespace wsfn
