// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace latproc {

// Thrown when a caller violates a documented precondition.
struct invalid_input : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown for malformed external data (files, rows).
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when a numerical routine cannot produce a finite result.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent seeds from a master
// seed and a stream index.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(mix_seed(seed, stream));
}

}  // namespace latproc
