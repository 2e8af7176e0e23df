#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace decqn {

// Error taxonomy. Configuration errors are setup mistakes (bad shapes, bad
// option values), data errors come from malformed external inputs (files,
// out-of-range actions), numeric errors abort a run (non-finite values in the
// learner), logic errors are broken internal preconditions.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LogicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MemoryBudgetError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Derives a decorrelated per-component seed from one master seed (splitmix64
// finalizer). Component streams get distinct ids so that, e.g., exploration
// noise and replay sampling never share a generator state.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Stream ids for derive_seed.
inline constexpr std::uint64_t kStreamNetworkInit = 1;
inline constexpr std::uint64_t kStreamExploration = 2;
inline constexpr std::uint64_t kStreamReplay = 3;
inline constexpr std::uint64_t kStreamEnv = 4;
inline constexpr std::uint64_t kStreamEvalEnv = 5;
inline constexpr std::uint64_t kStreamNoise = 6;

template <typename T>
bool all_finite(std::span<const T> v) {
  for (const T& x : v) {
    if (!std::isfinite(static_cast<double>(x))) return false;
  }
  return true;
}

}  // namespace decqn
