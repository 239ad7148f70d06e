#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qom {

using Rng = std::mt19937_64;

/// Seed for a named substream of `root`. Different names give unrelated
/// streams, so adding a consumer never perturbs the others.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name);

inline Rng make_rng(std::uint64_t root, std::string_view name) {
  return Rng(derive_seed(root, name));
}

}  // namespace qom
