#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stfmri {

/// splitmix64 finalizer; a bijection on 64-bit words.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent stream seed from (root seed, stage tag, unit id).
/// The derivation is pure, so a unit gets the same stream no matter which
/// worker runs it or in what order.
std::uint64_t stream_seed(std::uint64_t root, std::string_view stage, std::uint64_t unit);

/// Generator for one (stage, unit) pair.
std::mt19937_64 make_stream(std::uint64_t root, std::string_view stage, std::uint64_t unit);

}  // namespace stfmri
