#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ringsim {

std::uint64_t splitmix64(std::uint64_t x);

// Independent child seed for an indexed draw.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

// Named substream ("device-gen", "noise", "training-init", "data-gen").
std::uint64_t substream_seed(std::uint64_t root, std::string_view name);

using Rng = std::mt19937_64;

} // namespace ringsim
