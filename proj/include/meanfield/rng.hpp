#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <string_view>

namespace meanfield {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view s);

// Independent generator for (seed, experiment, substream). Adding a new
// substream name never shifts the others.
std::mt19937_64 substream(std::uint64_t seed, std::string_view experiment, std::string_view name);

// Uniform point on S^{d-1} (normalized Gaussian).
Eigen::VectorXd sample_sphere(int d, std::mt19937_64& rng);

}  // namespace meanfield
