#include "meanfield/rng.hpp"

namespace meanfield {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::mt19937_64 substream(std::uint64_t seed, std::string_view experiment, std::string_view name) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ fnv1a64(experiment));
  h = splitmix64(h ^ fnv1a64(name));
  return std::mt19937_64(h);
}

Eigen::VectorXd sample_sphere(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(d);
  double n2 = 0.0;
  do {
    for (int i = 0; i < d; ++i) v[i] = normal(rng);
    n2 = v.squaredNorm();
  } while (n2 == 0.0);
  return v / std::sqrt(n2);
}

}  // namespace meanfield
