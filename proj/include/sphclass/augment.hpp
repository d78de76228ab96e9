#pragma once

#include <cstdint>

#include "sphclass/point_cloud.hpp"

namespace sphclass {

enum class AugmentKind { none, gaussian_noise, uniform_outliers, clustered_outliers, dropout };

struct AugmentationConfig {
  AugmentKind kind = AugmentKind::none;
  double sigma = 0.0;     // noise std, or cluster member std for clustered outliers
  double fraction = 0.0;  // outlier or dropout fraction
  int cluster_size = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

// All generators are deterministic functions of (input, parameters, seed);
// the same seed yields bitwise-identical output.

// Perturb every coordinate with i.i.d. zero-mean normal noise of std sigma.
PointCloud add_gaussian_noise(const PointCloud& pc, double sigma, std::uint64_t seed);

// Replace round(fraction*N) points, chosen uniformly without repetition, by
// points uniform in [-1,1]^3. Point count is unchanged.
PointCloud add_uniform_outliers(const PointCloud& pc, double fraction, std::uint64_t seed);

// Replace floor(fraction*N / cluster_size) whole clusters of points; cluster
// centers uniform in [-1,1]^3, members normal around the center with std
// cluster_sigma. Point count is unchanged.
PointCloud add_clustered_outliers(const PointCloud& pc, double fraction, int cluster_size,
                                  double cluster_sigma, std::uint64_t seed);

// Remove round(fraction*N) points uniformly at random, preserving the order
// of the survivors.
PointCloud random_dropout(const PointCloud& pc, double fraction, std::uint64_t seed);

PointCloud apply_augmentation(const PointCloud& pc, const AugmentationConfig& cfg);

}  // namespace sphclass
