#include "sphclass/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sphclass/rng.hpp"

namespace sphclass {

void AugmentationConfig::validate() const {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("augment: fraction must be in [0,1]");
  if (sigma < 0.0) throw std::invalid_argument("augment: sigma must be >= 0");
  if (cluster_size < 1) throw std::invalid_argument("augment: cluster_size must be >= 1");
}

namespace {

// First k entries of a seeded partial Fisher-Yates shuffle of 0..n-1,
// returned in ascending order so downstream draws happen in a fixed order.
std::vector<std::size_t> pick_indices(std::size_t n, std::size_t k, SplitMix64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.next_index(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

PointCloud add_gaussian_noise(const PointCloud& pc, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("augment: sigma must be >= 0");
  if (sigma == 0.0) return pc;
  SplitMix64 rng(seed);
  PointCloud out = pc;
  for (Vec3& p : out.points) {
    p.x += sigma * rng.next_normal();
    p.y += sigma * rng.next_normal();
    p.z += sigma * rng.next_normal();
  }
  return out;
}

PointCloud add_uniform_outliers(const PointCloud& pc, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("augment: fraction must be in [0,1]");
  const std::size_t n = pc.points.size();
  const std::size_t k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (k == 0) return pc;
  SplitMix64 rng(seed);
  const std::vector<std::size_t> replaced = pick_indices(n, k, rng);
  PointCloud out = pc;
  for (const std::size_t i : replaced) {
    out.points[i].x = rng.next_uniform(-1.0, 1.0);
    out.points[i].y = rng.next_uniform(-1.0, 1.0);
    out.points[i].z = rng.next_uniform(-1.0, 1.0);
  }
  return out;
}

PointCloud add_clustered_outliers(const PointCloud& pc, double fraction, int cluster_size,
                                  double cluster_sigma, std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("augment: fraction must be in [0,1]");
  if (cluster_size < 1) throw std::invalid_argument("augment: cluster_size must be >= 1");
  if (cluster_sigma < 0.0) throw std::invalid_argument("augment: sigma must be >= 0");

  const std::size_t n = pc.points.size();
  const double budget = fraction * static_cast<double>(n);
  if (static_cast<double>(cluster_size) > budget)
    throw std::invalid_argument("augment: no full cluster fits");
  const std::size_t clusters = static_cast<std::size_t>(budget / cluster_size);
  const std::size_t k = clusters * static_cast<std::size_t>(cluster_size);

  SplitMix64 rng(seed);
  const std::vector<std::size_t> replaced = pick_indices(n, k, rng);
  PointCloud out = pc;
  std::size_t slot = 0;
  for (std::size_t c = 0; c < clusters; ++c) {
    const Vec3 center{rng.next_uniform(-1.0, 1.0), rng.next_uniform(-1.0, 1.0),
                      rng.next_uniform(-1.0, 1.0)};
    for (int j = 0; j < cluster_size; ++j) {
      Vec3& p = out.points[replaced[slot++]];
      p.x = center.x + cluster_sigma * rng.next_normal();
      p.y = center.y + cluster_sigma * rng.next_normal();
      p.z = center.z + cluster_sigma * rng.next_normal();
    }
  }
  return out;
}

PointCloud random_dropout(const PointCloud& pc, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw std::invalid_argument("augment: dropout fraction must be in [0,1)");
  const std::size_t n = pc.points.size();
  const std::size_t k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (k == 0) return pc;
  if (k >= n) throw std::invalid_argument("augment: dropout would empty the cloud");

  SplitMix64 rng(seed);
  const std::vector<std::size_t> dropped = pick_indices(n, k, rng);
  PointCloud out;
  out.label = pc.label;
  out.points.reserve(n - k);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (next < dropped.size() && dropped[next] == i) {
      ++next;
      continue;
    }
    out.points.push_back(pc.points[i]);
  }
  return out;
}

PointCloud apply_augmentation(const PointCloud& pc, const AugmentationConfig& cfg) {
  cfg.validate();
  switch (cfg.kind) {
    case AugmentKind::none:
      return pc;
    case AugmentKind::gaussian_noise:
      return add_gaussian_noise(pc, cfg.sigma, cfg.seed);
    case AugmentKind::uniform_outliers:
      return add_uniform_outliers(pc, cfg.fraction, cfg.seed);
    case AugmentKind::clustered_outliers:
      return add_clustered_outliers(pc, cfg.fraction, cfg.cluster_size, cfg.sigma, cfg.seed);
    case AugmentKind::dropout:
      return random_dropout(pc, cfg.fraction, cfg.seed);
  }
  throw std::logic_error("augment: unknown kind");
}

}  // namespace sphclass
