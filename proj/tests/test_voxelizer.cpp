#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "sphclass/point_cloud.hpp"
#include "sphclass/rng.hpp"
#include "sphclass/voxel_grid.hpp"

using namespace sphclass;

namespace {

constexpr double kPi = 3.141592653589793238462643;

PointCloud uniform_ball_cloud(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  PointCloud pc;
  pc.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rng.next_uniform(-1.0, 1.0);
    const double phi = rng.next_uniform(0.0, 2.0 * kPi);
    const double r = std::cbrt(rng.next_double());
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    pc.points.push_back(Vec3{r * s * std::cos(phi), r * s * std::sin(phi), r * z});
  }
  return pc;
}

double grid_sum(const SphericalVoxelGrid& g) {
  double acc = 0.0;
  for (const double v : g.values) acc += v;
  return acc;
}

}  // namespace

TEST_CASE("single pole point lands in the outermost shell, first theta row") {
  PointCloud pc;
  pc.points = {{0, 0, 1}};
  GridSpec spec;
  spec.shells = 7;
  spec.resolution = 64;
  const SphericalVoxelGrid grid = voxelize(pc, spec);
  CHECK(grid.at(6, 0, 0) == 1.0);
  CHECK(grid_sum(grid) == 1.0);
}

TEST_CASE("coincident points: density counts, binary flags") {
  PointCloud pc;
  pc.points = {{0.3, 0.2, 0.5}, {0.3, 0.2, 0.5}};
  GridSpec spec;
  spec.shells = 4;
  spec.resolution = 16;
  spec.mode = OccupancyMode::density;
  CHECK(grid_sum(voxelize(pc, spec)) == 2.0);
  spec.mode = OccupancyMode::binary;
  CHECK(grid_sum(voxelize(pc, spec)) == 1.0);
}

TEST_CASE("origin point maps to cell (0,0,0)") {
  PointCloud pc;
  pc.points = {{0, 0, 0}};
  GridSpec spec;
  spec.shells = 3;
  spec.resolution = 8;
  const SphericalVoxelGrid grid = voxelize(pc, spec);
  CHECK(grid.at(0, 0, 0) == 1.0);
}

TEST_CASE("points outside the unit ball are rejected") {
  PointCloud pc;
  pc.points = {{1.1, 0, 0}};
  GridSpec spec;
  CHECK_THROWS(voxelize(pc, spec));
}

TEST_CASE("boundary radius 1 is clamped into the outermost shell") {
  PointCloud pc;
  pc.points = {{1.0, 0, 0}};
  GridSpec spec;
  spec.shells = 5;
  spec.resolution = 16;
  const SphericalVoxelGrid grid = voxelize(pc, spec);
  double outer = 0.0;
  for (int j = 0; j < 16; ++j)
    for (int k = 0; k < 16; ++k) outer += grid.at(4, j, k);
  CHECK(outer == 1.0);
}

TEST_CASE("uniform ball sample: shell totals follow shell volumes") {
  const std::size_t n = 100000;
  const PointCloud pc = uniform_ball_cloud(n, 77);
  GridSpec spec;
  spec.shells = 7;
  spec.resolution = 16;
  const SphericalVoxelGrid grid = voxelize(pc, spec);
  for (int s = 0; s < spec.shells; ++s) {
    double total = 0.0;
    for (int j = 0; j < spec.resolution; ++j)
      for (int k = 0; k < spec.resolution; ++k) total += grid.at(s, j, k);
    const double p = (std::pow(s + 1.0, 3) - std::pow(s, 3)) / std::pow(7.0, 3);
    const double sigma = std::sqrt(n * p * (1.0 - p));
    CHECK(std::abs(total - n * p) < 3.0 * sigma);
  }
}

TEST_CASE("grid-aligned z rotation circularly shifts the phi axis exactly") {
  const PointCloud pc = normalize_unit_ball(uniform_ball_cloud(4096, 123));
  GridSpec spec;
  spec.shells = 5;
  spec.resolution = 32;
  const SphericalVoxelGrid base = voxelize(pc, spec);

  const int t = 5;
  const PointCloud rotated = rotate_z(pc, 2.0 * kPi * t / spec.resolution);
  const SphericalVoxelGrid shifted = voxelize(rotated, spec);

  for (int s = 0; s < spec.shells; ++s) {
    for (int j = 0; j < spec.resolution; ++j) {
      for (int k = 0; k < spec.resolution; ++k) {
        CHECK(shifted.at(s, j, (k + t) % spec.resolution) == base.at(s, j, k));
      }
    }
  }
  CHECK(grid_sum(base) == grid_sum(shifted));
}

TEST_CASE("binary equals clamped density") {
  const PointCloud pc = uniform_ball_cloud(2000, 9);
  GridSpec spec;
  spec.shells = 4;
  spec.resolution = 16;
  spec.mode = OccupancyMode::density;
  const SphericalVoxelGrid density = voxelize(pc, spec);
  spec.mode = OccupancyMode::binary;
  const SphericalVoxelGrid binary = voxelize(pc, spec);
  for (std::size_t i = 0; i < density.values.size(); ++i) {
    CHECK(binary.values[i] == std::min(density.values[i], 1.0));
  }
}

TEST_CASE("shell_signal extracts slices and stacking reproduces the grid") {
  const PointCloud pc = uniform_ball_cloud(500, 15);
  GridSpec spec;
  spec.shells = 3;
  spec.resolution = 8;
  const SphericalVoxelGrid grid = voxelize(pc, spec);

  for (int s = 0; s < spec.shells; ++s) {
    const SphericalSignal sig = shell_signal(grid, s);
    for (int j = 0; j < spec.resolution; ++j)
      for (int k = 0; k < spec.resolution; ++k) CHECK(sig.at(j, k) == grid.at(s, j, k));
  }
  CHECK_THROWS(shell_signal(grid, 3));
  CHECK_THROWS(shell_signal(grid, -1));
}

TEST_CASE("empty shell yields an all-zero signal") {
  PointCloud pc;
  pc.points = {{0, 0, 0.9}};  // outermost shell only
  GridSpec spec;
  spec.shells = 3;
  spec.resolution = 8;
  const SphericalVoxelGrid grid = voxelize(pc, spec);
  const SphericalSignal inner = shell_signal(grid, 0);
  for (const double v : inner.values) CHECK(v == 0.0);
}

TEST_CASE("grid dump round trip") {
  const PointCloud pc = uniform_ball_cloud(300, 4);
  GridSpec spec;
  spec.shells = 3;
  spec.resolution = 8;
  const SphericalVoxelGrid grid = voxelize(pc, spec);
  save_grid(grid, "vox_test.grid");
  const SphericalVoxelGrid loaded = load_grid("vox_test.grid");
  CHECK(loaded.spec.shells == 3);
  CHECK(loaded.spec.resolution == 8);
  REQUIRE(loaded.values.size() == grid.values.size());
  for (std::size_t i = 0; i < grid.values.size(); ++i) CHECK(loaded.values[i] == grid.values[i]);
  std::remove("vox_test.grid");
}

TEST_CASE("grid spec validation") {
  GridSpec spec;
  spec.shells = 0;
  CHECK_THROWS(spec.validate());
  spec.shells = 1;
  spec.resolution = 9;
  CHECK_THROWS(spec.validate());
}
