#pragma once

#include <string>
#include <vector>

#include "sphclass/point_cloud.hpp"
#include "sphclass/sht.hpp"

namespace sphclass {

enum class OccupancyMode { density, binary };

struct GridSpec {
  int shells = 7;
  int resolution = 64;  // n x n cells per shell; must be even
  OccupancyMode mode = OccupancyMode::density;

  void validate() const;
};

// c concentric shells of equal radial width over [0,1], each an n x n
// equiangular (theta, phi) grid. Density mode holds point counts, binary
// mode holds presence flags.
struct SphericalVoxelGrid {
  GridSpec spec;
  std::vector<double> values;  // row-major (shell, theta, phi)

  double& at(int s, int j, int k) {
    return values[(static_cast<std::size_t>(s) * spec.resolution + j) * spec.resolution + k];
  }
  double at(int s, int j, int k) const {
    return values[(static_cast<std::size_t>(s) * spec.resolution + j) * spec.resolution + k];
  }
};

// Bin a unit-ball-normalized cloud onto the grid. Throws if any point lies
// outside radius 1 + 1e-9. Points exactly at the origin map to cell (0,0,0);
// the boundary r = 1 maps into the outermost shell.
SphericalVoxelGrid voxelize(const PointCloud& pc, const GridSpec& spec);

// One shell's n x n slice as a spherical signal.
SphericalSignal shell_signal(const SphericalVoxelGrid& grid, int shell_index);

// Debug dump: magic "SVG1", u32 shells, u32 resolution, then
// shells*n*n float32 little-endian, row-major (shell, theta, phi).
void save_grid(const SphericalVoxelGrid& grid, const std::string& path);
SphericalVoxelGrid load_grid(const std::string& path);

}  // namespace sphclass
