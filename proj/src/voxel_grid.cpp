#include "sphclass/voxel_grid.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "sphclass/binary_io.hpp"

namespace sphclass {

namespace {
constexpr double kPi = 3.141592653589793238462643;
constexpr double kTwoPi = 2.0 * kPi;
}  // namespace

void GridSpec::validate() const {
  if (shells < 1) throw std::invalid_argument("voxelizer: shells must be >= 1");
  if (resolution < 2 || (resolution % 2) != 0)
    throw std::invalid_argument("voxelizer: resolution must be a positive even integer");
}

SphericalVoxelGrid voxelize(const PointCloud& pc, const GridSpec& spec) {
  spec.validate();
  const int c = spec.shells;
  const int n = spec.resolution;

  SphericalVoxelGrid grid;
  grid.spec = spec;
  grid.values.assign(static_cast<std::size_t>(c) * n * n, 0.0);

  for (const Vec3& p : pc.points) {
    const double r = norm(p);
    if (r > 1.0 + 1e-9) throw std::invalid_argument("voxelizer: point outside unit ball");

    int s = 0, j = 0, k = 0;
    if (r > 0.0) {
      s = std::min(static_cast<int>(r * c), c - 1);
      const double theta = std::acos(std::min(1.0, std::max(-1.0, p.z / r)));
      j = std::min(static_cast<int>(theta * n / kPi), n - 1);
      double phi = std::atan2(p.y, p.x);
      if (phi < 0.0) phi += kTwoPi;
      k = std::min(static_cast<int>(phi * n / kTwoPi), n - 1);
    }
    double& cell = grid.at(s, j, k);
    if (spec.mode == OccupancyMode::density)
      cell += 1.0;
    else
      cell = 1.0;
  }
  return grid;
}

SphericalSignal shell_signal(const SphericalVoxelGrid& grid, int shell_index) {
  const int c = grid.spec.shells;
  const int n = grid.spec.resolution;
  if (shell_index < 0 || shell_index >= c)
    throw std::out_of_range("voxelizer: shell index out of range");

  SphericalSignal sig(n);
  const double* src = grid.values.data() + static_cast<std::size_t>(shell_index) * n * n;
  std::memcpy(sig.values.data(), src, sizeof(double) * n * n);
  return sig;
}

void save_grid(const SphericalVoxelGrid& grid, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("voxelizer: cannot write " + path);
  os.write("SVG1", 4);
  io::put_u32(os, static_cast<std::uint32_t>(grid.spec.shells));
  io::put_u32(os, static_cast<std::uint32_t>(grid.spec.resolution));
  for (const double v : grid.values) io::put_f32(os, static_cast<float>(v));
}

SphericalVoxelGrid load_grid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("voxelizer: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SVG1", 4) != 0)
    throw std::runtime_error("voxelizer: bad grid magic in " + path);

  SphericalVoxelGrid grid;
  grid.spec.shells = static_cast<int>(io::get_u32(is));
  grid.spec.resolution = static_cast<int>(io::get_u32(is));
  grid.spec.validate();
  const std::size_t count = static_cast<std::size_t>(grid.spec.shells) * grid.spec.resolution *
                            grid.spec.resolution;
  grid.values.resize(count);
  for (double& v : grid.values) v = io::get_f32(is);
  return grid;
}

}  // namespace sphclass
