#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace sphclass {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

// Ordered set of 3D points at unit-ball scale; the substrate every other
// module consumes.
struct PointCloud {
  std::vector<Vec3> points;
  std::optional<int> label;

  std::size_t size() const { return points.size(); }
};

// Translate the centroid to the origin, then scale uniformly so the farthest
// point has radius exactly 1. Throws on an empty or degenerate (all points
// coincident) cloud.
PointCloud normalize_unit_ball(const PointCloud& pc);

// Rotate about the z axis; z coordinates and distances to the axis are
// preserved exactly.
PointCloud rotate_z(const PointCloud& pc, double angle);

// Project any point with radius > 1 radially onto the unit sphere, leaving
// everything else untouched. This is the pipeline rule for augmented clouds:
// it keeps them inside the voxel grid without letting a single far outlier
// rescale the whole shape.
PointCloud clip_to_unit_ball(const PointCloud& pc);

// File formats: plain text with one "x y z" triple per line, or binary with
// magic "SPC1", u32 little-endian count, then count*3 float32 little-endian.
// The loader auto-detects by magic.
PointCloud load_point_cloud(const std::string& path);
void save_point_cloud_text(const PointCloud& pc, const std::string& path);
void save_point_cloud_binary(const PointCloud& pc, const std::string& path);

}  // namespace sphclass
