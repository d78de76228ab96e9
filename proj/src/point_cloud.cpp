#include "sphclass/point_cloud.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sphclass {

PointCloud normalize_unit_ball(const PointCloud& pc) {
  if (pc.points.empty()) throw std::invalid_argument("normalize_unit_ball: empty cloud");

  Vec3 centroid;
  for (const Vec3& p : pc.points) {
    centroid.x += p.x;
    centroid.y += p.y;
    centroid.z += p.z;
  }
  const double inv_n = 1.0 / static_cast<double>(pc.points.size());
  centroid.x *= inv_n;
  centroid.y *= inv_n;
  centroid.z *= inv_n;

  PointCloud out;
  out.label = pc.label;
  out.points.reserve(pc.points.size());
  double max_r = 0.0;
  for (const Vec3& p : pc.points) {
    const Vec3 q{p.x - centroid.x, p.y - centroid.y, p.z - centroid.z};
    max_r = std::max(max_r, norm(q));
    out.points.push_back(q);
  }
  if (max_r == 0.0) throw std::invalid_argument("normalize_unit_ball: degenerate cloud");

  const double s = 1.0 / max_r;
  for (Vec3& p : out.points) {
    p.x *= s;
    p.y *= s;
    p.z *= s;
  }
  return out;
}

PointCloud clip_to_unit_ball(const PointCloud& pc) {
  PointCloud out = pc;
  for (Vec3& p : out.points) {
    const double r = norm(p);
    if (r > 1.0) {
      const double s = 1.0 / r;
      p.x *= s;
      p.y *= s;
      p.z *= s;
    }
  }
  return out;
}

PointCloud rotate_z(const PointCloud& pc, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  PointCloud out;
  out.label = pc.label;
  out.points.reserve(pc.points.size());
  for (const Vec3& p : pc.points) {
    out.points.push_back(Vec3{c * p.x - s * p.y, s * p.x + c * p.y, p.z});
  }
  return out;
}

namespace {

constexpr char kCloudMagic[4] = {'S', 'P', 'C', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("point_cloud: truncated file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

float get_f32(std::istream& is) {
  const std::uint32_t bits = get_u32(is);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

PointCloud load_point_cloud(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("point_cloud: cannot open " + path);

  char magic[4] = {0, 0, 0, 0};
  is.read(magic, 4);
  PointCloud pc;
  if (is.gcount() == 4 && std::memcmp(magic, kCloudMagic, 4) == 0) {
    const std::uint32_t count = get_u32(is);
    pc.points.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const double x = get_f32(is);
      const double y = get_f32(is);
      const double z = get_f32(is);
      pc.points.push_back(Vec3{x, y, z});
    }
    return pc;
  }

  is.clear();
  is.seekg(0);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x >> p.y >> p.z)) {
      throw std::runtime_error("point_cloud: bad line " + std::to_string(lineno) + " in " + path);
    }
    pc.points.push_back(p);
  }
  if (pc.points.empty()) throw std::runtime_error("point_cloud: no points in " + path);
  return pc;
}

void save_point_cloud_text(const PointCloud& pc, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("point_cloud: cannot write " + path);
  os.precision(17);
  for (const Vec3& p : pc.points) os << p.x << ' ' << p.y << ' ' << p.z << '\n';
}

void save_point_cloud_binary(const PointCloud& pc, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("point_cloud: cannot write " + path);
  os.write(kCloudMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(pc.points.size()));
  for (const Vec3& p : pc.points) {
    put_f32(os, static_cast<float>(p.x));
    put_f32(os, static_cast<float>(p.y));
    put_f32(os, static_cast<float>(p.z));
  }
}

}  // namespace sphclass
