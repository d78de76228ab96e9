#include "sphclass/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace sphclass {

namespace fs = std::filesystem;

namespace {
constexpr double kPi = 3.141592653589793238462643;
constexpr double kTwoPi = 2.0 * kPi;
}  // namespace

void LabeledDataset::validate() const {
  if (class_names.empty()) throw std::invalid_argument("datasets: no classes");
  if (clouds.size() != labels.size()) throw std::invalid_argument("datasets: label count mismatch");
  if (clouds.empty()) throw std::invalid_argument("datasets: empty dataset");
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= static_cast<int>(class_names.size()))
      throw std::invalid_argument("datasets: label out of range");
    if (clouds[i].points.empty()) throw std::invalid_argument("datasets: empty sample");
  }
}

const std::vector<std::string>& all_primitive_names() {
  static const std::vector<std::string> names = {"capsule", "cone",    "cube",   "cylinder",
                                                 "ellipsoid", "pyramid", "sphere", "torus"};
  return names;
}

PrimitiveShape shape_from_string(const std::string& name) {
  if (name == "sphere") return PrimitiveShape::sphere;
  if (name == "cube") return PrimitiveShape::cube;
  if (name == "cylinder") return PrimitiveShape::cylinder;
  if (name == "cone") return PrimitiveShape::cone;
  if (name == "torus") return PrimitiveShape::torus;
  if (name == "pyramid") return PrimitiveShape::pyramid;
  if (name == "ellipsoid") return PrimitiveShape::ellipsoid;
  if (name == "capsule") return PrimitiveShape::capsule;
  throw std::invalid_argument("datasets: unknown class name '" + name + "'");
}

std::string to_string(PrimitiveShape shape) {
  switch (shape) {
    case PrimitiveShape::sphere: return "sphere";
    case PrimitiveShape::cube: return "cube";
    case PrimitiveShape::cylinder: return "cylinder";
    case PrimitiveShape::cone: return "cone";
    case PrimitiveShape::torus: return "torus";
    case PrimitiveShape::pyramid: return "pyramid";
    case PrimitiveShape::ellipsoid: return "ellipsoid";
    case PrimitiveShape::capsule: return "capsule";
  }
  throw std::logic_error("datasets: unknown shape");
}

namespace {

struct SurfaceSample {
  Vec3 p;
  Vec3 normal;  // unit, on the canonical surface
};

Vec3 unit_sphere_dir(SplitMix64& rng) {
  const double z = rng.next_uniform(-1.0, 1.0);
  const double phi = rng.next_uniform(0.0, kTwoPi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Vec3{r * std::cos(phi), r * std::sin(phi), z};
}

SurfaceSample sample_sphere(SplitMix64& rng) {
  const Vec3 d = unit_sphere_dir(rng);
  return {d, d};
}

SurfaceSample sample_cube(SplitMix64& rng) {
  const int face = static_cast<int>(rng.next_index(6));
  const double u = rng.next_uniform(-1.0, 1.0);
  const double v = rng.next_uniform(-1.0, 1.0);
  const double s = (face % 2 == 0) ? 1.0 : -1.0;
  switch (face / 2) {
    case 0: return {{s, u, v}, {s, 0, 0}};
    case 1: return {{u, s, v}, {0, s, 0}};
    default: return {{u, v, s}, {0, 0, s}};
  }
}

SurfaceSample sample_cylinder(SplitMix64& rng) {
  constexpr double R = 0.7, H = 1.0;  // radius, half height
  const double lateral = kTwoPi * R * 2.0 * H;
  const double caps = 2.0 * kPi * R * R;
  if (rng.next_double() * (lateral + caps) < lateral) {
    const double phi = rng.next_uniform(0.0, kTwoPi);
    const double z = rng.next_uniform(-H, H);
    return {{R * std::cos(phi), R * std::sin(phi), z}, {std::cos(phi), std::sin(phi), 0.0}};
  }
  const double s = rng.next_double() < 0.5 ? 1.0 : -1.0;
  const double rad = R * std::sqrt(rng.next_double());
  const double phi = rng.next_uniform(0.0, kTwoPi);
  return {{rad * std::cos(phi), rad * std::sin(phi), s * H}, {0.0, 0.0, s}};
}

SurfaceSample sample_cone(SplitMix64& rng) {
  constexpr double R = 0.9, H = 1.8, ZTOP = 0.9;  // base radius, height, apex z
  const double slant = std::sqrt(R * R + H * H);
  const double lateral = kPi * R * slant;
  const double base = kPi * R * R;
  const double phi = rng.next_uniform(0.0, kTwoPi);
  if (rng.next_double() * (lateral + base) < lateral) {
    const double t = std::sqrt(rng.next_double());  // fraction of slant from apex
    const double rad = t * R;
    const Vec3 n{H * std::cos(phi) / slant, H * std::sin(phi) / slant, R / slant};
    return {{rad * std::cos(phi), rad * std::sin(phi), ZTOP - t * H}, n};
  }
  const double rad = R * std::sqrt(rng.next_double());
  return {{rad * std::cos(phi), rad * std::sin(phi), ZTOP - H}, {0.0, 0.0, -1.0}};
}

SurfaceSample sample_torus(SplitMix64& rng) {
  constexpr double RMAJ = 0.7, RMIN = 0.3;
  const double theta = rng.next_uniform(0.0, kTwoPi);
  double v;
  // area element ~ (RMAJ + RMIN cos v)
  for (;;) {
    v = rng.next_uniform(0.0, kTwoPi);
    const double w = (RMAJ + RMIN * std::cos(v)) / (RMAJ + RMIN);
    if (rng.next_double() < w) break;
  }
  const double ring = RMAJ + RMIN * std::cos(v);
  const Vec3 p{ring * std::cos(theta), ring * std::sin(theta), RMIN * std::sin(v)};
  const Vec3 n{std::cos(v) * std::cos(theta), std::cos(v) * std::sin(theta), std::sin(v)};
  return {p, n};
}

struct Triangle {
  Vec3 a, b, c;
  Vec3 normal;
  double area;
};

const std::vector<Triangle>& pyramid_faces() {
  static const std::vector<Triangle> faces = [] {
    constexpr double B = 0.8, ZB = -0.8, ZA = 0.8;
    const Vec3 apex{0, 0, ZA};
    const Vec3 c0{B, B, ZB}, c1{-B, B, ZB}, c2{-B, -B, ZB}, c3{B, -B, ZB};
    std::vector<std::array<Vec3, 3>> tris = {
        {c0, c1, apex}, {c1, c2, apex}, {c2, c3, apex}, {c3, c0, apex},
        {c0, c2, c1},   {c0, c3, c2},  // base split into two triangles
    };
    std::vector<Triangle> out;
    const Vec3 interior{0, 0, -0.3};
    for (const auto& t : tris) {
      const Vec3 e1{t[1].x - t[0].x, t[1].y - t[0].y, t[1].z - t[0].z};
      const Vec3 e2{t[2].x - t[0].x, t[2].y - t[0].y, t[2].z - t[0].z};
      Vec3 n{e1.y * e2.z - e1.z * e2.y, e1.z * e2.x - e1.x * e2.z, e1.x * e2.y - e1.y * e2.x};
      const double len = norm(n);
      n.x /= len;
      n.y /= len;
      n.z /= len;
      const Vec3 to_face{t[0].x - interior.x, t[0].y - interior.y, t[0].z - interior.z};
      if (n.x * to_face.x + n.y * to_face.y + n.z * to_face.z < 0) {
        n.x = -n.x;
        n.y = -n.y;
        n.z = -n.z;
      }
      out.push_back(Triangle{t[0], t[1], t[2], n, 0.5 * len});
    }
    return out;
  }();
  return faces;
}

SurfaceSample sample_pyramid(SplitMix64& rng) {
  const auto& faces = pyramid_faces();
  double total = 0.0;
  for (const Triangle& t : faces) total += t.area;
  double pick = rng.next_double() * total;
  const Triangle* tri = &faces.back();
  for (const Triangle& t : faces) {
    if (pick < t.area) {
      tri = &t;
      break;
    }
    pick -= t.area;
  }
  const double s = std::sqrt(rng.next_double());
  const double v = rng.next_double();
  const double wa = 1.0 - s, wb = s * (1.0 - v), wc = s * v;
  const Vec3 p{wa * tri->a.x + wb * tri->b.x + wc * tri->c.x,
               wa * tri->a.y + wb * tri->b.y + wc * tri->c.y,
               wa * tri->a.z + wb * tri->b.z + wc * tri->c.z};
  return {p, tri->normal};
}

SurfaceSample sample_capsule(SplitMix64& rng) {
  constexpr double R = 0.45, H = 0.65;  // radius, cylindrical half height
  const double lateral = kTwoPi * R * 2.0 * H;
  const double caps = 4.0 * kPi * R * R;
  if (rng.next_double() * (lateral + caps) < lateral) {
    const double phi = rng.next_uniform(0.0, kTwoPi);
    const double z = rng.next_uniform(-H, H);
    return {{R * std::cos(phi), R * std::sin(phi), z}, {std::cos(phi), std::sin(phi), 0.0}};
  }
  const Vec3 d = unit_sphere_dir(rng);
  const double zc = d.z >= 0.0 ? H : -H;
  return {{R * d.x, R * d.y, zc + R * d.z}, d};
}

// Ellipsoid base semi-axes; chosen pronounced enough that a random per-axis
// scale in [0.6, 1] cannot make it look like a scaled sphere.
constexpr double kEllipsoidAxes[3] = {1.0, 0.5, 0.25};

bool is_centrally_symmetric(PrimitiveShape shape) {
  return shape != PrimitiveShape::cone && shape != PrimitiveShape::pyramid;
}

SurfaceSample sample_canonical(PrimitiveShape shape, SplitMix64& rng) {
  switch (shape) {
    case PrimitiveShape::sphere:
    case PrimitiveShape::ellipsoid: return sample_sphere(rng);
    case PrimitiveShape::cube: return sample_cube(rng);
    case PrimitiveShape::cylinder: return sample_cylinder(rng);
    case PrimitiveShape::cone: return sample_cone(rng);
    case PrimitiveShape::torus: return sample_torus(rng);
    case PrimitiveShape::pyramid: return sample_pyramid(rng);
    case PrimitiveShape::capsule: return sample_capsule(rng);
  }
  throw std::logic_error("datasets: unknown shape");
}

}  // namespace

PointCloud sample_primitive(PrimitiveShape shape, int n_points, const Vec3& axis_scale,
                            double z_rotation, SplitMix64& rng) {
  if (n_points < 1) throw std::invalid_argument("datasets: n_points must be >= 1");
  if (axis_scale.x <= 0 || axis_scale.y <= 0 || axis_scale.z <= 0)
    throw std::invalid_argument("datasets: axis scale must be positive");

  // Effective linear map on the canonical surface; the ellipsoid folds its
  // base axes into the map and samples the unit sphere.
  Vec3 s = axis_scale;
  if (shape == PrimitiveShape::ellipsoid) {
    s.x *= kEllipsoidAxes[0];
    s.y *= kEllipsoidAxes[1];
    s.z *= kEllipsoidAxes[2];
  }
  const double min_s = std::min({s.x, s.y, s.z});
  const bool symmetric = is_centrally_symmetric(shape);

  PointCloud pc;
  pc.points.reserve(n_points);
  while (static_cast<int>(pc.points.size()) < n_points) {
    const SurfaceSample cand = sample_canonical(shape, rng);
    // Area distortion of the scaling along this normal; rejection keeps the
    // sample area-uniform on the scaled surface.
    const double nx = cand.normal.x / s.x;
    const double ny = cand.normal.y / s.y;
    const double nz = cand.normal.z / s.z;
    const double w = min_s * std::sqrt(nx * nx + ny * ny + nz * nz);
    if (rng.next_double() >= w) continue;
    const Vec3 p{cand.p.x * s.x, cand.p.y * s.y, cand.p.z * s.z};
    pc.points.push_back(p);
    // Antipodal partner: keeps the centroid of centrally symmetric shapes at
    // exactly zero, so unit-ball normalization does not shift them.
    if (symmetric && static_cast<int>(pc.points.size()) < n_points) {
      pc.points.push_back(Vec3{-p.x, -p.y, -p.z});
    }
  }
  return rotate_z(pc, z_rotation);
}

LabeledDataset generate_primitives(const GenerateConfig& cfg) {
  if (cfg.per_class < 1) throw std::invalid_argument("datasets: per_class must be >= 1");
  if (cfg.points < 64) throw std::invalid_argument("datasets: points must be >= 64");
  if (cfg.classes.empty()) throw std::invalid_argument("datasets: no classes requested");

  std::vector<std::string> names = cfg.classes;
  std::sort(names.begin(), names.end());
  for (const std::string& n : names) shape_from_string(n);  // validate early

  LabeledDataset ds;
  ds.class_names = names;
  ds.clouds.reserve(names.size() * cfg.per_class);
  ds.labels.reserve(names.size() * cfg.per_class);
  for (std::size_t ci = 0; ci < names.size(); ++ci) {
    const PrimitiveShape shape = shape_from_string(names[ci]);
    for (int si = 0; si < cfg.per_class; ++si) {
      SplitMix64 rng(derive_seed(derive_seed(cfg.seed, ci), static_cast<std::uint64_t>(si)));
      const Vec3 scale{rng.next_uniform(0.6, 1.0), rng.next_uniform(0.6, 1.0),
                       rng.next_uniform(0.6, 1.0)};
      const double rot = rng.next_uniform(0.0, kTwoPi);
      PointCloud pc = sample_primitive(shape, cfg.points, scale, rot, rng);
      pc = normalize_unit_ball(pc);
      pc.label = static_cast<int>(ci);
      ds.clouds.push_back(std::move(pc));
      ds.labels.push_back(static_cast<int>(ci));
    }
  }
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& dataset,
                                                        double test_fraction,
                                                        std::uint64_t seed) {
  dataset.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("datasets: test_fraction must be in (0,1)");

  LabeledDataset train, test;
  train.class_names = test.class_names = dataset.class_names;
  train.split = Split::train;
  test.split = Split::test;

  for (std::size_t ci = 0; ci < dataset.class_names.size(); ++ci) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.labels[i] == static_cast<int>(ci)) idx.push_back(i);
    }
    SplitMix64 rng(derive_seed(seed, 0x53504c54ULL + ci));
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      const std::size_t j = rng.next_index(i + 1);
      std::swap(idx[i], idx[j]);
    }
    const std::size_t n_test =
        static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size())));
    std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + n_test);
    std::vector<std::size_t> train_idx(idx.begin() + n_test, idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    for (const std::size_t i : train_idx) {
      train.clouds.push_back(dataset.clouds[i]);
      train.labels.push_back(dataset.labels[i]);
    }
    for (const std::size_t i : test_idx) {
      test.clouds.push_back(dataset.clouds[i]);
      test.labels.push_back(dataset.labels[i]);
    }
  }
  return {std::move(train), std::move(test)};
}

LabeledDataset load_dataset(const std::string& root, Split split) {
  if (!fs::is_directory(root)) throw std::runtime_error("datasets: no such directory " + root);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw std::runtime_error("datasets: no classes in " + root);

  const std::string split_name = split == Split::train ? "train" : "test";
  LabeledDataset ds;
  ds.class_names = names;
  ds.split = split;
  for (std::size_t ci = 0; ci < names.size(); ++ci) {
    const fs::path dir = fs::path(root) / names[ci] / split_name;
    if (!fs::is_directory(dir))
      throw std::runtime_error("datasets: missing split directory " + dir.string());
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".txt" || ext == ".bin") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw std::runtime_error("datasets: class '" + names[ci] + "' has no samples");
    for (const std::string& f : files) {
      PointCloud pc = normalize_unit_ball(load_point_cloud(f));
      pc.label = static_cast<int>(ci);
      ds.clouds.push_back(std::move(pc));
      ds.labels.push_back(static_cast<int>(ci));
    }
  }
  return ds;
}

void save_dataset(const LabeledDataset& train, const LabeledDataset& test,
                  const std::string& root, const GenerateConfig& cfg) {
  train.validate();
  test.validate();
  if (train.class_names != test.class_names)
    throw std::invalid_argument("datasets: split class mismatch");

  auto write_split = [&](const LabeledDataset& ds, const std::string& split_name) {
    std::vector<int> counter(ds.class_names.size(), 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::string& cls = ds.class_names[ds.labels[i]];
      const fs::path dir = fs::path(root) / cls / split_name;
      fs::create_directories(dir);
      char name[32];
      std::snprintf(name, sizeof(name), "cloud_%05d.bin", counter[ds.labels[i]]++);
      save_point_cloud_binary(ds.clouds[i], (dir / name).string());
    }
  };
  write_split(train, "train");
  write_split(test, "test");

  nlohmann::json manifest;
  manifest["classes"] = train.class_names;
  manifest["per_class"] = cfg.per_class;
  manifest["points"] = cfg.points;
  manifest["seed"] = cfg.seed;
  manifest["train_samples"] = train.size();
  manifest["test_samples"] = test.size();
  manifest["format"] = "SPC1";
  std::ofstream os(fs::path(root) / "manifest.json");
  if (!os) throw std::runtime_error("datasets: cannot write manifest");
  os << manifest.dump(2) << '\n';
}

std::uint64_t dataset_hash(const LabeledDataset& dataset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&h](const void* data, std::size_t len) {
    const unsigned char* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const std::string& name : dataset.class_names) mix_bytes(name.data(), name.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    mix_bytes(&dataset.labels[i], sizeof(int));
    mix_bytes(dataset.clouds[i].points.data(), dataset.clouds[i].points.size() * sizeof(Vec3));
  }
  return h;
}

}  // namespace sphclass
