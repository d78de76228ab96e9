#include <cmath>
#include <cstdio>
#include <set>
#include <string>

#include "doctest.h"
#include "sphclass/augment.hpp"
#include "sphclass/point_cloud.hpp"
#include "sphclass/rng.hpp"

using namespace sphclass;

namespace {

PointCloud random_cube_cloud(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  PointCloud pc;
  pc.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    pc.points.push_back(Vec3{rng.next_uniform(-1.0, 1.0), rng.next_uniform(-1.0, 1.0),
                             rng.next_uniform(-1.0, 1.0)});
  }
  return pc;
}

bool clouds_identical(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.points[i].x != b.points[i].x || a.points[i].y != b.points[i].y ||
        a.points[i].z != b.points[i].z)
      return false;
  }
  return true;
}

std::size_t count_changed(const PointCloud& a, const PointCloud& b) {
  std::size_t changed = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.points[i].x != b.points[i].x || a.points[i].y != b.points[i].y ||
        a.points[i].z != b.points[i].z)
      ++changed;
  }
  return changed;
}

}  // namespace

TEST_CASE("normalize_unit_ball on already-normalized pair is the identity") {
  PointCloud pc;
  pc.points = {{1, 0, 0}, {-1, 0, 0}};
  const PointCloud out = normalize_unit_ball(pc);
  CHECK(out.points[0].x == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(out.points[1].x == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(out.points[0].y == 0.0);
}

TEST_CASE("normalize_unit_ball recenters and rescales") {
  PointCloud pc;
  pc.points = {{2, 0, 0}, {0, 0, 0}};
  const PointCloud out = normalize_unit_ball(pc);
  CHECK(out.points[0].x == doctest::Approx(1.0));
  CHECK(out.points[1].x == doctest::Approx(-1.0));
}

TEST_CASE("normalize_unit_ball puts the farthest point at radius 1") {
  const PointCloud pc = normalize_unit_ball(random_cube_cloud(2048, 11));
  double max_r = 0.0;
  for (const Vec3& p : pc.points) max_r = std::max(max_r, norm(p));
  CHECK(std::abs(max_r - 1.0) < 1e-12);
}

TEST_CASE("normalize_unit_ball is idempotent") {
  const PointCloud once = normalize_unit_ball(random_cube_cloud(512, 3));
  const PointCloud twice = normalize_unit_ball(once);
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(std::abs(once.points[i].x - twice.points[i].x) < 1e-12);
    CHECK(std::abs(once.points[i].y - twice.points[i].y) < 1e-12);
    CHECK(std::abs(once.points[i].z - twice.points[i].z) < 1e-12);
  }
}

TEST_CASE("normalize_unit_ball rejects degenerate clouds") {
  PointCloud pc;
  pc.points = {{0.5, 0.5, 0.5}, {0.5, 0.5, 0.5}};
  CHECK_THROWS(normalize_unit_ball(pc));
  CHECK_THROWS(normalize_unit_ball(PointCloud{}));
}

TEST_CASE("clip_to_unit_ball projects only exterior points") {
  PointCloud pc;
  pc.points = {{0.5, 0, 0}, {2, 0, 0}, {0, -3, 4}, {1, 0, 0}};
  const PointCloud out = clip_to_unit_ball(pc);
  CHECK(out.points[0].x == 0.5);  // interior point untouched
  CHECK(out.points[1].x == doctest::Approx(1.0));
  CHECK(out.points[2].y == doctest::Approx(-0.6));
  CHECK(out.points[2].z == doctest::Approx(0.8));
  CHECK(out.points[3].x == 1.0);  // boundary untouched
  for (const Vec3& p : out.points) CHECK(norm(p) <= 1.0 + 1e-12);

  const PointCloud inside = normalize_unit_ball(random_cube_cloud(64, 77));
  CHECK(clouds_identical(clip_to_unit_ball(inside), inside));
}

TEST_CASE("rotate_z quarter turn") {
  PointCloud pc;
  pc.points = {{1, 0, 0}};
  const PointCloud out = rotate_z(pc, 1.5707963267948966);
  CHECK(std::abs(out.points[0].x) < 1e-15);
  CHECK(out.points[0].y == doctest::Approx(1.0));
  CHECK(out.points[0].z == 0.0);
}

TEST_CASE("rotate_z identity and periodicity") {
  const PointCloud pc = random_cube_cloud(64, 9);
  CHECK(clouds_identical(rotate_z(pc, 0.0), pc));
  const PointCloud full = rotate_z(pc, 2.0 * 3.141592653589793238462643);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    CHECK(std::abs(full.points[i].x - pc.points[i].x) < 1e-12);
    CHECK(std::abs(full.points[i].y - pc.points[i].y) < 1e-12);
  }
}

TEST_CASE("rotate_z preserves z and the distance to the axis") {
  const PointCloud pc = random_cube_cloud(128, 21);
  const PointCloud out = rotate_z(pc, 0.7345);
  for (std::size_t i = 0; i < pc.size(); ++i) {
    CHECK(out.points[i].z == pc.points[i].z);
    const double r_in = std::hypot(pc.points[i].x, pc.points[i].y);
    const double r_out = std::hypot(out.points[i].x, out.points[i].y);
    CHECK(std::abs(r_in - r_out) < 1e-15);
  }
}

TEST_CASE("gaussian noise: sigma 0 is the identity") {
  const PointCloud pc = random_cube_cloud(128, 1);
  CHECK(clouds_identical(add_gaussian_noise(pc, 0.0, 99), pc));
}

TEST_CASE("gaussian noise: per-axis sample variance close to sigma^2") {
  const PointCloud pc = random_cube_cloud(2048, 7);
  const PointCloud noised = add_gaussian_noise(pc, 0.1, 1234);
  double var[3] = {0, 0, 0};
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const double dx = noised.points[i].x - pc.points[i].x;
    const double dy = noised.points[i].y - pc.points[i].y;
    const double dz = noised.points[i].z - pc.points[i].z;
    var[0] += dx * dx;
    var[1] += dy * dy;
    var[2] += dz * dz;
  }
  for (double& v : var) v /= static_cast<double>(pc.size());
  for (const double v : var) {
    CHECK(v > 0.009);
    CHECK(v < 0.011);
  }
}

TEST_CASE("augmentations are bitwise deterministic per seed") {
  const PointCloud pc = random_cube_cloud(256, 2);
  CHECK(clouds_identical(add_gaussian_noise(pc, 0.05, 7), add_gaussian_noise(pc, 0.05, 7)));
  CHECK(clouds_identical(add_uniform_outliers(pc, 0.3, 7), add_uniform_outliers(pc, 0.3, 7)));
  CHECK(clouds_identical(random_dropout(pc, 0.3, 7), random_dropout(pc, 0.3, 7)));
  CHECK_FALSE(clouds_identical(add_gaussian_noise(pc, 0.05, 7), add_gaussian_noise(pc, 0.05, 8)));
}

TEST_CASE("uniform outliers: replacement counts and cube statistics") {
  const PointCloud pc = normalize_unit_ball(random_cube_cloud(2048, 5));
  CHECK(clouds_identical(add_uniform_outliers(pc, 0.0, 3), pc));

  const PointCloud half = add_uniform_outliers(pc, 0.5, 3);
  CHECK(half.size() == 2048);
  CHECK(count_changed(pc, half) == 1024);

  const PointCloud all = add_uniform_outliers(pc, 1.0, 3);
  CHECK(count_changed(pc, all) == 2048);
  double mean[3] = {0, 0, 0};
  for (const Vec3& p : all.points) {
    mean[0] += p.x;
    mean[1] += p.y;
    mean[2] += p.z;
  }
  for (double& m : mean) {
    m /= 2048.0;
    CHECK(std::abs(m) < 0.05);
  }
}

TEST_CASE("clustered outliers: cluster accounting") {
  const PointCloud pc = normalize_unit_ball(random_cube_cloud(2048, 6));

  const PointCloud a = add_clustered_outliers(pc, 0.10, 10, 0.04, 17);
  CHECK(a.size() == 2048);
  CHECK(count_changed(pc, a) == 200);  // floor(204.8/10) = 20 clusters of 10

  const PointCloud b = add_clustered_outliers(pc, 0.20, 20, 0.04, 17);
  CHECK(count_changed(pc, b) == 400);  // 20 clusters of 20

  // sigma 0: every member coincides with its cluster center
  const PointCloud c = add_clustered_outliers(pc, 0.10, 10, 0.0, 17);
  std::set<std::string> centers;
  for (std::size_t i = 0; i < pc.size(); ++i) {
    if (pc.points[i].x != c.points[i].x || pc.points[i].y != c.points[i].y ||
        pc.points[i].z != c.points[i].z) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", c.points[i].x, c.points[i].y,
                    c.points[i].z);
      centers.insert(buf);
    }
  }
  CHECK(centers.size() == 20);

  CHECK_THROWS(add_clustered_outliers(pc, 0.001, 10, 0.04, 17));  // no full cluster fits
}

TEST_CASE("random dropout: counts and errors") {
  const PointCloud pc = random_cube_cloud(2048, 8);
  CHECK(clouds_identical(random_dropout(pc, 0.0, 1), pc));
  CHECK(random_dropout(pc, 0.5, 1).size() == 1024);
  CHECK(random_dropout(pc, 0.9, 1).size() == 205);
  CHECK_THROWS(random_dropout(pc, 1.0, 1));

  PointCloud tiny = random_cube_cloud(2, 8);
  CHECK_THROWS(random_dropout(tiny, 0.999, 1));  // would empty the cloud
}

TEST_CASE("dropout keeps survivor order") {
  const PointCloud pc = random_cube_cloud(64, 13);
  const PointCloud out = random_dropout(pc, 0.25, 4);
  std::size_t cursor = 0;
  for (const Vec3& p : out.points) {
    while (cursor < pc.size() && (pc.points[cursor].x != p.x || pc.points[cursor].y != p.y ||
                                  pc.points[cursor].z != p.z))
      ++cursor;
    CHECK(cursor < pc.size());
    ++cursor;
  }
}

TEST_CASE("point cloud file round trips with magic auto-detection") {
  const PointCloud pc = normalize_unit_ball(random_cube_cloud(200, 31));

  save_point_cloud_text(pc, "geom_test_cloud.txt");
  const PointCloud text = load_point_cloud("geom_test_cloud.txt");
  REQUIRE(text.size() == pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i)
    CHECK(text.points[i].x == doctest::Approx(pc.points[i].x).epsilon(1e-15));

  save_point_cloud_binary(pc, "geom_test_cloud.bin");
  const PointCloud bin = load_point_cloud("geom_test_cloud.bin");
  REQUIRE(bin.size() == pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    CHECK(bin.points[i].x == static_cast<double>(static_cast<float>(pc.points[i].x)));
  }

  std::remove("geom_test_cloud.txt");
  std::remove("geom_test_cloud.bin");
}

TEST_CASE("apply_augmentation validates its configuration") {
  AugmentationConfig cfg;
  cfg.kind = AugmentKind::uniform_outliers;
  cfg.fraction = 1.5;
  const PointCloud pc = random_cube_cloud(16, 1);
  CHECK_THROWS(apply_augmentation(pc, cfg));
  cfg.fraction = 0.5;
  cfg.sigma = -1.0;
  CHECK_THROWS(apply_augmentation(pc, cfg));
}
