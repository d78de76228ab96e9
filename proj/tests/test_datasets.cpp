#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "sphclass/datasets.hpp"

using namespace sphclass;
namespace fs = std::filesystem;

TEST_CASE("generate_primitives: counts, labels and alphabetical ordering") {
  GenerateConfig cfg;
  cfg.per_class = 4;
  cfg.points = 128;
  cfg.seed = 13;
  const LabeledDataset ds = generate_primitives(cfg);
  CHECK(ds.size() == 32);  // 8 classes x 4
  CHECK(ds.class_names.size() == 8);
  for (std::size_t i = 1; i < ds.class_names.size(); ++i)
    CHECK(ds.class_names[i - 1] < ds.class_names[i]);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.labels[i] >= 0);
    CHECK(ds.labels[i] < 8);
    CHECK(ds.clouds[i].size() == 128);
  }
  ds.validate();
}

TEST_CASE("unit sphere samples keep radius 1 through normalization") {
  SplitMix64 rng(4);
  const PointCloud pc = normalize_unit_ball(
      sample_primitive(PrimitiveShape::sphere, 2048, Vec3{1.0, 1.0, 1.0}, 0.0, rng));
  for (const Vec3& p : pc.points) CHECK(std::abs(norm(p) - 1.0) < 1e-9);
}

TEST_CASE("cube samples lie on the cube surface") {
  SplitMix64 rng(6);
  const PointCloud pc = sample_primitive(PrimitiveShape::cube, 512, Vec3{1.0, 1.0, 1.0}, 0.0, rng);
  for (const Vec3& p : pc.points) {
    const double linf = std::max({std::abs(p.x), std::abs(p.y), std::abs(p.z)});
    CHECK(linf == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("generation is deterministic per seed") {
  GenerateConfig cfg;
  cfg.classes = {"torus", "cone"};
  cfg.per_class = 3;
  cfg.points = 128;
  cfg.seed = 21;
  const LabeledDataset a = generate_primitives(cfg);
  const LabeledDataset b = generate_primitives(cfg);
  CHECK(dataset_hash(a) == dataset_hash(b));
  cfg.seed = 22;
  const LabeledDataset c = generate_primitives(cfg);
  CHECK(dataset_hash(a) != dataset_hash(c));
}

TEST_CASE("unknown class names are rejected") {
  GenerateConfig cfg;
  cfg.classes = {"sphere", "dodecahedron"};
  cfg.per_class = 1;
  cfg.points = 64;
  CHECK_THROWS(generate_primitives(cfg));
}

TEST_CASE("stratified split: sizes, union and proportions") {
  GenerateConfig cfg;
  cfg.classes = {"sphere", "cube", "cone"};
  cfg.per_class = 20;
  cfg.points = 64;
  cfg.seed = 2;
  const LabeledDataset ds = generate_primitives(cfg);

  const auto [train, test] = split_dataset(ds, 0.2, 7);
  CHECK(train.size() == 48);
  CHECK(test.size() == 12);
  for (int c = 0; c < 3; ++c) {
    int n_train = 0, n_test = 0;
    for (const int l : train.labels) n_train += (l == c);
    for (const int l : test.labels) n_test += (l == c);
    CHECK(n_train == 16);
    CHECK(n_test == 4);
  }

  // Union of the splits is the original multiset of clouds.
  std::multiset<std::uint64_t> original, recombined;
  auto cloud_key = [](const PointCloud& pc) {
    LabeledDataset tmp;
    tmp.class_names = {"x"};
    tmp.clouds = {pc};
    tmp.labels = {0};
    return dataset_hash(tmp);
  };
  for (const PointCloud& pc : ds.clouds) original.insert(cloud_key(pc));
  for (const PointCloud& pc : train.clouds) recombined.insert(cloud_key(pc));
  for (const PointCloud& pc : test.clouds) recombined.insert(cloud_key(pc));
  CHECK(original == recombined);

  CHECK_THROWS(split_dataset(ds, 0.0, 1));
  CHECK_THROWS(split_dataset(ds, 1.0, 1));
}

TEST_CASE("save_dataset / load_dataset round trip with deterministic ordering") {
  const fs::path root = fs::temp_directory_path() / "sphclass_ds_test";
  fs::remove_all(root);

  GenerateConfig cfg;
  cfg.classes = {"sphere", "cube"};
  cfg.per_class = 5;
  cfg.points = 64;
  cfg.seed = 31;
  const LabeledDataset ds = generate_primitives(cfg);
  const auto [train, test] = split_dataset(ds, 0.2, 3);
  save_dataset(train, test, root.string(), cfg);
  CHECK(fs::exists(root / "manifest.json"));

  const LabeledDataset loaded_train = load_dataset(root.string(), Split::train);
  const LabeledDataset loaded_test = load_dataset(root.string(), Split::test);
  CHECK(loaded_train.size() == 8);
  CHECK(loaded_test.size() == 2);
  CHECK(loaded_train.class_names == std::vector<std::string>{"cube", "sphere"});

  const LabeledDataset again = load_dataset(root.string(), Split::train);
  CHECK(dataset_hash(loaded_train) == dataset_hash(again));

  fs::remove_all(root);
}

TEST_CASE("load_dataset error paths") {
  const fs::path root = fs::temp_directory_path() / "sphclass_ds_err";
  fs::remove_all(root);
  CHECK_THROWS(load_dataset(root.string(), Split::train));  // missing root

  fs::create_directories(root);
  CHECK_THROWS(load_dataset(root.string(), Split::train));  // no classes

  fs::create_directories(root / "chair");
  CHECK_THROWS(load_dataset(root.string(), Split::train));  // missing split dir

  fs::create_directories(root / "chair" / "train");
  CHECK_THROWS(load_dataset(root.string(), Split::train));  // class without samples

  fs::remove_all(root);
}
