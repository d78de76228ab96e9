#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sphclass/point_cloud.hpp"
#include "sphclass/rng.hpp"

namespace sphclass {

enum class Split { train, test };

struct LabeledDataset {
  std::vector<PointCloud> clouds;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  Split split = Split::train;

  std::size_t size() const { return clouds.size(); }
  void validate() const;
};

// Directory layout root/<class>/<split>/*.{txt,bin}; classes ordered
// alphabetically, clouds normalized to the unit ball on load.
LabeledDataset load_dataset(const std::string& root, Split split);

enum class PrimitiveShape { sphere, cube, cylinder, cone, torus, pyramid, ellipsoid, capsule };

const std::vector<std::string>& all_primitive_names();
PrimitiveShape shape_from_string(const std::string& name);
std::string to_string(PrimitiveShape shape);

struct GenerateConfig {
  std::vector<std::string> classes = all_primitive_names();
  int per_class = 250;
  int points = 2048;
  std::uint64_t seed = 42;
};

// Area-uniform surface samples of each primitive with a random per-axis
// scale in [0.6, 1.0] and a random z rotation per sample, normalized to the
// unit ball. Deterministic per seed.
LabeledDataset generate_primitives(const GenerateConfig& cfg);

// One sample with explicit transform parameters; area-uniform on the scaled
// surface via rejection against the local area distortion of the scaling.
PointCloud sample_primitive(PrimitiveShape shape, int n_points, const Vec3& axis_scale,
                            double z_rotation, SplitMix64& rng);

// Stratified by class; round(test_fraction * per-class count) samples go to
// the test split.
std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& dataset,
                                                        double test_fraction, std::uint64_t seed);

// Write train/test splits in the load_dataset layout plus a JSON manifest
// (class names, counts, seeds, generation parameters) beside the data.
void save_dataset(const LabeledDataset& train, const LabeledDataset& test,
                  const std::string& root, const GenerateConfig& cfg);

// FNV-1a over class names, labels and point coordinates; keys result tables.
std::uint64_t dataset_hash(const LabeledDataset& dataset);

}  // namespace sphclass
