#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sphclass/augment.hpp"
#include "sphclass/datasets.hpp"
#include "sphclass/spectral_net.hpp"

namespace sphclass {

enum class SweepAxis { outlier_fraction, noise_sigma, dropout_fraction, clustered_outliers };

struct SweepLevel {
  double value = 0.0;          // fraction or noise std
  int cluster_size = 0;        // clustered axis only
  double cluster_sigma = 0.0;  // clustered axis only
};

struct SweepSpec {
  SweepAxis axis = SweepAxis::outlier_fraction;
  std::vector<SweepLevel> levels;
  int trials = 3;
  std::uint64_t seed = 1;

  void validate() const;  // nonempty levels, ascending
};

struct ResultRow {
  std::string condition;
  double mean = 0.0;
  double stddev = 0.0;
  int trials = 0;
};

// Rows plus ordered metadata; every table carries the hashes, seeds and
// configuration needed to re-run it exactly.
struct ResultTable {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<ResultRow> rows;

  const ResultRow* find(const std::string& condition) const;
  void add_meta(const std::string& key, const std::string& value);
};

// The four standard evaluation conditions used across the tables:
// clean / 80% dropout / 0.10 noise / 50% uniform outliers.
std::vector<AugmentationConfig> standard_conditions();
std::string condition_name(const AugmentationConfig& cfg);

// Copy-on-augment: fresh per-cloud seeds, then clip_to_unit_ball so augmented
// points stay inside the voxel grid without rescaling the shape. The stored
// test set is never mutated.
LabeledDataset augment_dataset(const LabeledDataset& dataset, const AugmentationConfig& cfg,
                               std::uint64_t trial_seed);

// Per-level, per-trial accuracy of a trained model under one augmentation
// axis. A level that is the identity (value 0) reduces to plain evaluation.
ResultTable run_sweep(const ModelParams& params, const LabeledDataset& test_set,
                      const SweepSpec& spec, int threads = 0);

// Simple fully-connected classifiers over descriptor vectors, comparing
// binary+F1 / density+F1 / density+F2 across the four standard conditions.
struct DescriptorComparisonConfig {
  int shells = 7;
  int resolution = 64;
  int degree = 9;
  int hidden = 256;
  int epochs = 30;
  int batch_size = 16;
  double lr_start = 1e-3;
  double lr_end = 1e-4;
  double noise_std = 0.02;
  int replicas = 3;  // augmented replicas per training sample (plus the clean one)
  int trials = 3;
  std::uint64_t seed = 7;
  int threads = 0;
};
ResultTable run_descriptor_comparison(const LabeledDataset& train_set,
                                      const LabeledDataset& test_set,
                                      const DescriptorComparisonConfig& cfg);

// Architecture ablations at a reduced desk-scale configuration: spectral vs
// inverse-transform head, with/without the hidden layer, shell-count sweep,
// layer-count sweep. Variants share seeds and the dataset hash.
struct AblationConfig {
  NetConfig base;     // reduced net; classes is set from the dataset
  TrainConfig train;  // reduced schedule
  int trials = 3;
  std::uint64_t eval_seed = 11;

  AblationConfig();
};
ResultTable run_ablations(const LabeledDataset& train_set, const LabeledDataset& test_set,
                          const std::vector<std::string>& which, const AblationConfig& cfg);

// Clean-vs-outlier feature differences for the two head domains of one conv
// application: per-coefficient magnitudes (spectral head) against the
// synthesized spatial maps (inverse-transform head). Histograms share bin
// edges; stats are max |diff| and RMS.
struct SignalAnalysisReport {
  double outlier_fraction = 0.0;
  double rms_spectral = 0.0;
  double rms_ift = 0.0;
  double max_spectral = 0.0;
  double max_ift = 0.0;
  std::vector<double> bin_edges;          // size bins+1, identical for both paths
  std::vector<std::uint64_t> hist_spectral;
  std::vector<std::uint64_t> hist_ift;
};
SignalAnalysisReport run_ift_signal_analysis(const PointCloud& pc, const ModelParams& params,
                                             double outlier_fraction, std::uint64_t seed,
                                             int bins = 50);
void emit_signal_analysis_csv(const SignalAnalysisReport& report, const std::string& path);

// UTF-8 CSV: '#'-prefixed metadata lines, a header row, then one row per
// condition with accuracies at 4 decimal places.
void emit_csv(const ResultTable& table, const std::string& path);
ResultTable parse_result_csv(const std::string& path);

// "<experiment>_<UTC timestamp>.csv", or "<experiment>.csv" without stamp.
std::string auto_result_name(const std::string& experiment_id, bool with_timestamp);

}  // namespace sphclass
