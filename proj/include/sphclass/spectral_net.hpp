#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "sphclass/nn.hpp"
#include "sphclass/point_cloud.hpp"
#include "sphclass/sht.hpp"
#include "sphclass/voxel_grid.hpp"

namespace sphclass {

// Zonal (m = 0) kernel bank: one coefficient per degree, per shell, per
// filter, matching the separate convolution applied at each concentric
// sphere.
struct ZonalKernel {
  int filters = 0;
  int shells = 0;
  int degree = 0;
  std::vector<double> h;  // [filter][shell][l]

  double& at(int f, int s, int l) {
    return h[(static_cast<std::size_t>(f) * shells + s) * (degree + 1) + l];
  }
  double at(int f, int s, int l) const {
    return h[(static_cast<std::size_t>(f) * shells + s) * (degree + 1) + l];
  }
};

struct NetConfig {
  int filters = 16;
  int shells = 7;
  int resolution = 64;
  int degree = 9;
  int hidden = 1024;
  int classes = 40;
  int conv_layers = 1;  // 1..4 spectral layers, channel-mixing after the first
  bool use_ift = false;  // ablation: inverse transform after the last conv
  bool use_fc = true;    // ablation: drop the hidden layer entirely
  OccupancyMode mode = OccupancyMode::density;

  void validate() const;
  std::size_t coeff_count() const { return SHSpectrum::coeff_count(degree); }
  // Per-sample feature dimension entering the classifier head.
  std::size_t feature_dim() const;
  bool operator==(const NetConfig&) const = default;
};

// Spectral convolution layer: kernels [out][in][shell][l], PReLU slopes
// per output channel applied to real and imaginary parts independently.
struct ConvLayer {
  int in_channels = 1;
  int out_channels = 1;
  nn::Param kernels;
  nn::Param slopes;
};

struct ModelParams {
  NetConfig cfg;
  std::vector<ConvLayer> conv;
  nn::DenseLayer fc;      // feature_dim -> hidden, present iff cfg.use_fc
  nn::Param fc_slopes;    // [hidden]
  nn::DenseLayer cls;     // (hidden or feature_dim) -> classes
  long adam_step = 0;

  // Shapes from cfg; kernels ~ N(0, 1/sqrt((L+1)*in_channels)), dense layers
  // fan-in scaled uniform, PReLU slopes 0.25.
  void init(std::uint64_t seed);
};

struct TrainConfig {
  int batch_size = 16;
  int epochs = 48;
  double lr_start = 0.001;
  double lr_end = 0.00004;
  double noise_std = 0.02;  // train-time Gaussian augmentation
  bool rotate = true;       // train-time random z rotation
  std::uint64_t seed = 42;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
  double lr_at(int epoch) const;  // exponential decay from lr_start to lr_end
};

struct EpochStats {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double train_accuracy = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;
  int classes = 0;
  std::vector<int> confusion;  // [true][predicted]

  int confusion_at(int truth, int pred) const { return confusion[truth * classes + pred]; }
};

struct Gradients {
  std::vector<std::vector<double>> conv_kernels;
  std::vector<std::vector<double>> conv_slopes;
  std::vector<double> fc_W, fc_b, fc_slopes;
  std::vector<double> cls_W, cls_b;
};

// --- Spectral building blocks -------------------------------------------

// (f * h)_l^m = sqrt(4 pi / (2l+1)) * f_lm * h_l per filter and shell; no
// pooling, no grid change. The identity kernel is h_l = sqrt((2l+1)/(4 pi)).
std::vector<std::vector<SHSpectrum>> zonal_conv(const std::vector<SHSpectrum>& shells,
                                                const ZonalKernel& kernel);

// Inverse transform of convolved spectra, per filter per shell. Exists for
// the ablation variant only; the default model never leaves the spectral
// domain.
std::vector<std::vector<SphericalSignal>> inverse_after_conv(
    const std::vector<std::vector<SHSpectrum>>& convolved, int n);

// |coefficient| per (filter, shell, l, m>=0), flattened filter-major.
std::vector<double> magnitude_features(const std::vector<std::vector<SHSpectrum>>& convolved);

// --- Model ----------------------------------------------------------------

// Class logits for one cloud (normalizes nothing; the cloud must already be
// in the unit ball) or one precomputed grid.
std::vector<double> forward_pass(const PointCloud& pc, const ModelParams& params);
std::vector<double> forward_pass(const SphericalVoxelGrid& grid, const ModelParams& params);

// Mean cross-entropy over the batch plus analytic gradients for every
// parameter tensor.
std::pair<double, Gradients> loss_and_gradients(const std::vector<PointCloud>& clouds,
                                                const std::vector<int>& labels,
                                                const ModelParams& params, int threads = 0);

struct LabeledDataset;  // datasets.hpp

std::pair<ModelParams, std::vector<EpochStats>> train(const LabeledDataset& dataset,
                                                      const NetConfig& net_cfg,
                                                      const TrainConfig& train_cfg);

EvalResult evaluate(const ModelParams& params, const LabeledDataset& dataset, int threads = 0);

// Checkpoint: magic "SHNN", u16 version, u32 fields (filters, shells, degree,
// resolution, hidden, classes, conv_layers, flags), u64 adam step, then
// float32 little-endian tensors (value, then Adam m and v for each parameter)
// in declaration order.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path, const NetConfig* expected = nullptr);

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path);

// FNV-1a over the config and quantized parameter bytes; keys result tables.
std::uint64_t model_hash(const ModelParams& params);

}  // namespace sphclass
