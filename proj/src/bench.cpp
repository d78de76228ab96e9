#include "sphclass/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sphclass/parallel.hpp"
#include "sphclass/voxel_grid.hpp"

namespace sphclass {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (const double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

void SweepSpec::validate() const {
  if (levels.empty()) throw std::invalid_argument("bench: sweep needs at least one level");
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (levels[i].value < levels[i - 1].value)
      throw std::invalid_argument("bench: sweep levels must be ascending");
  }
  if (trials < 1) throw std::invalid_argument("bench: trials must be >= 1");
}

const ResultRow* ResultTable::find(const std::string& condition) const {
  for (const ResultRow& r : rows) {
    if (r.condition == condition) return &r;
  }
  return nullptr;
}

void ResultTable::add_meta(const std::string& key, const std::string& value) {
  metadata.emplace_back(key, value);
}

std::vector<AugmentationConfig> standard_conditions() {
  AugmentationConfig clean;
  AugmentationConfig dropout;
  dropout.kind = AugmentKind::dropout;
  dropout.fraction = 0.8;
  AugmentationConfig noise;
  noise.kind = AugmentKind::gaussian_noise;
  noise.sigma = 0.10;
  AugmentationConfig outliers;
  outliers.kind = AugmentKind::uniform_outliers;
  outliers.fraction = 0.5;
  return {clean, dropout, noise, outliers};
}

std::string condition_name(const AugmentationConfig& cfg) {
  char buf[64];
  switch (cfg.kind) {
    case AugmentKind::none:
      return "clean";
    case AugmentKind::gaussian_noise:
      std::snprintf(buf, sizeof(buf), "noise_%.2f", cfg.sigma);
      return buf;
    case AugmentKind::uniform_outliers:
      std::snprintf(buf, sizeof(buf), "outliers_%.2f", cfg.fraction);
      return buf;
    case AugmentKind::clustered_outliers:
      std::snprintf(buf, sizeof(buf), "clustered_%.2f_%dp_%.2f", cfg.fraction, cfg.cluster_size,
                    cfg.sigma);
      return buf;
    case AugmentKind::dropout:
      std::snprintf(buf, sizeof(buf), "dropout_%.2f", cfg.fraction);
      return buf;
  }
  throw std::logic_error("bench: unknown condition");
}

LabeledDataset augment_dataset(const LabeledDataset& dataset, const AugmentationConfig& cfg,
                               std::uint64_t trial_seed) {
  LabeledDataset out;
  out.class_names = dataset.class_names;
  out.split = dataset.split;
  out.labels = dataset.labels;
  out.clouds.resize(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    AugmentationConfig per = cfg;
    per.seed = derive_seed(trial_seed, i);
    out.clouds[i] = clip_to_unit_ball(apply_augmentation(dataset.clouds[i], per));
    out.clouds[i].label = dataset.labels[i];
  }
  return out;
}

namespace {

bool is_identity_level(const SweepSpec& spec, const SweepLevel& level) {
  return spec.axis != SweepAxis::clustered_outliers && level.value == 0.0;
}

AugmentationConfig level_config(const SweepSpec& spec, const SweepLevel& level) {
  AugmentationConfig cfg;
  switch (spec.axis) {
    case SweepAxis::outlier_fraction:
      cfg.kind = AugmentKind::uniform_outliers;
      cfg.fraction = level.value;
      break;
    case SweepAxis::noise_sigma:
      cfg.kind = AugmentKind::gaussian_noise;
      cfg.sigma = level.value;
      break;
    case SweepAxis::dropout_fraction:
      cfg.kind = AugmentKind::dropout;
      cfg.fraction = level.value;
      break;
    case SweepAxis::clustered_outliers:
      cfg.kind = AugmentKind::clustered_outliers;
      cfg.fraction = level.value;
      cfg.cluster_size = level.cluster_size;
      cfg.sigma = level.cluster_sigma;
      break;
  }
  return cfg;
}

std::string axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::outlier_fraction: return "outlier_fraction";
    case SweepAxis::noise_sigma: return "noise_sigma";
    case SweepAxis::dropout_fraction: return "dropout_fraction";
    case SweepAxis::clustered_outliers: return "clustered_outliers";
  }
  return "?";
}

}  // namespace

ResultTable run_sweep(const ModelParams& params, const LabeledDataset& test_set,
                      const SweepSpec& spec, int threads) {
  spec.validate();
  test_set.validate();

  ResultTable table;
  table.add_meta("experiment", "sweep");
  table.add_meta("axis", axis_name(spec.axis));
  table.add_meta("model_hash", hex64(model_hash(params)));
  table.add_meta("dataset_hash", hex64(dataset_hash(test_set)));
  table.add_meta("trials", std::to_string(spec.trials));
  table.add_meta("seed", std::to_string(spec.seed));

  for (std::size_t li = 0; li < spec.levels.size(); ++li) {
    const SweepLevel& level = spec.levels[li];
    ResultRow row;
    if (is_identity_level(spec, level)) {
      row.condition = "clean";
      row.mean = evaluate(params, test_set, threads).accuracy;
      row.stddev = 0.0;
      row.trials = 1;
    } else {
      const AugmentationConfig cfg = level_config(spec, level);
      row.condition = condition_name(cfg);
      std::vector<double> acc;
      for (int t = 0; t < spec.trials; ++t) {
        const std::uint64_t trial_seed = derive_seed(spec.seed, li * 1000 + t);
        const LabeledDataset augmented = augment_dataset(test_set, cfg, trial_seed);
        acc.push_back(evaluate(params, augmented, threads).accuracy);
      }
      row.mean = mean_of(acc);
      row.stddev = stddev_of(acc, row.mean);
      row.trials = spec.trials;
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// --- descriptor comparison ---------------------------------------------------

namespace {

// Descriptor -> hidden PReLU -> classes; the "simple classifier" fed by F1/F2
// feature vectors.
struct DescriptorClassifier {
  nn::DenseLayer hidden;
  nn::Param slopes;
  nn::DenseLayer out;
  long step = 0;

  void init(int in_dim, int hidden_dim, int classes, std::uint64_t seed) {
    SplitMix64 rng(derive_seed(seed, 0xDE5CULL));
    hidden.init(in_dim, hidden_dim, rng);
    slopes.resize(static_cast<std::size_t>(hidden_dim));
    std::fill(slopes.value.begin(), slopes.value.end(), 0.25);
    out.init(hidden_dim, classes, rng);
  }

  std::vector<double> logits(const std::vector<double>& X, int batch) const {
    std::vector<double> H(static_cast<std::size_t>(batch) * hidden.out);
    nn::dense_forward(hidden, X.data(), batch, H.data());
    for (int i = 0; i < batch; ++i) {
      for (int j = 0; j < hidden.out; ++j) {
        double& h = H[static_cast<std::size_t>(i) * hidden.out + j];
        if (h < 0.0) h *= slopes.value[j];
      }
    }
    std::vector<double> L(static_cast<std::size_t>(batch) * out.out);
    nn::dense_forward(out, H.data(), batch, L.data());
    return L;
  }

  double train_batch(const std::vector<double>& X, const std::vector<int>& labels, int batch,
                     double lr) {
    std::vector<double> H(static_cast<std::size_t>(batch) * hidden.out);
    nn::dense_forward(hidden, X.data(), batch, H.data());
    std::vector<double> HA = H;
    for (int i = 0; i < batch; ++i) {
      for (int j = 0; j < hidden.out; ++j) {
        double& h = HA[static_cast<std::size_t>(i) * hidden.out + j];
        if (h < 0.0) h *= slopes.value[j];
      }
    }
    std::vector<double> logits_buf(static_cast<std::size_t>(batch) * out.out);
    nn::dense_forward(out, HA.data(), batch, logits_buf.data());
    std::vector<double> dlogits(logits_buf.size());
    const double loss = nn::softmax_cross_entropy(logits_buf.data(), labels.data(), batch,
                                                  out.out, dlogits.data());
    std::vector<double> dHA(HA.size());
    std::vector<double> gW2, gb2;
    nn::dense_backward(out, HA.data(), dlogits.data(), batch, dHA.data(), gW2, gb2);
    std::vector<double> dH(H.size());
    std::vector<double> gslopes(slopes.size(), 0.0);
    for (int i = 0; i < batch; ++i) {
      for (int j = 0; j < hidden.out; ++j) {
        const std::size_t idx = static_cast<std::size_t>(i) * hidden.out + j;
        const double h = H[idx];
        dH[idx] = dHA[idx] * (h > 0.0 ? 1.0 : slopes.value[j]);
        gslopes[j] += dHA[idx] * std::min(h, 0.0);
      }
    }
    std::vector<double> gW1, gb1;
    nn::dense_backward(hidden, X.data(), dH.data(), batch, nullptr, gW1, gb1);

    const nn::AdamConfig adam;
    ++step;
    nn::adam_update(hidden.W, gW1, lr, step, adam);
    nn::adam_update(hidden.b, gb1, lr, step, adam);
    nn::adam_update(slopes, gslopes, lr, step, adam);
    nn::adam_update(out.W, gW2, lr, step, adam);
    nn::adam_update(out.b, gb2, lr, step, adam);
    return loss;
  }
};

enum class Method { binary_f1, density_f1, density_f2 };

const char* method_name(Method m) {
  switch (m) {
    case Method::binary_f1: return "binary_f1";
    case Method::density_f1: return "density_f1";
    case Method::density_f2: return "density_f2";
  }
  return "?";
}

// All three descriptor vectors of one cloud in a single pass (two grids, two
// transforms per shell).
struct DescriptorSet {
  std::vector<double> binary_f1;
  std::vector<double> density_f1;
  std::vector<double> density_f2;
};

DescriptorSet all_descriptors(const PointCloud& pc, const Transform& tf, int shells) {
  GridSpec density_spec;
  density_spec.shells = shells;
  density_spec.resolution = tf.resolution();
  density_spec.mode = OccupancyMode::density;
  GridSpec binary_spec = density_spec;
  binary_spec.mode = OccupancyMode::binary;

  const SphericalVoxelGrid density = voxelize(pc, density_spec);
  const SphericalVoxelGrid binary = voxelize(pc, binary_spec);

  std::vector<SHSpectrum> density_spectra, binary_spectra;
  density_spectra.reserve(shells);
  binary_spectra.reserve(shells);
  for (int s = 0; s < shells; ++s) {
    density_spectra.push_back(tf.forward(shell_signal(density, s)));
    binary_spectra.push_back(tf.forward(shell_signal(binary, s)));
  }

  DescriptorSet out;
  out.binary_f1 = descriptor_f1(binary_spectra).values;
  out.density_f1 = descriptor_f1(density_spectra).values;
  out.density_f2 = descriptor_f2(density_spectra).values;
  return out;
}

const std::vector<double>& select(const DescriptorSet& d, Method m) {
  switch (m) {
    case Method::binary_f1: return d.binary_f1;
    case Method::density_f1: return d.density_f1;
    case Method::density_f2: return d.density_f2;
  }
  throw std::logic_error("bench: unknown method");
}

}  // namespace

ResultTable run_descriptor_comparison(const LabeledDataset& train_set,
                                      const LabeledDataset& test_set,
                                      const DescriptorComparisonConfig& cfg) {
  train_set.validate();
  test_set.validate();
  const int classes = static_cast<int>(train_set.class_names.size());
  const Transform tf(cfg.resolution, cfg.degree);

  // Training bank: the clean cloud plus `replicas` rotated/noised copies per
  // sample, shared across the three methods so the comparison is paired.
  const std::size_t n_train = train_set.size();
  const std::size_t bank = n_train * (1 + cfg.replicas);
  std::vector<DescriptorSet> train_desc(bank);
  std::vector<int> train_labels(bank);
  parallel_for(0, bank, cfg.threads, [&](std::size_t bi) {
    const std::size_t si = bi % n_train;
    const std::size_t rep = bi / n_train;
    train_labels[bi] = train_set.labels[si];
    PointCloud pc = train_set.clouds[si];
    if (rep > 0) {
      SplitMix64 aug(derive_seed(derive_seed(cfg.seed, 0xBA17ULL + rep), si));
      pc = rotate_z(pc, aug.next_uniform(0.0, kTwoPi));
      if (cfg.noise_std > 0.0) pc = add_gaussian_noise(pc, cfg.noise_std, aug.next_u64());
      pc = normalize_unit_ball(pc);
    }
    train_desc[bi] = all_descriptors(pc, tf, cfg.shells);
  });

  ResultTable table;
  table.add_meta("experiment", "descriptor_comparison");
  table.add_meta("dataset_hash", hex64(dataset_hash(train_set)));
  table.add_meta("test_hash", hex64(dataset_hash(test_set)));
  table.add_meta("seed", std::to_string(cfg.seed));
  table.add_meta("trials", std::to_string(cfg.trials));
  table.add_meta("binary_descriptor", "f1");
  table.add_meta("paper_binary", "0.79/0.34/0.24/0.14");
  table.add_meta("paper_density_f1", "0.78/0.75/0.37/0.50");
  table.add_meta("paper_density_f2", "0.68/0.68/0.30/0.24");

  const std::vector<AugmentationConfig> conditions = standard_conditions();

  // Pre-augment the evaluation sets once; all methods score the same clouds.
  std::vector<std::vector<std::vector<DescriptorSet>>> eval_desc(conditions.size());
  for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
    const int trials = conditions[ci].kind == AugmentKind::none ? 1 : cfg.trials;
    eval_desc[ci].resize(trials);
    for (int t = 0; t < trials; ++t) {
      LabeledDataset aug = conditions[ci].kind == AugmentKind::none
                               ? test_set
                               : augment_dataset(test_set, conditions[ci],
                                                 derive_seed(cfg.seed, 0xE7A1ULL + ci * 100 + t));
      eval_desc[ci][t].resize(aug.size());
      std::vector<DescriptorSet>& slot = eval_desc[ci][t];
      parallel_for(0, aug.size(), cfg.threads,
                   [&](std::size_t i) { slot[i] = all_descriptors(aug.clouds[i], tf, cfg.shells); });
    }
  }

  for (const Method method : {Method::binary_f1, Method::density_f1, Method::density_f2}) {
    const int in_dim = static_cast<int>(select(train_desc[0], method).size());
    DescriptorClassifier clf;
    clf.init(in_dim, cfg.hidden, classes, derive_seed(cfg.seed, static_cast<int>(method)));

    std::vector<std::size_t> order(bank);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const double t = cfg.epochs <= 1 ? 0.0 : static_cast<double>(epoch) / (cfg.epochs - 1);
      const double lr = cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, t);
      SplitMix64 shuffle(derive_seed(cfg.seed, 0x0E0CULL + epoch * 10 + static_cast<int>(method)));
      for (std::size_t i = bank - 1; i > 0; --i) {
        const std::size_t j = shuffle.next_index(i + 1);
        std::swap(order[i], order[j]);
      }
      for (std::size_t start = 0; start < bank; start += cfg.batch_size) {
        const std::size_t stop = std::min(bank, start + cfg.batch_size);
        const int batch = static_cast<int>(stop - start);
        std::vector<double> X(static_cast<std::size_t>(batch) * in_dim);
        std::vector<int> y(batch);
        for (int b = 0; b < batch; ++b) {
          const std::size_t idx = order[start + b];
          const std::vector<double>& f = select(train_desc[idx], method);
          std::copy(f.begin(), f.end(), X.begin() + static_cast<std::size_t>(b) * in_dim);
          y[b] = train_labels[idx];
        }
        clf.train_batch(X, y, batch, lr);
      }
    }

    for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
      std::vector<double> acc;
      for (const std::vector<DescriptorSet>& trial : eval_desc[ci]) {
        int correct = 0;
        const int n = static_cast<int>(trial.size());
        std::vector<double> X(static_cast<std::size_t>(n) * in_dim);
        for (int i = 0; i < n; ++i) {
          const std::vector<double>& f = select(trial[i], method);
          std::copy(f.begin(), f.end(), X.begin() + static_cast<std::size_t>(i) * in_dim);
        }
        const std::vector<double> logits = clf.logits(X, n);
        for (int i = 0; i < n; ++i) {
          if (nn::argmax(&logits[static_cast<std::size_t>(i) * classes], classes) ==
              test_set.labels[i])
            ++correct;
        }
        acc.push_back(static_cast<double>(correct) / n);
      }
      ResultRow row;
      row.condition = std::string(method_name(method)) + "/" + condition_name(conditions[ci]);
      row.mean = mean_of(acc);
      row.stddev = stddev_of(acc, row.mean);
      row.trials = static_cast<int>(acc.size());
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

// --- ablations ---------------------------------------------------------------

AblationConfig::AblationConfig() {
  base.filters = 8;
  base.shells = 4;
  base.resolution = 16;
  base.degree = 4;
  base.hidden = 256;
  base.conv_layers = 1;
  base.use_ift = false;
  base.use_fc = true;
  base.mode = OccupancyMode::density;
  train.epochs = 20;
  train.batch_size = 16;
  train.lr_start = 1e-3;
  train.lr_end = 1e-4;
  train.noise_std = 0.02;
  train.seed = 29;
}

namespace {

void eval_variant(const std::string& variant, const ModelParams& params,
                  const LabeledDataset& test_set, int trials, std::uint64_t eval_seed,
                  int threads, ResultTable& table) {
  const std::vector<AugmentationConfig> conditions = standard_conditions();
  for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
    std::vector<double> acc;
    const int n_trials = conditions[ci].kind == AugmentKind::none ? 1 : trials;
    for (int t = 0; t < n_trials; ++t) {
      const LabeledDataset ds =
          conditions[ci].kind == AugmentKind::none
              ? test_set
              : augment_dataset(test_set, conditions[ci],
                                derive_seed(eval_seed, 0xAB1ULL + ci * 100 + t));
      acc.push_back(evaluate(params, ds, threads).accuracy);
    }
    ResultRow row;
    row.condition = variant + "/" + condition_name(conditions[ci]);
    row.mean = mean_of(acc);
    row.stddev = stddev_of(acc, row.mean);
    row.trials = static_cast<int>(acc.size());
    table.rows.push_back(std::move(row));
  }
}

}  // namespace

ResultTable run_ablations(const LabeledDataset& train_set, const LabeledDataset& test_set,
                          const std::vector<std::string>& which, const AblationConfig& cfg) {
  train_set.validate();
  test_set.validate();

  ResultTable table;
  table.add_meta("experiment", "ablations");
  table.add_meta("dataset_hash", hex64(dataset_hash(train_set)));
  table.add_meta("test_hash", hex64(dataset_hash(test_set)));
  table.add_meta("seed", std::to_string(cfg.train.seed));
  table.add_meta("trials", std::to_string(cfg.trials));
  table.add_meta("paper_ours", "0.82/0.72/0.62/0.74");
  table.add_meta("paper_ours_ift", "0.78/0.71/0.45/0.58");
  table.add_meta("paper_ours_no_fc", "0.75/0.65/0.54/0.46");

  NetConfig base = cfg.base;
  base.classes = static_cast<int>(train_set.class_names.size());

  auto train_and_eval = [&](const std::string& variant, const NetConfig& net) {
    auto [params, history] = train(train_set, net, cfg.train);
    (void)history;
    eval_variant(variant, params, test_set, cfg.trials, cfg.eval_seed, cfg.train.threads, table);
  };

  for (const std::string& name : which) {
    if (name == "ift") {
      train_and_eval("spectral", base);
      NetConfig ift = base;
      ift.use_ift = true;
      train_and_eval("ift", ift);
    } else if (name == "no_fc") {
      train_and_eval("fc", base);
      NetConfig nofc = base;
      nofc.use_fc = false;
      train_and_eval("no_fc", nofc);
    } else if (name == "shell_count") {
      for (const int c : {4, 5, 7, 10}) {
        NetConfig net = base;
        net.shells = c;
        train_and_eval("shells_" + std::to_string(c), net);
      }
    } else if (name == "layer_count") {
      for (int layers = 1; layers <= 4; ++layers) {
        NetConfig net = base;
        net.conv_layers = layers;
        train_and_eval("layers_" + std::to_string(layers), net);
      }
    } else {
      throw std::invalid_argument("bench: unknown ablation '" + name + "'");
    }
  }
  return table;
}

// --- signal analysis --------------------------------------------------------

SignalAnalysisReport run_ift_signal_analysis(const PointCloud& pc, const ModelParams& params,
                                             double outlier_fraction, std::uint64_t seed,
                                             int bins) {
  if (bins < 1) throw std::invalid_argument("bench: bins must be >= 1");
  const NetConfig& cfg = params.cfg;
  const PointCloud clean = clip_to_unit_ball(pc);
  const PointCloud twin = clip_to_unit_ball(add_uniform_outliers(clean, outlier_fraction, seed));

  const Transform tf(cfg.resolution, cfg.degree);
  GridSpec gs;
  gs.shells = cfg.shells;
  gs.resolution = cfg.resolution;
  gs.mode = cfg.mode;

  auto spectra_of = [&](const PointCloud& cloud) {
    const SphericalVoxelGrid grid = voxelize(cloud, gs);
    std::vector<SHSpectrum> spectra;
    spectra.reserve(cfg.shells);
    for (int s = 0; s < cfg.shells; ++s) spectra.push_back(tf.forward(shell_signal(grid, s)));
    return spectra;
  };

  // One conv application with the model's first-layer kernel bank; the two
  // heads then read the same coefficients in their own domains.
  ZonalKernel kernel;
  kernel.filters = cfg.filters;
  kernel.shells = cfg.shells;
  kernel.degree = cfg.degree;
  kernel.h = params.conv.front().kernels.value;

  const auto conv_clean = zonal_conv(spectra_of(clean), kernel);
  const auto conv_twin = zonal_conv(spectra_of(twin), kernel);

  const std::vector<double> mag_clean = magnitude_features(conv_clean);
  const std::vector<double> mag_twin = magnitude_features(conv_twin);
  std::vector<double> diff_spectral(mag_clean.size());
  for (std::size_t i = 0; i < mag_clean.size(); ++i)
    diff_spectral[i] = mag_clean[i] - mag_twin[i];

  const auto maps_clean = inverse_after_conv(conv_clean, cfg.resolution);
  const auto maps_twin = inverse_after_conv(conv_twin, cfg.resolution);
  std::vector<double> diff_ift;
  diff_ift.reserve(static_cast<std::size_t>(cfg.filters) * cfg.shells * cfg.resolution *
                   cfg.resolution);
  for (std::size_t f = 0; f < maps_clean.size(); ++f) {
    for (std::size_t s = 0; s < maps_clean[f].size(); ++s) {
      const std::vector<double>& a = maps_clean[f][s].values;
      const std::vector<double>& b = maps_twin[f][s].values;
      for (std::size_t i = 0; i < a.size(); ++i) diff_ift.push_back(a[i] - b[i]);
    }
  }

  auto rms = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (const double x : v) acc += x * x;
    return std::sqrt(acc / static_cast<double>(v.size()));
  };
  auto max_abs = [](const std::vector<double>& v) {
    double m = 0.0;
    for (const double x : v) m = std::max(m, std::abs(x));
    return m;
  };

  SignalAnalysisReport report;
  report.outlier_fraction = outlier_fraction;
  report.rms_spectral = rms(diff_spectral);
  report.rms_ift = rms(diff_ift);
  report.max_spectral = max_abs(diff_spectral);
  report.max_ift = max_abs(diff_ift);

  double lim = std::max(report.max_spectral, report.max_ift);
  if (lim == 0.0) lim = 1.0;
  report.bin_edges.resize(bins + 1);
  for (int b = 0; b <= bins; ++b)
    report.bin_edges[b] = -lim + 2.0 * lim * static_cast<double>(b) / bins;
  report.hist_spectral.assign(bins, 0);
  report.hist_ift.assign(bins, 0);
  auto fill = [&](const std::vector<double>& diff, std::vector<std::uint64_t>& hist) {
    for (const double x : diff) {
      int b = static_cast<int>((x + lim) / (2.0 * lim) * bins);
      b = std::min(std::max(b, 0), bins - 1);
      ++hist[b];
    }
  };
  fill(diff_spectral, report.hist_spectral);
  fill(diff_ift, report.hist_ift);
  return report;
}

void emit_signal_analysis_csv(const SignalAnalysisReport& report, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("bench: cannot write " + path);
  os << "# experiment=ift_signal_analysis\n";
  os << "# outlier_fraction=" << format_double(report.outlier_fraction, 4) << '\n';
  os << "# rms_spectral=" << format_double(report.rms_spectral, 6) << '\n';
  os << "# rms_ift=" << format_double(report.rms_ift, 6) << '\n';
  os << "# max_spectral=" << format_double(report.max_spectral, 6) << '\n';
  os << "# max_ift=" << format_double(report.max_ift, 6) << '\n';
  os << "bin_lo,bin_hi,count_spectral,count_ift\n";
  for (std::size_t b = 0; b + 1 < report.bin_edges.size(); ++b) {
    os << format_double(report.bin_edges[b], 6) << ',' << format_double(report.bin_edges[b + 1], 6)
       << ',' << report.hist_spectral[b] << ',' << report.hist_ift[b] << '\n';
  }
}

// --- csv ----------------------------------------------------------------------

void emit_csv(const ResultTable& table, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("bench: cannot write " + path);
  for (const auto& [key, value] : table.metadata) os << "# " << key << '=' << value << '\n';
  os << "condition,accuracy_mean,accuracy_std,trials\n";
  for (const ResultRow& row : table.rows) {
    os << row.condition << ',' << format_double(row.mean, 4) << ','
       << format_double(row.stddev, 4) << ',' << row.trials << '\n';
  }
}

ResultTable parse_result_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("bench: cannot open " + path);
  ResultTable table;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::size_t sp = line.find_first_not_of("# ");
      const std::size_t eq = line.find('=', sp);
      if (eq != std::string::npos)
        table.add_meta(line.substr(sp, eq - sp), line.substr(eq + 1));
      continue;
    }
    if (!header_seen) {
      header_seen = true;  // column header row
      continue;
    }
    std::istringstream ls(line);
    std::string cell;
    ResultRow row;
    if (!std::getline(ls, row.condition, ',')) continue;
    std::getline(ls, cell, ',');
    row.mean = std::stod(cell);
    std::getline(ls, cell, ',');
    row.stddev = std::stod(cell);
    std::getline(ls, cell, ',');
    row.trials = std::stoi(cell);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string auto_result_name(const std::string& experiment_id, bool with_timestamp) {
  if (!with_timestamp) return experiment_id + ".csv";
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc;
  gmtime_r(&now, &tm_utc);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &tm_utc);
  return experiment_id + "_" + stamp + ".csv";
}

}  // namespace sphclass
