// sphclass: spherical-harmonic point cloud classification toolkit.
//
// Subcommands wire the library into reproducible workflows: generate,
// voxelize, transform, train, eval, bench. Flags override config-file values
// (plain "key = value" lines via --config), which override built-in defaults;
// SPHCLASS_SEED is used when no seed is given anywhere else.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sphclass/bench.hpp"
#include "sphclass/datasets.hpp"
#include "sphclass/spectral_net.hpp"
#include "sphclass/voxel_grid.hpp"

namespace {

using namespace sphclass;

std::int64_t resolve_seed(std::int64_t cli_seed) {
  if (cli_seed >= 0) return cli_seed;
  if (const char* env = std::getenv("SPHCLASS_SEED")) {
    try {
      return std::stoll(env);
    } catch (...) {
      throw std::runtime_error("invalid SPHCLASS_SEED value");
    }
  }
  return 42;
}

void echo(const std::string& key, const std::string& value) {
  std::cout << "# config: " << key << "=" << value << "\n";
}

OccupancyMode parse_mode(const std::string& mode) {
  if (mode == "density") return OccupancyMode::density;
  if (mode == "binary") return OccupancyMode::binary;
  throw std::runtime_error("mode must be 'density' or 'binary'");
}

std::vector<double> parse_levels(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty()) out.push_back(std::stod(cell));
  }
  return out;
}

std::vector<SweepLevel> parse_cluster_levels(const std::string& csv) {
  std::vector<SweepLevel> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    SweepLevel level;
    if (std::sscanf(cell.c_str(), "%lf:%d:%lf", &level.value, &level.cluster_size,
                    &level.cluster_sigma) != 3)
      throw std::runtime_error("clustered level must be fraction:cluster_size:sigma");
    out.push_back(level);
  }
  return out;
}

struct NetFlags {
  int filters = 16;
  int shells = 7;
  int resolution = 64;
  int degree = 9;
  int hidden = 1024;
  int layers = 1;
  std::string ift = "off";
  std::string fc = "on";
  std::string mode = "density";

  void attach(CLI::App* cmd) {
    cmd->add_option("--filters", filters, "Convolution output channels")->capture_default_str();
    cmd->add_option("--shells", shells, "Concentric shells")->capture_default_str();
    cmd->add_option("--resolution", resolution, "Grid resolution per shell")
        ->capture_default_str();
    cmd->add_option("--degree", degree, "Spherical-harmonic degree")->capture_default_str();
    cmd->add_option("--hidden", hidden, "Hidden layer width")->capture_default_str();
    cmd->add_option("--layers", layers, "Convolution layers (1..4)")->capture_default_str();
    cmd->add_option("--ift", ift, "Apply inverse transform after conv (on|off)")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    cmd->add_option("--fc", fc, "Use the hidden fully-connected layer (on|off)")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    cmd->add_option("--mode", mode, "Occupancy mode (density|binary)")
        ->check(CLI::IsMember({"density", "binary"}))
        ->capture_default_str();
  }

  NetConfig to_config(int classes) const {
    NetConfig cfg;
    cfg.filters = filters;
    cfg.shells = shells;
    cfg.resolution = resolution;
    cfg.degree = degree;
    cfg.hidden = hidden;
    cfg.conv_layers = layers;
    cfg.use_ift = ift == "on";
    cfg.use_fc = fc == "on";
    cfg.mode = parse_mode(mode);
    cfg.classes = classes;
    return cfg;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Spherical-harmonic point cloud classifier"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Config file with 'key = value' lines");
  app.allow_config_extras(false);

  std::int64_t seed = -1;
  app.add_option("--seed", seed, "Base RNG seed (fallback: SPHCLASS_SEED, then 42)");
  int threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (0 = hardware)");

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a labeled primitive dataset");
  std::string gen_out;
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  std::string gen_classes = "all";
  gen->add_option("--classes", gen_classes, "Comma list of classes or 'all'")
      ->capture_default_str();
  int per_class = 250, gen_points = 2048;
  double test_fraction = 0.2;
  gen->add_option("--per-class", per_class, "Samples per class")->capture_default_str();
  gen->add_option("--points", gen_points, "Points per cloud")->capture_default_str();
  gen->add_option("--test-fraction", test_fraction, "Stratified test fraction")
      ->capture_default_str();

  // voxelize
  auto* vox = app.add_subcommand("voxelize", "Voxelize one cloud onto the spherical grid");
  std::string vox_in, vox_out;
  vox->add_option("--input", vox_in, "Point cloud file (text or SPC1)")->required();
  vox->add_option("--out", vox_out, "Output grid file (SVG1)")->required();
  int vox_shells = 7, vox_resolution = 64;
  std::string vox_mode = "density";
  vox->add_option("--shells", vox_shells)->capture_default_str();
  vox->add_option("--resolution", vox_resolution)->capture_default_str();
  vox->add_option("--mode", vox_mode)->check(CLI::IsMember({"density", "binary"}))
      ->capture_default_str();

  // transform
  auto* xf = app.add_subcommand("transform", "Forward transform of one cloud (per shell)");
  std::string xf_in, xf_out;
  xf->add_option("--input", xf_in, "Point cloud file")->required();
  xf->add_option("--out", xf_out, "Output spectrum file (SHS1)")->required();
  int xf_shells = 7, xf_resolution = 64, xf_degree = 9;
  std::string xf_mode = "density";
  xf->add_option("--shells", xf_shells)->capture_default_str();
  xf->add_option("--resolution", xf_resolution)->capture_default_str();
  xf->add_option("--degree", xf_degree)->capture_default_str();
  xf->add_option("--mode", xf_mode)->check(CLI::IsMember({"density", "binary"}))
      ->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Train the spectral classifier");
  std::string tr_data, tr_out, tr_history;
  tr->add_option("--data", tr_data, "Dataset root directory")->required();
  tr->add_option("--out", tr_out, "Checkpoint output path")->required();
  tr->add_option("--history", tr_history, "Per-epoch history CSV path");
  NetFlags tr_net;
  tr_net.attach(tr);
  int tr_epochs = 48, tr_batch = 16;
  double lr_start = 0.001, lr_end = 0.00004, tr_noise = 0.02;
  bool tr_no_rotate = false;
  tr->add_option("--epochs", tr_epochs)->capture_default_str();
  tr->add_option("--batch", tr_batch)->capture_default_str();
  tr->add_option("--lr-start", lr_start)->capture_default_str();
  tr->add_option("--lr-end", lr_end)->capture_default_str();
  tr->add_option("--noise-std", tr_noise, "Train-time Gaussian noise std")->capture_default_str();
  tr->add_flag("--no-rotate", tr_no_rotate, "Disable train-time z rotations");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  std::string ev_model, ev_data, ev_split = "test", ev_confusion;
  ev->add_option("--model", ev_model, "Checkpoint path")->required();
  ev->add_option("--data", ev_data, "Dataset root directory")->required();
  ev->add_option("--split", ev_split)->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  ev->add_option("--confusion", ev_confusion, "Write the confusion matrix CSV here");

  // bench
  auto* be = app.add_subcommand("bench", "Robustness benchmarks and ablations");
  std::string be_data, be_model, be_suite = "sweep", be_out_dir = ".";
  be->add_option("--data", be_data, "Dataset root directory")->required();
  be->add_option("--model", be_model, "Checkpoint (sweep and ift-analysis suites)");
  be->add_option("--suite", be_suite)
      ->check(CLI::IsMember({"sweep", "descriptors", "ablations", "ift-analysis", "all"}))
      ->capture_default_str();
  be->add_option("--out-dir", be_out_dir)->capture_default_str();
  std::string be_axis = "outlier_fraction";
  be->add_option("--axis", be_axis)
      ->check(CLI::IsMember(
          {"outlier_fraction", "noise_sigma", "dropout_fraction", "clustered_outliers"}))
      ->capture_default_str();
  std::string be_levels, be_cluster_levels = "0.10:10:0.04,0.10:10:0.06,0.20:20:0.04";
  be->add_option("--levels", be_levels, "Comma list of sweep levels");
  be->add_option("--cluster-levels", be_cluster_levels,
                 "Comma list of fraction:cluster_size:sigma triples")
      ->capture_default_str();
  int be_trials = 3;
  be->add_option("--trials", be_trials)->capture_default_str();
  std::string be_ablations = "ift,no_fc,shell_count,layer_count";
  be->add_option("--ablations", be_ablations, "Comma list of ablation groups")
      ->capture_default_str();
  int be_epochs = 20;
  be->add_option("--bench-epochs", be_epochs, "Training epochs for bench-internal models")
      ->capture_default_str();
  bool be_no_stamp = false;
  be->add_flag("--no-stamp", be_no_stamp, "Omit the timestamp from result file names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const std::uint64_t effective_seed = static_cast<std::uint64_t>(resolve_seed(seed));
  echo("seed", std::to_string(effective_seed));
  echo("threads", std::to_string(threads));

  if (gen->parsed()) {
    GenerateConfig cfg;
    if (gen_classes != "all") {
      cfg.classes.clear();
      std::stringstream ss(gen_classes);
      std::string cls;
      while (std::getline(ss, cls, ',')) {
        if (!cls.empty()) cfg.classes.push_back(cls);
      }
    }
    cfg.per_class = per_class;
    cfg.points = gen_points;
    cfg.seed = effective_seed;
    echo("per_class", std::to_string(per_class));
    echo("points", std::to_string(gen_points));
    echo("test_fraction", std::to_string(test_fraction));
    const LabeledDataset all = generate_primitives(cfg);
    auto [train_split, test_split] = split_dataset(all, test_fraction, cfg.seed);
    save_dataset(train_split, test_split, gen_out, cfg);
    std::cout << "generated " << all.size() << " samples (" << train_split.size() << " train, "
              << test_split.size() << " test) in " << gen_out << "\n";
    return 0;
  }

  if (vox->parsed()) {
    GridSpec spec;
    spec.shells = vox_shells;
    spec.resolution = vox_resolution;
    spec.mode = parse_mode(vox_mode);
    echo("shells", std::to_string(vox_shells));
    echo("resolution", std::to_string(vox_resolution));
    echo("mode", vox_mode);
    const PointCloud pc = normalize_unit_ball(load_point_cloud(vox_in));
    save_grid(voxelize(pc, spec), vox_out);
    std::cout << "wrote grid " << vox_out << "\n";
    return 0;
  }

  if (xf->parsed()) {
    GridSpec spec;
    spec.shells = xf_shells;
    spec.resolution = xf_resolution;
    spec.mode = parse_mode(xf_mode);
    echo("shells", std::to_string(xf_shells));
    echo("resolution", std::to_string(xf_resolution));
    echo("degree", std::to_string(xf_degree));
    const PointCloud pc = normalize_unit_ball(load_point_cloud(xf_in));
    const SphericalVoxelGrid grid = voxelize(pc, spec);
    const Transform tf(xf_resolution, xf_degree);
    std::vector<SHSpectrum> spectra;
    spectra.reserve(xf_shells);
    for (int s = 0; s < xf_shells; ++s) spectra.push_back(tf.forward(shell_signal(grid, s)));
    save_spectra(spectra, xf_out);
    std::cout << "wrote spectra " << xf_out << "\n";
    return 0;
  }

  if (tr->parsed()) {
    const LabeledDataset train_set = load_dataset(tr_data, Split::train);
    const NetConfig net = tr_net.to_config(static_cast<int>(train_set.class_names.size()));
    TrainConfig cfg;
    cfg.batch_size = tr_batch;
    cfg.epochs = tr_epochs;
    cfg.lr_start = lr_start;
    cfg.lr_end = lr_end;
    cfg.noise_std = tr_noise;
    cfg.rotate = !tr_no_rotate;
    cfg.seed = effective_seed;
    cfg.threads = threads;
    echo("filters", std::to_string(net.filters));
    echo("shells", std::to_string(net.shells));
    echo("resolution", std::to_string(net.resolution));
    echo("degree", std::to_string(net.degree));
    echo("layers", std::to_string(net.conv_layers));
    echo("ift", net.use_ift ? "on" : "off");
    echo("fc", net.use_fc ? "on" : "off");
    echo("epochs", std::to_string(tr_epochs));
    echo("batch", std::to_string(tr_batch));
    auto [params, history] = train(train_set, net, cfg);
    save_checkpoint(params, tr_out);
    if (!tr_history.empty()) write_history_csv(history, tr_history);
    std::cout << "final train accuracy " << history.back().train_accuracy << ", checkpoint "
              << tr_out << "\n";
    return 0;
  }

  if (ev->parsed()) {
    const ModelParams params = load_checkpoint(ev_model);
    const LabeledDataset ds =
        load_dataset(ev_data, ev_split == "train" ? Split::train : Split::test);
    const EvalResult result = evaluate(params, ds, threads);
    char acc[32];
    std::snprintf(acc, sizeof(acc), "%.4f", result.accuracy);
    std::cout << "accuracy " << acc << " on " << ds.size() << " samples\n";
    if (!ev_confusion.empty()) {
      std::ofstream os(ev_confusion);
      if (!os) throw std::runtime_error("cannot write " + ev_confusion);
      os << "true\\pred";
      for (const std::string& name : ds.class_names) os << ',' << name;
      os << '\n';
      for (int t = 0; t < result.classes; ++t) {
        os << ds.class_names[t];
        for (int p = 0; p < result.classes; ++p) os << ',' << result.confusion_at(t, p);
        os << '\n';
      }
    }
    return 0;
  }

  if (be->parsed()) {
    const bool stamp = !be_no_stamp;
    std::filesystem::create_directories(be_out_dir);
    const auto out_path = [&](const std::string& id) {
      return (std::filesystem::path(be_out_dir) / auto_result_name(id, stamp)).string();
    };
    const LabeledDataset test_set = load_dataset(be_data, Split::test);
    echo("suite", be_suite);

    if (be_suite == "sweep" || be_suite == "all" || be_suite == "ift-analysis") {
      if (be_model.empty())
        throw std::runtime_error("bench: --model is required for this suite");
    }

    if (be_suite == "sweep" || be_suite == "all") {
      const ModelParams params = load_checkpoint(be_model);
      SweepSpec spec;
      spec.trials = be_trials;
      spec.seed = effective_seed;
      if (be_axis == "outlier_fraction") spec.axis = SweepAxis::outlier_fraction;
      if (be_axis == "noise_sigma") spec.axis = SweepAxis::noise_sigma;
      if (be_axis == "dropout_fraction") spec.axis = SweepAxis::dropout_fraction;
      if (be_axis == "clustered_outliers") spec.axis = SweepAxis::clustered_outliers;
      if (spec.axis == SweepAxis::clustered_outliers) {
        spec.levels = parse_cluster_levels(be_cluster_levels);
      } else {
        std::string levels = be_levels;
        if (levels.empty()) {
          if (spec.axis == SweepAxis::outlier_fraction) levels = "0,0.1,0.2,0.3,0.4,0.5";
          if (spec.axis == SweepAxis::noise_sigma) levels = "0,0.02,0.04,0.06,0.08,0.10";
          if (spec.axis == SweepAxis::dropout_fraction) levels = "0,0.25,0.5,0.75,0.9";
        }
        for (const double v : parse_levels(levels)) spec.levels.push_back(SweepLevel{v, 0, 0.0});
      }
      const ResultTable table = run_sweep(params, test_set, spec, threads);
      const std::string path = out_path("sweep_" + be_axis);
      emit_csv(table, path);
      std::cout << "wrote " << path << "\n";
    }

    if (be_suite == "descriptors" || be_suite == "all") {
      const LabeledDataset train_set = load_dataset(be_data, Split::train);
      DescriptorComparisonConfig cfg;
      cfg.trials = be_trials;
      cfg.seed = effective_seed;
      cfg.threads = threads;
      const ResultTable table = run_descriptor_comparison(train_set, test_set, cfg);
      const std::string path = out_path("descriptor_comparison");
      emit_csv(table, path);
      std::cout << "wrote " << path << "\n";
    }

    if (be_suite == "ablations" || be_suite == "all") {
      const LabeledDataset train_set = load_dataset(be_data, Split::train);
      std::vector<std::string> which;
      std::stringstream ss(be_ablations);
      std::string name;
      while (std::getline(ss, name, ',')) {
        if (!name.empty()) which.push_back(name);
      }
      AblationConfig cfg;
      cfg.trials = be_trials;
      cfg.train.seed = effective_seed;
      cfg.train.threads = threads;
      cfg.train.epochs = be_epochs;
      const ResultTable table = run_ablations(train_set, test_set, which, cfg);
      const std::string path = out_path("ablations");
      emit_csv(table, path);
      std::cout << "wrote " << path << "\n";
    }

    if (be_suite == "ift-analysis" || be_suite == "all") {
      const ModelParams params = load_checkpoint(be_model);
      const SignalAnalysisReport report =
          run_ift_signal_analysis(test_set.clouds.front(), params, 0.5, effective_seed);
      const std::string path = out_path("ift_signal_analysis");
      emit_signal_analysis_csv(report, path);
      std::cout << "wrote " << path << "\n";
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
