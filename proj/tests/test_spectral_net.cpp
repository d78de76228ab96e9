#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "sphclass/datasets.hpp"
#include "sphclass/rng.hpp"
#include "sphclass/spectral_net.hpp"

using namespace sphclass;

namespace {

constexpr double kPi = 3.141592653589793238462643;
constexpr double kFourPi = 4.0 * kPi;

SHSpectrum random_real_spectrum(int L, std::uint64_t seed) {
  SplitMix64 rng(seed);
  SHSpectrum spec(L);
  for (int l = 0; l <= L; ++l) {
    spec.at(l, 0) = {rng.next_uniform(-1.0, 1.0), 0.0};
    for (int m = 1; m <= l; ++m)
      spec.at(l, m) = {rng.next_uniform(-1.0, 1.0), rng.next_uniform(-1.0, 1.0)};
  }
  return spec;
}

PointCloud random_ball_cloud(std::size_t n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  PointCloud pc;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = rng.next_uniform(-1.0, 1.0);
    const double phi = rng.next_uniform(0.0, 2.0 * kPi);
    const double r = std::cbrt(rng.next_double());
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    pc.points.push_back(Vec3{r * s * std::cos(phi), r * s * std::sin(phi), r * z});
  }
  return normalize_unit_ball(pc);
}

// Plain Legendre polynomial (no normalization), for the spatial kernel
// profile of the convolution oracle.
double legendre_p(int l, double x) {
  if (l == 0) return 1.0;
  double pm1 = 1.0, p = x;
  for (int d = 2; d <= l; ++d) {
    const double pn = ((2.0 * d - 1.0) * x * p - (d - 1.0) * pm1) / d;
    pm1 = p;
    p = pn;
  }
  return p;
}

// All trainable tensors of a model, for finite-difference sweeps.
std::vector<std::vector<double>*> param_tensors(ModelParams& p) {
  std::vector<std::vector<double>*> out;
  for (ConvLayer& layer : p.conv) {
    out.push_back(&layer.kernels.value);
    out.push_back(&layer.slopes.value);
  }
  if (p.cfg.use_fc) {
    out.push_back(&p.fc.W.value);
    out.push_back(&p.fc.b.value);
    out.push_back(&p.fc_slopes.value);
  }
  out.push_back(&p.cls.W.value);
  out.push_back(&p.cls.b.value);
  return out;
}

std::vector<const std::vector<double>*> grad_tensors(const Gradients& g, const NetConfig& cfg) {
  std::vector<const std::vector<double>*> out;
  for (std::size_t t = 0; t < g.conv_kernels.size(); ++t) {
    out.push_back(&g.conv_kernels[t]);
    out.push_back(&g.conv_slopes[t]);
  }
  if (cfg.use_fc) {
    out.push_back(&g.fc_W);
    out.push_back(&g.fc_b);
    out.push_back(&g.fc_slopes);
  }
  out.push_back(&g.cls_W);
  out.push_back(&g.cls_b);
  return out;
}

}  // namespace

TEST_CASE("zonal convolution with the identity kernel is the identity") {
  const int L = 4, shells = 3;
  std::vector<SHSpectrum> input;
  for (int s = 0; s < shells; ++s) input.push_back(random_real_spectrum(L, 10 + s));

  ZonalKernel kernel;
  kernel.filters = 2;
  kernel.shells = shells;
  kernel.degree = L;
  kernel.h.resize(2 * shells * (L + 1));
  for (int f = 0; f < 2; ++f)
    for (int s = 0; s < shells; ++s)
      for (int l = 0; l <= L; ++l) kernel.at(f, s, l) = std::sqrt((2.0 * l + 1.0) / kFourPi);

  const auto out = zonal_conv(input, kernel);
  REQUIRE(out.size() == 2);
  for (int f = 0; f < 2; ++f) {
    for (int s = 0; s < shells; ++s) {
      for (std::size_t i = 0; i < input[s].coeffs.size(); ++i) {
        CHECK(std::abs(out[f][s].coeffs[i] - input[s].coeffs[i]) < 1e-14);
      }
    }
  }
}

TEST_CASE("zonal convolution: l=0 gain and linearity") {
  const int L = 3;
  const SHSpectrum a = random_real_spectrum(L, 1);
  const SHSpectrum b = random_real_spectrum(L, 2);

  ZonalKernel kernel;
  kernel.filters = 1;
  kernel.shells = 1;
  kernel.degree = L;
  kernel.h = {0.7, -0.2, 1.3, 0.4};

  const auto ca = zonal_conv({a}, kernel);
  CHECK(std::abs(ca[0][0].at(0, 0) - std::sqrt(kFourPi) * a.at(0, 0) * 0.7) < 1e-14);

  SHSpectrum mix(L);
  for (std::size_t i = 0; i < mix.coeffs.size(); ++i)
    mix.coeffs[i] = 2.0 * a.coeffs[i] - 0.5 * b.coeffs[i];
  const auto cm = zonal_conv({mix}, kernel);
  const auto cb = zonal_conv({b}, kernel);
  for (std::size_t i = 0; i < mix.coeffs.size(); ++i) {
    const std::complex<double> expect = 2.0 * ca[0][0].coeffs[i] - 0.5 * cb[0][0].coeffs[i];
    CHECK(std::abs(cm[0][0].coeffs[i] - expect) < 1e-14);
  }
}

TEST_CASE("convolution theorem matches the spatial quadrature oracle") {
  const int n = 16, L = 4;
  const Transform tf(n, L);

  const SHSpectrum fspec = random_real_spectrum(L, 21);
  const SphericalSignal f = tf.inverse(fspec);

  SplitMix64 rng(22);
  ZonalKernel kernel;
  kernel.filters = 1;
  kernel.shells = 1;
  kernel.degree = L;
  kernel.h.resize(L + 1);
  for (double& h : kernel.h) h = rng.next_uniform(-1.0, 1.0);

  // Spectral route: Eq-style product then synthesis.
  const auto conv = zonal_conv({fspec}, kernel);
  const auto maps = inverse_after_conv(conv, n);
  const SphericalSignal& spectral = maps[0][0];

  // Spatial route: direct quadrature of the zonal kernel profile.
  auto kernel_profile = [&](double cos_gamma) {
    double acc = 0.0;
    for (int l = 0; l <= L; ++l)
      acc += kernel.h[l] * std::sqrt((2.0 * l + 1.0) / kFourPi) * legendre_p(l, cos_gamma);
    return acc;
  };
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    const double t1 = tf.theta_node(j);
    for (int k = 0; k < n; ++k) {
      const double p1 = tf.phi_node(k);
      const double x1 = std::sin(t1) * std::cos(p1);
      const double y1 = std::sin(t1) * std::sin(p1);
      const double z1 = std::cos(t1);
      double acc = 0.0;
      for (int jj = 0; jj < n; ++jj) {
        const double t2 = tf.theta_node(jj);
        const double wj = tf.weights().w[jj] * (2.0 * kPi / n);
        for (int kk = 0; kk < n; ++kk) {
          const double p2 = tf.phi_node(kk);
          const double dot = x1 * std::sin(t2) * std::cos(p2) + y1 * std::sin(t2) * std::sin(p2) +
                             z1 * std::cos(t2);
          acc += wj * f.at(jj, kk) * kernel_profile(std::min(1.0, std::max(-1.0, dot)));
        }
      }
      worst = std::max(worst, std::abs(acc - spectral.at(j, k)));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("inverse after conv: identity kernel reproduces band-limited input") {
  const int n = 16, L = 4, shells = 2;
  const Transform tf(n, L);
  std::vector<SHSpectrum> input;
  std::vector<SphericalSignal> signals;
  for (int s = 0; s < shells; ++s) {
    input.push_back(random_real_spectrum(L, 40 + s));
    signals.push_back(tf.inverse(input.back()));
  }

  ZonalKernel identity;
  identity.filters = 1;
  identity.shells = shells;
  identity.degree = L;
  identity.h.resize(shells * (L + 1));
  for (int s = 0; s < shells; ++s)
    for (int l = 0; l <= L; ++l) identity.at(0, s, l) = std::sqrt((2.0 * l + 1.0) / kFourPi);

  const auto maps = inverse_after_conv(zonal_conv(input, identity), n);
  for (int s = 0; s < shells; ++s) {
    for (std::size_t i = 0; i < signals[s].values.size(); ++i)
      CHECK(std::abs(maps[0][s].values[i] - signals[s].values[i]) < 1e-10);
  }

  ZonalKernel zero = identity;
  std::fill(zero.h.begin(), zero.h.end(), 0.0);
  const auto zmaps = inverse_after_conv(zonal_conv(input, zero), n);
  for (const auto& shell : zmaps[0]) {
    for (const double v : shell.values) CHECK(v == 0.0);
  }
}

TEST_CASE("magnitude features: length, zero case, and phase invariance") {
  const int L = 9, shells = 7, filters = 16;
  std::vector<std::vector<SHSpectrum>> conv(filters);
  for (int f = 0; f < filters; ++f)
    for (int s = 0; s < shells; ++s) conv[f].push_back(random_real_spectrum(L, f * 100 + s));

  const std::vector<double> feat = magnitude_features(conv);
  CHECK(feat.size() == 6160);  // 16 * 7 * 55

  std::vector<std::vector<SHSpectrum>> zero(2, std::vector<SHSpectrum>(3, SHSpectrum(2)));
  for (const double v : magnitude_features(zero)) CHECK(v == 0.0);

  const std::complex<double> phase = std::polar(1.0, 0.87);
  std::vector<std::vector<SHSpectrum>> rotated = conv;
  for (auto& filter : rotated)
    for (auto& spec : filter)
      for (auto& c : spec.coeffs) c *= phase;
  const std::vector<double> feat2 = magnitude_features(rotated);
  for (std::size_t i = 0; i < feat.size(); ++i) CHECK(std::abs(feat[i] - feat2[i]) < 1e-12);
}

TEST_CASE("forward pass produces deterministic, well-formed logits") {
  NetConfig cfg;
  cfg.filters = 4;
  cfg.shells = 3;
  cfg.resolution = 16;
  cfg.degree = 4;
  cfg.hidden = 32;
  cfg.classes = 5;
  ModelParams params;
  params.cfg = cfg;
  params.init(77);

  const PointCloud pc = random_ball_cloud(256, 3);
  const std::vector<double> logits = forward_pass(pc, params);
  REQUIRE(logits.size() == 5);

  double mx = logits[0];
  for (const double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (const double v : logits) sum += std::exp(v - mx);
  double softmax_sum = 0.0;
  for (const double v : logits) softmax_sum += std::exp(v - mx) / sum;
  CHECK(std::abs(softmax_sum - 1.0) < 1e-12);

  const std::vector<double> again = forward_pass(pc, params);
  for (std::size_t i = 0; i < logits.size(); ++i) CHECK(logits[i] == again[i]);
}

TEST_CASE("uniform logits give ln(C) loss") {
  NetConfig cfg;
  cfg.filters = 2;
  cfg.shells = 2;
  cfg.resolution = 8;
  cfg.degree = 2;
  cfg.hidden = 4;
  cfg.classes = 6;
  ModelParams params;
  params.cfg = cfg;
  params.init(1);
  // Zero classifier weights and bias: all logits identical.
  std::fill(params.cls.W.value.begin(), params.cls.W.value.end(), 0.0);
  std::fill(params.cls.b.value.begin(), params.cls.b.value.end(), 0.0);

  const std::vector<PointCloud> clouds = {random_ball_cloud(64, 4), random_ball_cloud(64, 5)};
  const std::vector<int> labels = {0, 3};
  const auto [loss, grads] = loss_and_gradients(clouds, labels, params);
  (void)grads;
  CHECK(loss == doctest::Approx(std::log(6.0)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences on the tiny net") {
  NetConfig cfg;
  cfg.filters = 2;
  cfg.shells = 2;
  cfg.resolution = 8;
  cfg.degree = 2;
  cfg.hidden = 8;
  cfg.classes = 3;
  cfg.conv_layers = 2;  // also exercises channel mixing and the inter-layer PReLU

  for (const bool use_ift : {false, true}) {
    ModelParams params;
    params.cfg = cfg;
    params.cfg.use_ift = use_ift;
    params.init(9001);

    std::vector<PointCloud> clouds;
    std::vector<int> labels;
    for (int i = 0; i < 3; ++i) {
      clouds.push_back(random_ball_cloud(96, 50 + i));
      labels.push_back(i % 3);
    }

    const auto [loss0, grads] = loss_and_gradients(clouds, labels, params);
    (void)loss0;
    const auto analytic = grad_tensors(grads, params.cfg);
    auto tensors = param_tensors(params);
    REQUIRE(analytic.size() == tensors.size());

    const double eps = 1e-4;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      std::vector<double>& values = *tensors[t];
      // Probe a subset of large tensors; slopes/biases are small enough to
      // sweep completely.
      const std::size_t stride = std::max<std::size_t>(1, values.size() / 24);
      for (std::size_t i = 0; i < values.size(); i += stride) {
        const double saved = values[i];
        values[i] = saved + eps;
        const double lp = loss_and_gradients(clouds, labels, params).first;
        values[i] = saved - eps;
        const double lm = loss_and_gradients(clouds, labels, params).first;
        values[i] = saved;
        const double fd = (lp - lm) / (2.0 * eps);
        const double an = (*analytic[t])[i];
        const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
        CHECK(rel < 1e-4);
      }
    }
  }
}

TEST_CASE("zero-kernel model still receives kernel gradients") {
  NetConfig cfg;
  cfg.filters = 2;
  cfg.shells = 2;
  cfg.resolution = 8;
  cfg.degree = 2;
  cfg.hidden = 8;
  cfg.classes = 3;
  ModelParams params;
  params.cfg = cfg;
  params.init(11);
  std::fill(params.conv[0].kernels.value.begin(), params.conv[0].kernels.value.end(), 0.0);

  const std::vector<PointCloud> clouds = {random_ball_cloud(96, 1), random_ball_cloud(96, 2)};
  const std::vector<int> labels = {0, 2};
  const auto [loss, grads] = loss_and_gradients(clouds, labels, params);
  (void)loss;
  double norm = 0.0;
  for (const double g : grads.conv_kernels[0]) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("training separates a two-class toy set and follows the lr schedule") {
  GenerateConfig gen;
  gen.classes = {"sphere", "cube"};
  gen.per_class = 10;
  gen.points = 256;
  gen.seed = 5;
  const LabeledDataset toy = generate_primitives(gen);

  NetConfig net;
  net.filters = 4;
  net.shells = 3;
  net.resolution = 16;
  net.degree = 4;
  net.hidden = 32;
  net.classes = 2;

  TrainConfig tc;
  tc.epochs = 20;
  tc.batch_size = 4;
  tc.lr_start = tc.lr_end = 3e-3;  // constant rate; the decayed tail is for long runs
  tc.seed = 3;
  tc.threads = 1;

  const auto [params, history] = train(toy, net, tc);
  REQUIRE(history.size() == 20);
  CHECK(history.front().lr == doctest::Approx(3e-3).epsilon(1e-12));
  // Per-epoch accuracy is measured on freshly augmented samples; it must
  // reach 1.0 somewhere within the 20 epochs.
  double best = 0.0;
  for (const EpochStats& s : history) best = std::max(best, s.train_accuracy);
  CHECK(best == doctest::Approx(1.0));

  // Endpoint check on the paper schedule length.
  TrainConfig full;
  full.epochs = 48;
  CHECK(full.lr_at(0) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(std::abs(full.lr_at(47) - 0.00004) < 1e-9);

  const EvalResult on_train = evaluate(params, toy);
  CHECK(on_train.accuracy == doctest::Approx(1.0));
}

TEST_CASE("training is deterministic for a fixed seed, regardless of threads") {
  GenerateConfig gen;
  gen.classes = {"sphere", "cube"};
  gen.per_class = 6;
  gen.points = 128;
  gen.seed = 8;
  const LabeledDataset toy = generate_primitives(gen);

  NetConfig net;
  net.filters = 2;
  net.shells = 2;
  net.resolution = 8;
  net.degree = 2;
  net.hidden = 8;
  net.classes = 2;

  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.seed = 99;

  tc.threads = 1;
  const auto [p1, h1] = train(toy, net, tc);
  tc.threads = 2;
  const auto [p2, h2] = train(toy, net, tc);
  CHECK(model_hash(p1) == model_hash(p2));
  for (std::size_t e = 0; e < h1.size(); ++e) {
    CHECK(h1[e].loss == h2[e].loss);
    CHECK(h1[e].train_accuracy == h2[e].train_accuracy);
  }

  save_checkpoint(p1, "net_a.ckpt");
  save_checkpoint(p2, "net_b.ckpt");
  std::ifstream fa("net_a.ckpt", std::ios::binary), fb("net_b.ckpt", std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);
  std::remove("net_a.ckpt");
  std::remove("net_b.ckpt");
}

TEST_CASE("evaluate: chance level on random labels and confusion row sums") {
  SplitMix64 rng(123);
  LabeledDataset ds;
  ds.class_names.resize(40);
  for (int c = 0; c < 40; ++c) ds.class_names[c] = "class_" + std::to_string(c);
  for (int i = 0; i < 2000; ++i) {
    ds.clouds.push_back(random_ball_cloud(64, 1000 + i));
    ds.labels.push_back(static_cast<int>(rng.next_index(40)));
  }

  NetConfig cfg;
  cfg.filters = 2;
  cfg.shells = 2;
  cfg.resolution = 8;
  cfg.degree = 2;
  cfg.hidden = 8;
  cfg.classes = 40;
  ModelParams params;
  params.cfg = cfg;
  params.init(7);

  const EvalResult result = evaluate(params, ds, 2);
  CHECK(std::abs(result.accuracy - 0.025) < 0.015);  // ~4 binomial sigmas

  std::vector<int> per_class(40, 0);
  for (const int label : ds.labels) ++per_class[label];
  for (int t = 0; t < 40; ++t) {
    int row = 0;
    for (int p = 0; p < 40; ++p) row += result.confusion_at(t, p);
    CHECK(row == per_class[t]);
  }
}

TEST_CASE("checkpoint round trip is bit-exact and shape-checked") {
  NetConfig cfg;
  cfg.filters = 3;
  cfg.shells = 2;
  cfg.resolution = 8;
  cfg.degree = 2;
  cfg.hidden = 8;
  cfg.classes = 4;
  ModelParams params;
  params.cfg = cfg;
  params.init(55);
  params.adam_step = 17;

  save_checkpoint(params, "ckpt_test.bin");
  const ModelParams loaded = load_checkpoint("ckpt_test.bin");
  CHECK(loaded.cfg == params.cfg);
  CHECK(loaded.adam_step == 17);
  for (std::size_t i = 0; i < params.conv[0].kernels.value.size(); ++i)
    CHECK(loaded.conv[0].kernels.value[i] == params.conv[0].kernels.value[i]);
  for (std::size_t i = 0; i < params.fc.W.value.size(); ++i)
    CHECK(loaded.fc.W.value[i] == params.fc.W.value[i]);

  save_checkpoint(loaded, "ckpt_test2.bin");
  std::ifstream fa("ckpt_test.bin", std::ios::binary), fb("ckpt_test2.bin", std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  const std::string bb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);

  // Truncation leaves no partial state, just an error.
  std::ofstream trunc("ckpt_trunc.bin", std::ios::binary);
  trunc.write(ba.data(), static_cast<std::streamsize>(ba.size() / 2));
  trunc.close();
  CHECK_THROWS(load_checkpoint("ckpt_trunc.bin"));

  NetConfig other = cfg;
  other.filters = 5;
  CHECK_THROWS(load_checkpoint("ckpt_test.bin", &other));
  CHECK_THROWS(load_checkpoint("no_such_file.bin"));

  std::remove("ckpt_test.bin");
  std::remove("ckpt_test2.bin");
  std::remove("ckpt_trunc.bin");
}
