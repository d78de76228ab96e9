#include "sphclass/spectral_net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sphclass/augment.hpp"
#include "sphclass/binary_io.hpp"
#include "sphclass/datasets.hpp"
#include "sphclass/parallel.hpp"

namespace sphclass {

namespace {

constexpr double kPi = 3.141592653589793238462643;
constexpr double kFourPi = 4.0 * kPi;
constexpr double kInvSqrt2 = 0.7071067811865475244008444;

inline double quantize(double x) { return static_cast<double>(static_cast<float>(x)); }

inline double prelu(double x, double a) { return x > 0.0 ? x : a * x; }
inline double prelu_grad(double x, double a) { return x > 0.0 ? 1.0 : a; }

}  // namespace

void NetConfig::validate() const {
  if (filters < 1) throw std::invalid_argument("net: filters must be >= 1");
  if (shells < 1) throw std::invalid_argument("net: shells must be >= 1");
  if (resolution < 2 || (resolution % 2) != 0)
    throw std::invalid_argument("net: resolution must be a positive even integer");
  if (degree < 0) throw std::invalid_argument("net: degree must be >= 0");
  if (resolution < 2 * (degree + 1))
    throw std::invalid_argument("net: resolution must satisfy n >= 2(L+1)");
  if (use_fc && hidden < 1) throw std::invalid_argument("net: hidden width must be >= 1");
  if (classes < 2) throw std::invalid_argument("net: need at least two classes");
  if (conv_layers < 1 || conv_layers > 4)
    throw std::invalid_argument("net: conv_layers must be in 1..4");
}

std::size_t NetConfig::feature_dim() const {
  const std::size_t per_shell =
      use_ift ? static_cast<std::size_t>(resolution) * resolution : coeff_count();
  return static_cast<std::size_t>(filters) * shells * per_shell;
}

void ModelParams::init(std::uint64_t seed) {
  cfg.validate();
  SplitMix64 rng(derive_seed(seed, 0x5048434cULL));

  conv.clear();
  conv.resize(cfg.conv_layers);
  const std::size_t degrees = static_cast<std::size_t>(cfg.degree) + 1;
  for (int t = 0; t < cfg.conv_layers; ++t) {
    ConvLayer& layer = conv[t];
    layer.in_channels = (t == 0) ? 1 : cfg.filters;
    layer.out_channels = cfg.filters;
    layer.kernels.resize(static_cast<std::size_t>(layer.out_channels) * layer.in_channels *
                         cfg.shells * degrees);
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(degrees * layer.in_channels));
    for (double& w : layer.kernels.value) w = quantize(std_dev * rng.next_normal());
    layer.slopes.resize(static_cast<std::size_t>(layer.out_channels));
    std::fill(layer.slopes.value.begin(), layer.slopes.value.end(), 0.25);
  }

  const int feat = static_cast<int>(cfg.feature_dim());
  if (cfg.use_fc) {
    fc.init(feat, cfg.hidden, rng);
    fc_slopes.resize(static_cast<std::size_t>(cfg.hidden));
    std::fill(fc_slopes.value.begin(), fc_slopes.value.end(), 0.25);
    cls.init(cfg.hidden, cfg.classes, rng);
  } else {
    fc = nn::DenseLayer{};
    fc_slopes = nn::Param{};
    cls.init(feat, cfg.classes, rng);
  }
  adam_step = 0;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
  if (!(lr_start >= lr_end && lr_end > 0.0))
    throw std::invalid_argument("train: require lr_start >= lr_end > 0");
  if (noise_std < 0.0) throw std::invalid_argument("train: noise_std must be >= 0");
}

double TrainConfig::lr_at(int epoch) const {
  if (epochs <= 1) return lr_start;
  const double t = static_cast<double>(epoch) / (epochs - 1);
  return lr_start * std::pow(lr_end / lr_start, t);
}

// --- public spectral building blocks --------------------------------------

std::vector<std::vector<SHSpectrum>> zonal_conv(const std::vector<SHSpectrum>& shells,
                                                const ZonalKernel& kernel) {
  if (static_cast<int>(shells.size()) != kernel.shells)
    throw std::invalid_argument("net: shell count mismatch");
  for (const SHSpectrum& s : shells) {
    if (s.degree != kernel.degree) throw std::invalid_argument("net: kernel degree mismatch");
  }
  const int L = kernel.degree;
  std::vector<std::vector<SHSpectrum>> out(kernel.filters);
  for (int f = 0; f < kernel.filters; ++f) {
    out[f].reserve(shells.size());
    for (int s = 0; s < kernel.shells; ++s) {
      SHSpectrum conv(L);
      for (int l = 0; l <= L; ++l) {
        const double gain = std::sqrt(kFourPi / (2.0 * l + 1.0)) * kernel.at(f, s, l);
        for (int m = 0; m <= l; ++m) conv.at(l, m) = gain * shells[s].at(l, m);
      }
      out[f].push_back(std::move(conv));
    }
  }
  return out;
}

std::vector<std::vector<SphericalSignal>> inverse_after_conv(
    const std::vector<std::vector<SHSpectrum>>& convolved, int n) {
  if (convolved.empty() || convolved.front().empty())
    throw std::invalid_argument("net: empty convolution output");
  Transform tf(n, convolved.front().front().degree);
  std::vector<std::vector<SphericalSignal>> maps(convolved.size());
  for (std::size_t f = 0; f < convolved.size(); ++f) {
    maps[f].reserve(convolved[f].size());
    for (const SHSpectrum& s : convolved[f]) maps[f].push_back(tf.inverse(s));
  }
  return maps;
}

std::vector<double> magnitude_features(const std::vector<std::vector<SHSpectrum>>& convolved) {
  std::vector<double> out;
  for (const auto& filter : convolved) {
    for (const SHSpectrum& s : filter) {
      for (const std::complex<double>& c : s.coeffs) out.push_back(std::abs(c));
    }
  }
  return out;
}

// --- internal engine --------------------------------------------------------

namespace {

// Everything precomputable for one network configuration: the per-shell
// transform and the per-degree convolution gain sqrt(4 pi / (2l+1)).
struct Engine {
  NetConfig cfg;
  Transform tf;
  std::vector<double> gain;
  int c;
  int n;
  std::size_t nlm;

  explicit Engine(const NetConfig& config)
      : cfg(config), tf(config.resolution, config.degree) {
    cfg.validate();
    c = cfg.shells;
    n = cfg.resolution;
    nlm = cfg.coeff_count();
    gain.resize(cfg.degree + 1);
    for (int l = 0; l <= cfg.degree; ++l) gain[l] = std::sqrt(kFourPi / (2.0 * l + 1.0));
  }

  void spectra_from_grid(const SphericalVoxelGrid& grid, double* re, double* im) const {
    for (int s = 0; s < c; ++s) {
      const SHSpectrum spec = tf.forward(shell_signal(grid, s));
      for (std::size_t i = 0; i < nlm; ++i) {
        re[s * nlm + i] = spec.coeffs[i].real();
        im[s * nlm + i] = spec.coeffs[i].imag();
      }
    }
  }

  void spectra_from_cloud(const PointCloud& pc, double* re, double* im) const {
    GridSpec gs;
    gs.shells = c;
    gs.resolution = n;
    gs.mode = cfg.mode;
    spectra_from_grid(voxelize(pc, gs), re, im);
  }

  // Real synthesis of one (re, im) coefficient block onto the grid, same
  // convention as Transform::inverse (zonal imaginary parts are ignored).
  void synth(const double* o_re, const double* o_im, double* v) const {
    const int L = cfg.degree;
    std::vector<double> are(L + 1), aim(L + 1);
    for (int j = 0; j < n; ++j) {
      for (int m = 0; m <= L; ++m) {
        double sre = 0.0, sim = 0.0;
        for (int l = m; l <= L; ++l) {
          const std::size_t idx = SHSpectrum::index(l, m);
          const double p = tf.legendre(j, idx);
          sre += p * o_re[idx];
          if (m > 0) sim += p * o_im[idx];
        }
        const double cm = (m == 0) ? 1.0 : 2.0;
        are[m] = cm * sre;
        aim[m] = cm * sim;
      }
      for (int k = 0; k < n; ++k) {
        double acc = are[0];
        for (int m = 1; m <= L; ++m)
          acc += are[m] * tf.cos_m_phi(m, k) - aim[m] * tf.sin_m_phi(m, k);
        v[static_cast<std::size_t>(j) * n + k] = acc;
      }
    }
  }

  // Adjoint of synth: accumulate coefficient-space gradients from a
  // grid-space gradient.
  void synth_adjoint(const double* dv, double* do_re, double* do_im) const {
    const int L = cfg.degree;
    std::vector<double> bc(L + 1), bs(L + 1);
    std::fill(do_re, do_re + nlm, 0.0);
    std::fill(do_im, do_im + nlm, 0.0);
    for (int j = 0; j < n; ++j) {
      const double* row = dv + static_cast<std::size_t>(j) * n;
      for (int m = 0; m <= L; ++m) {
        double cc = 0.0, cs = 0.0;
        for (int k = 0; k < n; ++k) {
          cc += row[k] * tf.cos_m_phi(m, k);
          cs += row[k] * tf.sin_m_phi(m, k);
        }
        bc[m] = cc;
        bs[m] = cs;
      }
      for (int m = 0; m <= L; ++m) {
        const double cm = (m == 0) ? 1.0 : 2.0;
        for (int l = m; l <= L; ++l) {
          const std::size_t idx = SHSpectrum::index(l, m);
          const double p = tf.legendre(j, idx);
          do_re[idx] += cm * p * bc[m];
          if (m > 0) do_im[idx] -= cm * p * bs[m];
        }
      }
    }
  }
};

// Forward intermediates for one sample, kept for the backward pass, plus
// backward scratch. One tape per batch slot, reused across batches.
struct SampleTape {
  std::vector<double> in_re, in_im;                  // layer-0 input [c*nlm]
  std::vector<std::vector<double>> o_re, o_im;       // per layer [out*c*nlm]
  std::vector<std::vector<double>> u_re, u_im;       // activated
  std::vector<double> spatial;                       // ift head, pre-activation
  std::vector<double> features;
  std::vector<double> g_re, g_im, gu_re, gu_im, gin_re, gin_im, gv;  // backward scratch
};

struct SampleGrads {
  std::vector<std::vector<double>> kernels;
  std::vector<std::vector<double>> slopes;

  void reset(const ModelParams& p) {
    kernels.resize(p.conv.size());
    slopes.resize(p.conv.size());
    for (std::size_t t = 0; t < p.conv.size(); ++t) {
      kernels[t].assign(p.conv[t].kernels.size(), 0.0);
      slopes[t].assign(p.conv[t].slopes.size(), 0.0);
    }
  }
};

void conv_forward(const Engine& eng, const ConvLayer& layer, const double* in_re,
                  const double* in_im, double* o_re, double* o_im) {
  const int L = eng.cfg.degree;
  const std::size_t nlm = eng.nlm;
  const std::size_t block = static_cast<std::size_t>(eng.c) * nlm;
  std::fill(o_re, o_re + layer.out_channels * block, 0.0);
  std::fill(o_im, o_im + layer.out_channels * block, 0.0);
  for (int f = 0; f < layer.out_channels; ++f) {
    for (int g = 0; g < layer.in_channels; ++g) {
      for (int s = 0; s < eng.c; ++s) {
        const double* h =
            &layer.kernels.value[((static_cast<std::size_t>(f) * layer.in_channels + g) * eng.c +
                                  s) *
                                 (L + 1)];
        const double* ir = in_re + (static_cast<std::size_t>(g) * eng.c + s) * nlm;
        const double* ii = in_im + (static_cast<std::size_t>(g) * eng.c + s) * nlm;
        double* outr = o_re + (static_cast<std::size_t>(f) * eng.c + s) * nlm;
        double* outi = o_im + (static_cast<std::size_t>(f) * eng.c + s) * nlm;
        for (int l = 0; l <= L; ++l) {
          const double w = eng.gain[l] * h[l];
          const std::size_t base = SHSpectrum::index(l, 0);
          for (int m = 0; m <= l; ++m) {
            outr[base + m] += w * ir[base + m];
            outi[base + m] += w * ii[base + m];
          }
        }
      }
    }
  }
}

// Kernel gradients and (optionally) the gradient w.r.t. the layer input.
void conv_backward(const Engine& eng, const ConvLayer& layer, const double* in_re,
                   const double* in_im, const double* do_re, const double* do_im,
                   double* grad_kernels, double* din_re, double* din_im) {
  const int L = eng.cfg.degree;
  const std::size_t nlm = eng.nlm;
  if (din_re != nullptr) {
    const std::size_t in_block = static_cast<std::size_t>(layer.in_channels) * eng.c * nlm;
    std::fill(din_re, din_re + in_block, 0.0);
    std::fill(din_im, din_im + in_block, 0.0);
  }
  for (int f = 0; f < layer.out_channels; ++f) {
    for (int g = 0; g < layer.in_channels; ++g) {
      for (int s = 0; s < eng.c; ++s) {
        const std::size_t hoff =
            ((static_cast<std::size_t>(f) * layer.in_channels + g) * eng.c + s) * (L + 1);
        const double* ir = in_re + (static_cast<std::size_t>(g) * eng.c + s) * nlm;
        const double* ii = in_im + (static_cast<std::size_t>(g) * eng.c + s) * nlm;
        const double* gr = do_re + (static_cast<std::size_t>(f) * eng.c + s) * nlm;
        const double* gi = do_im + (static_cast<std::size_t>(f) * eng.c + s) * nlm;
        for (int l = 0; l <= L; ++l) {
          const std::size_t base = SHSpectrum::index(l, 0);
          double acc = 0.0;
          for (int m = 0; m <= l; ++m)
            acc += ir[base + m] * gr[base + m] + ii[base + m] * gi[base + m];
          grad_kernels[hoff + l] += eng.gain[l] * acc;
          if (din_re != nullptr) {
            const double w = eng.gain[l] * layer.kernels.value[hoff + l];
            double* dr = din_re + (static_cast<std::size_t>(g) * eng.c + s) * nlm;
            double* di = din_im + (static_cast<std::size_t>(g) * eng.c + s) * nlm;
            for (int m = 0; m <= l; ++m) {
              dr[base + m] += w * gr[base + m];
              di[base + m] += w * gi[base + m];
            }
          }
        }
      }
    }
  }
}

void forward_sample(const Engine& eng, const ModelParams& params, SampleTape& tape) {
  const std::size_t nlm = eng.nlm;
  const std::size_t block = static_cast<std::size_t>(eng.c) * nlm;
  const int layers = static_cast<int>(params.conv.size());
  tape.o_re.resize(layers);
  tape.o_im.resize(layers);
  tape.u_re.resize(layers);
  tape.u_im.resize(layers);

  const double* in_re = tape.in_re.data();
  const double* in_im = tape.in_im.data();
  for (int t = 0; t < layers; ++t) {
    const ConvLayer& layer = params.conv[t];
    tape.o_re[t].resize(layer.out_channels * block);
    tape.o_im[t].resize(layer.out_channels * block);
    conv_forward(eng, layer, in_re, in_im, tape.o_re[t].data(), tape.o_im[t].data());

    const bool spectral_act = !(eng.cfg.use_ift && t == layers - 1);
    if (spectral_act) {
      tape.u_re[t].resize(layer.out_channels * block);
      tape.u_im[t].resize(layer.out_channels * block);
      for (int f = 0; f < layer.out_channels; ++f) {
        const double a = layer.slopes.value[f];
        const std::size_t off = static_cast<std::size_t>(f) * block;
        for (std::size_t i = 0; i < block; ++i) {
          tape.u_re[t][off + i] = prelu(tape.o_re[t][off + i], a);
          tape.u_im[t][off + i] = prelu(tape.o_im[t][off + i], a);
        }
      }
      in_re = tape.u_re[t].data();
      in_im = tape.u_im[t].data();
    }
  }

  const std::size_t feat_dim = eng.cfg.feature_dim();
  tape.features.resize(feat_dim);
  const int last = layers - 1;
  if (eng.cfg.use_ift) {
    // Inverse transform of the raw convolution output, then a spatial PReLU
    // with the last layer's per-filter slopes.
    const std::size_t n2 = static_cast<std::size_t>(eng.n) * eng.n;
    tape.spatial.resize(static_cast<std::size_t>(eng.cfg.filters) * eng.c * n2);
    for (int f = 0; f < eng.cfg.filters; ++f) {
      const double a = params.conv[last].slopes.value[f];
      for (int s = 0; s < eng.c; ++s) {
        const std::size_t coeff_off = (static_cast<std::size_t>(f) * eng.c + s) * nlm;
        double* v = &tape.spatial[(static_cast<std::size_t>(f) * eng.c + s) * n2];
        eng.synth(&tape.o_re[last][coeff_off], &tape.o_im[last][coeff_off], v);
        double* x = &tape.features[(static_cast<std::size_t>(f) * eng.c + s) * n2];
        for (std::size_t i = 0; i < n2; ++i) x[i] = prelu(v[i], a);
      }
    }
  } else {
    for (std::size_t i = 0; i < feat_dim; ++i) {
      const double re = tape.u_re[last][i];
      const double im = tape.u_im[last][i];
      tape.features[i] = std::sqrt(re * re + im * im);
    }
  }
}

void backward_sample(const Engine& eng, const ModelParams& params, SampleTape& tape,
                     const double* dfeat, SampleGrads& grads) {
  const std::size_t nlm = eng.nlm;
  const std::size_t block = static_cast<std::size_t>(eng.c) * nlm;
  const int layers = static_cast<int>(params.conv.size());
  const int last = layers - 1;

  std::vector<double>& do_re = tape.g_re;
  std::vector<double>& do_im = tape.g_im;
  do_re.resize(static_cast<std::size_t>(eng.cfg.filters) * block);
  do_im.resize(do_re.size());

  if (eng.cfg.use_ift) {
    const std::size_t n2 = static_cast<std::size_t>(eng.n) * eng.n;
    std::vector<double>& dv = tape.gv;
    dv.resize(n2);
    for (int f = 0; f < eng.cfg.filters; ++f) {
      const double a = params.conv[last].slopes.value[f];
      double slope_grad = 0.0;
      for (int s = 0; s < eng.c; ++s) {
        const std::size_t grid_off = (static_cast<std::size_t>(f) * eng.c + s) * n2;
        const double* v = &tape.spatial[grid_off];
        const double* dx = dfeat + grid_off;
        for (std::size_t i = 0; i < n2; ++i) {
          dv[i] = dx[i] * prelu_grad(v[i], a);
          slope_grad += dx[i] * std::min(v[i], 0.0);
        }
        const std::size_t coeff_off = (static_cast<std::size_t>(f) * eng.c + s) * nlm;
        eng.synth_adjoint(dv.data(), &do_re[coeff_off], &do_im[coeff_off]);
      }
      grads.slopes[last][f] += slope_grad;
    }
  } else {
    // Magnitude map; at an exact zero use the subgradient (1,1)/sqrt(2) so a
    // zero-initialized kernel bank still receives signal.
    std::vector<double>& du_re = tape.gu_re;
    std::vector<double>& du_im = tape.gu_im;
    du_re.resize(do_re.size());
    du_im.resize(do_re.size());
    for (std::size_t i = 0; i < du_re.size(); ++i) {
      const double mag = tape.features[i];
      if (mag > 0.0) {
        du_re[i] = dfeat[i] * tape.u_re[last][i] / mag;
        du_im[i] = dfeat[i] * tape.u_im[last][i] / mag;
      } else {
        du_re[i] = dfeat[i] * kInvSqrt2;
        du_im[i] = dfeat[i] * kInvSqrt2;
      }
    }
    // PReLU backward for the last layer.
    for (int f = 0; f < eng.cfg.filters; ++f) {
      const double a = params.conv[last].slopes.value[f];
      double slope_grad = 0.0;
      const std::size_t off = static_cast<std::size_t>(f) * block;
      for (std::size_t i = 0; i < block; ++i) {
        const double ore = tape.o_re[last][off + i];
        const double oim = tape.o_im[last][off + i];
        do_re[off + i] = du_re[off + i] * prelu_grad(ore, a);
        do_im[off + i] = du_im[off + i] * prelu_grad(oim, a);
        slope_grad += du_re[off + i] * std::min(ore, 0.0) + du_im[off + i] * std::min(oim, 0.0);
      }
      grads.slopes[last][f] += slope_grad;
    }
  }

  std::vector<double>& din_re = tape.gin_re;
  std::vector<double>& din_im = tape.gin_im;
  for (int t = last; t >= 0; --t) {
    const ConvLayer& layer = params.conv[t];
    const double* in_re = (t == 0) ? tape.in_re.data() : tape.u_re[t - 1].data();
    const double* in_im = (t == 0) ? tape.in_im.data() : tape.u_im[t - 1].data();
    if (t > 0) {
      din_re.resize(static_cast<std::size_t>(layer.in_channels) * block);
      din_im.resize(din_re.size());
      conv_backward(eng, layer, in_re, in_im, do_re.data(), do_im.data(),
                    grads.kernels[t].data(), din_re.data(), din_im.data());
      // Through the previous layer's spectral PReLU.
      const ConvLayer& prev = params.conv[t - 1];
      do_re.resize(din_re.size());
      do_im.resize(din_im.size());
      for (int f = 0; f < prev.out_channels; ++f) {
        const double a = prev.slopes.value[f];
        double slope_grad = 0.0;
        const std::size_t off = static_cast<std::size_t>(f) * block;
        for (std::size_t i = 0; i < block; ++i) {
          const double ore = tape.o_re[t - 1][off + i];
          const double oim = tape.o_im[t - 1][off + i];
          do_re[off + i] = din_re[off + i] * prelu_grad(ore, a);
          do_im[off + i] = din_im[off + i] * prelu_grad(oim, a);
          slope_grad +=
              din_re[off + i] * std::min(ore, 0.0) + din_im[off + i] * std::min(oim, 0.0);
        }
        grads.slopes[t - 1][f] += slope_grad;
      }
    } else {
      conv_backward(eng, layer, in_re, in_im, do_re.data(), do_im.data(),
                    grads.kernels[t].data(), nullptr, nullptr);
    }
  }
}

struct HeadGrads {
  std::vector<double> fc_W, fc_b, fc_slopes, cls_W, cls_b;
};

// Batch-scoped buffers, reused across steps so the hot loop never reallocates
// the feature and gradient blocks.
struct BatchWorkspace {
  std::vector<SampleTape> tapes;
  std::vector<int> labels;
  std::vector<SampleGrads> sample_grads;
  std::vector<double> X, dX;
  std::vector<double> logits, dlogits, H, HA, dH, dHA;
  HeadGrads hg;
};

// Dense head forward + backward over the feature batch in ws.X. Returns mean
// loss and fills ws.dX plus the head parameter gradients.
double head_forward_backward(const ModelParams& params, BatchWorkspace& ws, int batch,
                             int* correct) {
  const NetConfig& cfg = params.cfg;
  const int feat = static_cast<int>(cfg.feature_dim());
  const int classes = cfg.classes;

  ws.logits.resize(static_cast<std::size_t>(batch) * classes);
  ws.dlogits.resize(ws.logits.size());

  if (cfg.use_fc) {
    ws.H.resize(static_cast<std::size_t>(batch) * cfg.hidden);
    nn::dense_forward(params.fc, ws.X.data(), batch, ws.H.data());
    ws.HA.resize(ws.H.size());
    for (int i = 0; i < batch; ++i) {
      for (int j = 0; j < cfg.hidden; ++j) {
        const std::size_t idx = static_cast<std::size_t>(i) * cfg.hidden + j;
        ws.HA[idx] = prelu(ws.H[idx], params.fc_slopes.value[j]);
      }
    }
    nn::dense_forward(params.cls, ws.HA.data(), batch, ws.logits.data());
  } else {
    nn::dense_forward(params.cls, ws.X.data(), batch, ws.logits.data());
  }

  const double loss = nn::softmax_cross_entropy(ws.logits.data(), ws.labels.data(), batch,
                                                classes, ws.dlogits.data());
  if (correct != nullptr) {
    int ok = 0;
    for (int i = 0; i < batch; ++i) {
      if (nn::argmax(&ws.logits[static_cast<std::size_t>(i) * classes], classes) == ws.labels[i])
        ++ok;
    }
    *correct = ok;
  }

  ws.dX.resize(static_cast<std::size_t>(batch) * feat);
  if (cfg.use_fc) {
    ws.dHA.resize(ws.HA.size());
    nn::dense_backward(params.cls, ws.HA.data(), ws.dlogits.data(), batch, ws.dHA.data(),
                       ws.hg.cls_W, ws.hg.cls_b);
    ws.dH.resize(ws.H.size());
    ws.hg.fc_slopes.assign(params.fc_slopes.size(), 0.0);
    for (int i = 0; i < batch; ++i) {
      for (int j = 0; j < cfg.hidden; ++j) {
        const std::size_t idx = static_cast<std::size_t>(i) * cfg.hidden + j;
        ws.dH[idx] = ws.dHA[idx] * prelu_grad(ws.H[idx], params.fc_slopes.value[j]);
        ws.hg.fc_slopes[j] += ws.dHA[idx] * std::min(ws.H[idx], 0.0);
      }
    }
    nn::dense_backward(params.fc, ws.X.data(), ws.dH.data(), batch, ws.dX.data(), ws.hg.fc_W,
                       ws.hg.fc_b);
  } else {
    nn::dense_backward(params.cls, ws.X.data(), ws.dlogits.data(), batch, ws.dX.data(),
                       ws.hg.cls_W, ws.hg.cls_b);
  }
  return loss;
}

// Features-only inference for a batch of spectra already held in tapes.
std::vector<double> head_logits(const ModelParams& params, const std::vector<double>& X,
                                int batch) {
  const NetConfig& cfg = params.cfg;
  std::vector<double> logits(static_cast<std::size_t>(batch) * cfg.classes);
  if (cfg.use_fc) {
    std::vector<double> H(static_cast<std::size_t>(batch) * cfg.hidden);
    nn::dense_forward(params.fc, X.data(), batch, H.data());
    for (int i = 0; i < batch; ++i) {
      for (int j = 0; j < cfg.hidden; ++j) {
        const std::size_t idx = static_cast<std::size_t>(i) * cfg.hidden + j;
        H[idx] = prelu(H[idx], params.fc_slopes.value[j]);
      }
    }
    nn::dense_forward(params.cls, H.data(), batch, logits.data());
  } else {
    nn::dense_forward(params.cls, X.data(), batch, logits.data());
  }
  return logits;
}

// Full batch pass: spectra are already in the tapes' in_re/in_im.
double batch_step(const Engine& eng, const ModelParams& params, BatchWorkspace& ws, int threads,
                  Gradients& grads, int* correct) {
  const int batch = static_cast<int>(ws.tapes.size());
  const std::size_t feat = eng.cfg.feature_dim();

  parallel_for(0, ws.tapes.size(), threads,
               [&](std::size_t i) { forward_sample(eng, params, ws.tapes[i]); });

  ws.X.resize(static_cast<std::size_t>(batch) * feat);
  for (int i = 0; i < batch; ++i)
    std::memcpy(&ws.X[static_cast<std::size_t>(i) * feat], ws.tapes[i].features.data(),
                feat * sizeof(double));

  const double loss = head_forward_backward(params, ws, batch, correct);

  ws.sample_grads.resize(batch);
  parallel_for(0, ws.tapes.size(), threads, [&](std::size_t i) {
    ws.sample_grads[i].reset(params);
    backward_sample(eng, params, ws.tapes[i], &ws.dX[i * feat], ws.sample_grads[i]);
  });

  // Fixed-order reduction keeps results identical for any thread count.
  grads.conv_kernels.resize(params.conv.size());
  grads.conv_slopes.resize(params.conv.size());
  for (std::size_t t = 0; t < params.conv.size(); ++t) {
    grads.conv_kernels[t].assign(params.conv[t].kernels.size(), 0.0);
    grads.conv_slopes[t].assign(params.conv[t].slopes.size(), 0.0);
    for (int i = 0; i < batch; ++i) {
      const std::vector<double>& gk = ws.sample_grads[i].kernels[t];
      for (std::size_t j = 0; j < gk.size(); ++j) grads.conv_kernels[t][j] += gk[j];
      const std::vector<double>& gs = ws.sample_grads[i].slopes[t];
      for (std::size_t j = 0; j < gs.size(); ++j) grads.conv_slopes[t][j] += gs[j];
    }
  }
  // Swap rather than copy; the displaced buffers are reused next batch.
  grads.fc_W.swap(ws.hg.fc_W);
  grads.fc_b.swap(ws.hg.fc_b);
  grads.fc_slopes.swap(ws.hg.fc_slopes);
  grads.cls_W.swap(ws.hg.cls_W);
  grads.cls_b.swap(ws.hg.cls_b);
  return loss;
}

}  // namespace

// --- public model ops -------------------------------------------------------

std::vector<double> forward_pass(const PointCloud& pc, const ModelParams& params) {
  Engine eng(params.cfg);
  SampleTape tape;
  tape.in_re.resize(static_cast<std::size_t>(eng.c) * eng.nlm);
  tape.in_im.resize(tape.in_re.size());
  eng.spectra_from_cloud(pc, tape.in_re.data(), tape.in_im.data());
  forward_sample(eng, params, tape);
  std::vector<double> X = tape.features;
  return head_logits(params, X, 1);
}

std::vector<double> forward_pass(const SphericalVoxelGrid& grid, const ModelParams& params) {
  if (grid.spec.shells != params.cfg.shells || grid.spec.resolution != params.cfg.resolution)
    throw std::invalid_argument("net: grid shape mismatch");
  Engine eng(params.cfg);
  SampleTape tape;
  tape.in_re.resize(static_cast<std::size_t>(eng.c) * eng.nlm);
  tape.in_im.resize(tape.in_re.size());
  eng.spectra_from_grid(grid, tape.in_re.data(), tape.in_im.data());
  forward_sample(eng, params, tape);
  std::vector<double> X = tape.features;
  return head_logits(params, X, 1);
}

std::pair<double, Gradients> loss_and_gradients(const std::vector<PointCloud>& clouds,
                                                const std::vector<int>& labels,
                                                const ModelParams& params, int threads) {
  if (clouds.empty()) throw std::invalid_argument("net: empty batch");
  if (clouds.size() != labels.size()) throw std::invalid_argument("net: label count mismatch");

  Engine eng(params.cfg);
  BatchWorkspace ws;
  ws.tapes.resize(clouds.size());
  ws.labels = labels;
  parallel_for(0, clouds.size(), threads, [&](std::size_t i) {
    ws.tapes[i].in_re.resize(static_cast<std::size_t>(eng.c) * eng.nlm);
    ws.tapes[i].in_im.resize(ws.tapes[i].in_re.size());
    eng.spectra_from_cloud(clouds[i], ws.tapes[i].in_re.data(), ws.tapes[i].in_im.data());
  });

  Gradients grads;
  const double loss = batch_step(eng, params, ws, threads, grads, nullptr);
  return {loss, std::move(grads)};
}

std::pair<ModelParams, std::vector<EpochStats>> train(const LabeledDataset& dataset,
                                                      const NetConfig& net_cfg,
                                                      const TrainConfig& train_cfg) {
  dataset.validate();
  train_cfg.validate();
  if (net_cfg.classes != static_cast<int>(dataset.class_names.size()))
    throw std::invalid_argument("train: config classes do not match dataset");

  ModelParams params;
  params.cfg = net_cfg;
  params.init(train_cfg.seed);

  Engine eng(net_cfg);
  const std::size_t N = dataset.size();
  const nn::AdamConfig adam;

  std::vector<EpochStats> history;
  history.reserve(train_cfg.epochs);

  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  BatchWorkspace ws;
  Gradients grads;

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    const double lr = train_cfg.lr_at(epoch);
    SplitMix64 shuffle_rng(derive_seed(train_cfg.seed, 0x45504f43ULL + epoch));
    for (std::size_t i = N - 1; i > 0; --i) {
      const std::size_t j = shuffle_rng.next_index(i + 1);
      std::swap(order[i], order[j]);
    }

    double epoch_loss = 0.0;
    int epoch_correct = 0;
    for (std::size_t start = 0; start < N; start += train_cfg.batch_size) {
      const std::size_t stop = std::min(N, start + train_cfg.batch_size);
      const int batch = static_cast<int>(stop - start);

      ws.tapes.resize(batch);
      ws.labels.resize(batch);
      parallel_for(0, static_cast<std::size_t>(batch), train_cfg.threads, [&](std::size_t bi) {
        const std::size_t di = order[start + bi];
        ws.labels[bi] = dataset.labels[di];
        // Augmentation seed depends on (run seed, epoch, dataset index) only,
        // never on batch order or thread schedule.
        SplitMix64 aug(derive_seed(derive_seed(train_cfg.seed, 0xA46ULL + epoch), di));
        PointCloud pc = dataset.clouds[di];
        if (train_cfg.rotate) pc = rotate_z(pc, aug.next_uniform(0.0, 2.0 * kPi));
        if (train_cfg.noise_std > 0.0) {
          const std::uint64_t noise_seed = aug.next_u64();
          pc = add_gaussian_noise(pc, train_cfg.noise_std, noise_seed);
        }
        pc = clip_to_unit_ball(pc);
        ws.tapes[bi].in_re.resize(static_cast<std::size_t>(eng.c) * eng.nlm);
        ws.tapes[bi].in_im.resize(ws.tapes[bi].in_re.size());
        eng.spectra_from_cloud(pc, ws.tapes[bi].in_re.data(), ws.tapes[bi].in_im.data());
      });

      int correct = 0;
      const double loss = batch_step(eng, params, ws, train_cfg.threads, grads, &correct);
      epoch_loss += loss * batch;
      epoch_correct += correct;

      ++params.adam_step;
      const long step = params.adam_step;
      for (std::size_t t = 0; t < params.conv.size(); ++t) {
        nn::adam_update(params.conv[t].kernels, grads.conv_kernels[t], lr, step, adam);
        nn::adam_update(params.conv[t].slopes, grads.conv_slopes[t], lr, step, adam);
      }
      if (net_cfg.use_fc) {
        nn::adam_update(params.fc.W, grads.fc_W, lr, step, adam);
        nn::adam_update(params.fc.b, grads.fc_b, lr, step, adam);
        nn::adam_update(params.fc_slopes, grads.fc_slopes, lr, step, adam);
      }
      nn::adam_update(params.cls.W, grads.cls_W, lr, step, adam);
      nn::adam_update(params.cls.b, grads.cls_b, lr, step, adam);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.loss = epoch_loss / static_cast<double>(N);
    stats.train_accuracy = static_cast<double>(epoch_correct) / static_cast<double>(N);
    history.push_back(stats);
  }
  return {std::move(params), std::move(history)};
}

EvalResult evaluate(const ModelParams& params, const LabeledDataset& dataset, int threads) {
  dataset.validate();
  if (params.cfg.classes != static_cast<int>(dataset.class_names.size()))
    throw std::invalid_argument("evaluate: config classes do not match dataset");

  Engine eng(params.cfg);
  const std::size_t N = dataset.size();
  const std::size_t feat = eng.cfg.feature_dim();
  const std::size_t chunk = 64;

  EvalResult result;
  result.classes = params.cfg.classes;
  result.confusion.assign(static_cast<std::size_t>(result.classes) * result.classes, 0);

  int correct = 0;
  std::vector<SampleTape> tapes(std::min(chunk, N));
  for (std::size_t start = 0; start < N; start += chunk) {
    const std::size_t stop = std::min(N, start + chunk);
    const int batch = static_cast<int>(stop - start);
    parallel_for(0, static_cast<std::size_t>(batch), threads, [&](std::size_t bi) {
      tapes[bi].in_re.resize(static_cast<std::size_t>(eng.c) * eng.nlm);
      tapes[bi].in_im.resize(tapes[bi].in_re.size());
      eng.spectra_from_cloud(dataset.clouds[start + bi], tapes[bi].in_re.data(),
                             tapes[bi].in_im.data());
      forward_sample(eng, params, tapes[bi]);
    });
    std::vector<double> X(static_cast<std::size_t>(batch) * feat);
    for (int bi = 0; bi < batch; ++bi)
      std::memcpy(&X[static_cast<std::size_t>(bi) * feat], tapes[bi].features.data(),
                  feat * sizeof(double));
    const std::vector<double> logits = head_logits(params, X, batch);
    for (int bi = 0; bi < batch; ++bi) {
      const int truth = dataset.labels[start + bi];
      const int pred =
          nn::argmax(&logits[static_cast<std::size_t>(bi) * params.cfg.classes],
                     params.cfg.classes);
      ++result.confusion[static_cast<std::size_t>(truth) * result.classes + pred];
      if (pred == truth) ++correct;
    }
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(N);
  return result;
}

// --- checkpoint io ----------------------------------------------------------

namespace {

void write_param(std::ostream& os, const nn::Param& p) {
  for (const double x : p.value) io::put_f32(os, static_cast<float>(x));
  for (const double x : p.m) io::put_f32(os, static_cast<float>(x));
  for (const double x : p.v) io::put_f32(os, static_cast<float>(x));
}

void read_param(std::istream& is, nn::Param& p, std::size_t n) {
  p.resize(n);
  for (double& x : p.value) x = io::get_f32(is);
  for (double& x : p.m) x = io::get_f32(is);
  for (double& x : p.v) x = io::get_f32(is);
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
  os.write("SHNN", 4);
  io::put_u16(os, 1);
  const NetConfig& c = params.cfg;
  io::put_u32(os, static_cast<std::uint32_t>(c.filters));
  io::put_u32(os, static_cast<std::uint32_t>(c.shells));
  io::put_u32(os, static_cast<std::uint32_t>(c.degree));
  io::put_u32(os, static_cast<std::uint32_t>(c.resolution));
  io::put_u32(os, static_cast<std::uint32_t>(c.hidden));
  io::put_u32(os, static_cast<std::uint32_t>(c.classes));
  io::put_u32(os, static_cast<std::uint32_t>(c.conv_layers));
  const std::uint32_t flags = (c.use_ift ? 1u : 0u) | (c.use_fc ? 2u : 0u) |
                              (c.mode == OccupancyMode::binary ? 4u : 0u);
  io::put_u32(os, flags);
  io::put_u64(os, static_cast<std::uint64_t>(params.adam_step));
  for (const ConvLayer& layer : params.conv) {
    write_param(os, layer.kernels);
    write_param(os, layer.slopes);
  }
  if (c.use_fc) {
    write_param(os, params.fc.W);
    write_param(os, params.fc.b);
    write_param(os, params.fc_slopes);
  }
  write_param(os, params.cls.W);
  write_param(os, params.cls.b);
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path, const NetConfig* expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SHNN", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const std::uint16_t version = io::get_u16(is);
  if (version != 1) throw std::runtime_error("checkpoint: unsupported version");

  ModelParams params;
  NetConfig& c = params.cfg;
  c.filters = static_cast<int>(io::get_u32(is));
  c.shells = static_cast<int>(io::get_u32(is));
  c.degree = static_cast<int>(io::get_u32(is));
  c.resolution = static_cast<int>(io::get_u32(is));
  c.hidden = static_cast<int>(io::get_u32(is));
  c.classes = static_cast<int>(io::get_u32(is));
  c.conv_layers = static_cast<int>(io::get_u32(is));
  const std::uint32_t flags = io::get_u32(is);
  c.use_ift = (flags & 1u) != 0;
  c.use_fc = (flags & 2u) != 0;
  c.mode = (flags & 4u) ? OccupancyMode::binary : OccupancyMode::density;
  c.validate();
  params.adam_step = static_cast<long>(io::get_u64(is));

  if (expected != nullptr && !(*expected == c))
    throw std::runtime_error("checkpoint: config mismatch with expected shape");

  const std::size_t degrees = static_cast<std::size_t>(c.degree) + 1;
  params.conv.resize(c.conv_layers);
  for (int t = 0; t < c.conv_layers; ++t) {
    ConvLayer& layer = params.conv[t];
    layer.in_channels = (t == 0) ? 1 : c.filters;
    layer.out_channels = c.filters;
    read_param(is, layer.kernels, static_cast<std::size_t>(layer.out_channels) *
                                      layer.in_channels * c.shells * degrees);
    read_param(is, layer.slopes, static_cast<std::size_t>(layer.out_channels));
  }
  const std::size_t feat = c.feature_dim();
  if (c.use_fc) {
    params.fc.in = static_cast<int>(feat);
    params.fc.out = c.hidden;
    read_param(is, params.fc.W, feat * c.hidden);
    read_param(is, params.fc.b, static_cast<std::size_t>(c.hidden));
    read_param(is, params.fc_slopes, static_cast<std::size_t>(c.hidden));
    params.cls.in = c.hidden;
    params.cls.out = c.classes;
    read_param(is, params.cls.W, static_cast<std::size_t>(c.hidden) * c.classes);
  } else {
    params.cls.in = static_cast<int>(feat);
    params.cls.out = c.classes;
    read_param(is, params.cls.W, feat * c.classes);
  }
  read_param(is, params.cls.b, static_cast<std::size_t>(c.classes));

  is.peek();
  if (!is.eof()) throw std::runtime_error("checkpoint: trailing bytes in " + path);
  return params;
}

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("history: cannot write " + path);
  os << "epoch,lr,loss,train_acc\n";
  char buf[128];
  for (const EpochStats& s : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.6f,%.4f\n", s.epoch, s.lr, s.loss,
                  s.train_accuracy);
    os << buf;
  }
}

std::uint64_t model_hash(const ModelParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&h](const void* data, std::size_t len) {
    const unsigned char* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  auto mix_u32 = [&](std::uint32_t v) { mix_bytes(&v, 4); };
  auto mix_param = [&](const nn::Param& p) {
    for (const double x : p.value) {
      const float f = static_cast<float>(x);
      mix_bytes(&f, 4);
    }
  };
  const NetConfig& c = params.cfg;
  mix_u32(static_cast<std::uint32_t>(c.filters));
  mix_u32(static_cast<std::uint32_t>(c.shells));
  mix_u32(static_cast<std::uint32_t>(c.degree));
  mix_u32(static_cast<std::uint32_t>(c.resolution));
  mix_u32(static_cast<std::uint32_t>(c.hidden));
  mix_u32(static_cast<std::uint32_t>(c.classes));
  mix_u32(static_cast<std::uint32_t>(c.conv_layers));
  mix_u32((c.use_ift ? 1u : 0u) | (c.use_fc ? 2u : 0u) |
          (c.mode == OccupancyMode::binary ? 4u : 0u));
  for (const ConvLayer& layer : params.conv) {
    mix_param(layer.kernels);
    mix_param(layer.slopes);
  }
  if (c.use_fc) {
    mix_param(params.fc.W);
    mix_param(params.fc.b);
    mix_param(params.fc_slopes);
  }
  mix_param(params.cls.W);
  mix_param(params.cls.b);
  return h;
}

}  // namespace sphclass
