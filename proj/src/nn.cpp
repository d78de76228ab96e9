#include "sphclass/nn.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace sphclass::nn {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline double quantize(double x) { return static_cast<double>(static_cast<float>(x)); }
}  // namespace

void adam_update(Param& p, const std::vector<double>& grad, double lr, long step,
                 const AdamConfig& cfg) {
  if (grad.size() != p.value.size()) throw std::invalid_argument("nn: gradient size mismatch");
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const Eigen::Index n = static_cast<Eigen::Index>(p.value.size());
  Eigen::Map<Eigen::ArrayXd> m(p.m.data(), n), v(p.v.data(), n), w(p.value.data(), n);
  const Eigen::Map<const Eigen::ArrayXd> g(grad.data(), n);
  // Values and moments are held at float32 precision (see Param).
  m = (cfg.beta1 * m + (1.0 - cfg.beta1) * g).cast<float>().cast<double>();
  v = (cfg.beta2 * v + (1.0 - cfg.beta2) * g.square()).cast<float>().cast<double>();
  w = (w - lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps)).cast<float>().cast<double>();
}

void DenseLayer::init(int in_dim, int out_dim, SplitMix64& rng) {
  in = in_dim;
  out = out_dim;
  W.resize(static_cast<std::size_t>(in) * out);
  b.resize(static_cast<std::size_t>(out));
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : W.value) w = quantize(rng.next_uniform(-bound, bound));
}

void dense_forward(const DenseLayer& layer, const double* X, int batch, double* Y) {
  const Eigen::Map<const RowMat> x(X, batch, layer.in);
  const Eigen::Map<const RowMat> w(layer.W.value.data(), layer.out, layer.in);
  const Eigen::Map<const Eigen::VectorXd> bias(layer.b.value.data(), layer.out);
  Eigen::Map<RowMat> y(Y, batch, layer.out);
  y.noalias() = x * w.transpose();
  y.rowwise() += bias.transpose();
}

void dense_backward(const DenseLayer& layer, const double* X, const double* dY, int batch,
                    double* dX, std::vector<double>& gradW, std::vector<double>& gradB) {
  const Eigen::Map<const RowMat> x(X, batch, layer.in);
  const Eigen::Map<const RowMat> dy(dY, batch, layer.out);

  // Fully overwritten below; resize only to keep capacity across batches.
  gradW.resize(layer.W.size());
  gradB.resize(layer.b.size());
  Eigen::Map<RowMat> gw(gradW.data(), layer.out, layer.in);
  Eigen::Map<Eigen::VectorXd> gb(gradB.data(), layer.out);
  gw.noalias() = dy.transpose() * x;
  gb = dy.colwise().sum();

  if (dX != nullptr) {
    const Eigen::Map<const RowMat> w(layer.W.value.data(), layer.out, layer.in);
    Eigen::Map<RowMat> dx(dX, batch, layer.in);
    dx.noalias() = dy * w;
  }
}

double softmax_cross_entropy(const double* logits, const int* labels, int batch, int classes,
                             double* dlogits) {
  if (batch <= 0) throw std::invalid_argument("nn: empty batch");
  double loss = 0.0;
  const double inv_batch = 1.0 / batch;
  for (int i = 0; i < batch; ++i) {
    const double* row = logits + static_cast<std::size_t>(i) * classes;
    double* drow = dlogits + static_cast<std::size_t>(i) * classes;
    double mx = row[0];
    for (int c = 1; c < classes; ++c) mx = std::max(mx, row[c]);
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) sum += std::exp(row[c] - mx);
    const double log_sum = std::log(sum) + mx;
    const int y = labels[i];
    if (y < 0 || y >= classes) throw std::invalid_argument("nn: label out of range");
    loss += log_sum - row[y];
    for (int c = 0; c < classes; ++c) {
      drow[c] = std::exp(row[c] - log_sum) * inv_batch;
    }
    drow[y] -= inv_batch;
  }
  return loss * inv_batch;
}

int argmax(const double* v, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace sphclass::nn
