#pragma once

#include <cstdint>
#include <vector>

#include "sphclass/rng.hpp"

namespace sphclass::nn {

// Trainable tensor with paired first/second-moment optimizer state. Values
// and moments are quantized to float32 precision after every update so that
// checkpoints (stored as float32) round-trip bit-exactly.
struct Param {
  std::vector<double> value;
  std::vector<double> m;
  std::vector<double> v;

  void resize(std::size_t n) {
    value.assign(n, 0.0);
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }
  std::size_t size() const { return value.size(); }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam step with bias correction; `step` counts updates starting at 1.
void adam_update(Param& p, const std::vector<double>& grad, double lr, long step,
                 const AdamConfig& cfg);

// Row-major dense layer: y = W x + b with W of shape out x in.
struct DenseLayer {
  int in = 0;
  int out = 0;
  Param W;
  Param b;

  void init(int in_dim, int out_dim, SplitMix64& rng);  // fan-in scaled uniform
};

// X: batch x in (row-major), Y: batch x out (row-major).
void dense_forward(const DenseLayer& layer, const double* X, int batch, double* Y);

// Given upstream dY, produce dX (may be null) and parameter gradients.
void dense_backward(const DenseLayer& layer, const double* X, const double* dY, int batch,
                    double* dX, std::vector<double>& gradW, std::vector<double>& gradB);

// Mean softmax cross-entropy over the batch. logits: batch x classes
// (row-major); writes dlogits = (softmax - onehot)/batch and returns the loss.
double softmax_cross_entropy(const double* logits, const int* labels, int batch, int classes,
                             double* dlogits);

int argmax(const double* v, int n);

}  // namespace sphclass::nn
