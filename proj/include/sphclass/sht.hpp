#pragma once

#include <complex>
#include <string>
#include <vector>

namespace sphclass {

// Real signal sampled on the pole-free equiangular grid
//   theta_j = pi*(j+0.5)/n,  phi_k = 2*pi*k/n,   0 <= j,k < n.
// Values are row-major with theta as the row index.
struct SphericalSignal {
  int n = 0;
  std::vector<double> values;

  SphericalSignal() = default;
  explicit SphericalSignal(int n_) : n(n_), values(static_cast<std::size_t>(n_) * n_, 0.0) {}

  double& at(int j, int k) { return values[static_cast<std::size_t>(j) * n + k]; }
  double at(int j, int k) const { return values[static_cast<std::size_t>(j) * n + k]; }
};

// Spherical-harmonic coefficients of a real signal for degrees 0..L.
// Only orders m >= 0 are stored; negative orders follow from
//   f_{l,-m} = (-1)^m * conj(f_{l,m}).
// Packed layout: coefficient (l,m) lives at offset l*(l+1)/2 + m.
struct SHSpectrum {
  int degree = 0;
  std::vector<std::complex<double>> coeffs;

  SHSpectrum() = default;
  explicit SHSpectrum(int L) : degree(L), coeffs(coeff_count(L)) {}

  static std::size_t coeff_count(int L) {
    return static_cast<std::size_t>(L + 1) * (L + 2) / 2;
  }
  static std::size_t index(int l, int m) { return static_cast<std::size_t>(l) * (l + 1) / 2 + m; }

  std::complex<double>& at(int l, int m) { return coeffs[index(l, m)]; }
  std::complex<double> at(int l, int m) const { return coeffs[index(l, m)]; }
};

// Fully normalized associated Legendre function
//   Nbar_l^m(x) = sqrt((2l+1)(l-m)! / (4 pi (l+m)!)) * P_l^m(x)
// with the Condon-Shortley phase folded into P_l^m. Evaluated with the
// standard normalized three-term recurrence; no raw factorials appear, so the
// result is stable far beyond the degrees used here.
double assoc_legendre_normalized(int l, int m, double x);

// Y_l^m(theta,phi) for m >= 0. Negative orders via
// Y_l^{-m} = (-1)^m conj(Y_l^m).
std::complex<double> evaluate_basis(int l, int m, double theta, double phi);

// Per-row quadrature weights making the discrete analysis integral exact for
// integrands that are polynomials of degree <= 2L in cos(theta). Least-norm
// solution of the Legendre moment system
//   sum_j w_j P_d(cos theta_j) = 2*delta_{d0},  d = 0..2L.
// The weights exclude the uniform phi factor 2*pi/n, which transforms apply
// explicitly; sum_j w_j = 2 and the total measure sum_jk w_j*(2 pi/n) is 4 pi.
struct QuadratureWeights {
  int n = 0;
  int degree = 0;
  std::vector<double> w;
};
QuadratureWeights quadrature_weights(int n, int L);

// Forward/inverse discrete spherical-harmonic transform on the equiangular
// grid. Precomputes Legendre and trigonometric tables for one (n, L) pair;
// immutable after construction and shareable across threads.
class Transform {
 public:
  Transform(int n, int L);

  SHSpectrum forward(const SphericalSignal& signal) const;
  SphericalSignal inverse(const SHSpectrum& spectrum) const;

  int resolution() const { return n_; }
  int degree() const { return L_; }
  const QuadratureWeights& weights() const { return weights_; }

  double theta_node(int j) const;
  double phi_node(int k) const;

  // Table accessors used by the network's hand-written adjoint code.
  // legendre(j, idx): Nbar at cos(theta_j) for packed coefficient idx.
  double legendre(int j, std::size_t idx) const { return plm_[idx * n_ + j]; }
  double cos_m_phi(int m, int k) const { return cosm_[static_cast<std::size_t>(m) * n_ + k]; }
  double sin_m_phi(int m, int k) const { return sinm_[static_cast<std::size_t>(m) * n_ + k]; }

 private:
  int n_;
  int L_;
  QuadratureWeights weights_;
  std::vector<double> plm_;   // [(L+1)(L+2)/2][n], coefficient-major
  std::vector<double> cosm_;  // [L+1][n]
  std::vector<double> sinm_;  // [L+1][n]
};

// Rotation-sensitive per-coefficient magnitudes (F1) and rotation-invariant
// per-degree energies (F2), concatenated over shells.
struct DescriptorVector {
  enum class Kind { F1, F2 };
  Kind kind = Kind::F1;
  std::vector<double> values;
};

DescriptorVector descriptor_f1(const std::vector<SHSpectrum>& shells);
DescriptorVector descriptor_f2(const std::vector<SHSpectrum>& shells);

// Spectrum dump: magic "SHS1", u32 shell count, u32 degree, then interleaved
// float64 little-endian (re, im) pairs in (shell, l, m) order.
void save_spectra(const std::vector<SHSpectrum>& shells, const std::string& path);
std::vector<SHSpectrum> load_spectra(const std::string& path);

}  // namespace sphclass
