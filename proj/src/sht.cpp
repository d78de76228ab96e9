#include "sphclass/sht.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "sphclass/binary_io.hpp"

namespace sphclass {

namespace {

constexpr double kPi = 3.141592653589793238462643;
constexpr double kFourPi = 4.0 * kPi;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fill one recurrence column: out[index(l,m)] = Nbar_l^m(x) for all
// 0 <= m <= l <= L. Same recurrence as assoc_legendre_normalized, evaluated
// once per x instead of once per coefficient.
void legendre_row(int L, double x, double* out) {
  const double omx2 = (1.0 - x) * (1.0 + x);
  double seed = 1.0;  // ((2m-1)!!/(2m)!!) * (1-x^2)^m, running product
  double fact = 1.0;
  for (int m = 0; m <= L; ++m) {
    double pmm = std::sqrt((2.0 * m + 1.0) * seed / kFourPi);
    if (m & 1) pmm = -pmm;
    out[SHSpectrum::index(m, m)] = pmm;
    if (m + 1 <= L) {
      double pmmp1 = x * std::sqrt(2.0 * m + 3.0) * pmm;
      out[SHSpectrum::index(m + 1, m)] = pmmp1;
      double oldfact = std::sqrt(2.0 * m + 3.0);
      for (int l = m + 2; l <= L; ++l) {
        const double f = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
        const double pll = (x * pmmp1 - pmm / oldfact) * f;
        oldfact = f;
        pmm = pmmp1;
        pmmp1 = pll;
        out[SHSpectrum::index(l, m)] = pll;
      }
    }
    seed *= omx2 * fact / (fact + 1.0);
    fact += 2.0;
  }
}

}  // namespace

double assoc_legendre_normalized(int l, int m, double x) {
  if (m < 0 || m > l) throw std::invalid_argument("sht: require 0 <= m <= l");
  if (std::abs(x) > 1.0) throw std::invalid_argument("sht: require |x| <= 1");

  const double omx2 = (1.0 - x) * (1.0 + x);
  double pmm = 1.0;
  double fact = 1.0;
  for (int i = 1; i <= m; ++i) {
    pmm *= omx2 * fact / (fact + 1.0);
    fact += 2.0;
  }
  pmm = std::sqrt((2.0 * m + 1.0) * pmm / kFourPi);
  if (m & 1) pmm = -pmm;
  if (l == m) return pmm;

  double pmmp1 = x * std::sqrt(2.0 * m + 3.0) * pmm;
  if (l == m + 1) return pmmp1;

  double oldfact = std::sqrt(2.0 * m + 3.0);
  double pll = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    const double f = std::sqrt((4.0 * ll * ll - 1.0) / (static_cast<double>(ll) * ll - m * m));
    pll = (x * pmmp1 - pmm / oldfact) * f;
    oldfact = f;
    pmm = pmmp1;
    pmmp1 = pll;
  }
  return pll;
}

std::complex<double> evaluate_basis(int l, int m, double theta, double phi) {
  const double p = assoc_legendre_normalized(l, m, std::cos(theta));
  return {p * std::cos(m * phi), p * std::sin(m * phi)};
}

QuadratureWeights quadrature_weights(int n, int L) {
  if (n < 2 * (L + 1)) throw std::invalid_argument("sht: resolution must satisfy n >= 2(L+1)");

  const int rows = 2 * L + 1;
  Eigen::MatrixXd A(rows, n);
  for (int j = 0; j < n; ++j) {
    const double x = std::cos(kPi * (j + 0.5) / n);
    double pm1 = 1.0;  // P_0
    A(0, j) = pm1;
    if (rows > 1) {
      double p = x;  // P_1
      A(1, j) = p;
      for (int d = 2; d < rows; ++d) {
        const double pn = ((2.0 * d - 1.0) * x * p - (d - 1.0) * pm1) / d;
        pm1 = p;
        p = pn;
        A(d, j) = p;
      }
    }
  }

  Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
  b(0) = 2.0;  // integral of P_0 over [-1,1]

  const Eigen::MatrixXd gram = A * A.transpose();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("sht: quadrature moment system is rank-deficient");
  const Eigen::VectorXd y = ldlt.solve(b);
  Eigen::VectorXd w = A.transpose() * y;

  if ((A * w - b).cwiseAbs().maxCoeff() > 1e-10)
    throw std::runtime_error("sht: quadrature moment system is rank-deficient");

  QuadratureWeights out;
  out.n = n;
  out.degree = L;
  out.w.assign(w.data(), w.data() + n);
  return out;
}

Transform::Transform(int n, int L) : n_(n), L_(L) {
  if (n <= 0 || (n % 2) != 0) throw std::invalid_argument("sht: resolution must be even");
  if (L < 0) throw std::invalid_argument("sht: degree must be >= 0");
  weights_ = quadrature_weights(n, L);

  const std::size_t nlm = SHSpectrum::coeff_count(L);
  std::vector<double> row(nlm);
  plm_.resize(nlm * n);
  for (int j = 0; j < n; ++j) {
    legendre_row(L, std::cos(theta_node(j)), row.data());
    for (std::size_t idx = 0; idx < nlm; ++idx) plm_[idx * n + j] = row[idx];
  }

  cosm_.resize(static_cast<std::size_t>(L + 1) * n);
  sinm_.resize(static_cast<std::size_t>(L + 1) * n);
  for (int m = 0; m <= L; ++m) {
    for (int k = 0; k < n; ++k) {
      const double a = m * phi_node(k);
      cosm_[static_cast<std::size_t>(m) * n + k] = std::cos(a);
      sinm_[static_cast<std::size_t>(m) * n + k] = std::sin(a);
    }
  }
}

double Transform::theta_node(int j) const { return kPi * (j + 0.5) / n_; }
double Transform::phi_node(int k) const { return 2.0 * kPi * k / n_; }

SHSpectrum Transform::forward(const SphericalSignal& signal) const {
  if (signal.n != n_) throw std::invalid_argument("sht: signal resolution mismatch");

  const Eigen::Map<const RowMat> F(signal.values.data(), n_, n_);
  const Eigen::Map<const RowMat> C(cosm_.data(), L_ + 1, n_);
  const Eigen::Map<const RowMat> S(sinm_.data(), L_ + 1, n_);

  // Per-row phi modes: G(j,m) = sum_k f(j,k) e^{-i m phi_k}.
  const Eigen::MatrixXd Gc = F * C.transpose();
  const Eigen::MatrixXd Gs = F * S.transpose();

  // Weighted Legendre sum over theta rows.
  const Eigen::Map<const Eigen::VectorXd> w(weights_.w.data(), n_);
  const double phi_measure = 2.0 * kPi / n_;
  SHSpectrum spec(L_);
  for (int m = 0; m <= L_; ++m) {
    const Eigen::VectorXd wc = w.cwiseProduct(Gc.col(m));
    const Eigen::VectorXd ws = w.cwiseProduct(Gs.col(m));
    for (int l = m; l <= L_; ++l) {
      const Eigen::Map<const Eigen::VectorXd> p(&plm_[SHSpectrum::index(l, m) * n_], n_);
      spec.at(l, m) = {phi_measure * p.dot(wc), -phi_measure * p.dot(ws)};
    }
  }
  return spec;
}

SphericalSignal Transform::inverse(const SHSpectrum& spectrum) const {
  if (spectrum.degree != L_) throw std::invalid_argument("sht: spectrum degree mismatch");

  // The stored m >= 0 half represents a real signal, so the m = 0
  // coefficients must be real; anything else is treated as residue.
  for (int l = 0; l <= L_; ++l) {
    const std::complex<double> c = spectrum.at(l, 0);
    if (std::abs(c.imag()) > std::max(1e-10, 1e-12 * std::abs(c.real())))
      throw std::runtime_error("sht: inverse input has non-real zonal coefficients");
  }

  // Theta pass: a(j,m) = sum_{l>=m} Nbar_lm(x_j) f_lm, doubled for m > 0 so
  // the phi pass is a plain real contraction over cos/sin rows.
  Eigen::MatrixXd Are = Eigen::MatrixXd::Zero(n_, L_ + 1);
  Eigen::MatrixXd Aim = Eigen::MatrixXd::Zero(n_, L_ + 1);
  for (int m = 0; m <= L_; ++m) {
    const double scale = (m == 0) ? 1.0 : 2.0;
    for (int l = m; l <= L_; ++l) {
      const std::complex<double> c = spectrum.at(l, m);
      const Eigen::Map<const Eigen::VectorXd> p(&plm_[SHSpectrum::index(l, m) * n_], n_);
      Are.col(m) += (scale * c.real()) * p;
      if (m > 0) Aim.col(m) += (scale * c.imag()) * p;
    }
  }

  const Eigen::Map<const RowMat> C(cosm_.data(), L_ + 1, n_);
  const Eigen::Map<const RowMat> S(sinm_.data(), L_ + 1, n_);
  const Eigen::MatrixXd F = Are * C - Aim * S;

  SphericalSignal out(n_);
  Eigen::Map<RowMat>(out.values.data(), n_, n_) = F;
  return out;
}

namespace {

void check_shells(const std::vector<SHSpectrum>& shells) {
  if (shells.empty()) throw std::invalid_argument("descriptor: no shells");
  for (const SHSpectrum& s : shells) {
    if (s.degree != shells.front().degree)
      throw std::invalid_argument("descriptor: mismatched degrees across shells");
  }
}

}  // namespace

DescriptorVector descriptor_f1(const std::vector<SHSpectrum>& shells) {
  check_shells(shells);
  DescriptorVector out;
  out.kind = DescriptorVector::Kind::F1;
  out.values.reserve(shells.size() * shells.front().coeffs.size());
  for (const SHSpectrum& s : shells) {
    for (const std::complex<double>& c : s.coeffs) out.values.push_back(std::abs(c));
  }
  return out;
}

DescriptorVector descriptor_f2(const std::vector<SHSpectrum>& shells) {
  check_shells(shells);
  const int L = shells.front().degree;
  DescriptorVector out;
  out.kind = DescriptorVector::Kind::F2;
  out.values.reserve(shells.size() * (L + 1));
  for (const SHSpectrum& s : shells) {
    for (int l = 0; l <= L; ++l) {
      double e = std::norm(s.at(l, 0));
      for (int m = 1; m <= l; ++m) e += 2.0 * std::norm(s.at(l, m));  // +/- m pairs
      out.values.push_back(std::sqrt(e));
    }
  }
  return out;
}

void save_spectra(const std::vector<SHSpectrum>& shells, const std::string& path) {
  check_shells(shells);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("sht: cannot write " + path);
  os.write("SHS1", 4);
  io::put_u32(os, static_cast<std::uint32_t>(shells.size()));
  io::put_u32(os, static_cast<std::uint32_t>(shells.front().degree));
  for (const SHSpectrum& s : shells) {
    for (const std::complex<double>& c : s.coeffs) {
      io::put_f64(os, c.real());
      io::put_f64(os, c.imag());
    }
  }
}

std::vector<SHSpectrum> load_spectra(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("sht: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SHS1", 4) != 0)
    throw std::runtime_error("sht: bad spectrum magic in " + path);
  const std::uint32_t c = io::get_u32(is);
  const std::uint32_t L = io::get_u32(is);
  std::vector<SHSpectrum> shells;
  shells.reserve(c);
  for (std::uint32_t s = 0; s < c; ++s) {
    SHSpectrum spec(static_cast<int>(L));
    for (std::complex<double>& coeff : spec.coeffs) {
      const double re = io::get_f64(is);
      const double im = io::get_f64(is);
      coeff = {re, im};
    }
    shells.push_back(std::move(spec));
  }
  return shells;
}

}  // namespace sphclass
