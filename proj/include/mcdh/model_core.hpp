#ifndef MCDH_MODEL_CORE_HPP
#define MCDH_MODEL_CORE_HPP

// Generative structure of the multi-category dynamic heterogeneity model:
//
//   beta_ik(t) = alpha_k + sum_l omega_ikl * u_l(t),
//   u_l ~ GP(0, SE(1, rho_l)),   omega_il ~ N(0, diag(tau) Lambda diag(tau)).

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcdh/ad.hpp"
#include "mcdh/errors.hpp"
#include "mcdh/kernels.hpp"

namespace mcdh::model {

using kernels::TimeGrid;

/// Coefficient block of one category inside the stacked K-vector.
struct CategoryLayout {
  std::size_t brands = 0;        // J_c
  std::size_t coefficients = 0;  // P_c
  std::size_t offset = 0;        // first k of this category

  bool operator==(const CategoryLayout&) const = default;
};

/// Problem dimensions. Coefficient k = categories[c].offset + p, categories in order.
struct ModelDims {
  std::size_t I = 0;
  std::vector<CategoryLayout> categories;
  std::size_t K = 0;
  std::size_t L = 0;
  std::size_t T = 0;

  std::size_t C() const noexcept { return categories.size(); }

  /// Brand dummies (J_c - 1) followed by `slopes` marketing-mix coefficients per category.
  static ModelDims make(std::size_t I, const std::vector<std::size_t>& brands, std::size_t L,
                        std::size_t T, std::size_t slopes = 1) {
    ModelDims d;
    d.I = I;
    d.L = L;
    d.T = T;
    std::size_t off = 0;
    for (std::size_t j : brands) {
      if (j < 2) throw InvalidArgument("ModelDims: every category needs at least two brands");
      d.categories.push_back({j, j - 1 + slopes, off});
      off += j - 1 + slopes;
    }
    d.K = off;
    d.validate();
    return d;
  }

  std::size_t index(std::size_t c, std::size_t p) const {
    if (c >= C() || p >= categories[c].coefficients)
      throw InvalidArgument("ModelDims::index out of range");
    return categories[c].offset + p;
  }

  std::size_t category_of(std::size_t k) const {
    for (std::size_t c = 0; c < C(); ++c)
      if (k >= categories[c].offset && k < categories[c].offset + categories[c].coefficients)
        return c;
    throw InvalidArgument("ModelDims::category_of out of range");
  }

  void validate() const {
    if (I < 1 || C() < 1 || T < 1) throw InvalidArgument("ModelDims: I, C, T must be >= 1");
    std::size_t off = 0;
    for (const auto& c : categories) {
      if (c.brands < 2 || c.coefficients < 1 || c.offset != off)
        throw InvalidArgument("ModelDims: inconsistent category layout");
      off += c.coefficients;
    }
    if (off != K) throw InvalidArgument("ModelDims: K does not match category layout");
  }

  bool operator==(const ModelDims&) const = default;
};

struct LatentFactorSet {
  Eigen::MatrixXd innovations;        // L x T
  std::vector<double> length_scales;  // L
  Eigen::MatrixXd realized;           // L x T

  std::size_t L() const noexcept { return length_scales.size(); }
};

/// omega(i, k, l), stored with l fastest.
class WeightTensor {
public:
  WeightTensor() = default;
  WeightTensor(std::size_t I, std::size_t K, std::size_t L) : I_(I), K_(K), L_(L), data_(I * K * L, 0.0) {}

  double& operator()(std::size_t i, std::size_t k, std::size_t l) { return data_[(i * K_ + k) * L_ + l]; }
  double operator()(std::size_t i, std::size_t k, std::size_t l) const {
    return data_[(i * K_ + k) * L_ + l];
  }
  std::size_t I() const noexcept { return I_; }
  std::size_t K() const noexcept { return K_; }
  std::size_t L() const noexcept { return L_; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

private:
  std::size_t I_ = 0, K_ = 0, L_ = 0;
  std::vector<double> data_;
};

struct HeterogeneityScale {
  std::vector<double> tau;
  Eigen::MatrixXd corr;
  Eigen::MatrixXd sigma_omega;
};

struct PopulationMeans {
  std::vector<double> alpha;
};

struct SensitivityPath {
  std::vector<double> values;
};

/// beta(i, t, k) for every individual, grid point and coefficient; k fastest.
class SensitivityTable {
public:
  SensitivityTable() = default;
  SensitivityTable(std::size_t I, std::size_t T, std::size_t K)
      : I_(I), T_(T), K_(K), data_(I * T * K, 0.0), present_(I * K, 1) {}

  double& operator()(std::size_t i, std::size_t t, std::size_t k) { return data_[(i * T_ + t) * K_ + k]; }
  double operator()(std::size_t i, std::size_t t, std::size_t k) const {
    return data_[(i * T_ + t) * K_ + k];
  }
  /// Coefficients of individual i at time t starting at k.
  const double* slice(std::size_t i, std::size_t t, std::size_t k) const {
    return data_.data() + (i * T_ + t) * K_ + k;
  }
  double* slice(std::size_t i, std::size_t t, std::size_t k) { return data_.data() + (i * T_ + t) * K_ + k; }

  SensitivityPath path(std::size_t i, std::size_t k) const {
    SensitivityPath p;
    p.values.resize(T_);
    for (std::size_t t = 0; t < T_; ++t) p.values[t] = (*this)(i, t, k);
    return p;
  }
  void set_path(std::size_t i, std::size_t k, const SensitivityPath& p) {
    if (p.values.size() != T_) throw InvalidArgument("SensitivityTable::set_path: wrong length");
    for (std::size_t t = 0; t < T_; ++t) (*this)(i, t, k) = p.values[t];
    present_[i * K_ + k] = 1;
  }
  bool has(std::size_t i, std::size_t k) const { return present_[i * K_ + k] != 0; }
  void mark_missing(std::size_t i, std::size_t k) { present_[i * K_ + k] = 0; }

  std::size_t I() const noexcept { return I_; }
  std::size_t T() const noexcept { return T_; }
  std::size_t K() const noexcept { return K_; }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

private:
  std::size_t I_ = 0, T_ = 0, K_ = 0;
  std::vector<double> data_;
  std::vector<unsigned char> present_;
};

/// Prior settings. The model leaves rho and alpha priors open; these are the
/// defaults, overridable from the run configuration.
struct PriorConfig {
  double alpha_sd = 5.0;      // alpha_k ~ N(0, alpha_sd)
  double rho_median = 4.0;    // rho_l ~ LogNormal(log rho_median, rho_log_sd)
  double rho_log_sd = 1.0;
  double tau_scale = 1.0;     // tau_k ~ N+(0, tau_scale)
  double lkj_shape = 2.0;     // Lambda ~ LKJ(lkj_shape)

  bool operator==(const PriorConfig&) const = default;
};

inline LatentFactorSet realize_factors(const Eigen::MatrixXd& innovations,
                                       const std::vector<double>& length_scales, const TimeGrid& grid) {
  const auto L = static_cast<Eigen::Index>(length_scales.size());
  if (innovations.rows() != L || innovations.cols() != static_cast<Eigen::Index>(grid.size()))
    throw InvalidArgument("realize_factors: innovations must be L x T");
  LatentFactorSet f{innovations, length_scales, Eigen::MatrixXd::Zero(L, static_cast<Eigen::Index>(grid.size()))};
  for (Eigen::Index l = 0; l < L; ++l) {
    kernels::SEKernelParams p{1.0, length_scales[static_cast<std::size_t>(l)]};
    p.validate();
    const auto fc = kernels::factorize_covariance(grid, p, kernels::default_jitter(p));
    f.realized.row(l) = (fc.lower * innovations.row(l).transpose()).transpose();
  }
  return f;
}

inline SensitivityPath assemble_sensitivity(std::size_t i, std::size_t k, const PopulationMeans& alpha,
                                            const WeightTensor& omega, const LatentFactorSet& factors) {
  if (i >= omega.I() || k >= omega.K() || k >= alpha.alpha.size() || omega.L() != factors.L())
    throw InvalidArgument("assemble_sensitivity: index out of range");
  const auto T = static_cast<std::size_t>(factors.realized.cols());
  SensitivityPath path;
  path.values.assign(T, alpha.alpha[k]);
  for (std::size_t t = 0; t < T; ++t) {
    double s = alpha.alpha[k];
    for (std::size_t l = 0; l < factors.L(); ++l)
      s += omega(i, k, l) * factors.realized(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t));
    path.values[t] = s;
  }
  return path;
}

inline SensitivityTable assemble_all(const PopulationMeans& alpha, const WeightTensor& omega,
                                     const LatentFactorSet& factors) {
  const std::size_t I = omega.I(), K = omega.K(), T = static_cast<std::size_t>(factors.realized.cols());
  SensitivityTable table(I, T, K);
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t k = 0; k < K; ++k) table.set_path(i, k, assemble_sensitivity(i, k, alpha, omega, factors));
  return table;
}

/// Throws unless `corr` is a symmetric, unit-diagonal, positive-definite matrix.
inline void validate_correlation(const Eigen::MatrixXd& corr, double tol = 1e-10) {
  if (corr.rows() != corr.cols() || corr.rows() == 0)
    throw InvalidArgument("correlation matrix must be square and nonempty");
  for (Eigen::Index i = 0; i < corr.rows(); ++i) {
    if (std::abs(corr(i, i) - 1.0) > tol) throw InvalidArgument("correlation matrix needs unit diagonal");
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(corr(i, j) - corr(j, i)) > tol) throw InvalidArgument("correlation matrix not symmetric");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success)
    throw InvalidArgument("correlation matrix not positive definite");
}

inline Eigen::MatrixXd compose_sigma_omega(const std::vector<double>& tau, const Eigen::MatrixXd& corr) {
  if (static_cast<Eigen::Index>(tau.size()) != corr.rows())
    throw InvalidArgument("compose_sigma_omega: tau and corr size mismatch");
  for (double t : tau)
    if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("compose_sigma_omega: tau must be > 0");
  validate_correlation(corr);
  const Eigen::Map<const Eigen::VectorXd> tv(tau.data(), static_cast<Eigen::Index>(tau.size()));
  return tv.asDiagonal() * corr * tv.asDiagonal();
}

inline HeterogeneityScale make_heterogeneity(std::vector<double> tau, Eigen::MatrixXd corr) {
  HeterogeneityScale h{std::move(tau), std::move(corr), {}};
  h.sigma_omega = compose_sigma_omega(h.tau, h.corr);
  return h;
}

/// (shape - 1) log det(corr); the normalizing constant is omitted.
inline double lkj_log_density_unnormalized(const Eigen::MatrixXd& corr, double shape) {
  if (!(shape > 0.0)) throw InvalidArgument("lkj: shape must be > 0");
  validate_correlation(corr);
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  const Eigen::MatrixXd l = llt.matrixL();
  return (shape - 1.0) * 2.0 * l.diagonal().array().log().sum();
}

inline double half_normal_log_density(double x, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("half_normal: scale must be > 0");
  if (!(x > 0.0)) throw InvalidArgument("half_normal: x must be > 0");
  return std::log(2.0) - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(scale) - x * x / (2.0 * scale * scale);
}

inline double normal_log_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) - 0.5 * z * z;
}

// Cholesky-of-correlation transform. Unconstrained values are canonical
// partial correlations through tanh, stored row by row below the diagonal.

inline std::size_t corr_free_size(std::size_t K) { return K * (K - 1) / 2; }

/// Returns the K x K lower factor (row-major) and accumulates log |d offdiag(L L^T) / d y|; the
/// Jacobian through the factor excluding the L -> L L^T step, which lkj_cholesky_log_density adds.
template <class S>
std::vector<S> corr_cholesky_constrain(std::span<const S> y, std::size_t K, S& log_jacobian) {
  using std::log1p;
  using std::sqrt;
  using std::tanh;
  if (y.size() != corr_free_size(K)) throw InvalidArgument("corr_cholesky_constrain: wrong size");
  std::vector<S> lower(K * K, S(0.0));
  if (K == 0) return lower;
  lower[0] = S(1.0);
  std::size_t idx = 0;
  for (std::size_t i = 1; i < K; ++i) {
    S sum_sqs(0.0);
    for (std::size_t j = 0; j < i; ++j) {
      const S z = tanh(y[idx++]);
      log_jacobian = log_jacobian + log1p(-(z * z));
      if (j == 0) {
        lower[i * K] = z;
        sum_sqs = z * z;
      } else {
        log_jacobian = log_jacobian + 0.5 * log1p(-sum_sqs);
        const S v = z * sqrt(1.0 - sum_sqs);
        lower[i * K + j] = v;
        sum_sqs = sum_sqs + v * v;
      }
    }
    lower[i * K + i] = sqrt(1.0 - sum_sqs);
  }
  return lower;
}

/// log LKJ density of L L^T expressed on the Cholesky factor (includes the L -> L L^T Jacobian).
template <class S>
S lkj_cholesky_log_density(const std::vector<S>& lower, std::size_t K, double shape) {
  using std::log;
  S lp(0.0);
  for (std::size_t i = 1; i < K; ++i) {
    const double coef = static_cast<double>(K) - static_cast<double>(i) - 3.0 + 2.0 * shape;
    lp = lp + coef * log(lower[i * K + i]);
  }
  return lp;
}

inline Eigen::MatrixXd to_matrix(const std::vector<double>& rowmajor, std::size_t K) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = 0; j < K; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rowmajor[i * K + j];
  return m;
}

inline Eigen::MatrixXd corr_cholesky_constrain(std::span<const double> y, std::size_t K) {
  double lj = 0.0;
  return to_matrix(corr_cholesky_constrain<double>(y, K, lj), K);
}

/// Inverse of corr_cholesky_constrain for a lower factor with unit-norm rows.
inline std::vector<double> corr_cholesky_free(const Eigen::MatrixXd& lower) {
  const auto K = static_cast<std::size_t>(lower.rows());
  std::vector<double> y;
  y.reserve(corr_free_size(K));
  for (std::size_t i = 1; i < K; ++i) {
    double sum_sqs = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      const double lij = lower(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double z = j == 0 ? lij : lij / std::sqrt(1.0 - sum_sqs);
      sum_sqs += lij * lij;
      y.push_back(std::atanh(z));
    }
  }
  return y;
}

}  // namespace mcdh::model

#endif  // MCDH_MODEL_CORE_HPP
