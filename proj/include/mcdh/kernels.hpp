#ifndef MCDH_KERNELS_HPP
#define MCDH_KERNELS_HPP

// Squared-exponential kernel, covariance assembly and the Cholesky
// machinery shared by every Gaussian process in the library.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mcdh/errors.hpp"

namespace mcdh::kernels {

/// Strictly increasing, finite time coordinates. Quarters map to 0, 1, 2, ...
class TimeGrid {
public:
  TimeGrid() = default;

  explicit TimeGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.empty()) throw InvalidArgument("TimeGrid: at least one point required");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!std::isfinite(points_[i])) throw InvalidArgument("TimeGrid: non-finite point");
      if (i > 0 && !(points_[i] > points_[i - 1]))
        throw InvalidArgument("TimeGrid: points must be strictly increasing");
    }
  }

  static TimeGrid consecutive(std::size_t T, double start = 0.0) {
    std::vector<double> p(T);
    for (std::size_t t = 0; t < T; ++t) p[t] = start + static_cast<double>(t);
    return TimeGrid(std::move(p));
  }

  std::size_t size() const noexcept { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  std::span<const double> points() const noexcept { return points_; }

  bool operator==(const TimeGrid&) const = default;

private:
  std::vector<double> points_;
};

struct SEKernelParams {
  double amplitude = 1.0;
  double length_scale = 1.0;

  void validate() const {
    if (!(std::isfinite(amplitude) && amplitude > 0.0) ||
        !(std::isfinite(length_scale) && length_scale > 0.0))
      throw InvalidArgument("SEKernelParams: amplitude and length_scale must be finite and > 0");
  }
};

struct CovarianceMatrix {
  Eigen::MatrixXd entries;
  double jitter_applied = 0.0;
};

/// Starting jitter relative to the kernel variance.
inline constexpr double kInitialRelativeJitter = 1e-8;
/// Largest relative jitter tried before giving up.
inline constexpr double kMaxRelativeJitter = 1e-4;

namespace detail {
inline std::atomic<std::size_t>& escalation_counter() {
  static std::atomic<std::size_t> n{0};
  return n;
}
}  // namespace detail

/// Number of times any covariance needed more than its starting jitter (process lifetime).
inline std::size_t jitter_escalations() { return detail::escalation_counter().load(); }
inline void reset_jitter_escalations() { detail::escalation_counter().store(0); }

inline double default_jitter(const SEKernelParams& params) {
  return kInitialRelativeJitter * params.amplitude * params.amplitude;
}

inline double se_kernel(double t, double t2, const SEKernelParams& params) {
  if (!std::isfinite(t) || !std::isfinite(t2))
    throw InvalidArgument("se_kernel: non-finite input");
  params.validate();
  const double d = t - t2;
  return params.amplitude * params.amplitude *
         std::exp(-d * d / (2.0 * params.length_scale * params.length_scale));
}

/// Kernel matrix without any jitter.
inline Eigen::MatrixXd kernel_matrix(std::span<const double> a, std::span<const double> b,
                                     const SEKernelParams& params) {
  params.validate();
  const double s2 = params.amplitude * params.amplitude;
  const double inv = 1.0 / (2.0 * params.length_scale * params.length_scale);
  Eigen::MatrixXd k(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = a[i] - b[j];
      k(i, j) = s2 * std::exp(-d * d * inv);
    }
  return k;
}

/// Lower Cholesky factor; throws NumericalInstability when `m` is not positive definite.
inline Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw InvalidArgument("cholesky_lower: matrix not square");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw NumericalInstability("cholesky_lower: matrix is not positive definite");
  Eigen::MatrixXd l = llt.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i)))
      throw NumericalInstability("cholesky_lower: non-positive pivot");
  return l;
}

inline Eigen::MatrixXd cholesky_lower(const CovarianceMatrix& m) { return cholesky_lower(m.entries); }

/// A covariance matrix together with its factor. The jitter is escalated from
/// `jitter` by factors of ten up to kMaxRelativeJitter * amplitude^2.
struct FactorizedCovariance {
  CovarianceMatrix cov;
  Eigen::MatrixXd lower;
};

inline FactorizedCovariance factorize_covariance(const TimeGrid& grid, const SEKernelParams& params,
                                                 double jitter) {
  if (grid.size() == 0) throw InvalidArgument("build_covariance: empty grid");
  if (!(jitter >= 0.0) || !std::isfinite(jitter))
    throw InvalidArgument("build_covariance: jitter must be finite and >= 0");
  const Eigen::MatrixXd base = kernel_matrix(grid.points(), grid.points(), params);
  const double s2 = params.amplitude * params.amplitude;
  const double max_jitter = kMaxRelativeJitter * s2;
  double current = jitter;
  bool escalated = false;
  while (true) {
    Eigen::MatrixXd k = base;
    k.diagonal().array() += current;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    bool ok = llt.info() == Eigen::Success;
    Eigen::MatrixXd l;
    if (ok) {
      l = llt.matrixL();
      ok = (l.diagonal().array() > 0.0).all() && l.allFinite();
    }
    if (ok) {
      if (escalated) ++detail::escalation_counter();
      return {CovarianceMatrix{std::move(k), current}, std::move(l)};
    }
    double next = current > 0.0 ? current * 10.0 : kInitialRelativeJitter * s2;
    if (current >= max_jitter * (1.0 - 1e-12) || next > max_jitter * (1.0 + 1e-12)) {
      std::ostringstream os;
      os << "build_covariance: Cholesky failed after jitter " << current << " (grid size "
         << grid.size() << ", first " << grid[0] << ", last " << grid[grid.size() - 1]
         << "; amplitude " << params.amplitude << ", length_scale " << params.length_scale << ")";
      throw NumericalInstability(os.str());
    }
    current = next;
    escalated = true;
  }
}

inline CovarianceMatrix build_covariance(const TimeGrid& grid, const SEKernelParams& params,
                                         double jitter) {
  return factorize_covariance(grid, params, jitter).cov;
}

inline CovarianceMatrix build_covariance(const TimeGrid& grid, const SEKernelParams& params) {
  return build_covariance(grid, params, default_jitter(params));
}

/// Reverse-mode sensitivity of a Cholesky factorization: given the adjoint of
/// L (only its lower triangle is read) returns the symmetric adjoint of K = L L^T.
inline Eigen::MatrixXd cholesky_adjoint(const Eigen::MatrixXd& lower, const Eigen::MatrixXd& lower_bar) {
  const Eigen::Index n = lower.rows();
  Eigen::MatrixXd p = (lower.transpose() * lower_bar.triangularView<Eigen::Lower>()).eval();
  p = p.triangularView<Eigen::Lower>();
  p.diagonal() *= 0.5;
  const auto lt = lower.transpose().triangularView<Eigen::Upper>();
  Eigen::MatrixXd x = lt.solve(p);                 // L^{-T} P
  Eigen::MatrixXd y = lt.solve(x.transpose());     // L^{-T} (L^{-T} P)^T = (L^{-T} P L^{-1})^T
  Eigen::MatrixXd kbar(n, n);
  kbar = 0.5 * (y + y.transpose());
  return kbar;
}

/// Adjoints of (amplitude, length_scale) given the adjoint of a jittered SE
/// covariance whose jitter is proportional to amplitude^2.
inline std::pair<double, double> se_param_adjoint(const TimeGrid& grid, const SEKernelParams& params,
                                                  const CovarianceMatrix& cov,
                                                  const Eigen::MatrixXd& kbar) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  const double rho3 = params.length_scale * params.length_scale * params.length_scale;
  double amp_bar = 0.0, rho_bar = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double kij = cov.entries(i, j);
      amp_bar += kbar(i, j) * 2.0 * kij / params.amplitude;
      if (i != j) {
        const double d = grid[i] - grid[j];
        rho_bar += kbar(i, j) * kij * d * d / rho3;
      }
    }
  return {amp_bar, rho_bar};
}

/// Non-centered GP draw f = L z on a grid, with the reverse pass for (z, amplitude, length_scale).
class NonCenteredGp {
public:
  NonCenteredGp(const TimeGrid& grid, const SEKernelParams& params)
      : grid_(&grid), params_(params),
        fact_(factorize_covariance(grid, params, default_jitter(params))) {}

  const Eigen::MatrixXd& lower() const noexcept { return fact_.lower; }
  const CovarianceMatrix& covariance() const noexcept { return fact_.cov; }
  const SEKernelParams& params() const noexcept { return params_; }

  /// Adjoints of (amplitude, length_scale) given accumulated L-bar.
  std::pair<double, double> param_adjoint(const Eigen::MatrixXd& lower_bar) const {
    const Eigen::MatrixXd kbar = cholesky_adjoint(fact_.lower, lower_bar);
    return se_param_adjoint(*grid_, params_, fact_.cov, kbar);
  }

private:
  const TimeGrid* grid_;
  SEKernelParams params_;
  FactorizedCovariance fact_;
};

}  // namespace mcdh::kernels

#endif  // MCDH_KERNELS_HPP
