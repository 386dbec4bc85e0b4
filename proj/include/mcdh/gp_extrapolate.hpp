#ifndef MCDH_GP_EXTRAPOLATE_HPP
#define MCDH_GP_EXTRAPOLATE_HPP

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mcdh/errors.hpp"
#include "mcdh/kernels.hpp"

namespace mcdh::eval {

struct GpConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::VectorXd draw;  // empty unless an rng was supplied
};

/// Conditional distribution of a zero-mean SE Gaussian process at `new_times`
/// given its values `observed` on `grid`. The training covariance carries the
/// default jitter, so conditioning at a training point leaves variance of that order.
inline GpConditional gp_extrapolate(const kernels::TimeGrid& grid, std::span<const double> observed,
                                    const kernels::SEKernelParams& params,
                                    std::span<const double> new_times, std::mt19937_64* rng = nullptr) {
  if (observed.size() != grid.size()) throw InvalidArgument("gp_extrapolate: observed length != grid size");
  for (double t : new_times)
    if (!std::isfinite(t)) throw InvalidArgument("gp_extrapolate: non-finite new time");
  const auto fact = kernels::factorize_covariance(grid, params, kernels::default_jitter(params));
  const Eigen::MatrixXd cross = kernels::kernel_matrix(grid.points(), new_times, params);   // T x M
  const Eigen::MatrixXd prior = kernels::kernel_matrix(new_times, new_times, params);       // M x M
  const Eigen::Map<const Eigen::VectorXd> y(observed.data(), static_cast<Eigen::Index>(observed.size()));
  const auto lower = fact.lower.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd v = lower.solve(cross);  // L^{-1} k*
  const Eigen::VectorXd w = lower.solve(y);      // L^{-1} y
  GpConditional out;
  out.mean = v.transpose() * w;
  out.cov = prior - v.transpose() * v;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  if (rng) {
    const auto M = static_cast<Eigen::Index>(new_times.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.cov);
    Eigen::VectorXd z(M);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index m = 0; m < M; ++m) z(m) = nd(*rng);
    const Eigen::VectorXd scale = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    out.draw = out.mean + es.eigenvectors() * scale.cwiseProduct(z);
  }
  return out;
}

}  // namespace mcdh::eval

#endif  // MCDH_GP_EXTRAPOLATE_HPP
