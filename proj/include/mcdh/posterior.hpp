#ifndef MCDH_POSTERIOR_HPP
#define MCDH_POSTERIOR_HPP

// Unconstrained log posterior of the dynamic-heterogeneity model and its
// exact gradient. The hyperparameter block (tau, correlation factor) runs on
// the reverse-mode tape; factors, weights and the likelihood carry
// hand-written adjoints.

#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcdh/ad.hpp"
#include "mcdh/choice.hpp"
#include "mcdh/gp_extrapolate.hpp"
#include "mcdh/kernels.hpp"
#include "mcdh/model.hpp"
#include "mcdh/model_core.hpp"

namespace mcdh::posterior {

using model::LatentFactorSet;
using model::PriorConfig;
using model::SensitivityTable;
using model::WeightTensor;

/// One point of the unconstrained parameter space.
struct ParameterState {
  Eigen::MatrixXd innovations;             // L x T
  std::vector<double> log_length_scales;   // L
  std::vector<double> alpha;               // K
  WeightTensor omega_raw;                  // I x K x L
  std::vector<double> log_tau;             // K
  std::vector<double> corr_unconstrained;  // K (K - 1) / 2
};

/// Offsets of each block inside the flat parameter vector.
struct McdhLayout {
  std::size_t I = 0, K = 0, L = 0, T = 0;
  std::size_t innovations = 0, log_rho = 0, alpha = 0, omega_raw = 0, log_tau = 0, corr = 0, size = 0;

  McdhLayout() = default;
  McdhLayout(std::size_t I_, std::size_t K_, std::size_t L_, std::size_t T_) : I(I_), K(K_), L(L_), T(T_) {
    innovations = 0;
    log_rho = innovations + L * T;
    alpha = log_rho + L;
    omega_raw = alpha + K;
    log_tau = omega_raw + I * K * L;
    corr = log_tau + K;
    size = corr + model::corr_free_size(K);
  }

  std::vector<double> flatten(const ParameterState& s) const {
    std::vector<double> v(size);
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t t = 0; t < T; ++t)
        v[innovations + l * T + t] = s.innovations(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t));
    std::copy(s.log_length_scales.begin(), s.log_length_scales.end(), v.begin() + static_cast<std::ptrdiff_t>(log_rho));
    std::copy(s.alpha.begin(), s.alpha.end(), v.begin() + static_cast<std::ptrdiff_t>(alpha));
    std::copy(s.omega_raw.data().begin(), s.omega_raw.data().end(), v.begin() + static_cast<std::ptrdiff_t>(omega_raw));
    std::copy(s.log_tau.begin(), s.log_tau.end(), v.begin() + static_cast<std::ptrdiff_t>(log_tau));
    std::copy(s.corr_unconstrained.begin(), s.corr_unconstrained.end(), v.begin() + static_cast<std::ptrdiff_t>(corr));
    return v;
  }

  ParameterState unflatten(std::span<const double> v) const {
    if (v.size() != size) throw InvalidArgument("McdhLayout::unflatten: wrong length");
    ParameterState s;
    s.innovations.resize(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(T));
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t t = 0; t < T; ++t)
        s.innovations(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t)) = v[innovations + l * T + t];
    s.log_length_scales.assign(v.begin() + static_cast<std::ptrdiff_t>(log_rho), v.begin() + static_cast<std::ptrdiff_t>(alpha));
    s.alpha.assign(v.begin() + static_cast<std::ptrdiff_t>(alpha), v.begin() + static_cast<std::ptrdiff_t>(omega_raw));
    s.omega_raw = WeightTensor(I, K, L);
    std::copy(v.begin() + static_cast<std::ptrdiff_t>(omega_raw), v.begin() + static_cast<std::ptrdiff_t>(log_tau),
              s.omega_raw.data().begin());
    s.log_tau.assign(v.begin() + static_cast<std::ptrdiff_t>(log_tau), v.begin() + static_cast<std::ptrdiff_t>(corr));
    s.corr_unconstrained.assign(v.begin() + static_cast<std::ptrdiff_t>(corr), v.end());
    return s;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    n.reserve(size);
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t t = 0; t < T; ++t) n.push_back("innovation[" + std::to_string(l) + "," + std::to_string(t) + "]");
    for (std::size_t l = 0; l < L; ++l) n.push_back("log_rho[" + std::to_string(l) + "]");
    for (std::size_t k = 0; k < K; ++k) n.push_back("alpha[" + std::to_string(k) + "]");
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < L; ++l)
          n.push_back("omega_raw[" + std::to_string(i) + "," + std::to_string(k) + "," + std::to_string(l) + "]");
    for (std::size_t k = 0; k < K; ++k) n.push_back("log_tau[" + std::to_string(k) + "]");
    for (std::size_t m = 0; m < model::corr_free_size(K); ++m) n.push_back("corr_free[" + std::to_string(m) + "]");
    return n;
  }
};

/// Constrained quantities implied by a ParameterState.
struct Constrained {
  LatentFactorSet factors;
  model::PopulationMeans alpha;
  WeightTensor omega;
  model::HeterogeneityScale heterogeneity;
  Eigen::MatrixXd corr_cholesky;
};

inline Constrained constrain(const ParameterState& s, const kernels::TimeGrid& grid) {
  const std::size_t K = s.alpha.size(), L = s.log_length_scales.size();
  if (s.log_tau.size() != K || s.corr_unconstrained.size() != model::corr_free_size(K) || s.omega_raw.K() != K ||
      s.omega_raw.L() != L)
    throw InvalidArgument("constrain: inconsistent parameter state");
  Constrained c;
  std::vector<double> rho(L);
  for (std::size_t l = 0; l < L; ++l) rho[l] = std::exp(s.log_length_scales[l]);
  c.factors = model::realize_factors(s.innovations, rho, grid);
  c.alpha.alpha = s.alpha;
  c.corr_cholesky = model::corr_cholesky_constrain(s.corr_unconstrained, K);
  std::vector<double> tau(K);
  for (std::size_t k = 0; k < K; ++k) tau[k] = std::exp(s.log_tau[k]);
  Eigen::MatrixXd corr = c.corr_cholesky * c.corr_cholesky.transpose();
  corr.diagonal().setOnes();
  const Eigen::Map<const Eigen::VectorXd> tv(tau.data(), static_cast<Eigen::Index>(K));
  c.heterogeneity.sigma_omega = tv.asDiagonal() * corr * tv.asDiagonal();
  c.heterogeneity.tau = tau;
  c.heterogeneity.corr = std::move(corr);
  const Eigen::MatrixXd ls = tv.asDiagonal() * c.corr_cholesky;
  const std::size_t I = s.omega_raw.I();
  c.omega = WeightTensor(I, K, L);
  Eigen::VectorXd r(static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t k = 0; k < K; ++k) r(static_cast<Eigen::Index>(k)) = s.omega_raw(i, k, l);
      const Eigen::VectorXd w = ls.triangularView<Eigen::Lower>() * r;
      for (std::size_t k = 0; k < K; ++k) c.omega(i, k, l) = w(static_cast<Eigen::Index>(k));
    }
  return c;
}

/// Inverse of constrain: factors through L^{-1}, weights through (diag(tau) chol(corr))^{-1}.
inline ParameterState unconstrain(const Constrained& c, const kernels::TimeGrid& grid) {
  const std::size_t K = c.alpha.alpha.size(), L = c.factors.L(), I = c.omega.I();
  ParameterState s;
  s.innovations.resize(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t l = 0; l < L; ++l) {
    kernels::SEKernelParams p{1.0, c.factors.length_scales[l]};
    const auto fc = kernels::factorize_covariance(grid, p, kernels::default_jitter(p));
    const Eigen::VectorXd u = c.factors.realized.row(static_cast<Eigen::Index>(l)).transpose();
    s.innovations.row(static_cast<Eigen::Index>(l)) = fc.lower.triangularView<Eigen::Lower>().solve(u).transpose();
    s.log_length_scales.push_back(std::log(c.factors.length_scales[l]));
  }
  s.alpha = c.alpha.alpha;
  for (double t : c.heterogeneity.tau) s.log_tau.push_back(std::log(t));
  const Eigen::MatrixXd lc = kernels::cholesky_lower(c.heterogeneity.corr);
  s.corr_unconstrained = model::corr_cholesky_free(lc);
  const Eigen::Map<const Eigen::VectorXd> tv(c.heterogeneity.tau.data(), static_cast<Eigen::Index>(K));
  const Eigen::MatrixXd ls = tv.asDiagonal() * lc;
  s.omega_raw = WeightTensor(I, K, L);
  Eigen::VectorXd w(static_cast<Eigen::Index>(K));
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t k = 0; k < K; ++k) w(static_cast<Eigen::Index>(k)) = c.omega(i, k, l);
      const Eigen::VectorXd r = ls.triangularView<Eigen::Lower>().solve(w);
      for (std::size_t k = 0; k < K; ++k) s.omega_raw(i, k, l) = r(static_cast<Eigen::Index>(k));
    }
  return s;
}

namespace detail {
inline ad::Tape& tape() {
  static thread_local ad::Tape t;
  return t;
}

inline const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

/// log N+(tau | 0, scale) on a tape variable.
inline ad::Var half_normal_lp(const ad::Var& tau, double scale) {
  return ad::Var(std::log(2.0) - kLogSqrt2Pi - std::log(scale)) - tau * tau * (1.0 / (2.0 * scale * scale));
}
}  // namespace detail

/// Tape-recorded log prior + Jacobian of the (log_tau, corr_free) block and
/// the resulting diag(tau) * chol(corr) factor. Shared by models with a
/// correlated-heterogeneity block.
struct ScaleCorrBlock {
  std::vector<ad::Var> log_scale, corr_free, factor;  // factor: K x K row-major lower
  ad::Var log_prior, log_jacobian;
  Eigen::MatrixXd factor_value;

  static ScaleCorrBlock record(ad::Tape& tape, std::span<const double> log_scale_values,
                               std::span<const double> corr_values, const PriorConfig& priors, bool correlated) {
    const std::size_t K = log_scale_values.size();
    ScaleCorrBlock b;
    b.log_prior = ad::Var(0.0);
    b.log_jacobian = ad::Var(0.0);
    for (double v : log_scale_values) b.log_scale.push_back(tape.variable(v));
    std::vector<ad::Var> lc;
    if (correlated) {
      for (double v : corr_values) b.corr_free.push_back(tape.variable(v));
      ad::Var cj(0.0);
      lc = model::corr_cholesky_constrain<ad::Var>(std::span<const ad::Var>(b.corr_free), K, cj);
      b.log_jacobian = b.log_jacobian + cj;
      b.log_prior = b.log_prior + model::lkj_cholesky_log_density(lc, K, priors.lkj_shape);
    } else {
      lc.assign(K * K, ad::Var(0.0));
      for (std::size_t k = 0; k < K; ++k) lc[k * K + k] = ad::Var(1.0);
    }
    b.factor.assign(K * K, ad::Var(0.0));
    b.factor_value = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k) {
      const ad::Var tau = ad::exp(b.log_scale[k]);
      b.log_prior = b.log_prior + detail::half_normal_lp(tau, priors.tau_scale);
      b.log_jacobian = b.log_jacobian + b.log_scale[k];
      for (std::size_t j = 0; j <= k; ++j) {
        b.factor[k * K + j] = tau * lc[k * K + j];
        b.factor_value(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = b.factor[k * K + j].value();
      }
    }
    return b;
  }

  /// Seeds the factor adjoint (lower triangle) and the scalar terms, runs the tape backwards and
  /// writes gradients for log_scale / corr_free.
  void backward(ad::Tape& tape, const Eigen::MatrixXd& factor_bar, std::span<double> log_scale_grad,
                std::span<double> corr_grad) const {
    const std::size_t K = log_scale.size();
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t j = 0; j <= k; ++j)
        tape.seed(factor[k * K + j], factor_bar(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)));
    tape.seed(log_prior, 1.0);
    tape.seed(log_jacobian, 1.0);
    tape.backward();
    for (std::size_t k = 0; k < K; ++k) log_scale_grad[k] = tape.adjoint(log_scale[k]);
    for (std::size_t m = 0; m < corr_free.size(); ++m) corr_grad[m] = tape.adjoint(corr_free[m]);
  }
};

/// log LogNormal(rho | log median, sd) at rho = exp(x), the log-Jacobian x, and d/dx of their sum.
struct LogScalePrior {
  double log_prior, log_jacobian, grad;
};
inline LogScalePrior log_normal_on_log(double x, double median, double sd) {
  const double m = std::log(median);
  const double z = (x - m) / sd;
  return {-detail::kLogSqrt2Pi - std::log(sd) - 0.5 * z * z - x, x, -z / sd};
}

/// The dynamic-heterogeneity posterior over one training panel.
class McdhPosterior final : public ChoiceModel {
public:
  McdhPosterior(PanelPtr panel, std::size_t factors, PriorConfig priors = {})
      : ChoiceModel(std::move(panel)), priors_(priors),
        layout_(this->panel().dims.I, this->panel().dims.K, factors, this->panel().grid.size()) {}

  ModelKind kind() const override { return ModelKind::mcdh; }
  std::size_t dimension() const override { return layout_.size; }
  std::vector<std::string> parameter_names() const override { return layout_.names(); }
  const McdhLayout& layout() const noexcept { return layout_; }
  const PriorConfig& priors() const noexcept { return priors_; }

  double log_density(std::span<const double> theta, std::span<double> gradient) const override {
    check_dimension(theta, gradient);
    return run(theta, gradient, nullptr);
  }

  DensityParts parts(std::span<const double> theta) const override {
    check_dimension(theta, {});
    DensityParts p;
    run(theta, {}, &p);
    return p;
  }

  Constrained constrained(std::span<const double> theta) const {
    return constrain(layout_.unflatten(theta), panel().grid);
  }

  SensitivityTable sensitivities(std::span<const double> theta) const override {
    const Constrained c = constrained(theta);
    return assemble(c, c.factors.realized);
  }

  SensitivityTable extrapolate(std::span<const double> theta, std::span<const double> new_times,
                               std::mt19937_64& rng) const override {
    const Constrained c = constrained(theta);
    Eigen::MatrixXd u(static_cast<Eigen::Index>(layout_.L), static_cast<Eigen::Index>(new_times.size()));
    for (std::size_t l = 0; l < layout_.L; ++l) {
      const Eigen::VectorXd row = c.factors.realized.row(static_cast<Eigen::Index>(l)).transpose();
      const auto cond = eval::gp_extrapolate(panel().grid, std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                                             {1.0, c.factors.length_scales[l]}, new_times, &rng);
      u.row(static_cast<Eigen::Index>(l)) = cond.draw.transpose();
    }
    return assemble(c, u);
  }

private:
  SensitivityTable assemble(const Constrained& c, const Eigen::MatrixXd& u) const {
    const std::size_t I = layout_.I, K = layout_.K, L = layout_.L, T = static_cast<std::size_t>(u.cols());
    SensitivityTable table(I, T, K);
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < K; ++k) {
          double s = c.alpha.alpha[k];
          for (std::size_t l = 0; l < L; ++l) s += c.omega(i, k, l) * u(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t));
          table(i, t, k) = s;
        }
    return table;
  }

  double run(std::span<const double> theta, std::span<double> grad, DensityParts* parts) const {
    const auto& lay = layout_;
    const std::size_t I = lay.I, K = lay.K, L = lay.L, T = lay.T;
    const bool want_grad = !grad.empty();
    double log_prior = 0.0, log_jac = 0.0;

    ad::Tape& tape = detail::tape();
    tape.clear();
    const ScaleCorrBlock hyper = ScaleCorrBlock::record(
        tape, theta.subspan(lay.log_tau, K), theta.subspan(lay.corr, model::corr_free_size(K)), priors_, true);
    log_prior += hyper.log_prior.value();
    log_jac += hyper.log_jacobian.value();
    const Eigen::MatrixXd& ls = hyper.factor_value;

    // latent factors u_l = chol(K(rho_l)) z_l
    std::vector<kernels::NonCenteredGp> gps;
    gps.reserve(L);
    Eigen::MatrixXd z(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(T));
    Eigen::MatrixXd u(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(T));
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t t = 0; t < T; ++t) {
        const double v = theta[lay.innovations + l * T + t];
        z(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t)) = v;
        log_prior += -detail::kLogSqrt2Pi - 0.5 * v * v;
      }
      const double x = theta[lay.log_rho + l];
      const auto pr = log_normal_on_log(x, priors_.rho_median, priors_.rho_log_sd);
      log_prior += pr.log_prior;
      log_jac += pr.log_jacobian;
      gps.emplace_back(panel().grid, kernels::SEKernelParams{1.0, std::exp(x)});
      u.row(static_cast<Eigen::Index>(l)) = (gps.back().lower() * z.row(static_cast<Eigen::Index>(l)).transpose()).transpose();
    }
    for (std::size_t k = 0; k < K; ++k) log_prior += model::normal_log_density(theta[lay.alpha + k], 0.0, priors_.alpha_sd);

    // omega_il = diag(tau) chol(corr) raw_il
    const double* raw = theta.data() + lay.omega_raw;
    std::vector<double> omega(I * K * L, 0.0);
    for (std::size_t n = 0; n < I * K * L; ++n) log_prior += -detail::kLogSqrt2Pi - 0.5 * raw[n] * raw[n];
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j <= k; ++j) {
          const double f = ls(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
          for (std::size_t l = 0; l < L; ++l) omega[(i * K + k) * L + l] += f * raw[(i * K + j) * L + l];
        }

    // beta(i, t, k)
    const double* alpha = theta.data() + lay.alpha;
    std::vector<double>& beta = scratch_beta();
    beta.assign(I * T * K, 0.0);
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t t = 0; t < T; ++t) {
        double* b = beta.data() + (i * T + t) * K;
        for (std::size_t k = 0; k < K; ++k) {
          double s = alpha[k];
          const double* w = omega.data() + (i * K + k) * L;
          for (std::size_t l = 0; l < L; ++l) s += w[l] * u(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t));
          b[k] = s;
        }
      }

    std::vector<double>& beta_bar = scratch_beta_bar();
    if (want_grad) beta_bar.assign(I * T * K, 0.0);
    const double ll = choice::log_likelihood_dense(panel(), beta.data(), want_grad ? beta_bar.data() : nullptr);

    if (parts) *parts = DensityParts{ll, log_prior, log_jac};
    const double value = ll + log_prior + log_jac;
    if (!want_grad) return value;

    std::fill(grad.begin(), grad.end(), 0.0);
    // alpha
    for (std::size_t k = 0; k < K; ++k) grad[lay.alpha + k] = -alpha[k] / (priors_.alpha_sd * priors_.alpha_sd);
    std::vector<double> omega_bar(I * K * L, 0.0);
    Eigen::MatrixXd u_bar = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(T));
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t t = 0; t < T; ++t) {
        const double* bb = beta_bar.data() + (i * T + t) * K;
        for (std::size_t k = 0; k < K; ++k) {
          const double g = bb[k];
          if (g == 0.0) continue;
          grad[lay.alpha + k] += g;
          const double* w = omega.data() + (i * K + k) * L;
          double* wb = omega_bar.data() + (i * K + k) * L;
          for (std::size_t l = 0; l < L; ++l) {
            wb[l] += g * u(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t));
            u_bar(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t)) += g * w[l];
          }
        }
      }
    // raw and the scale factor
    Eigen::MatrixXd ls_bar = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    for (std::size_t n = 0; n < I * K * L; ++n) grad[lay.omega_raw + n] = -raw[n];
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j <= k; ++j) {
          const double f = ls(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
          double acc = 0.0;
          for (std::size_t l = 0; l < L; ++l) {
            const double wb = omega_bar[(i * K + k) * L + l];
            grad[lay.omega_raw + (i * K + j) * L + l] += f * wb;
            acc += wb * raw[(i * K + j) * L + l];
          }
          ls_bar(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) += acc;
        }
    // factors
    for (std::size_t l = 0; l < L; ++l) {
      const auto& gp = gps[l];
      const Eigen::VectorXd ub = u_bar.row(static_cast<Eigen::Index>(l)).transpose();
      const Eigen::VectorXd zl = z.row(static_cast<Eigen::Index>(l)).transpose();
      const Eigen::VectorXd zb = gp.lower().transpose() * ub;
      for (std::size_t t = 0; t < T; ++t)
        grad[lay.innovations + l * T + t] = zb(static_cast<Eigen::Index>(t)) - zl(static_cast<Eigen::Index>(t));
      const Eigen::MatrixXd lbar = ub * zl.transpose();
      const double rho = gp.params().length_scale;
      const double rho_bar = gp.param_adjoint(lbar).second;
      const auto pr = log_normal_on_log(theta[lay.log_rho + l], priors_.rho_median, priors_.rho_log_sd);
      grad[lay.log_rho + l] = rho_bar * rho + pr.grad;
    }
    hyper.backward(tape, ls_bar, grad.subspan(lay.log_tau, K), grad.subspan(lay.corr, model::corr_free_size(K)));
    return value;
  }

  static std::vector<double>& scratch_beta() {
    static thread_local std::vector<double> v;
    return v;
  }
  static std::vector<double>& scratch_beta_bar() {
    static thread_local std::vector<double> v;
    return v;
  }

  PriorConfig priors_;
  McdhLayout layout_;
};

/// Non-owning PanelPtr for callers that keep the panel alive themselves.
inline PanelPtr borrow(const choice::Panel& panel) { return PanelPtr(PanelPtr{}, &panel); }

inline LogDensityResult log_posterior(const ParameterState& state, const choice::Panel& panel,
                                      const PriorConfig& priors = {}) {
  const McdhPosterior post(borrow(panel), state.log_length_scales.size(), priors);
  return post.evaluate(post.layout().flatten(state));
}

}  // namespace mcdh::posterior

#endif  // MCDH_POSTERIOR_HPP
