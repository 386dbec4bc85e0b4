#ifndef MCDH_BENCHMARKS_HPP
#define MCDH_BENCHMARKS_HPP

// Comparison models sharing the choice likelihood and the sampler:
//   logit          beta_ik = mu_k + sigma_k raw_ik
//   logit-info     beta_i  = mu + diag(sigma) chol(corr) raw_i
//   offsets        beta_ik(t) = mu_k + m_k(t) + sigma_k raw_ik,  m_k ~ GP(0, SE(a, r)) shared a, r
//   offsets-info   offsets with diag(sigma) chol(corr) deviations
//   gpdh           beta_ik ~ GP(mu_k(t), SE(s_k, r_k)),  mu_k(t) an ARMA(1,1) recursion

#include <cmath>
#include <cstddef>
#include <algorithm>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
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
#include "mcdh/posterior.hpp"

namespace mcdh::bench {

using model::PriorConfig;
using model::SensitivityTable;

struct ArmaMeanParams {
  double alpha0 = 0.0, alpha1 = 0.0, alpha2 = 0.0;
  double innovation_sd = 1.0;
  std::vector<double> zeta;  // zeta_t, t = 1..T (already scaled)
  std::optional<double> start;
};

/// mu_1 = start + zeta_1 and mu_t = alpha0 + alpha1 mu_{t-1} + alpha2 zeta_{t-1} + zeta_t.
/// Without an explicit start, mu_1 starts at alpha0 / (1 - alpha1) when |alpha1| < 1, else at alpha0.
template <class S>
std::vector<S> arma_recursion(const S& alpha0, const S& alpha1, const S& alpha2, const std::vector<S>& zeta,
                              std::size_t T, const std::optional<S>& start = std::nullopt) {
  if (T < 1) throw InvalidArgument("arma_mean_recursion: T must be >= 1");
  if (zeta.size() < T) throw InvalidArgument("arma_mean_recursion: need T innovations");
  std::vector<S> mu(T);
  S s0 = start ? *start : (std::abs(ad::value_of(alpha1)) < 1.0 ? alpha0 / (1.0 - alpha1) : alpha0);
  mu[0] = s0 + zeta[0];
  for (std::size_t t = 1; t < T; ++t) mu[t] = alpha0 + alpha1 * mu[t - 1] + alpha2 * zeta[t - 1] + zeta[t];
  return mu;
}

inline std::vector<double> arma_mean_recursion(const ArmaMeanParams& p, std::size_t T) {
  if (!(p.innovation_sd > 0.0)) throw InvalidArgument("arma_mean_recursion: innovation sd must be > 0");
  std::vector<double> z = p.zeta;
  if (z.empty()) z.assign(T, 0.0);
  return arma_recursion<double>(p.alpha0, p.alpha1, p.alpha2, z, T, p.start);
}

/// Named contiguous blocks of a flat parameter vector.
class BlockLayout {
public:
  struct Block {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0, size = 0;
  };

  std::size_t add(std::string name, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    blocks_.push_back({std::move(name), std::move(shape), size_, n});
    size_ += n;
    return blocks_.back().offset;
  }
  std::size_t size() const noexcept { return size_; }
  const std::vector<Block>& blocks() const noexcept { return blocks_; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& b : blocks_) {
      std::vector<std::size_t> idx(b.shape.size(), 0);
      for (std::size_t n = 0; n < b.size; ++n) {
        std::string s = b.name + "[";
        for (std::size_t d = 0; d < idx.size(); ++d) s += (d ? "," : "") + std::to_string(idx[d]);
        out.push_back(s + "]");
        for (std::size_t d = idx.size(); d-- > 0;) {
          if (++idx[d] < b.shape[d]) break;
          idx[d] = 0;
        }
      }
    }
    return out;
  }

private:
  std::vector<Block> blocks_;
  std::size_t size_ = 0;
};

namespace detail {
inline std::vector<double>& beta_scratch() {
  static thread_local std::vector<double> v;
  return v;
}
inline std::vector<double>& beta_bar_scratch() {
  static thread_local std::vector<double> v;
  return v;
}
inline const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
inline double std_normal_lp(double x) { return -kLogSqrt2Pi - 0.5 * x * x; }
inline double normal_lp(double x, double sd) { return -kLogSqrt2Pi - std::log(sd) - 0.5 * (x / sd) * (x / sd); }
/// log N+(exp(x) | 0, scale) + x and its derivative in x.
inline std::pair<double, double> half_normal_on_log(double x, double scale) {
  const double v = std::exp(x);
  return {std::log(2.0) - kLogSqrt2Pi - std::log(scale) - v * v / (2.0 * scale * scale) + x, 1.0 - v * v / (scale * scale)};
}
}  // namespace detail

/// Static heterogeneity with optional dynamic population mean (logit, logit-info, offsets, offsets-info).
class StaticHeterogeneityModel final : public ChoiceModel {
public:
  StaticHeterogeneityModel(ModelKind kind, PanelPtr panel, PriorConfig priors = {})
      : ChoiceModel(std::move(panel)), kind_(kind), priors_(priors) {
    if (kind != ModelKind::logit && kind != ModelKind::logit_info && kind != ModelKind::offsets &&
        kind != ModelKind::offsets_info)
      throw InvalidArgument("StaticHeterogeneityModel: unsupported kind");
    correlated_ = kind == ModelKind::logit_info || kind == ModelKind::offsets_info;
    dynamic_ = kind == ModelKind::offsets || kind == ModelKind::offsets_info;
    const std::size_t I = this->panel().dims.I, K = this->panel().dims.K, T = this->panel().grid.size();
    mu_ = layout_.add("mu", {K});
    if (dynamic_) {
      log_amp_ = layout_.add("log_mean_amplitude", {1});
      log_rho_ = layout_.add("log_mean_length_scale", {1});
      innov_ = layout_.add("mean_innovation", {K, T});
    }
    log_sigma_ = layout_.add("log_sigma", {K});
    if (correlated_) corr_ = layout_.add("corr_free", {model::corr_free_size(K)});
    raw_ = layout_.add("raw", {I, K});
  }

  ModelKind kind() const override { return kind_; }
  std::size_t dimension() const override { return layout_.size(); }
  std::vector<std::string> parameter_names() const override { return layout_.names(); }
  const BlockLayout& layout() const noexcept { return layout_; }

  double log_density(std::span<const double> theta, std::span<double> gradient) const override {
    check_dimension(theta, gradient);
    return run(theta, gradient, nullptr, nullptr);
  }

  DensityParts parts(std::span<const double> theta) const override {
    check_dimension(theta, {});
    DensityParts p;
    run(theta, {}, &p, nullptr);
    return p;
  }

  SensitivityTable sensitivities(std::span<const double> theta) const override {
    check_dimension(theta, {});
    const std::size_t I = panel().dims.I, K = panel().dims.K, T = panel().grid.size();
    SensitivityTable table(I, T, K);
    run(theta, {}, nullptr, &table);
    return table;
  }

  SensitivityTable extrapolate(std::span<const double> theta, std::span<const double> new_times,
                               std::mt19937_64& rng) const override {
    const SensitivityTable on_grid = sensitivities(theta);
    const std::size_t I = panel().dims.I, K = panel().dims.K, T = panel().grid.size(), M = new_times.size();
    SensitivityTable out(I, M, K);
    // Static part (mu + deviation) read off t = 0 after removing the mean function there.
    Eigen::MatrixXd m_new = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(M));
    Eigen::MatrixXd m_old = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(T));
    if (dynamic_) {
      m_old = mean_functions(theta);
      const kernels::SEKernelParams gp{std::exp(theta[log_amp_]), std::exp(theta[log_rho_])};
      for (std::size_t k = 0; k < K; ++k) {
        const Eigen::VectorXd row = m_old.row(static_cast<Eigen::Index>(k)).transpose();
        const auto cond = eval::gp_extrapolate(panel().grid, std::span<const double>(row.data(), T), gp, new_times, &rng);
        m_new.row(static_cast<Eigen::Index>(k)) = cond.draw.transpose();
      }
    }
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        const double stat = on_grid(i, 0, k) - m_old(static_cast<Eigen::Index>(k), 0);
        for (std::size_t t = 0; t < M; ++t) out(i, t, k) = stat + m_new(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
      }
    return out;
  }

private:
  /// K x T mean functions m_k(t) = chol(K(a, r)) innovation_k.
  Eigen::MatrixXd mean_functions(std::span<const double> theta) const {
    const std::size_t K = panel().dims.K, T = panel().grid.size();
    const kernels::NonCenteredGp gp(panel().grid, {std::exp(theta[log_amp_]), std::exp(theta[log_rho_])});
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> z(
        theta.data() + innov_, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(T));
    return z * gp.lower().transpose();
  }

  double run(std::span<const double> theta, std::span<double> grad, DensityParts* parts, SensitivityTable* table) const {
    const auto& P = panel();
    const std::size_t I = P.dims.I, K = P.dims.K, T = P.grid.size();
    const bool want_grad = !grad.empty();
    double log_prior = 0.0, log_jac = 0.0;

    ad::Tape& tape = posterior::detail::tape();
    tape.clear();
    const auto hyper = posterior::ScaleCorrBlock::record(
        tape, theta.subspan(log_sigma_, K),
        correlated_ ? theta.subspan(corr_, model::corr_free_size(K)) : std::span<const double>{}, priors_, correlated_);
    log_prior += hyper.log_prior.value();
    log_jac += hyper.log_jacobian.value();
    const Eigen::MatrixXd& F = hyper.factor_value;

    for (std::size_t k = 0; k < K; ++k) log_prior += detail::normal_lp(theta[mu_ + k], priors_.alpha_sd);
    const double* raw = theta.data() + raw_;
    for (std::size_t n = 0; n < I * K; ++n) log_prior += detail::std_normal_lp(raw[n]);

    std::optional<kernels::NonCenteredGp> gp;
    Eigen::MatrixXd m;  // K x T
    if (dynamic_) {
      const double la = theta[log_amp_], lr = theta[log_rho_];
      const auto ap = detail::half_normal_on_log(la, priors_.tau_scale);
      log_prior += ap.first - la;
      log_jac += la;
      const auto rp = posterior::log_normal_on_log(lr, priors_.rho_median, priors_.rho_log_sd);
      log_prior += rp.log_prior;
      log_jac += rp.log_jacobian;
      for (std::size_t n = 0; n < K * T; ++n) log_prior += detail::std_normal_lp(theta[innov_ + n]);
      gp.emplace(P.grid, kernels::SEKernelParams{std::exp(la), std::exp(lr)});
      const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> z(
          theta.data() + innov_, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(T));
      m = z * gp->lower().transpose();
    }

    // static coefficients s_ik = mu_k + sum_j F_kj raw_ij
    std::vector<double> s(I * K);
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        double v = theta[mu_ + k];
        for (std::size_t j = 0; j <= k; ++j) v += F(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * raw[i * K + j];
        s[i * K + k] = v;
      }
    std::vector<double>& beta = detail::beta_scratch();
    beta.resize(I * T * K);
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < K; ++k)
          beta[(i * T + t) * K + k] = s[i * K + k] + (dynamic_ ? m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) : 0.0);
    if (table) {
      std::copy(beta.begin(), beta.end(), table->data().begin());
      return 0.0;
    }

    std::vector<double>& beta_bar = detail::beta_bar_scratch();
    if (want_grad) beta_bar.assign(I * T * K, 0.0);
    const double ll = choice::log_likelihood_dense(P, beta.data(), want_grad ? beta_bar.data() : nullptr);
    if (parts) *parts = DensityParts{ll, log_prior, log_jac};
    const double value = ll + log_prior + log_jac;
    if (!want_grad) return value;

    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<double> s_bar(I * K, 0.0);
    Eigen::MatrixXd m_bar = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(T));
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < K; ++k) {
          const double g = beta_bar[(i * T + t) * K + k];
          s_bar[i * K + k] += g;
          if (dynamic_) m_bar(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) += g;
        }
    for (std::size_t k = 0; k < K; ++k) grad[mu_ + k] = -theta[mu_ + k] / (priors_.alpha_sd * priors_.alpha_sd);
    Eigen::MatrixXd F_bar = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    for (std::size_t n = 0; n < I * K; ++n) grad[raw_ + n] = -raw[n];
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        const double g = s_bar[i * K + k];
        grad[mu_ + k] += g;
        for (std::size_t j = 0; j <= k; ++j) {
          grad[raw_ + i * K + j] += F(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * g;
          F_bar(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) += g * raw[i * K + j];
        }
      }
    if (dynamic_) {
      const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> z(
          theta.data() + innov_, static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(T));
      // m = z L^T  =>  z_bar = m_bar L,  L_bar = m_bar^T z
      const Eigen::MatrixXd z_bar = m_bar * gp->lower();
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t t = 0; t < T; ++t)
          grad[innov_ + k * T + t] = z_bar(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) -
                                     z(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
      const Eigen::MatrixXd l_bar = m_bar.transpose() * z;
      const auto [amp_bar, rho_bar] = gp->param_adjoint(l_bar);
      const double la = theta[log_amp_], lr = theta[log_rho_];
      grad[log_amp_] = amp_bar * std::exp(la) + detail::half_normal_on_log(la, priors_.tau_scale).second;
      grad[log_rho_] = rho_bar * std::exp(lr) + posterior::log_normal_on_log(lr, priors_.rho_median, priors_.rho_log_sd).grad;
    }
    static thread_local std::vector<double> corr_dummy;
    hyper.backward(tape, F_bar, grad.subspan(log_sigma_, K),
                   correlated_ ? grad.subspan(corr_, model::corr_free_size(K)) : std::span<double>(corr_dummy));
    return value;
  }

  ModelKind kind_;
  PriorConfig priors_;
  bool correlated_ = false, dynamic_ = false;
  BlockLayout layout_;
  std::size_t mu_ = 0, log_amp_ = 0, log_rho_ = 0, innov_ = 0, log_sigma_ = 0, corr_ = 0, raw_ = 0;
};

/// Independent per-(i, k) Gaussian processes around an ARMA(1,1) population mean.
class GpdhModel final : public ChoiceModel {
public:
  explicit GpdhModel(PanelPtr panel, PriorConfig priors = {}) : ChoiceModel(std::move(panel)), priors_(priors) {
    const std::size_t I = this->panel().dims.I, K = this->panel().dims.K, T = this->panel().grid.size();
    alpha0_ = layout_.add("arma_alpha0", {K});
    alpha1_ = layout_.add("arma_alpha1_free", {K});
    alpha2_ = layout_.add("arma_alpha2", {K});
    log_tau_ = layout_.add("arma_log_tau", {K});
    zeta_ = layout_.add("arma_zeta_raw", {K, T});
    log_amp_ = layout_.add("log_amplitude", {K});
    log_rho_ = layout_.add("log_length_scale", {K});
    innov_ = layout_.add("innovation", {I, K, T});
  }

  ModelKind kind() const override { return ModelKind::gpdh; }
  std::size_t dimension() const override { return layout_.size(); }
  std::vector<std::string> parameter_names() const override { return layout_.names(); }
  const BlockLayout& layout() const noexcept { return layout_; }
  std::size_t alpha1_offset() const noexcept { return alpha1_; }
  std::size_t alpha0_offset() const noexcept { return alpha0_; }
  std::size_t alpha2_offset() const noexcept { return alpha2_; }
  std::size_t log_tau_offset() const noexcept { return log_tau_; }
  std::size_t zeta_offset() const noexcept { return zeta_; }

  double log_density(std::span<const double> theta, std::span<double> gradient) const override {
    check_dimension(theta, gradient);
    return run(theta, gradient, nullptr, nullptr);
  }

  DensityParts parts(std::span<const double> theta) const override {
    check_dimension(theta, {});
    DensityParts p;
    run(theta, {}, &p, nullptr);
    return p;
  }

  SensitivityTable sensitivities(std::span<const double> theta) const override {
    check_dimension(theta, {});
    SensitivityTable table(panel().dims.I, panel().grid.size(), panel().dims.K);
    run(theta, {}, nullptr, &table);
    return table;
  }

  /// ARMA means continued past the grid with fresh innovations, individual
  /// deviations conditioned through their own GPs.
  SensitivityTable extrapolate(std::span<const double> theta, std::span<const double> new_times,
                               std::mt19937_64& rng) const override {
    check_dimension(theta, {});
    const auto& P = panel();
    const std::size_t I = P.dims.I, K = P.dims.K, T = P.grid.size(), M = new_times.size();
    const Eigen::MatrixXd mu = arma_means(theta);  // K x T
    const SensitivityTable on_grid = sensitivities(theta);
    const double last = P.grid[T - 1];
    std::size_t ahead = 0;
    for (double t : new_times)
      if (t > last) ahead = std::max(ahead, static_cast<std::size_t>(std::ceil(t - last - 1e-9)));
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::MatrixXd mu_new(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(M));
    for (std::size_t k = 0; k < K; ++k) {
      const double a0 = theta[alpha0_ + k], a1 = std::tanh(theta[alpha1_ + k]), a2 = theta[alpha2_ + k];
      const double tau = std::exp(theta[log_tau_ + k]);
      std::vector<double> path(ahead + 1);
      path[0] = mu(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(T - 1));
      double prev_zeta = tau * theta[zeta_ + k * T + (T - 1)];
      for (std::size_t s = 1; s <= ahead; ++s) {
        const double zeta = tau * nd(rng);
        path[s] = a0 + a1 * path[s - 1] + a2 * prev_zeta + zeta;
        prev_zeta = zeta;
      }
      for (std::size_t m = 0; m < M; ++m) {
        const double t = new_times[m];
        if (t > last) {
          mu_new(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) =
              path[static_cast<std::size_t>(std::ceil(t - last - 1e-9))];
        } else {
          std::size_t idx = 0;
          for (std::size_t g = 0; g < T; ++g)
            if (std::abs(P.grid[g] - t) < std::abs(P.grid[idx] - t)) idx = g;
          mu_new(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) = mu(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(idx));
        }
      }
    }
    SensitivityTable out(I, M, K);
    std::vector<double> dev(T);
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t t = 0; t < T; ++t) dev[t] = on_grid(i, t, k) - mu(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t));
        const kernels::SEKernelParams gp{std::exp(theta[log_amp_ + k]), std::exp(theta[log_rho_ + k])};
        const auto cond = eval::gp_extrapolate(P.grid, dev, gp, new_times, &rng);
        for (std::size_t m = 0; m < M; ++m)
          out(i, m, k) = mu_new(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) + cond.draw(static_cast<Eigen::Index>(m));
      }
    return out;
  }

  /// K x T population means implied by theta.
  Eigen::MatrixXd arma_means(std::span<const double> theta) const {
    const std::size_t K = panel().dims.K, T = panel().grid.size();
    Eigen::MatrixXd mu(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(T));
    for (std::size_t k = 0; k < K; ++k) {
      const double tau = std::exp(theta[log_tau_ + k]);
      std::vector<double> zeta(T);
      for (std::size_t t = 0; t < T; ++t) zeta[t] = tau * theta[zeta_ + k * T + t];
      const auto m = arma_recursion<double>(theta[alpha0_ + k], std::tanh(theta[alpha1_ + k]), theta[alpha2_ + k], zeta, T);
      for (std::size_t t = 0; t < T; ++t) mu(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = m[t];
    }
    return mu;
  }

private:
  double run(std::span<const double> theta, std::span<double> grad, DensityParts* parts, SensitivityTable* table) const {
    const auto& P = panel();
    const std::size_t I = P.dims.I, K = P.dims.K, T = P.grid.size();
    const bool want_grad = !grad.empty();
    double log_prior = 0.0, log_jac = 0.0;

    // ARMA block on the tape
    ad::Tape& tape = posterior::detail::tape();
    tape.clear();
    std::vector<ad::Var> a0(K), a1u(K), a2(K), lt(K), zr(K * T);
    std::vector<std::vector<ad::Var>> mu(K);
    ad::Var arma_lp(0.0), arma_lj(0.0);
    for (std::size_t k = 0; k < K; ++k) {
      a0[k] = tape.variable(theta[alpha0_ + k]);
      a1u[k] = tape.variable(theta[alpha1_ + k]);
      a2[k] = tape.variable(theta[alpha2_ + k]);
      lt[k] = tape.variable(theta[log_tau_ + k]);
      const ad::Var a1 = ad::tanh(a1u[k]);
      const ad::Var tau = ad::exp(lt[k]);
      arma_lp = arma_lp - a0[k] * a0[k] * (0.5 / (priors_.alpha_sd * priors_.alpha_sd)) +
                (-detail::kLogSqrt2Pi - std::log(priors_.alpha_sd));
      arma_lp = arma_lp + std::log(0.5);  // alpha1 ~ uniform(-1, 1)
      arma_lj = arma_lj + ad::log1p(-(a1 * a1));
      arma_lp = arma_lp + detail::std_normal_lp(0.0) - a2[k] * a2[k] * 0.5;
      arma_lp = arma_lp + posterior::detail::half_normal_lp(tau, priors_.tau_scale);
      arma_lj = arma_lj + lt[k];
      std::vector<ad::Var> zeta(T);
      for (std::size_t t = 0; t < T; ++t) {
        zr[k * T + t] = tape.variable(theta[zeta_ + k * T + t]);
        zeta[t] = tau * zr[k * T + t];
        log_prior += detail::std_normal_lp(theta[zeta_ + k * T + t]);
      }
      mu[k] = arma_recursion<ad::Var>(a0[k], a1, a2[k], zeta, T);
    }
    log_prior += arma_lp.value();
    log_jac += arma_lj.value();

    // per-k GPs over individual deviations
    std::vector<kernels::NonCenteredGp> gps;
    gps.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
      const double la = theta[log_amp_ + k], lr = theta[log_rho_ + k];
      const auto ap = detail::half_normal_on_log(la, priors_.tau_scale);
      log_prior += ap.first - la;
      log_jac += la;
      const auto rp = posterior::log_normal_on_log(lr, priors_.rho_median, priors_.rho_log_sd);
      log_prior += rp.log_prior;
      log_jac += rp.log_jacobian;
      gps.emplace_back(P.grid, kernels::SEKernelParams{std::exp(la), std::exp(lr)});
    }
    const double* innov = theta.data() + innov_;
    for (std::size_t n = 0; n < I * K * T; ++n) log_prior += detail::std_normal_lp(innov[n]);

    std::vector<double>& beta = detail::beta_scratch();
    beta.resize(I * T * K);
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        const Eigen::MatrixXd& Lk = gps[k].lower();
        const double* z = innov + (i * K + k) * T;
        for (std::size_t t = 0; t < T; ++t) {
          double v = mu[k][t].value();
          for (std::size_t s = 0; s <= t; ++s) v += Lk(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) * z[s];
          beta[(i * T + t) * K + k] = v;
        }
      }
    if (table) {
      std::copy(beta.begin(), beta.end(), table->data().begin());
      return 0.0;
    }

    std::vector<double>& beta_bar = detail::beta_bar_scratch();
    if (want_grad) beta_bar.assign(I * T * K, 0.0);
    const double ll = choice::log_likelihood_dense(P, beta.data(), want_grad ? beta_bar.data() : nullptr);
    if (parts) *parts = DensityParts{ll, log_prior, log_jac};
    const double value = ll + log_prior + log_jac;
    if (!want_grad) return value;

    std::fill(grad.begin(), grad.end(), 0.0);
    std::vector<Eigen::MatrixXd> l_bar(K, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(T)));
    Eigen::MatrixXd mu_bar = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(T));
    Eigen::VectorXd bb(static_cast<Eigen::Index>(T));
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t t = 0; t < T; ++t) bb(static_cast<Eigen::Index>(t)) = beta_bar[(i * T + t) * K + k];
        mu_bar.row(static_cast<Eigen::Index>(k)) += bb.transpose();
        const Eigen::Map<const Eigen::VectorXd> z(innov + (i * K + k) * T, static_cast<Eigen::Index>(T));
        const Eigen::VectorXd zb = gps[k].lower().transpose() * bb;
        for (std::size_t t = 0; t < T; ++t)
          grad[innov_ + (i * K + k) * T + t] = zb(static_cast<Eigen::Index>(t)) - z(static_cast<Eigen::Index>(t));
        l_bar[k].noalias() += bb * z.transpose();
      }
    for (std::size_t k = 0; k < K; ++k) {
      const auto [amp_bar, rho_bar] = gps[k].param_adjoint(l_bar[k]);
      const double la = theta[log_amp_ + k], lr = theta[log_rho_ + k];
      grad[log_amp_ + k] = amp_bar * std::exp(la) + detail::half_normal_on_log(la, priors_.tau_scale).second;
      grad[log_rho_ + k] = rho_bar * std::exp(lr) + posterior::log_normal_on_log(lr, priors_.rho_median, priors_.rho_log_sd).grad;
    }
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t t = 0; t < T; ++t) tape.seed(mu[k][t], mu_bar(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)));
    tape.seed(arma_lp, 1.0);
    tape.seed(arma_lj, 1.0);
    tape.backward();
    for (std::size_t k = 0; k < K; ++k) {
      grad[alpha0_ + k] = tape.adjoint(a0[k]);
      grad[alpha1_ + k] = tape.adjoint(a1u[k]);
      grad[alpha2_ + k] = tape.adjoint(a2[k]);
      grad[log_tau_ + k] = tape.adjoint(lt[k]);
      for (std::size_t t = 0; t < T; ++t) grad[zeta_ + k * T + t] = tape.adjoint(zr[k * T + t]) - theta[zeta_ + k * T + t];
    }
    return value;
  }

  PriorConfig priors_;
  BlockLayout layout_;
  std::size_t alpha0_ = 0, alpha1_ = 0, alpha2_ = 0, log_tau_ = 0, zeta_ = 0, log_amp_ = 0, log_rho_ = 0, innov_ = 0;
};

/// Any supported model over a training panel. `factors` only matters for the dynamic-heterogeneity model.
inline std::unique_ptr<ChoiceModel> make_model(ModelKind kind, PanelPtr panel, std::size_t factors,
                                               const PriorConfig& priors = {}) {
  switch (kind) {
    case ModelKind::mcdh: return std::make_unique<posterior::McdhPosterior>(std::move(panel), factors, priors);
    case ModelKind::gpdh: return std::make_unique<GpdhModel>(std::move(panel), priors);
    default: return std::make_unique<StaticHeterogeneityModel>(kind, std::move(panel), priors);
  }
}

}  // namespace mcdh::bench

#endif  // MCDH_BENCHMARKS_HPP
