#ifndef MCDH_SAMPLER_HPP
#define MCDH_SAMPLER_HPP

// Multinomial No-U-Turn sampler with a diagonal Euclidean metric, dual
// averaging step-size adaptation and windowed variance adaptation.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mcdh/errors.hpp"
#include "mcdh/model.hpp"

namespace mcdh::sampler {

/// log density with gradient written into the second argument (when nonempty).
using Density = std::function<double(std::span<const double>, std::span<double>)>;

struct Target {
  std::size_t dimension = 0;
  Density log_density;
  std::vector<std::string> names;
};

inline Target target_of(const ChoiceModel& m) {
  return {m.dimension(), [&m](std::span<const double> q, std::span<double> g) { return m.log_density(q, g); },
          m.parameter_names()};
}

struct SamplerConfig {
  std::size_t chains = 4;
  std::size_t warmup = 1000;
  std::size_t samples = 1000;
  double target_accept = 0.8;
  std::size_t max_tree_depth = 10;
  std::uint64_t seed = 0;
  double init_radius = 1.0;  // inits ~ uniform(-r, r) on the unconstrained scale
  double initial_step_size = 1.0;
  double max_delta_h = 1000.0;

  void validate() const {
    if (chains < 1) throw InvalidArgument("sampler: chains must be >= 1");
    if (warmup < 1 || samples < 1) throw InvalidArgument("sampler: warmup and samples must be >= 1");
    if (!(target_accept > 0.5 && target_accept <= 0.99))
      throw InvalidArgument("sampler: target_accept must lie in (0.5, 0.99]");
    if (max_tree_depth < 1) throw InvalidArgument("sampler: max_tree_depth must be >= 1");
    if (!(init_radius >= 0.0) || !(initial_step_size > 0.0))
      throw InvalidArgument("sampler: init_radius must be >= 0 and initial_step_size > 0");
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t chain_seed(std::uint64_t seed, std::size_t chain) {
  return splitmix64(splitmix64(seed) ^ (0xd1b54a32d192ed03ULL * (chain + 1)));
}

struct PhasePoint {
  std::vector<double> q, p, grad;
  double log_density = 0.0;
};

/// One leapfrog step with inverse metric `inv_metric`. Returns false if the
/// density was non-finite or threw at the new position.
inline bool leapfrog(PhasePoint& z, double eps, std::span<const double> inv_metric, const Density& f) {
  const std::size_t n = z.q.size();
  for (std::size_t i = 0; i < n; ++i) z.p[i] += 0.5 * eps * z.grad[i];
  for (std::size_t i = 0; i < n; ++i) z.q[i] += eps * inv_metric[i] * z.p[i];
  bool ok = true;
  try {
    z.log_density = f(z.q, z.grad);
  } catch (const NumericalInstability&) {
    ok = false;
  } catch (const InvalidArgument&) {
    ok = false;
  }
  if (!ok || !std::isfinite(z.log_density)) {
    z.log_density = -std::numeric_limits<double>::infinity();
    return false;
  }
  for (std::size_t i = 0; i < n; ++i) z.p[i] += 0.5 * eps * z.grad[i];
  return true;
}

inline double kinetic(std::span<const double> p, std::span<const double> inv_metric) {
  double k = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) k += inv_metric[i] * p[i] * p[i];
  return 0.5 * k;
}

inline double hamiltonian(const PhasePoint& z, std::span<const double> inv_metric) {
  return -z.log_density + kinetic(z.p, inv_metric);
}

struct TransitionStats {
  double accept_stat = 0.0;
  bool divergent = false;
  std::size_t tree_depth = 0;
  std::size_t n_leapfrog = 0;
  double energy = 0.0;
};

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

class Nuts {
public:
  Nuts(const Target& target, std::size_t max_depth, double max_delta_h)
      : f_(target.log_density), n_(target.dimension), max_depth_(max_depth), max_delta_h_(max_delta_h),
        inv_metric_(target.dimension, 1.0) {}

  double step_size = 1.0;

  std::vector<double>& inv_metric() noexcept { return inv_metric_; }
  const std::vector<double>& inv_metric() const noexcept { return inv_metric_; }
  void set_max_depth(std::size_t d) noexcept { max_depth_ = d; }

  /// Evaluates the density at q and stores it as the current point.
  void seed(std::span<const double> q) {
    z_.q.assign(q.begin(), q.end());
    z_.p.assign(n_, 0.0);
    z_.grad.assign(n_, 0.0);
    z_.log_density = f_(z_.q, z_.grad);
    if (!std::isfinite(z_.log_density)) throw NumericalInstability("NUTS: non-finite log density at the initial point");
  }

  const PhasePoint& current() const noexcept { return z_; }

  TransitionStats transition(std::mt19937_64& rng) {
    sample_momentum(rng);
    const double h0 = hamiltonian(z_, inv_metric_);
    PhasePoint z_fwd = z_, z_bck = z_, z_sample = z_, z_propose = z_;
    std::vector<double> p_sharp = sharp(z_.p);
    std::vector<double> p_fwd_fwd = z_.p, p_sharp_fwd_fwd = p_sharp, p_fwd_bck = z_.p, p_sharp_fwd_bck = p_sharp;
    std::vector<double> p_bck_fwd = z_.p, p_sharp_bck_fwd = p_sharp, p_bck_bck = z_.p, p_sharp_bck_bck = p_sharp;
    std::vector<double> rho = z_.p;
    double log_sum_weight = 0.0;
    std::size_t n_leapfrog = 0, depth = 0;
    double sum_metro = 0.0;
    divergent_ = false;
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    while (depth < max_depth_) {
      std::vector<double> rho_fwd(n_, 0.0), rho_bck(n_, 0.0);
      double lsw_subtree = -std::numeric_limits<double>::infinity();
      bool valid;
      if (unif(rng) > 0.5) {
        z_ = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, h0, 1.0,
                           n_leapfrog, lsw_subtree, sum_metro, rng);
        z_fwd = z_;
      } else {
        z_ = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, h0, -1.0,
                           n_leapfrog, lsw_subtree, sum_metro, rng);
        z_bck = z_;
      }
      if (!valid) break;
      ++depth;
      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (unif(rng) < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
      for (std::size_t i = 0; i < n_; ++i) rho[i] = rho_bck[i] + rho_fwd[i];
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      std::vector<double> ext(n_);
      for (std::size_t i = 0; i < n_; ++i) ext[i] = rho_bck[i] + p_fwd_bck[i];
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, ext);
      for (std::size_t i = 0; i < n_; ++i) ext[i] = rho_fwd[i] + p_bck_fwd[i];
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, ext);
      if (!persist) break;
    }
    z_ = z_sample;
    TransitionStats s;
    s.n_leapfrog = n_leapfrog;
    s.accept_stat = n_leapfrog > 0 ? sum_metro / static_cast<double>(n_leapfrog) : 0.0;
    s.divergent = divergent_;
    s.tree_depth = depth;
    s.energy = hamiltonian(z_, inv_metric_);
    return s;
  }

  /// Doubles or halves the step size until a single leapfrog step crosses acceptance 0.8.
  void init_step_size(std::mt19937_64& rng) {
    const PhasePoint z0 = z_;
    auto delta = [&]() {
      z_ = z0;
      sample_momentum(rng);
      const double h0 = hamiltonian(z_, inv_metric_);
      const bool ok = leapfrog(z_, step_size, inv_metric_, f_);
      const double h = ok ? hamiltonian(z_, inv_metric_) : std::numeric_limits<double>::infinity();
      return h0 - (std::isnan(h) ? std::numeric_limits<double>::infinity() : h);
    };
    const double thr = std::log(0.8);
    const int direction = delta() > thr ? 1 : -1;
    for (int iter = 0; iter < 200; ++iter) {
      const double d = delta();
      if (direction == 1 && !(d > thr)) break;
      if (direction == -1 && !(d < thr)) break;
      step_size = direction == 1 ? 2.0 * step_size : 0.5 * step_size;
      if (step_size > 1e7) throw NumericalInstability("NUTS: step size diverged to infinity during initialization");
      if (step_size < 1e-300) throw NumericalInstability("NUTS: step size collapsed to zero during initialization");
    }
    z_ = z0;
  }

private:
  void sample_momentum(std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t i = 0; i < n_; ++i) z_.p[i] = nd(rng) / std::sqrt(inv_metric_[i]);
  }

  std::vector<double> sharp(const std::vector<double>& p) const {
    std::vector<double> s(n_);
    for (std::size_t i = 0; i < n_; ++i) s[i] = inv_metric_[i] * p[i];
    return s;
  }

  static bool criterion(const std::vector<double>& p_sharp_minus, const std::vector<double>& p_sharp_plus,
                        const std::vector<double>& rho) {
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) {
      a += p_sharp_plus[i] * rho[i];
      b += p_sharp_minus[i] * rho[i];
    }
    return a > 0.0 && b > 0.0;
  }

  bool build_tree(std::size_t depth, PhasePoint& z_propose, std::vector<double>& p_sharp_beg,
                  std::vector<double>& p_sharp_end, std::vector<double>& rho, std::vector<double>& p_beg,
                  std::vector<double>& p_end, double h0, double sign, std::size_t& n_leapfrog,
                  double& log_sum_weight, double& sum_metro, std::mt19937_64& rng) {
    if (depth == 0) {
      const bool ok = leapfrog(z_, sign * step_size, inv_metric_, f_);
      ++n_leapfrog;
      double h = ok ? hamiltonian(z_, inv_metric_) : std::numeric_limits<double>::infinity();
      if (std::isnan(h)) h = std::numeric_limits<double>::infinity();
      if (h - h0 > max_delta_h_) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z_;
      p_sharp_beg = sharp(z_.p);
      p_sharp_end = p_sharp_beg;
      for (std::size_t i = 0; i < n_; ++i) rho[i] += z_.p[i];
      p_beg = z_.p;
      p_end = p_beg;
      return !divergent_;
    }

    double lsw_init = -std::numeric_limits<double>::infinity();
    std::vector<double> p_init_end(n_), p_sharp_init_end(n_), rho_init(n_, 0.0);
    if (!build_tree(depth - 1, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0, sign,
                    n_leapfrog, lsw_init, sum_metro, rng))
      return false;

    PhasePoint z_propose_final = z_;
    double lsw_final = -std::numeric_limits<double>::infinity();
    std::vector<double> p_final_beg(n_), p_sharp_final_beg(n_), rho_final(n_, 0.0);
    if (!build_tree(depth - 1, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, h0,
                    sign, n_leapfrog, lsw_final, sum_metro, rng))
      return false;

    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else if (unif(rng) < std::exp(lsw_final - lsw_subtree)) {
      z_propose = z_propose_final;
    }

    std::vector<double> rho_subtree(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      rho_subtree[i] = rho_init[i] + rho_final[i];
      rho[i] += rho_subtree[i];
    }
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    std::vector<double> ext(n_);
    for (std::size_t i = 0; i < n_; ++i) ext[i] = rho_init[i] + p_final_beg[i];
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, ext);
    for (std::size_t i = 0; i < n_; ++i) ext[i] = rho_final[i] + p_init_end[i];
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, ext);
    return persist;
  }

  Density f_;
  std::size_t n_;
  std::size_t max_depth_;
  double max_delta_h_;
  std::vector<double> inv_metric_;
  PhasePoint z_;
  bool divergent_ = false;
};

/// Nesterov dual averaging on log step size.
class StepSizeAdaptation {
public:
  double gamma = 0.05, t0 = 10.0, kappa = 0.75;

  explicit StepSizeAdaptation(double delta) : delta_(delta) {}
  void set_mu(double mu) noexcept { mu_ = mu; }
  void restart() noexcept {
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }
  /// Returns the step size for the next iteration.
  double learn(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double c = static_cast<double>(counter_);
    const double eta = 1.0 / (c + t0);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(c) / gamma;
    const double x_eta = std::pow(c, -kappa);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step_size() const noexcept { return std::exp(x_bar_); }

private:
  double delta_;
  double mu_ = std::log(10.0);
  std::size_t counter_ = 0;
  double s_bar_ = 0.0, x_bar_ = 0.0;
};

/// Welford running variance.
class WelfordVariance {
public:
  explicit WelfordVariance(std::size_t n = 0) : mean_(n, 0.0), m2_(n, 0.0) {}
  void restart() {
    count_ = 0;
    std::fill(mean_.begin(), mean_.end(), 0.0);
    std::fill(m2_.begin(), m2_.end(), 0.0);
  }
  void add(std::span<const double> x) {
    ++count_;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mean_[i];
      mean_[i] += d / static_cast<double>(count_);
      m2_[i] += d * (x[i] - mean_[i]);
    }
  }
  std::size_t count() const noexcept { return count_; }
  std::vector<double> variance() const {
    std::vector<double> v(mean_.size(), 0.0);
    if (count_ > 1)
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = m2_[i] / static_cast<double>(count_ - 1);
    return v;
  }

private:
  std::size_t count_ = 0;
  std::vector<double> mean_, m2_;
};

/// Expanding windows: an initial fast buffer, doubling slow windows, a terminal fast buffer.
class WindowedAdaptation {
public:
  WindowedAdaptation(std::size_t num_warmup, std::size_t dim, std::size_t init_buffer = 75,
                     std::size_t term_buffer = 50, std::size_t base_window = 25)
      : num_warmup_(num_warmup), estimator_(dim) {
    if (num_warmup < 20) {
      enabled_ = false;
      return;
    }
    if (init_buffer + base_window + term_buffer > num_warmup) {
      init_buffer = static_cast<std::size_t>(0.15 * static_cast<double>(num_warmup));
      term_buffer = static_cast<std::size_t>(0.1 * static_cast<double>(num_warmup));
      base_window = num_warmup - (init_buffer + term_buffer);
    }
    init_buffer_ = init_buffer;
    term_buffer_ = term_buffer;
    window_size_ = base_window;
    next_window_ = init_buffer + base_window - 1;
  }

  bool enabled() const noexcept { return enabled_; }

  /// Feeds one warmup draw; returns true when `inv_metric` was updated.
  bool learn(std::vector<double>& inv_metric, std::span<const double> q) {
    if (!enabled_) return false;
    if (in_window()) estimator_.add(q);
    if (end_of_window()) {
      compute_next_window();
      const auto var = estimator_.variance();
      const double n = static_cast<double>(estimator_.count());
      for (std::size_t i = 0; i < inv_metric.size(); ++i)
        inv_metric[i] = (n / (n + 5.0)) * var[i] + 1e-3 * (5.0 / (n + 5.0));
      estimator_.restart();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

private:
  bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < num_warmup_ - term_buffer_ && counter_ != num_warmup_;
  }
  bool end_of_window() const { return counter_ == next_window_ && counter_ != num_warmup_; }
  void compute_next_window() {
    if (next_window_ == num_warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != num_warmup_ - term_buffer_ - 1) {
      const std::size_t boundary = next_window_ + 2 * window_size_;
      if (boundary >= num_warmup_ - term_buffer_) next_window_ = num_warmup_ - term_buffer_ - 1;
    }
  }

  std::size_t num_warmup_;
  bool enabled_ = true;
  std::size_t init_buffer_ = 0, term_buffer_ = 0, window_size_ = 0, next_window_ = 0, counter_ = 0;
  WelfordVariance estimator_;
};

/// Post-warmup draws of one chain; `values` is samples x dimension, row-major.
struct ChainDraws {
  std::vector<double> values;
  std::vector<double> accept_stat;
  std::vector<unsigned char> divergent;
  std::vector<std::size_t> tree_depth;
  std::vector<std::size_t> n_leapfrog;
  std::vector<double> energy;
  double step_size = 0.0;
  std::vector<double> inv_metric;
  std::size_t warmup_divergences = 0;

  bool operator==(const ChainDraws&) const = default;
};

struct PosteriorDraws {
  std::vector<std::string> names;
  std::size_t dimension = 0;
  std::size_t samples = 0;  // per chain
  std::vector<ChainDraws> chains;

  std::span<const double> draw(std::size_t chain, std::size_t s) const {
    return std::span<const double>(chains[chain].values).subspan(s * dimension, dimension);
  }
  /// Draws of parameter `j`, chain-major.
  std::vector<std::vector<double>> column(std::size_t j) const {
    std::vector<std::vector<double>> out(chains.size());
    for (std::size_t c = 0; c < chains.size(); ++c) {
      out[c].resize(samples);
      for (std::size_t s = 0; s < samples; ++s) out[c][s] = chains[c].values[s * dimension + j];
    }
    return out;
  }
  std::size_t total_draws() const noexcept { return chains.size() * samples; }
  std::size_t divergences() const {
    std::size_t n = 0;
    for (const auto& c : chains)
      for (unsigned char d : c.divergent) n += d;
    return n;
  }

  bool operator==(const PosteriorDraws&) const = default;
};

inline std::vector<double> random_init(const Target& target, double radius, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-radius, radius);
  std::vector<double> grad(target.dimension);
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<double> q(target.dimension);
    for (double& x : q) x = radius > 0.0 ? u(rng) : 0.0;
    try {
      const double lp = target.log_density(q, grad);
      bool finite = std::isfinite(lp);
      for (double g : grad) finite = finite && std::isfinite(g);
      if (finite) return q;
    } catch (const NumericalInstability&) {
    } catch (const InvalidArgument&) {
    }
    if (radius == 0.0) break;
  }
  throw NumericalInstability("sampler: no finite initial point found after 100 attempts");
}

/// Warmup + sampling for one chain. `init` overrides the random initial point when nonempty.
inline ChainDraws run_chain(const Target& target, const SamplerConfig& cfg, std::uint64_t seed,
                            std::span<const double> init = {}) {
  std::mt19937_64 rng(seed);
  std::vector<double> q0 = init.empty() ? random_init(target, cfg.init_radius, rng)
                                        : std::vector<double>(init.begin(), init.end());
  Nuts nuts(target, cfg.max_tree_depth, cfg.max_delta_h);
  nuts.seed(q0);
  nuts.step_size = cfg.initial_step_size;
  nuts.init_step_size(rng);

  StepSizeAdaptation ss(cfg.target_accept);
  ss.set_mu(std::log(10.0 * nuts.step_size));
  ss.restart();
  WindowedAdaptation windows(cfg.warmup, target.dimension);

  ChainDraws out;
  for (std::size_t it = 0; it < cfg.warmup; ++it) {
    const auto s = nuts.transition(rng);
    out.warmup_divergences += s.divergent ? 1 : 0;
    nuts.step_size = ss.learn(s.accept_stat);
    if (windows.learn(nuts.inv_metric(), nuts.current().q)) {
      nuts.init_step_size(rng);
      ss.set_mu(std::log(10.0 * nuts.step_size));
      ss.restart();
    }
  }
  nuts.step_size = ss.final_step_size();

  const std::size_t n = target.dimension;
  out.values.resize(cfg.samples * n);
  out.accept_stat.resize(cfg.samples);
  out.divergent.resize(cfg.samples);
  out.tree_depth.resize(cfg.samples);
  out.n_leapfrog.resize(cfg.samples);
  out.energy.resize(cfg.samples);
  for (std::size_t s = 0; s < cfg.samples; ++s) {
    const auto st = nuts.transition(rng);
    std::copy(nuts.current().q.begin(), nuts.current().q.end(), out.values.begin() + static_cast<std::ptrdiff_t>(s * n));
    out.accept_stat[s] = st.accept_stat;
    out.divergent[s] = st.divergent ? 1 : 0;
    out.tree_depth[s] = st.tree_depth;
    out.n_leapfrog[s] = st.n_leapfrog;
    out.energy[s] = st.energy;
  }
  out.step_size = nuts.step_size;
  out.inv_metric = nuts.inv_metric();
  return out;
}

/// Runs every chain; chain c always uses chain_seed(cfg.seed, c), so results
/// do not depend on `workers`. `inits` (if nonempty) gives one start per chain.
inline PosteriorDraws run_chains(const Target& target, const SamplerConfig& cfg, std::size_t workers = 1,
                                 const std::vector<std::vector<double>>& inits = {}) {
  cfg.validate();
  if (!inits.empty() && inits.size() != cfg.chains)
    throw InvalidArgument("run_chains: need one initial point per chain");
  for (const auto& v : inits)
    if (v.size() != target.dimension) throw InvalidArgument("run_chains: initial point has the wrong length");
  PosteriorDraws draws;
  draws.names = target.names;
  if (draws.names.empty())
    for (std::size_t j = 0; j < target.dimension; ++j) draws.names.push_back("theta[" + std::to_string(j) + "]");
  draws.dimension = target.dimension;
  draws.samples = cfg.samples;
  draws.chains.resize(cfg.chains);

  workers = std::clamp<std::size_t>(workers, 1, cfg.chains);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (std::size_t c = next++; c < cfg.chains; c = next++) {
      try {
        std::span<const double> init;
        if (!inits.empty()) init = inits[c];
        draws.chains[c] = run_chain(target, cfg, chain_seed(cfg.seed, c), init);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return draws;
}

}  // namespace mcdh::sampler

#endif  // MCDH_SAMPLER_HPP
