#ifndef MCDH_MODEL_HPP
#define MCDH_MODEL_HPP

// Interface shared by the dynamic-heterogeneity model and the benchmarks:
// an unconstrained log density with exact gradient plus the maps from a
// parameter vector to sensitivity paths on and beyond the training grid.

#include <cstddef>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mcdh/choice.hpp"
#include "mcdh/errors.hpp"
#include "mcdh/model_core.hpp"

namespace mcdh {

enum class ModelKind { mcdh, logit, logit_info, offsets, offsets_info, gpdh };

inline std::string_view model_name(ModelKind k) {
  switch (k) {
    case ModelKind::mcdh: return "mcdh";
    case ModelKind::logit: return "logit";
    case ModelKind::logit_info: return "logit-info";
    case ModelKind::offsets: return "offsets";
    case ModelKind::offsets_info: return "offsets-info";
    case ModelKind::gpdh: return "gpdh";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "mcdh") return ModelKind::mcdh;
  if (s == "logit") return ModelKind::logit;
  if (s == "logit-info" || s == "logit_info") return ModelKind::logit_info;
  if (s == "offsets") return ModelKind::offsets;
  if (s == "offsets-info" || s == "offsets_info") return ModelKind::offsets_info;
  if (s == "gpdh") return ModelKind::gpdh;
  throw InvalidArgument("unknown model kind '" + std::string(s) + "'");
}

inline const std::vector<ModelKind>& all_model_kinds() {
  static const std::vector<ModelKind> kinds{ModelKind::logit, ModelKind::logit_info, ModelKind::offsets,
                                            ModelKind::offsets_info, ModelKind::gpdh, ModelKind::mcdh};
  return kinds;
}

struct LogDensityResult {
  double value = 0.0;
  std::vector<double> gradient;
};

/// Density split into likelihood, priors (on the constrained scale) and the
/// log-Jacobian of the unconstraining transforms.
struct DensityParts {
  double log_likelihood = 0.0;
  double log_prior = 0.0;
  double log_jacobian = 0.0;
  double total() const noexcept { return log_likelihood + log_prior + log_jacobian; }
};

using PanelPtr = std::shared_ptr<const choice::Panel>;

class ChoiceModel {
public:
  explicit ChoiceModel(PanelPtr panel) : panel_(std::move(panel)) {
    if (!panel_) throw InvalidArgument("ChoiceModel: null panel");
  }
  virtual ~ChoiceModel() = default;

  virtual ModelKind kind() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<std::string> parameter_names() const = 0;

  /// Unconstrained log density. When `gradient` is nonempty it is overwritten.
  virtual double log_density(std::span<const double> theta, std::span<double> gradient) const = 0;
  virtual DensityParts parts(std::span<const double> theta) const = 0;

  /// Sensitivities on the training grid.
  virtual model::SensitivityTable sensitivities(std::span<const double> theta) const = 0;
  /// One draw of the sensitivities at `new_times` conditional on theta.
  virtual model::SensitivityTable extrapolate(std::span<const double> theta, std::span<const double> new_times,
                                              std::mt19937_64& rng) const = 0;

  LogDensityResult evaluate(std::span<const double> theta) const {
    LogDensityResult r;
    r.gradient.assign(dimension(), 0.0);
    r.value = log_density(theta, r.gradient);
    return r;
  }

  double operator()(std::span<const double> theta, std::span<double> gradient) const {
    return log_density(theta, gradient);
  }

  const choice::Panel& panel() const noexcept { return *panel_; }
  const PanelPtr& panel_ptr() const noexcept { return panel_; }

protected:
  void check_dimension(std::span<const double> theta, std::span<double> gradient) const {
    if (theta.size() != dimension())
      throw InvalidArgument("log_density: parameter vector has length " + std::to_string(theta.size()) +
                            ", expected " + std::to_string(dimension()));
    if (!gradient.empty() && gradient.size() != dimension())
      throw InvalidArgument("log_density: gradient buffer has the wrong length");
  }

private:
  PanelPtr panel_;
};

}  // namespace mcdh

#endif  // MCDH_MODEL_HPP
