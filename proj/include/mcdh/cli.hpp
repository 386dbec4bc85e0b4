// Command-line surface. dispatch() is the whole program; tools/mcdh.cpp only forwards argv.
#ifndef MCDH_CLI_HPP
#define MCDH_CLI_HPP

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mcdh/benchmarks.hpp"
#include "mcdh/diagnostics.hpp"
#include "mcdh/errors.hpp"
#include "mcdh/evaluation.hpp"
#include "mcdh/io.hpp"
#include "mcdh/recovery.hpp"
#include "mcdh/sampler.hpp"
#include "mcdh/simulator.hpp"

namespace mcdh::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { ok = 0, other = 1, usage = 2, data = 3, numerical = 4, io_failure = 5 };

inline int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::usage:
    case ErrorCategory::invalid_argument: return usage;
    case ErrorCategory::schema:
    case ErrorCategory::version:
    case ErrorCategory::consistency:
    case ErrorCategory::unscoreable_individual: return data;
    case ErrorCategory::numerical_instability: return numerical;
    case ErrorCategory::io: return io_failure;
  }
  return other;
}

/// MCDH_WORKERS overrides the worker count (chains in fit, replications in recover/compare).
inline std::size_t workers_from_env() {
  const char* v = std::getenv("MCDH_WORKERS");
  if (!v || !*v) return 1;
  const auto n = io::parse_integer(v);
  if (!n || *n < 1) throw UsageError("MCDH_WORKERS must be a positive integer");
  return static_cast<std::size_t>(*n);
}

struct Options {
  std::optional<std::string> config, model, data, draws, run, preset, models;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> chains, warmup, samples, factors, holdout, seeds, max_tree_depth;
  std::string out;
  bool truth_init = false;
};

namespace detail {

inline json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

inline json to_json(const sim::SimConfig& c) {
  return {{"name", c.name}, {"I", c.I}, {"brands", c.brands}, {"T", c.T}, {"choices_per_period", c.choices_per_period},
          {"length_scales", c.length_scales}, {"omega_sd", c.omega_sd},
          {"omega_equicorrelation", c.omega_equicorrelation}, {"alpha", c.alpha}, {"price_mean", c.price_mean},
          {"price_sd", c.price_sd}, {"training_choices", c.training_choices}, {"holdout_buckets", c.holdout_buckets},
          {"seed", c.seed}};
}

inline json truth_json(const sim::SimOutput& s) {
  const auto& t = s.truth;
  const auto& d = s.panel.dims;
  json beta = json::array();
  for (std::size_t i = 0; i < d.I; ++i) {
    json per_t = json::array();
    for (std::size_t tt = 0; tt < s.panel.grid.size(); ++tt)
      per_t.push_back(std::vector<double>(t.beta.slice(i, tt, 0), t.beta.slice(i, tt, 0) + d.K));
    beta.push_back(std::move(per_t));
  }
  return {{"length_scales", t.factors.length_scales},
          {"factors", matrix_json(t.factors.realized)},
          {"innovations", matrix_json(t.factors.innovations)},
          {"alpha", t.alpha.alpha},
          {"omega", t.omega.data()},
          {"omega_layout", "i,k,l with l fastest"},
          {"sigma_omega", matrix_json(t.sigma_omega)},
          {"beta", beta},
          {"beta_layout", "beta[i][t][k]"}};
}

inline void require_out(const Options& o) {
  if (o.out.empty()) throw UsageError("--out <dir> is required");
}

inline io::RunConfig resolve_config(const Options& o) {
  io::RunConfig rc = o.config ? io::load_run_config(*o.config) : io::RunConfig{};
  if (o.model) rc.model = parse_model_kind(*o.model);
  if (o.seed) rc.seed = *o.seed;
  if (o.chains) rc.sampler.chains = *o.chains;
  if (o.warmup) rc.sampler.warmup = *o.warmup;
  if (o.samples) rc.sampler.samples = *o.samples;
  if (o.max_tree_depth) rc.sampler.max_tree_depth = *o.max_tree_depth;
  if (o.factors) rc.factors = *o.factors;
  if (o.holdout) rc.holdout_buckets = *o.holdout;
  if (o.data) rc.data = *o.data;
  rc.sampler.seed = rc.seed;
  return rc;
}

// Everything a fitted run needs to be re-evaluated: config, panel split and model.
struct FittedRun {
  fs::path dir;
  io::RunConfig config;
  io::IngestResult ingested;
  sim::PanelSplit split;
  std::unique_ptr<ChoiceModel> model;
  sampler::PosteriorDraws draws;
  fs::path draws_path;
};

inline io::IngestResult ingest_for(const io::RunConfig& rc) {
  io::IngestOptions opt = rc.ingest;
  opt.factors = rc.factors;
  opt.holdout_buckets = rc.holdout_buckets;
  return io::ingest(rc.data, opt);
}

inline FittedRun open_run(const Options& o) {
  if (!o.run) throw UsageError("--run <fit output dir> is required");
  FittedRun r;
  r.dir = *o.run;
  if (!fs::exists(r.dir / "run.json")) throw UsageError("'" + r.dir.string() + "' holds no run.json; run `fit` first");
  r.config = io::load_run_config(r.dir / "run.json");
  r.ingested = ingest_for(r.config);
  r.split = sim::split_holdout(r.ingested.panel, r.config.holdout_buckets);
  r.model = bench::make_model(r.config.model, std::make_shared<const choice::Panel>(r.split.train), r.config.factors,
                              r.config.priors);
  r.draws_path = o.draws ? fs::path(*o.draws) : r.dir / "draws.csv";
  auto loaded = io::load_draws(r.draws_path);
  if (!loaded.model.empty() && loaded.model != model_name(r.config.model))
    throw ConsistencyError("draws were produced by model '" + loaded.model + "', run.json says '" +
                           std::string(model_name(r.config.model)) + "'");
  r.draws = std::move(loaded.draws);
  if (r.draws.dimension != r.model->dimension())
    throw ConsistencyError("draws have dimension " + std::to_string(r.draws.dimension) + ", model expects " +
                           std::to_string(r.model->dimension()));
  return r;
}

inline fs::path out_dir(const Options& o, const FittedRun& r, std::string_view sub) {
  return o.out.empty() ? r.dir / std::string(sub) : fs::path(o.out);
}

inline std::vector<fs::path> run_inputs(const FittedRun& r) { return {r.config.data, r.dir / "run.json", r.draws_path}; }

inline std::string opt_str(const std::optional<double>& v) { return v ? io::format_double(*v) : ""; }

}  // namespace detail

// ---------------------------------------------------------------- subcommands

inline void cmd_simulate(const Options& o, std::ostream& out) {
  if (!o.preset) throw UsageError("simulate needs --preset");
  detail::require_out(o);
  const fs::path dir = o.out;
  const auto cfg = sim::preset(*o.preset, o.seed.value_or(1));
  const auto s = sim::simulate(cfg);
  io::write_panel(dir / "panel.csv", s.panel);
  io::write_json(dir / "truth.json", detail::truth_json(s));
  const json config = detail::to_json(cfg);
  io::write_json(dir / "simulation.json", config);
  io::write_json(dir / "manifest.json",
                 io::make_manifest("simulate", config, cfg.seed, dir, {"panel.csv", "truth.json", "simulation.json"}));
  out << "simulated " << s.panel.observations.size() << " occasions into " << dir.string() << "\n";
}

inline void cmd_fit(const Options& o, std::ostream& out) {
  const io::RunConfig rc = detail::resolve_config(o);
  if (rc.data.empty()) throw UsageError("fit needs a data path (--data or \"data\" in --config)");
  detail::require_out(o);
  const fs::path dir = o.out;
  const auto ing = detail::ingest_for(rc);
  const auto split = sim::split_holdout(ing.panel, rc.holdout_buckets);
  auto model = bench::make_model(rc.model, std::make_shared<const choice::Panel>(split.train), rc.factors, rc.priors);
  const auto draws = sampler::run_chains(sampler::target_of(*model), rc.sampler, workers_from_env());
  io::persist_draws(draws, dir / "draws.csv", model_name(rc.model));
  const json config = io::to_json(rc);
  io::write_json(dir / "run.json", config);
  io::write_json(dir / "ingest.json", io::to_json(ing.metadata));
  io::write_json(dir / "manifest.json", io::make_manifest("fit", config, rc.seed, dir, {"draws.csv", "run.json", "ingest.json"},
                                                          {fs::path(rc.data)}));
  for (const auto& w : ing.metadata.warnings) out << "warning: " << w << "\n";
  out << "fit " << model_name(rc.model) << ": " << draws.total_draws() << " draws, " << draws.divergences()
      << " divergences\n";
}

inline void cmd_forecast(const Options& o, std::ostream& out) {
  const auto r = detail::open_run(o);
  if (r.config.holdout_buckets == 0) throw UsageError("forecast needs a run fitted with --holdout-buckets > 0");
  const fs::path dir = detail::out_dir(o, r, "forecast");
  const auto rep = eval::forecast(*r.model, r.draws, r.split.holdout,
                                  {.seed = r.config.seed, .max_draws = r.config.forecast_max_draws});
  std::size_t J = 0;
  for (const auto& c : r.split.train.dims.categories) J = std::max(J, c.brands);
  std::string obs = "individual,category,time,actual,predicted";
  for (std::size_t j = 0; j < J; ++j) obs += ",p" + std::to_string(j);
  obs += "\n";
  for (const auto& f : rep.observations) {
    obs += std::to_string(f.individual) + "," + std::to_string(f.category) + "," + std::to_string(f.time) + "," +
           std::to_string(f.actual) + "," + std::to_string(f.predicted);
    for (std::size_t j = 0; j < J; ++j) obs += "," + (j < f.probabilities.size() ? io::format_double(f.probabilities[j]) : "");
    obs += "\n";
  }
  std::string cats = "category,observations,hit_rate,macro_precision,macro_recall,macro_specificity\n";
  json cj = json::array();
  for (const auto& c : rep.categories) {
    cats += std::to_string(c.category) + "," + std::to_string(c.observations) + "," + io::format_double(c.hit_rate) + "," +
            io::format_double(c.macro_precision) + "," + io::format_double(c.macro_recall) + "," +
            detail::opt_str(c.macro_specificity) + "\n";
    std::vector<std::vector<std::size_t>> conf(c.confusion.size(), std::vector<std::size_t>(c.confusion.size()));
    for (std::size_t a = 0; a < c.confusion.size(); ++a)
      for (std::size_t b = 0; b < c.confusion.size(); ++b) conf[a][b] = c.confusion(a, b);
    cj.push_back({{"category", c.category}, {"observations", c.observations}, {"hit_rate", c.hit_rate},
                  {"macro_precision", c.macro_precision}, {"macro_recall", c.macro_recall},
                  {"macro_specificity", c.macro_specificity ? json(*c.macro_specificity) : json()},
                  {"confusion", conf}});
  }
  std::string inds = "individual,observations,hit_rate\n";
  for (const auto& i : rep.individuals)
    inds += std::to_string(i.individual) + "," + std::to_string(i.observations) + "," + io::format_double(i.hit_rate) + "\n";
  io::write_text(dir / "forecast_observations.csv", obs);
  io::write_text(dir / "forecast_categories.csv", cats);
  io::write_text(dir / "forecast_individuals.csv", inds);
  io::write_json(dir / "forecast.json", {{"model", rep.model}, {"draws_used", rep.draws_used},
                                         {"overall_hit_rate", rep.overall_hit_rate}, {"categories", cj},
                                         {"prediction_rule", "argmax of draw-averaged probabilities, ties to lowest brand"}});
  io::write_json(dir / "manifest.json",
                 io::make_manifest("forecast", io::to_json(r.config), r.config.seed, dir,
                                   {"forecast_observations.csv", "forecast_categories.csv", "forecast_individuals.csv",
                                    "forecast.json"},
                                   detail::run_inputs(r)));
  out << "forecast " << rep.model << ": overall hit rate " << io::format_double(rep.overall_hit_rate) << "\n";
}

inline void cmd_elasticity(const Options& o, std::ostream& out) {
  const auto r = detail::open_run(o);
  const fs::path dir = detail::out_dir(o, r, "elasticity");
  eval::ElasticityOptions eo;
  eo.max_draws = r.config.forecast_max_draws;
  bool any_standardized = false;
  for (const auto& c : r.ingested.metadata.categories) any_standardized = any_standardized || c.price_standardized;
  if (any_standardized)
    for (const auto& c : r.ingested.metadata.categories)
      eo.price_scale.push_back(c.price_standardized ? eval::PriceScale{c.price_mean, c.price_sd} : eval::PriceScale{});
  const auto rep = eval::elasticities(*r.model, r.draws, eo);
  const std::string header = rep.rescaled ? "# price coefficients rescaled by the training price sd; elasticities refer to raw prices\n"
                                          : "# prices used as given\n";
  std::string cells = header + "individual,category,brand,time,occasions,median,q05,q95\n";
  for (const auto& e : rep.cells)
    cells += std::to_string(e.individual) + "," + std::to_string(e.category) + "," + std::to_string(e.brand) + "," +
             std::to_string(e.time) + "," + std::to_string(e.occasions) + "," + io::format_double(e.median) + "," +
             io::format_double(e.q05) + "," + io::format_double(e.q95) + "\n";
  std::string cats = header + "category,brand,time,individuals,mean_median\n";
  for (const auto& e : rep.categories)
    cats += std::to_string(e.category) + "," + std::to_string(e.brand) + "," + std::to_string(e.time) + "," +
            std::to_string(e.individuals) + "," + io::format_double(e.mean_median) + "\n";
  io::write_text(dir / "elasticity_cells.csv", cells);
  io::write_text(dir / "elasticity_categories.csv", cats);
  io::write_json(dir / "elasticity.json",
                 {{"model", std::string(model_name(r.config.model))}, {"draws_used", rep.draws_used},
                  {"rescaled", rep.rescaled}, {"cells", rep.cells.size()}});
  io::write_json(dir / "manifest.json",
                 io::make_manifest("elasticity", io::to_json(r.config), r.config.seed, dir,
                                   {"elasticity_cells.csv", "elasticity_categories.csv", "elasticity.json"},
                                   detail::run_inputs(r)));
  out << "elasticity: " << rep.cells.size() << " cells from " << rep.draws_used << " draws\n";
}

inline void cmd_diagnose(const Options& o, std::ostream& out) {
  const auto r = detail::open_run(o);
  const fs::path dir = detail::out_dir(o, r, "diagnostics");
  const auto rep = diagnostics::diagnose(r.draws, r.config.sampler.max_tree_depth);
  std::string csv = "parameter,mean,sd,q05,median,q95,rhat,ess_bulk,ess_mean,mcse_mean\n";
  for (const auto& p : rep.parameters)
    csv += io::quote_csv(p.name) + "," + io::format_double(p.mean) + "," + io::format_double(p.sd) + "," +
           io::format_double(p.q05) + "," + io::format_double(p.median) + "," + io::format_double(p.q95) + "," +
           detail::opt_str(p.rhat) + "," + detail::opt_str(p.ess_bulk) + "," + detail::opt_str(p.ess_mean) + "," +
           detail::opt_str(p.mcse_mean) + "\n";
  const auto mr = rep.max_rhat(), me = rep.min_ess_bulk();
  io::write_text(dir / "diagnostics.csv", csv);
  io::write_json(dir / "diagnostics.json",
                 {{"model", std::string(model_name(r.config.model))}, {"divergences", rep.divergences},
                  {"warmup_divergences", rep.warmup_divergences}, {"max_tree_depth_hits", rep.max_tree_depth_hits},
                  {"step_sizes", rep.step_sizes}, {"mean_accept_stat", rep.mean_accept_stat},
                  {"max_rhat", mr ? json(*mr) : json()}, {"min_ess_bulk", me ? json(*me) : json()}});
  io::write_json(dir / "manifest.json", io::make_manifest("diagnose", io::to_json(r.config), r.config.seed, dir,
                                                          {"diagnostics.csv", "diagnostics.json"}, detail::run_inputs(r)));
  out << "diagnose: " << rep.divergences << " divergences, max rhat " << (mr ? io::format_double(*mr) : "n/a") << "\n";
}

/// Posterior summaries of the coefficient paths, plus factor and pooling
/// tables for the latent-factor model.
inline void cmd_report(const Options& o, std::ostream& out) {
  const auto r = detail::open_run(o);
  const fs::path dir = detail::out_dir(o, r, "report");
  const auto picks = eval::select_draws(r.draws, r.config.forecast_max_draws);
  if (picks.empty()) throw InvalidArgument("report: no posterior draws");
  const auto& dims = r.split.train.dims;
  const std::size_t I = dims.I, K = dims.K, T = r.split.train.grid.size();
  std::vector<std::vector<double>> cell(I * T * K);
  for (auto [c, s] : picks) {
    const auto b = r.model->sensitivities(r.draws.draw(c, s));
    for (std::size_t i = 0; i < I; ++i)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < K; ++k) cell[(i * T + t) * K + k].push_back(b(i, t, k));
  }
  const auto& names = r.ingested.metadata.coefficient_names;
  std::string csv = "individual,time,coefficient,name,mean,q05,median,q95\n";
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < K; ++k) {
        auto v = cell[(i * T + t) * K + k];
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        std::sort(v.begin(), v.end());
        csv += std::to_string(i) + "," + std::to_string(t) + "," + std::to_string(k) + "," +
               io::quote_csv(k < names.size() ? names[k] : "") + "," + io::format_double(mean) + "," +
               io::format_double(diagnostics::quantile_sorted(v, 0.05)) + "," +
               io::format_double(diagnostics::quantile_sorted(v, 0.5)) + "," +
               io::format_double(diagnostics::quantile_sorted(v, 0.95)) + "\n";
      }
  std::vector<std::string> outputs{"sensitivities.csv", "report.json"};
  io::write_text(dir / "sensitivities.csv", csv);
  json summary{{"model", std::string(model_name(r.config.model))}, {"draws_used", picks.size()},
               {"coefficients", names}, {"individuals", r.ingested.metadata.individuals}};
  if (const auto* m = dynamic_cast<const posterior::McdhPosterior*>(r.model.get())) {
    const std::size_t L = m->layout().L;
    Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    std::vector<std::vector<double>> rho(L);
    std::string fcsv = "chain,factor,time,mean\n";
    for (std::size_t ch = 0; ch < r.draws.chains.size(); ++ch) {
      Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(T));
      std::size_t n = 0;
      for (auto [c, s] : picks) {
        if (c != ch) continue;
        const auto con = m->constrained(r.draws.draw(c, s));
        u += con.factors.realized;
        corr += con.heterogeneity.corr;
        for (std::size_t l = 0; l < L; ++l) rho[l].push_back(con.factors.length_scales[l]);
        ++n;
      }
      if (n) u /= static_cast<double>(n);
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t t = 0; t < T; ++t)
          fcsv += std::to_string(ch) + "," + std::to_string(l) + "," + std::to_string(t) + "," +
                  io::format_double(u(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(t))) + "\n";
    }
    corr /= static_cast<double>(picks.size());
    json ls = json::array();
    for (auto& v : rho) {
      std::sort(v.begin(), v.end());
      ls.push_back({{"q05", diagnostics::quantile_sorted(v, 0.05)}, {"median", diagnostics::quantile_sorted(v, 0.5)},
                    {"q95", diagnostics::quantile_sorted(v, 0.95)}});
    }
    summary["length_scales"] = ls;
    summary["weight_correlation_mean"] = detail::matrix_json(corr);
    summary["pooling"] = eval::pooling_metric(corr, dims);
    io::write_text(dir / "factors.csv", fcsv);
    outputs.push_back("factors.csv");
  }
  io::write_json(dir / "report.json", summary);
  io::write_json(dir / "manifest.json",
                 io::make_manifest("report", io::to_json(r.config), r.config.seed, dir, outputs, detail::run_inputs(r)));
  out << "report: " << outputs.size() << " files in " << dir.string() << "\n";
}

inline recovery::HarnessSettings harness_settings(const Options& o, const fs::path& dir) {
  recovery::HarnessSettings s;
  if (o.chains) s.sampler.chains = *o.chains;
  if (o.warmup) s.sampler.warmup = *o.warmup;
  if (o.samples) s.sampler.samples = *o.samples;
  if (o.max_tree_depth) s.sampler.max_tree_depth = *o.max_tree_depth;
  s.truth_init = o.truth_init;
  s.workers = workers_from_env();
  s.draws_dir = dir / "draws";
  return s;
}

inline std::vector<std::uint64_t> seed_list(const Options& o) {
  const std::size_t n = o.seeds.value_or(10);
  if (n == 0) throw UsageError("--seeds must be at least 1");
  std::vector<std::uint64_t> v(n);
  for (std::size_t j = 0; j < n; ++j) v[j] = o.seed.value_or(1) + j;
  return v;
}

inline json harness_config(const std::string& command, const Options& o, const recovery::HarnessSettings& s) {
  return {{"command", command}, {"preset", o.preset.value_or("")}, {"seeds", seed_list(o)},
          {"models", o.models.value_or("")}, {"truth_init", s.truth_init},
          {"sampler", {{"chains", s.sampler.chains}, {"warmup", s.sampler.warmup}, {"samples", s.sampler.samples},
                       {"max_tree_depth", s.sampler.max_tree_depth}, {"target_accept", s.sampler.target_accept}}}};
}

inline std::vector<std::string> draw_files(const fs::path& dir) {
  std::vector<std::string> v;
  if (fs::exists(dir / "draws"))
    for (const auto& e : fs::directory_iterator(dir / "draws")) v.push_back("draws/" + e.path().filename().string());
  std::sort(v.begin(), v.end());
  return v;
}

inline void cmd_recover(const Options& o, std::ostream& out) {
  if (!o.preset) throw UsageError("recover needs --preset");
  detail::require_out(o);
  const fs::path dir = o.out;
  const auto s = harness_settings(o, dir);
  const auto rep = recovery::run_recovery(*o.preset, seed_list(o), s);
  io::write_json(dir / "recovery.json", recovery::to_json(rep));
  io::write_text(dir / "recovery.csv", recovery::recovery_csv(rep));
  auto outputs = draw_files(dir);
  outputs.insert(outputs.begin(), {"recovery.json", "recovery.csv"});
  io::write_json(dir / "manifest.json",
                 io::make_manifest("recover", harness_config("recover", o, s), o.seed.value_or(1), dir, outputs));
  for (const auto& r : rep.replications) {
    out << "seed " << r.seed << ": |corr|";
    for (double c : r.factor_abs_correlation) out << " " << io::format_double(c);
    out << ", beta coverage " << io::format_double(r.mean_beta_coverage) << "\n";
  }
}

inline void cmd_compare(const Options& o, std::ostream& out) {
  if (!o.preset) throw UsageError("compare needs --preset");
  detail::require_out(o);
  const fs::path dir = o.out;
  std::vector<ModelKind> kinds;
  if (o.models) {
    std::stringstream ss(*o.models);
    for (std::string m; std::getline(ss, m, ',');) kinds.push_back(parse_model_kind(m));
  } else {
    kinds = all_model_kinds();
  }
  const auto s = harness_settings(o, dir);
  const auto rep = recovery::run_comparison(*o.preset, kinds, seed_list(o), s);
  io::write_json(dir / "comparison.json", recovery::to_json(rep));
  io::write_text(dir / "comparison.csv", recovery::comparison_csv(rep));
  auto outputs = draw_files(dir);
  outputs.insert(outputs.begin(), {"comparison.json", "comparison.csv"});
  io::write_json(dir / "manifest.json",
                 io::make_manifest("compare", harness_config("compare", o, s), o.seed.value_or(1), dir, outputs));
  out << "compare: " << rep.rows.size() << " rows written to " << dir.string() << "\n";
}

// ---------------------------------------------------------------- dispatch

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"mcdh: latent-factor dynamic heterogeneity choice models"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* c) { c->add_option("--out", o.out, "output directory"); };
  auto sampling = [&](CLI::App* c) {
    c->add_option("--seed", o.seed, "random seed");
    c->add_option("--chains", o.chains);
    c->add_option("--warmup", o.warmup);
    c->add_option("--samples", o.samples);
    c->add_option("--max-tree-depth", o.max_tree_depth);
  };
  auto evaluation = [&](CLI::App* c) {
    c->add_option("--run", o.run, "directory written by fit");
    c->add_option("--draws", o.draws, "draws file (default <run>/draws.csv)");
    common(c);
  };

  auto* simulate = app.add_subcommand("simulate", "simulate a synthetic panel from a preset");
  simulate->add_option("--preset", o.preset);
  simulate->add_option("--seed", o.seed);
  common(simulate);

  auto* fit = app.add_subcommand("fit", "sample the posterior of one model");
  fit->add_option("--config", o.config, "run configuration (JSON)");
  fit->add_option("--model", o.model, "mcdh|logit|logit-info|offsets|offsets-info|gpdh");
  fit->add_option("--data", o.data, "panel file");
  fit->add_option("--factors", o.factors);
  fit->add_option("--holdout-buckets", o.holdout);
  sampling(fit);
  common(fit);

  auto* forecast = app.add_subcommand("forecast", "score holdout buckets");
  auto* elasticity = app.add_subcommand("elasticity", "own-price elasticities");
  auto* diagnose = app.add_subcommand("diagnose", "sampler and convergence diagnostics");
  auto* report = app.add_subcommand("report", "parameter path tables");
  for (auto* c : {forecast, elasticity, diagnose, report}) evaluation(c);

  auto* recover = app.add_subcommand("recover", "simulation-recovery study");
  auto* compare = app.add_subcommand("compare", "holdout comparison across models");
  for (auto* c : {recover, compare}) {
    c->add_option("--preset", o.preset);
    c->add_option("--seeds", o.seeds, "number of replications (seeds start at --seed)");
    sampling(c);
    common(c);
  }
  recover->add_flag("--truth-init", o.truth_init, "start chains at the generating parameters");
  compare->add_option("--models", o.models, "comma-separated model list (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return usage;
  }

  try {
    if (*simulate) cmd_simulate(o, out);
    else if (*fit) cmd_fit(o, out);
    else if (*forecast) cmd_forecast(o, out);
    else if (*elasticity) cmd_elasticity(o, out);
    else if (*diagnose) cmd_diagnose(o, out);
    else if (*report) cmd_report(o, out);
    else if (*recover) cmd_recover(o, out);
    else if (*compare) cmd_compare(o, out);
    return ok;
  } catch (const Error& e) {
    err << json{{"error", std::string(category_name(e.category()))}, {"message", e.what()}}.dump() << "\n";
    return exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    err << json{{"error", "io"}, {"message", e.what()}}.dump() << "\n";
    return io_failure;
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return other;
  }
}

}  // namespace mcdh::cli

#endif  // MCDH_CLI_HPP
