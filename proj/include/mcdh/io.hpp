#ifndef MCDH_IO_HPP
#define MCDH_IO_HPP

// Panel CSV ingest/export, draws files, run configuration and manifests.
//
// Panel CSV, one row per alternative of a choice occasion:
//   individual_id,category_id,occasion_id,time_bucket,brand_id,price,chosen[,extra...]
// Lines starting with '#' are comments. The comment "# mcdh-panel preprocessed" marks
// a file whose prices are already on the model scale: no standardization, first
// brand id as baseline, any sign allowed. Extra numeric columns become additional
// slope coefficients placed between the brand dummies and the price.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

#include "mcdh/choice.hpp"
#include "mcdh/errors.hpp"
#include "mcdh/model.hpp"
#include "mcdh/model_core.hpp"
#include "mcdh/sampler.hpp"

namespace mcdh::io {

namespace fs = std::filesystem;
using json = nlohmann::json;
using choice::ChoiceObservation;
using choice::Panel;

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::string_view kDrawsHeader = "# mcdh-draws v1";
inline constexpr std::string_view kPreprocessedMarker = "# mcdh-panel preprocessed";

// ---------------------------------------------------------------- text helpers

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_integer(std::string_view s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  long long v = 0;
  if (s.empty()) return std::nullopt;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Splits one CSV line; fields may be double-quoted with "" as an escaped quote.
inline std::vector<std::string> split_csv(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t n = 0; n < line.size(); ++n) {
    const char ch = line[n];
    if (quoted) {
      if (ch == '"') {
        if (n + 1 < line.size() && line[n + 1] == '"') {
          cur += '"';
          ++n;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string quote_csv(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int n = 15; n >= 0; --n, v >>= 4) s[static_cast<std::size_t>(n)] = digits[v & 0xf];
  return s;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_hash(const fs::path& p) { return hex64(fnv1a(read_file(p))); }

/// Writes through a temporary sibling and renames, so `path` is either the old
/// content or the complete new one.
template <class Writer>
void write_atomically(const fs::path& path, Writer&& write) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
      write(out);
      out.flush();
      if (!out) throw IoError("write to '" + tmp.string() + "' failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

inline void write_text(const fs::path& path, std::string_view text) {
  write_atomically(path, [&](std::ostream& o) { o << text; });
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

/// Integers ordered numerically when every id is an integer, otherwise byte-wise.
inline void sort_ids(std::vector<std::string>& ids) {
  const bool numeric = std::all_of(ids.begin(), ids.end(), [](const std::string& s) { return parse_integer(s).has_value(); });
  if (numeric)
    std::sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) { return *parse_integer(a) < *parse_integer(b); });
  else
    std::sort(ids.begin(), ids.end());
}

// ---------------------------------------------------------------- ingest

enum class Baseline { highest_share, first };

struct IngestOptions {
  bool standardize = true;
  Baseline baseline = Baseline::highest_share;
  bool require_positive_prices = true;
  std::size_t factors = 0;           // L recorded in the panel dims
  std::size_t holdout_buckets = 0;   // last buckets excluded from shares and price statistics
  // activity filters, 0 = off
  std::size_t min_active_buckets = 0;
  std::size_t active_head_buckets = 0;  // must buy in the first n buckets
  std::size_t active_tail_buckets = 0;  // and in the last n buckets
};

struct CategoryMeta {
  std::string id;
  std::vector<std::string> brands;  // in model order, baseline first
  double price_mean = 0.0, price_sd = 1.0;
  bool price_standardized = false;
  bool price_zero_variance = false;
};

struct IngestMetadata {
  std::vector<std::string> individuals;
  std::vector<CategoryMeta> categories;
  std::vector<std::string> extra_columns;
  std::vector<std::string> coefficient_names;  // K entries
  std::size_t time_buckets = 0;
  bool preprocessed = false;
  std::size_t rows = 0, dropped_individuals = 0;
  std::vector<std::string> warnings;
};

struct IngestResult {
  Panel panel;  // full grid (training and holdout buckets)
  IngestMetadata metadata;
};

inline json to_json(const IngestMetadata& m) {
  json cats = json::array();
  for (const auto& c : m.categories)
    cats.push_back({{"id", c.id}, {"brands", c.brands}, {"price_mean", c.price_mean}, {"price_sd", c.price_sd},
                    {"price_standardized", c.price_standardized}, {"price_zero_variance", c.price_zero_variance}});
  return {{"individuals", m.individuals}, {"categories", cats}, {"extra_columns", m.extra_columns},
          {"coefficient_names", m.coefficient_names}, {"time_buckets", m.time_buckets}, {"preprocessed", m.preprocessed},
          {"rows", m.rows}, {"dropped_individuals", m.dropped_individuals}, {"warnings", m.warnings}};
}

namespace detail {

struct RawAlternative {
  std::string brand;
  double price = 0.0;
  std::vector<double> extras;
  bool chosen = false;
};

struct RawOccasion {
  std::string individual, category, occasion;
  long long time = 0;
  std::size_t line = 0;  // first line of the occasion
  std::vector<RawAlternative> alternatives;
};

}  // namespace detail

inline IngestResult ingest_text(std::string_view text, const IngestOptions& opt = {}) {
  static const std::vector<std::string> required{"individual_id", "category_id", "occasion_id", "time_bucket",
                                                 "brand_id", "price", "chosen"};
  IngestResult res;
  IngestMetadata& meta = res.metadata;

  std::vector<detail::RawOccasion> occasions;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> occasion_index;
  std::vector<std::size_t> col;  // position of each required column
  std::vector<std::size_t> extra_pos;
  std::size_t line_no = 0, header_fields = 0;
  bool have_header = false;

  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '#') {
      if (line == kPreprocessedMarker) meta.preprocessed = true;
      continue;
    }
    const auto f = split_csv(line);
    if (!have_header) {
      have_header = true;
      header_fields = f.size();
      for (const auto& name : required) {
        const auto it = std::find(f.begin(), f.end(), name);
        if (it == f.end()) throw SchemaError("missing required column '" + name + "'", line_no);
        if (std::find(it + 1, f.end(), name) != f.end()) throw SchemaError("duplicate column '" + name + "'", line_no);
        col.push_back(static_cast<std::size_t>(it - f.begin()));
      }
      for (std::size_t n = 0; n < f.size(); ++n)
        if (std::find(required.begin(), required.end(), f[n]) == required.end()) {
          if (f[n].empty()) throw SchemaError("empty column name", line_no);
          if (std::find(meta.extra_columns.begin(), meta.extra_columns.end(), f[n]) != meta.extra_columns.end())
            throw SchemaError("duplicate column '" + f[n] + "'", line_no);
          extra_pos.push_back(n);
          meta.extra_columns.push_back(f[n]);
        }
      continue;
    }
    if (f.size() != header_fields)
      throw SchemaError("expected " + std::to_string(header_fields) + " fields, found " + std::to_string(f.size()), line_no);
    ++meta.rows;
    for (std::size_t r = 0; r < 5; ++r)
      if (f[col[r]].empty()) throw SchemaError("empty " + required[r], line_no);
    const auto t = parse_integer(f[col[3]]);
    if (!t || *t < 0) throw SchemaError("time_bucket must be a non-negative integer, got '" + f[col[3]] + "'", line_no);
    const auto price = parse_double(f[col[5]]);
    if (!price || !std::isfinite(*price)) throw SchemaError("price is not a finite number: '" + f[col[5]] + "'", line_no);
    const auto chosen = parse_integer(f[col[6]]);
    if (!chosen || (*chosen != 0 && *chosen != 1)) throw SchemaError("chosen must be 0 or 1, got '" + f[col[6]] + "'", line_no);
    detail::RawAlternative alt{f[col[4]], *price, {}, *chosen == 1};
    for (std::size_t e = 0; e < extra_pos.size(); ++e) {
      const auto v = parse_double(f[extra_pos[e]]);
      if (!v || !std::isfinite(*v))
        throw SchemaError("column '" + meta.extra_columns[e] + "' is not a finite number: '" + f[extra_pos[e]] + "'", line_no);
      alt.extras.push_back(*v);
    }
    auto key = std::make_tuple(f[col[0]], f[col[1]], f[col[2]]);
    auto it = occasion_index.find(key);
    if (it == occasion_index.end()) {
      it = occasion_index.emplace(key, occasions.size()).first;
      occasions.push_back({f[col[0]], f[col[1]], f[col[2]], *t, line_no, {}});
    }
    auto& occ = occasions[it->second];
    if (occ.time != *t)
      throw SchemaError("occasion '" + occ.occasion + "' spans time buckets " + std::to_string(occ.time) + " and " + std::to_string(*t), line_no);
    for (const auto& a : occ.alternatives)
      if (a.brand == alt.brand) throw SchemaError("brand '" + alt.brand + "' listed twice in occasion '" + occ.occasion + "'", line_no);
    occ.alternatives.push_back(std::move(alt));
  }
  if (!have_header) throw SchemaError("empty panel file");
  if (occasions.empty()) throw SchemaError("panel file has no data rows");

  const bool standardize = opt.standardize && !meta.preprocessed;
  const Baseline baseline = meta.preprocessed ? Baseline::first : opt.baseline;
  const bool positive = opt.require_positive_prices && !meta.preprocessed;

  long long max_t = 0;
  for (const auto& o : occasions) {
    std::size_t n_chosen = 0;
    for (const auto& a : o.alternatives) {
      n_chosen += a.chosen;
      if (positive && !(a.price > 0.0))
        throw SchemaError("price must be positive in occasion '" + o.occasion + "'", o.line);
    }
    if (n_chosen != 1)
      throw SchemaError("occasion '" + o.occasion + "' of individual '" + o.individual + "' has " + std::to_string(n_chosen) +
                            " chosen rows (exactly one required)",
                        o.line);
    max_t = std::max(max_t, o.time);
  }
  const std::size_t T = static_cast<std::size_t>(max_t) + 1;
  if (opt.holdout_buckets >= T) throw InvalidArgument("ingest: holdout buckets leave no training window");
  const std::size_t T_train = T - opt.holdout_buckets;
  meta.time_buckets = T;

  // activity filters
  std::map<std::string, std::vector<char>> active;
  for (const auto& o : occasions) {
    auto& a = active[o.individual];
    a.resize(T, 0);
    a[static_cast<std::size_t>(o.time)] = 1;
  }
  std::vector<std::string> individuals;
  for (const auto& [id, a] : active) {
    const auto count = static_cast<std::size_t>(std::count(a.begin(), a.end(), 1));
    bool keep = count >= opt.min_active_buckets;
    if (opt.active_head_buckets)
      keep = keep && std::any_of(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(std::min(opt.active_head_buckets, T)), [](char c) { return c; });
    if (opt.active_tail_buckets)
      keep = keep && std::any_of(a.end() - static_cast<std::ptrdiff_t>(std::min(opt.active_tail_buckets, T)), a.end(), [](char c) { return c; });
    if (keep) individuals.push_back(id);
    else ++meta.dropped_individuals;
  }
  if (individuals.empty()) throw SchemaError("no individual passes the activity filters");
  sort_ids(individuals);
  std::map<std::string, std::size_t> ind_index;
  for (std::size_t i = 0; i < individuals.size(); ++i) ind_index[individuals[i]] = i;
  meta.individuals = individuals;

  // categories and brand sets
  std::map<std::string, std::vector<std::string>> brand_sets;
  for (const auto& o : occasions)
    for (const auto& a : o.alternatives) {
      auto& b = brand_sets[o.category];
      if (std::find(b.begin(), b.end(), a.brand) == b.end()) b.push_back(a.brand);
    }
  std::vector<std::string> categories;
  for (const auto& [id, b] : brand_sets) categories.push_back(id);
  sort_ids(categories);
  std::map<std::string, std::size_t> cat_index;
  for (std::size_t c = 0; c < categories.size(); ++c) cat_index[categories[c]] = c;

  const std::size_t E = meta.extra_columns.size();
  std::vector<std::size_t> brand_counts;
  std::vector<std::map<std::string, std::size_t>> brand_index(categories.size());
  for (std::size_t c = 0; c < categories.size(); ++c) {
    std::vector<std::string> ids = brand_sets[categories[c]];
    if (ids.size() < 2) throw SchemaError("category '" + categories[c] + "' has fewer than two brands");
    sort_ids(ids);
    std::size_t base = 0;
    if (baseline == Baseline::highest_share) {
      std::map<std::string, std::size_t> share;
      for (const auto& o : occasions)
        if (o.category == categories[c] && static_cast<std::size_t>(o.time) < T_train && ind_index.count(o.individual))
          for (const auto& a : o.alternatives)
            if (a.chosen) ++share[a.brand];
      for (std::size_t j = 1; j < ids.size(); ++j)
        if (share[ids[j]] > share[ids[base]]) base = j;
    }
    std::vector<std::string> order{ids[base]};
    for (std::size_t j = 0; j < ids.size(); ++j)
      if (j != base) order.push_back(ids[j]);
    CategoryMeta cm;
    cm.id = categories[c];
    cm.brands = order;
    for (std::size_t j = 0; j < order.size(); ++j) brand_index[c][order[j]] = j;
    brand_counts.push_back(order.size());
    meta.categories.push_back(std::move(cm));
  }
  for (const auto& o : occasions)
    if (o.alternatives.size() != brand_counts[cat_index[o.category]])
      throw SchemaError("occasion '" + o.occasion + "' lists " + std::to_string(o.alternatives.size()) + " of the " +
                            std::to_string(brand_counts[cat_index[o.category]]) + " brands of category '" + o.category + "'",
                        o.line);

  // training-window price statistics
  for (std::size_t c = 0; c < categories.size(); ++c) {
    auto& cm = meta.categories[c];
    if (!standardize) continue;
    double n = 0.0, mean = 0.0, m2 = 0.0;
    for (const auto& o : occasions)
      if (o.category == categories[c] && static_cast<std::size_t>(o.time) < T_train && ind_index.count(o.individual))
        for (const auto& a : o.alternatives) {
          n += 1.0;
          const double d = a.price - mean;
          mean += d / n;
          m2 += d * (a.price - mean);
        }
    const double sd = n > 1.0 ? std::sqrt(m2 / (n - 1.0)) : 0.0;
    cm.price_mean = mean;
    if (sd > 0.0 && std::isfinite(sd)) {
      cm.price_sd = sd;
      cm.price_standardized = true;
    } else {
      cm.price_zero_variance = true;
      cm.price_sd = 1.0;
      meta.warnings.push_back("category '" + cm.id + "': price has zero variance in the training window; column zero-filled");
    }
  }

  Panel& p = res.panel;
  p.dims = model::ModelDims::make(individuals.size(), brand_counts, opt.factors, T, 1 + E);
  p.grid = kernels::TimeGrid::consecutive(T);
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const auto& cm = meta.categories[c];
    for (std::size_t j = 1; j < cm.brands.size(); ++j) meta.coefficient_names.push_back(cm.id + ":brand:" + cm.brands[j]);
    for (const auto& e : meta.extra_columns) meta.coefficient_names.push_back(cm.id + ":" + e);
    meta.coefficient_names.push_back(cm.id + ":price");
  }
  struct Keyed {
    std::size_t i, c, t, order;
    ChoiceObservation o;
  };
  std::vector<Keyed> keyed;
  for (std::size_t n = 0; n < occasions.size(); ++n) {
    const auto& occ = occasions[n];
    const auto ii = ind_index.find(occ.individual);
    if (ii == ind_index.end()) continue;
    const std::size_t c = cat_index[occ.category];
    const auto& cat = p.dims.categories[c];
    const auto& cm = meta.categories[c];
    const std::size_t J = cat.brands, P = cat.coefficients;
    ChoiceObservation o;
    o.individual = ii->second;
    o.category = c;
    o.time = static_cast<std::size_t>(occ.time);
    o.features.assign(J * P, 0.0);
    for (const auto& a : occ.alternatives) {
      const std::size_t j = brand_index[c][a.brand];
      if (j > 0) o.features[j * P + (j - 1)] = 1.0;
      for (std::size_t e = 0; e < E; ++e) o.features[j * P + (J - 1) + e] = a.extras[e];
      double x = a.price;
      if (cm.price_zero_variance) x = 0.0;
      else if (cm.price_standardized) x = (a.price - cm.price_mean) / cm.price_sd;
      o.features[j * P + (P - 1)] = x;
      if (a.chosen) o.chosen = j;
    }
    keyed.push_back({o.individual, c, o.time, n, std::move(o)});
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
    return std::tie(a.i, a.c, a.t) < std::tie(b.i, b.c, b.t);
  });
  for (auto& k : keyed) p.observations.push_back(std::move(k.o));
  p.validate();
  return res;
}

inline IngestResult ingest(const fs::path& path, const IngestOptions& opt = {}) {
  if (!fs::exists(path)) throw IoError("data file '" + path.string() + "' does not exist");
  return ingest_text(read_file(path), opt);
}

/// Model-scale export; the output ingests back to the same panel. Ids are indices.
inline std::string panel_csv(const Panel& p) {
  const auto pts = p.grid.points();
  for (std::size_t t = 0; t < pts.size(); ++t)
    if (pts[t] != static_cast<double>(t)) throw InvalidArgument("panel export needs the grid 0..T-1");
  std::ostringstream out;
  out << kPreprocessedMarker << '\n';
  std::size_t slopes = 0;
  if (!p.dims.categories.empty()) slopes = p.dims.categories[0].coefficients - (p.dims.categories[0].brands - 1);
  for (const auto& c : p.dims.categories)
    if (c.coefficients - (c.brands - 1) != slopes) throw InvalidArgument("panel export needs equal slope counts");
  out << "individual_id,category_id,occasion_id,time_bucket,brand_id,price,chosen";
  for (std::size_t e = 0; e + 1 < slopes; ++e) out << ",x" << e;
  out << '\n';
  for (std::size_t n = 0; n < p.observations.size(); ++n) {
    const auto& o = p.observations[n];
    const auto& cat = p.dims.categories[o.category];
    const std::size_t J = cat.brands, P = cat.coefficients;
    for (std::size_t j = 0; j < J; ++j) {
      out << o.individual << ',' << o.category << ',' << n << ',' << o.time << ',' << j << ','
          << format_double(o.features[j * P + P - 1]) << ',' << (o.chosen == j ? 1 : 0);
      for (std::size_t e = 0; e + 1 < slopes; ++e) out << ',' << format_double(o.features[j * P + (J - 1) + e]);
      out << '\n';
    }
  }
  return out.str();
}

inline void write_panel(const fs::path& path, const Panel& p) { write_text(path, panel_csv(p)); }

// ---------------------------------------------------------------- draws

inline void persist_draws(const sampler::PosteriorDraws& d, const fs::path& path, std::string_view model = "") {
  if (d.names.size() != d.dimension) throw InvalidArgument("persist_draws: names do not match the dimension");
  write_atomically(path, [&](std::ostream& out) {
    out << kDrawsHeader << '\n';
    out << "# model " << (model.empty() ? "unknown" : model) << '\n';
    out << "# dimension " << d.dimension << " chains " << d.chains.size() << " samples " << d.samples << '\n';
    for (std::size_t c = 0; c < d.chains.size(); ++c) {
      const auto& ch = d.chains[c];
      out << "# chain " << c << " step_size " << format_double(ch.step_size) << " warmup_divergences "
          << ch.warmup_divergences << '\n';
      out << "# chain " << c << " inv_metric";
      for (double v : ch.inv_metric) out << ' ' << format_double(v);
      out << '\n';
    }
    out << "chain,draw,accept_stat,divergent,tree_depth,n_leapfrog,energy";
    for (const auto& n : d.names) out << ',' << quote_csv(n);
    out << '\n';
    for (std::size_t c = 0; c < d.chains.size(); ++c) {
      const auto& ch = d.chains[c];
      for (std::size_t s = 0; s < d.samples; ++s) {
        out << c << ',' << s << ',' << format_double(ch.accept_stat[s]) << ',' << static_cast<int>(ch.divergent[s]) << ','
            << ch.tree_depth[s] << ',' << ch.n_leapfrog[s] << ',' << format_double(ch.energy[s]);
        for (std::size_t j = 0; j < d.dimension; ++j) out << ',' << format_double(ch.values[s * d.dimension + j]);
        out << '\n';
      }
    }
  });
}

struct LoadedDraws {
  sampler::PosteriorDraws draws;
  std::string model;
};

inline LoadedDraws load_draws_text(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view l = text.substr(pos, end - pos);
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    lines.push_back(l);
    pos = end + 1;
  }
  if (lines.empty()) throw SchemaError("draws file is empty");
  if (lines[0] != kDrawsHeader) {
    if (lines[0].rfind("# mcdh-draws ", 0) == 0)
      throw VersionError("draws file version '" + std::string(lines[0].substr(13)) + "' is not supported (expected v1)");
    throw SchemaError("not a draws file (missing '# mcdh-draws v1' header)", 1);
  }
  LoadedDraws res;
  auto& d = res.draws;
  std::size_t n = 1, C = 0;
  auto expect = [&](std::string_view prefix) {
    if (n >= lines.size() || lines[n].rfind(prefix, 0) != 0) throw SchemaError("expected '" + std::string(prefix) + "'", n + 1);
    return std::string(lines[n++].substr(prefix.size()));
  };
  res.model = expect("# model ");
  {
    std::istringstream ss(expect("# dimension "));
    std::string w1, w2;
    ss >> d.dimension >> w1 >> C >> w2 >> d.samples;
    if (!ss || w1 != "chains" || w2 != "samples") throw SchemaError("malformed dimension line", n);
  }
  d.chains.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    auto& ch = d.chains[c];
    std::istringstream a(expect("# chain " + std::to_string(c) + " step_size "));
    std::string step, word;
    a >> step >> word >> ch.warmup_divergences;
    const auto sv = parse_double(step);
    if (!a || !sv || word != "warmup_divergences") throw SchemaError("malformed chain line", n);
    ch.step_size = *sv;
    std::istringstream b(expect("# chain " + std::to_string(c) + " inv_metric"));
    std::string tok;
    while (b >> tok) {
      const auto v = parse_double(tok);
      if (!v) throw SchemaError("malformed inverse metric", n);
      ch.inv_metric.push_back(*v);
    }
    ch.values.assign(d.samples * d.dimension, 0.0);
    ch.accept_stat.assign(d.samples, 0.0);
    ch.divergent.assign(d.samples, 0);
    ch.tree_depth.assign(d.samples, 0);
    ch.n_leapfrog.assign(d.samples, 0);
    ch.energy.assign(d.samples, 0.0);
  }
  if (n >= lines.size()) throw SchemaError("missing column header", n + 1);
  const auto header = split_csv(lines[n++]);
  if (header.size() != 7 + d.dimension) throw SchemaError("column header does not match the dimension", n);
  d.names.assign(header.begin() + 7, header.end());
  std::size_t rows = 0;
  for (; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    const auto f = split_csv(lines[n]);
    if (f.size() != header.size()) throw SchemaError("wrong number of fields", n + 1);
    const auto c = parse_integer(f[0]), s = parse_integer(f[1]);
    if (!c || !s || static_cast<std::size_t>(*c) != rows / std::max<std::size_t>(d.samples, 1) ||
        static_cast<std::size_t>(*s) != rows % std::max<std::size_t>(d.samples, 1) || static_cast<std::size_t>(*c) >= C)
      throw SchemaError("draw rows out of order", n + 1);
    auto& ch = d.chains[static_cast<std::size_t>(*c)];
    const auto si = static_cast<std::size_t>(*s);
    const auto acc = parse_double(f[2]), en = parse_double(f[6]);
    const auto dv = parse_integer(f[3]), td = parse_integer(f[4]), nl = parse_integer(f[5]);
    if (!acc || !en || !dv || !td || !nl || *td < 0 || *nl < 0 || (*dv != 0 && *dv != 1))
      throw SchemaError("malformed sampler statistics", n + 1);
    ch.accept_stat[si] = *acc;
    ch.divergent[si] = static_cast<unsigned char>(*dv);
    ch.tree_depth[si] = static_cast<std::size_t>(*td);
    ch.n_leapfrog[si] = static_cast<std::size_t>(*nl);
    ch.energy[si] = *en;
    for (std::size_t j = 0; j < d.dimension; ++j) {
      const auto v = parse_double(f[7 + j]);
      if (!v) throw SchemaError("malformed value in column '" + d.names[j] + "'", n + 1);
      ch.values[si * d.dimension + j] = *v;
    }
    ++rows;
  }
  if (rows != C * d.samples) throw SchemaError("draws file is truncated: " + std::to_string(rows) + " of " + std::to_string(C * d.samples) + " rows");
  return res;
}

inline LoadedDraws load_draws(const fs::path& path) { return load_draws_text(read_file(path)); }

// ---------------------------------------------------------------- run configuration

struct RunConfig {
  ModelKind model = ModelKind::mcdh;
  std::size_t factors = 2;
  std::uint64_t seed = 0;
  std::size_t holdout_buckets = 0;
  std::string data;
  sampler::SamplerConfig sampler;
  model::PriorConfig priors;
  IngestOptions ingest;
  std::size_t forecast_max_draws = 0;
};

namespace detail {

inline void reject_unknown(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + " must be a JSON object");
  for (const auto& [key, v] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw SchemaError("unknown configuration key '" + where + (where.empty() ? "" : ".") + key + "'");
}

template <class T>
void read_key(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw SchemaError("configuration key '" + where + key + "' has the wrong type");
  }
}

}  // namespace detail

inline RunConfig parse_run_config(const json& j) {
  RunConfig rc;
  detail::reject_unknown(j, {"model", "factors", "seed", "holdout_buckets", "data", "sampler", "priors", "ingest", "forecast"}, "");
  std::string model = std::string(model_name(rc.model));
  detail::read_key(j, "model", model, "");
  try {
    rc.model = parse_model_kind(model);
  } catch (const InvalidArgument& e) {
    throw SchemaError(e.what());
  }
  detail::read_key(j, "factors", rc.factors, "");
  detail::read_key(j, "seed", rc.seed, "");
  detail::read_key(j, "holdout_buckets", rc.holdout_buckets, "");
  detail::read_key(j, "data", rc.data, "");
  if (j.contains("sampler")) {
    const auto& s = j["sampler"];
    detail::reject_unknown(s, {"chains", "warmup", "samples", "target_accept", "max_tree_depth", "init_radius",
                               "initial_step_size", "max_delta_h"}, "sampler");
    detail::read_key(s, "chains", rc.sampler.chains, "sampler.");
    detail::read_key(s, "warmup", rc.sampler.warmup, "sampler.");
    detail::read_key(s, "samples", rc.sampler.samples, "sampler.");
    detail::read_key(s, "target_accept", rc.sampler.target_accept, "sampler.");
    detail::read_key(s, "max_tree_depth", rc.sampler.max_tree_depth, "sampler.");
    detail::read_key(s, "init_radius", rc.sampler.init_radius, "sampler.");
    detail::read_key(s, "initial_step_size", rc.sampler.initial_step_size, "sampler.");
    detail::read_key(s, "max_delta_h", rc.sampler.max_delta_h, "sampler.");
  }
  if (j.contains("priors")) {
    const auto& p = j["priors"];
    detail::reject_unknown(p, {"alpha_sd", "rho_median", "rho_log_sd", "tau_scale", "lkj_shape"}, "priors");
    detail::read_key(p, "alpha_sd", rc.priors.alpha_sd, "priors.");
    detail::read_key(p, "rho_median", rc.priors.rho_median, "priors.");
    detail::read_key(p, "rho_log_sd", rc.priors.rho_log_sd, "priors.");
    detail::read_key(p, "tau_scale", rc.priors.tau_scale, "priors.");
    detail::read_key(p, "lkj_shape", rc.priors.lkj_shape, "priors.");
    for (double v : {rc.priors.alpha_sd, rc.priors.rho_median, rc.priors.rho_log_sd, rc.priors.tau_scale, rc.priors.lkj_shape})
      if (!(v > 0.0)) throw SchemaError("prior settings must be positive");
  }
  if (j.contains("ingest")) {
    const auto& g = j["ingest"];
    detail::reject_unknown(g, {"standardize", "baseline", "require_positive_prices", "min_active_buckets",
                               "active_head_buckets", "active_tail_buckets"}, "ingest");
    detail::read_key(g, "standardize", rc.ingest.standardize, "ingest.");
    std::string b = "highest-share";
    detail::read_key(g, "baseline", b, "ingest.");
    if (b == "highest-share") rc.ingest.baseline = Baseline::highest_share;
    else if (b == "first") rc.ingest.baseline = Baseline::first;
    else throw SchemaError("ingest.baseline must be 'highest-share' or 'first'");
    detail::read_key(g, "require_positive_prices", rc.ingest.require_positive_prices, "ingest.");
    detail::read_key(g, "min_active_buckets", rc.ingest.min_active_buckets, "ingest.");
    detail::read_key(g, "active_head_buckets", rc.ingest.active_head_buckets, "ingest.");
    detail::read_key(g, "active_tail_buckets", rc.ingest.active_tail_buckets, "ingest.");
  }
  if (j.contains("forecast")) {
    const auto& f = j["forecast"];
    detail::reject_unknown(f, {"max_draws"}, "forecast");
    detail::read_key(f, "max_draws", rc.forecast_max_draws, "forecast.");
  }
  rc.sampler.seed = rc.seed;
  return rc;
}

inline RunConfig load_run_config(const fs::path& path) { return parse_run_config(read_json(path)); }

/// Canonical form; keys sorted by nlohmann's object ordering.
inline json to_json(const RunConfig& rc) {
  const auto& s = rc.sampler;
  const auto& p = rc.priors;
  const auto& g = rc.ingest;
  return {{"model", std::string(model_name(rc.model))},
          {"factors", rc.factors},
          {"seed", rc.seed},
          {"holdout_buckets", rc.holdout_buckets},
          {"data", rc.data},
          {"sampler",
           {{"chains", s.chains}, {"warmup", s.warmup}, {"samples", s.samples}, {"target_accept", s.target_accept},
            {"max_tree_depth", s.max_tree_depth}, {"init_radius", s.init_radius},
            {"initial_step_size", s.initial_step_size}, {"max_delta_h", s.max_delta_h}}},
          {"priors",
           {{"alpha_sd", p.alpha_sd}, {"rho_median", p.rho_median}, {"rho_log_sd", p.rho_log_sd},
            {"tau_scale", p.tau_scale}, {"lkj_shape", p.lkj_shape}}},
          {"ingest",
           {{"standardize", g.standardize}, {"baseline", g.baseline == Baseline::first ? "first" : "highest-share"},
            {"require_positive_prices", g.require_positive_prices}, {"min_active_buckets", g.min_active_buckets},
            {"active_head_buckets", g.active_head_buckets}, {"active_tail_buckets", g.active_tail_buckets}}},
          {"forecast", {{"max_draws", rc.forecast_max_draws}}}};
}

inline std::string config_hash(const json& canonical) { return hex64(fnv1a(canonical.dump())); }

// ---------------------------------------------------------------- manifest

/// Written beside every set of outputs; contains nothing time-dependent.
inline json make_manifest(std::string_view command, const json& config, std::uint64_t seed, const fs::path& dir,
                          const std::vector<std::string>& outputs, const std::vector<fs::path>& inputs = {}) {
  json out = json::object();
  for (const auto& f : outputs) out[f] = file_hash(dir / f);
  json in = json::object();
  for (const auto& f : inputs) in[f.filename().string()] = file_hash(f);
  return {{"format", "mcdh-manifest v1"},
          {"command", std::string(command)},
          {"config", config},
          {"config_hash", config_hash(config)},
          {"seed", seed},
          {"versions", {{"mcdh", std::string(kVersion)}, {"draws_format", "v1"}, {"panel_format", "v1"}}},
          {"inputs", in},
          {"outputs", out}};
}

}  // namespace mcdh::io

#endif  // MCDH_IO_HPP
