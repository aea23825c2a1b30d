#ifndef NCA_CONFIG_HPP
#define NCA_CONFIG_HPP

// Run configuration: an INI file with one section per pipeline stage.
//
//   [paths]   input, out, investigations, dataset, model
//   [schema]  <logical field> = <CSV column name>
//   [ingest]  term_start, term_end, min_category_count, split_ratio
//   [train]   d, epochs, batch_size, learning_rate, ridge, center,
//             grad_through_whitening, f_hidden, g_hidden, whiten_ridge,
//             snapshot_samples
//   [plane]   axes, quantiles, width, height
//   [synth]   joint, rows, cols, n, split_ratio
//   [run]     seed
//
// Relative paths in the file resolve against the file's directory. Command
// line overrides (`section.key=value`) are applied verbatim afterwards.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "nca/error.hpp"
#include "nca/factor_plane.hpp"
#include "nca/ingest.hpp"
#include "nca/neural_ca.hpp"

namespace nca {

struct PathsConfig {
  std::filesystem::path input;
  std::filesystem::path out = "out";
  std::optional<std::filesystem::path> investigations;
  std::optional<std::filesystem::path> dataset;  // defaults to <out>/dataset.json
  std::optional<std::filesystem::path> model;    // defaults to <out>/model.json

  std::filesystem::path dataset_path() const { return dataset ? *dataset : out / "dataset.json"; }
  std::filesystem::path model_path() const { return model ? *model : out / "model.json"; }
};

struct IngestConfig {
  Term term = default_term();
  std::size_t min_category_count = 500;
  double split_ratio = 0.7;
};

struct PlaneConfig {
  PlaneAxes axes;
  std::vector<double> quantiles = default_quantiles();
  double width = 960.0;
  double height = 720.0;
};

struct SynthConfig {
  std::string joint;  // empty: draw a random rows x cols joint
  Index rows = 6;
  Index cols = 5;
  std::size_t n = 50000;
  double split_ratio = 0.7;
};

struct RunConfig {
  PathsConfig paths;
  Schema schema;
  IngestConfig ingest;
  TrainConfig train;
  PlaneConfig plane;
  SynthConfig synth;
  std::uint64_t seed = 0;
};

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"paths", {"input", "out", "investigations", "dataset", "model"}},
      {"schema", {"member_id", "member_name", "party", "state", "category", "value", "date", "vendor"}},
      {"ingest", {"term_start", "term_end", "min_category_count", "split_ratio"}},
      {"train",
       {"d", "epochs", "batch_size", "learning_rate", "ridge", "center", "grad_through_whitening", "f_hidden",
        "g_hidden", "whiten_ridge", "snapshot_samples"}},
      {"plane", {"axes", "quantiles", "width", "height"}},
      {"synth", {"joint", "rows", "cols", "n", "split_ratio"}},
      {"run", {"seed"}},
  };
  return keys;
}

[[noreturn]] inline void config_fail(const std::string& key, const std::string& what) {
  throw Error(Errc::Config, key + ": " + what);
}

inline std::string as_string(const std::string& key, const std::string& v) {
  const auto t = trim(v);
  if (t.empty()) config_fail(key, "empty value");
  return std::string(t);
}

template <class T>
T as_number(const std::string& key, const std::string& v) {
  std::istringstream is(as_string(key, v));
  T out{};
  if constexpr (std::is_unsigned_v<T>) {
    if (is.peek() == '-') config_fail(key, "expected a non-negative integer, got '" + v + "'");
  }
  if (!(is >> out) || !(is >> std::ws).eof()) config_fail(key, "not a number: '" + v + "'");
  return out;
}

inline bool as_bool(const std::string& key, const std::string& v) {
  const std::string s = as_string(key, v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  config_fail(key, "expected a boolean, got '" + v + "'");
}

template <class T>
std::vector<T> as_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::string body = v;
  for (char& c : body)
    if (c == ',') c = ' ';
  std::istringstream is(body);
  std::string tok;
  while (is >> tok) out.push_back(as_number<T>(key, tok));
  return out;
}

inline Date as_date(const std::string& key, const std::string& v) {
  const auto d = parse_date(as_string(key, v));
  if (!d) config_fail(key, "not a date: '" + v + "'");
  return *d;
}

inline std::filesystem::path as_path(const std::filesystem::path& base, const std::string& v) {
  std::filesystem::path p(std::string(trim(v)));
  return p.is_relative() ? base / p : p;
}

}  // namespace detail

/// Flat `section.key -> value` view of an INI document.
using ConfigEntries = std::map<std::string, std::string>;

inline ConfigEntries read_config_entries(std::istream& in, const std::string& source) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(Errc::Config, source + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  ConfigEntries out;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw Error(Errc::Config, source + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : body) out[section + "." + key] = value.data();
  }
  return out;
}

/// Applies `section.key=value` strings on top of `entries`.
inline void apply_overrides(ConfigEntries& entries, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(Errc::Config, "override '" + o + "': expected section.key=value");
    entries[std::string(detail::trim(std::string_view(o).substr(0, eq)))] = o.substr(eq + 1);
  }
}

/// Builds a RunConfig from entries. `base` anchors relative paths.
inline RunConfig config_from_entries(const ConfigEntries& entries, const std::filesystem::path& base) {
  using namespace detail;
  RunConfig c;
  for (const auto& [full, value] : entries) {
    const auto dot = full.find('.');
    const std::string section = dot == std::string::npos ? full : full.substr(0, dot);
    const std::string key = dot == std::string::npos ? "" : full.substr(dot + 1);
    const auto sec = config_keys().find(section);
    if (sec == config_keys().end()) config_fail(full, "unknown section '" + section + "'");
    if (!sec->second.count(key)) config_fail(full, "unknown key");

    if (section == "paths") {
      const auto p = as_path(base, as_string(full, value));
      if (key == "input") c.paths.input = p;
      else if (key == "out") c.paths.out = p;
      else if (key == "investigations") c.paths.investigations = p;
      else if (key == "dataset") c.paths.dataset = p;
      else c.paths.model = p;
    } else if (section == "schema") {
      c.schema.columns[key] = as_string(full, value);
    } else if (section == "ingest") {
      if (key == "term_start") c.ingest.term.first = as_date(full, value);
      else if (key == "term_end") c.ingest.term.last = as_date(full, value);
      else if (key == "min_category_count") c.ingest.min_category_count = as_number<std::size_t>(full, value);
      else c.ingest.split_ratio = as_number<double>(full, value);
    } else if (section == "train") {
      TrainConfig& t = c.train;
      if (key == "d") t.d = as_number<Index>(full, value);
      else if (key == "epochs") t.epochs = as_number<int>(full, value);
      else if (key == "batch_size") t.batch_size = as_number<std::size_t>(full, value);
      else if (key == "learning_rate") t.learning_rate = as_number<double>(full, value);
      else if (key == "ridge") t.ridge = as_number<double>(full, value);
      else if (key == "center") t.center = as_bool(full, value);
      else if (key == "grad_through_whitening") t.grad_through_whitening = as_bool(full, value);
      else if (key == "f_hidden") t.f_hidden = as_list<Index>(full, value);
      else if (key == "g_hidden") t.g_hidden = as_list<Index>(full, value);
      else if (key == "whiten_ridge") t.whiten_ridge = as_number<double>(full, value);
      else t.snapshot_samples = as_number<std::size_t>(full, value);
    } else if (section == "plane") {
      if (key == "axes") {
        const auto ax = as_list<Index>(full, value);
        if (ax.size() != 2) config_fail(full, "expected two factor indices");
        c.plane.axes = {ax[0], ax[1]};
      } else if (key == "quantiles") {
        c.plane.quantiles = as_list<double>(full, value);
      } else if (key == "width") {
        c.plane.width = as_number<double>(full, value);
      } else {
        c.plane.height = as_number<double>(full, value);
      }
    } else if (section == "synth") {
      if (key == "joint") c.synth.joint = as_string(full, value);
      else if (key == "rows") c.synth.rows = as_number<Index>(full, value);
      else if (key == "cols") c.synth.cols = as_number<Index>(full, value);
      else if (key == "n") c.synth.n = as_number<std::size_t>(full, value);
      else c.synth.split_ratio = as_number<double>(full, value);
    } else {
      c.seed = as_number<std::uint64_t>(full, value);
    }
  }

  if (!(c.ingest.split_ratio > 0.0 && c.ingest.split_ratio < 1.0)) config_fail("ingest.split_ratio", "must lie in (0, 1)");
  if (!(c.synth.split_ratio > 0.0 && c.synth.split_ratio < 1.0)) config_fail("synth.split_ratio", "must lie in (0, 1)");
  if (c.ingest.min_category_count < 1) config_fail("ingest.min_category_count", "must be >= 1");
  if (c.ingest.term.last < c.ingest.term.first) config_fail("ingest.term_end", "precedes term_start");
  if (c.plane.quantiles.empty()) config_fail("plane.quantiles", "empty list");
  for (double q : c.plane.quantiles)
    if (!(q > 0.0 && q < 1.0)) config_fail("plane.quantiles", "values must lie in (0, 1)");
  if (!std::is_sorted(c.plane.quantiles.begin(), c.plane.quantiles.end()))
    config_fail("plane.quantiles", "must be ascending");
  if (c.plane.axes.first < 1 || c.plane.axes.second < 1) config_fail("plane.axes", "indices are 1-based");
  if (c.synth.rows < 2 || c.synth.cols < 2) config_fail("synth.rows", "random joints need at least 2x2 cells");
  if (c.synth.n < 1) config_fail("synth.n", "must be >= 1");
  try {
    c.train.validate();
  } catch (const Error& e) {
    throw Error(Errc::Config, e.what());
  }
  c.train.seed = c.seed;
  return c;
}

/// Reads `path`, then applies overrides. Seed and output directory flags are
/// ordinary overrides of `run.seed` and `paths.out`.
inline RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Config, "cannot open config " + path.string());
  ConfigEntries entries = read_config_entries(in, path.string());
  const auto base = path.parent_path();
  // Anchor file paths now so that overrides stay relative to the working directory.
  for (auto& [key, value] : entries)
    if (key.rfind("paths.", 0) == 0 && !detail::trim(value).empty())
      value = detail::as_path(base, value).string();
  apply_overrides(entries, overrides);
  return config_from_entries(entries, {});
}

}  // namespace nca

#endif  // NCA_CONFIG_HPP
