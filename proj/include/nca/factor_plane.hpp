#ifndef NCA_FACTOR_PLANE_HPP
#define NCA_FACTOR_PLANE_HPP

// Factor-plane construction and outlier scoring.
//
// A category is drawn as a trace: its one-hot code combined with the
// standardized log-value at a sweep of quantiles of that category's training
// values, embedded with the X encoder. Members are single points from the Y
// encoder. Distances from the origin measure how strongly a symbol's pattern
// correlates with the plotted factors.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nca/error.hpp"
#include "nca/ingest.hpp"
#include "nca/neural_ca.hpp"

namespace nca {

struct PlanePoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const PlanePoint&, const PlanePoint&) = default;
};

/// 1-based factor indices shown on the horizontal and vertical axis.
struct PlaneAxes {
  Index first = 1;
  Index second = 2;
};

struct CategoryTrace {
  std::string label;
  std::vector<double> quantiles;
  std::vector<PlanePoint> points;  // ordered by quantile
};

struct MemberPoint {
  std::string member_id;
  std::string label;  // "name (party-state)" or the id when no name is known
  PlanePoint point;
  std::optional<std::size_t> investigations;
};

struct FactorPlane {
  PlaneAxes axes;
  std::pair<double, double> axis_ratios{0.0, 0.0};
  std::vector<CategoryTrace> traces;
  std::vector<MemberPoint> members;
};

using InvestigationTable = std::map<std::string, std::size_t>;

inline const std::vector<double>& default_quantiles() {
  static const std::vector<double> q = {0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99};
  return q;
}

/// Linear interpolation between order statistics (the common "type 7" rule).
inline double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(Errc::EmptyValueDistribution, "quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace detail {

inline void check_axes(const FactorModel& m, const PlaneAxes& axes) {
  const Index d = m.a.rows();
  if (axes.first < 1 || axes.first > d || axes.second < 1 || axes.second > d)
    throw Error(Errc::InvalidArgument, "factor plane: axes must lie in [1, " + std::to_string(d) + "]");
}

inline PlanePoint project(const Vector& coords, const PlaneAxes& axes) {
  return {coords(axes.first - 1), coords(axes.second - 1)};
}

}  // namespace detail

/// Trace of `category` over `quantiles` of its training values (in BRL).
/// Without a value block in the X layout every quantile maps to the same point.
inline std::vector<PlanePoint> category_trace(const FactorModel& model, const Vocabulary& vocab,
                                              const ValueTransform& transform, std::string_view category,
                                              std::span<const double> quantiles, std::span<const double> train_values,
                                              const PlaneAxes& axes = {}) {
  detail::check_axes(model, axes);
  const auto cat = vocab.category_index(category);
  if (!cat) throw Error(Errc::UnknownLabel, "category '" + std::string(category) + "'");
  if (!std::is_sorted(quantiles.begin(), quantiles.end()))
    throw Error(Errc::InvalidArgument, "category_trace: quantiles must be ascending");
  for (double q : quantiles)
    if (!(q > 0.0 && q < 1.0)) throw Error(Errc::InvalidArgument, "category_trace: quantiles must lie in (0, 1)");

  const SideLayout& lx = model.layout.x;
  const Block* cat_block = lx.find("category");
  if (!cat_block || cat_block->size != vocab.categories.size())
    throw Error(Errc::ShapeMismatch, "category_trace: model has no matching category block");
  const Block* value_block = lx.find("log_value");

  std::vector<double> sorted(train_values.begin(), train_values.end());
  std::sort(sorted.begin(), sorted.end());
  if (value_block && sorted.empty())
    throw Error(Errc::EmptyValueDistribution, "category '" + std::string(category) + "' has no training values");

  Matrix x = Matrix::Zero(static_cast<Index>(quantiles.size()), static_cast<Index>(lx.dim()));
  for (std::size_t k = 0; k < quantiles.size(); ++k) {
    const auto row = static_cast<Index>(k);
    x(row, static_cast<Index>(cat_block->offset + *cat)) = 1.0;
    if (value_block) x(row, static_cast<Index>(value_block->offset)) = transform.apply(quantile(sorted, quantiles[k]));
  }
  const Matrix coords = embed_x_batch(model, x);
  std::vector<PlanePoint> out;
  out.reserve(quantiles.size());
  for (Index r = 0; r < coords.rows(); ++r) out.push_back(detail::project(coords.row(r).transpose(), axes));
  return out;
}

/// Dense Y code of a member triple under the model's Y layout.
inline Eigen::RowVectorXd member_code(const FactorModel& model, const Vocabulary& vocab, const MemberKey& key) {
  const auto mem = vocab.member_index(key);
  if (!mem) throw Error(Errc::UnknownLabel, "member '" + key.member_id + "' (" + key.party + ", " + key.state + ")");
  const SideLayout& ly = model.layout.y;
  Eigen::RowVectorXd y = Eigen::RowVectorXd::Zero(static_cast<Index>(ly.dim()));
  for (const auto& b : ly.blocks) {
    std::optional<std::size_t> hot;
    if (b.name == "member") hot = mem;
    else if (b.name == "party") hot = vocab.party_index(key.party);
    else if (b.name == "state") hot = vocab.state_index(key.state);
    else throw Error(Errc::ShapeMismatch, "member_point: unsupported Y block '" + b.name + "'");
    if (!hot || *hot >= b.size) throw Error(Errc::UnknownLabel, "member_point: no '" + b.name + "' code for " + key.member_id);
    y(static_cast<Index>(b.offset + *hot)) = 1.0;
  }
  return y;
}

inline PlanePoint member_point(const FactorModel& model, const Vocabulary& vocab, const MemberKey& key,
                               const PlaneAxes& axes = {}) {
  detail::check_axes(model, axes);
  return detail::project(embed_y(model, member_code(model, vocab, key)), axes);
}

/// Training values (BRL) per category index, recovered from the encoded scalar.
inline std::vector<std::vector<double>> category_train_values(const SplitDataset& ds) {
  std::vector<std::vector<double>> out(ds.vocab.categories.size());
  if (!ds.layout.x.find("log_value")) return out;
  for (const auto& s : ds.train) out[s.x_hot.at(0)].push_back(ds.transform.invert(s.x_real.at(0)));
  return out;
}

inline std::string member_label(const Vocabulary& vocab, std::size_t i) {
  const MemberKey& k = vocab.members[i];
  std::string label = vocab.member_names[i].empty() ? k.member_id : vocab.member_names[i];
  if (!k.party.empty() || !k.state.empty()) label += " (" + k.party + "-" + k.state + ")";
  return label;
}

inline FactorPlane build_plane(const FactorModel& model, const SplitDataset& ds, const PlaneAxes& axes,
                               std::span<const double> quantiles, const InvestigationTable& investigations = {}) {
  detail::check_axes(model, axes);
  FactorPlane plane;
  plane.axes = axes;
  plane.axis_ratios = {model.ratios(axes.first - 1), model.ratios(axes.second - 1)};
  const auto values = category_train_values(ds);
  for (std::size_t c = 0; c < ds.vocab.categories.size(); ++c) {
    const std::string& label = ds.vocab.categories[c];
    plane.traces.push_back({label, std::vector<double>(quantiles.begin(), quantiles.end()),
                            category_trace(model, ds.vocab, ds.transform, label, quantiles, values[c], axes)});
  }
  for (std::size_t i = 0; i < ds.vocab.members.size(); ++i) {
    const MemberKey& key = ds.vocab.members[i];
    MemberPoint mp{key.member_id, member_label(ds.vocab, i), member_point(model, ds.vocab, key, axes), std::nullopt};
    if (const auto it = investigations.find(key.member_id); it != investigations.end()) mp.investigations = it->second;
    plane.members.push_back(std::move(mp));
  }
  return plane;
}

// ---------------------------------------------------------------------------
// Outlier scores

struct CategoryScore {
  std::string label;
  double trace_score = 0.0;  // max distance of a trace point from the origin
  double arc_length = 0.0;   // total polyline length
};

struct MemberScore {
  std::string member_id;
  std::string label;
  double point_score = 0.0;
};

struct OutlierScores {
  std::vector<CategoryScore> categories;  // descending trace_score
  std::vector<MemberScore> members;       // descending point_score
};

inline double distance(const PlanePoint& p) { return std::hypot(p.x, p.y); }

inline OutlierScores outlier_scores(const FactorPlane& plane) {
  OutlierScores out;
  for (const auto& t : plane.traces) {
    CategoryScore s{t.label, 0.0, 0.0};
    for (std::size_t k = 0; k < t.points.size(); ++k) {
      s.trace_score = std::max(s.trace_score, distance(t.points[k]));
      if (k > 0) s.arc_length += std::hypot(t.points[k].x - t.points[k - 1].x, t.points[k].y - t.points[k - 1].y);
    }
    out.categories.push_back(std::move(s));
  }
  for (const auto& m : plane.members) out.members.push_back({m.member_id, m.label, distance(m.point)});
  std::stable_sort(out.categories.begin(), out.categories.end(),
                   [](const CategoryScore& a, const CategoryScore& b) { return a.trace_score > b.trace_score; });
  std::stable_sort(out.members.begin(), out.members.end(),
                   [](const MemberScore& a, const MemberScore& b) { return a.point_score > b.point_score; });
  return out;
}

// ---------------------------------------------------------------------------
// Investigation correlation

/// Ranks 1..n with ties replaced by their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::ShapeMismatch, "spearman: length mismatch");
  if (a.size() < 3) throw Error(Errc::InsufficientData, "spearman: need at least 3 pairs");
  const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean, db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw Error(Errc::InsufficientData, "spearman: a variable is constant");
  return sab / std::sqrt(saa * sbb);
}

/// Spearman correlation of point score against investigation count over
/// members present in both inputs. A member id with several party/state
/// triples contributes its largest score.
inline double investigation_correlation(std::span<const MemberScore> scores, const InvestigationTable& inv) {
  std::map<std::string, double> best;
  for (const auto& s : scores) {
    if (!inv.count(s.member_id)) continue;
    auto [it, inserted] = best.try_emplace(s.member_id, s.point_score);
    if (!inserted) it->second = std::max(it->second, s.point_score);
  }
  if (best.size() < 3)
    throw Error(Errc::InsufficientData, "investigation_correlation: " + std::to_string(best.size()) +
                                            " members with counts (need 3)");
  std::vector<double> a, b;
  for (const auto& [id, score] : best) {
    a.push_back(score);
    b.push_back(static_cast<double>(inv.at(id)));
  }
  return spearman(a, b);
}

/// Two-column CSV `member_id,count` with a header row.
inline InvestigationTable read_investigations(std::istream& in) {
  InvestigationTable t;
  std::vector<std::string> fields;
  if (!detail::read_csv_record(in, fields)) throw Error(Errc::EmptyInput, "investigations: empty file");
  std::size_t row = 0;
  while (detail::read_csv_record(in, fields)) {
    ++row;
    if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;
    if (fields.size() != 2) throw Error(Errc::InvalidArgument, "investigations row " + std::to_string(row) + ": expected 2 fields");
    const std::string id(detail::trim(fields[0]));
    const std::string count(detail::trim(fields[1]));
    if (id.empty() || !detail::all_digits(count))
      throw Error(Errc::InvalidArgument, "investigations row " + std::to_string(row) + ": bad member id or count");
    t[id] = std::stoull(count);
  }
  return t;
}

}  // namespace nca

#endif  // NCA_FACTOR_PLANE_HPP
