#ifndef NCA_CLASSICAL_CA_HPP
#define NCA_CLASSICAL_CA_HPP

/*
 Exact correspondence analysis of two discrete variables.

   P    normalized co-occurrence counts, |X| x |Y|
   Q  = D_X^{-1/2} (P - p_X p_Y^T) D_Y^{-1/2},   Q = U S V^T
   L  = D_X^{-1/2} U,  R = D_Y^{-1/2} V,  lambda_i = s_i^2

 Subtracting p_X p_Y^T removes the trivial factor, so at most
 d = min(|X|, |Y|) - 1 singular values are non-zero and exactly d are kept.
 Tied singular values give a non-unique factor rotation; the order and signs
 then follow the svd() conventions.
*/

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nca/error.hpp"
#include "nca/format.hpp"
#include "nca/numerics.hpp"

namespace nca {

struct ContingencyTable {
  Matrix p;    // entries sum to 1
  Vector p_x;  // row sums
  Vector p_y;  // column sums
  std::size_t n_samples = 0;
};

struct CAResult {
  Matrix l;  // |X| x d
  Matrix r;  // |Y| x d
  Vector factor_scores;
  Vector ratios;
};

using SymbolPair = std::pair<std::size_t, std::size_t>;

inline ContingencyTable build_contingency(std::span<const SymbolPair> pairs, std::size_t card_x,
                                          std::size_t card_y) {
  if (pairs.empty()) throw Error(Errc::EmptyInput, "build_contingency: no pairs");
  if (card_x == 0 || card_y == 0) throw Error(Errc::InvalidArgument, "build_contingency: zero cardinality");
  std::vector<std::size_t> counts(card_x * card_y, 0);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    if (i >= card_x || j >= card_y)
      throw Error(Errc::IndexOutOfRange, "build_contingency: pair " + std::to_string(k) + " = (" +
                                             std::to_string(i) + ", " + std::to_string(j) + ")");
    ++counts[i * card_y + j];
  }
  ContingencyTable t;
  t.n_samples = pairs.size();
  const double n = static_cast<double>(pairs.size());
  t.p.resize(static_cast<Index>(card_x), static_cast<Index>(card_y));
  for (std::size_t i = 0; i < card_x; ++i)
    for (std::size_t j = 0; j < card_y; ++j)
      t.p(static_cast<Index>(i), static_cast<Index>(j)) = static_cast<double>(counts[i * card_y + j]) / n;
  t.p_x = t.p.rowwise().sum();
  t.p_y = t.p.colwise().sum().transpose();
  return t;
}

/// Table from an exact joint distribution (entries >= 0 summing to 1 within 1e-9).
inline ContingencyTable table_from_joint(const Matrix& joint) {
  if (joint.size() == 0) throw Error(Errc::InvalidDistribution, "joint is empty");
  if (!joint.allFinite() || joint.minCoeff() < 0.0)
    throw Error(Errc::InvalidDistribution, "joint has negative or non-finite entries");
  if (std::abs(joint.sum() - 1.0) > 1e-9) throw Error(Errc::InvalidDistribution, "joint does not sum to 1");
  ContingencyTable t;
  t.p = joint / joint.sum();
  t.p_x = t.p.rowwise().sum();
  t.p_y = t.p.colwise().sum().transpose();
  return t;
}

struct PrunedTable {
  ContingencyTable table;
  std::vector<std::size_t> kept_x;
  std::vector<std::size_t> kept_y;
};

/// Drops all-zero rows and columns. The total mass is unchanged.
inline PrunedTable prune_zero_marginals(const ContingencyTable& t) {
  PrunedTable out;
  for (Index i = 0; i < t.p.rows(); ++i)
    if (t.p.row(i).cwiseAbs().sum() > 0.0) out.kept_x.push_back(static_cast<std::size_t>(i));
  for (Index j = 0; j < t.p.cols(); ++j)
    if (t.p.col(j).cwiseAbs().sum() > 0.0) out.kept_y.push_back(static_cast<std::size_t>(j));
  if (out.kept_x.empty() || out.kept_y.empty()) throw Error(Errc::EmptyResult, "prune_zero_marginals: table is all zero");

  ContingencyTable& r = out.table;
  r.n_samples = t.n_samples;
  r.p.resize(static_cast<Index>(out.kept_x.size()), static_cast<Index>(out.kept_y.size()));
  for (std::size_t a = 0; a < out.kept_x.size(); ++a)
    for (std::size_t b = 0; b < out.kept_y.size(); ++b)
      r.p(static_cast<Index>(a), static_cast<Index>(b)) =
          t.p(static_cast<Index>(out.kept_x[a]), static_cast<Index>(out.kept_y[b]));
  r.p_x = r.p.rowwise().sum();
  r.p_y = r.p.colwise().sum().transpose();
  return out;
}

/// Standardized residual matrix Q of a table with strictly positive marginals.
inline Matrix standardized_residuals(const ContingencyTable& t) {
  for (Index i = 0; i < t.p_x.size(); ++i)
    if (!(t.p_x(i) > 0.0)) throw Error(Errc::ZeroMarginal, "row " + std::to_string(i) + " has zero marginal");
  for (Index j = 0; j < t.p_y.size(); ++j)
    if (!(t.p_y(j) > 0.0)) throw Error(Errc::ZeroMarginal, "column " + std::to_string(j) + " has zero marginal");
  const Vector sx = t.p_x.array().rsqrt();
  const Vector sy = t.p_y.array().rsqrt();
  const Matrix resid = t.p - t.p_x * t.p_y.transpose();
  return sx.asDiagonal() * resid * sy.asDiagonal();
}

inline Vector score_ratios(const Vector& scores) {
  const double total = scores.sum();
  if (!(total > 1e-12)) return Vector::Zero(scores.size());  // scores are bounded by 1; below this is rounding
  return scores / total;
}

inline CAResult ca_from_table(const ContingencyTable& t) {
  const Matrix q = standardized_residuals(t);
  const Index d = std::min(q.rows(), q.cols()) - 1;
  CAResult out;
  if (d <= 0) {
    out.l.resize(q.rows(), 0);
    out.r.resize(q.cols(), 0);
    out.factor_scores.resize(0);
    out.ratios.resize(0);
    return out;
  }
  const SvdResult s = svd(q);
  out.l = t.p_x.array().rsqrt().matrix().asDiagonal() * s.u.leftCols(d);
  out.r = t.p_y.array().rsqrt().matrix().asDiagonal() * s.v.leftCols(d);
  out.factor_scores = s.singular_values.head(d).array().square();
  out.ratios = score_ratios(out.factor_scores);
  return out;
}

/// CSV rows `side,label,f1..fd`; side is "x" or "y".
inline void write_ca_csv(std::ostream& os, const CAResult& res, std::span<const std::string> x_labels,
                         std::span<const std::string> y_labels) {
  if (static_cast<Index>(x_labels.size()) != res.l.rows() || static_cast<Index>(y_labels.size()) != res.r.rows())
    throw Error(Errc::ShapeMismatch, "write_ca_csv: label count does not match factor rows");
  os << "side,label";
  for (Index k = 0; k < res.factor_scores.size(); ++k) os << ",f" << (k + 1);
  os << '\n';
  auto rows = [&](const char* side, const Matrix& m, std::span<const std::string> labels) {
    for (Index i = 0; i < m.rows(); ++i) {
      os << side << ',' << csv_escape(labels[static_cast<std::size_t>(i)]);
      for (Index k = 0; k < m.cols(); ++k) os << ',' << format_double(m(i, k));
      os << '\n';
    }
  };
  rows("x", res.l, x_labels);
  rows("y", res.r, y_labels);
}

inline nlohmann::json ca_summary_json(const CAResult& res) {
  return {{"factor_scores", std::vector<double>(res.factor_scores.begin(), res.factor_scores.end())},
          {"ratios", std::vector<double>(res.ratios.begin(), res.ratios.end())}};
}

}  // namespace nca

#endif  // NCA_CLASSICAL_CA_HPP
