#ifndef NCA_SYNTH_HPP
#define NCA_SYNTH_HPP

// Synthetic discrete (X, Y) samples from a known joint distribution, encoded
// as one-hot pairs. Used to check neural CA against the exact table oracle.

#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nca/classical_ca.hpp"
#include "nca/error.hpp"
#include "nca/ingest.hpp"
#include "nca/numerics.hpp"
#include "nca/random.hpp"

namespace nca {

/// Parses "a b c; d e f" (rows separated by ';', entries by spaces or commas).
inline Matrix parse_joint(std::string_view text) {
  std::vector<std::vector<double>> rows;
  std::string body(text);
  std::stringstream rs(body);
  std::string row;
  while (std::getline(rs, row, ';')) {
    for (char& c : row)
      if (c == ',') c = ' ';
    std::istringstream es(row);
    std::vector<double> entries;
    std::string tok;
    while (es >> tok) {
      try {
        std::size_t used = 0;
        entries.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(Errc::InvalidDistribution, "joint: bad entry '" + tok + "'");
      }
    }
    if (!entries.empty()) rows.push_back(std::move(entries));
  }
  if (rows.empty()) throw Error(Errc::InvalidDistribution, "joint: no rows");
  Matrix p(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw Error(Errc::InvalidDistribution, "joint: ragged rows");
    for (std::size_t j = 0; j < rows[i].size(); ++j) p(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  table_from_joint(p);  // validates
  return p;
}

/// Random joint with entries drawn uniformly and normalized.
inline Matrix random_joint(Index rows, Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix p(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) p(i, j) = rng.uniform(0.0, 1.0);
  return p / p.sum();
}

inline std::vector<SymbolPair> sample_joint(const Matrix& joint, std::size_t n, std::uint64_t seed) {
  table_from_joint(joint);
  std::vector<double> cumulative;
  cumulative.reserve(static_cast<std::size_t>(joint.size()));
  double acc = 0.0;
  for (Index i = 0; i < joint.rows(); ++i)
    for (Index j = 0; j < joint.cols(); ++j) cumulative.push_back(acc += joint(i, j));
  Rng rng(seed);
  std::vector<SymbolPair> out;
  out.reserve(n);
  const auto cols = static_cast<std::size_t>(joint.cols());
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t cell = rng.categorical(cumulative);
    out.emplace_back(cell / cols, cell % cols);
  }
  return out;
}

/// Vocabulary "x0..", "y0.." with one one-hot block per side.
inline Vocabulary discrete_vocabulary(std::size_t card_x, std::size_t card_y) {
  Vocabulary v;
  auto pad = [](char prefix, std::size_t i, std::size_t n) {
    const std::size_t width = std::to_string(n > 0 ? n - 1 : 0).size();
    std::string digits = std::to_string(i);
    return std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
  };
  for (std::size_t i = 0; i < card_x; ++i) v.categories.push_back(pad('x', i, card_x));
  for (std::size_t j = 0; j < card_y; ++j) {
    v.members.push_back({pad('y', j, card_y), "", ""});
    v.member_names.push_back(pad('y', j, card_y));
  }
  return v;
}

inline Layout discrete_layout(std::size_t card_x, std::size_t card_y) {
  Layout l;
  l.x.add("category", BlockKind::OneHot, card_x);
  l.y.add("member", BlockKind::OneHot, card_y);
  return l;
}

inline SplitDataset discrete_dataset(std::span<const SymbolPair> pairs, std::size_t card_x, std::size_t card_y,
                                     double ratio, std::uint64_t seed) {
  std::vector<EncodedSample> samples;
  samples.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    if (i >= card_x || j >= card_y) throw Error(Errc::IndexOutOfRange, "discrete_dataset: symbol out of range");
    EncodedSample s;
    s.x_hot = {static_cast<std::uint32_t>(i)};
    s.y_hot = {static_cast<std::uint32_t>(j)};
    samples.push_back(std::move(s));
  }
  SplitDataset ds = split(samples, ratio, seed);
  ds.vocab = discrete_vocabulary(card_x, card_y);
  ds.layout = discrete_layout(card_x, card_y);
  return ds;
}

/// Joint symbol index per side (mixed radix over the one-hot blocks).
/// Throws NotDiscrete if a side carries scalar blocks.
inline std::vector<SymbolPair> discrete_pairs(const Layout& layout, std::span<const EncodedSample> samples,
                                              std::size_t& card_x, std::size_t& card_y) {
  if (!layout.discrete()) throw Error(Errc::NotDiscrete, "samples carry continuous feature blocks");
  auto radix = [](const SideLayout& side) {
    std::size_t c = 1;
    for (const auto& b : side.blocks) c *= b.size;
    return c;
  };
  card_x = radix(layout.x);
  card_y = radix(layout.y);
  auto code = [](const SideLayout& side, const std::vector<std::uint32_t>& hot) {
    std::size_t v = 0;
    for (std::size_t k = 0; k < side.blocks.size(); ++k) v = v * side.blocks[k].size + hot[k];
    return v;
  };
  std::vector<SymbolPair> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.emplace_back(code(layout.x, s.x_hot), code(layout.y, s.y_hot));
  return out;
}

}  // namespace nca

#endif  // NCA_SYNTH_HPP
