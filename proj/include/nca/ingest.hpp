#ifndef NCA_INGEST_HPP
#define NCA_INGEST_HPP

// Expenditure records: CSV parsing, term/missing/rare-category filtering,
// vocabulary construction, one-hot encoding and the train/validation split.
//
// Pipeline order: parse -> filter -> build_vocabulary -> split_indices ->
// fit_value_transform (train rows only) -> encode. prepare_dataset() runs the
// last three steps so the value statistics never see validation rows.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nca/error.hpp"
#include "nca/numerics.hpp"
#include "nca/random.hpp"

namespace nca {

using Date = std::chrono::year_month_day;

/// Non-negative amount in BRL, held as integer centavos.
struct Money {
  std::int64_t centavos = 0;
  double brl() const { return static_cast<double>(centavos) / 100.0; }
  friend auto operator<=>(const Money&, const Money&) = default;
};

struct ExpenseRecord {
  std::string member_id;
  std::string member_name;
  std::string party;
  std::string state;
  std::string category;
  Money value;
  Date date;
  std::string vendor;  // may be empty; carried, unused by the analysis
};

struct RowError {
  std::size_t row = 0;  // 1-based data row (the header is row 0)
  std::string cause;    // e.g. "missing-category", "negative-value"
  std::string detail;
};

/// Logical field -> CSV column name. Unlisted fields map to their own name.
struct Schema {
  std::map<std::string, std::string> columns;

  std::string column(const std::string& field) const {
    const auto it = columns.find(field);
    return it == columns.end() ? field : it->second;
  }
};

inline constexpr std::array<const char*, 7> kRequiredFields = {"member_id", "member_name", "party", "state",
                                                               "category", "value", "date"};

// ---------------------------------------------------------------------------
// Field parsers

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

/// Reads one CSV record (RFC 4180 quoting, embedded newlines allowed).
/// Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false, was_quoted = false;
  for (;;) {
    const int ch = in.get();
    if (ch == std::char_traits<char>::eof()) break;
    const char c = static_cast<char>(ch);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get();
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return true;
}

}  // namespace detail

/// Signed centavos from "1234.56", "1.234,56", "1.234.567", "R$ 10,5".
/// Fractional digits beyond two are rounded half away from zero.
inline std::optional<std::int64_t> parse_money(std::string_view text) {
  std::string s;
  for (char c : detail::trim(text))
    if (c != ' ') s += c;
  if (s.rfind("R$", 0) == 0) s.erase(0, 2);
  bool negative = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    negative = s[0] == '-';
    s.erase(0, 1);
  }
  if (s.empty()) return std::nullopt;

  std::string integral, fraction;
  const auto comma = s.find(',');
  if (comma != std::string::npos) {
    // Brazilian: '.' groups thousands, ',' separates decimals.
    if (s.find(',', comma + 1) != std::string::npos) return std::nullopt;
    for (char c : s.substr(0, comma))
      if (c != '.') integral += c;
    fraction = s.substr(comma + 1);
  } else if (std::count(s.begin(), s.end(), '.') > 1) {
    for (char c : s)
      if (c != '.') integral += c;
  } else {
    const auto dot = s.find('.');
    integral = s.substr(0, dot);
    if (dot != std::string::npos) fraction = s.substr(dot + 1);
  }
  if (integral.empty()) integral = "0";
  if (!detail::all_digits(integral) || (!fraction.empty() && !detail::all_digits(fraction))) return std::nullopt;
  if (integral.size() > 15) return std::nullopt;

  std::int64_t cents = std::stoll(integral) * 100;
  if (fraction.size() >= 1) cents += (fraction[0] - '0') * 10;
  if (fraction.size() >= 2) cents += fraction[1] - '0';
  if (fraction.size() >= 3 && fraction[2] >= '5') cents += 1;
  return negative ? -cents : cents;
}

/// ISO "YYYY-MM-DD" (optionally followed by a time part) or "DD/MM/YYYY".
inline std::optional<Date> parse_date(std::string_view text) {
  const std::string_view s = detail::trim(text);
  auto num = [](std::string_view v) -> std::optional<int> {
    if (!detail::all_digits(v)) return std::nullopt;
    int out = 0;
    for (char c : v) out = out * 10 + (c - '0');
    return out;
  };
  std::optional<int> y, m, d;
  if (s.size() >= 10 && s[4] == '-' && s[7] == '-' && (s.size() == 10 || s[10] == 'T' || s[10] == ' ')) {
    y = num(s.substr(0, 4));
    m = num(s.substr(5, 2));
    d = num(s.substr(8, 2));
  } else if (s.size() == 10 && s[2] == '/' && s[5] == '/') {
    d = num(s.substr(0, 2));
    m = num(s.substr(3, 2));
    y = num(s.substr(6, 4));
  }
  if (!y || !m || !d) return std::nullopt;
  const Date date{std::chrono::year{*y}, std::chrono::month{static_cast<unsigned>(*m)},
                  std::chrono::day{static_cast<unsigned>(*d)}};
  if (!date.ok()) return std::nullopt;
  return date;
}

inline std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                static_cast<unsigned>(d.day()));
  return buf;
}

// ---------------------------------------------------------------------------
// parse_records

struct ParseResult {
  std::vector<ExpenseRecord> records;
  std::vector<RowError> errors;  // ordered by row
  std::size_t rows_read = 0;
};

inline ParseResult parse_records(std::istream& in, const Schema& schema) {
  std::vector<std::string> header;
  if (!detail::read_csv_record(in, header)) throw Error(Errc::EmptyInput, "parse_records: no header row");
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);
  for (auto& h : header) h = std::string(detail::trim(h));

  auto locate = [&](const std::string& field) -> std::optional<std::size_t> {
    const std::string col = schema.column(field);
    const auto it = std::find(header.begin(), header.end(), col);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  std::map<std::string, std::size_t> pos;
  for (const char* f : kRequiredFields) {
    const auto p = locate(f);
    if (!p) throw Error(Errc::MissingColumn, "column '" + schema.column(f) + "' (field " + f + ") not in header");
    pos[f] = *p;
  }
  const std::optional<std::size_t> vendor_pos = locate("vendor");

  ParseResult out;
  std::vector<std::string> fields;
  std::size_t row = 0;
  while (detail::read_csv_record(in, fields)) {
    if (fields.size() == 1 && detail::trim(fields[0]).empty()) continue;  // blank line
    ++row;
    auto fail = [&](std::string cause, std::string detail_text) {
      out.errors.push_back({row, std::move(cause), std::move(detail_text)});
    };
    if (fields.size() != header.size()) {
      fail("column-count", std::to_string(fields.size()) + " fields, header has " + std::to_string(header.size()));
      continue;
    }
    auto get = [&](const char* f) { return std::string(detail::trim(fields[pos.at(f)])); };
    ExpenseRecord r;
    r.member_id = get("member_id");
    r.member_name = get("member_name");
    r.party = get("party");
    r.state = get("state");
    r.category = get("category");
    if (vendor_pos) r.vendor = std::string(detail::trim(fields[*vendor_pos]));
    if (r.member_id.empty()) { fail("missing-member-id", ""); continue; }
    if (r.category.empty()) { fail("missing-category", ""); continue; }

    const std::string value_text = get("value");
    if (value_text.empty()) { fail("missing-value", ""); continue; }
    const auto cents = parse_money(value_text);
    if (!cents) { fail("invalid-value", value_text); continue; }
    if (*cents < 0) { fail("negative-value", value_text); continue; }
    r.value = Money{*cents};

    const std::string date_text = get("date");
    if (date_text.empty()) { fail("missing-date", ""); continue; }
    const auto date = parse_date(date_text);
    if (!date) { fail("invalid-date", date_text); continue; }
    r.date = *date;
    out.records.push_back(std::move(r));
  }
  out.rows_read = row;
  if (row == 0) throw Error(Errc::EmptyInput, "parse_records: no data rows");
  return out;
}

// ---------------------------------------------------------------------------
// filter_records

struct Term {
  Date first;
  Date last;  // inclusive
};

inline Term default_term() {
  using namespace std::chrono;
  return {year{2015} / January / 1, year{2018} / December / 31};
}

/// Outcome of filtering; every dropped record is charged to exactly one rule,
/// checked in the order term, missing, category.
struct FilterResult {
  std::vector<ExpenseRecord> records;
  std::size_t dropped_term = 0;
  std::size_t dropped_missing = 0;
  std::size_t dropped_category = 0;
  std::map<std::string, std::size_t> category_counts;  // counted after term/missing filters
  bool empty() const { return records.empty(); }
};

inline bool has_missing_fields(const ExpenseRecord& r) {
  return r.member_id.empty() || r.member_name.empty() || r.party.empty() || r.state.empty() || r.category.empty();
}

inline FilterResult filter_records(std::span<const ExpenseRecord> records, const Term& term,
                                   std::size_t min_category_count) {
  if (min_category_count < 1) throw Error(Errc::InvalidArgument, "filter_records: min_category_count must be >= 1");
  FilterResult out;
  std::vector<const ExpenseRecord*> stage;
  stage.reserve(records.size());
  for (const auto& r : records) {
    if (r.date < term.first || r.date > term.last) {
      ++out.dropped_term;
    } else if (has_missing_fields(r)) {
      ++out.dropped_missing;
    } else {
      stage.push_back(&r);
      ++out.category_counts[r.category];
    }
  }
  for (const ExpenseRecord* r : stage) {
    if (out.category_counts[r->category] >= min_category_count) out.records.push_back(*r);
    else ++out.dropped_category;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

struct MemberKey {
  std::string member_id;
  std::string party;
  std::string state;
  friend auto operator<=>(const MemberKey&, const MemberKey&) = default;
};

struct Vocabulary {
  std::vector<std::string> categories;
  std::vector<MemberKey> members;
  std::vector<std::string> member_names;  // parallel to members
  std::vector<std::string> parties;
  std::vector<std::string> states;

  std::optional<std::size_t> category_index(std::string_view label) const { return find_sorted(categories, label); }
  std::optional<std::size_t> party_index(std::string_view label) const { return find_sorted(parties, label); }
  std::optional<std::size_t> state_index(std::string_view label) const { return find_sorted(states, label); }
  std::optional<std::size_t> member_index(const MemberKey& key) const {
    const auto it = std::lower_bound(members.begin(), members.end(), key);
    if (it == members.end() || *it != key) return std::nullopt;
    return static_cast<std::size_t>(it - members.begin());
  }

 private:
  static std::optional<std::size_t> find_sorted(const std::vector<std::string>& v, std::string_view label) {
    const auto it = std::lower_bound(v.begin(), v.end(), label);
    if (it == v.end() || *it != label) return std::nullopt;
    return static_cast<std::size_t>(it - v.begin());
  }
};

inline MemberKey member_key(const ExpenseRecord& r) { return {r.member_id, r.party, r.state}; }

inline Vocabulary build_vocabulary(std::span<const ExpenseRecord> records) {
  if (records.empty()) throw Error(Errc::EmptyInput, "build_vocabulary: no records");
  auto sorted_unique = [](std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  std::vector<std::string> cats, parties, states;
  std::map<MemberKey, std::string> members;  // key -> smallest name seen
  for (const auto& r : records) {
    cats.push_back(r.category);
    parties.push_back(r.party);
    states.push_back(r.state);
    auto [it, inserted] = members.try_emplace(member_key(r), r.member_name);
    if (!inserted && r.member_name < it->second) it->second = r.member_name;
  }
  Vocabulary v;
  v.categories = sorted_unique(std::move(cats));
  v.parties = sorted_unique(std::move(parties));
  v.states = sorted_unique(std::move(states));
  for (auto& [key, name] : members) {
    v.members.push_back(key);
    v.member_names.push_back(name);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Encoding

enum class BlockKind { OneHot, Scalar };

struct Block {
  std::string name;
  BlockKind kind = BlockKind::OneHot;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Block structure of one side's feature vector.
struct SideLayout {
  std::vector<Block> blocks;

  std::size_t dim() const { return blocks.empty() ? 0 : blocks.back().offset + blocks.back().size; }
  std::size_t count(BlockKind k) const {
    return static_cast<std::size_t>(std::count_if(blocks.begin(), blocks.end(), [k](const Block& b) { return b.kind == k; }));
  }
  /// Entries per sample in EncodedSample::*_real.
  std::size_t scalar_width() const {
    std::size_t w = 0;
    for (const auto& b : blocks)
      if (b.kind == BlockKind::Scalar) w += b.size;
    return w;
  }
  const Block* find(std::string_view name) const {
    for (const auto& b : blocks)
      if (b.name == name) return &b;
    return nullptr;
  }
  void add(std::string name, BlockKind kind, std::size_t size) {
    blocks.push_back({std::move(name), kind, dim(), size});
  }
};

struct Layout {
  SideLayout x;
  SideLayout y;
  bool discrete() const { return x.count(BlockKind::Scalar) == 0 && y.count(BlockKind::Scalar) == 0; }
};

inline Layout expense_layout(const Vocabulary& v) {
  Layout l;
  l.x.add("category", BlockKind::OneHot, v.categories.size());
  l.x.add("log_value", BlockKind::Scalar, 1);
  l.y.add("member", BlockKind::OneHot, v.members.size());
  l.y.add("party", BlockKind::OneHot, v.parties.size());
  l.y.add("state", BlockKind::OneHot, v.states.size());
  return l;
}

/// Index-coded sample: hot[i] is the active label of the i-th one-hot block,
/// real[j] the value of the j-th scalar block, in block order.
struct EncodedSample {
  std::vector<std::uint32_t> x_hot;
  std::vector<double> x_real;
  std::vector<std::uint32_t> y_hot;
  std::vector<double> y_real;
  friend bool operator==(const EncodedSample&, const EncodedSample&) = default;
};

inline void densify(const SideLayout& layout, std::span<const std::uint32_t> hot, std::span<const double> real,
                    Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
  out.setZero();
  std::size_t h = 0, s = 0;
  for (const auto& b : layout.blocks) {
    if (b.kind == BlockKind::OneHot) {
      if (h >= hot.size() || hot[h] >= b.size) throw Error(Errc::ShapeMismatch, "densify: bad one-hot index");
      out(static_cast<Index>(b.offset + hot[h++])) = 1.0;
    } else {
      if (s + b.size > real.size()) throw Error(Errc::ShapeMismatch, "densify: missing scalar");
      for (std::size_t k = 0; k < b.size; ++k) out(static_cast<Index>(b.offset + k)) = real[s++];
    }
  }
}

inline Eigen::RowVectorXd dense_x(const Layout& l, const EncodedSample& s) {
  Eigen::RowVectorXd v(static_cast<Index>(l.x.dim()));
  densify(l.x, s.x_hot, s.x_real, v);
  return v;
}

inline Eigen::RowVectorXd dense_y(const Layout& l, const EncodedSample& s) {
  Eigen::RowVectorXd v(static_cast<Index>(l.y.dim()));
  densify(l.y, s.y_hot, s.y_real, v);
  return v;
}

/// Dense X and Y batches, row i taken from samples[order[i]].
inline std::pair<Matrix, Matrix> dense_batch(const Layout& l, std::span<const EncodedSample> samples,
                                             std::span<const std::size_t> order) {
  const auto n = static_cast<Index>(order.size());
  Matrix bx(n, static_cast<Index>(l.x.dim()));
  Matrix by(n, static_cast<Index>(l.y.dim()));
  for (Index i = 0; i < n; ++i) {
    const EncodedSample& s = samples[order[static_cast<std::size_t>(i)]];
    densify(l.x, s.x_hot, s.x_real, bx.row(i));
    densify(l.y, s.y_hot, s.y_real, by.row(i));
  }
  return {std::move(bx), std::move(by)};
}

/// log(1 + v) standardized with statistics from the training rows.
struct ValueTransform {
  double mu = 0.0;
  double sigma = 1.0;

  double apply(double brl) const { return (std::log1p(brl) - mu) / sigma; }
  double invert(double z) const { return std::expm1(z * sigma + mu); }
};

inline ValueTransform fit_value_transform(std::span<const ExpenseRecord> records) {
  ValueTransform t;
  if (records.empty()) return t;
  double sum = 0.0;
  for (const auto& r : records) sum += std::log1p(r.value.brl());
  t.mu = sum / static_cast<double>(records.size());
  double ss = 0.0;
  for (const auto& r : records) {
    const double d = std::log1p(r.value.brl()) - t.mu;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(records.size()));
  t.sigma = sd > 0.0 ? sd : 1.0;
  return t;
}

inline EncodedSample encode_record(const ExpenseRecord& r, const Vocabulary& v, const ValueTransform& t) {
  const auto cat = v.category_index(r.category);
  if (!cat) throw Error(Errc::UnknownLabel, "category '" + r.category + "'");
  const auto mem = v.member_index(member_key(r));
  if (!mem) throw Error(Errc::UnknownLabel, "member '" + r.member_id + "' (" + r.party + ", " + r.state + ")");
  const auto party = v.party_index(r.party);
  if (!party) throw Error(Errc::UnknownLabel, "party '" + r.party + "'");
  const auto state = v.state_index(r.state);
  if (!state) throw Error(Errc::UnknownLabel, "state '" + r.state + "'");
  EncodedSample s;
  s.x_hot = {static_cast<std::uint32_t>(*cat)};
  s.x_real = {t.apply(r.value.brl())};
  s.y_hot = {static_cast<std::uint32_t>(*mem), static_cast<std::uint32_t>(*party), static_cast<std::uint32_t>(*state)};
  return s;
}

inline std::vector<EncodedSample> encode(std::span<const ExpenseRecord> records, const Vocabulary& v,
                                         const ValueTransform& t) {
  std::vector<EncodedSample> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(encode_record(r, v, t));
  return out;
}

// ---------------------------------------------------------------------------
// Split

/// floor(ratio * n), reading `ratio` as the decimal it was written as
/// (0.7 * 100000 must give 70000, not 69999).
inline std::size_t train_count(std::size_t n, double ratio) {
  const double exact = ratio * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::floor(exact));
  if (static_cast<double>(k + 1) - exact <= 1e-9 * std::max(1.0, exact)) ++k;
  return std::min(k, n);
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

inline SplitIndices split_indices(std::size_t n, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(Errc::InvalidArgument, "split: ratio must lie in (0, 1)");
  const std::vector<std::size_t> perm = permutation(n, seed);
  const std::size_t k = train_count(n, ratio);
  return {std::vector<std::size_t>(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k)),
          std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(k), perm.end())};
}

struct SplitDataset {
  std::vector<EncodedSample> train;
  std::vector<EncodedSample> validation;
  std::uint64_t seed = 0;
  double ratio = 0.7;
  Vocabulary vocab;
  Layout layout;
  ValueTransform transform;
};

inline SplitDataset split(std::span<const EncodedSample> samples, double ratio, std::uint64_t seed) {
  const SplitIndices idx = split_indices(samples.size(), ratio, seed);
  SplitDataset ds;
  ds.seed = seed;
  ds.ratio = ratio;
  ds.train.reserve(idx.train.size());
  ds.validation.reserve(idx.validation.size());
  for (auto i : idx.train) ds.train.push_back(samples[i]);
  for (auto i : idx.validation) ds.validation.push_back(samples[i]);
  return ds;
}

/// Split records, fit the value transform on the training rows, encode both parts.
inline SplitDataset prepare_dataset(std::span<const ExpenseRecord> records, const Vocabulary& vocab, double ratio,
                                    std::uint64_t seed) {
  const SplitIndices idx = split_indices(records.size(), ratio, seed);
  std::vector<ExpenseRecord> train_records;
  train_records.reserve(idx.train.size());
  for (auto i : idx.train) train_records.push_back(records[i]);
  SplitDataset ds;
  ds.seed = seed;
  ds.ratio = ratio;
  ds.vocab = vocab;
  ds.layout = expense_layout(vocab);
  ds.transform = fit_value_transform(train_records);
  ds.train.reserve(idx.train.size());
  ds.validation.reserve(idx.validation.size());
  for (auto i : idx.train) ds.train.push_back(encode_record(records[i], vocab, ds.transform));
  for (auto i : idx.validation) ds.validation.push_back(encode_record(records[i], vocab, ds.transform));
  return ds;
}

}  // namespace nca

#endif  // NCA_INGEST_HPP
