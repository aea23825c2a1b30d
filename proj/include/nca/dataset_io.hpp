#ifndef NCA_DATASET_IO_HPP
#define NCA_DATASET_IO_HPP

// Encoded dataset on disk: an index-coded binary row file plus a JSON sidecar
// holding vocabulary, block layout and the value transform.
//
// Binary layout (little-endian):
//   char[8]  "NCADSET1"
//   u64      n_train, n_validation
//   u32      x_hot, x_real, y_hot, y_real   (entries per row)
//   rows     train rows then validation rows; each row is
//            u32[x_hot] f64[x_real] u32[y_hot] f64[y_real]

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nca/error.hpp"
#include "nca/ingest.hpp"

namespace nca {

namespace detail {

inline constexpr std::array<char, 8> kDatasetMagic = {'N', 'C', 'A', 'D', 'S', 'E', 'T', '1'};

template <class U>
void put_le(std::ostream& os, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof b);
}

template <class U>
U get_le(std::istream& is) {
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof b)) throw Error(Errc::IoFailure, "dataset: truncated binary file");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(b[i]) << (8 * i));
  return v;
}

inline void put_f64(std::ostream& os, double d) { put_le(os, std::bit_cast<std::uint64_t>(d)); }
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_le<std::uint64_t>(is)); }

inline const char* kind_name(BlockKind k) { return k == BlockKind::OneHot ? "onehot" : "scalar"; }

inline BlockKind kind_from(const std::string& s) {
  if (s == "onehot") return BlockKind::OneHot;
  if (s == "scalar") return BlockKind::Scalar;
  throw Error(Errc::IoFailure, "dataset: unknown block kind '" + s + "'");
}

}  // namespace detail

inline nlohmann::json side_layout_json(const SideLayout& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& b : s.blocks)
    arr.push_back({{"name", b.name}, {"kind", detail::kind_name(b.kind)}, {"offset", b.offset}, {"size", b.size}});
  return arr;
}

inline SideLayout side_layout_from(const nlohmann::json& arr) {
  SideLayout s;
  for (const auto& b : arr) {
    s.add(b.at("name").get<std::string>(), detail::kind_from(b.at("kind").get<std::string>()),
          b.at("size").get<std::size_t>());
    if (s.blocks.back().offset != b.at("offset").get<std::size_t>())
      throw Error(Errc::IoFailure, "dataset: non-contiguous block offsets");
  }
  return s;
}

inline nlohmann::json vocabulary_json(const Vocabulary& v) {
  nlohmann::json members = nlohmann::json::array();
  for (std::size_t i = 0; i < v.members.size(); ++i)
    members.push_back({{"member_id", v.members[i].member_id},
                       {"party", v.members[i].party},
                       {"state", v.members[i].state},
                       {"name", v.member_names[i]}});
  return {{"categories", v.categories}, {"members", members}, {"parties", v.parties}, {"states", v.states}};
}

inline Vocabulary vocabulary_from(const nlohmann::json& j) {
  Vocabulary v;
  v.categories = j.at("categories").get<std::vector<std::string>>();
  v.parties = j.at("parties").get<std::vector<std::string>>();
  v.states = j.at("states").get<std::vector<std::string>>();
  for (const auto& m : j.at("members")) {
    v.members.push_back({m.at("member_id").get<std::string>(), m.at("party").get<std::string>(),
                         m.at("state").get<std::string>()});
    v.member_names.push_back(m.at("name").get<std::string>());
  }
  return v;
}

inline nlohmann::json dataset_sidecar(const SplitDataset& ds, const std::string& binary_name) {
  const auto& l = ds.layout;
  return {{"format", "nca-dataset"},
          {"version", 1},
          {"binary", binary_name},
          {"seed", ds.seed},
          {"ratio", ds.ratio},
          {"n_train", ds.train.size()},
          {"n_validation", ds.validation.size()},
          {"transform", {{"kind", "log1p-standardize"}, {"mu", ds.transform.mu}, {"sigma", ds.transform.sigma}}},
          {"layout", {{"x", side_layout_json(l.x)}, {"y", side_layout_json(l.y)}}},
          {"vocab", vocabulary_json(ds.vocab)}};
}

/// Writes `<stem>.bin` and `<stem>.json` into `dir`.
inline void write_dataset(const SplitDataset& ds, const std::filesystem::path& dir, const std::string& stem = "dataset") {
  if (!dir.empty()) std::filesystem::create_directories(dir);
  const std::string bin_name = stem + ".bin";
  {
    std::ofstream os(dir / bin_name, std::ios::binary | std::ios::trunc);
    if (!os) throw Error(Errc::IoFailure, "cannot write " + (dir / bin_name).string());
    os.write(detail::kDatasetMagic.data(), 8);
    detail::put_le<std::uint64_t>(os, ds.train.size());
    detail::put_le<std::uint64_t>(os, ds.validation.size());
    const auto& l = ds.layout;
    const auto xh = static_cast<std::uint32_t>(l.x.count(BlockKind::OneHot));
    const auto xr = static_cast<std::uint32_t>(l.x.scalar_width());
    const auto yh = static_cast<std::uint32_t>(l.y.count(BlockKind::OneHot));
    const auto yr = static_cast<std::uint32_t>(l.y.scalar_width());
    for (auto c : {xh, xr, yh, yr}) detail::put_le<std::uint32_t>(os, c);
    auto row = [&](const EncodedSample& s) {
      if (s.x_hot.size() != xh || s.x_real.size() != xr || s.y_hot.size() != yh || s.y_real.size() != yr)
        throw Error(Errc::ShapeMismatch, "write_dataset: sample does not match layout");
      for (auto v : s.x_hot) detail::put_le<std::uint32_t>(os, v);
      for (auto v : s.x_real) detail::put_f64(os, v);
      for (auto v : s.y_hot) detail::put_le<std::uint32_t>(os, v);
      for (auto v : s.y_real) detail::put_f64(os, v);
    };
    for (const auto& s : ds.train) row(s);
    for (const auto& s : ds.validation) row(s);
    if (!os) throw Error(Errc::IoFailure, "write failed: " + (dir / bin_name).string());
  }
  std::ofstream js(dir / (stem + ".json"), std::ios::trunc);
  if (!js) throw Error(Errc::IoFailure, "cannot write " + (dir / (stem + ".json")).string());
  js << dataset_sidecar(ds, bin_name).dump(2) << '\n';
}

/// Reads a dataset from its JSON sidecar path.
inline SplitDataset read_dataset(const std::filesystem::path& sidecar) {
  std::ifstream js(sidecar);
  if (!js) throw Error(Errc::IoFailure, "cannot open " + sidecar.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::IoFailure, sidecar.string() + ": " + e.what());
  }
  if (meta.value("format", "") != "nca-dataset" || meta.value("version", 0) != 1)
    throw Error(Errc::IoFailure, sidecar.string() + ": not an nca-dataset v1 sidecar");
  SplitDataset ds;
  ds.seed = meta.at("seed").get<std::uint64_t>();
  ds.ratio = meta.at("ratio").get<double>();
  ds.transform.mu = meta.at("transform").at("mu").get<double>();
  ds.transform.sigma = meta.at("transform").at("sigma").get<double>();
  ds.layout.x = side_layout_from(meta.at("layout").at("x"));
  ds.layout.y = side_layout_from(meta.at("layout").at("y"));
  ds.vocab = vocabulary_from(meta.at("vocab"));

  const auto bin_path = sidecar.parent_path() / meta.at("binary").get<std::string>();
  std::ifstream is(bin_path, std::ios::binary);
  if (!is) throw Error(Errc::IoFailure, "cannot open " + bin_path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), 8) || magic != detail::kDatasetMagic)
    throw Error(Errc::IoFailure, bin_path.string() + ": bad magic");
  const auto n_train = detail::get_le<std::uint64_t>(is);
  const auto n_val = detail::get_le<std::uint64_t>(is);
  const auto xh = detail::get_le<std::uint32_t>(is);
  const auto xr = detail::get_le<std::uint32_t>(is);
  const auto yh = detail::get_le<std::uint32_t>(is);
  const auto yr = detail::get_le<std::uint32_t>(is);
  if (xh != ds.layout.x.count(BlockKind::OneHot) || yh != ds.layout.y.count(BlockKind::OneHot) ||
      xr != ds.layout.x.scalar_width() || yr != ds.layout.y.scalar_width())
    throw Error(Errc::IoFailure, bin_path.string() + ": row shape disagrees with sidecar layout");
  auto row = [&] {
    EncodedSample s;
    s.x_hot.resize(xh);
    s.x_real.resize(xr);
    s.y_hot.resize(yh);
    s.y_real.resize(yr);
    for (auto& v : s.x_hot) v = detail::get_le<std::uint32_t>(is);
    for (auto& v : s.x_real) v = detail::get_f64(is);
    for (auto& v : s.y_hot) v = detail::get_le<std::uint32_t>(is);
    for (auto& v : s.y_real) v = detail::get_f64(is);
    return s;
  };
  ds.train.reserve(n_train);
  ds.validation.reserve(n_val);
  for (std::uint64_t i = 0; i < n_train; ++i) ds.train.push_back(row());
  for (std::uint64_t i = 0; i < n_val; ++i) ds.validation.push_back(row());
  if (ds.train.size() != meta.at("n_train").get<std::size_t>() ||
      ds.validation.size() != meta.at("n_validation").get<std::size_t>())
    throw Error(Errc::IoFailure, "dataset: sample counts disagree with sidecar");
  return ds;
}

}  // namespace nca

#endif  // NCA_DATASET_IO_HPP
