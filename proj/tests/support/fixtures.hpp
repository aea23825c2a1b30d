#ifndef NCA_TEST_FIXTURES_HPP
#define NCA_TEST_FIXTURES_HPP

// Temporary directories, process helpers and generated expense fixtures.

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nca/random.hpp"

namespace nca::test {

namespace fs = std::filesystem;

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("nca-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    if (!std::getenv("NCA_KEEP_TEMP")) fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os << text;
}

/// Runs the `ca` binary quietly and returns its exit status.
inline int run_ca(const std::string& args) {
  const std::string cmd = std::string("NCA_LOG_LEVEL=quiet '") + NCA_CA_BINARY + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Runs `ca` and captures stderr.
inline int run_ca_capture(const std::string& args, std::string& err) {
  const TempDir tmp("err");
  const fs::path log = tmp / "stderr.txt";
  const std::string cmd = std::string("NCA_LOG_LEVEL=error '") + NCA_CA_BINARY + "' " + args + " >/dev/null 2>'" +
                          log.string() + "'";
  const int status = std::system(cmd.c_str());
  err = read_file(log);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline const char* kExpenseHeader = "member_id,member_name,party,state,category,value,date,vendor\n";

struct ExpenseRowSpec {
  std::string member_id, name, party, state, category, value, date, vendor;
};

inline std::string expense_line(const ExpenseRowSpec& r) {
  auto q = [](const std::string& s) {
    return s.find_first_of(",\"") == std::string::npos ? s : "\"" + s + "\"";
  };
  return q(r.member_id) + "," + q(r.name) + "," + q(r.party) + "," + q(r.state) + "," + q(r.category) + "," +
         q(r.value) + "," + q(r.date) + "," + q(r.vendor) + "\n";
}

/// BRL amount rendered either as "1234.56" or in Brazilian form "1.234,56".
inline std::string money_text(long long cents, bool brazilian) {
  const long long whole = cents / 100, frac = cents % 100;
  char fr[4];
  std::snprintf(fr, sizeof fr, "%02lld", frac);
  if (!brazilian) return std::to_string(whole) + "." + fr;
  std::string digits = std::to_string(whole), grouped;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) grouped += '.';
    grouped += digits[i];
  }
  return grouped + "," + fr;
}

inline std::string date_text(int y, int m, int d, bool iso) {
  char buf[16];
  if (iso) std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", y, m, d);
  else std::snprintf(buf, sizeof buf, "%02d/%02d/%04d", d, m, y);
  return buf;
}

// ---------------------------------------------------------------------------
// Ingest fixture: 1000 rows with planted defects and known per-stage counts.

struct IngestTruth {
  std::size_t rows = 0;
  std::map<std::string, std::size_t> parse_causes;
  std::size_t parse_errors = 0;
  std::size_t dropped_term = 0;
  std::size_t dropped_missing = 0;
  std::size_t dropped_category = 0;
  std::size_t kept = 0;
  std::size_t min_category_count = 20;
  std::map<std::string, std::size_t> kept_per_category;
  std::size_t members = 0;  // distinct (id, party, state) among kept rows
};

struct IngestFixture {
  std::string csv;
  IngestTruth truth;
};

inline IngestFixture make_ingest_fixture(std::uint64_t seed) {
  Rng rng(seed);
  const std::vector<std::string> cats = {"Airfare", "Fuel", "Meals", "Office", "Telephone"};
  struct Member {
    std::string id, name, party, state;
  };
  std::vector<Member> members;
  const char* parties[] = {"PA", "PB", "PC", "PD"};
  const char* states[] = {"SP", "RJ", "MG", "DF", "BA"};
  for (int i = 0; i < 12; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "D%02d", i + 1);
    members.push_back({id, std::string("Member ") + id, parties[i % 4], states[i % 5]});
  }
  members.push_back({"D01", "Member D01", "PC", "SP"});  // party switch: a second triple

  auto valid_row = [&](const std::string& category, int year) {
    const Member& m = members[rng.below(members.size())];
    const long long cents = 100 + static_cast<long long>(rng.below(500000));
    const int month = 1 + static_cast<int>(rng.below(12)), day = 1 + static_cast<int>(rng.below(28));
    return ExpenseRowSpec{m.id, m.name, m.party, m.state, category,
                          money_text(cents, rng.below(2) == 0), date_text(year, month, day, rng.below(2) == 0),
                          "Vendor " + std::to_string(rng.below(40))};
  };

  IngestFixture fx;
  IngestTruth& t = fx.truth;
  std::vector<ExpenseRowSpec> rows;
  auto add_error = [&](ExpenseRowSpec r, const std::string& cause) {
    rows.push_back(std::move(r));
    ++t.parse_causes[cause];
    ++t.parse_errors;
  };
  for (int i = 0; i < 4; ++i) {
    auto r = valid_row(cats[i % 5], 2016);
    r.value = "-" + r.value;
    add_error(r, "negative-value");
  }
  for (int i = 0; i < 3; ++i) {
    auto r = valid_row(cats[i % 5], 2016);
    r.date = i == 0 ? "2016-02-30" : i == 1 ? "31/13/2016" : "yesterday";
    add_error(r, "invalid-date");
  }
  for (int i = 0; i < 3; ++i) {
    auto r = valid_row("", 2016);
    add_error(r, "missing-category");
  }
  for (int i = 0; i < 2; ++i) {
    auto r = valid_row(cats[i], 2016);
    r.value = i == 0 ? "abc" : "12,3,4";
    add_error(r, "invalid-value");
  }
  for (int i = 0; i < 60; ++i) rows.push_back(valid_row(cats[i % 5], i % 2 ? 2014 : 2019));
  t.dropped_term = 60;
  for (int i = 0; i < 25; ++i) {
    auto r = valid_row(cats[i % 5], 2017);
    if (i % 3 == 0) r.party.clear();
    else if (i % 3 == 1) r.state.clear();
    else r.name.clear();
    rows.push_back(r);
  }
  t.dropped_missing = 25;
  for (int i = 0; i < 15; ++i) rows.push_back(valid_row("Rare", 2018));
  t.dropped_category = 15;

  std::map<std::string, bool> triples;
  const std::size_t valid = 1000 - rows.size();
  for (std::size_t i = 0; i < valid; ++i) {
    const std::string& c = cats[i % cats.size()];
    auto r = valid_row(c, 2015 + static_cast<int>(i % 4));
    triples[r.member_id + "|" + r.party + "|" + r.state] = true;
    ++t.kept_per_category[c];
    rows.push_back(r);
  }
  t.kept = valid;
  t.members = triples.size();
  t.rows = rows.size();

  rng.shuffle(std::span<ExpenseRowSpec>(rows));
  fx.csv = kExpenseHeader;
  for (const auto& r : rows) fx.csv += expense_line(r);
  return fx;
}

// ---------------------------------------------------------------------------
// Planted-dependence fixture: one category is spent almost only by a block of
// members. The other categories carry a weaker, diffuse preference (half of
// their rows lean towards one half of the members) so that the second factor
// is not pure noise.

struct PlantedFixture {
  std::string csv;
  std::string planted_category;
  std::vector<std::string> block_members;
  std::string investigations_csv;
};

inline PlantedFixture make_planted_fixture(std::uint64_t seed, std::size_t n_rows = 4000) {
  Rng rng(seed);
  const std::vector<std::string> cats = {"Airfare", "Fuel", "Lodging", "Meals", "Office", "Postage"};
  PlantedFixture fx;
  const std::size_t planted = static_cast<std::size_t>(rng.below(cats.size()));
  fx.planted_category = cats[planted];
  const char* parties[] = {"PA", "PB", "PC", "PD"};
  const char* states[] = {"SP", "RJ", "MG", "BA", "DF"};
  const std::size_t n_members = 20;
  std::vector<ExpenseRowSpec> people;
  for (std::size_t i = 0; i < n_members; ++i) {
    char id[8];
    std::snprintf(id, sizeof id, "M%02zu", i + 1);
    people.push_back({id, std::string("Member ") + id, parties[i % 4], states[i % 5], "", "", "", ""});
  }
  for (std::size_t i = 0; i < 3; ++i) fx.block_members.push_back(people[i].member_id);

  fx.csv = kExpenseHeader;
  for (std::size_t k = 0; k < n_rows; ++k) {
    const std::size_t c = static_cast<std::size_t>(rng.below(cats.size()));
    std::size_t who;
    if (c == planted && rng.uniform() < 0.9) {
      who = static_cast<std::size_t>(rng.below(3));
    } else if (c != planted && rng.uniform() < 0.5) {
      const std::size_t half = (c + (c > planted ? 1 : 0)) % 2;  // alternate over the non-planted categories
      who = 3 + half * 8 + static_cast<std::size_t>(rng.below(8));
    } else {
      who = static_cast<std::size_t>(rng.below(n_members));
    }
    ExpenseRowSpec r = people[who];
    r.category = cats[c];
    const double v = std::exp(5.0 + 1.0 * rng.normal());
    r.value = money_text(static_cast<long long>(std::llround(v * 100.0)), false);
    r.date = date_text(2016, 1 + static_cast<int>(rng.below(12)), 1 + static_cast<int>(rng.below(28)), true);
    r.vendor = "V";
    fx.csv += expense_line(r);
  }
  fx.investigations_csv = "member_id,count\n";
  for (std::size_t i = 0; i < n_members; ++i)
    fx.investigations_csv += people[i].member_id + "," + std::to_string(i < 3 ? 3 - i : i % 2) + "\n";
  return fx;
}

inline std::string planted_config(const fs::path& input, const fs::path& investigations, std::uint64_t seed) {
  return "[paths]\ninput = " + input.string() + "\nout = out\ninvestigations = " + investigations.string() +
         "\n\n[ingest]\nmin_category_count = 1\n\n[train]\nd = 2\nepochs = 20\nbatch_size = 128\n"
         "f_hidden = 64,32\ng_hidden = 64,32\n\n[run]\nseed = " +
         std::to_string(seed) + "\n";
}

}  // namespace nca::test

#endif  // NCA_TEST_FIXTURES_HPP
