#ifndef NCA_COMMANDS_HPP
#define NCA_COMMANDS_HPP

// Pipeline commands behind the `ca` executable. Each returns a process exit
// code: 0 success, 1 config, 2 ingest, 3 training, 4 analysis.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nca/classical_ca.hpp"
#include "nca/config.hpp"
#include "nca/dataset_io.hpp"
#include "nca/error.hpp"
#include "nca/factor_plane.hpp"
#include "nca/ingest.hpp"
#include "nca/neural_ca.hpp"
#include "nca/random.hpp"
#include "nca/render.hpp"
#include "nca/synth.hpp"

namespace nca {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitIngest = 2, kExitTrain = 3, kExitAnalysis = 4 };

// Diagnostics go to stderr. NCA_LOG_LEVEL=quiet|error|info|debug (default info).
enum class LogLevel { Quiet = 0, Error = 1, Info = 2, Debug = 3 };

inline LogLevel log_level() {
  const char* env = std::getenv("NCA_LOG_LEVEL");
  const std::string_view v = env ? env : "";
  if (v == "quiet") return LogLevel::Quiet;
  if (v == "error") return LogLevel::Error;
  if (v == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

inline void log(LogLevel level, const std::string& msg) {
  if (level <= log_level()) std::cerr << "ca: " << msg << '\n';
}

namespace detail {

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline std::vector<double> to_std(const Vector& v) { return {v.begin(), v.end()}; }

inline int fail(int code, const std::string& msg) {
  log(LogLevel::Error, msg);
  return code;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ingest

inline nlohmann::json ingest_report(const ParseResult& parsed, const FilterResult& filtered, std::size_t min_count,
                                    const SplitDataset& ds) {
  std::map<std::string, std::size_t> causes;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : parsed.errors) {
    ++causes[e.cause];
    rows.push_back({{"row", e.row}, {"cause", e.cause}, {"detail", e.detail}});
  }
  nlohmann::json histogram = nlohmann::json::array();
  for (const auto& [label, count] : filtered.category_counts)
    histogram.push_back({{"category", label}, {"count", count}, {"kept", count >= min_count}});
  return {{"rows_read", parsed.rows_read},
          {"parse", {{"records", parsed.records.size()}, {"errors", parsed.errors.size()}, {"causes", causes}, {"rows", rows}}},
          {"filter",
           {{"dropped_term", filtered.dropped_term},
            {"dropped_missing", filtered.dropped_missing},
            {"dropped_category", filtered.dropped_category},
            {"kept", filtered.records.size()},
            {"min_category_count", min_count}}},
          {"category_histogram", histogram},
          {"vocab",
           {{"categories", ds.vocab.categories.size()},
            {"members", ds.vocab.members.size()},
            {"parties", ds.vocab.parties.size()},
            {"states", ds.vocab.states.size()}}},
          {"split", {{"ratio", ds.ratio}, {"n_train", ds.train.size()}, {"n_validation", ds.validation.size()}}}};
}

inline int cmd_ingest(const RunConfig& cfg) {
  const auto& input = cfg.paths.input;
  if (input.empty()) return detail::fail(kExitConfig, "paths.input is not set");
  std::ifstream in(input, std::ios::binary);
  if (!in) return detail::fail(kExitIngest, "cannot open input " + input.string());
  try {
    ParseResult parsed = parse_records(in, cfg.schema);
    for (std::size_t i = 0; i < parsed.errors.size() && i < 10; ++i) {
      const auto& e = parsed.errors[i];
      log(LogLevel::Info, input.string() + ": row " + std::to_string(e.row) + ": " + e.cause +
                              (e.detail.empty() ? "" : " (" + e.detail + ")"));
    }
    if (parsed.errors.size() > 10)
      log(LogLevel::Info, std::to_string(parsed.errors.size() - 10) + " more row errors in the report");

    FilterResult filtered = filter_records(parsed.records, cfg.ingest.term, cfg.ingest.min_category_count);
    if (filtered.empty()) return detail::fail(kExitIngest, input.string() + ": no records survive filtering");
    const Vocabulary vocab = build_vocabulary(filtered.records);
    const SplitDataset ds =
        prepare_dataset(filtered.records, vocab, cfg.ingest.split_ratio, derive_seed(cfg.seed, "ingest-split"));

    std::filesystem::create_directories(cfg.paths.out);
    const auto sidecar = cfg.paths.dataset_path();
    write_dataset(ds, sidecar.parent_path(), sidecar.stem().string());
    detail::write_json(cfg.paths.out / "ingest_report.json",
                       ingest_report(parsed, filtered, cfg.ingest.min_category_count, ds));
    log(LogLevel::Info, "ingest: " + std::to_string(filtered.records.size()) + " records, " +
                            std::to_string(vocab.categories.size()) + " categories, " +
                            std::to_string(vocab.members.size()) + " members");
    return kExitOk;
  } catch (const Error& e) {
    return detail::fail(kExitIngest, input.string() + ": " + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return detail::fail(kExitIngest, e.what());
  }
}

// ---------------------------------------------------------------------------
// train

inline int cmd_train(const RunConfig& cfg) {
  const auto sidecar = cfg.paths.dataset_path();
  try {
    const SplitDataset ds = read_dataset(sidecar);
    std::filesystem::create_directories(cfg.paths.out);
    const auto history_path = cfg.paths.out / "history.jsonl";
    std::ofstream history(history_path, std::ios::trunc);
    if (!history) throw Error(Errc::IoFailure, "cannot write " + history_path.string());
    const FactorModel model = train(ds, cfg.train, [&](const EpochRecord& r) {
      history << epoch_json(r).dump() << '\n' << std::flush;
      log(LogLevel::Info, "epoch " + std::to_string(r.epoch) + " train_loss " + format_double(r.train_loss) +
                              " val_loss " + format_double(r.val_loss));
    });
    const auto model_path = cfg.paths.model_path();
    if (model_path.has_parent_path()) std::filesystem::create_directories(model_path.parent_path());
    save_model(model, model_path);
    std::string lambda;
    for (Index k = 0; k < model.factor_scores.size(); ++k) lambda += (k ? " " : "") + format_fixed(model.factor_scores(k), 6);
    log(LogLevel::Info, "train: factor scores " + lambda);
    return kExitOk;
  } catch (const Error& e) {
    return detail::fail(kExitTrain, std::string("train: ") + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return detail::fail(kExitTrain, e.what());
  }
}

// ---------------------------------------------------------------------------
// analyze

inline nlohmann::json outlier_report(const FactorModel& model, const FactorPlane& plane, const OutlierScores& scores,
                                     const std::optional<InvestigationTable>& inv) {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : scores.categories)
    cats.push_back({{"label", c.label}, {"trace_score", c.trace_score}, {"arc_length", c.arc_length}});
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : scores.members) {
    nlohmann::json j = {{"member_id", m.member_id}, {"label", m.label}, {"point_score", m.point_score}};
    if (inv) {
      const auto it = inv->find(m.member_id);
      j["investigations"] = it == inv->end() ? nlohmann::json(nullptr) : nlohmann::json(it->second);
    }
    members.push_back(std::move(j));
  }
  nlohmann::json report = {{"axes", {plane.axes.first, plane.axes.second}},
                           {"axis_ratios", {plane.axis_ratios.first, plane.axis_ratios.second}},
                           {"factor_scores", detail::to_std(model.factor_scores)},
                           {"ratios", detail::to_std(model.ratios)},
                           {"categories", cats},
                           {"members", members}};
  if (inv) {
    try {
      report["investigation_correlation"] = investigation_correlation(scores.members, *inv);
    } catch (const Error& e) {
      report["investigation_correlation"] = nullptr;
      report["investigation_correlation_error"] = e.what();
    }
  }
  return report;
}

inline int cmd_analyze(const RunConfig& cfg) {
  const auto model_path = cfg.paths.model_path();
  if (!std::filesystem::exists(model_path)) return detail::fail(kExitAnalysis, "model not found: " + model_path.string());
  try {
    const FactorModel model = load_model(model_path);
    const SplitDataset ds = read_dataset(cfg.paths.dataset_path());
    std::optional<InvestigationTable> inv;
    if (cfg.paths.investigations) {
      std::ifstream is(*cfg.paths.investigations);
      if (!is) throw Error(Errc::IoFailure, "cannot open investigations " + cfg.paths.investigations->string());
      inv = read_investigations(is);
    }
    const FactorPlane plane = build_plane(model, ds, cfg.plane.axes, cfg.plane.quantiles, inv ? *inv : InvestigationTable{});
    const OutlierScores scores = outlier_scores(plane);

    std::filesystem::create_directories(cfg.paths.out);
    PlotStyle style;
    style.width = cfg.plane.width;
    style.height = cfg.plane.height;
    emit_svg(plane, style, cfg.paths.out / "plane.svg");
    emit_csv(plane, cfg.paths.out / "plane.csv");
    detail::write_json(cfg.paths.out / "outliers.json", outlier_report(model, plane, scores, inv));
    if (!scores.categories.empty())
      log(LogLevel::Info, "analyze: top category " + scores.categories.front().label + " (score " +
                              format_fixed(scores.categories.front().trace_score, 4) + ")");
    return kExitOk;
  } catch (const Error& e) {
    return detail::fail(kExitAnalysis, std::string("analyze: ") + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return detail::fail(kExitAnalysis, e.what());
  }
}

// ---------------------------------------------------------------------------
// synth

inline int cmd_synth(const RunConfig& cfg) {
  const std::uint64_t seed = derive_seed(cfg.seed, "synth");
  Matrix joint;
  try {
    joint = cfg.synth.joint.empty() ? random_joint(cfg.synth.rows, cfg.synth.cols, seed) : parse_joint(cfg.synth.joint);
  } catch (const Error& e) {
    return detail::fail(kExitConfig, std::string("synth.joint: ") + e.what());
  }
  try {
    const auto card_x = static_cast<std::size_t>(joint.rows());
    const auto card_y = static_cast<std::size_t>(joint.cols());
    const auto pairs = sample_joint(joint, cfg.synth.n, derive_seed(seed, "sample"));
    const SplitDataset ds =
        discrete_dataset(pairs, card_x, card_y, cfg.synth.split_ratio, derive_seed(cfg.seed, "ingest-split"));

    std::filesystem::create_directories(cfg.paths.out);
    std::ostringstream csv;
    csv << "x,y\n";
    for (const auto& [i, j] : pairs) csv << ds.vocab.categories[i] << ',' << ds.vocab.members[j].member_id << '\n';
    write_text(cfg.paths.out / "samples.csv", csv.str());

    const CAResult exact = ca_from_table(table_from_joint(joint));
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < joint.rows(); ++i) rows.push_back(detail::to_std(joint.row(i).transpose()));
    nlohmann::json truth = ca_summary_json(exact);
    truth["joint"] = rows;
    truth["n"] = cfg.synth.n;
    truth["seed"] = cfg.seed;
    const PrunedTable empirical = prune_zero_marginals(build_contingency(pairs, card_x, card_y));
    truth["empirical"] = ca_summary_json(ca_from_table(empirical.table));
    detail::write_json(cfg.paths.out / "ground_truth.json", truth);

    const auto sidecar = cfg.paths.dataset_path();
    write_dataset(ds, sidecar.parent_path(), sidecar.stem().string());
    log(LogLevel::Info, "synth: " + std::to_string(pairs.size()) + " samples from a " + std::to_string(card_x) + "x" +
                            std::to_string(card_y) + " joint");
    return kExitOk;
  } catch (const Error& e) {
    return detail::fail(kExitConfig, std::string("synth: ") + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return detail::fail(kExitConfig, e.what());
  }
}

// ---------------------------------------------------------------------------
// compare-oracle

inline nlohmann::json oracle_comparison(const Vector& oracle, const Vector& neural) {
  nlohmann::json factors = nlohmann::json::array();
  double max_delta = 0.0;
  const Index k = std::max(oracle.size(), neural.size());
  for (Index i = 0; i < k; ++i) {
    const double o = i < oracle.size() ? oracle(i) : 0.0;
    const double n = i < neural.size() ? neural(i) : 0.0;
    const double delta = std::abs(o - n);
    if (i < 2) max_delta = std::max(max_delta, delta);
    factors.push_back({{"factor", i + 1}, {"oracle", o}, {"neural", n}, {"abs_delta", delta}});
  }
  return {{"oracle_factor_scores", detail::to_std(oracle)},
          {"neural_factor_scores", detail::to_std(neural)},
          {"factors", factors},
          {"max_abs_delta_top2", max_delta}};
}

inline int cmd_compare_oracle(const RunConfig& cfg) {
  try {
    const SplitDataset ds = read_dataset(cfg.paths.dataset_path());
    const auto model_path = cfg.paths.model_path();
    if (!std::filesystem::exists(model_path)) return detail::fail(kExitAnalysis, "model not found: " + model_path.string());
    const FactorModel model = load_model(model_path);
    std::size_t card_x = 0, card_y = 0;
    const auto pairs = discrete_pairs(ds.layout, ds.train, card_x, card_y);
    const PrunedTable t = prune_zero_marginals(build_contingency(pairs, card_x, card_y));
    const CAResult oracle = ca_from_table(t.table);
    nlohmann::json report = oracle_comparison(oracle.factor_scores, model.factor_scores);
    report["samples"] = pairs.size();
    std::filesystem::create_directories(cfg.paths.out);
    detail::write_json(cfg.paths.out / "compare.json", report);
    log(LogLevel::Info, "compare-oracle: max |delta lambda| over top 2 = " +
                            format_fixed(report["max_abs_delta_top2"].get<double>(), 6));
    return kExitOk;
  } catch (const Error& e) {
    return detail::fail(kExitAnalysis, std::string("compare-oracle: ") + e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return detail::fail(kExitAnalysis, e.what());
  }
}

}  // namespace nca

#endif  // NCA_COMMANDS_HPP
