#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "nca/factor_plane.hpp"
#include "nca/render.hpp"
#include "oracles.hpp"

using namespace nca;

namespace {

std::vector<ExpenseRecord> planted_records(std::uint64_t seed) {
  const auto fx = test::make_planted_fixture(seed, 1500);
  std::istringstream is(fx.csv);
  return parse_records(is, {}).records;
}

struct Trained {
  SplitDataset ds;
  FactorModel model;
};

const Trained& trained() {
  static const Trained t = [] {
    const auto records = planted_records(1);
    Trained out;
    out.ds = prepare_dataset(records, build_vocabulary(records), 0.7, 2);
    TrainConfig cfg;
    cfg.d = 3;
    cfg.epochs = 3;
    cfg.batch_size = 128;
    cfg.f_hidden = {16};
    cfg.g_hidden = {16};
    out.model = train(out.ds, cfg);
    return out;
  }();
  return t;
}

FactorPlane toy_plane() {
  FactorPlane p;
  p.axis_ratios = {0.5123, 0.25};
  p.traces.push_back({"Fuel & <Oil>", {0.25, 0.75}, {{1.0, 2.0}, {1.5, 2.5}}});
  p.traces.push_back({"Meals", {0.5}, {{-1.0, 0.5}}});
  p.members.push_back({"M1", "Ana (PA-SP)", {0.1, -0.2}, std::nullopt});
  p.members.push_back({"M2", "Bo", {-0.3, 0.4}, 3});
  p.members.push_back({"M3", "Cy", {0.0, 0.0}, 0});
  return p;
}

}  // namespace

TEST(Quantile, Type7Interpolation) {
  const std::vector<double> v = {1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile(std::vector<double>{7}, 0.3), 7.0);
  EXPECT_THROW(quantile(std::vector<double>{}, 0.5), Error);
  EXPECT_EQ(default_quantiles().size(), 9u);
}

TEST(OutlierScores, DistancesAndOrdering) {
  FactorPlane p;
  p.members.push_back({"a", "a", {0, 0}, std::nullopt});
  p.members.push_back({"b", "b", {3, 4}, std::nullopt});
  p.traces.push_back({"t", {0.1, 0.9}, {{0, 1}, {0, 2}}});
  const OutlierScores s = outlier_scores(p);
  EXPECT_EQ(s.members[0].member_id, "b");
  EXPECT_DOUBLE_EQ(s.members[0].point_score, 5.0);
  EXPECT_DOUBLE_EQ(s.members[1].point_score, 0.0);
  EXPECT_DOUBLE_EQ(s.categories[0].trace_score, 2.0);
  EXPECT_DOUBLE_EQ(s.categories[0].arc_length, 1.0);
}

TEST(OutlierScores, AllAtOriginAndAxisSwap) {
  FactorPlane p;
  p.members.push_back({"a", "a", {0, 0}, std::nullopt});
  p.traces.push_back({"t", {0.5}, {{0, 0}}});
  const OutlierScores s = outlier_scores(p);
  EXPECT_EQ(s.members[0].point_score, 0.0);
  EXPECT_EQ(s.categories[0].trace_score, 0.0);

  FactorPlane q = toy_plane(), swapped = toy_plane();
  for (auto& m : swapped.members) std::swap(m.point.x, m.point.y);
  for (auto& t : swapped.traces)
    for (auto& pt : t.points) std::swap(pt.x, pt.y);
  const OutlierScores a = outlier_scores(q), b = outlier_scores(swapped);
  for (std::size_t i = 0; i < a.members.size(); ++i) EXPECT_EQ(a.members[i].point_score, b.members[i].point_score);
}

TEST(OutlierScores, PermutationEquivariant) {
  FactorPlane p = toy_plane(), r = toy_plane();
  std::reverse(r.members.begin(), r.members.end());
  const OutlierScores a = outlier_scores(p), b = outlier_scores(r);
  std::map<std::string, double> ma, mb;
  for (const auto& m : a.members) ma[m.member_id] = m.point_score;
  for (const auto& m : b.members) mb[m.member_id] = m.point_score;
  EXPECT_EQ(ma, mb);
}

TEST(Spearman, Extremes) {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const std::vector<double> rev = {5, 4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(spearman(a, a), 1.0);
  EXPECT_DOUBLE_EQ(spearman(a, rev), -1.0);
  EXPECT_THROW(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), Error);
  EXPECT_THROW(spearman(a, std::vector<double>{1, 1, 1, 1, 1}), Error);
}

TEST(Spearman, AverageRanks) {
  const std::vector<double> v = {10, 20, 20, 5};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Spearman, EqualsBruteForceExactly) {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 3 + static_cast<std::size_t>(rng.below(120));
    std::vector<double> a(n), b(n);
    const bool ties = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = ties ? static_cast<double>(rng.below(6)) : rng.normal();
      b[i] = static_cast<double>(rng.below(ties ? 4 : 1000));
    }
    double ref = 0.0;
    try {
      ref = test::brute_force_spearman(a, b);
    } catch (const std::invalid_argument&) {
      EXPECT_THROW(spearman(a, b), Error);
      continue;
    }
    EXPECT_EQ(spearman(a, b), ref) << "trial " << trial;
  }
}

TEST(Spearman, RandomPermutationIsWeak) {
  std::vector<double> a(100), b(100);
  for (std::size_t i = 0; i < 100; ++i) a[i] = static_cast<double>(i);
  const auto perm = permutation(100, 5);
  for (std::size_t i = 0; i < 100; ++i) b[i] = static_cast<double>(perm[i]);
  EXPECT_LE(std::abs(spearman(a, b)), 0.25);
  EXPECT_EQ(spearman(a, b), test::brute_force_spearman(a, b));
}

TEST(InvestigationCorrelation, MaxPerMemberAndMissingIgnored) {
  const std::vector<MemberScore> scores = {
      {"a", "", 1.0}, {"a", "", 4.0}, {"b", "", 2.0}, {"c", "", 3.0}, {"z", "", 9.0}};
  const InvestigationTable inv = {{"a", 3}, {"b", 1}, {"c", 2}, {"q", 7}};
  EXPECT_DOUBLE_EQ(investigation_correlation(scores, inv), 1.0);
  EXPECT_EQ(investigation_correlation(scores, inv), test::brute_force_spearman({4.0, 2.0, 3.0}, {3, 1, 2}));
  try {
    investigation_correlation(scores, InvestigationTable{{"a", 1}, {"b", 2}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InsufficientData);
  }
}

TEST(InvestigationCorrelation, ReadCsv) {
  std::istringstream ok("member_id,count\nM1,2\n M2 , 0\n\n");
  const InvestigationTable t = read_investigations(ok);
  EXPECT_EQ(t.at("M1"), 2u);
  EXPECT_EQ(t.at("M2"), 0u);
  std::istringstream bad("member_id,count\nM1,-2\n");
  EXPECT_THROW(read_investigations(bad), Error);
  std::istringstream empty("");
  EXPECT_THROW(read_investigations(empty), Error);
}

TEST(Plane, TracesAndMemberPoints) {
  const Trained& t = trained();
  const auto values = category_train_values(t.ds);
  const std::string cat = t.ds.vocab.categories[0];
  const auto trace = category_trace(t.model, t.ds.vocab, t.ds.transform, cat, default_quantiles(), values[0]);
  ASSERT_EQ(trace.size(), 9u);
  for (const auto& p : trace) EXPECT_TRUE(std::isfinite(p.x) && std::isfinite(p.y));
  const std::vector<double> median = {0.5};
  EXPECT_EQ(category_trace(t.model, t.ds.vocab, t.ds.transform, cat, median, values[0]).size(), 1u);
  EXPECT_EQ(category_trace(t.model, t.ds.vocab, t.ds.transform, cat, median, values[0])[0],
            category_trace(t.model, t.ds.vocab, t.ds.transform, cat, median, values[0])[0]);

  const MemberKey& key = t.ds.vocab.members[2];
  const PlanePoint p = member_point(t.model, t.ds.vocab, key);
  const Vector direct = embed_y(t.model, member_code(t.model, t.ds.vocab, key));
  EXPECT_EQ(p.x, direct(0));
  EXPECT_EQ(p.y, direct(1));
  const PlanePoint p23 = member_point(t.model, t.ds.vocab, key, {2, 3});
  EXPECT_EQ(p23.x, direct(1));
  EXPECT_EQ(p23.y, direct(2));
}

TEST(Plane, Errors) {
  const Trained& t = trained();
  const auto values = category_train_values(t.ds);
  const auto& q = default_quantiles();
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Config;
  };
  EXPECT_EQ(code([&] { category_trace(t.model, t.ds.vocab, t.ds.transform, "Nope", q, values[0]); }), Errc::UnknownLabel);
  EXPECT_EQ(code([&] { category_trace(t.model, t.ds.vocab, t.ds.transform, t.ds.vocab.categories[0], q, {}); }),
            Errc::EmptyValueDistribution);
  const std::vector<double> unsorted = {0.9, 0.1};
  EXPECT_EQ(code([&] { category_trace(t.model, t.ds.vocab, t.ds.transform, t.ds.vocab.categories[0], unsorted, values[0]); }),
            Errc::InvalidArgument);
  EXPECT_EQ(code([&] { member_point(t.model, t.ds.vocab, {"ghost", "PA", "SP"}); }), Errc::UnknownLabel);
  EXPECT_EQ(code([&] { member_point(t.model, t.ds.vocab, t.ds.vocab.members[0], {1, 4}); }), Errc::InvalidArgument);
}

TEST(Plane, BuildWithInvestigations) {
  const Trained& t = trained();
  const InvestigationTable inv = {{"M01", 2}, {"M02", 0}};
  const FactorPlane plane = build_plane(t.model, t.ds, {1, 2}, default_quantiles(), inv);
  EXPECT_EQ(plane.traces.size(), t.ds.vocab.categories.size());
  EXPECT_EQ(plane.members.size(), t.ds.vocab.members.size());
  EXPECT_EQ(plane.axis_ratios.first, t.model.ratios(0));
  std::size_t annotated = 0;
  for (const auto& m : plane.members) annotated += m.investigations.has_value();
  EXPECT_EQ(annotated, 2u);
}

TEST(Render, SvgIsWellFormedWithResolvedReferences) {
  const std::string svg = render_svg(toy_plane());
  const test::SvgCheck c = test::check_svg(svg);
  ASSERT_TRUE(c.well_formed) << c.error;
  EXPECT_EQ(c.root, "svg");
  EXPECT_EQ(c.version, "1.1");
  EXPECT_TRUE(c.references_resolved());
  EXPECT_FALSE(c.references.empty());
  EXPECT_EQ(c.element_counts.at("polyline"), 1u);
  EXPECT_NE(std::find(c.texts.begin(), c.texts.end(), "Factor 1 (51.2%)"), c.texts.end());
  EXPECT_NE(std::find(c.texts.begin(), c.texts.end(), "Factor 2 (25.0%)"), c.texts.end());
  EXPECT_NE(std::find(c.texts.begin(), c.texts.end(), "Fuel & <Oil>"), c.texts.end());
  EXPECT_NE(svg.find("fill=\"#d62728\""), std::string::npos);
}

TEST(Render, RedDotRadiusScalesWithSqrtCount) {
  const std::string svg = render_svg(toy_plane());
  const PlotStyle style;
  const std::string r = "r=\"" + format_fixed(style.investigation_radius * 2.0, 2) + "\"";  // sqrt(3 + 1) = 2
  EXPECT_NE(svg.find(r), std::string::npos);
  const auto investigated = svg.find("<g id=\"investigated\"");
  const auto end = svg.find("</g>", investigated);
  const std::string block = svg.substr(investigated, end - investigated);
  EXPECT_EQ(std::count(block.begin(), block.end(), '\n'), 2);  // header line plus one dot; count 0 stays grey
}

TEST(Render, EmptyPlaneIsValid) {
  const test::SvgCheck c = test::check_svg(render_svg(FactorPlane{}));
  ASSERT_TRUE(c.well_formed) << c.error;
  EXPECT_TRUE(c.references_resolved());
  EXPECT_EQ(c.element_counts.count("polyline"), 0u);
}

TEST(Render, DeterministicAndCsvRoundTrip) {
  const FactorPlane p = toy_plane();
  EXPECT_EQ(render_svg(p), render_svg(p));
  std::istringstream is(render_csv(p));
  const auto rows = read_plane_csv(is);
  ASSERT_EQ(rows.size(), 1u + 3u + 3u);
  EXPECT_EQ(rows[0].kind, "origin");
  EXPECT_EQ(rows[1].label, "Fuel & <Oil>");
  EXPECT_EQ(rows[1].x, 1.0);
  EXPECT_EQ(rows[2].y, 2.5);
  EXPECT_EQ(rows[2].extra, "0.75");
  EXPECT_EQ(rows[5].extra, "3");
  EXPECT_EQ(rows[4].extra, "");
}

TEST(Render, CsvRoundTripIsExactOnTrainedPlane) {
  const Trained& t = trained();
  const FactorPlane plane = build_plane(t.model, t.ds, {1, 2}, default_quantiles());
  std::istringstream is(render_csv(plane));
  const auto rows = read_plane_csv(is);
  std::size_t i = 1;
  for (const auto& tr : plane.traces)
    for (const auto& pt : tr.points) {
      EXPECT_EQ(rows[i].x, pt.x);
      EXPECT_EQ(rows[i].y, pt.y);
      ++i;
    }
  for (const auto& m : plane.members) {
    EXPECT_EQ(rows[i].label, m.member_id);
    EXPECT_EQ(rows[i].x, m.point.x);
    EXPECT_EQ(rows[i].y, m.point.y);
    ++i;
  }
  const test::SvgCheck c = test::check_svg(render_svg(plane));
  EXPECT_TRUE(c.well_formed && c.references_resolved());
}

TEST(Render, WriteFailureIsIoError) {
  try {
    emit_csv(toy_plane(), "/nonexistent-dir/plane.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IoFailure);
  }
}
