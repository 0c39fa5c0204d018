#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "paris/data.hpp"
#include "support/oracles.hpp"

namespace {

using namespace paris::data;
using paris::linalg::DenseMatrix;
using paris::linalg::Vector;

CsvSchema two_feature_schema() {
  CsvSchema s;
  s.group_column = "storm";
  s.target_column = "dst";
  s.feature_columns = {"a", "b"};
  return s;
}

TimeSeriesTable parse(const std::string& text, const CsvSchema& schema) {
  std::istringstream in(text);
  return parse_csv(in, schema);
}

// -- CSV ---------------------------------------------------------------------

TEST(Csv, EightFeaturesSixHistoryGiveFortyEightInputs) {
  CsvSchema s;
  s.group_column = "g";
  s.target_column = "y";
  std::ostringstream text;
  text << "g,y";
  for (int f = 0; f < 8; ++f) {
    s.feature_columns.push_back("f" + std::to_string(f));
    text << ",f" << f;
  }
  text << '\n';
  for (int t = 0; t < 12; ++t) {
    text << "1," << t;
    for (int f = 0; f < 8; ++f) text << ',' << t * 10 + f;
    text << '\n';
  }
  auto table = parse(text.str(), s);
  auto w = make_windows(table, WindowSpec{6, 1});
  EXPECT_EQ(w.dataset.input_dim(), 48u);
  EXPECT_EQ(w.dataset.size(), 12u - 7 + 1);
  EXPECT_EQ(w.dataset.input_names.front(), "f0[t-5]");
  EXPECT_EQ(w.dataset.input_names.back(), "f7[t]");
}

TEST(Csv, UnparseableRowIsCountedAndSkipped) {
  auto t = parse("storm,dst,a,b\n1,-5,1,2\n1,oops,1,2\n1,-7,3,4\n", two_feature_schema());
  EXPECT_EQ(t.rows_read, 3u);
  EXPECT_EQ(t.rows_kept, 2u);
  EXPECT_EQ(t.unparseable_rows, 1u);
  ASSERT_EQ(t.unparseable_lines.size(), 1u);
  EXPECT_EQ(t.unparseable_lines[0], 3u);
}

TEST(Csv, StrictModeThrowsOnFirstBadRow) {
  auto s = two_feature_schema();
  s.strict = true;
  try {
    parse("storm,dst,a,b\n1,-5,1,2\n1,-6,x,2\n", s);
    FAIL();
  } catch (const UnparseableRow& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Csv, EmptyFileThrows) {
  EXPECT_THROW(parse("", two_feature_schema()), EmptyGroup);
  EXPECT_THROW(parse("storm,dst,a,b\n", two_feature_schema()), EmptyGroup);
}

TEST(Csv, MissingColumnIsNamed) {
  try {
    parse("storm,dst,a\n1,2,3\n", two_feature_schema());
    FAIL();
  } catch (const MissingColumn& e) {
    EXPECT_EQ(e.name(), "b");
  }
}

TEST(Csv, MissingTokensAndSentinelsDropRows) {
  auto s = two_feature_schema();
  s.sentinel_thresholds["a"] = 999.0;
  auto t = parse("storm,dst,a,b\n1,-5,1,2\n1,-6,999.9,2\n1,-7,1,NaN\n1,-8,1,\n1,-9,1,2\n", s);
  EXPECT_EQ(t.rows_kept, 2u);
  EXPECT_EQ(t.missing_rows, 3u);
  ASSERT_EQ(t.groups.size(), 1u);
  // The dropped rows split the series into two segments.
  EXPECT_EQ(t.groups[0].segments.size(), 2u);
}

TEST(Csv, GroupsKeepFirstAppearanceOrder) {
  auto t = parse("dst,storm,b,a\n1,7,0,0\n2,7,0,0\n3,3,0,0\n", two_feature_schema());
  ASSERT_EQ(t.groups.size(), 2u);
  EXPECT_EQ(t.groups[0].id, 7);
  EXPECT_EQ(t.groups[1].id, 3);
}

TEST(Csv, ReadsFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "paris_test_ingest.csv";
  {
    std::ofstream f(path);
    f << "storm,dst,a,b\n2,-1,0.5,0.25\n";
  }
  auto t = ingest_csv(path.string(), two_feature_schema());
  EXPECT_EQ(t.rows_kept, 1u);
  std::filesystem::remove(path);
  EXPECT_THROW(ingest_csv("/nonexistent/paris.csv", two_feature_schema()), paris::InvalidArgument);
}

// -- Windows -----------------------------------------------------------------

std::string ramp_csv(const std::vector<std::pair<int, int>>& groups_and_lengths) {
  std::ostringstream s;
  s << "storm,dst,a,b\n";
  for (auto [g, len] : groups_and_lengths)
    for (int t = 0; t < len; ++t) s << g << ',' << 100 * g + t << ',' << t << ',' << -t << '\n';
  return s.str();
}

TEST(Windows, CountFromSeriesLength) {
  auto t = parse(ramp_csv({{1, 10}}), two_feature_schema());
  auto w = make_windows(t, WindowSpec{6, 1});
  EXPECT_EQ(w.dataset.size(), 4u);
}

TEST(Windows, HandEnumeratedLayout) {
  // Length 8, history 3, horizon 2 -> windows at t = 2..5.
  auto t = parse(ramp_csv({{1, 8}}), two_feature_schema());
  auto w = make_windows(t, WindowSpec{3, 2});
  const auto& ds = w.dataset;
  ASSERT_EQ(ds.size(), 4u);
  ASSERT_EQ(ds.input_dim(), 6u);
  EXPECT_EQ(ds.input_names, (std::vector<std::string>{"a[t-2]", "b[t-2]", "a[t-1]", "b[t-1]", "a[t]", "b[t]"}));
  for (std::size_t k = 0; k < 4; ++k) {
    const double tt = static_cast<double>(k + 2);
    EXPECT_EQ(ds.inputs(k, 0), tt - 2);
    EXPECT_EQ(ds.inputs(k, 1), -(tt - 2));
    EXPECT_EQ(ds.inputs(k, 4), tt);
    EXPECT_EQ(ds.inputs(k, 5), -tt);
    EXPECT_EQ(ds.targets[k], 100 + tt + 2);
    EXPECT_EQ(ds.original_indices[k], static_cast<SampleId>(k));
  }
}

TEST(Windows, ConstantSeriesGivesConstantWindows) {
  auto t = parse("storm,dst,a,b\n1,4,2,3\n1,4,2,3\n1,4,2,3\n1,4,2,3\n", two_feature_schema());
  auto w = make_windows(t, WindowSpec{2, 1});
  ASSERT_EQ(w.dataset.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(w.dataset.targets[i], 4.0);
    EXPECT_EQ(w.dataset.inputs.row(i), (Vector{2, 3, 2, 3}));
  }
}

TEST(Windows, NeverCrossGroupsOrGaps) {
  auto s = two_feature_schema();
  auto text = ramp_csv({{1, 5}, {2, 5}});
  text += "3,300,0,0\n3,301,NA,1\n3,302,2,-2\n3,303,3,-3\n";
  auto t = parse(text, s);
  auto w = make_windows(t, WindowSpec{2, 1});
  // Groups 1 and 2 give 3 windows each; group 3 has segments of length 1 and 2.
  EXPECT_EQ(w.dataset.size(), 6u);
  EXPECT_EQ(w.skipped_groups, (std::vector<GroupId>{3}));
  for (std::size_t i = 0; i < w.dataset.size(); ++i) {
    // Feature a is the time index within the group, so consecutive lags differ by 1.
    EXPECT_EQ(w.dataset.inputs(i, 2) - w.dataset.inputs(i, 0), 1.0);
    EXPECT_EQ(std::floor(w.dataset.targets[i] / 100.0), static_cast<double>(w.dataset.group_ids[i]));
  }
}

TEST(Windows, ShortGroupIsSkipped) {
  auto t = parse(ramp_csv({{1, 3}, {2, 9}}), two_feature_schema());
  auto w = make_windows(t, WindowSpec{6, 1});
  EXPECT_EQ(w.skipped_groups, (std::vector<GroupId>{1}));
  EXPECT_EQ(w.dataset.size(), 3u);
}

// -- Folds -------------------------------------------------------------------

GroupedDataset grouped_with_minima(const std::vector<double>& minima) {
  GroupedDataset ds;
  std::vector<double> rows;
  for (std::size_t g = 0; g < minima.size(); ++g)
    for (int k = 0; k < 3; ++k) {
      ds.targets.push_back(minima[g] + k);
      ds.group_ids.push_back(static_cast<GroupId>(g));
      ds.original_indices.push_back(static_cast<SampleId>(ds.original_indices.size()));
    }
  ds.inputs = DenseMatrix(ds.targets.size(), 1, 0.0);
  return ds;
}

TEST(Folds, HundredGroupsTwentyTwenty) {
  std::vector<double> minima(100);
  for (std::size_t g = 0; g < 100; ++g) minima[g] = -static_cast<double>((g * 37) % 100);
  auto ds = grouped_with_minima(minima);
  auto plans = build_fold_plans(ds, 20, 20);
  ASSERT_EQ(plans.size(), 20u);
  const auto ranked = rank_groups_by_severity(ds);
  for (std::size_t f = 0; f < 20; ++f) {
    const auto& p = plans[f];
    EXPECT_EQ(p.test_group, ranked[f]);
    EXPECT_EQ(p.val_groups.size(), 20u);
    EXPECT_EQ(p.train_groups.size(), 79u);
    std::set<GroupId> all(p.train_groups.begin(), p.train_groups.end());
    all.insert(p.val_groups.begin(), p.val_groups.end());
    all.insert(p.test_group);
    EXPECT_EQ(all.size(), 100u);
    EXPECT_TRUE(std::is_sorted(p.train_groups.begin(), p.train_groups.end()));
    auto split = split_fold(ds, p);
    EXPECT_EQ(split.train.size() + split.val.size() + split.test.size(), ds.size());
    std::set<SampleId> seen;
    for (const auto* part : {&split.train, &split.val, &split.test})
      for (auto idx : part->original_indices) EXPECT_TRUE(seen.insert(idx).second);
  }
}

TEST(Folds, SeverityTiesBrokenByGroupId) {
  auto ds = grouped_with_minima({-5, -9, -5, -9, 0});
  EXPECT_EQ(rank_groups_by_severity(ds), (std::vector<GroupId>{1, 3, 0, 2, 4}));
}

TEST(Folds, ValidationTakesNextMostSevere) {
  auto ds = grouped_with_minima({-1, -4, -3, -2, 0, 5});
  auto plans = build_fold_plans(ds, 2, 2);
  EXPECT_EQ(plans[0].test_group, 1);
  EXPECT_EQ(plans[0].val_groups, (std::vector<GroupId>{2, 3}));
  EXPECT_EQ(plans[0].train_groups, (std::vector<GroupId>{0, 4, 5}));
  EXPECT_EQ(plans[1].test_group, 2);
  EXPECT_EQ(plans[1].val_groups, (std::vector<GroupId>{1, 3}));
}

TEST(Folds, InsufficientGroups) {
  auto ds = grouped_with_minima({-1, -2, -3});
  EXPECT_THROW(build_fold_plans(ds, 1, 2), InsufficientGroups);
  EXPECT_THROW(build_fold_plans(ds, 4, 0), InsufficientGroups);
  EXPECT_NO_THROW(build_fold_plans(ds, 1, 1));
}

// -- Normalization -------------------------------------------------------------

TEST(Normalization, RoundTrip) {
  std::mt19937_64 rng(3);
  GroupedDataset ds;
  ds.inputs = paris::testing::random_matrix(rng, 50, 4, 30.0);
  ds.targets = paris::testing::random_vector(rng, 50, 100.0);
  for (std::size_t i = 0; i < 50; ++i) {
    ds.group_ids.push_back(0);
    ds.original_indices.push_back(static_cast<SampleId>(i));
  }
  auto stats = Normalization::fit(ds.inputs, ds.targets);
  auto norm = ds.normalized(stats);
  double mean = std::accumulate(norm.targets.begin(), norm.targets.end(), 0.0) / 50.0;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  auto back = norm.denormalized();
  EXPECT_LE(paris::testing::rel_inf(back.inputs, ds.inputs), 1e-12);
  EXPECT_LE(paris::testing::rel_inf(back.targets, ds.targets), 1e-12);
  EXPECT_TRUE(back.normalization.is_identity());
  EXPECT_THROW(norm.normalized(stats), paris::InvalidArgument);
}

TEST(Normalization, ConstantColumnKeepsUnitScale) {
  DenseMatrix x(5, 2, 3.0);
  for (std::size_t i = 0; i < 5; ++i) x(i, 1) = static_cast<double>(i);
  auto stats = Normalization::fit(x, Vector{1, 1, 1, 1, 1});
  EXPECT_EQ(stats.input_scale[0], 1.0);
  EXPECT_EQ(stats.target_scale, 1.0);
  auto z = stats.normalize_inputs(x);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(z(i, 0), 0.0);
}

// -- Synthetic -----------------------------------------------------------------

double kurtosis(const Vector& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = x - mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m4 /= n;
  return m4 / (m2 * m2);
}

TEST(Synthetic, DeterministicPerSeed) {
  SyntheticSpec spec;
  spec.n = 600;
  spec.seed = 4;
  spec.corrupt_fraction = 0.2;
  auto a = generate_synthetic_longtail(spec);
  auto b = generate_synthetic_longtail(spec);
  EXPECT_EQ(a.data.inputs, b.data.inputs);
  EXPECT_EQ(a.data.targets, b.data.targets);
  EXPECT_EQ(a.corrupted, b.corrupted);
  spec.seed = 5;
  EXPECT_NE(generate_synthetic_longtail(spec).data.targets, a.data.targets);
}

TEST(Synthetic, ShapeAndGroups) {
  SyntheticSpec spec;
  spec.n = 1000;
  spec.event_length = 50;
  auto s = generate_synthetic_longtail(spec);
  EXPECT_EQ(s.data.size(), 1000u);
  EXPECT_EQ(s.data.input_dim(), kSyntheticInputs);
  EXPECT_EQ(s.data.groups().size(), 20u);
  EXPECT_NO_THROW(s.data.validate());
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_GE(s.data.inputs(i, 0), 0.0);
}

TEST(Synthetic, NoiselessTargetsFollowResponse) {
  SyntheticSpec spec;
  spec.n = 300;
  spec.noise_sd = 0.0;
  auto s = generate_synthetic_longtail(spec);
  for (std::size_t i = 0; i < 300; ++i) {
    const Vector x = s.data.inputs.row(i);
    const double expected = 0.5 * x[1] + 0.3 * std::sin(2.0 * x[2]) - 3.0 * x[0] * (1.0 + 0.25 * std::tanh(x[1]));
    EXPECT_NEAR(s.data.targets[i], expected, 1e-12);
  }
}

TEST(Synthetic, CorruptionRevertsToQuietRegime) {
  SyntheticSpec spec;
  spec.n = 2000;
  spec.noise_sd = 0.0;
  spec.corrupt_fraction = 0.3;
  auto s = generate_synthetic_longtail(spec);
  std::size_t n_corrupt = 0;
  for (std::size_t i = 0; i < spec.n; ++i) {
    const Vector x = s.data.inputs.row(i);
    if (s.corrupted[i]) {
      ++n_corrupt;
      EXPECT_NEAR(s.data.targets[i], 0.5 * x[1] + 0.3 * std::sin(2.0 * x[2]), 1e-12);
    } else {
      EXPECT_EQ(s.data.targets[i], s.clean_targets[i]);
    }
  }
  EXPECT_NEAR(static_cast<double>(n_corrupt) / 2000.0, 0.3, 0.04);
}

TEST(Synthetic, TailExponentControlsKurtosis) {
  SyntheticSpec spec;
  spec.n = 20000;
  spec.seed = 1;
  spec.tail_exponent = 200.0;
  EXPECT_NEAR(kurtosis(generate_synthetic_longtail(spec).data.targets), 3.0, 0.3);
  spec.tail_exponent = 1.5;
  EXPECT_GT(kurtosis(generate_synthetic_longtail(spec).data.targets), 10.0);
}

TEST(Synthetic, RejectsBadSpecs) {
  SyntheticSpec spec;
  spec.n = 10;
  EXPECT_THROW(generate_synthetic_longtail(spec), paris::InvalidArgument);
  spec.n = 500;
  spec.corrupt_fraction = 1.0;
  EXPECT_THROW(generate_synthetic_longtail(spec), paris::InvalidArgument);
}

// -- Dataset dump --------------------------------------------------------------

TEST(DatasetDump, RoundTripIsExact) {
  SyntheticSpec spec;
  spec.n = 200;
  auto s = generate_synthetic_longtail(spec);
  std::vector<std::size_t> some{3, 10, 11, 150};
  auto ds = s.data.subset(some);
  std::stringstream buf;
  write_dataset_csv(ds, buf);
  auto back = read_dataset_csv(buf);
  EXPECT_EQ(back.inputs, ds.inputs);
  EXPECT_EQ(back.targets, ds.targets);
  EXPECT_EQ(back.group_ids, ds.group_ids);
  EXPECT_EQ(back.original_indices, ds.original_indices);
  EXPECT_EQ(back.input_names, ds.input_names);
}

TEST(Dataset, RetainAndSubsetKeepIdentity) {
  SyntheticSpec spec;
  spec.n = 100;
  auto ds = generate_synthetic_longtail(spec).data;
  auto kept = ds.retain({5, 7, 99});
  EXPECT_EQ(kept.original_indices, (std::vector<SampleId>{5, 7, 99}));
  EXPECT_EQ(kept.targets[1], ds.targets[7]);
}

}  // namespace
