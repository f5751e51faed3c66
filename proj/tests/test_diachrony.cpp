#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "driftscope/diachrony.hpp"
#include "driftscope/error.hpp"
#include "helpers.hpp"

using namespace driftscope;
using diachrony::CandidateClass;
using embed::Matrix;

namespace {

embed::TrainingConfig dim_config(std::uint32_t d) {
  embed::TrainingConfig config;
  config.dimension = d;
  return config;
}

embed::ModelVocab vocab_of(const std::vector<std::string>& terms) {
  std::vector<embed::ModelVocab::Entry> entries;
  entries.reserve(terms.size());
  for (const auto& term : terms) entries.push_back({term, 10});
  return embed::ModelVocab::from_entries(std::move(entries));
}

Matrix<float> matrix_of(const std::vector<std::vector<float>>& rows) {
  Matrix<float> m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m.row(r)[c] = rows[r][c];
  }
  return m;
}

// Hand-set models: the context matrix is both the compass anchor and the
// slice's trained matrix in the default orientation, so tests control the
// geometry directly through it.
embed::CompassModel make_compass(const std::vector<std::string>& terms,
                                 const std::vector<std::vector<float>>& vectors) {
  auto m = matrix_of(vectors);
  return embed::CompassModel(vocab_of(terms), m, m,
                             dim_config(static_cast<std::uint32_t>(vectors[0].size())));
}

embed::SliceModel make_slice(std::string id, const std::vector<std::string>& terms,
                             const std::vector<std::vector<float>>& vectors) {
  auto m = matrix_of(vectors);
  return embed::SliceModel(std::move(id), vocab_of(terms), m, m, embed::FrozenMatrix::target);
}

freq::TfidfTable make_table(std::string id, const std::vector<std::string>& terms,
                            const std::vector<std::uint64_t>& counts,
                            const std::vector<double>& scores) {
  freq::TfidfTable table(std::move(id), 100);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    table.insert(terms[i], {counts[i], 1, scores[i]});
  }
  return table;
}

}  // namespace

TEST_CASE("candidate detection normalizes names and reports coverage") {
  std::map<std::string, std::uint64_t> counts = {
      {"folic_acid", 3}, {"remdesivir", 12}, {"zinc", 1}, {"interferon", 2}, {"unrelated", 9}};
  const std::vector<std::string> candidates = {
      "Folic Acid", "Remdesivir", "Zinc",    "Interferon", "Chloroquine",
      "Ritonavir",  "Lopinavir",  "Heparin", "Niclosamide", "Ivermectin"};
  const auto result = diachrony::detect_candidates(candidates, counts);
  CHECK(result.detected ==
        std::vector<std::string>{"folic_acid", "interferon", "remdesivir", "zinc"});
  CHECK(result.coverage == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("absent candidates are not detected") {
  std::map<std::string, std::uint64_t> counts = {{"present", 1}};
  const std::vector<std::string> candidates = {"present", "absent"};
  const auto result = diachrony::detect_candidates(candidates, counts);
  CHECK(result.detected == std::vector<std::string>{"present"});
  CHECK(result.coverage == doctest::Approx(0.5));
}

TEST_CASE("an empty candidate list is an error") {
  std::map<std::string, std::uint64_t> counts = {{"x", 1}};
  CHECK_THROWS_AS(diachrony::detect_candidates({}, counts), InvalidInput);
}

TEST_CASE("eligibility requires four adjacent snapshots") {
  // present in snapshots 1,2,3,5 of six: longest run is 3
  CHECK_FALSE(
      diachrony::eligible_run({false, true, true, true, false, true}, 4).has_value());
  // present in snapshots 2,3,4,5: an adjacent run of 4
  const auto run = diachrony::eligible_run({false, true, true, true, true, false}, 4);
  REQUIRE(run.has_value());
  CHECK(run->begin == 1);
  CHECK(run->length == 4);

  const auto whole = diachrony::eligible_run({true, true, true, true, true, true}, 4);
  REQUIRE(whole.has_value());
  CHECK(whole->begin == 0);
  CHECK(whole->length == 6);

  CHECK_FALSE(diachrony::eligible_run({}, 4).has_value());
  CHECK_FALSE(diachrony::eligible_run({true, true, true}, 4).has_value());
}

TEST_CASE("equal-length runs resolve by the configured selection") {
  const std::vector<bool> two_runs = {true, true, true, true, false,
                                      true, true, true, true};
  const auto earliest = diachrony::eligible_run(two_runs, 4, diachrony::RunSelect::earliest);
  REQUIRE(earliest.has_value());
  CHECK(earliest->begin == 0);
  const auto latest = diachrony::eligible_run(two_runs, 4, diachrony::RunSelect::latest);
  REQUIRE(latest.has_value());
  CHECK(latest->begin == 5);

  // a strictly longer run wins regardless of selection
  const std::vector<bool> longer_late = {true, true, true, true, false,
                                         true, true, true, true, true};
  CHECK(diachrony::eligible_run(longer_late, 4, diachrony::RunSelect::earliest)->begin == 5);
  CHECK(diachrony::eligible_run(longer_late, 4, diachrony::RunSelect::latest)->begin == 5);
}

TEST_CASE("eligibility agrees with a brute-force run scan") {
  std::mt19937_64 rng(31337);
  std::map<std::string, std::vector<bool>> presence;
  std::set<std::string> expected;
  for (int i = 0; i < 2000; ++i) {
    const auto mask = testutil::random_mask(rng);
    const std::string term = "t" + std::to_string(i);
    presence[term] = mask;
    if (testutil::oracle_has_run(mask, 4)) expected.insert(term);

    const auto run = diachrony::eligible_run(mask, 4);
    CHECK(run.has_value() == testutil::oracle_has_run(mask, 4));
    if (run) {
      CHECK(run->length >= 4);
      for (std::size_t j = run->begin; j < run->begin + run->length; ++j) CHECK(mask[j]);
    }
  }
  const auto eligible = diachrony::eligible_candidates(presence, 4);
  CHECK(std::set<std::string>(eligible.begin(), eligible.end()) == expected);
}

TEST_CASE("presence needs both the count floor and slice membership") {
  const std::vector<std::string> full = {"term", "other"};
  const std::vector<std::vector<float>> vecs = {{1.0f, 0.0f}, {0.0f, 1.0f}};
  std::vector<freq::TfidfTable> tables;
  tables.push_back(make_table("s0", full, {5, 5}, {1.0, 1.0}));
  tables.push_back(make_table("s1", full, {2, 5}, {1.0, 1.0}));   // below min_count 3
  tables.push_back(make_table("s2", {"other"}, {5}, {1.0}));      // term absent
  tables.push_back(make_table("s3", full, {9, 5}, {1.0, 1.0}));

  std::vector<embed::SliceModel> slices;
  slices.push_back(make_slice("s0", full, vecs));
  slices.push_back(make_slice("s1", full, vecs));
  slices.push_back(make_slice("s2", full, vecs));
  slices.push_back(make_slice("s3", {"other"}, {{0.0f, 1.0f}}));  // not in slice vocab

  const auto mask = diachrony::presence_mask("term", tables, slices, 3);
  CHECK(mask == std::vector<bool>{true, false, false, false});
}

TEST_CASE("timeseries deltas follow the documented arithmetic") {
  const std::vector<std::string> terms = {"term"};
  const std::vector<std::vector<float>> vec = {{1.0f, 0.0f}};
  std::vector<freq::TfidfTable> tables;
  std::vector<embed::SliceModel> slices;
  const std::vector<double> scores = {2.0, 5.0, 4.0, 4.0};
  for (std::size_t i = 0; i < 4; ++i) {
    tables.push_back(make_table("s" + std::to_string(i), terms, {7}, {scores[i]}));
    slices.push_back(make_slice("s" + std::to_string(i), terms, vec));
  }
  const auto compass = make_compass(terms, vec);

  const auto series = diachrony::assemble_timeseries("term", tables, slices, compass, 3);
  CHECK(series.snapshot_ids == std::vector<std::string>{"s0", "s1", "s2", "s3"});
  CHECK(series.y == std::vector<double>{2.0, 5.0, 4.0, 4.0});
  CHECK(series.y_delta == std::vector<double>{3.0, -1.0, 0.0});
  CHECK(series.raw_counts == std::vector<std::uint64_t>{7, 7, 7, 7});
  for (double z : series.z) CHECK(z == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("the shift series measures rotation away from the compass") {
  const std::vector<std::string> terms = {"term"};
  std::vector<freq::TfidfTable> tables;
  std::vector<embed::SliceModel> slices;
  const std::vector<std::vector<std::vector<float>>> slice_vecs = {
      {{1.0f, 0.0f}},  // aligned: z = 0
      {{1.0f, 1.0f}},  // 45 degrees: z = 1 - sqrt(2)/2
      {{0.0f, 1.0f}},  // orthogonal: z = 1
      {{-1.0f, 0.0f}},  // opposite: z = 2
  };
  for (std::size_t i = 0; i < 4; ++i) {
    tables.push_back(make_table("s" + std::to_string(i), terms, {7}, {1.0}));
    slices.push_back(make_slice("s" + std::to_string(i), terms, slice_vecs[i]));
  }
  const auto compass = make_compass(terms, {{1.0f, 0.0f}});

  const auto series = diachrony::assemble_timeseries("term", tables, slices, compass, 3);
  REQUIRE(series.z.size() == 4);
  CHECK(series.z[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(series.z[1] == doctest::Approx(1.0 - std::sqrt(2.0) / 2.0).epsilon(1e-7));
  CHECK(series.z[2] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(series.z[3] == doctest::Approx(2.0).epsilon(1e-9));
  for (double z : series.z) {
    CHECK(z >= 0.0);
    CHECK(z <= 2.0);
  }
}

TEST_CASE("series assembly picks the selected eligible run") {
  const std::vector<std::string> terms = {"term"};
  const std::vector<std::vector<float>> vec = {{1.0f, 0.0f}};
  std::vector<freq::TfidfTable> tables;
  std::vector<embed::SliceModel> slices;
  // present in 0..3 and 5..8, gap at 4
  for (std::size_t i = 0; i < 9; ++i) {
    const std::uint64_t count = i == 4 ? 0 : 7;
    tables.push_back(make_table("s" + std::to_string(i), terms, {count}, {1.0}));
    slices.push_back(make_slice("s" + std::to_string(i), terms, vec));
  }
  const auto compass = make_compass(terms, vec);

  const auto earliest = diachrony::assemble_timeseries("term", tables, slices, compass, 3, 4,
                                                       diachrony::RunSelect::earliest);
  CHECK(earliest.snapshot_ids.front() == "s0");
  const auto latest = diachrony::assemble_timeseries("term", tables, slices, compass, 3, 4,
                                                     diachrony::RunSelect::latest);
  CHECK(latest.snapshot_ids.front() == "s5");
}

TEST_CASE("ineligible terms cannot be assembled") {
  const std::vector<std::string> terms = {"term"};
  const std::vector<std::vector<float>> vec = {{1.0f, 0.0f}};
  std::vector<freq::TfidfTable> tables;
  std::vector<embed::SliceModel> slices;
  for (std::size_t i = 0; i < 3; ++i) {
    tables.push_back(make_table("s" + std::to_string(i), terms, {7}, {1.0}));
    slices.push_back(make_slice("s" + std::to_string(i), terms, vec));
  }
  const auto compass = make_compass(terms, vec);
  CHECK_THROWS_AS(diachrony::assemble_timeseries("term", tables, slices, compass, 3),
                  InvalidInput);
}

TEST_CASE("pearson matches the direct formula") {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> y = {2.0, 4.0, 5.0, 4.0};
  const auto r = diachrony::pearson(x, y);
  REQUIRE(r.has_value());
  // 14 / sqrt(380)
  CHECK(*r == doctest::Approx(0.7181848464596078).epsilon(1e-12));

  CHECK(*diachrony::pearson(x, x) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> neg = x;
  for (auto& v : neg) v = -v;
  CHECK(*diachrony::pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pearson agrees with the raw-sums oracle on random series") {
  std::mt19937_64 rng(271828);
  std::uniform_int_distribution<std::size_t> len_dist(4, 50);
  std::uniform_real_distribution<double> value(-10.0, 10.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = len_dist(rng);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = value(rng);
      y[i] = value(rng);
    }
    const auto r = diachrony::pearson(x, y);
    REQUIRE(r.has_value());
    CHECK(std::abs(*r - testutil::oracle_pearson(x, y)) < 1e-12);
    CHECK(std::abs(*r) <= 1.0 + 1e-15);

    // sign flip under negative scaling, invariance under positive affine maps
    std::vector<double> scaled = x;
    for (auto& v : scaled) v = -2.5 * v + 1.0;
    const auto flipped = diachrony::pearson(scaled, y);
    REQUIRE(flipped.has_value());
    CHECK(std::abs(*flipped + *r) < 1e-12);
  }
}

TEST_CASE("pearson flags degenerate inputs") {
  const std::vector<double> constant = {3.0, 3.0, 3.0, 3.0};
  const std::vector<double> varying = {1.0, 2.0, 3.0, 4.0};
  CHECK_FALSE(diachrony::pearson(constant, varying).has_value());
  CHECK_FALSE(diachrony::pearson(varying, constant).has_value());

  const std::vector<double> shorter = {1.0, 2.0};
  CHECK_THROWS_AS(diachrony::pearson(varying, shorter), InvalidInput);
  const std::vector<double> single = {1.0};
  CHECK_THROWS_AS(diachrony::pearson(single, single), InvalidInput);
}

TEST_CASE("classification bands use strict thresholds") {
  CHECK(diachrony::classify_candidate(0.87) == CandidateClass::positive);
  CHECK(diachrony::classify_candidate(-0.82) == CandidateClass::negative);
  CHECK(diachrony::classify_candidate(0.53) == CandidateClass::uncorrelated);
  CHECK(diachrony::classify_candidate(-0.53) == CandidateClass::uncorrelated);
  CHECK(diachrony::classify_candidate(0.0) == CandidateClass::uncorrelated);
  CHECK(diachrony::classify_candidate(1.0) == CandidateClass::positive);
  CHECK(diachrony::classify_candidate(-1.0) == CandidateClass::negative);
  CHECK(diachrony::classify_candidate(0.6, 0.7) == CandidateClass::uncorrelated);
  CHECK(diachrony::classify_candidate(0.6, 0.5) == CandidateClass::positive);
}

TEST_CASE("class names round-trip") {
  using diachrony::candidate_class_from_string;
  CHECK(diachrony::to_string(CandidateClass::positive) == "positive");
  CHECK(diachrony::to_string(CandidateClass::negative) == "negative");
  CHECK(diachrony::to_string(CandidateClass::uncorrelated) == "uncorrelated");
  CHECK(candidate_class_from_string("positive") == CandidateClass::positive);
  CHECK(candidate_class_from_string("negative") == CandidateClass::negative);
  CHECK(candidate_class_from_string("uncorrelated") == CandidateClass::uncorrelated);
  CHECK_THROWS_AS(candidate_class_from_string("sideways"), FormatError);
}

TEST_CASE("correlation reports carry the class of r between y and z") {
  diachrony::TermTimeseries series;
  series.term = "term";
  series.snapshot_ids = {"s0", "s1", "s2", "s3"};
  series.y = {1.0, 2.0, 3.0, 4.0};
  series.z = {0.1, 0.2, 0.3, 0.4};
  const auto report = diachrony::correlate(series);
  CHECK(report.term == "term");
  CHECK(report.n == 4);
  REQUIRE(report.r.has_value());
  CHECK(*report.r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.cls == CandidateClass::positive);

  series.z = {0.4, 0.3, 0.2, 0.1};
  CHECK(diachrony::correlate(series).cls == CandidateClass::negative);

  series.z = {0.4, 0.4, 0.4, 0.4};  // zero variance
  const auto flat = diachrony::correlate(series);
  CHECK_FALSE(flat.r.has_value());
  CHECK(flat.cls == CandidateClass::uncorrelated);
}

TEST_CASE("nearest neighbors rank by cosine with id tie-breaks") {
  const std::vector<std::string> terms = {"query", "close", "far", "twin"};
  const auto slice = make_slice("s0", terms,
                                {{1.0f, 0.0f},     // query
                                 {0.9f, 0.1f},     // close
                                 {-1.0f, 0.0f},    // far
                                 {0.9f, 0.1f}});   // twin, ties with close
  const auto top1 = diachrony::nearest_neighbors("query", slice, 1);
  REQUIRE(top1.has_value());
  REQUIRE(top1->size() == 1);
  CHECK((*top1)[0].term == "close");  // tie with twin broken by lower id

  const auto all = diachrony::nearest_neighbors("query", slice, 10);
  REQUIRE(all.has_value());
  REQUIRE(all->size() == 3);  // k clipped to |V| - 1, self excluded
  CHECK((*all)[0].term == "close");
  CHECK((*all)[1].term == "twin");
  CHECK((*all)[2].term == "far");
  for (const auto& n : *all) CHECK(n.term != "query");
  CHECK((*all)[0].similarity >= (*all)[1].similarity);
  CHECK((*all)[1].similarity >= (*all)[2].similarity);

  CHECK_FALSE(diachrony::nearest_neighbors("absent", slice, 3).has_value());
}

TEST_CASE("identical consecutive slices keep every neighbor edge") {
  const std::vector<std::string> terms = {"query", "n1", "n2", "other"};
  const std::vector<std::vector<float>> vecs = {
      {1.0f, 0.0f}, {0.9f, 0.1f}, {0.8f, 0.2f}, {-1.0f, 0.0f}};
  std::vector<embed::SliceModel> slices = {make_slice("s0", terms, vecs),
                                           make_slice("s1", terms, vecs)};
  const auto flow = diachrony::neighbor_flows("query", slices, 2);
  CHECK(flow.term == "query");
  REQUIRE(flow.per_slice.size() == 2);
  CHECK(flow.per_slice[0].size() == 2);
  REQUIRE(flow.edges.size() == 2);
  for (const auto& edge : flow.edges) {
    CHECK(edge.from_slice == 0);
    CHECK(edge.weight > 0.0);
  }
  const auto fractions = diachrony::persistence_fractions(flow);
  REQUIRE(fractions.size() == 1);
  CHECK(fractions[0] == doctest::Approx(1.0));
}

TEST_CASE("disjoint consecutive neighbor sets produce no edges") {
  const std::vector<std::string> terms = {"query", "n1", "n2", "m1", "m2"};
  const std::vector<std::vector<float>> early = {
      {1.0f, 0.0f}, {0.9f, 0.1f}, {0.8f, 0.2f}, {-0.9f, 0.1f}, {-0.8f, 0.2f}};
  const std::vector<std::vector<float>> late = {
      {1.0f, 0.0f}, {-0.9f, 0.1f}, {-0.8f, 0.2f}, {0.9f, 0.1f}, {0.8f, 0.2f}};
  std::vector<embed::SliceModel> slices = {make_slice("s0", terms, early),
                                           make_slice("s1", terms, late)};
  const auto flow = diachrony::neighbor_flows("query", slices, 2);
  REQUIRE(flow.per_slice.size() == 2);
  CHECK(flow.per_slice[0][0].term == "n1");
  CHECK(flow.per_slice[1][0].term == "m1");
  CHECK(flow.edges.empty());
  const auto fractions = diachrony::persistence_fractions(flow);
  REQUIRE(fractions.size() == 1);
  CHECK(fractions[0] == 0.0);
}

TEST_CASE("flows skip slices that lack the term") {
  const std::vector<std::string> terms = {"query", "n1", "n2"};
  const std::vector<std::vector<float>> vecs = {{1.0f, 0.0f}, {0.9f, 0.1f}, {0.8f, 0.2f}};
  std::vector<embed::SliceModel> slices = {
      make_slice("s0", terms, vecs),
      make_slice("s1", {"n1", "n2"}, {{0.9f, 0.1f}, {0.8f, 0.2f}}),
      make_slice("s2", terms, vecs)};
  const auto flow = diachrony::neighbor_flows("query", slices, 2);
  REQUIRE(flow.per_slice.size() == 3);
  CHECK_FALSE(flow.per_slice[0].empty());
  CHECK(flow.per_slice[1].empty());
  CHECK_FALSE(flow.per_slice[2].empty());
  CHECK(flow.edges.empty());  // no consecutive pair shares the term
}

TEST_CASE("heatmaps mark absent cells and expose drifting rows") {
  const std::vector<std::string> terms = {"query", "n1", "n2"};
  std::vector<embed::SliceModel> slices = {
      make_slice("s0", terms, {{1.0f, 0.0f}, {0.9f, 0.1f}, {0.8f, 0.2f}}),
      make_slice("s1", terms, {{1.0f, 0.0f}, {0.1f, 0.9f}, {0.8f, 0.2f}}),  // n1 drifts away
      make_slice("s2", {"query", "n2"}, {{1.0f, 0.0f}, {0.8f, 0.2f}}),      // n1 absent
  };
  const auto heatmap = diachrony::neighbor_heatmap("query", slices, 2);
  CHECK(heatmap.term == "query");
  CHECK(heatmap.snapshot_ids == std::vector<std::string>{"s0", "s1", "s2"});
  REQUIRE(heatmap.rows == std::vector<std::string>{"n1", "n2"});
  REQUIRE(heatmap.cells.size() == 2);
  REQUIRE(heatmap.cells[0].size() == 3);

  // n1 has a defined cell in s0 and s1, then goes missing
  REQUIRE(heatmap.cells[0][0].has_value());
  REQUIRE(heatmap.cells[0][1].has_value());
  CHECK_FALSE(heatmap.cells[0][2].has_value());

  // the drifted row swings further than the stationary one
  const double drift_range = std::abs(*heatmap.cells[0][0] - *heatmap.cells[0][1]);
  const double stable_range = std::abs(*heatmap.cells[1][0] - *heatmap.cells[1][1]);
  CHECK(drift_range > stable_range + 0.1);

  const auto empty = diachrony::neighbor_heatmap("query", slices, 0);
  CHECK(empty.rows.empty());
  CHECK(empty.cells.empty());
}

namespace {

diachrony::TermTimeseries series_of(std::string term, std::vector<std::string> ids,
                                    std::vector<double> y, std::vector<double> z) {
  diachrony::TermTimeseries s;
  s.term = std::move(term);
  s.snapshot_ids = std::move(ids);
  s.raw_counts.assign(s.snapshot_ids.size(), 5);
  s.y = std::move(y);
  s.z = std::move(z);
  for (std::size_t i = 0; i + 1 < s.y.size(); ++i) s.y_delta.push_back(s.y[i + 1] - s.y[i]);
  return s;
}

}  // namespace

TEST_CASE("similarity matrices are symmetric with unit diagonal") {
  const std::vector<std::string> ids = {"s0", "s1", "s2", "s3"};
  std::vector<diachrony::TermTimeseries> series = {
      series_of("a", ids, {1.0, 2.0, 3.0, 4.0}, {0.1, 0.1, 0.1, 0.1}),
      series_of("b", ids, {2.0, 4.0, 6.0, 8.0}, {0.1, 0.1, 0.1, 0.1}),  // scalar multiple of a
      series_of("c", ids, {4.0, 3.0, 2.0, 1.0}, {0.1, 0.1, 0.1, 0.1}),
  };
  const auto matrix =
      diachrony::timeseries_similarity_matrix(series, diachrony::SeriesMetric::tfidf_series);
  CHECK(matrix.terms == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(matrix.cells.size() == 3);

  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(matrix.cells[i][i].has_value());
    CHECK(*matrix.cells[i][i] == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t j = 0; j < 3; ++j) {
      REQUIRE(matrix.cells[i][j].has_value() == matrix.cells[j][i].has_value());
      if (matrix.cells[i][j]) {
        CHECK(*matrix.cells[i][j] == doctest::Approx(*matrix.cells[j][i]).epsilon(1e-12));
      }
    }
  }

  // cosine scale invariance
  CHECK(*matrix.cells[0][1] == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(matrix.best_match[0].has_value());
  CHECK(*matrix.best_match[0] == 1);
  CHECK(*matrix.best_match[1] == 0);
}

TEST_CASE("similarity matrices use the chosen series metric") {
  const std::vector<std::string> ids = {"s0", "s1", "s2", "s3"};
  // y identical, z opposed: the two metrics must disagree
  std::vector<diachrony::TermTimeseries> series = {
      series_of("a", ids, {1.0, 2.0, 3.0, 4.0}, {0.4, 0.3, 0.2, 0.1}),
      series_of("b", ids, {1.0, 2.0, 3.0, 4.0}, {0.1, 0.2, 0.3, 0.4}),
  };
  const auto by_y =
      diachrony::timeseries_similarity_matrix(series, diachrony::SeriesMetric::tfidf_series);
  const auto by_z =
      diachrony::timeseries_similarity_matrix(series, diachrony::SeriesMetric::cosine_series);
  CHECK(by_y.metric == diachrony::SeriesMetric::tfidf_series);
  CHECK(*by_y.cells[0][1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(*by_z.cells[0][1] < 1.0 - 1e-6);
}

TEST_CASE("pairs align on their shared snapshots") {
  std::vector<diachrony::TermTimeseries> series = {
      series_of("a", {"s0", "s1", "s2", "s3", "s4"}, {1.0, 2.0, 3.0, 4.0, 5.0},
                {0.1, 0.1, 0.1, 0.1, 0.1}),
      series_of("b", {"s1", "s2", "s3", "s4", "s5"}, {2.0, 3.0, 4.0, 5.0, 6.0},
                {0.1, 0.1, 0.1, 0.1, 0.1}),
  };
  const auto matrix =
      diachrony::timeseries_similarity_matrix(series, diachrony::SeriesMetric::tfidf_series);
  // overlap s1..s4: a restricted to (2,3,4,5), b to (2,3,4,5)
  REQUIRE(matrix.cells[0][1].has_value());
  CHECK(*matrix.cells[0][1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pairs with insufficient overlap stay undefined") {
  std::vector<diachrony::TermTimeseries> series = {
      series_of("a", {"s0", "s1", "s2", "s3"}, {1.0, 2.0, 3.0, 4.0}, {0.1, 0.1, 0.1, 0.1}),
      series_of("b", {"s3", "s4", "s5", "s6"}, {1.0, 2.0, 3.0, 4.0}, {0.1, 0.1, 0.1, 0.1}),
      series_of("c", {"s0", "s1", "s2", "s3"}, {4.0, 3.0, 2.0, 1.0}, {0.1, 0.1, 0.1, 0.1}),
  };
  const auto matrix =
      diachrony::timeseries_similarity_matrix(series, diachrony::SeriesMetric::tfidf_series);
  CHECK_FALSE(matrix.cells[0][1].has_value());  // only s3 shared
  CHECK(matrix.cells[0][2].has_value());
  REQUIRE(matrix.best_match[1].has_value() == false);

  std::vector<diachrony::TermTimeseries> disjoint = {
      series_of("a", {"s0", "s1", "s2", "s3"}, {1.0, 2.0, 3.0, 4.0}, {0.1, 0.1, 0.1, 0.1}),
      series_of("b", {"s4", "s5", "s6", "s7"}, {1.0, 2.0, 3.0, 4.0}, {0.1, 0.1, 0.1, 0.1}),
  };
  CHECK_THROWS_AS(
      diachrony::timeseries_similarity_matrix(disjoint, diachrony::SeriesMetric::tfidf_series),
      InvalidInput);

  std::vector<diachrony::TermTimeseries> lonely = {
      series_of("a", {"s0", "s1", "s2", "s3"}, {1.0, 2.0, 3.0, 4.0}, {0.1, 0.1, 0.1, 0.1})};
  CHECK_THROWS_AS(
      diachrony::timeseries_similarity_matrix(lonely, diachrony::SeriesMetric::tfidf_series),
      InvalidInput);
}

TEST_CASE("timeseries csv marks the first delta as missing") {
  testutil::TempDir dir;
  std::vector<diachrony::TermTimeseries> series = {
      series_of("a", {"s0", "s1"}, {1.0, 2.5}, {0.1, 0.2})};
  const auto path = dir / "timeseries.csv";
  diachrony::save_timeseries_csv(series, path);
  const auto lines = testutil::read_bytes(path);
  CHECK(lines.find("term,snapshot_id,raw_count,tfidf,tfidf_delta,cosine_distance\n") == 0);
  CHECK(lines.find("a,s0,5,1,NA,0.1\n") != std::string::npos);
  CHECK(lines.find("a,s1,5,2.5,1.5,0.2\n") != std::string::npos);
}

TEST_CASE("correlation csv writes NA for undefined r") {
  testutil::TempDir dir;
  std::vector<diachrony::CorrelationReport> reports(2);
  reports[0].term = "a";
  reports[0].n = 4;
  reports[0].r = 0.75;
  reports[0].cls = CandidateClass::positive;
  reports[1].term = "b";
  reports[1].n = 5;
  reports[1].cls = CandidateClass::uncorrelated;
  const auto path = dir / "correlations.csv";
  diachrony::save_correlations_csv(reports, path);
  const auto lines = testutil::read_bytes(path);
  CHECK(lines.find("term,n,r,class\n") == 0);
  CHECK(lines.find("a,4,0.75,positive\n") != std::string::npos);
  CHECK(lines.find("b,5,NA,uncorrelated\n") != std::string::npos);
}

TEST_CASE("flow json is sankey-shaped") {
  testutil::TempDir dir;
  const std::vector<std::string> terms = {"query", "n1", "n2"};
  const std::vector<std::vector<float>> vecs = {{1.0f, 0.0f}, {0.9f, 0.1f}, {0.8f, 0.2f}};
  std::vector<embed::SliceModel> slices = {make_slice("s0", terms, vecs),
                                           make_slice("s1", terms, vecs)};
  const auto flow = diachrony::neighbor_flows("query", slices, 2);
  const auto path = dir / "flow.json";
  diachrony::save_flow_json(flow, path);

  const auto parsed = nlohmann::json::parse(testutil::read_bytes(path));
  CHECK(parsed["term"] == "query");
  CHECK(parsed["snapshots"] == nlohmann::json({"s0", "s1"}));
  REQUIRE(parsed["nodes"].is_array());
  REQUIRE(parsed["links"].is_array());
  CHECK(parsed["nodes"].size() == 4);  // 2 neighbors in each of 2 slices
  CHECK(parsed["links"].size() == 2);
  const auto& node = parsed["nodes"][0];
  CHECK(node.contains("id"));
  CHECK(node.contains("snapshot"));
  CHECK(node.contains("term"));
  CHECK(node.contains("similarity"));
  const auto& link = parsed["links"][0];
  CHECK(link.contains("source"));
  CHECK(link.contains("target"));
  CHECK(link.contains("value"));
}

TEST_CASE("heatmap csv writes NA for missing cells") {
  testutil::TempDir dir;
  const std::vector<std::string> terms = {"query", "n1", "n2"};
  std::vector<embed::SliceModel> slices = {
      make_slice("s0", terms, {{1.0f, 0.0f}, {0.9f, 0.1f}, {0.8f, 0.2f}}),
      make_slice("s1", {"query", "n2"}, {{1.0f, 0.0f}, {0.8f, 0.2f}}),
  };
  const auto heatmap = diachrony::neighbor_heatmap("query", slices, 2);
  const auto path = dir / "heatmap.csv";
  diachrony::save_heatmap_csv(heatmap, path);
  const auto lines = testutil::read_bytes(path);
  CHECK(lines.find("neighbor,s0,s1\n") == 0);
  CHECK(lines.find("n1,") != std::string::npos);
  CHECK(lines.find(",NA") != std::string::npos);
}

TEST_CASE("best match csv reports argmax neighbors") {
  testutil::TempDir dir;
  const std::vector<std::string> ids = {"s0", "s1", "s2", "s3"};
  std::vector<diachrony::TermTimeseries> series = {
      series_of("a", ids, {1.0, 2.0, 3.0, 4.0}, {0.1, 0.1, 0.1, 0.1}),
      series_of("b", ids, {2.0, 4.0, 6.0, 8.0}, {0.1, 0.1, 0.1, 0.1}),
  };
  const auto matrix =
      diachrony::timeseries_similarity_matrix(series, diachrony::SeriesMetric::tfidf_series);
  const auto path = dir / "best.csv";
  diachrony::save_best_matches_csv(matrix, path);
  const auto lines = testutil::read_bytes(path);
  CHECK(lines.find("term,best_match,similarity\n") == 0);
  CHECK(lines.find("a,b,1\n") != std::string::npos);
  CHECK(lines.find("b,a,1\n") != std::string::npos);
}
