#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include "driftscope/diachrony.hpp"
#include "driftscope/util.hpp"

#include <json.hpp>

namespace driftscope::diachrony {

std::string_view to_string(CandidateClass cls) {
  switch (cls) {
    case CandidateClass::positive:
      return "positive";
    case CandidateClass::negative:
      return "negative";
    case CandidateClass::uncorrelated:
      return "uncorrelated";
  }
  throw InvalidInput("unknown candidate class");
}

CandidateClass candidate_class_from_string(std::string_view text) {
  if (text == "positive") return CandidateClass::positive;
  if (text == "negative") return CandidateClass::negative;
  if (text == "uncorrelated") return CandidateClass::uncorrelated;
  throw FormatError("unknown candidate class: " + std::string(text));
}

std::string_view to_string(SeriesMetric metric) {
  return metric == SeriesMetric::tfidf_series ? "tfidf-series" : "cosine-series";
}

DetectionResult detect_candidates(std::span<const std::string> candidates,
                                  const std::map<std::string, std::uint64_t>& term_counts) {
  std::set<std::string> normalized;
  for (const auto& name : candidates) {
    auto form = text::normalize_phrase(name);
    if (!form.empty()) normalized.insert(std::move(form));
  }
  if (normalized.empty()) throw InvalidInput("candidate list is empty");

  DetectionResult result;
  for (const auto& form : normalized) {
    auto it = term_counts.find(form);
    if (it != term_counts.end() && it->second > 0) result.detected.push_back(form);
  }
  result.coverage =
      static_cast<double>(result.detected.size()) / static_cast<double>(normalized.size());
  return result;
}

std::optional<EligibleRun> eligible_run(const std::vector<bool>& present, std::size_t min_run,
                                        RunSelect select) {
  EligibleRun best;
  std::size_t i = 0;
  while (i < present.size()) {
    if (!present[i]) {
      ++i;
      continue;
    }
    std::size_t begin = i;
    while (i < present.size() && present[i]) ++i;
    const std::size_t length = i - begin;
    const bool better =
        length > best.length || (length == best.length && select == RunSelect::latest);
    if (better) best = {begin, length};
  }
  if (best.length == 0 || best.length < min_run) return std::nullopt;
  return best;
}

std::vector<std::string> eligible_candidates(
    const std::map<std::string, std::vector<bool>>& presence, std::size_t min_run) {
  std::vector<std::string> out;
  for (const auto& [term, mask] : presence) {
    if (eligible_run(mask, min_run)) out.push_back(term);
  }
  return out;
}

std::vector<bool> presence_mask(const std::string& term,
                                std::span<const freq::TfidfTable> tables,
                                std::span<const embed::SliceModel> slices,
                                std::uint64_t min_count) {
  if (tables.size() != slices.size()) {
    throw InvalidInput("tfidf tables and slice models are not aligned");
  }
  std::vector<bool> mask(tables.size(), false);
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto* entry = tables[i].lookup(term);
    mask[i] = entry && entry->raw_count >= min_count && slices[i].vocab().lookup(term).has_value();
  }
  return mask;
}

namespace {

std::optional<std::span<const float>> compass_anchor(const embed::CompassModel& compass,
                                                     const embed::SliceModel& slice,
                                                     const std::string& term) {
  // Compare the slice's trained matrix against the matching compass matrix.
  return slice.frozen() == embed::FrozenMatrix::target ? compass.vector_of(term)
                                                       : compass.target_vector_of(term);
}

}  // namespace

TermTimeseries assemble_timeseries(const std::string& term,
                                   std::span<const freq::TfidfTable> tables,
                                   std::span<const embed::SliceModel> slices,
                                   const embed::CompassModel& compass, std::uint64_t min_count,
                                   std::size_t min_run, RunSelect select) {
  const auto mask = presence_mask(term, tables, slices, min_count);
  const auto run = eligible_run(mask, min_run, select);
  if (!run) {
    throw InvalidInput("term is not eligible (needs " + std::to_string(min_run) +
                       " adjacent snapshots): " + term);
  }

  TermTimeseries series;
  series.term = term;
  for (std::size_t i = run->begin; i < run->begin + run->length; ++i) {
    const auto* entry = tables[i].lookup(term);
    series.snapshot_ids.push_back(tables[i].snapshot_id());
    series.raw_counts.push_back(entry->raw_count);
    series.y.push_back(entry->tfidf);

    const auto slice_vec = slices[i].vector_of(term);
    const auto compass_vec = compass_anchor(compass, slices[i], term);
    if (!compass_vec) throw InvalidInput("term is missing from the compass: " + term);
    series.z.push_back(1.0 - embed::cosine_similarity(*slice_vec, *compass_vec));
  }
  series.y_delta.resize(series.y.size() - 1);
  for (std::size_t i = 0; i + 1 < series.y.size(); ++i) {
    series.y_delta[i] = series.y[i + 1] - series.y[i];
  }
  return series;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("pearson needs series of equal length");
  if (x.size() < 2) throw InvalidInput("pearson needs at least two points");
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

CandidateClass classify_candidate(double r, double threshold) {
  if (r > threshold) return CandidateClass::positive;
  if (r < -threshold) return CandidateClass::negative;
  return CandidateClass::uncorrelated;
}

CorrelationReport correlate(const TermTimeseries& series, double threshold) {
  CorrelationReport report;
  report.term = series.term;
  report.n = series.size();
  report.r = pearson(series.y, series.z);
  report.cls = report.r ? classify_candidate(*report.r, threshold) : CandidateClass::uncorrelated;
  return report;
}

namespace {

const embed::Matrix<float>& trained_matrix(const embed::SliceModel& slice) {
  return slice.frozen() == embed::FrozenMatrix::target ? slice.context() : slice.target();
}

}  // namespace

std::optional<std::vector<Neighbor>> nearest_neighbors(const std::string& term,
                                                       const embed::SliceModel& slice,
                                                       std::size_t k) {
  const auto id = slice.vocab().lookup(term);
  if (!id) return std::nullopt;
  const auto& matrix = trained_matrix(slice);
  const auto query = matrix.row(*id);

  std::vector<Neighbor> all;
  all.reserve(slice.vocab().size());
  for (std::uint32_t other = 0; other < slice.vocab().size(); ++other) {
    if (other == *id) continue;
    all.push_back(
        {slice.vocab().entry(other).term, other, embed::cosine_similarity(query, matrix.row(other))});
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

NeighborFlow neighbor_flows(const std::string& term, std::span<const embed::SliceModel> slices,
                            std::size_t k) {
  NeighborFlow flow;
  flow.term = term;
  for (const auto& slice : slices) {
    flow.snapshot_ids.push_back(slice.snapshot_id());
    auto neighbors = nearest_neighbors(term, slice, k);
    flow.per_slice.push_back(neighbors ? std::move(*neighbors) : std::vector<Neighbor>{});
  }
  for (std::size_t i = 0; i + 1 < flow.per_slice.size(); ++i) {
    std::map<std::string, double> prev;
    for (const auto& n : flow.per_slice[i]) prev.emplace(n.term, n.similarity);
    for (const auto& n : flow.per_slice[i + 1]) {
      auto it = prev.find(n.term);
      if (it == prev.end()) continue;
      flow.edges.push_back({i, n.term, (it->second + n.similarity) / 2.0});
    }
  }
  std::sort(flow.edges.begin(), flow.edges.end(),
            [](const NeighborFlow::Edge& a, const NeighborFlow::Edge& b) {
              if (a.from_slice != b.from_slice) return a.from_slice < b.from_slice;
              return a.neighbor < b.neighbor;
            });
  return flow;
}

std::vector<double> persistence_fractions(const NeighborFlow& flow) {
  std::vector<double> fractions;
  for (std::size_t i = 0; i + 1 < flow.per_slice.size(); ++i) {
    const auto& from = flow.per_slice[i];
    if (from.empty() || flow.per_slice[i + 1].empty()) {
      fractions.push_back(0.0);
      continue;
    }
    const auto shared = static_cast<std::size_t>(
        std::count_if(flow.edges.begin(), flow.edges.end(),
                      [i](const NeighborFlow::Edge& e) { return e.from_slice == i; }));
    fractions.push_back(static_cast<double>(shared) / static_cast<double>(from.size()));
  }
  return fractions;
}

NeighborHeatmap neighbor_heatmap(const std::string& term,
                                 std::span<const embed::SliceModel> slices, std::size_t k) {
  NeighborHeatmap heatmap;
  heatmap.term = term;
  std::set<std::string> row_terms;
  for (const auto& slice : slices) {
    heatmap.snapshot_ids.push_back(slice.snapshot_id());
    if (auto neighbors = nearest_neighbors(term, slice, k)) {
      for (const auto& n : *neighbors) row_terms.insert(n.term);
    }
  }
  heatmap.rows.assign(row_terms.begin(), row_terms.end());
  heatmap.cells.resize(heatmap.rows.size());
  for (std::size_t r = 0; r < heatmap.rows.size(); ++r) {
    auto& row = heatmap.cells[r];
    row.resize(slices.size());
    for (std::size_t s = 0; s < slices.size(); ++s) {
      const auto term_id = slices[s].vocab().lookup(term);
      const auto row_id = slices[s].vocab().lookup(heatmap.rows[r]);
      if (!term_id || !row_id) continue;
      const auto& matrix = trained_matrix(slices[s]);
      row[s] = embed::cosine_similarity(matrix.row(*term_id), matrix.row(*row_id));
    }
  }
  return heatmap;
}

SimilarityMatrix timeseries_similarity_matrix(std::span<const TermTimeseries> candidates,
                                              SeriesMetric metric, std::size_t min_overlap) {
  if (candidates.size() < 2) {
    throw InvalidInput("similarity matrix needs at least two candidates");
  }
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].term < candidates[b].term;
  });

  SimilarityMatrix matrix;
  matrix.metric = metric;
  const std::size_t n = candidates.size();
  matrix.terms.reserve(n);
  for (std::size_t i : order) matrix.terms.push_back(candidates[i].term);
  matrix.cells.assign(n, std::vector<std::optional<double>>(n));
  matrix.best_match.assign(n, std::nullopt);

  auto values_of = [&](const TermTimeseries& c) -> const std::vector<double>& {
    return metric == SeriesMetric::tfidf_series ? c.y : c.z;
  };
  auto aligned_cosine = [&](const TermTimeseries& a,
                            const TermTimeseries& b) -> std::optional<double> {
    std::unordered_map<std::string, std::size_t> index_a;
    for (std::size_t i = 0; i < a.snapshot_ids.size(); ++i) index_a.emplace(a.snapshot_ids[i], i);
    const auto& va = values_of(a);
    const auto& vb = values_of(b);
    double dot = 0, na = 0, nb = 0;
    std::size_t overlap = 0;
    for (std::size_t j = 0; j < b.snapshot_ids.size(); ++j) {
      auto it = index_a.find(b.snapshot_ids[j]);
      if (it == index_a.end()) continue;
      ++overlap;
      dot += va[it->second] * vb[j];
      na += va[it->second] * va[it->second];
      nb += vb[j] * vb[j];
    }
    if (overlap < min_overlap || na == 0.0 || nb == 0.0) return std::nullopt;
    return dot / std::sqrt(na * nb);
  };

  bool any_pair = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = candidates[order[i]];
    const auto& va = values_of(a);
    const bool nonzero = std::any_of(va.begin(), va.end(), [](double v) { return v != 0.0; });
    if (a.size() >= min_overlap && nonzero) matrix.cells[i][i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto cell = aligned_cosine(a, candidates[order[j]]);
      matrix.cells[i][j] = cell;
      matrix.cells[j][i] = cell;
      if (cell) any_pair = true;
    }
  }
  if (!any_pair) {
    throw InvalidInput("no candidate pair overlaps in " + std::to_string(min_overlap) +
                       " or more snapshots");
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<std::size_t> best;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || !matrix.cells[i][j]) continue;
      if (!best || *matrix.cells[i][j] > *matrix.cells[i][*best]) best = j;
    }
    matrix.best_match[i] = best;
  }
  return matrix;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void save_timeseries_csv(std::span<const TermTimeseries> series,
                         const std::filesystem::path& path) {
  auto out = open_out(path);
  csv_write_row(out, {"term", "snapshot_id", "raw_count", "tfidf", "tfidf_delta",
                      "cosine_distance"});
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      csv_write_row(out, {s.term, s.snapshot_ids[i], std::to_string(s.raw_counts[i]),
                          format_real(s.y[i]), i == 0 ? "NA" : format_real(s.y_delta[i - 1]),
                          format_real(s.z[i])});
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void save_correlations_csv(std::span<const CorrelationReport> reports,
                           const std::filesystem::path& path) {
  auto out = open_out(path);
  csv_write_row(out, {"term", "n", "r", "class"});
  for (const auto& report : reports) {
    csv_write_row(out, {report.term, std::to_string(report.n),
                        report.r ? format_real(*report.r) : "NA",
                        std::string(to_string(report.cls))});
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void save_flow_json(const NeighborFlow& flow, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["term"] = flow.term;
  doc["snapshots"] = flow.snapshot_ids;
  auto& nodes = doc["nodes"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < flow.per_slice.size(); ++i) {
    for (const auto& n : flow.per_slice[i]) {
      nodes.push_back({{"id", flow.snapshot_ids[i] + ":" + n.term},
                       {"snapshot", flow.snapshot_ids[i]},
                       {"term", n.term},
                       {"similarity", n.similarity}});
    }
  }
  auto& links = doc["links"] = nlohmann::ordered_json::array();
  for (const auto& edge : flow.edges) {
    links.push_back({{"source", flow.snapshot_ids[edge.from_slice] + ":" + edge.neighbor},
                     {"target", flow.snapshot_ids[edge.from_slice + 1] + ":" + edge.neighbor},
                     {"value", edge.weight}});
  }
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

void save_heatmap_csv(const NeighborHeatmap& heatmap, const std::filesystem::path& path) {
  auto out = open_out(path);
  std::vector<std::string> header{"neighbor"};
  header.insert(header.end(), heatmap.snapshot_ids.begin(), heatmap.snapshot_ids.end());
  csv_write_row(out, header);
  for (std::size_t r = 0; r < heatmap.rows.size(); ++r) {
    std::vector<std::string> row{heatmap.rows[r]};
    for (const auto& cell : heatmap.cells[r]) {
      row.push_back(cell ? format_real(*cell) : "NA");
    }
    csv_write_row(out, row);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void save_best_matches_csv(const SimilarityMatrix& matrix, const std::filesystem::path& path) {
  auto out = open_out(path);
  csv_write_row(out, {"term", "best_match", "similarity"});
  for (std::size_t i = 0; i < matrix.terms.size(); ++i) {
    const auto& best = matrix.best_match[i];
    csv_write_row(out, {matrix.terms[i], best ? matrix.terms[*best] : "NA",
                        best ? format_real(*matrix.cells[i][*best]) : "NA"});
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace driftscope::diachrony
