#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftscope/embed.hpp"
#include "driftscope/freq.hpp"

namespace driftscope::diachrony {

// Per-term series over one contiguous snapshot run:
//   y       TF-IDF score per snapshot
//   y_delta consecutive differences, y_delta[i] = y[i+1] - y[i]
//   z       1 - cosine(slice vector, compass vector) per snapshot, in [0, 2]
struct TermTimeseries {
  std::string term;
  std::vector<std::string> snapshot_ids;
  std::vector<std::uint64_t> raw_counts;
  std::vector<double> y;
  std::vector<double> y_delta;
  std::vector<double> z;

  std::size_t size() const { return snapshot_ids.size(); }
};

enum class CandidateClass { positive, negative, uncorrelated };
std::string_view to_string(CandidateClass cls);
CandidateClass candidate_class_from_string(std::string_view text);

struct CorrelationReport {
  std::string term;
  std::size_t n = 0;
  std::optional<double> r;  // nullopt when either series has zero variance
  CandidateClass cls = CandidateClass::uncorrelated;
};

struct DetectionResult {
  std::vector<std::string> detected;  // normalized forms, sorted
  double coverage = 0.0;              // |detected| / |candidates|
};

// A candidate is detected when its normalized form occurs in the snapshot at
// all; `term_counts` maps normalized term to raw occurrence count.
DetectionResult detect_candidates(std::span<const std::string> candidates,
                                  const std::map<std::string, std::uint64_t>& term_counts);

// Half-open run [begin, begin + length) of snapshot indices.
struct EligibleRun {
  std::size_t begin = 0;
  std::size_t length = 0;
};

enum class RunSelect { earliest, latest };

// Longest run of consecutive true entries, at least min_run long; among
// equally long runs, `select` picks the earliest or the latest one.
std::optional<EligibleRun> eligible_run(const std::vector<bool>& present, std::size_t min_run = 4,
                                        RunSelect select = RunSelect::earliest);

// Terms whose presence mask has a run of at least min_run, sorted.
std::vector<std::string> eligible_candidates(
    const std::map<std::string, std::vector<bool>>& presence, std::size_t min_run = 4);

// Presence in snapshot i means: raw count in tables[i] is at least min_count
// and the term is in slices[i]'s vocabulary. Both are required for a usable
// (y, z) pair, so eligibility and assembly agree by construction.
std::vector<bool> presence_mask(const std::string& term,
                                std::span<const freq::TfidfTable> tables,
                                std::span<const embed::SliceModel> slices,
                                std::uint64_t min_count);

// Builds the series over the term's selected eligible run. tables and slices
// are aligned chronologically, one pair per snapshot. Throws InvalidInput when
// the term has no run of min_run snapshots.
TermTimeseries assemble_timeseries(const std::string& term,
                                   std::span<const freq::TfidfTable> tables,
                                   std::span<const embed::SliceModel> slices,
                                   const embed::CompassModel& compass, std::uint64_t min_count,
                                   std::size_t min_run = 4,
                                   RunSelect select = RunSelect::earliest);

// Pearson correlation coefficient. Throws InvalidInput on length mismatch or
// fewer than two points; nullopt when either series has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// positive iff r > threshold, negative iff r < -threshold, else uncorrelated.
// Boundary values classify as uncorrelated.
CandidateClass classify_candidate(double r, double threshold = 0.53);

// r between y (TF-IDF levels) and z (cosine distances). Zero-variance series
// give r = nullopt and class uncorrelated.
CorrelationReport correlate(const TermTimeseries& series, double threshold = 0.53);

struct Neighbor {
  std::string term;
  std::uint32_t id = 0;  // vocabulary id in the slice
  double similarity = 0.0;
};

// Top-k cosine neighbors of term among the slice vocabulary, self excluded,
// sorted by similarity descending with ties broken by vocabulary id. nullopt
// when the term is not in the slice vocabulary.
std::optional<std::vector<Neighbor>> nearest_neighbors(const std::string& term,
                                                       const embed::SliceModel& slice,
                                                       std::size_t k);

struct NeighborFlow {
  struct Edge {
    std::size_t from_slice = 0;  // edge spans from_slice -> from_slice + 1
    std::string neighbor;
    double weight = 0.0;  // mean of the two slice similarities
  };

  std::string term;
  std::vector<std::string> snapshot_ids;
  std::vector<std::vector<Neighbor>> per_slice;  // empty where term is absent
  std::vector<Edge> edges;
};

NeighborFlow neighbor_flows(const std::string& term, std::span<const embed::SliceModel> slices,
                            std::size_t k);

// Fraction of slice i's neighbors that persist into slice i + 1, one value per
// consecutive pair. Pairs where either slice lacks the term give 0.
std::vector<double> persistence_fractions(const NeighborFlow& flow);

struct NeighborHeatmap {
  std::string term;
  std::vector<std::string> snapshot_ids;  // columns
  std::vector<std::string> rows;          // union of per-slice top-k neighbors, sorted
  // cells[row][column]; nullopt when term or neighbor is absent from the slice
  std::vector<std::vector<std::optional<double>>> cells;
};

NeighborHeatmap neighbor_heatmap(const std::string& term,
                                 std::span<const embed::SliceModel> slices, std::size_t k);

enum class SeriesMetric { tfidf_series, cosine_series };
std::string_view to_string(SeriesMetric metric);

struct SimilarityMatrix {
  SeriesMetric metric = SeriesMetric::tfidf_series;
  std::vector<std::string> terms;  // sorted
  // cells[i][j]; nullopt when the pair overlaps in fewer than min_overlap
  // snapshots or either aligned sub-series has zero norm
  std::vector<std::vector<std::optional<double>>> cells;
  // argmax off-diagonal defined cell per row; ties break toward lower index
  std::vector<std::optional<std::size_t>> best_match;
};

// Cosine similarity between aligned sub-series: for each pair, the series are
// restricted to their shared snapshot ids (at least min_overlap of them).
// Throws InvalidInput on fewer than two candidates or when no pair overlaps
// sufficiently.
SimilarityMatrix timeseries_similarity_matrix(std::span<const TermTimeseries> candidates,
                                              SeriesMetric metric, std::size_t min_overlap = 4);

// CSV: term,snapshot_id,raw_count,tfidf,tfidf_delta,cosine_distance
// The first row of each term has no delta and writes NA.
void save_timeseries_csv(std::span<const TermTimeseries> series,
                         const std::filesystem::path& path);

// CSV: term,n,r,class; r is NA when undefined.
void save_correlations_csv(std::span<const CorrelationReport> reports,
                           const std::filesystem::path& path);

// Sankey-ready JSON: nodes are (slice, neighbor) pairs, links join the same
// neighbor across consecutive slices.
void save_flow_json(const NeighborFlow& flow, const std::filesystem::path& path);

// CSV matrix: header neighbor,<snapshot ids...>; missing cells write NA.
void save_heatmap_csv(const NeighborHeatmap& heatmap, const std::filesystem::path& path);

// CSV: term,best_match,similarity; best_match and similarity are NA when the
// row has no defined off-diagonal cell.
void save_best_matches_csv(const SimilarityMatrix& matrix, const std::filesystem::path& path);

}  // namespace driftscope::diachrony
