#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "driftscope/text.hpp"

namespace driftscope::freq {

// Corpus-level TF-IDF for one snapshot:
//   score(term) = (1 + ln(raw corpus count)) * ln(N / document frequency)
// with natural logs, N = snapshot document count. Scores are per snapshot;
// there is no cross-snapshot idf.
double tfidf_from_counts(std::uint64_t raw_count, std::uint64_t doc_freq, std::uint64_t doc_count);

// (total occurrences, number of documents containing the term). Absent terms
// give (0, 0).
std::pair<std::uint64_t, std::uint64_t> frequency_counts(std::string_view term,
                                                         std::span<const text::TokenStream> docs);

// Absent terms give nullopt, which is distinct from a present term scoring 0
// (a term appearing in every document).
std::optional<double> tfidf_score(std::string_view term, std::span<const text::TokenStream> docs);

class TfidfTable {
 public:
  struct Entry {
    std::uint64_t raw_count = 0;
    std::uint64_t doc_freq = 0;
    double tfidf = 0.0;
  };

  TfidfTable() = default;
  TfidfTable(std::string snapshot_id, std::uint64_t doc_count)
      : snapshot_id_(std::move(snapshot_id)), doc_count_(doc_count) {}

  const std::string& snapshot_id() const { return snapshot_id_; }
  std::uint64_t doc_count() const { return doc_count_; }
  std::size_t size() const { return rows_.size(); }
  const Entry* lookup(std::string_view term) const;
  const std::map<std::string, Entry>& rows() const { return rows_; }

  void insert(std::string term, Entry entry);

  // CSV: term,raw_count,doc_freq,tfidf
  void save_csv(const std::filesystem::path& path) const;
  static TfidfTable load_csv(const std::filesystem::path& path, std::string snapshot_id);

 private:
  std::string snapshot_id_;
  std::uint64_t doc_count_ = 0;
  std::map<std::string, Entry> rows_;
};

// Covers every vocabulary term present in the snapshot.
TfidfTable build_table(std::string snapshot_id, std::span<const text::TokenStream> docs,
                       const text::Vocabulary& vocabulary);

}  // namespace driftscope::freq
