#include "driftscope/freq.hpp"

#include <cmath>
#include <fstream>
#include <unordered_map>

#include "driftscope/error.hpp"
#include "driftscope/util.hpp"

namespace driftscope::freq {

double tfidf_from_counts(std::uint64_t raw_count, std::uint64_t doc_freq,
                         std::uint64_t doc_count) {
  if (raw_count == 0 || doc_freq == 0 || doc_count == 0 || doc_freq > doc_count ||
      raw_count < doc_freq) {
    throw InvalidInput("inconsistent tf-idf counts");
  }
  return (1.0 + std::log(static_cast<double>(raw_count))) *
         std::log(static_cast<double>(doc_count) / static_cast<double>(doc_freq));
}

std::pair<std::uint64_t, std::uint64_t> frequency_counts(std::string_view term,
                                                         std::span<const text::TokenStream> docs) {
  std::uint64_t raw = 0;
  std::uint64_t df = 0;
  for (const auto& stream : docs) {
    std::uint64_t in_doc = 0;
    for (const auto& token : stream) {
      if (token == term) ++in_doc;
    }
    raw += in_doc;
    if (in_doc > 0) ++df;
  }
  return {raw, df};
}

std::optional<double> tfidf_score(std::string_view term, std::span<const text::TokenStream> docs) {
  auto [raw, df] = frequency_counts(term, docs);
  if (raw == 0) return std::nullopt;
  return tfidf_from_counts(raw, df, docs.size());
}

const TfidfTable::Entry* TfidfTable::lookup(std::string_view term) const {
  auto it = rows_.find(std::string(term));
  return it == rows_.end() ? nullptr : &it->second;
}

void TfidfTable::insert(std::string term, Entry entry) {
  rows_.insert_or_assign(std::move(term), entry);
}

void TfidfTable::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write tf-idf table: " + path.string());
  out << "term,raw_count,doc_freq,tfidf\n";
  out << "#doc_count," << doc_count_ << ",,\n";
  for (const auto& [term, entry] : rows_) {
    csv_write_row(out, {term, std::to_string(entry.raw_count), std::to_string(entry.doc_freq),
                        format_real(entry.tfidf)});
  }
  if (!out) throw IoError("write failed: " + path.string());
}

TfidfTable TfidfTable::load_csv(const std::filesystem::path& path, std::string snapshot_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read tf-idf table: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "term,raw_count,doc_freq,tfidf") {
    throw FormatError("bad tf-idf table header: " + path.string());
  }
  if (!std::getline(in, line) || line.rfind("#doc_count,", 0) != 0) {
    throw FormatError("missing doc_count row: " + path.string());
  }
  TfidfTable table(std::move(snapshot_id), std::stoull(csv_parse_line(line)[1]));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = csv_parse_line(line);
    if (fields.size() != 4) throw FormatError("bad tf-idf table row: " + line);
    Entry entry;
    entry.raw_count = std::stoull(fields[1]);
    entry.doc_freq = std::stoull(fields[2]);
    entry.tfidf = std::strtod(fields[3].c_str(), nullptr);
    table.insert(fields[0], entry);
  }
  return table;
}

TfidfTable build_table(std::string snapshot_id, std::span<const text::TokenStream> docs,
                       const text::Vocabulary& vocabulary) {
  std::unordered_map<std::uint32_t, TfidfTable::Entry> counts;
  for (const auto& stream : docs) {
    std::unordered_map<std::uint32_t, std::uint64_t> in_doc;
    for (const auto& token : stream) {
      if (auto id = vocabulary.lookup(token)) ++in_doc[*id];
    }
    for (const auto& [id, n] : in_doc) {
      auto& entry = counts[id];
      entry.raw_count += n;
      entry.doc_freq += 1;
    }
  }
  TfidfTable table(std::move(snapshot_id), docs.size());
  for (auto& [id, entry] : counts) {
    entry.tfidf = tfidf_from_counts(entry.raw_count, entry.doc_freq, docs.size());
    table.insert(vocabulary.entry(id).term, entry);
  }
  return table;
}

}  // namespace driftscope::freq
