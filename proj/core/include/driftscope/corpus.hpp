#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftscope/util.hpp"

namespace driftscope::corpus {

struct DocumentRecord {
  std::string doc_id;
  std::string title;
  std::string body;
  std::optional<Date> source_date;
};

// Dated, immutable set of documents. Documents are stored sorted by doc_id
// so the content checksum is independent of input order.
class CorpusSnapshot {
 public:
  // Validates: non-empty unique doc_ids, non-empty bodies.
  static CorpusSnapshot create(std::string snapshot_id, Date date,
                               std::vector<DocumentRecord> documents);

  const std::string& snapshot_id() const { return snapshot_id_; }
  const Date& snapshot_date() const { return date_; }
  std::span<const DocumentRecord> documents() const { return documents_; }
  std::uint64_t doc_count() const { return documents_.size(); }

 private:
  CorpusSnapshot() = default;
  std::string snapshot_id_;
  Date date_;
  std::vector<DocumentRecord> documents_;
};

struct ManifestEntry {
  std::string snapshot_id;
  Date date;
  std::uint64_t doc_count = 0;
  std::uint64_t checksum = 0;
};

// Date-sorted ascending.
struct SnapshotManifest {
  std::vector<ManifestEntry> entries;

  bool empty() const { return entries.empty(); }
  const ManifestEntry* find(std::string_view snapshot_id) const;
};

enum class IngestFormat { jsonl, text_directory };

struct IngestOptions {
  // Defaults to the ISO date string.
  std::optional<std::string> snapshot_id;
  // Compose a cumulative snapshot from the latest earlier snapshot plus the
  // new input; a new record with an existing doc_id replaces the old one.
  bool incremental = false;
};

struct IngestStats {
  std::uint64_t accepted = 0;
  std::uint64_t skipped = 0;
  std::vector<std::string> warnings;
};

// Canonical serialization of one document set: JSONL sorted by doc_id with
// fixed key order. Checksums are taken over these bytes.
std::string canonical_document_bytes(std::span<const DocumentRecord> documents);
std::uint64_t snapshot_checksum(std::span<const DocumentRecord> documents);

class SnapshotStore {
 public:
  // Creates the store directory layout if missing.
  explicit SnapshotStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  CorpusSnapshot ingest_snapshot(const std::filesystem::path& input, Date date,
                                 IngestFormat format, const IngestOptions& options = {},
                                 IngestStats* stats = nullptr);

  // Reads and validates the manifest file. Missing file means empty store.
  SnapshotManifest list_snapshots() const;

  // Verifies the stored bytes against the manifest checksum.
  CorpusSnapshot load_snapshot(std::string_view snapshot_id) const;

  std::filesystem::path snapshot_path(std::string_view snapshot_id) const;
  std::filesystem::path manifest_path() const;

 private:
  void write_manifest(const SnapshotManifest& manifest) const;
  std::filesystem::path root_;
};

struct GrowthRow {
  std::string snapshot_id;
  Date date;
  std::uint64_t doc_count = 0;
  std::int64_t delta = 0;  // first row's delta equals its count
};

// Throws InvalidInput on an empty manifest.
std::vector<GrowthRow> growth_report(const SnapshotManifest& manifest);

}  // namespace driftscope::corpus
