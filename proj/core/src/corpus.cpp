#include "driftscope/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "driftscope/error.hpp"

namespace driftscope::corpus {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kManifestHeader = "snapshot_id,date,doc_count,checksum";

std::string document_line(const DocumentRecord& doc) {
  ordered_json j;
  j["id"] = doc.doc_id;
  if (!doc.title.empty()) j["title"] = doc.title;
  j["text"] = doc.body;
  if (doc.source_date) j["date"] = doc.source_date->to_string();
  return j.dump();
}

std::optional<DocumentRecord> parse_document_line(const std::string& line, std::string& error) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    error = "not a JSON object";
    return std::nullopt;
  }
  DocumentRecord doc;
  auto id = j.find("id");
  if (id == j.end()) {
    error = "missing 'id'";
    return std::nullopt;
  }
  if (id->is_string()) {
    doc.doc_id = id->get<std::string>();
  } else if (id->is_number_integer()) {
    doc.doc_id = std::to_string(id->get<long long>());
  } else {
    error = "'id' is neither string nor integer";
    return std::nullopt;
  }
  if (doc.doc_id.empty()) {
    error = "empty 'id'";
    return std::nullopt;
  }
  auto text = j.find("text");
  if (text == j.end() || !text->is_string()) {
    error = "missing or non-string 'text'";
    return std::nullopt;
  }
  doc.body = text->get<std::string>();
  if (doc.body.empty()) {
    error = "empty body";
    return std::nullopt;
  }
  if (auto title = j.find("title"); title != j.end() && title->is_string()) {
    doc.title = title->get<std::string>();
  }
  if (auto date = j.find("date"); date != j.end() && date->is_string()) {
    doc.source_date = Date::parse(date->get<std::string>());
    if (!doc.source_date) {
      error = "unparseable 'date'";
      return std::nullopt;
    }
  }
  return doc;
}

std::vector<DocumentRecord> read_jsonl(const fs::path& input, IngestStats& stats) {
  std::ifstream in(input, std::ios::binary);
  if (!in) throw IoError("cannot open input: " + input.string());
  std::vector<DocumentRecord> docs;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::string error;
    auto doc = parse_document_line(line, error);
    if (!doc) {
      ++stats.skipped;
      stats.warnings.push_back("line " + std::to_string(line_no) + ": " + error);
      continue;
    }
    if (!seen_ids.insert(doc->doc_id).second) {
      ++stats.skipped;
      stats.warnings.push_back("line " + std::to_string(line_no) + ": duplicate doc_id '" +
                               doc->doc_id + "'");
      continue;
    }
    docs.push_back(std::move(*doc));
  }
  return docs;
}

std::vector<DocumentRecord> read_text_directory(const fs::path& input, IngestStats& stats) {
  if (!fs::is_directory(input)) throw IoError("not a directory: " + input.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(input)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<DocumentRecord> docs;
  for (const auto& file : files) {
    DocumentRecord doc;
    doc.doc_id = fs::relative(file, input).generic_string();
    doc.title = file.stem().string();
    doc.body = read_file(file.string());
    if (doc.body.empty()) {
      ++stats.skipped;
      stats.warnings.push_back(doc.doc_id + ": empty body");
      continue;
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

void atomic_write(const fs::path& target, const std::string& bytes) {
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace

CorpusSnapshot CorpusSnapshot::create(std::string snapshot_id, Date date,
                                      std::vector<DocumentRecord> documents) {
  if (snapshot_id.empty()) throw InvalidInput("snapshot_id must not be empty");
  std::sort(documents.begin(), documents.end(),
            [](const DocumentRecord& a, const DocumentRecord& b) { return a.doc_id < b.doc_id; });
  for (std::size_t i = 0; i < documents.size(); ++i) {
    if (documents[i].doc_id.empty()) throw InvalidInput("document with empty doc_id");
    if (documents[i].body.empty()) {
      throw InvalidInput("document with empty body: " + documents[i].doc_id);
    }
    if (i > 0 && documents[i].doc_id == documents[i - 1].doc_id) {
      throw InvalidInput("duplicate doc_id in snapshot: " + documents[i].doc_id);
    }
  }
  CorpusSnapshot snapshot;
  snapshot.snapshot_id_ = std::move(snapshot_id);
  snapshot.date_ = date;
  snapshot.documents_ = std::move(documents);
  return snapshot;
}

const ManifestEntry* SnapshotManifest::find(std::string_view snapshot_id) const {
  for (const auto& entry : entries) {
    if (entry.snapshot_id == snapshot_id) return &entry;
  }
  return nullptr;
}

std::string canonical_document_bytes(std::span<const DocumentRecord> documents) {
  std::vector<const DocumentRecord*> sorted;
  sorted.reserve(documents.size());
  for (const auto& doc : documents) sorted.push_back(&doc);
  std::sort(sorted.begin(), sorted.end(),
            [](const DocumentRecord* a, const DocumentRecord* b) { return a->doc_id < b->doc_id; });
  std::string bytes;
  for (const auto* doc : sorted) {
    bytes += document_line(*doc);
    bytes.push_back('\n');
  }
  return bytes;
}

std::uint64_t snapshot_checksum(std::span<const DocumentRecord> documents) {
  return fnv1a64(canonical_document_bytes(documents));
}

SnapshotStore::SnapshotStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  fs::create_directories(root_ / "snapshots");
}

fs::path SnapshotStore::snapshot_path(std::string_view snapshot_id) const {
  return root_ / "snapshots" / (std::string(snapshot_id) + ".jsonl");
}

fs::path SnapshotStore::manifest_path() const { return root_ / "manifest.csv"; }

CorpusSnapshot SnapshotStore::ingest_snapshot(const fs::path& input, Date date,
                                              IngestFormat format, const IngestOptions& options,
                                              IngestStats* stats_out) {
  SnapshotManifest manifest = list_snapshots();
  for (const auto& entry : manifest.entries) {
    if (entry.date == date) {
      throw InvalidInput("duplicate snapshot date: " + date.to_string());
    }
  }
  std::string snapshot_id = options.snapshot_id.value_or(date.to_string());
  if (manifest.find(snapshot_id) != nullptr) {
    throw InvalidInput("duplicate snapshot_id: " + snapshot_id);
  }

  IngestStats stats;
  std::vector<DocumentRecord> docs = format == IngestFormat::jsonl
                                         ? read_jsonl(input, stats)
                                         : read_text_directory(input, stats);
  stats.accepted = docs.size();

  if (options.incremental) {
    const ManifestEntry* base = nullptr;
    for (const auto& entry : manifest.entries) {
      if (entry.date < date) base = &entry;  // entries sorted ascending
    }
    if (base == nullptr) {
      throw InvalidInput("incremental ingest needs an earlier snapshot as base");
    }
    CorpusSnapshot base_snapshot = load_snapshot(base->snapshot_id);
    std::unordered_set<std::string> new_ids;
    for (const auto& doc : docs) new_ids.insert(doc.doc_id);
    std::vector<DocumentRecord> merged;
    merged.reserve(base_snapshot.doc_count() + docs.size());
    for (const auto& doc : base_snapshot.documents()) {
      if (new_ids.find(doc.doc_id) == new_ids.end()) merged.push_back(doc);
    }
    for (auto& doc : docs) merged.push_back(std::move(doc));
    docs = std::move(merged);
  }

  if (docs.empty()) throw InvalidInput("no valid documents in input: " + input.string());

  CorpusSnapshot snapshot = CorpusSnapshot::create(snapshot_id, date, std::move(docs));
  std::string bytes = canonical_document_bytes(snapshot.documents());
  atomic_write(snapshot_path(snapshot_id), bytes);

  ManifestEntry entry;
  entry.snapshot_id = snapshot_id;
  entry.date = date;
  entry.doc_count = snapshot.doc_count();
  entry.checksum = fnv1a64(bytes);
  manifest.entries.push_back(entry);
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.date < b.date; });
  write_manifest(manifest);

  if (stats_out != nullptr) *stats_out = stats;
  return snapshot;
}

SnapshotManifest SnapshotStore::list_snapshots() const {
  SnapshotManifest manifest;
  if (!fs::exists(manifest_path())) return manifest;
  std::ifstream in(manifest_path(), std::ios::binary);
  if (!in) throw IoError("cannot read manifest: " + manifest_path().string());
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw IntegrityError("bad manifest header: " + manifest_path().string());
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = csv_parse_line(line);
    if (fields.size() != 4) throw IntegrityError("bad manifest row: " + line);
    ManifestEntry entry;
    entry.snapshot_id = fields[0];
    auto date = Date::parse(fields[1]);
    if (!date) throw IntegrityError("bad manifest date: " + fields[1]);
    entry.date = *date;
    try {
      entry.doc_count = std::stoull(fields[2]);
    } catch (const std::exception&) {
      throw IntegrityError("bad manifest doc_count: " + fields[2]);
    }
    auto checksum = parse_checksum_hex(fields[3]);
    if (!checksum) throw IntegrityError("bad manifest checksum: " + fields[3]);
    entry.checksum = *checksum;
    if (!manifest.entries.empty() && !(manifest.entries.back().date < entry.date)) {
      throw IntegrityError("manifest entries not sorted by date");
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

CorpusSnapshot SnapshotStore::load_snapshot(std::string_view snapshot_id) const {
  SnapshotManifest manifest = list_snapshots();
  const ManifestEntry* entry = manifest.find(snapshot_id);
  if (entry == nullptr) throw InvalidInput("unknown snapshot: " + std::string(snapshot_id));

  std::string bytes = read_file(snapshot_path(snapshot_id).string());
  if (fnv1a64(bytes) != entry->checksum) {
    throw IntegrityError("snapshot checksum mismatch: " + std::string(snapshot_id));
  }

  std::vector<DocumentRecord> docs;
  std::istringstream in(bytes);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::string error;
    auto doc = parse_document_line(line, error);
    if (!doc) throw IntegrityError("corrupt snapshot record: " + error);
    docs.push_back(std::move(*doc));
  }
  if (docs.size() != entry->doc_count) {
    throw IntegrityError("snapshot doc_count mismatch: " + std::string(snapshot_id));
  }
  return CorpusSnapshot::create(entry->snapshot_id, entry->date, std::move(docs));
}

void SnapshotStore::write_manifest(const SnapshotManifest& manifest) const {
  std::ostringstream out;
  out << kManifestHeader << '\n';
  for (const auto& entry : manifest.entries) {
    csv_write_row(out, {entry.snapshot_id, entry.date.to_string(),
                        std::to_string(entry.doc_count), checksum_hex(entry.checksum)});
  }
  atomic_write(manifest_path(), out.str());
}

std::vector<GrowthRow> growth_report(const SnapshotManifest& manifest) {
  if (manifest.empty()) throw InvalidInput("growth report on empty manifest");
  std::vector<GrowthRow> rows;
  rows.reserve(manifest.entries.size());
  std::uint64_t prev = 0;
  for (const auto& entry : manifest.entries) {
    GrowthRow row;
    row.snapshot_id = entry.snapshot_id;
    row.date = entry.date;
    row.doc_count = entry.doc_count;
    row.delta = static_cast<std::int64_t>(entry.doc_count) - static_cast<std::int64_t>(prev);
    prev = entry.doc_count;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace driftscope::corpus
