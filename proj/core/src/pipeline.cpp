#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "driftscope/freq.hpp"
#include "driftscope/pipeline.hpp"
#include "driftscope/util.hpp"

#include <json.hpp>

namespace fs = std::filesystem;

namespace driftscope::pipeline {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

[[noreturn]] void config_fail(const fs::path& path, std::size_t line_no, const std::string& what) {
  throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + what);
}

double parse_double(const std::string& value, const fs::path& path, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("trailing characters");
    return parsed;
  } catch (const std::exception&) {
    config_fail(path, line_no, "expected a number, got '" + value + "'");
  }
}

std::uint64_t parse_unsigned(const std::string& value, const fs::path& path,
                             std::size_t line_no) {
  std::uint64_t parsed = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    config_fail(path, line_no, "expected an unsigned integer, got '" + value + "'");
  }
  return parsed;
}

bool parse_bool(const std::string& value, const fs::path& path, std::size_t line_no) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  config_fail(path, line_no, "expected true or false, got '" + value + "'");
}

}  // namespace

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config: " + path.string());

  PipelineConfig config;
  std::string section;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    if (text.front() == '[') {
      if (text.back() != ']') config_fail(path, line_no, "unterminated section header");
      section = trim(text.substr(1, text.size() - 2));
      if (section != "store" && section != "phrases" && section != "training" &&
          section != "analysis" && section != "run") {
        config_fail(path, line_no, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) config_fail(path, line_no, "expected key = value");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (section.empty()) config_fail(path, line_no, "key outside any section");

    if (section == "store") {
      if (key == "path") {
        config.store = value;
      } else {
        config_fail(path, line_no, "unknown key '" + key + "' in [store]");
      }
    } else if (section == "phrases") {
      if (key == "seed_list") {
        config.phrases.seed_list = value;
      } else if (key == "delta") {
        config.phrases.params.delta = parse_double(value, path, line_no);
      } else if (key == "threshold") {
        config.phrases.params.threshold = parse_double(value, path, line_no);
      } else if (key == "passes") {
        config.phrases.params.passes = static_cast<int>(parse_unsigned(value, path, line_no));
      } else {
        config_fail(path, line_no, "unknown key '" + key + "' in [phrases]");
      }
    } else if (section == "training") {
      auto& t = config.training;
      if (key == "dimension") {
        t.dimension = static_cast<std::uint32_t>(parse_unsigned(value, path, line_no));
      } else if (key == "window") {
        t.window = static_cast<std::uint32_t>(parse_unsigned(value, path, line_no));
      } else if (key == "min_count") {
        t.min_count = static_cast<std::uint32_t>(parse_unsigned(value, path, line_no));
      } else if (key == "negatives") {
        t.negatives = static_cast<std::uint32_t>(parse_unsigned(value, path, line_no));
      } else if (key == "epochs") {
        t.epochs = static_cast<std::uint32_t>(parse_unsigned(value, path, line_no));
      } else if (key == "learning_rate") {
        t.learning_rate = static_cast<float>(parse_double(value, path, line_no));
      } else if (key == "min_learning_rate") {
        t.min_learning_rate = static_cast<float>(parse_double(value, path, line_no));
      } else if (key == "subsample") {
        t.subsample = parse_double(value, path, line_no);
      } else if (key == "seed") {
        t.seed = parse_unsigned(value, path, line_no);
      } else if (key == "threads") {
        t.threads = static_cast<std::uint32_t>(parse_unsigned(value, path, line_no));
      } else if (key == "frozen") {
        if (value == "target") {
          t.frozen = embed::FrozenMatrix::target;
        } else if (value == "context") {
          t.frozen = embed::FrozenMatrix::context;
        } else {
          config_fail(path, line_no, "frozen must be target or context");
        }
      } else {
        config_fail(path, line_no, "unknown key '" + key + "' in [training]");
      }
    } else if (section == "analysis") {
      auto& a = config.analysis;
      if (key == "k") {
        a.k = parse_unsigned(value, path, line_no);
      } else if (key == "min_run") {
        a.min_run = parse_unsigned(value, path, line_no);
      } else if (key == "threshold") {
        a.threshold = parse_double(value, path, line_no);
      } else if (key == "run_select") {
        if (value == "earliest") {
          a.run_select = diachrony::RunSelect::earliest;
        } else if (value == "latest") {
          a.run_select = diachrony::RunSelect::latest;
        } else {
          config_fail(path, line_no, "run_select must be earliest or latest");
        }
      } else {
        config_fail(path, line_no, "unknown key '" + key + "' in [analysis]");
      }
    } else {  // run
      if (key == "deterministic") {
        config.deterministic = parse_bool(value, path, line_no);
      } else {
        config_fail(path, line_no, "unknown key '" + key + "' in [run]");
      }
    }
  }
  return config;
}

void PipelineConfig::validate() const {
  if (phrases.params.delta < 0) throw ConfigError("phrase delta must be nonnegative");
  if (phrases.params.threshold <= 0) throw ConfigError("phrase threshold must be positive");
  if (phrases.params.passes < 1) throw ConfigError("phrase passes must be at least 1");
  if (!phrases.seed_list.empty() && !fs::exists(phrases.seed_list)) {
    throw ConfigError("seed list does not exist: " + phrases.seed_list.string());
  }
  training.validate();
  if (analysis.k < 1) throw ConfigError("analysis k must be at least 1");
  if (analysis.min_run < 2) throw ConfigError("analysis min_run must be at least 2");
  if (analysis.threshold < 0 || analysis.threshold > 1) {
    throw ConfigError("classification threshold must be in [0, 1]");
  }
}

embed::TrainingConfig PipelineConfig::effective_training() const {
  embed::TrainingConfig t = training;
  if (deterministic) t.threads = 1;
  return t;
}

std::string PipelineConfig::serialize() const {
  std::ostringstream out;
  out << "[store]\n";
  out << "path = " << store.string() << '\n';
  out << "[phrases]\n";
  out << "seed_list = " << phrases.seed_list.string() << '\n';
  out << "delta = " << format_real(phrases.params.delta) << '\n';
  out << "threshold = " << format_real(phrases.params.threshold) << '\n';
  out << "passes = " << phrases.params.passes << '\n';
  out << "[training]\n";
  out << "dimension = " << training.dimension << '\n';
  out << "window = " << training.window << '\n';
  out << "min_count = " << training.min_count << '\n';
  out << "negatives = " << training.negatives << '\n';
  out << "epochs = " << training.epochs << '\n';
  out << "learning_rate = " << format_real(training.learning_rate) << '\n';
  out << "min_learning_rate = " << format_real(training.min_learning_rate) << '\n';
  out << "subsample = " << format_real(training.subsample) << '\n';
  out << "seed = " << training.seed << '\n';
  out << "threads = " << training.threads << '\n';
  out << "frozen = " << (training.frozen == embed::FrozenMatrix::target ? "target" : "context")
      << '\n';
  out << "[analysis]\n";
  out << "k = " << analysis.k << '\n';
  out << "min_run = " << analysis.min_run << '\n';
  out << "threshold = " << format_real(analysis.threshold) << '\n';
  out << "run_select = "
      << (analysis.run_select == diachrony::RunSelect::earliest ? "earliest" : "latest") << '\n';
  out << "[run]\n";
  out << "deterministic = " << (deterministic ? "true" : "false") << '\n';
  return out.str();
}

std::uint64_t PipelineConfig::checksum() const { return fnv1a64(serialize()); }

fs::path resolve_store(const fs::path& cli_store, const PipelineConfig& config) {
  if (!cli_store.empty()) return cli_store;
  if (!config.store.empty()) return config.store;
  if (const char* env = std::getenv("DRIFTSCOPE_STORE"); env != nullptr && *env != '\0') {
    return fs::path(env);
  }
  throw ConfigError(
      "no store path: pass --store, set [store] path in the config, or set DRIFTSCOPE_STORE");
}

fs::path phrases_path(const fs::path& store) { return store / "phrases.csv"; }
fs::path compass_path(const fs::path& store) { return store / "models" / "compass.bin"; }
fs::path slice_path(const fs::path& store, std::string_view snapshot_id) {
  return store / "models" / ("slice-" + std::string(snapshot_id) + ".bin");
}
fs::path tfidf_path(const fs::path& store, std::string_view snapshot_id) {
  return store / "tfidf" / (std::string(snapshot_id) + ".csv");
}
fs::path reports_dir(const fs::path& store) { return store / "reports"; }
fs::path analysis_dir(const fs::path& store) { return store / "reports" / "analysis"; }

StoreLock::StoreLock(const fs::path& store) {
  fs::create_directories(store);
  path_ = store / ".lock";
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    path_.clear();
    throw InvalidInput("store is locked by another command (remove " +
                       (store / ".lock").string() + " if stale)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

StoreLock::~StoreLock() {
  if (!path_.empty()) {
    std::error_code ec;
    fs::remove(path_, ec);
  }
}

std::vector<text::TokenStream> tokenize_snapshot(const corpus::CorpusSnapshot& snapshot,
                                                 const text::PhraseDictionary* dict) {
  std::vector<text::TokenStream> streams;
  streams.reserve(snapshot.doc_count());
  for (const auto& doc : snapshot.documents()) {
    std::string content = doc.title.empty() ? doc.body : doc.title + "\n" + doc.body;
    auto tokens = text::tokenize(content);
    if (dict != nullptr && dict->size() > 0) tokens = text::apply_phrases(tokens, *dict);
    streams.push_back(std::move(tokens));
  }
  return streams;
}

namespace {

class CommandTimer {
 public:
  std::int64_t elapsed_ms() const {
    const auto now = std::chrono::steady_clock::now();
    return std::chrono::duration_cast<std::chrono::milliseconds>(now - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void append_ledger(const fs::path& store, const PipelineConfig& config, std::string_view command,
                   const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                   std::int64_t duration_ms) {
  nlohmann::ordered_json entry;
  entry["command"] = std::string(command);
  entry["config"] = checksum_hex(config.checksum());
  auto describe = [](const std::vector<fs::path>& paths) {
    auto list = nlohmann::ordered_json::array();
    for (const auto& p : paths) {
      list.push_back({{"path", p.generic_string()},
                      {"checksum", checksum_hex(fnv1a64(read_file(p.string())))}});
    }
    return list;
  };
  entry["inputs"] = describe(inputs);
  entry["outputs"] = describe(outputs);
  entry["duration_ms"] = duration_ms;

  std::ofstream out(store / "ledger.jsonl", std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to the run ledger");
  out << entry.dump() << '\n';
}

template <typename WriteFn>
void stage_file(const fs::path& final_path, WriteFn&& write) {
  fs::create_directories(final_path.parent_path());
  fs::path tmp = final_path;
  tmp += ".tmp";
  write(tmp);
  fs::rename(tmp, final_path);
}

corpus::SnapshotManifest require_snapshots(const corpus::SnapshotStore& store) {
  auto manifest = store.list_snapshots();
  if (manifest.empty()) {
    throw InvalidInput("store has no snapshots; run ingest first");
  }
  return manifest;
}

text::PhraseDictionary load_phrases_if_any(const fs::path& store, std::ostream& out) {
  const auto path = phrases_path(store);
  if (!fs::exists(path)) {
    out << "note: no phrase dictionary in the store, using raw tokens\n";
    return {};
  }
  return text::PhraseDictionary::load_csv(path);
}

// Snapshots, chronological, with their tokenized documents.
struct LoadedSnapshot {
  std::string snapshot_id;
  std::vector<text::TokenStream> streams;
};

std::vector<LoadedSnapshot> load_tokenized(const corpus::SnapshotStore& store,
                                           const corpus::SnapshotManifest& manifest,
                                           const text::PhraseDictionary* dict) {
  std::vector<LoadedSnapshot> loaded;
  loaded.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    auto snapshot = store.load_snapshot(entry.snapshot_id);
    loaded.push_back({entry.snapshot_id, tokenize_snapshot(snapshot, dict)});
  }
  return loaded;
}

std::vector<std::string> read_name_list(const fs::path& path) {
  std::istringstream in(read_file(path.string()));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string name = trim(line);
    if (!name.empty() && name[0] != '#') names.push_back(name);
  }
  return names;
}

}  // namespace

void cmd_ingest(const PipelineConfig& config, const IngestArgs& args, std::ostream& out) {
  config.validate();
  const auto date = Date::parse(args.date);
  if (!date) throw InvalidInput("invalid ISO-8601 date: " + args.date);

  CommandTimer timer;
  StoreLock lock(config.store);
  corpus::SnapshotStore store(config.store);
  corpus::IngestOptions options;
  options.snapshot_id = args.snapshot_id;
  options.incremental = args.incremental;
  corpus::IngestStats stats;
  const auto snapshot = store.ingest_snapshot(args.input, *date, args.format, options, &stats);

  for (const auto& warning : stats.warnings) out << "warning: " << warning << '\n';
  out << "snapshot " << snapshot.snapshot_id() << ": " << snapshot.doc_count() << " documents ("
      << stats.accepted << " accepted, " << stats.skipped << " skipped)\n";
  append_ledger(config.store, config, "ingest", {args.input},
                {store.snapshot_path(snapshot.snapshot_id()), store.manifest_path()},
                timer.elapsed_ms());
}

void cmd_phrases(const PipelineConfig& config, std::ostream& out) {
  config.validate();
  CommandTimer timer;
  StoreLock lock(config.store);
  corpus::SnapshotStore store(config.store);
  const auto manifest = require_snapshots(store);

  std::vector<text::TokenStream> streams;
  std::vector<fs::path> inputs;
  for (const auto& entry : manifest.entries) {
    auto snapshot = store.load_snapshot(entry.snapshot_id);
    auto tokenized = tokenize_snapshot(snapshot, nullptr);
    streams.insert(streams.end(), std::make_move_iterator(tokenized.begin()),
                   std::make_move_iterator(tokenized.end()));
    inputs.push_back(store.snapshot_path(entry.snapshot_id));
  }

  std::set<std::string> seeds;
  if (!config.phrases.seed_list.empty()) {
    seeds = text::load_seed_list(config.phrases.seed_list);
    inputs.push_back(config.phrases.seed_list);
  }

  const auto dict = text::build_phrase_dictionary(streams, seeds, config.phrases.params);
  stage_file(phrases_path(config.store), [&](const fs::path& p) { dict.save_csv(p); });

  std::size_t seeded = 0;
  for (const auto& [phrase, entry] : dict.entries()) seeded += entry.seeded ? 1 : 0;
  out << "phrase dictionary: " << dict.size() << " entries (" << seeded << " seeded, "
      << dict.size() - seeded << " learned)\n";
  append_ledger(config.store, config, "phrases", inputs, {phrases_path(config.store)},
                timer.elapsed_ms());
}

void cmd_train(const PipelineConfig& config, const TrainArgs& args, std::ostream& out) {
  config.validate();
  if (args.compass_only && args.slices_only) {
    throw ConfigError("--compass-only and --slices-only are mutually exclusive");
  }
  CommandTimer timer;
  StoreLock lock(config.store);
  corpus::SnapshotStore store(config.store);
  const auto manifest = require_snapshots(store);
  const auto dict = load_phrases_if_any(config.store, out);
  const auto training = config.effective_training();

  const auto snapshots = load_tokenized(store, manifest, &dict);
  std::vector<fs::path> inputs;
  for (const auto& entry : manifest.entries) inputs.push_back(store.snapshot_path(entry.snapshot_id));
  std::vector<fs::path> outputs;

  embed::CompassModel compass;
  if (args.slices_only) {
    if (!fs::exists(compass_path(config.store))) {
      throw InvalidInput("no compass model in the store; train the compass first");
    }
    compass = embed::load_compass(compass_path(config.store));
    inputs.push_back(compass_path(config.store));
  } else {
    std::vector<text::TokenStream> combined;
    for (const auto& snapshot : snapshots) {
      combined.insert(combined.end(), snapshot.streams.begin(), snapshot.streams.end());
    }
    compass = embed::train_compass(combined, training);
    stage_file(compass_path(config.store),
               [&](const fs::path& p) { embed::save_model(compass, p); });
    outputs.push_back(compass_path(config.store));
    out << "compass: " << compass.vocab().size() << " terms, dim " << training.dimension
        << ", checksum " << checksum_hex(embed::matrix_checksum(compass.context())) << '\n';
  }

  if (!args.compass_only) {
    for (const auto& snapshot : snapshots) {
      auto slice = embed::train_slice(snapshot.snapshot_id, snapshot.streams, compass, training);
      const auto path = slice_path(config.store, snapshot.snapshot_id);
      stage_file(path, [&](const fs::path& p) { embed::save_model(slice, p); });
      outputs.push_back(path);
      const auto& trained =
          training.frozen == embed::FrozenMatrix::target ? slice.context() : slice.target();
      out << "slice " << snapshot.snapshot_id << ": " << slice.vocab().size()
          << " terms, checksum " << checksum_hex(embed::matrix_checksum(trained)) << '\n';
    }
  }
  append_ledger(config.store, config, "train", inputs, outputs, timer.elapsed_ms());
}

void cmd_tfidf(const PipelineConfig& config, std::ostream& out) {
  config.validate();
  CommandTimer timer;
  StoreLock lock(config.store);
  corpus::SnapshotStore store(config.store);
  const auto manifest = require_snapshots(store);
  const auto dict = load_phrases_if_any(config.store, out);

  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  for (const auto& entry : manifest.entries) {
    auto snapshot = store.load_snapshot(entry.snapshot_id);
    const auto streams = tokenize_snapshot(snapshot, &dict);
    const auto vocab = text::Vocabulary::build(streams, 1);
    const auto table = freq::build_table(entry.snapshot_id, streams, vocab);
    const auto path = tfidf_path(config.store, entry.snapshot_id);
    stage_file(path, [&](const fs::path& p) { table.save_csv(p); });
    inputs.push_back(store.snapshot_path(entry.snapshot_id));
    outputs.push_back(path);
    out << "tfidf " << entry.snapshot_id << ": " << table.size() << " terms\n";
  }
  append_ledger(config.store, config, "tfidf", inputs, outputs, timer.elapsed_ms());
}

namespace {

struct AnalysisData {
  std::vector<freq::TfidfTable> tables;
  std::vector<embed::SliceModel> slices;
  embed::CompassModel compass;
};

AnalysisData load_analysis_data(const fs::path& store_path,
                                const corpus::SnapshotManifest& manifest,
                                const PipelineConfig& config) {
  AnalysisData data;
  if (!fs::exists(compass_path(store_path))) {
    throw InvalidInput("no compass model in the store; run train first");
  }
  data.compass = embed::load_compass(compass_path(store_path));
  for (const auto& entry : manifest.entries) {
    const auto table_path = tfidf_path(store_path, entry.snapshot_id);
    if (!fs::exists(table_path)) {
      throw InvalidInput("missing TF-IDF table for " + entry.snapshot_id + "; run tfidf first");
    }
    data.tables.push_back(freq::TfidfTable::load_csv(table_path, entry.snapshot_id));
    const auto model_path = slice_path(store_path, entry.snapshot_id);
    if (!fs::exists(model_path)) {
      throw InvalidInput("missing slice model for " + entry.snapshot_id + "; run train first");
    }
    data.slices.push_back(
        embed::load_slice(model_path, entry.snapshot_id, config.training.frozen));
  }
  return data;
}

}  // namespace

void cmd_analyze(const PipelineConfig& config, const fs::path& candidates_file,
                 std::ostream& out) {
  config.validate();
  CommandTimer timer;
  StoreLock lock(config.store);
  corpus::SnapshotStore store(config.store);
  const auto manifest = require_snapshots(store);
  const auto data = load_analysis_data(config.store, manifest, config);

  std::set<std::string> normalized;
  for (const auto& name : read_name_list(candidates_file)) {
    auto form = text::normalize_phrase(name);
    if (!form.empty()) normalized.insert(std::move(form));
  }
  if (normalized.empty()) throw InvalidInput("candidate list is empty: " + candidates_file.string());
  const std::vector<std::string> candidates(normalized.begin(), normalized.end());

  const auto min_count = config.training.min_count;
  const auto& analysis = config.analysis;

  std::vector<std::string> eligible;
  for (const auto& term : candidates) {
    const auto mask = diachrony::presence_mask(term, data.tables, data.slices, min_count);
    if (diachrony::eligible_run(mask, analysis.min_run)) eligible.push_back(term);
  }
  if (eligible.empty()) {
    throw InvalidInput("no eligible candidates: none meets min_count in " +
                       std::to_string(analysis.min_run) + " adjacent snapshots");
  }

  std::vector<diachrony::TermTimeseries> series;
  std::vector<diachrony::CorrelationReport> reports;
  for (const auto& term : eligible) {
    series.push_back(diachrony::assemble_timeseries(term, data.tables, data.slices, data.compass,
                                                    min_count, analysis.min_run,
                                                    analysis.run_select));
    reports.push_back(diachrony::correlate(series.back(), analysis.threshold));
  }

  const fs::path staging = config.store / ".staging-analysis";
  fs::remove_all(staging);
  fs::create_directories(staging);

  {
    std::ofstream det(staging / "detection.csv", std::ios::binary);
    csv_write_row(det, {"snapshot_id", "candidates", "detected", "coverage"});
    for (const auto& table : data.tables) {
      std::map<std::string, std::uint64_t> counts;
      for (const auto& [term, entry] : table.rows()) counts.emplace(term, entry.raw_count);
      const auto detection = diachrony::detect_candidates(candidates, counts);
      csv_write_row(det, {table.snapshot_id(), std::to_string(candidates.size()),
                          std::to_string(detection.detected.size()),
                          format_real(detection.coverage)});
    }
    if (!det) throw IoError("write failed: detection.csv");
  }

  {
    std::ofstream cand(staging / "candidates.csv", std::ios::binary);
    csv_write_row(cand, {"term", "first_snapshot", "last_snapshot", "n", "start_count",
                         "end_count", "final_tfidf", "final_cosine_distance", "r", "class"});
    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto& s = series[i];
      const auto& report = reports[i];
      csv_write_row(cand, {s.term, s.snapshot_ids.front(), s.snapshot_ids.back(),
                           std::to_string(s.size()), std::to_string(s.raw_counts.front()),
                           std::to_string(s.raw_counts.back()), format_real(s.y.back()),
                           format_real(s.z.back()),
                           report.r ? format_real(*report.r) : "NA",
                           std::string(diachrony::to_string(report.cls))});
    }
    if (!cand) throw IoError("write failed: candidates.csv");
  }

  diachrony::save_timeseries_csv(series, staging / "timeseries.csv");
  diachrony::save_correlations_csv(reports, staging / "correlations.csv");

  if (series.size() >= 2) {
    try {
      const auto tfidf_matrix = diachrony::timeseries_similarity_matrix(
          series, diachrony::SeriesMetric::tfidf_series, analysis.min_run);
      diachrony::save_best_matches_csv(tfidf_matrix, staging / "best_matches_tfidf.csv");
      const auto cosine_matrix = diachrony::timeseries_similarity_matrix(
          series, diachrony::SeriesMetric::cosine_series, analysis.min_run);
      diachrony::save_best_matches_csv(cosine_matrix, staging / "best_matches_cosine.csv");
    } catch (const InvalidInput& e) {
      out << "note: best matches skipped: " << e.what() << '\n';
    }
  } else {
    out << "note: best matches need at least two eligible candidates\n";
  }

  fs::create_directories(staging / "flows");
  fs::create_directories(staging / "heatmaps");
  for (const auto& term : eligible) {
    const auto flow = diachrony::neighbor_flows(term, data.slices, analysis.k);
    diachrony::save_flow_json(flow, staging / "flows" / (term + ".json"));
    const auto heatmap = diachrony::neighbor_heatmap(term, data.slices, analysis.k);
    diachrony::save_heatmap_csv(heatmap, staging / "heatmaps" / (term + ".csv"));
  }

  const auto final_dir = analysis_dir(config.store);
  fs::remove_all(final_dir);
  fs::create_directories(final_dir.parent_path());
  fs::rename(staging, final_dir);

  std::map<diachrony::CandidateClass, std::size_t> by_class;
  for (const auto& report : reports) ++by_class[report.cls];
  out << "analyzed " << eligible.size() << " eligible of " << candidates.size()
      << " candidates: " << by_class[diachrony::CandidateClass::positive] << " positive, "
      << by_class[diachrony::CandidateClass::negative] << " negative, "
      << by_class[diachrony::CandidateClass::uncorrelated] << " uncorrelated\n";
  out << "reports written to " << final_dir.generic_string() << '\n';

  std::vector<fs::path> outputs;
  for (const auto& file : fs::recursive_directory_iterator(final_dir)) {
    if (file.is_regular_file()) outputs.push_back(file.path());
  }
  std::sort(outputs.begin(), outputs.end());
  append_ledger(config.store, config, "analyze", {candidates_file}, outputs, timer.elapsed_ms());
}

void cmd_export_vectors(const PipelineConfig& config, const ExportArgs& args, std::ostream& out) {
  config.validate();
  if (!args.all && args.terms.empty()) {
    throw ConfigError("pass --all or at least one term");
  }
  CommandTimer timer;
  StoreLock lock(config.store);
  corpus::SnapshotStore store(config.store);
  const auto manifest = require_snapshots(store);
  const auto data = load_analysis_data(config.store, manifest, config);

  std::vector<std::string> requested;
  if (!args.all) {
    std::set<std::string> forms;
    for (const auto& term : args.terms) {
      const auto form = text::normalize_phrase(term);
      if (form.empty() || !data.compass.vocab().lookup(form)) {
        throw InvalidInput("unknown term: " + term);
      }
      forms.insert(form);
    }
    requested.assign(forms.begin(), forms.end());
  }

  const fs::path out_dir = args.out_dir.value_or(config.store / "vectors");
  fs::create_directories(out_dir);
  std::vector<fs::path> outputs;
  for (const auto& slice : data.slices) {
    const auto& matrix =
        slice.frozen() == embed::FrozenMatrix::target ? slice.context() : slice.target();
    std::vector<std::string> present;
    for (const auto& form : requested) {
      if (slice.vocab().lookup(form)) present.push_back(form);
    }
    const auto path = out_dir / (slice.snapshot_id() + ".txt");
    stage_file(path, [&](const fs::path& p) {
      if (!args.all && present.empty()) {
        std::ofstream empty(p, std::ios::binary);
        empty << "0 " << matrix.cols() << '\n';
        if (!empty) throw IoError("cannot write " + p.string());
        return;
      }
      embed::save_text_vectors(slice.vocab(), matrix, p, present);
    });
    outputs.push_back(path);
  }
  out << "wrote " << outputs.size() << " vector files to " << out_dir.generic_string() << '\n';
  append_ledger(config.store, config, "export-vectors", {}, outputs, timer.elapsed_ms());
}

void cmd_report(const PipelineConfig& config, std::ostream& out) {
  config.validate();
  CommandTimer timer;
  StoreLock lock(config.store);
  corpus::SnapshotStore store(config.store);
  const auto manifest = require_snapshots(store);
  const auto rows = corpus::growth_report(manifest);

  const auto path = reports_dir(config.store) / "growth.csv";
  stage_file(path, [&](const fs::path& p) {
    std::ofstream csv(p, std::ios::binary);
    if (!csv) throw IoError("cannot write " + p.string());
    csv_write_row(csv, {"snapshot_id", "date", "doc_count", "delta"});
    for (const auto& row : rows) {
      csv_write_row(csv, {row.snapshot_id, row.date.to_string(), std::to_string(row.doc_count),
                          std::to_string(row.delta)});
    }
    if (!csv) throw IoError("write failed: " + p.string());
  });

  for (const auto& row : rows) {
    out << row.snapshot_id << "  " << row.date.to_string() << "  " << row.doc_count << "  "
        << (row.delta >= 0 ? "+" : "") << row.delta << '\n';
  }
  append_ledger(config.store, config, "report", {store.manifest_path()}, {path},
                timer.elapsed_ms());
}

}  // namespace driftscope::pipeline
