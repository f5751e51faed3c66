#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "driftscope/corpus.hpp"
#include "driftscope/diachrony.hpp"
#include "driftscope/embed.hpp"
#include "driftscope/text.hpp"

namespace driftscope::pipeline {

struct PhraseConfig {
  std::filesystem::path seed_list;  // empty = no seeds
  text::PhraseParams params;
};

struct AnalysisConfig {
  std::size_t k = 10;          // neighbors per slice
  std::size_t min_run = 4;     // adjacent snapshots required for eligibility
  double threshold = 0.53;     // classification band edge
  diachrony::RunSelect run_select = diachrony::RunSelect::earliest;
};

struct PipelineConfig {
  std::filesystem::path store;
  PhraseConfig phrases;
  embed::TrainingConfig training;
  AnalysisConfig analysis;
  bool deterministic = false;  // forces single-threaded training

  // Throws ConfigError on out-of-range values or a missing seed list.
  void validate() const;
  // Training parameters after the deterministic flag is applied.
  embed::TrainingConfig effective_training() const;
  // Canonical key-value serialization; its checksum identifies the run config.
  std::string serialize() const;
  std::uint64_t checksum() const;
};

// Sectioned key = value text; '#' comments; unknown keys are errors.
PipelineConfig load_config(const std::filesystem::path& path);

// Store precedence: --store flag, then config value, then DRIFTSCOPE_STORE.
std::filesystem::path resolve_store(const std::filesystem::path& cli_store,
                                    const PipelineConfig& config);

// Store layout helpers.
std::filesystem::path phrases_path(const std::filesystem::path& store);
std::filesystem::path compass_path(const std::filesystem::path& store);
std::filesystem::path slice_path(const std::filesystem::path& store, std::string_view snapshot_id);
std::filesystem::path tfidf_path(const std::filesystem::path& store, std::string_view snapshot_id);
std::filesystem::path reports_dir(const std::filesystem::path& store);
std::filesystem::path analysis_dir(const std::filesystem::path& store);

// One command instance per store. Created on construction, released on
// destruction; a second lock on the same store throws InvalidInput.
class StoreLock {
 public:
  explicit StoreLock(const std::filesystem::path& store);
  ~StoreLock();
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Tokenizes title + body per document, then merges dictionary phrases.
std::vector<text::TokenStream> tokenize_snapshot(const corpus::CorpusSnapshot& snapshot,
                                                 const text::PhraseDictionary* dict);

struct IngestArgs {
  std::filesystem::path input;
  std::string date;  // ISO-8601, required
  std::optional<std::string> snapshot_id;
  corpus::IngestFormat format = corpus::IngestFormat::jsonl;
  bool incremental = false;
};

struct TrainArgs {
  bool compass_only = false;
  bool slices_only = false;  // requires a previously trained compass
};

struct ExportArgs {
  std::vector<std::string> terms;  // empty + all=false is an error
  bool all = false;
  std::optional<std::filesystem::path> out_dir;  // default <store>/vectors
};

// Commands throw on failure; the CLI maps exceptions to nonzero exit codes.
void cmd_ingest(const PipelineConfig& config, const IngestArgs& args, std::ostream& out);
void cmd_phrases(const PipelineConfig& config, std::ostream& out);
void cmd_train(const PipelineConfig& config, const TrainArgs& args, std::ostream& out);
void cmd_tfidf(const PipelineConfig& config, std::ostream& out);
void cmd_analyze(const PipelineConfig& config, const std::filesystem::path& candidates_file,
                 std::ostream& out);
void cmd_export_vectors(const PipelineConfig& config, const ExportArgs& args, std::ostream& out);
void cmd_report(const PipelineConfig& config, std::ostream& out);

}  // namespace driftscope::pipeline
