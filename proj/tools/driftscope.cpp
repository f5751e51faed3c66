#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "driftscope/pipeline.hpp"

namespace fs = std::filesystem;
using namespace driftscope;

int main(int argc, char** argv) {
  CLI::App app{"Track term frequency and semantic drift across dated corpus snapshots"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string store_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> threads;
  std::optional<std::size_t> k;
  bool deterministic = false;
  app.add_option("--config", config_path, "Configuration file");
  app.add_option("--store", store_path, "Store directory (overrides config and DRIFTSCOPE_STORE)");
  app.add_option("--seed", seed, "Training RNG seed");
  app.add_option("--threads", threads, "Training threads (>1 is nondeterministic)");
  app.add_option("--k", k, "Neighbors per slice");
  app.add_flag("--deterministic", deterministic, "Single-threaded training with the fixed seed");

  auto* ingest = app.add_subcommand("ingest", "Add one dated snapshot to the store");
  pipeline::IngestArgs ingest_args;
  std::string ingest_input;
  std::string ingest_format = "jsonl";
  std::string ingest_id;
  ingest->add_option("input", ingest_input, "JSONL file or document directory")->required();
  ingest->add_option("--date", ingest_args.date, "Snapshot date, ISO-8601")->required();
  ingest->add_option("--id", ingest_id, "Snapshot id (defaults to the date)");
  ingest->add_option("--format", ingest_format, "jsonl or dir")
      ->check(CLI::IsMember({"jsonl", "dir"}));
  ingest->add_flag("--incremental", ingest_args.incremental,
                   "Compose with the latest earlier snapshot");

  auto* phrases = app.add_subcommand("phrases", "Learn the phrase dictionary from the store");

  auto* train = app.add_subcommand("train", "Train the compass and per-snapshot slice models");
  pipeline::TrainArgs train_args;
  train->add_flag("--compass-only", train_args.compass_only, "Train only the compass");
  train->add_flag("--slices-only", train_args.slices_only,
                  "Train only slices against an existing compass");

  auto* tfidf = app.add_subcommand("tfidf", "Build per-snapshot TF-IDF tables");

  auto* analyze = app.add_subcommand("analyze", "Correlate and classify candidate terms");
  std::string candidates_path;
  analyze->add_option("candidates", candidates_path, "Candidate name list, one per line")
      ->required();

  auto* export_vectors =
      app.add_subcommand("export-vectors", "Write per-slice vectors in text format");
  pipeline::ExportArgs export_args;
  std::string export_out;
  export_vectors->add_option("terms", export_args.terms, "Terms to export");
  export_vectors->add_flag("--all", export_args.all, "Export every vocabulary term");
  export_vectors->add_option("--out", export_out, "Output directory (default <store>/vectors)");

  auto* report = app.add_subcommand("report", "Print snapshot growth");

  CLI11_PARSE(app, argc, argv);

  try {
    pipeline::PipelineConfig config;
    if (!config_path.empty()) config = pipeline::load_config(config_path);
    config.store = pipeline::resolve_store(store_path, config);
    if (seed) config.training.seed = *seed;
    if (threads) config.training.threads = *threads;
    if (k) config.analysis.k = *k;
    if (deterministic) config.deterministic = true;
    config.training = config.effective_training();

    if (ingest->parsed()) {
      ingest_args.input = ingest_input;
      if (!ingest_id.empty()) ingest_args.snapshot_id = ingest_id;
      ingest_args.format = ingest_format == "dir" ? corpus::IngestFormat::text_directory
                                                  : corpus::IngestFormat::jsonl;
      pipeline::cmd_ingest(config, ingest_args, std::cout);
    } else if (phrases->parsed()) {
      pipeline::cmd_phrases(config, std::cout);
    } else if (train->parsed()) {
      pipeline::cmd_train(config, train_args, std::cout);
    } else if (tfidf->parsed()) {
      pipeline::cmd_tfidf(config, std::cout);
    } else if (analyze->parsed()) {
      pipeline::cmd_analyze(config, candidates_path, std::cout);
    } else if (export_vectors->parsed()) {
      if (!export_out.empty()) export_args.out_dir = fs::path(export_out);
      pipeline::cmd_export_vectors(config, export_args, std::cout);
    } else if (report->parsed()) {
      pipeline::cmd_report(config, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
