#pragma once

// Shared fixtures and independent oracles for the test binaries. The oracles
// recompute expected values from first principles (direct formulas, brute
// force scans) so the library is never checked against itself.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "driftscope/embed.hpp"
#include "driftscope/text.hpp"

namespace testutil {

namespace fs = std::filesystem;

inline fs::path unique_temp_dir() {
  static std::atomic<unsigned> counter{0};
  std::ostringstream name;
  name << "driftscope-test-" << ::getpid() << "-" << counter.fetch_add(1);
  return fs::temp_directory_path() / name.str();
}

class TempDir {
 public:
  TempDir() : path_(unique_temp_dir()) { fs::create_directories(path_); }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(std::string_view sub) const { return path_ / sub; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.close();
  if (!out) throw std::runtime_error("test helper failed to write " + path.string());
}

inline std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("test helper failed to read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Relative path -> file bytes for every regular file under root, excluding
// basenames listed in `exclude`. Used for byte-identical store comparisons.
inline std::map<std::string, std::string> dir_contents(const fs::path& root,
                                                       const std::set<std::string>& exclude = {}) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    if (exclude.count(entry.path().filename().string()) > 0) continue;
    out[fs::relative(entry.path(), root).generic_string()] = read_bytes(entry.path());
  }
  return out;
}

inline std::string jsonl_doc(const std::string& id, const std::string& title,
                             const std::string& body) {
  nlohmann::json j;
  j["id"] = id;
  if (!title.empty()) j["title"] = title;
  j["text"] = body;
  return j.dump() + "\n";
}

inline std::string join_tokens(const driftscope::text::TokenStream& tokens) {
  std::string body;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) body.push_back(' ');
    body += tokens[i];
  }
  return body;
}

// ---------------------------------------------------------------------------
// Random corpora

inline std::string word_name(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%03zu", i);
  return buf;
}

// Skewed toward low word ids so document frequencies span the whole range.
inline std::vector<driftscope::text::TokenStream> random_corpus(std::mt19937_64& rng,
                                                                std::size_t max_docs,
                                                                std::size_t vocab_size) {
  std::uniform_int_distribution<std::size_t> doc_count(1, max_docs);
  std::uniform_int_distribution<std::size_t> doc_len(1, 80);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<driftscope::text::TokenStream> docs(doc_count(rng));
  for (auto& doc : docs) {
    const std::size_t len = doc_len(rng);
    doc.reserve(len);
    for (std::size_t i = 0; i < len; ++i) {
      const double u = unit(rng);
      doc.push_back(word_name(static_cast<std::size_t>(u * u * vocab_size) % vocab_size));
    }
  }
  return docs;
}

// ---------------------------------------------------------------------------
// TF-IDF oracle: brute-force term scan plus the direct formula.

struct TermStat {
  std::uint64_t raw = 0;
  std::uint64_t df = 0;
};

inline std::map<std::string, TermStat> scan_counts(
    std::span<const driftscope::text::TokenStream> docs) {
  std::map<std::string, TermStat> stats;
  for (const auto& doc : docs) {
    std::set<std::string> seen;
    for (const auto& tok : doc) {
      ++stats[tok].raw;
      seen.insert(tok);
    }
    for (const auto& tok : seen) ++stats[tok].df;
  }
  return stats;
}

inline double oracle_tfidf(std::uint64_t raw, std::uint64_t df, std::uint64_t doc_count) {
  return (1.0 + std::log(static_cast<double>(raw))) *
         std::log(static_cast<double>(doc_count) / static_cast<double>(df));
}

// ---------------------------------------------------------------------------
// Pearson oracle in the raw-sums form, algebraically distinct from the
// library's mean-centered two-pass implementation.

inline double oracle_pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
  }
  return (n * sxy - sx * sy) /
         (std::sqrt(n * sxx - sx * sx) * std::sqrt(n * syy - sy * sy));
}

// ---------------------------------------------------------------------------
// Adjacent-run oracle: try every window.

inline bool oracle_has_run(const std::vector<bool>& mask, std::size_t min_run) {
  if (min_run == 0 || mask.size() < min_run) return false;
  for (std::size_t start = 0; start + min_run <= mask.size(); ++start) {
    bool all = true;
    for (std::size_t i = 0; i < min_run; ++i) all = all && mask[start + i];
    if (all) return true;
  }
  return false;
}

inline std::vector<bool> random_mask(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len_dist(1, 24);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double density = unit(rng);
  std::vector<bool> mask(len_dist(rng));
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = unit(rng) < density;
  return mask;
}

// ---------------------------------------------------------------------------
// Central finite-difference check of the CBOW step gradients on one random
// configuration. Returns the worst relative error across all touched
// parameters. Degenerate draws (duplicate context ids, negatives equal to
// the center) are allowed on purpose; the step must handle them too.

inline double gradcheck_rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-3);
}

inline double gradcheck_one(std::mt19937_64& rng, double step = 1e-4) {
  using driftscope::embed::CbowWorkspace;
  using driftscope::embed::Matrix;

  std::uniform_int_distribution<std::size_t> vocab_dist(3, 20);
  std::uniform_int_distribution<std::size_t> dim_dist(2, 8);
  std::uniform_int_distribution<std::size_t> ctx_dist(1, 6);
  std::uniform_int_distribution<std::size_t> neg_dist(0, 4);
  std::uniform_real_distribution<double> init(-1.0, 1.0);

  const std::size_t vocab = vocab_dist(rng);
  const std::size_t d = dim_dist(rng);
  Matrix<double> target(vocab, d);
  Matrix<double> context(vocab, d);
  for (auto& x : target.data()) x = init(rng);
  for (auto& x : context.data()) x = init(rng);

  std::uniform_int_distribution<std::uint32_t> id_dist(0, static_cast<std::uint32_t>(vocab - 1));
  const std::uint32_t center = id_dist(rng);
  std::vector<std::uint32_t> ctx(ctx_dist(rng));
  for (auto& id : ctx) id = id_dist(rng);
  std::vector<std::uint32_t> negs(neg_dist(rng));
  for (auto& id : negs) id = id_dist(rng);

  const auto loss_at = [&]() {
    CbowWorkspace<double> tmp;
    return driftscope::embed::cbow_step_loss_and_gradients<double>(target, context, center, ctx,
                                                                   negs, tmp);
  };

  CbowWorkspace<double> ws;
  driftscope::embed::cbow_step_loss_and_gradients<double>(target, context, center, ctx, negs, ws);

  double max_rel = 0.0;
  const auto probe = [&](double& cell, double analytic) {
    const double orig = cell;
    cell = orig + step;
    const double up = loss_at();
    cell = orig - step;
    const double down = loss_at();
    cell = orig;
    max_rel = std::max(max_rel, gradcheck_rel_err(analytic, (up - down) / (2 * step)));
  };

  for (std::size_t slot = 0; slot < ws.target_ids.size(); ++slot) {
    const auto row = target.row(ws.target_ids[slot]);
    for (std::size_t i = 0; i < d; ++i) {
      probe(row[i], ws.target_grads[slot * d + i]);
    }
  }

  std::map<std::uint32_t, std::size_t> multiplicity;
  for (std::uint32_t id : ctx) ++multiplicity[id];
  const double m = static_cast<double>(ctx.size());
  for (const auto& [id, mult] : multiplicity) {
    const auto row = context.row(id);
    for (std::size_t i = 0; i < d; ++i) {
      probe(row[i], ws.context_mean_grad[i] * static_cast<double>(mult) / m);
    }
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Rank transform for Spearman correlation (average ranks on ties).

inline std::vector<double> rank_values(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

// ---------------------------------------------------------------------------
// Two disjoint topic clusters; trained vectors should separate the topics.

inline std::vector<std::string> topic_words(std::string_view prefix, std::size_t n) {
  std::vector<std::string> words;
  words.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%.*s%02zu", static_cast<int>(prefix.size()), prefix.data(),
                  i);
    words.emplace_back(buf);
  }
  return words;
}

inline std::vector<driftscope::text::TokenStream> two_topic_corpus(std::mt19937_64& rng,
                                                                   std::size_t docs_per_topic,
                                                                   std::size_t words_per_topic,
                                                                   std::size_t doc_len) {
  const auto first = topic_words("sea", words_per_topic);
  const auto second = topic_words("sky", words_per_topic);
  std::vector<driftscope::text::TokenStream> docs;
  docs.reserve(docs_per_topic * 2);
  for (std::size_t t = 0; t < 2; ++t) {
    const auto& words = t == 0 ? first : second;
    std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
    for (std::size_t d = 0; d < docs_per_topic; ++d) {
      driftscope::text::TokenStream doc;
      doc.reserve(doc_len);
      for (std::size_t i = 0; i < doc_len; ++i) doc.push_back(words[pick(rng)]);
      docs.push_back(std::move(doc));
    }
  }
  return docs;
}

// ---------------------------------------------------------------------------
// Drift fixture: "beta" migrates from context cluster A to cluster B across
// six snapshots while "alpha" stays in cluster A throughout. Snapshot 0 is
// oversized so the shared vocabulary anchors beta near cluster A, making the
// per-snapshot shift measurable and increasing.

struct DriftFixture {
  std::vector<std::vector<driftscope::text::TokenStream>> snapshots;
  std::vector<std::string> dates;
};

inline driftscope::text::TokenStream drift_segment(std::mt19937_64& rng, const std::string& term,
                                                   const std::vector<std::string>& cluster) {
  std::uniform_int_distribution<std::size_t> pick(0, cluster.size() - 1);
  return {cluster[pick(rng)], cluster[pick(rng)], term, cluster[pick(rng)], cluster[pick(rng)]};
}

inline DriftFixture make_drift_fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto cluster_a = topic_words("arc", 20);
  const auto cluster_b = topic_words("bay", 20);
  // The first snapshot dominates so the anchor pins near cluster A and the
  // migration distance grows monotonically from there.
  constexpr double kFracB[6] = {0.0, 0.25, 0.5, 0.75, 0.9, 1.0};
  constexpr std::size_t kDocs[6] = {2000, 30, 30, 30, 30, 30};
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  DriftFixture fx;
  fx.dates = {"2020-03-06", "2020-03-13", "2020-03-20",
              "2020-03-27", "2020-04-03", "2020-04-10"};
  for (std::size_t s = 0; s < 6; ++s) {
    std::vector<driftscope::text::TokenStream> docs(kDocs[s]);
    for (auto& doc : docs) {
      for (std::size_t seg = 0; seg < 4; ++seg) {
        const auto& cluster = unit(rng) < kFracB[s] ? cluster_b : cluster_a;
        auto part = drift_segment(rng, "beta", cluster);
        doc.insert(doc.end(), part.begin(), part.end());
      }
      for (std::size_t seg = 0; seg < 4; ++seg) {
        auto part = drift_segment(rng, "alpha", cluster_a);
        doc.insert(doc.end(), part.begin(), part.end());
      }
    }
    fx.snapshots.push_back(std::move(docs));
  }
  return fx;
}

// Writes one JSONL dump per snapshot; returns the file paths in date order.
inline std::vector<fs::path> write_drift_jsonl(const DriftFixture& fx, const fs::path& dir) {
  std::vector<fs::path> paths;
  for (std::size_t s = 0; s < fx.snapshots.size(); ++s) {
    std::string content;
    for (std::size_t d = 0; d < fx.snapshots[s].size(); ++d) {
      char id[32];
      std::snprintf(id, sizeof(id), "s%zu-d%04zu", s, d);
      content += jsonl_doc(id, "", join_tokens(fx.snapshots[s][d]));
    }
    fs::path path = dir / ("dump-" + fx.dates[s] + ".jsonl");
    write_file(path, content);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace testutil
