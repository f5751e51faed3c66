#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace driftscope::text {

// Normalized tokens of one document, in document order.
using TokenStream = std::vector<std::string>;

// Lowercases and splits into maximal runs of letters, digits, and hyphens;
// every other character separates. Multi-byte UTF-8 sequences are kept as
// token characters (Latin-1 supplement letters are case-folded). Tokens with
// no letter or digit are dropped and edge hyphens trimmed, so "SARS-CoV-2"
// survives as one token while stray punctuation does not.
TokenStream tokenize(std::string_view body);

// Candidate names and seed phrases go through the same normalization as
// document text: tokenize, then join words with underscores.
std::string normalize_phrase(std::string_view name);

struct PhraseParams {
  double delta = 5.0;      // discount subtracted from the bigram count
  double threshold = 10.0;  // minimum score for a learned phrase
  int passes = 1;          // >1 re-runs detection over merged streams
};

class PhraseDictionary {
 public:
  struct Entry {
    double score = 0.0;
    bool seeded = false;
  };

  void add_seed(std::string phrase);
  // Keeps the existing entry if the phrase is already present.
  void add_learned(std::string phrase, double score);

  bool contains(std::string_view phrase) const;
  const Entry* find(std::string_view phrase) const;
  std::size_t size() const { return entries_.size(); }
  // Longest phrase in the dictionary, in words.
  std::size_t max_words() const { return max_words_; }

  const std::map<std::string, Entry>& entries() const { return entries_; }

  void save_csv(const std::filesystem::path& path) const;
  static PhraseDictionary load_csv(const std::filesystem::path& path);

 private:
  std::map<std::string, Entry> entries_;
  std::size_t max_words_ = 0;
};

// One detection pass over adjacent token pairs. A pair (a, b) with corpus
// counts c(a), c(b), joint count c(ab) and total token count T scores
//   (c(ab) - delta) * T / (c(a) * c(b))
// and is learned when the score reaches the threshold. Seeds are always kept.
PhraseDictionary detect_phrases(std::span<const TokenStream> corpus,
                                const std::set<std::string>& seeds, double delta,
                                double threshold);

// Runs detect_phrases `passes` times, merging learned phrases into the
// streams between passes so longer collocations can chain.
PhraseDictionary build_phrase_dictionary(std::span<const TokenStream> corpus,
                                         const std::set<std::string>& seeds,
                                         const PhraseParams& params);

// Longest-match, left-to-right, single pass. Merged tokens join with '_';
// matches never overlap.
TokenStream apply_phrases(const TokenStream& stream, const PhraseDictionary& dict);

class Vocabulary {
 public:
  struct Entry {
    std::string term;
    std::uint64_t count = 0;     // total occurrences in the corpus
    std::uint64_t doc_freq = 0;  // number of documents containing the term
  };

  // Terms below min_count are excluded. Ids are dense 0..size()-1, assigned
  // by descending count with lexicographic tie-break. Throws InvalidInput if
  // nothing survives the filter.
  static Vocabulary build(std::span<const TokenStream> corpus, std::uint32_t min_count);

  std::optional<std::uint32_t> lookup(std::string_view term) const;
  const Entry& entry(std::uint32_t id) const { return entries_[id]; }
  std::uint32_t size() const { return static_cast<std::uint32_t>(entries_.size()); }
  std::uint64_t total_tokens() const { return total_tokens_; }
  std::uint32_t min_count() const { return min_count_; }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::uint32_t> index_;
  std::uint64_t total_tokens_ = 0;
  std::uint32_t min_count_ = 1;
};

// One phrase per line; spaces allowed and normalized on load. Empty lines
// and '#' comments are skipped.
std::set<std::string> load_seed_list(const std::filesystem::path& path);

}  // namespace driftscope::text
