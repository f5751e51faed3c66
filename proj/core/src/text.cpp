#include "driftscope/text.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "driftscope/error.hpp"
#include "driftscope/util.hpp"

namespace driftscope::text {

namespace {

bool is_token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-';
}

// Lowercase ASCII plus the Latin-1 supplement uppercase range when it
// arrives as a two-byte UTF-8 sequence (0xC3 0x80..0x9E maps to 0xA0..0xBE,
// skipping the multiplication sign).
void append_folded(std::string& token, std::string_view body, std::size_t i, std::size_t len) {
  if (len == 2 && static_cast<unsigned char>(body[i]) == 0xC3) {
    unsigned char c2 = static_cast<unsigned char>(body[i + 1]);
    if (c2 >= 0x80 && c2 <= 0x9E && c2 != 0x97) {
      token.push_back(body[i]);
      token.push_back(static_cast<char>(c2 + 0x20));
      return;
    }
  }
  token.append(body.substr(i, len));
}

std::size_t utf8_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;  // invalid lead byte, consume one
}

void flush_token(std::string& token, TokenStream& out) {
  if (token.empty()) return;
  std::size_t begin = token.find_first_not_of('-');
  if (begin == std::string::npos) {
    token.clear();
    return;
  }
  std::size_t end = token.find_last_not_of('-');
  out.emplace_back(token.substr(begin, end - begin + 1));
  token.clear();
}

}  // namespace

TokenStream tokenize(std::string_view body) {
  TokenStream out;
  std::string token;
  std::size_t i = 0;
  while (i < body.size()) {
    unsigned char c = static_cast<unsigned char>(body[i]);
    if (c < 0x80) {
      if (is_token_byte(c)) {
        token.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                             : static_cast<char>(c));
      } else {
        flush_token(token, out);
      }
      ++i;
    } else {
      std::size_t len = std::min(utf8_len(c), body.size() - i);
      append_folded(token, body, i, len);
      i += len;
    }
  }
  flush_token(token, out);
  return out;
}

std::string normalize_phrase(std::string_view name) {
  TokenStream words = tokenize(name);
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out.push_back('_');
    out += words[i];
  }
  return out;
}

void PhraseDictionary::add_seed(std::string phrase) {
  std::size_t words = static_cast<std::size_t>(std::count(phrase.begin(), phrase.end(), '_')) + 1;
  max_words_ = std::max(max_words_, words);
  entries_[std::move(phrase)] = Entry{0.0, true};
}

void PhraseDictionary::add_learned(std::string phrase, double score) {
  auto it = entries_.find(phrase);
  if (it != entries_.end()) return;
  std::size_t words = static_cast<std::size_t>(std::count(phrase.begin(), phrase.end(), '_')) + 1;
  max_words_ = std::max(max_words_, words);
  entries_.emplace(std::move(phrase), Entry{score, false});
}

bool PhraseDictionary::contains(std::string_view phrase) const {
  return entries_.find(std::string(phrase)) != entries_.end();
}

const PhraseDictionary::Entry* PhraseDictionary::find(std::string_view phrase) const {
  auto it = entries_.find(std::string(phrase));
  return it == entries_.end() ? nullptr : &it->second;
}

void PhraseDictionary::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write phrase dictionary: " + path.string());
  out << "phrase,score,origin\n";
  for (const auto& [phrase, entry] : entries_) {
    csv_write_row(out, {phrase, format_real(entry.score), entry.seeded ? "seed" : "learned"});
  }
  if (!out) throw IoError("write failed: " + path.string());
}

PhraseDictionary PhraseDictionary::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read phrase dictionary: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "phrase,score,origin") {
    throw FormatError("bad phrase dictionary header: " + path.string());
  }
  PhraseDictionary dict;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = csv_parse_line(line);
    if (fields.size() != 3) throw FormatError("bad phrase dictionary row: " + line);
    if (fields[2] == "seed") {
      dict.add_seed(fields[0]);
    } else if (fields[2] == "learned") {
      dict.add_learned(fields[0], std::strtod(fields[1].c_str(), nullptr));
    } else {
      throw FormatError("unknown phrase origin: " + fields[2]);
    }
  }
  return dict;
}

PhraseDictionary detect_phrases(std::span<const TokenStream> corpus,
                                const std::set<std::string>& seeds, double delta,
                                double threshold) {
  PhraseDictionary dict;
  for (const auto& seed : seeds) dict.add_seed(seed);

  std::unordered_map<std::string, std::uint64_t> unigram;
  std::unordered_map<std::string, std::uint64_t> bigram;
  std::uint64_t total = 0;
  for (const auto& stream : corpus) {
    for (std::size_t i = 0; i < stream.size(); ++i) {
      ++unigram[stream[i]];
      ++total;
      if (i + 1 < stream.size()) {
        ++bigram[stream[i] + "\x1f" + stream[i + 1]];
      }
    }
  }
  if (total == 0) return dict;

  // map iteration order is not deterministic across platforms for unordered
  // containers; collect and sort so learned output is stable.
  std::vector<std::pair<std::string, double>> learned;
  for (const auto& [key, count] : bigram) {
    std::size_t sep = key.find('\x1f');
    const std::string a = key.substr(0, sep);
    const std::string b = key.substr(sep + 1);
    double score = (static_cast<double>(count) - delta) * static_cast<double>(total) /
                   (static_cast<double>(unigram[a]) * static_cast<double>(unigram[b]));
    if (score >= threshold) learned.emplace_back(a + "_" + b, score);
  }
  std::sort(learned.begin(), learned.end());
  for (auto& [phrase, score] : learned) dict.add_learned(std::move(phrase), score);
  return dict;
}

PhraseDictionary build_phrase_dictionary(std::span<const TokenStream> corpus,
                                         const std::set<std::string>& seeds,
                                         const PhraseParams& params) {
  if (params.passes < 1) throw ConfigError("phrase passes must be >= 1");
  PhraseDictionary dict = detect_phrases(corpus, seeds, params.delta, params.threshold);
  if (params.passes == 1) return dict;

  std::vector<TokenStream> merged(corpus.begin(), corpus.end());
  for (int pass = 1; pass < params.passes; ++pass) {
    for (auto& stream : merged) stream = apply_phrases(stream, dict);
    PhraseDictionary next = detect_phrases(merged, seeds, params.delta, params.threshold);
    for (const auto& [phrase, entry] : next.entries()) {
      if (entry.seeded) continue;
      dict.add_learned(phrase, entry.score);
    }
  }
  return dict;
}

TokenStream apply_phrases(const TokenStream& stream, const PhraseDictionary& dict) {
  if (dict.size() == 0 || dict.max_words() < 2) return stream;
  TokenStream out;
  out.reserve(stream.size());
  std::size_t i = 0;
  while (i < stream.size()) {
    std::size_t longest = std::min(dict.max_words(), stream.size() - i);
    bool merged = false;
    for (std::size_t len = longest; len >= 2; --len) {
      std::string candidate = stream[i];
      for (std::size_t j = 1; j < len; ++j) {
        candidate.push_back('_');
        candidate += stream[i + j];
      }
      if (dict.contains(candidate)) {
        out.push_back(std::move(candidate));
        i += len;
        merged = true;
        break;
      }
    }
    if (!merged) {
      out.push_back(stream[i]);
      ++i;
    }
  }
  return out;
}

Vocabulary Vocabulary::build(std::span<const TokenStream> corpus, std::uint32_t min_count) {
  std::unordered_map<std::string, Entry> counts;
  std::uint64_t total = 0;
  for (const auto& stream : corpus) {
    std::unordered_map<std::string, std::uint64_t> in_doc;
    for (const auto& token : stream) {
      ++in_doc[token];
      ++total;
    }
    for (const auto& [token, n] : in_doc) {
      Entry& e = counts[token];
      e.count += n;
      e.doc_freq += 1;
    }
  }

  std::vector<Entry> kept;
  kept.reserve(counts.size());
  for (auto& [token, entry] : counts) {
    if (entry.count < min_count) continue;
    entry.term = token;
    kept.push_back(std::move(entry));
  }
  if (kept.empty()) throw InvalidInput("vocabulary is empty after min_count filtering");

  std::sort(kept.begin(), kept.end(), [](const Entry& a, const Entry& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.term < b.term;
  });

  Vocabulary vocab;
  vocab.entries_ = std::move(kept);
  vocab.total_tokens_ = total;
  vocab.min_count_ = min_count;
  vocab.index_.reserve(vocab.entries_.size());
  for (std::uint32_t id = 0; id < vocab.entries_.size(); ++id) {
    vocab.index_.emplace(vocab.entries_[id].term, id);
  }
  return vocab;
}

std::optional<std::uint32_t> Vocabulary::lookup(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::set<std::string> load_seed_list(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read seed list: " + path.string());
  std::set<std::string> seeds;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::string normalized = normalize_phrase(line);
    if (!normalized.empty()) seeds.insert(std::move(normalized));
  }
  return seeds;
}

}  // namespace driftscope::text
