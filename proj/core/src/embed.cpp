#include "driftscope/embed.hpp"

#include <algorithm>

#include "driftscope/util.hpp"

namespace driftscope::embed {

std::uint64_t matrix_checksum(const Matrix<float>& m) {
  Fnv1a64 h;
  h.update(m.data().data(), m.data().size() * sizeof(float));
  return h.digest();
}

void TrainingConfig::validate() const {
  if (dimension < 1) throw ConfigError("dimension must be >= 1");
  if (window < 1) throw ConfigError("window must be >= 1");
  // epochs == 0 is allowed: it trains nothing and leaves a slice at its
  // compass initialization, the zero-drift calibration run.
  if (negatives < 1) throw ConfigError("negatives must be >= 1");
  if (!(learning_rate > 0.0f)) throw ConfigError("learning rate must be > 0");
  if (!(min_learning_rate > 0.0f)) throw ConfigError("minimum learning rate must be > 0");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (subsample < 0.0) throw ConfigError("subsample must be >= 0");
}

ModelVocab ModelVocab::from_vocabulary(const text::Vocabulary& vocab) {
  std::vector<Entry> entries;
  entries.reserve(vocab.size());
  for (const auto& e : vocab.entries()) entries.push_back({e.term, e.count});
  return from_entries(std::move(entries));
}

ModelVocab ModelVocab::from_entries(std::vector<Entry> entries) {
  ModelVocab vocab;
  vocab.entries_ = std::move(entries);
  vocab.index_.reserve(vocab.entries_.size());
  for (std::uint32_t id = 0; id < vocab.entries_.size(); ++id) {
    vocab.index_.emplace(vocab.entries_[id].term, id);
  }
  return vocab;
}

std::optional<std::uint32_t> ModelVocab::lookup(std::string_view term) const {
  auto it = index_.find(std::string(term));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::uint64_t> ModelVocab::counts() const {
  std::vector<std::uint64_t> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.count);
  return out;
}

NegativeSampler::NegativeSampler(std::span<const std::uint64_t> counts, double power) {
  if (counts.empty()) throw InvalidInput("negative sampler needs a non-empty vocabulary");
  const std::size_t n = counts.size();
  probabilities_.resize(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    probabilities_[i] = std::pow(static_cast<double>(counts[i]), power);
    total += probabilities_[i];
  }
  if (total <= 0) throw InvalidInput("negative sampler needs positive counts");
  for (double& p : probabilities_) p /= total;

  // Walker alias construction.
  accept_.assign(n, 1.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = probabilities_[i] * static_cast<double>(n);
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    std::uint32_t s = small.back();
    small.pop_back();
    std::uint32_t l = large.back();
    large.pop_back();
    accept_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = scaled[l] + scaled[s] - 1.0;
    (scaled[l] < 1.0 ? small : large).push_back(l);
  }
  // leftovers are 1 within rounding
}

std::uint32_t NegativeSampler::sample(std::mt19937_64& rng) const {
  const std::size_t n = accept_.size();
  const std::uint32_t i = static_cast<std::uint32_t>(rng() % n);
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return u < accept_[i] ? i : alias_[i];
}

CompassModel::CompassModel(ModelVocab vocab, Matrix<float> target, Matrix<float> context,
                           TrainingConfig config)
    : vocab_(std::move(vocab)),
      target_(std::move(target)),
      context_(std::move(context)),
      config_(config) {}

std::optional<std::span<const float>> CompassModel::vector_of(std::string_view term) const {
  auto id = vocab_.lookup(term);
  if (!id) return std::nullopt;
  return context_.row(*id);
}

std::optional<std::span<const float>> CompassModel::target_vector_of(std::string_view term) const {
  auto id = vocab_.lookup(term);
  if (!id) return std::nullopt;
  return target_.row(*id);
}

SliceModel::SliceModel(std::string snapshot_id, ModelVocab vocab, Matrix<float> target,
                       Matrix<float> context, FrozenMatrix frozen)
    : snapshot_id_(std::move(snapshot_id)),
      vocab_(std::move(vocab)),
      target_(std::move(target)),
      context_(std::move(context)),
      frozen_(frozen) {}

std::optional<std::span<const float>> SliceModel::vector_of(std::string_view term) const {
  auto id = vocab_.lookup(term);
  if (!id) return std::nullopt;
  return frozen_ == FrozenMatrix::target ? context_.row(*id) : target_.row(*id);
}

}  // namespace driftscope::embed
