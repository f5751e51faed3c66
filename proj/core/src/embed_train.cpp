#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "driftscope/embed.hpp"

namespace driftscope::embed {

namespace {

constexpr double kUniformScale = 0x1.0p-53;

double next_real(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * kUniformScale; }

struct EncodedCorpus {
  std::vector<std::vector<std::uint32_t>> docs;
  std::uint64_t total_words = 0;
};

EncodedCorpus encode(std::span<const text::TokenStream> docs, const ModelVocab& vocab) {
  EncodedCorpus out;
  out.docs.reserve(docs.size());
  for (const auto& stream : docs) {
    std::vector<std::uint32_t> ids;
    ids.reserve(stream.size());
    for (const auto& token : stream) {
      if (auto id = vocab.lookup(token)) ids.push_back(*id);
    }
    out.total_words += ids.size();
    if (!ids.empty()) out.docs.push_back(std::move(ids));
  }
  return out;
}

// Shared training state; matrices are updated in place. With threads > 1 the
// updates are lock-free and racy, which the config documents as
// nondeterministic.
struct Trainer {
  const TrainingConfig& config;
  const EncodedCorpus& corpus;
  const NegativeSampler& sampler;
  const ModelVocab& vocab;
  Matrix<float>& target;
  Matrix<float>& context;
  bool update_target = true;
  bool update_context = true;
  std::atomic<std::uint64_t> words_done{0};

  void run() {
    if (config.epochs == 0 || corpus.docs.empty()) return;
    if (config.threads == 1) {
      worker(0);
      return;
    }
    std::vector<std::thread> pool;
    pool.reserve(config.threads);
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (std::uint32_t t = 0; t < config.threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          worker(t);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!failed.exchange(true)) first_error = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  void worker(std::uint32_t thread_id) {
    std::mt19937_64 rng(thread_id == 0 ? config.seed
                                       : config.seed ^ (0x9E3779B97F4A7C15ULL * (thread_id + 1)));
    CbowWorkspace<float> ws;
    std::vector<std::uint32_t> sentence;
    std::vector<std::uint32_t> context_ids;
    std::vector<std::uint32_t> negative_ids;

    const std::uint64_t planned =
        corpus.total_words * static_cast<std::uint64_t>(config.epochs) + 1;
    for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
      for (std::size_t doc = thread_id; doc < corpus.docs.size(); doc += config.threads) {
        const auto& ids = corpus.docs[doc];
        const std::uint64_t done = words_done.fetch_add(ids.size(), std::memory_order_relaxed);
        float lr = config.learning_rate *
                   (1.0f - static_cast<float>(done) / static_cast<float>(planned));
        lr = std::max(lr, config.min_learning_rate);

        sentence.clear();
        if (config.subsample > 0.0) {
          const double t = config.subsample * static_cast<double>(corpus.total_words);
          for (std::uint32_t id : ids) {
            const double cn = static_cast<double>(vocab.entry(id).count);
            const double keep = (std::sqrt(cn / t) + 1.0) * t / cn;
            if (keep >= 1.0 || next_real(rng) < keep) sentence.push_back(id);
          }
        } else {
          sentence.assign(ids.begin(), ids.end());
        }

        double doc_loss = 0;
        for (std::size_t k = 0; k < sentence.size(); ++k) {
          const std::uint32_t center = sentence[k];
          const auto span = 1 + static_cast<std::size_t>(rng() % config.window);
          context_ids.clear();
          const std::size_t lo = k >= span ? k - span : 0;
          const std::size_t hi = std::min(sentence.size() - 1, k + span);
          for (std::size_t j = lo; j <= hi; ++j) {
            if (j != k) context_ids.push_back(sentence[j]);
          }
          if (context_ids.empty()) continue;

          negative_ids.clear();
          for (std::uint32_t n = 0; n < config.negatives; ++n) {
            const std::uint32_t neg = sampler.sample(rng);
            if (neg != center) negative_ids.push_back(neg);
          }

          doc_loss += cbow_step_loss_and_gradients<float>(target, context, center, context_ids,
                                                          negative_ids, ws);

          if (update_target) {
            const std::size_t d = target.cols();
            for (std::size_t s = 0; s < ws.target_ids.size(); ++s) {
              auto row = target.row(ws.target_ids[s]);
              const float* grad = ws.target_grads.data() + s * d;
              for (std::size_t i = 0; i < d; ++i) row[i] -= lr * grad[i];
            }
          }
          if (update_context) {
            const float inv_m = 1.0f / static_cast<float>(context_ids.size());
            for (std::uint32_t id : context_ids) {
              auto row = context.row(id);
              for (std::size_t i = 0; i < row.size(); ++i) {
                row[i] -= lr * inv_m * ws.context_mean_grad[i];
              }
            }
          }
        }
        if (!std::isfinite(doc_loss)) {
          throw TrainingError("non-finite loss while training (document " + std::to_string(doc) +
                              ", epoch " + std::to_string(epoch) + ")");
        }
      }
    }
  }
};

void check_finite(const Matrix<float>& m, const char* what) {
  for (float v : m.data()) {
    if (!std::isfinite(v)) throw TrainingError(std::string("non-finite entry in ") + what);
  }
}

Matrix<float> uniform_init(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  Matrix<float> m(rows, cols);
  const float scale = 1.0f / static_cast<float>(cols);
  for (float& v : m.data()) {
    v = (static_cast<float>(next_real(rng)) - 0.5f) * scale;
  }
  return m;
}

}  // namespace

CompassModel train_compass(std::span<const text::TokenStream> docs, const TrainingConfig& config) {
  config.validate();
  text::Vocabulary full = text::Vocabulary::build(docs, config.min_count);
  if (full.size() < 2) throw InvalidInput("compass vocabulary needs at least 2 terms");
  ModelVocab vocab = ModelVocab::from_vocabulary(full);
  EncodedCorpus corpus = encode(docs, vocab);

  std::mt19937_64 init_rng(config.seed);
  Matrix<float> context = uniform_init(vocab.size(), config.dimension, init_rng);
  Matrix<float> target(vocab.size(), config.dimension);  // zero, standard for the output matrix

  NegativeSampler sampler(vocab.counts());
  Trainer trainer{config, corpus, sampler, vocab, target, context};
  trainer.run();

  check_finite(target, "compass target matrix");
  check_finite(context, "compass context matrix");
  return CompassModel(std::move(vocab), std::move(target), std::move(context), config);
}

SliceModel train_slice(std::string snapshot_id, std::span<const text::TokenStream> docs,
                       const CompassModel& compass, const TrainingConfig& config) {
  config.validate();
  if (compass.vocab().size() == 0) throw InvalidInput("compass model is empty");
  if (compass.context().cols() != config.dimension) {
    throw ConfigError("slice dimension does not match the compass");
  }

  // Slice vocabulary: the snapshot's min_count survivors that the compass
  // knows; everything else is dropped.
  std::vector<ModelVocab::Entry> kept;
  {
    std::unordered_map<std::string, std::uint64_t> counts;
    for (const auto& stream : docs) {
      for (const auto& token : stream) ++counts[token];
    }
    for (auto& [term, count] : counts) {
      if (count < config.min_count) continue;
      if (!compass.vocab().lookup(term)) continue;
      kept.push_back({term, count});
    }
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
      if (a.count != b.count) return a.count > b.count;
      return a.term < b.term;
    });
  }
  if (kept.empty()) throw InvalidInput("slice vocabulary is empty: " + snapshot_id);
  ModelVocab vocab = ModelVocab::from_entries(std::move(kept));

  const std::size_t d = config.dimension;
  Matrix<float> target(vocab.size(), d);
  Matrix<float> context(vocab.size(), d);
  for (std::uint32_t id = 0; id < vocab.size(); ++id) {
    const std::uint32_t compass_id = *compass.vocab().lookup(vocab.entry(id).term);
    auto src_u = compass.target().row(compass_id);
    auto src_c = compass.context().row(compass_id);
    std::copy(src_u.begin(), src_u.end(), target.row(id).begin());
    std::copy(src_c.begin(), src_c.end(), context.row(id).begin());
  }

  EncodedCorpus corpus = encode(docs, vocab);
  NegativeSampler sampler(vocab.counts());
  Trainer trainer{config, corpus, sampler, vocab, target, context};
  trainer.update_target = config.frozen == FrozenMatrix::context;
  trainer.update_context = config.frozen == FrozenMatrix::target;
  trainer.run();

  check_finite(target, "slice target matrix");
  check_finite(context, "slice context matrix");
  return SliceModel(std::move(snapshot_id), std::move(vocab), std::move(target),
                    std::move(context), config.frozen);
}

}  // namespace driftscope::embed
