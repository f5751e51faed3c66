#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "driftscope/error.hpp"
#include "driftscope/text.hpp"

namespace driftscope::embed {

template <typename Real>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<Real> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const Real> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<Real>& data() { return data_; }
  const std::vector<Real>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Real> data_;
};

std::uint64_t matrix_checksum(const Matrix<float>& m);

// Which matrix stays fixed while a slice trains. The default holds the
// compass target rows fixed and lets the slice context matrix move; the
// swapped mode trains per-slice target rows against the fixed compass
// context matrix.
enum class FrozenMatrix { target, context };

struct TrainingConfig {
  std::uint32_t dimension = 100;
  std::uint32_t window = 5;  // context words considered on each side
  std::uint32_t min_count = 3;
  std::uint32_t negatives = 5;  // noise samples per positive example
  std::uint32_t epochs = 5;
  float learning_rate = 0.025f;      // decays linearly per word processed
  float min_learning_rate = 1e-4f;
  double subsample = 0.0;  // frequent-word downsampling threshold; 0 = off
  std::uint64_t seed = 42;
  std::uint32_t threads = 1;  // >1 is lock-free and nondeterministic
  FrozenMatrix frozen = FrozenMatrix::target;

  void validate() const;  // throws ConfigError
};

// Model-side vocabulary: terms with corpus counts, ids dense 0..size()-1.
class ModelVocab {
 public:
  struct Entry {
    std::string term;
    std::uint64_t count = 0;
  };

  ModelVocab() = default;
  static ModelVocab from_vocabulary(const text::Vocabulary& vocab);
  static ModelVocab from_entries(std::vector<Entry> entries);

  std::optional<std::uint32_t> lookup(std::string_view term) const;
  const Entry& entry(std::uint32_t id) const { return entries_[id]; }
  std::uint32_t size() const { return static_cast<std::uint32_t>(entries_.size()); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<std::uint64_t> counts() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Walker alias table over counts^power. Exact probabilities, O(1) draws,
// deterministic for a given rng stream.
class NegativeSampler {
 public:
  explicit NegativeSampler(std::span<const std::uint64_t> counts, double power = 0.75);

  std::uint32_t sample(std::mt19937_64& rng) const;
  const std::vector<double>& probabilities() const { return probabilities_; }

 private:
  std::vector<double> probabilities_;  // target distribution, for inspection
  std::vector<double> accept_;
  std::vector<std::uint32_t> alias_;
};

// Reusable buffers for cbow_step_loss_and_gradients.
template <typename Real>
struct CbowWorkspace {
  std::vector<Real> context_mean;       // d
  std::vector<Real> context_mean_grad;  // d, dL/d(context mean)
  std::vector<std::uint32_t> target_ids;  // unique touched target rows
  std::vector<Real> target_grads;         // target_ids.size() x d, row-major
};

// One CBOW negative-sampling example. With context mean
//   cbar = (1/M) * sum_j context.row(j)
// the loss is
//   -ln s(u_center . cbar) - sum_neg ln s(-u_neg . cbar),   s = logistic.
// On return ws.context_mean_grad holds dL/dcbar; each context row's gradient
// is context_mean_grad / M per occurrence of its id in context_ids.
// ws.target_ids / ws.target_grads hold dL/du per unique touched target row
// (duplicate ids accumulate into one row).
template <typename Real>
Real cbow_step_loss_and_gradients(const Matrix<Real>& target, const Matrix<Real>& context,
                                  std::uint32_t center, std::span<const std::uint32_t> context_ids,
                                  std::span<const std::uint32_t> negative_ids,
                                  CbowWorkspace<Real>& ws) {
  if (context_ids.empty()) throw InvalidInput("cbow step needs a non-empty context");
  const std::size_t d = context.cols();
  const auto m = static_cast<Real>(context_ids.size());

  ws.context_mean.assign(d, Real(0));
  for (std::uint32_t id : context_ids) {
    auto row = context.row(id);
    for (std::size_t i = 0; i < d; ++i) ws.context_mean[i] += row[i];
  }
  for (std::size_t i = 0; i < d; ++i) ws.context_mean[i] /= m;

  ws.context_mean_grad.assign(d, Real(0));
  ws.target_ids.clear();
  ws.target_grads.clear();

  auto slot_of = [&](std::uint32_t id) -> std::size_t {
    for (std::size_t s = 0; s < ws.target_ids.size(); ++s) {
      if (ws.target_ids[s] == id) return s;
    }
    ws.target_ids.push_back(id);
    ws.target_grads.resize(ws.target_ids.size() * d, Real(0));
    return ws.target_ids.size() - 1;
  };

  auto logistic = [](Real x) { return Real(1) / (Real(1) + std::exp(-x)); };

  Real loss = 0;
  auto accumulate = [&](std::uint32_t id, Real label) {
    auto u = target.row(id);
    Real dot = 0;
    for (std::size_t i = 0; i < d; ++i) dot += u[i] * ws.context_mean[i];
    const Real sig = logistic(dot);
    // label 1: -ln s(dot); label 0: -ln s(-dot) = -ln(1 - s(dot))
    loss -= label > Real(0.5) ? std::log(sig) : std::log(Real(1) - sig);
    const Real g = sig - label;  // dL/d(dot)
    const std::size_t slot = slot_of(id);  // may reallocate target_grads
    Real* grad_row = ws.target_grads.data() + slot * d;
    for (std::size_t i = 0; i < d; ++i) {
      grad_row[i] += g * ws.context_mean[i];
      ws.context_mean_grad[i] += g * u[i];
    }
  };

  accumulate(center, Real(1));
  for (std::uint32_t neg : negative_ids) accumulate(neg, Real(0));
  return loss;
}

// Atemporal model over the union of all snapshots. The context matrix row is
// the representative vector; target rows are the anchor the slices train
// against in the default orientation.
class CompassModel {
 public:
  CompassModel() = default;
  CompassModel(ModelVocab vocab, Matrix<float> target, Matrix<float> context,
               TrainingConfig config);

  const ModelVocab& vocab() const { return vocab_; }
  const Matrix<float>& target() const { return target_; }
  const Matrix<float>& context() const { return context_; }
  const TrainingConfig& config() const { return config_; }

  std::optional<std::span<const float>> vector_of(std::string_view term) const;
  std::optional<std::span<const float>> target_vector_of(std::string_view term) const;

 private:
  ModelVocab vocab_;
  Matrix<float> target_;
  Matrix<float> context_;
  TrainingConfig config_;
};

// Per-snapshot model over a sub-vocabulary of the compass. Only the
// non-frozen matrix differs from the compass rows it was initialized from.
class SliceModel {
 public:
  SliceModel() = default;
  SliceModel(std::string snapshot_id, ModelVocab vocab, Matrix<float> target,
             Matrix<float> context, FrozenMatrix frozen);

  const std::string& snapshot_id() const { return snapshot_id_; }
  const ModelVocab& vocab() const { return vocab_; }
  const Matrix<float>& target() const { return target_; }
  const Matrix<float>& context() const { return context_; }
  FrozenMatrix frozen() const { return frozen_; }

  // Row of the matrix that moved during slice training.
  std::optional<std::span<const float>> vector_of(std::string_view term) const;

 private:
  std::string snapshot_id_;
  ModelVocab vocab_;
  Matrix<float> target_;
  Matrix<float> context_;
  FrozenMatrix frozen_ = FrozenMatrix::target;
};

// CBOW with negative sampling over the concatenated snapshots. Deterministic
// for threads == 1 and a fixed seed.
CompassModel train_compass(std::span<const text::TokenStream> docs, const TrainingConfig& config);

// Trains one snapshot's model anchored to the compass: the slice vocabulary
// is the snapshot's min_count terms that exist in the compass, the trained
// matrix initializes from the matching compass rows, and the frozen matrix
// is byte-identical to those rows before and after.
SliceModel train_slice(std::string snapshot_id, std::span<const text::TokenStream> docs,
                       const CompassModel& compass, const TrainingConfig& config);

// Standard cosine; distance is 1 - similarity. Throws InvalidInput on a
// zero vector.
template <typename Real>
double cosine_similarity(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) throw InvalidInput("cosine on vectors of different length");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  if (na == 0.0 || nb == 0.0) throw InvalidInput("cosine of a zero vector is undefined");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Binary model format, little-endian:
//   magic "DSEM", version u32, dimension u32, vocab size u64,
//   per term: u32 byte length + UTF-8 bytes + u64 count,
//   then the target matrix and the context matrix as row-major f32 blocks.
void save_model(const CompassModel& model, const std::filesystem::path& path);
void save_model(const SliceModel& model, const std::filesystem::path& path);
CompassModel load_compass(const std::filesystem::path& path);
SliceModel load_slice(const std::filesystem::path& path, std::string snapshot_id,
                      FrozenMatrix frozen = FrozenMatrix::target);

// Text vector export: first line "|V| d", then one "term v1 .. vd" line per
// term, written so floats parse back bit-identical. `terms` empty means all.
void save_text_vectors(const ModelVocab& vocab, const Matrix<float>& matrix,
                       const std::filesystem::path& path,
                       std::span<const std::string> terms = {});

}  // namespace driftscope::embed
