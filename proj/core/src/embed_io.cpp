#include <bit>
#include <cstring>
#include <fstream>

#include "driftscope/embed.hpp"
#include "driftscope/util.hpp"

namespace driftscope::embed {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'E', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

// x86-64 is little-endian; raw writes match the format.
static_assert(std::endian::native == std::endian::little);

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("truncated model file while reading " + what);
  return value;
}

void write_model(const ModelVocab& vocab, const Matrix<float>& target,
                 const Matrix<float>& context, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write model: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kFormatVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(target.cols()));
  write_pod<std::uint64_t>(out, vocab.size());
  for (const auto& entry : vocab.entries()) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(entry.term.size()));
    out.write(entry.term.data(), static_cast<std::streamsize>(entry.term.size()));
    write_pod<std::uint64_t>(out, entry.count);
  }
  auto write_matrix = [&out](const Matrix<float>& m) {
    out.write(reinterpret_cast<const char*>(m.data().data()),
              static_cast<std::streamsize>(m.data().size() * sizeof(float)));
  };
  write_matrix(target);
  write_matrix(context);
  if (!out) throw IoError("write failed: " + path.string());
}

struct RawModel {
  ModelVocab vocab;
  Matrix<float> target;
  Matrix<float> context;
  std::uint32_t dimension = 0;
};

RawModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model: " + path.string());

  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw FormatError("not a model file (bad magic): " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kFormatVersion) {
    throw FormatError("unsupported model format version " + std::to_string(version));
  }
  const auto dimension = read_pod<std::uint32_t>(in, "dimension");
  const auto vocab_size = read_pod<std::uint64_t>(in, "vocab size");

  std::vector<ModelVocab::Entry> entries;
  entries.reserve(vocab_size);
  for (std::uint64_t i = 0; i < vocab_size; ++i) {
    const auto len = read_pod<std::uint32_t>(in, "term length");
    std::string term(len, '\0');
    in.read(term.data(), len);
    if (!in) throw FormatError("truncated model file while reading a term");
    const auto count = read_pod<std::uint64_t>(in, "term count");
    entries.push_back({std::move(term), count});
  }

  RawModel model;
  model.dimension = dimension;
  model.vocab = ModelVocab::from_entries(std::move(entries));
  auto read_matrix = [&](const char* what) {
    Matrix<float> m(vocab_size, dimension);
    in.read(reinterpret_cast<char*>(m.data().data()),
            static_cast<std::streamsize>(m.data().size() * sizeof(float)));
    if (!in) throw FormatError(std::string("truncated model file while reading ") + what);
    return m;
  };
  model.target = read_matrix("target matrix");
  model.context = read_matrix("context matrix");
  if (in.get() != std::ifstream::traits_type::eof()) {
    throw FormatError("trailing bytes after model data: " + path.string());
  }
  return model;
}

}  // namespace

void save_model(const CompassModel& model, const std::filesystem::path& path) {
  write_model(model.vocab(), model.target(), model.context(), path);
}

void save_model(const SliceModel& model, const std::filesystem::path& path) {
  write_model(model.vocab(), model.target(), model.context(), path);
}

CompassModel load_compass(const std::filesystem::path& path) {
  RawModel raw = read_model(path);
  TrainingConfig config;
  config.dimension = raw.dimension;
  return CompassModel(std::move(raw.vocab), std::move(raw.target), std::move(raw.context), config);
}

SliceModel load_slice(const std::filesystem::path& path, std::string snapshot_id,
                      FrozenMatrix frozen) {
  RawModel raw = read_model(path);
  return SliceModel(std::move(snapshot_id), std::move(raw.vocab), std::move(raw.target),
                    std::move(raw.context), frozen);
}

void save_text_vectors(const ModelVocab& vocab, const Matrix<float>& matrix,
                       const std::filesystem::path& path, std::span<const std::string> terms) {
  std::vector<std::uint32_t> ids;
  if (terms.empty()) {
    ids.resize(vocab.size());
    for (std::uint32_t i = 0; i < vocab.size(); ++i) ids[i] = i;
  } else {
    for (const auto& term : terms) {
      auto id = vocab.lookup(term);
      if (!id) throw InvalidInput("term not in model vocabulary: " + term);
      ids.push_back(*id);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write vectors: " + path.string());
  out << ids.size() << ' ' << matrix.cols() << '\n';
  for (std::uint32_t id : ids) {
    out << vocab.entry(id).term;
    for (float v : matrix.row(id)) out << ' ' << format_real(v);
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace driftscope::embed
