#include "sherlock/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <string_view>

#include <zlib.h>

#include "binary_io.hpp"
#include "sherlock/errors.hpp"

namespace sherlock {

namespace {

constexpr std::string_view kMagic(kModelMagic, sizeof kModelMagic);

std::uint32_t crc32_of(const char* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(size));
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t narrow(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFULL) throw FormatError(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

SavedModel parse_body(detail::ByteReader& r, const std::vector<char>& bytes);

}  // namespace

std::vector<char> serialize_model(const Model& model, const Vocabulary& vocab) {
  const auto& hp = model.hp;
  if (vocab.size() != hp.vocab_size) {
    throw InvalidArgumentError("vocabulary has " + std::to_string(vocab.size()) +
                               " entries but the model expects " + std::to_string(hp.vocab_size));
  }
  detail::ByteWriter w;
  w.bytes(kMagic);
  w.u16(kModelFormatVersion);
  for (auto v : {hp.embed_dim, hp.conv_filters, hp.kernel_size, hp.dense1, hp.dense2, hp.heads,
                 hp.head_width, hp.max_len, hp.vocab_size}) {
    w.u32(narrow(v, "hyperparameter"));
  }
  w.f64(hp.dropout_rate);
  w.f64(hp.learning_rate);

  w.u32(narrow(vocab.size(), "vocabulary size"));
  for (const auto& lexeme : vocab.lexemes()) w.str(lexeme);

  std::uint32_t count = 0;
  model.params.for_each([&](std::string_view, const Tensor&) { ++count; });
  w.u32(count);
  model.params.for_each([&](std::string_view, const Tensor& t) {
    w.u32(narrow(t.rank(), "tensor rank"));
    for (auto d : t.shape()) w.u32(narrow(d, "tensor dimension"));
    for (double v : t.data()) w.f32(static_cast<float>(v));
  });

  auto bytes = w.buffer();
  detail::ByteWriter trailer;
  trailer.u32(crc32_of(bytes.data(), bytes.size()));
  bytes.insert(bytes.end(), trailer.buffer().begin(), trailer.buffer().end());
  return bytes;
}

SavedModel deserialize_model(const std::vector<char>& bytes) {
  if (bytes.size() < kMagic.size() ||
      std::string_view(bytes.data(), kMagic.size()) != kMagic) {
    throw NotAModelFileError("not a model file (bad magic bytes)");
  }
  detail::ByteReader r(bytes.data(), bytes.size());
  r.bytes(kMagic.size());
  if (const auto version = r.u16(); version != kModelFormatVersion) {
    throw VersionMismatchError("model format version " + std::to_string(version) +
                               " is not supported (expected " +
                               std::to_string(kModelFormatVersion) + ")");
  }

  try {
    return parse_body(r, bytes);
  } catch (const TruncatedFileError&) {
    throw;
  } catch (const FormatError&) {
    // Structural damage in a file whose checksum no longer matches is
    // reported as corruption rather than as a malformed layout.
    if (bytes.size() >= 4) {
      detail::ByteReader tail(bytes.data() + bytes.size() - 4, 4);
      if (tail.u32() != crc32_of(bytes.data(), bytes.size() - 4)) {
        throw ChecksumError("model file checksum mismatch");
      }
    }
    throw;
  }
}

namespace {

SavedModel parse_body(detail::ByteReader& r, const std::vector<char>& bytes) {
  Hyperparams hp;
  for (auto* field : {&hp.embed_dim, &hp.conv_filters, &hp.kernel_size, &hp.dense1, &hp.dense2,
                      &hp.heads, &hp.head_width, &hp.max_len, &hp.vocab_size}) {
    *field = r.u32();
  }
  hp.dropout_rate = r.f64();
  hp.learning_rate = r.f64();

  const auto vocab_count = r.u32();
  std::vector<std::string> lexemes;
  for (std::uint32_t i = 0; i < vocab_count; ++i) lexemes.push_back(r.str());

  Model model{hp, {}};
  // Shapes come from a freshly built parameter set so the file cannot
  // smuggle in a mismatched layout.
  ModelParams expected;
  try {
    hp.validate();
    const auto floats = trunk_parameter_count(hp) + hp.vocab_size * hp.embed_dim;
    if (floats > r.remaining() / 4) {
      throw TruncatedFileError("model file is shorter than its declared parameters");
    }
    expected = init_model(hp, 0).params;
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid hyperparameters in model file: ") + e.what());
  }

  const auto tensor_count = r.u32();
  std::uint32_t expected_count = 0;
  expected.for_each([&](std::string_view, const Tensor&) { ++expected_count; });
  if (tensor_count != expected_count) {
    throw FormatError("model file holds " + std::to_string(tensor_count) + " tensors, expected " +
                      std::to_string(expected_count));
  }
  expected.for_each([&](std::string_view name, Tensor& t) {
    const auto rank = r.u32();
    if (rank != t.rank()) {
      throw FormatError("tensor " + std::string(name) + " has rank " + std::to_string(rank) +
                        ", expected " + std::to_string(t.rank()));
    }
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    if (shape != t.shape()) {
      throw FormatError("tensor " + std::string(name) + " has shape " + shape_to_string(shape) +
                        ", expected " + shape_to_string(t.shape()));
    }
    for (auto& v : t.data()) v = static_cast<double>(r.f32());
  });
  model.params = std::move(expected);

  const auto body_size = r.position();
  const auto stored_crc = r.u32();
  if (r.remaining() != 0) throw FormatError("trailing bytes after model checksum");
  if (stored_crc != crc32_of(bytes.data(), body_size)) {
    throw ChecksumError("model file checksum mismatch");
  }

  if (lexemes.size() < 2 || lexemes[0] != Vocabulary().lexeme(kPaddingId) ||
      lexemes[1] != Vocabulary().lexeme(kUnknownId)) {
    throw FormatError("model vocabulary is missing its reserved entries");
  }
  lexemes.erase(lexemes.begin(), lexemes.begin() + 2);
  Vocabulary vocab;
  try {
    vocab = Vocabulary(std::move(lexemes));
  } catch (const Error& e) {
    throw FormatError(std::string("bad vocabulary in model file: ") + e.what());
  }
  if (vocab.size() != hp.vocab_size) {
    throw FormatError("vocabulary size does not match hyperparameters");
  }
  return {std::move(model), std::move(vocab)};
}

}  // namespace

void save_model(const Model& model, const Vocabulary& vocab, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model, vocab);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

SavedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path.string() + "'");
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace sherlock
