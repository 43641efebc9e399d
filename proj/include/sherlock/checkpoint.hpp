#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sherlock/model.hpp"
#include "sherlock/tokenizer.hpp"

namespace sherlock {

inline constexpr char kModelMagic[4] = {'S', 'H', 'L', 'K'};
inline constexpr std::uint16_t kModelFormatVersion = 1;

struct SavedModel {
  Model model;
  Vocabulary vocab;
};

// Container layout (all integers little-endian):
//   "SHLK"  u16 version
//   hyperparams: u32 embed_dim, conv_filters, kernel_size, dense1, dense2,
//                heads, head_width, max_len, vocab_size; f64 dropout_rate,
//                learning_rate
//   vocabulary:  u32 count, then per id ascending: u32 byte length, bytes
//   parameters:  u32 tensor count, per tensor in declaration order:
//                u32 rank, u32 dims[rank], f32 values[product(dims)]
//   u32 CRC-32 (zlib polynomial) of every preceding byte
std::vector<char> serialize_model(const Model& model, const Vocabulary& vocab);

/// Throws NotAModelFileError, VersionMismatchError, TruncatedFileError,
/// ChecksumError or FormatError (inconsistent contents).
SavedModel deserialize_model(const std::vector<char>& bytes);

void save_model(const Model& model, const Vocabulary& vocab, const std::filesystem::path& path);
SavedModel load_model(const std::filesystem::path& path);

}  // namespace sherlock
