#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "sherlock/tokenizer.hpp"

namespace sherlock {

inline constexpr std::size_t kHeadCount = 5;

/// Output head order, fixed everywhere (labels, reports, wire formats).
inline constexpr std::array<std::string_view, kHeadCount> kHeadNames = {
    "CWE-119", "CWE-120", "CWE-469", "CWE-476", "CWE-other"};

using Labels = std::array<std::uint8_t, kHeadCount>;

struct EncodedSample {
  std::vector<TokenId> ids;  // exactly max_len entries
  Labels labels{};
};

}  // namespace sherlock
