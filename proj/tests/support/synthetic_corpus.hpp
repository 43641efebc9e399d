#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sherlock/dataset.hpp"

namespace sherlock::testing {

// Generated C functions whose labels are decided by marker statements:
//   CWE-119    memcpy into a fixed buffer
//   CWE-120    strcpy into a fixed buffer
//   CWE-469    pointer difference stored in an int (rare)
//   CWE-476    dereference of an unchecked malloc result
//   CWE-other  sprintf into a fixed buffer
// Negatives get bounded look-alikes (strncpy, snprintf, checked malloc) so
// the markers are the only signal.
struct SyntheticOptions {
  std::size_t count = 2000;
  std::uint64_t seed = 7;
  double separable_rate = 0.3;  // per separable head
  double rare_rate = 0.01;      // CWE-469
};

std::vector<CorpusRecord> synthetic_corpus(const SyntheticOptions& options);

/// A short function containing the CWE-120 marker and nothing else of note.
std::string strcpy_fixture();

}  // namespace sherlock::testing
