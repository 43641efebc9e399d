#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sherlock/sample.hpp"

namespace sherlock {

/// One function and its five head labels.
struct CorpusRecord {
  std::string code;
  Labels labels{};

  friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

enum class LoadMode { Lenient, Strict };

struct LoadIssue {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct CorpusLoad {
  std::vector<CorpusRecord> records;
  std::vector<LoadIssue> issues;  // always empty in Strict mode
};

/// Line-delimited JSON, one `{"code": "...", "labels": [a,b,c,d,e]}` per
/// line. Blank lines are skipped. Lenient mode collects malformed lines
/// into `issues`; Strict mode throws ParseError on the first one.
CorpusLoad read_corpus(std::istream& in, LoadMode mode = LoadMode::Lenient);
CorpusLoad load_corpus(const std::filesystem::path& path, LoadMode mode = LoadMode::Lenient);

/// Parses one line; throws ParseError with the reason.
CorpusRecord parse_record(const std::string& line);
std::string serialize_record(const CorpusRecord& record);
void write_corpus(std::ostream& out, std::span<const CorpusRecord> records);
void save_corpus(const std::filesystem::path& path, std::span<const CorpusRecord> records);

struct HeadBalance {
  std::size_t positives = 0;
  std::size_t total = 0;
  double rate = 0.0;
};

inline constexpr double kRareHeadRate = 0.01;

struct ImbalanceStats {
  std::array<HeadBalance, kHeadCount> heads{};
  /// One message per head whose positive rate is below 1%.
  std::vector<std::string> warnings;
};

ImbalanceStats imbalance_stats(std::span<const CorpusRecord> corpus);
std::string format_imbalance(const ImbalanceStats& stats);

}  // namespace sherlock
