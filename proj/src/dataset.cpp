#include "sherlock/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "sherlock/errors.hpp"

namespace sherlock {

using nlohmann::json;

CorpusRecord parse_record(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("record is not an object");
  const auto code = j.find("code");
  if (code == j.end() || !code->is_string()) throw ParseError("missing string field 'code'");
  const auto labels = j.find("labels");
  if (labels == j.end() || !labels->is_array()) throw ParseError("missing array field 'labels'");
  if (labels->size() != kHeadCount) {
    throw ParseError("expected " + std::to_string(kHeadCount) + " labels, found " +
                     std::to_string(labels->size()));
  }
  CorpusRecord r;
  r.code = code->get<std::string>();
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    const auto& v = (*labels)[h];
    if (!v.is_number_integer() || (v.get<long long>() != 0 && v.get<long long>() != 1)) {
      throw ParseError("label " + std::to_string(h) + " is not 0 or 1");
    }
    r.labels[h] = static_cast<std::uint8_t>(v.get<int>());
  }
  return r;
}

CorpusLoad read_corpus(std::istream& in, LoadMode mode) {
  CorpusLoad out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.records.push_back(parse_record(line));
    } catch (const ParseError& e) {
      if (mode == LoadMode::Strict) {
        throw ParseError("line " + std::to_string(number) + ": " + e.what());
      }
      out.issues.push_back({number, e.what()});
    }
  }
  return out;
}

CorpusLoad load_corpus(const std::filesystem::path& path, LoadMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus '" + path.string() + "'");
  return read_corpus(in, mode);
}

std::string serialize_record(const CorpusRecord& record) {
  nlohmann::ordered_json j;
  j["code"] = record.code;
  j["labels"] = json::array();
  for (auto l : record.labels) j["labels"].push_back(static_cast<int>(l));
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

void write_corpus(std::ostream& out, std::span<const CorpusRecord> records) {
  for (const auto& r : records) out << serialize_record(r) << '\n';
}

void save_corpus(const std::filesystem::path& path, std::span<const CorpusRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_corpus(out, records);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ImbalanceStats imbalance_stats(std::span<const CorpusRecord> corpus) {
  if (corpus.empty()) throw EmptyInputError("imbalance statistics need a non-empty corpus");
  ImbalanceStats s;
  for (const auto& r : corpus) {
    for (std::size_t h = 0; h < kHeadCount; ++h) s.heads[h].positives += r.labels[h] ? 1 : 0;
  }
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    auto& b = s.heads[h];
    b.total = corpus.size();
    b.rate = static_cast<double>(b.positives) / static_cast<double>(b.total);
    if (b.rate < kRareHeadRate) {
      std::ostringstream msg;
      msg << kHeadNames[h] << ": positive rate " << b.rate * 100.0 << "% (" << b.positives
          << " of " << b.total << ") is below 1%";
      s.warnings.push_back(msg.str());
    }
  }
  return s;
}

std::string format_imbalance(const ImbalanceStats& stats) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-12s%12s%12s%12s\n", "Head", "Positives", "Total", "Rate");
  out << line;
  for (std::size_t h = 0; h < kHeadCount; ++h) {
    const auto& b = stats.heads[h];
    std::snprintf(line, sizeof line, "%-12s%12zu%12zu%11.4f%%\n", std::string(kHeadNames[h]).c_str(),
                  b.positives, b.total, b.rate * 100.0);
    out << line;
  }
  for (const auto& w : stats.warnings) out << "warning: " << w << '\n';
  return out.str();
}

}  // namespace sherlock
