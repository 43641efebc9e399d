#include "synthetic_corpus.hpp"

#include <algorithm>
#include <array>
#include <string_view>

#include "sherlock/rng.hpp"

namespace sherlock::testing {

namespace {

constexpr std::array<std::string_view, 12> kNames = {
    "count", "index", "len", "total", "offset", "width",
    "flags", "state", "limit", "value", "cursor", "depth"};
constexpr std::array<std::string_view, 6> kCalls = {
    "update_state", "log_event", "compute_hash", "reset_counter", "check_bounds", "emit"};

std::string_view pick(Rng& rng, std::span<const std::string_view> xs) {
  return xs[rng.below(xs.size())];
}

std::string filler(Rng& rng) {
  const auto a = std::string(pick(rng, kNames));
  const auto b = std::string(pick(rng, kNames));
  switch (rng.below(5)) {
    case 0:
      return "    " + a + " = " + b + " + " + std::to_string(rng.below(100)) + ";\n";
    case 1:
      return "    if (" + a + " > " + b + ") {\n        " + a + " -= " + b + ";\n    }\n";
    case 2:
      return "    for (int i = 0; i < " + a + "; i++) {\n        " + b + " += i;\n    }\n";
    case 3:
      return "    " + std::string(pick(rng, kCalls)) + "(" + a + ", " + b + ");\n";
    default:
      return "    " + a + " = " + b + " * 2.5;\n";
  }
}

}  // namespace

std::vector<CorpusRecord> synthetic_corpus(const SyntheticOptions& options) {
  Rng rng({options.seed, 0x70792e});
  std::vector<CorpusRecord> out;
  out.reserve(options.count);
  for (std::size_t n = 0; n < options.count; ++n) {
    Labels labels{};
    for (std::size_t h : {0, 1, 3, 4}) labels[h] = rng.uniform() < options.separable_rate;
    labels[2] = rng.uniform() < options.rare_rate;

    std::vector<std::string> stmts;
    const auto fillers = 2 + rng.below(4);
    for (std::size_t i = 0; i < fillers; ++i) stmts.push_back(filler(rng));
    stmts.push_back(labels[0] ? "    memcpy(buf, src, n);\n"
                              : "    memmove(buf, src, sizeof(buf));\n");
    stmts.push_back(labels[1] ? "    strcpy(buf, src);\n"
                              : "    strncpy(buf, src, sizeof(buf) - 1);\n");
    if (labels[2]) stmts.push_back("    int gap = end - begin;\n");
    stmts.push_back(labels[3] ? "    p = malloc(n);\n    p->next = 0;\n"
                              : "    p = malloc(n);\n    if (p) p->next = 0;\n");
    stmts.push_back(labels[4] ? "    sprintf(buf, \"%d\", n);\n"
                              : "    snprintf(buf, sizeof(buf), \"%d\", n);\n");
    // Shuffle statement order so position carries no signal.
    rng.shuffle(stmts.begin(), stmts.end());

    std::string code = "int func_" + std::to_string(n) + "(char *src, size_t n) {\n"
                       "    char buf[64];\n    struct node *p;\n";
    for (const auto& s : stmts) code += s;
    code += "    return 0;\n}\n";
    out.push_back({std::move(code), labels});
  }
  return out;
}

std::string strcpy_fixture() {
  return "int copy_name(char *src, size_t n) {\n"
         "    char buf[64];\n"
         "    struct node *p;\n"
         "    len = count + 4;\n"
         "    strcpy(buf, src);\n"
         "    memmove(buf, src, sizeof(buf));\n"
         "    p = malloc(n);\n"
         "    if (p) p->next = 0;\n"
         "    snprintf(buf, sizeof(buf), \"%d\", n);\n"
         "    return 0;\n"
         "}\n";
}

}  // namespace sherlock::testing
