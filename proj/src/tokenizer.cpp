#include "sherlock/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "sherlock/errors.hpp"

namespace sherlock {

namespace {

constexpr auto kKeywords = std::to_array<std::string_view>({
    // C++
    "alignas", "alignof", "and", "and_eq", "asm", "auto", "bitand", "bitor", "bool", "break",
    "case", "catch", "char", "char8_t", "char16_t", "char32_t", "class", "compl", "concept",
    "const", "consteval", "constexpr", "constinit", "const_cast", "continue", "co_await",
    "co_return", "co_yield", "decltype", "default", "delete", "do", "double", "dynamic_cast",
    "else", "enum", "explicit", "export", "extern", "false", "float", "for", "friend", "goto",
    "if", "inline", "int", "long", "mutable", "namespace", "new", "noexcept", "not", "not_eq",
    "nullptr", "operator", "or", "or_eq", "private", "protected", "public", "register",
    "reinterpret_cast", "requires", "return", "short", "signed", "sizeof", "static",
    "static_assert", "static_cast", "struct", "switch", "template", "this", "thread_local",
    "throw", "true", "try", "typedef", "typeid", "typename", "union", "unsigned", "using",
    "virtual", "void", "volatile", "wchar_t", "while", "xor", "xor_eq",
    // C only
    "restrict", "_Alignas", "_Alignof", "_Atomic", "_Bool", "_Complex", "_Generic",
    "_Imaginary", "_Noreturn", "_Static_assert", "_Thread_local",
    // Common compiler extensions seen in real corpora
    "__asm__", "__attribute__", "__inline", "__inline__", "__restrict", "__restrict__",
    "__typeof__", "__volatile__", "typeof", "__extension__",
});

// Longest first within the table so maximal munch is a linear scan.
constexpr auto kOperators = std::to_array<std::string_view>({
    ">>=", "<<=", "...", "->*", "<=>",
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=",
    "/=", "%=", "&=", "|=", "^=", "::", ".*", "##",
    "+", "-", "*", "/", "%", "=", "<", ">", "!", "&", "|", "^", "~", "?", ":", ".", "#",
});

constexpr auto kPunctuation = std::to_array<std::string_view>({"(", ")", "[", "]", "{", "}", ";", ","});

constexpr std::string_view kReplacementChar = "\xEF\xBF\xBD";

bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }
bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Length of a well-formed UTF-8 sequence starting at `s`, or 0 if invalid.
std::size_t utf8_sequence_length(std::string_view s) {
  const auto b0 = static_cast<unsigned char>(s[0]);
  std::size_t len = 0;
  std::uint32_t min_cp = 0;
  std::uint32_t cp = 0;
  if (b0 >= 0xC2 && b0 <= 0xDF) {
    len = 2, min_cp = 0x80, cp = b0 & 0x1F;
  } else if (b0 >= 0xE0 && b0 <= 0xEF) {
    len = 3, min_cp = 0x800, cp = b0 & 0x0F;
  } else if (b0 >= 0xF0 && b0 <= 0xF4) {
    len = 4, min_cp = 0x10000, cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (s.size() < len) return 0;
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[i]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  return len;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  TokenStream run() {
    TokenStream out;
    while (pos_ < src_.size()) {
      if (skip_trivia()) continue;
      out.push_back(next_token());
    }
    return out;
  }

 private:
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }
  bool starts_with(std::string_view s) const { return src_.substr(pos_).starts_with(s); }

  // Whitespace, comments, and line continuations. Returns true if anything was consumed.
  bool skip_trivia() {
    const char c = peek();
    if (is_space(c)) {
      ++pos_;
      return true;
    }
    if (c == '\\' && (peek(1) == '\n' || (peek(1) == '\r' && peek(2) == '\n'))) {
      pos_ += peek(1) == '\n' ? 2 : 3;
      return true;
    }
    if (starts_with("//")) {
      pos_ += 2;
      while (pos_ < src_.size() && src_[pos_] != '\n') {
        if (src_[pos_] == '\\' && peek(1) == '\n') ++pos_;
        ++pos_;
      }
      return true;
    }
    if (starts_with("/*")) {
      const auto end = src_.find("*/", pos_ + 2);
      pos_ = end == std::string_view::npos ? src_.size() : end + 2;
      return true;
    }
    return false;
  }

  Token next_token() {
    const char c = peek();
    if (is_digit(c) || (c == '.' && is_digit(peek(1)))) return number();
    if (is_ident_start(c)) return word();
    if (c == '"') return quoted('"', TokenKind::StringLiteral);
    if (c == '\'') return quoted('\'', TokenKind::CharLiteral);
    for (auto op : kOperators) {
      if (starts_with(op)) {
        pos_ += op.size();
        return {TokenKind::Operator, std::string(op)};
      }
    }
    for (auto p : kPunctuation) {
      if (c == p[0]) {
        ++pos_;
        return {TokenKind::Punctuation, std::string(p)};
      }
    }
    if (static_cast<unsigned char>(c) >= 0x80) {
      const auto len = utf8_sequence_length(src_.substr(pos_));
      if (len == 0) {
        ++pos_;
        return {TokenKind::Punctuation, std::string(kReplacementChar)};
      }
      Token t{TokenKind::Punctuation, std::string(src_.substr(pos_, len))};
      pos_ += len;
      return t;
    }
    ++pos_;
    return {TokenKind::Punctuation, std::string(1, c)};
  }

  // pp-number: digits, letters, '.', digit separators and exponent signs.
  Token number() {
    const auto start = pos_;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (is_ident_char(c) || c == '.') {
        ++pos_;
      } else if ((c == '+' || c == '-') && pos_ > start &&
                 std::string_view("eEpP").find(src_[pos_ - 1]) != std::string_view::npos) {
        ++pos_;
      } else if (c == '\'' && pos_ > start && is_ident_char(peek(1))) {
        ++pos_;
      } else {
        break;
      }
    }
    const auto text = src_.substr(start, pos_ - start);
    const bool hex = text.size() > 1 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X');
    const auto exponent_chars = hex ? std::string_view("pP") : std::string_view("eE");
    const bool is_float = text.find('.') != std::string_view::npos ||
                          text.find_first_of(exponent_chars) != std::string_view::npos;
    if (is_float) return {TokenKind::FloatLiteral, std::string(kFloatPlaceholder)};
    return {TokenKind::IntLiteral, std::string(kIntPlaceholder)};
  }

  Token word() {
    const auto start = pos_;
    while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
    const auto text = src_.substr(start, pos_ - start);

    const char next = peek();
    const bool encoding_prefix = text == "L" || text == "u" || text == "U" || text == "u8";
    const bool raw_prefix = text == "R" || text == "LR" || text == "uR" || text == "UR" ||
                            text == "u8R";
    if (next == '"' && raw_prefix) return raw_string();
    if (next == '"' && encoding_prefix) return quoted('"', TokenKind::StringLiteral);
    if (next == '\'' && encoding_prefix) return quoted('\'', TokenKind::CharLiteral);

    if (is_keyword(text)) return {TokenKind::Keyword, std::string(text)};
    return {TokenKind::Identifier, std::string(text)};
  }

  // Consumes from the opening quote to the matching close. Unterminated
  // literals stop before the end of the line.
  Token quoted(char quote, TokenKind kind) {
    ++pos_;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '\\' && pos_ + 1 < src_.size()) {
        pos_ += 2;
        continue;
      }
      if (c == '\n') break;
      ++pos_;
      if (c == quote) break;
    }
    const auto placeholder = kind == TokenKind::StringLiteral ? kStringPlaceholder : kCharPlaceholder;
    return {kind, std::string(placeholder)};
  }

  // R"delim( ... )delim"
  Token raw_string() {
    const auto open = pos_;
    const auto paren = src_.find('(', open + 1);
    const auto delim_len = paren == std::string_view::npos ? 0 : paren - open - 1;
    const auto delim = src_.substr(open + 1, delim_len);
    const bool valid = paren != std::string_view::npos && delim_len <= 16 &&
                       delim.find_first_of(" ()\\\t\n\v\f\r\"") == std::string_view::npos;
    if (!valid) return quoted('"', TokenKind::StringLiteral);

    std::string terminator = ")";
    terminator.append(delim);
    terminator.push_back('"');
    const auto end = src_.find(terminator, paren + 1);
    pos_ = end == std::string_view::npos ? src_.size() : end + terminator.size();
    return {TokenKind::StringLiteral, std::string(kStringPlaceholder)};
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

const std::string kPadLexeme = "<pad>";
const std::string kUnkLexeme = "<unk>";

}  // namespace

std::string_view to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Keyword: return "Keyword";
    case TokenKind::Identifier: return "Identifier";
    case TokenKind::IntLiteral: return "IntLiteral";
    case TokenKind::FloatLiteral: return "FloatLiteral";
    case TokenKind::StringLiteral: return "StringLiteral";
    case TokenKind::CharLiteral: return "CharLiteral";
    case TokenKind::Operator: return "Operator";
    case TokenKind::Punctuation: return "Punctuation";
  }
  return "?";
}

std::span<const std::string_view> keywords() { return kKeywords; }
std::span<const std::string_view> operator_lexemes() { return kOperators; }
std::span<const std::string_view> punctuation_lexemes() { return kPunctuation; }

bool is_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

TokenStream lex(std::string_view source) { return Lexer(source).run(); }

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> lexemes_from_two) {
  lexemes_.reserve(lexemes_from_two.size() + 2);
  lexemes_.push_back(kPadLexeme);
  lexemes_.push_back(kUnkLexeme);
  for (auto& l : lexemes_from_two) lexemes_.push_back(std::move(l));
  for (std::size_t i = 0; i < lexemes_.size(); ++i) {
    if (!index_.emplace(lexemes_[i], static_cast<TokenId>(i)).second) {
      throw InvalidArgumentError("duplicate vocabulary lexeme '" + lexemes_[i] + "'");
    }
  }
}

TokenId Vocabulary::id_of(std::string_view lexeme) const {
  const auto it = index_.find(std::string(lexeme));
  return it == index_.end() ? kUnknownId : it->second;
}

bool Vocabulary::contains(std::string_view lexeme) const {
  return index_.contains(std::string(lexeme));
}

const std::string& Vocabulary::lexeme(TokenId id) const {
  if (id >= lexemes_.size()) {
    throw OutOfRangeError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(lexemes_.size()));
  }
  return lexemes_[id];
}

void Vocabulary::write(std::ostream& out) const {
  for (std::size_t i = 0; i < lexemes_.size(); ++i) out << lexemes_[i] << '\t' << i << '\n';
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write(out);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Vocabulary Vocabulary::read(std::istream& in) {
  std::vector<std::string> rest;
  std::string line;
  std::size_t expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw ParseError("vocabulary line " + std::to_string(expected + 1) + " has no tab");
    }
    const auto lexeme = line.substr(0, tab);
    std::size_t id = 0;
    try {
      std::size_t used = 0;
      id = std::stoul(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ParseError("vocabulary line " + std::to_string(expected + 1) + " has a bad id");
    }
    if (id != expected) {
      throw ParseError("vocabulary ids must be contiguous: expected " + std::to_string(expected) +
                       ", found " + std::to_string(id));
    }
    if ((id == kPaddingId && lexeme != kPadLexeme) || (id == kUnknownId && lexeme != kUnkLexeme)) {
      throw ParseError("vocabulary reserved entry " + std::to_string(id) + " is '" + lexeme + "'");
    }
    if (id >= 2) rest.push_back(lexeme);
    ++expected;
  }
  if (expected < 2) throw ParseError("vocabulary is missing its reserved entries");
  try {
    return Vocabulary(std::move(rest));
  } catch (const InvalidArgumentError& e) {
    throw ParseError(e.what());
  }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open vocabulary '" + path.string() + "'");
  return read(in);
}

Vocabulary build_vocabulary(std::span<const TokenStream> corpus, std::size_t top_k) {
  std::vector<std::string> base;
  for (auto k : kKeywords) base.emplace_back(k);
  for (auto o : kOperators) base.emplace_back(o);
  for (auto p : kPunctuation) base.emplace_back(p);
  for (auto p : {kIntPlaceholder, kFloatPlaceholder, kStringPlaceholder, kCharPlaceholder}) {
    base.emplace_back(p);
  }

  // std::map gives lexicographic order for free; stable_sort keeps it for ties.
  std::map<std::string, std::size_t> counts;
  for (const auto& stream : corpus) {
    for (const auto& tok : stream) {
      if (tok.kind == TokenKind::Identifier) ++counts[tok.text];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const auto keep = std::min(top_k, ranked.size());
  for (std::size_t i = 0; i < keep; ++i) base.push_back(std::move(ranked[i].first));
  return Vocabulary(std::move(base));
}

std::vector<TokenId> encode(const TokenStream& tokens, const Vocabulary& vocab,
                            std::size_t max_len) {
  if (max_len == 0) throw InvalidArgumentError("max_len must be at least 1");
  std::vector<TokenId> ids(max_len, kPaddingId);
  const auto n = std::min(tokens.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) ids[i] = vocab.id_of(tokens[i].text);
  return ids;
}

}  // namespace sherlock
