#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sherlock {

enum class TokenKind : std::uint8_t {
  Keyword,
  Identifier,
  IntLiteral,
  FloatLiteral,
  StringLiteral,
  CharLiteral,
  Operator,
  Punctuation,
};

std::string_view to_string(TokenKind kind);

struct Token {
  TokenKind kind;
  std::string text;

  friend bool operator==(const Token&, const Token&) = default;
};

using TokenStream = std::vector<Token>;
using TokenId = std::uint32_t;

// Placeholder lexemes emitted in place of literal values.
inline constexpr std::string_view kIntPlaceholder = "<int>";
inline constexpr std::string_view kFloatPlaceholder = "<float>";
inline constexpr std::string_view kStringPlaceholder = "<str>";
inline constexpr std::string_view kCharPlaceholder = "<char>";

inline constexpr TokenId kPaddingId = 0;
inline constexpr TokenId kUnknownId = 1;

inline constexpr std::size_t kDefaultMaxLen = 500;
inline constexpr std::size_t kDefaultTopK = 10000;

/// The fixed C/C++ keyword table (C17 plus C++20), in vocabulary order.
std::span<const std::string_view> keywords();

/// Every operator and punctuation lexeme the lexer can produce from
/// recognized characters, in vocabulary order.
std::span<const std::string_view> operator_lexemes();
std::span<const std::string_view> punctuation_lexemes();

bool is_keyword(std::string_view word);

/// Splits C/C++ source into normalized tokens.
///
/// Comments and whitespace are dropped, literals collapse to their
/// placeholder, operators use maximal munch. Never fails: bytes that
/// start no known token become single-character Punctuation tokens, and
/// invalid UTF-8 is replaced by U+FFFD.
TokenStream lex(std::string_view source);

/// Immutable lexeme -> id mapping. Ids 0 and 1 are reserved for padding
/// and out-of-vocabulary lexemes; the rest are contiguous from 2.
class Vocabulary {
 public:
  Vocabulary();

  /// Builds from lexemes listed in id order starting at id 2.
  explicit Vocabulary(std::vector<std::string> lexemes_from_two);

  std::size_t size() const { return lexemes_.size(); }
  TokenId id_of(std::string_view lexeme) const;
  bool contains(std::string_view lexeme) const;
  const std::string& lexeme(TokenId id) const;
  /// All lexemes indexed by id, including the two reserved entries.
  const std::vector<std::string>& lexemes() const { return lexemes_; }

  /// One `lexeme<TAB>id` line per entry, ascending ids.
  void write(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static Vocabulary read(std::istream& in);
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.lexemes_ == b.lexemes_;
  }

 private:
  std::vector<std::string> lexemes_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Base set (keywords, operators, punctuation, placeholders) plus the
/// `top_k` most frequent identifiers; ties break lexicographically.
Vocabulary build_vocabulary(std::span<const TokenStream> corpus, std::size_t top_k);

/// Maps tokens to ids, truncating at the tail or padding with 0 so the
/// result has exactly `max_len` entries.
std::vector<TokenId> encode(const TokenStream& tokens, const Vocabulary& vocab,
                            std::size_t max_len);

}  // namespace sherlock
