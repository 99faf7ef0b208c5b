#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace provql {

enum class TokKind {
  Ident,     // also carries keywords; keywords are case-insensitive
  Int,
  Float,
  String,
  LParen,
  RParen,
  LBracket,
  RBracket,
  LBrace,
  RBrace,
  Comma,
  Colon,
  Semicolon,
  Dot,
  Pipe,
  Arrow,     // ->
  Eq,        // =
  Ne,        // <>
  Lt,
  Gt,
  Le,
  Ge,
  Plus,
  Minus,
  Star,
  Slash,
  End,
};

struct Token {
  TokKind kind = TokKind::End;
  std::string text;         // identifier/string payload
  std::int64_t int_value = 0;
  double float_value = 0.0;
  std::size_t pos = 0;      // byte offset of the first character
};

struct LexError {
  std::size_t pos = 0;
  std::string message;
};

// Splits query text into tokens. `--` starts a line comment. Integer
// literals must fit in a signed 64-bit value.
std::variant<std::vector<Token>, LexError> tokenize(const std::string& text);

// Case-insensitive keyword check on an identifier token.
bool is_kw(const Token& t, const char* kw);

// 1-based line/column of a byte offset, for diagnostics.
std::pair<int, int> line_col(const std::string& text, std::size_t pos);

}  // namespace provql
