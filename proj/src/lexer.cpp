#include "provql/lexer.hpp"

#include <cctype>

namespace provql {

bool is_kw(const Token& t, const char* kw) {
  if (t.kind != TokKind::Ident) return false;
  const std::string& s = t.text;
  std::size_t i = 0;
  for (; kw[i]; ++i) {
    if (i >= s.size()) return false;
    if (std::tolower(static_cast<unsigned char>(s[i])) != kw[i]) return false;
  }
  return i == s.size();
}

std::pair<int, int> line_col(const std::string& text, std::size_t pos) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < pos && i < text.size(); ++i) {
    if (text[i] == '\n') {
      line++;
      col = 1;
    } else {
      col++;
    }
  }
  return {line, col};
}

std::variant<std::vector<Token>, LexError> tokenize(const std::string& text) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto push = [&](TokKind k, std::size_t pos, std::string s = {}) {
    Token t;
    t.kind = k;
    t.text = std::move(s);
    t.pos = pos;
    out.push_back(std::move(t));
  };

  while (i < n) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < n && text[i + 1] == '-') {  // line comment
      while (i < n && text[i] != '\n') ++i;
      continue;
    }
    std::size_t pos = i;
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < n && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
      push(TokKind::Ident, pos, text.substr(i, j - i));
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
      bool is_float = j < n && text[j] == '.' && j + 1 < n &&
                      std::isdigit(static_cast<unsigned char>(text[j + 1]));
      if (is_float) {
        ++j;
        while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        Token t;
        t.kind = TokKind::Float;
        t.pos = pos;
        t.float_value = std::stod(text.substr(i, j - i));
        out.push_back(std::move(t));
      } else {
        // Signed 64-bit only; anything larger is a lex error.
        std::uint64_t v = 0;
        for (std::size_t k = i; k < j; ++k) {
          std::uint64_t d = static_cast<std::uint64_t>(text[k] - '0');
          if (v > (static_cast<std::uint64_t>(INT64_MAX) - d) / 10)
            return LexError{pos, "integer literal out of range"};
          v = v * 10 + d;
        }
        Token t;
        t.kind = TokKind::Int;
        t.pos = pos;
        t.int_value = static_cast<std::int64_t>(v);
        out.push_back(std::move(t));
      }
      i = j;
      continue;
    }
    if (c == '"') {
      std::string s;
      std::size_t j = i + 1;
      bool closed = false;
      while (j < n) {
        if (text[j] == '\\' && j + 1 < n) {
          s.push_back(text[j + 1]);
          j += 2;
          continue;
        }
        if (text[j] == '"') {
          closed = true;
          ++j;
          break;
        }
        s.push_back(text[j]);
        ++j;
      }
      if (!closed) return LexError{pos, "unterminated string"};
      push(TokKind::String, pos, std::move(s));
      i = j;
      continue;
    }
    switch (c) {
      case '(': push(TokKind::LParen, pos); ++i; continue;
      case ')': push(TokKind::RParen, pos); ++i; continue;
      case '[': push(TokKind::LBracket, pos); ++i; continue;
      case ']': push(TokKind::RBracket, pos); ++i; continue;
      case '{': push(TokKind::LBrace, pos); ++i; continue;
      case '}': push(TokKind::RBrace, pos); ++i; continue;
      case ',': push(TokKind::Comma, pos); ++i; continue;
      case ':': push(TokKind::Colon, pos); ++i; continue;
      case ';': push(TokKind::Semicolon, pos); ++i; continue;
      case '.': push(TokKind::Dot, pos); ++i; continue;
      case '|': push(TokKind::Pipe, pos); ++i; continue;
      case '=': push(TokKind::Eq, pos); ++i; continue;
      case '+': push(TokKind::Plus, pos); ++i; continue;
      case '*': push(TokKind::Star, pos); ++i; continue;
      case '/': push(TokKind::Slash, pos); ++i; continue;
      case '-':
        if (i + 1 < n && text[i + 1] == '>') {
          push(TokKind::Arrow, pos);
          i += 2;
        } else {
          push(TokKind::Minus, pos);
          ++i;
        }
        continue;
      case '<':
        if (i + 1 < n && text[i + 1] == '>') {
          push(TokKind::Ne, pos);
          i += 2;
        } else if (i + 1 < n && text[i + 1] == '=') {
          push(TokKind::Le, pos);
          i += 2;
        } else {
          push(TokKind::Lt, pos);
          ++i;
        }
        continue;
      case '>':
        if (i + 1 < n && text[i + 1] == '=') {
          push(TokKind::Ge, pos);
          i += 2;
        } else {
          push(TokKind::Gt, pos);
          ++i;
        }
        continue;
      default:
        return LexError{pos, std::string("unexpected character '") + c + "'"};
    }
  }
  push(TokKind::End, n);
  return out;
}

}  // namespace provql
