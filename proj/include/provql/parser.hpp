#pragma once

#include <string>
#include <variant>
#include <vector>

#include "provql/ast.hpp"
#include "provql/lexer.hpp"

namespace provql {

struct ParseError {
  std::size_t pos = 0;
  int line = 1;
  int col = 1;
  std::string message;
  std::vector<std::string> expected;

  std::string to_string() const;
};

// Parses query text into an AST; reports the first error with position and
// the set of tokens that would have been accepted there. Never throws on
// arbitrary input.
std::variant<ast::QueryAst, ParseError> parse_query(const std::string& text);

struct SemanticError {
  std::size_t pos = 0;
  std::string message;
};

// Checks variable binding, yield/return resolution, aggregate placement,
// LIMIT > 0, non-empty projections and the constructs the engine cannot
// execute. An empty result means the AST is runnable.
std::vector<SemanticError> validate_ast(const ast::QueryAst& ast);

// Canonical text form; reparsing it yields a structurally identical AST.
std::string pretty_print(const ast::QueryAst& ast);
std::string pretty_print(const ast::Expr& expr);

}  // namespace provql
