#include "provql/parser.hpp"

#include <sstream>
#include <stdexcept>

namespace provql {

using namespace ast;

std::string ParseError::to_string() const {
  std::ostringstream os;
  os << "parse error at " << line << ":" << col << ": " << message;
  if (!expected.empty()) {
    os << " (expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) os << ", ";
      os << expected[i];
    }
    os << ")";
  }
  return os.str();
}

namespace {

struct ParseFail {
  std::size_t pos;
  std::string message;
  std::vector<std::string> expected;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  QueryAst parse_program() {
    QueryAst ast;
    ast.sub_queries.push_back(parse_sub_query());
    while (at_merge_kw()) {
      MergeOp op = is_kw(peek(), "union") ? MergeOp::Union : MergeOp::Intersect;
      // A parenthesized block after the merge keyword starts a new
      // sub-query; a WITH continues the current one (handled inside
      // parse_sub_query), so reaching here with anything else is an error.
      advance();
      expect(TokKind::LParen, "(");
      ast.merges.push_back(op);
      ast.sub_queries.push_back(parse_sub_query());
      expect(TokKind::RParen, ")");
    }
    if (peek().kind == TokKind::Semicolon) advance();
    if (peek().kind != TokKind::End) fail("trailing input after query", {"end of input"});
    return ast;
  }

 private:
  // --- token helpers ---------------------------------------------------------

  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const Token& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail(const std::string& msg, std::vector<std::string> expected = {}) const {
    throw ParseFail{peek().pos, msg, std::move(expected)};
  }

  const Token& expect(TokKind k, const char* what) {
    if (peek().kind != k) fail(std::string("unexpected token"), {what});
    return advance();
  }

  const Token& expect_kw(const char* kw) {
    if (!is_kw(peek(), kw)) fail("unexpected token", {std::string("'") + kw + "'"});
    return advance();
  }

  std::string expect_ident(const char* what = "identifier") {
    if (peek().kind != TokKind::Ident) fail("unexpected token", {what});
    return advance().text;
  }

  bool at_kw(const char* kw, std::size_t ahead = 0) const { return is_kw(peek(ahead), kw); }

  bool at_merge_kw() const {
    // union/intersect followed by '(' is a top-level merge; followed by
    // WITH it belongs to the enclosing sub-query.
    return (at_kw("union") || at_kw("intersect")) && peek(1).kind == TokKind::LParen;
  }

  // --- query structure -------------------------------------------------------

  SubQuery parse_sub_query() {
    SubQuery sq;
    sq.pipelines.push_back(parse_poi_pipeline());
    while ((at_kw("union") || at_kw("intersect")) && at_kw("with", 1)) {
      MergeOp op = at_kw("union") ? MergeOp::Union : MergeOp::Intersect;
      advance();
      sq.inner_merges.push_back(op);
      sq.pipelines.push_back(parse_with_pipeline());
    }
    return sq;
  }

  Pipeline parse_poi_pipeline() {
    Pipeline p;
    expect_kw("match");
    p.anchor = parse_poi_match();
    parse_stages(p.stages);
    return p;
  }

  Pipeline parse_with_pipeline() {
    Pipeline p;
    expect_kw("with");
    EntryBinding binding;
    binding.name = expect_ident("entry name");
    if (peek().kind == TokKind::Eq) {
      advance();
      expect(TokKind::LParen, "(");
      expect_kw("match");
      binding.match = parse_entry_match();
      expect(TokKind::RParen, ")");
      p.anchor = std::move(binding);
      parse_stages(p.stages);
      return p;
    }
    fail("unexpected token", {"'='"});
  }

  PoiMatch parse_poi_match() {
    PoiMatch m;
    m.src = parse_node_pattern();
    expect(TokKind::Minus, "-");
    m.edge = parse_edge_pattern();
    expect(TokKind::Arrow, "->");
    m.dst = parse_node_pattern();
    if (at_kw("where")) {
      advance();
      m.where = parse_expr();
    }
    return m;
  }

  NodePattern parse_node_pattern() {
    NodePattern n;
    expect(TokKind::LParen, "(");
    n.var = expect_ident("node variable");
    expect(TokKind::Colon, ":");
    n.label = expect_ident("node label");
    if (peek().kind == TokKind::LBrace) n.props = parse_props();
    expect(TokKind::RParen, ")");
    return n;
  }

  EdgePattern parse_edge_pattern() {
    EdgePattern e;
    expect(TokKind::LBracket, "[");
    e.var = expect_ident("edge variable");
    expect(TokKind::Colon, ":");
    e.label = expect_ident("edge label");
    if (peek().kind == TokKind::LBrace) e.props = parse_props();
    expect(TokKind::RBracket, "]");
    return e;
  }

  std::vector<PropConstraint> parse_props() {
    std::vector<PropConstraint> props;
    expect(TokKind::LBrace, "{");
    while (true) {
      PropConstraint c;
      c.key = expect_ident("property name");
      expect(TokKind::Colon, ":");
      const Token& v = peek();
      if (v.kind == TokKind::String) {
        c.value = v.text;
        advance();
      } else if (v.kind == TokKind::Int) {
        c.value = v.int_value;
        advance();
      } else {
        fail("unexpected token", {"string literal", "integer literal"});
      }
      props.push_back(std::move(c));
      if (peek().kind == TokKind::Comma) {
        advance();
        continue;
      }
      break;
    }
    expect(TokKind::RBrace, "}");
    return props;
  }

  EntryMatch parse_entry_match() {
    // n in nodes(r) WHERE <expr> [ORDER BY <key> [ASC|DESC]] [LIMIT k]
    EntryMatch m;
    m.node_var = expect_ident("node variable");
    expect_kw("in");
    expect_kw("nodes");
    expect(TokKind::LParen, "(");
    m.graph_arg = expect_ident("graph variable");
    expect(TokKind::RParen, ")");
    expect_kw("where");
    m.filter = parse_expr();
    if (at_kw("order")) {
      advance();
      expect_kw("by");
      m.order_key = parse_expr();
      if (at_kw("desc")) {
        advance();
        m.descending = true;
      } else if (at_kw("asc")) {
        advance();
        m.descending = false;
      }
      if (peek().kind == TokKind::Comma) fail("multiple sort keys are not supported", {});
    }
    if (at_kw("limit")) {
      advance();
      const Token& t = expect(TokKind::Int, "integer literal");
      m.limit = t.int_value;
    }
    return m;
  }

  void parse_stages(std::vector<Stage>& stages) {
    // Pending MATCH u=src(e) binding, consumed by the next SET...reduce.
    std::optional<std::tuple<std::string, FuncKind, std::string>> pending_bind;
    while (true) {
      if (at_kw("bfs") || at_kw("dfs")) {
        stages.push_back(parse_traverse());
        continue;
      }
      if (at_kw("unwind") || at_kw("uwind")) {  // the shorter spelling also appears
        advance();
        UnwindStage u;
        u.graph = expect_ident("graph name");
        expect_kw("as");
        u.edge_var = expect_ident("edge variable");
        stages.push_back(std::move(u));
        continue;
      }
      if (at_kw("match")) {
        advance();
        // Stage-level match: var = src(e) / dst(e), binding for a SET.
        std::string var = expect_ident("variable");
        expect(TokKind::Eq, "=");
        std::string fn = expect_ident("src or dst");
        FuncKind k;
        if (fn == "src")
          k = FuncKind::Src;
        else if (fn == "dst")
          k = FuncKind::Dst;
        else
          fail("unsupported construct in stage MATCH", {"src", "dst"});
        expect(TokKind::LParen, "(");
        std::string arg = expect_ident("variable");
        expect(TokKind::RParen, ")");
        pending_bind = {var, k, arg};
        continue;
      }
      if (at_kw("set")) {
        advance();
        parse_set(stages, pending_bind);
        pending_bind.reset();
        continue;
      }
      if (at_kw("with")) {
        // WITH e WHERE expr -> weight filter. The entry-binding form has
        // '=' after the name and only follows a union/intersect.
        if (peek(1).kind == TokKind::Ident && is_kw(peek(2), "where")) {
          advance();
          WeightFilterStage f;
          f.var = expect_ident("variable");
          expect_kw("where");
          f.predicate = parse_expr();
          stages.push_back(std::move(f));
          continue;
        }
        fail("unexpected WITH in pipeline", {"WITH <var> WHERE", "union/intersect WITH"});
      }
      if (at_kw("yield")) {
        // A stray YIELD outside BFS/DFS (the grammar allows a trailing
        // one); accept and ignore the name when it matches the last yield.
        fail("unexpected token", {"BFS", "DFS", "UNWIND", "SET", "MATCH", "RETURN"});
      }
      if (at_kw("return")) {
        ReturnStage r;
        r.pos = peek().pos;
        advance();
        r.graph = expect_ident("graph name");
        stages.push_back(std::move(r));
        return;
      }
      fail("unexpected token", {"BFS", "DFS", "UNWIND", "SET", "MATCH", "WITH", "RETURN"});
    }
  }

  TraverseStage parse_traverse() {
    TraverseStage t;
    t.spec.dfs = at_kw("dfs");
    advance();
    expect(TokKind::LParen, "(");
    t.spec.edge_var = expect_ident("edge variable");
    expect_kw("in");
    if (at_kw("backward")) {
      advance();
      t.spec.backward = true;
    } else if (at_kw("forward")) {
      advance();
      t.spec.backward = false;
    } else {
      fail("unexpected token", {"backward", "forward"});
    }
    expect(TokKind::LParen, "(");
    t.spec.start_var = expect_ident("start variable");
    expect(TokKind::RParen, ")");
    expect(TokKind::Pipe, "|");
    expect_kw("match");
    t.spec.step.node_var = expect_ident("node variable");
    expect(TokKind::Eq, "=");
    std::string fn = expect_ident("src or dst");
    if (fn == "src")
      t.spec.step.bind_fn = FuncKind::Src;
    else if (fn == "dst")
      t.spec.step.bind_fn = FuncKind::Dst;
    else
      fail("unsupported construct in traversal MATCH", {"src", "dst"});
    expect(TokKind::LParen, "(");
    t.spec.step.edge_arg = expect_ident("edge variable");
    expect(TokKind::RParen, ")");
    expect_kw("where");
    t.spec.step.where = parse_expr();
    expect(TokKind::RParen, ")");
    expect_kw("yield");
    t.yield_name = expect_ident("graph name");
    return t;
  }

  void parse_set(std::vector<Stage>& stages,
                 const std::optional<std::tuple<std::string, FuncKind, std::string>>& bind) {
    std::size_t set_pos = peek().pos;
    std::string target_var = expect_ident("variable");
    expect(TokKind::Dot, ".");
    std::string prop = expect_ident("property name");
    expect(TokKind::Eq, "=");
    if (at_kw("projection") && peek(1).kind == TokKind::LParen) {
      advance();
      SetWeightStage w;
      w.pos = set_pos;
      w.target_var = target_var;
      w.prop = prop;
      advance();  // (
      if (peek().kind != TokKind::RParen) {
        while (true) {
          w.features.push_back(parse_expr());
          if (peek().kind == TokKind::Comma) {
            advance();
            if (peek().kind == TokKind::RParen) break;  // trailing comma
            continue;
          }
          break;
        }
      }
      expect(TokKind::RParen, ")");
      stages.push_back(std::move(w));
      if (peek().kind == TokKind::Comma) fail("multiple SET items are not supported", {});
      return;
    }
    if (at_kw("reduce") && peek(1).kind == TokKind::LParen) {
      advance();
      advance();  // (
      SetRelStage s;
      if (bind) {
        s.bind_var = std::get<0>(*bind);
        s.bind_fn = std::get<1>(*bind);
        s.bind_arg = std::get<2>(*bind);
      } else {
        fail("SET ... reduce(...) requires a preceding MATCH var=src(...) binding", {});
      }
      s.target_var = target_var;
      s.prop = prop;
      s.acc_name = expect_ident("accumulator name");
      expect(TokKind::Eq, "=");
      const Token& init = peek();
      if (init.kind == TokKind::Int) {
        s.init = static_cast<double>(init.int_value);
        advance();
      } else if (init.kind == TokKind::Float) {
        s.init = init.float_value;
        advance();
      } else {
        fail("unexpected token", {"number literal"});
      }
      expect(TokKind::Comma, ",");
      s.iter_var = expect_ident("iteration variable");
      expect_kw("in");
      s.coll = parse_expr_primary_call();
      expect(TokKind::Pipe, "|");
      s.body = parse_expr();
      expect(TokKind::RParen, ")");
      stages.push_back(std::move(s));
      if (peek().kind == TokKind::Comma) fail("multiple SET items are not supported", {});
      return;
    }
    GenericSetStage g;
    g.pos = set_pos;
    auto base = make_expr(Expr::Var{target_var}, set_pos);
    g.target = make_expr(Expr::Prop{base, prop}, set_pos);
    g.value = parse_expr();
    stages.push_back(std::move(g));
    if (peek().kind == TokKind::Comma) fail("multiple SET items are not supported", {});
  }

  // --- expressions -----------------------------------------------------------

  ExprPtr parse_expr() { return parse_or(); }

  ExprPtr parse_or() {
    auto lhs = parse_and();
    while (at_kw("or")) {
      std::size_t p = peek().pos;
      advance();
      auto rhs = parse_and();
      lhs = make_expr(Expr::Binary{BinOp::Or, lhs, rhs}, p);
    }
    return lhs;
  }

  ExprPtr parse_and() {
    auto lhs = parse_not();
    while (at_kw("and")) {
      std::size_t p = peek().pos;
      advance();
      auto rhs = parse_not();
      lhs = make_expr(Expr::Binary{BinOp::And, lhs, rhs}, p);
    }
    return lhs;
  }

  ExprPtr parse_not() {
    if (at_kw("not")) {
      std::size_t p = peek().pos;
      advance();
      auto inner = parse_not();
      return make_expr(Expr::Not{inner}, p);
    }
    return parse_comparison();
  }

  ExprPtr parse_comparison() {
    auto lhs = parse_additive();
    BinOp op;
    switch (peek().kind) {
      case TokKind::Eq: op = BinOp::Eq; break;
      case TokKind::Ne: op = BinOp::Ne; break;
      case TokKind::Lt: op = BinOp::Lt; break;
      case TokKind::Gt: op = BinOp::Gt; break;
      case TokKind::Le: op = BinOp::Le; break;
      case TokKind::Ge: op = BinOp::Ge; break;
      default: return lhs;
    }
    std::size_t p = peek().pos;
    advance();
    auto rhs = parse_additive();
    return make_expr(Expr::Binary{op, lhs, rhs}, p);
  }

  ExprPtr parse_additive() {
    auto lhs = parse_multiplicative();
    while (peek().kind == TokKind::Plus || peek().kind == TokKind::Minus) {
      BinOp op = peek().kind == TokKind::Plus ? BinOp::Add : BinOp::Sub;
      std::size_t p = peek().pos;
      advance();
      auto rhs = parse_multiplicative();
      lhs = make_expr(Expr::Binary{op, lhs, rhs}, p);
    }
    return lhs;
  }

  ExprPtr parse_multiplicative() {
    auto lhs = parse_postfix();
    while (peek().kind == TokKind::Star || peek().kind == TokKind::Slash) {
      BinOp op = peek().kind == TokKind::Star ? BinOp::Mul : BinOp::Div;
      std::size_t p = peek().pos;
      advance();
      auto rhs = parse_postfix();
      lhs = make_expr(Expr::Binary{op, lhs, rhs}, p);
    }
    return lhs;
  }

  ExprPtr parse_postfix() {
    auto e = parse_atom();
    while (peek().kind == TokKind::Dot) {
      std::size_t p = peek().pos;
      advance();
      std::string prop = expect_ident("property name");
      e = make_expr(Expr::Prop{e, prop}, p);
    }
    return e;
  }

  static std::optional<FuncKind> func_kind(const Token& t) {
    if (is_kw(t, "count")) return FuncKind::Count;
    if (is_kw(t, "src")) return FuncKind::Src;
    if (is_kw(t, "dst")) return FuncKind::Dst;
    if (is_kw(t, "out")) return FuncKind::Out;
    if (is_kw(t, "in")) return FuncKind::In;
    if (is_kw(t, "abs")) return FuncKind::Abs;
    if (is_kw(t, "ln")) return FuncKind::Ln;
    if (is_kw(t, "nodes")) return FuncKind::Nodes;
    return std::nullopt;
  }

  // Parses exactly a function invocation like out(u); used where the
  // grammar requires a collection.
  ExprPtr parse_expr_primary_call() {
    const Token& t = peek();
    auto fk = func_kind(t);
    if (!fk || peek(1).kind != TokKind::LParen) fail("unexpected token", {"out(...)", "in(...)"});
    std::size_t p = t.pos;
    advance();
    advance();
    auto arg = parse_expr();
    expect(TokKind::RParen, ")");
    return make_expr(Expr::Call{*fk, arg}, p);
  }

  ExprPtr parse_atom() {
    const Token& t = peek();
    std::size_t p = t.pos;
    switch (t.kind) {
      case TokKind::Int: {
        advance();
        return make_expr(Expr::IntLit{t.int_value}, p);
      }
      case TokKind::Float: {
        advance();
        return make_expr(Expr::FloatLit{t.float_value}, p);
      }
      case TokKind::String: {
        advance();
        return make_expr(Expr::StrLit{t.text}, p);
      }
      case TokKind::LParen: {
        advance();
        auto inner = parse_expr();
        expect(TokKind::RParen, ")");
        return inner;
      }
      case TokKind::Ident: {
        if ((is_kw(t, "max") || is_kw(t, "min")) && peek(1).kind == TokKind::LParen &&
            is_kw(peek(2), "collect")) {
          return parse_aggregate();
        }
        if (auto fk = func_kind(t); fk && peek(1).kind == TokKind::LParen) {
          advance();
          advance();
          auto arg = parse_expr();
          expect(TokKind::RParen, ")");
          return make_expr(Expr::Call{*fk, arg}, p);
        }
        advance();
        return make_expr(Expr::Var{t.text}, p);
      }
      default:
        fail("unexpected token in expression",
             {"literal", "variable", "function call", "'('"});
    }
  }

  ExprPtr parse_aggregate() {
    const Token& t = peek();
    AggOp op = is_kw(t, "max") ? AggOp::Max : AggOp::Min;
    std::size_t p = t.pos;
    advance();
    expect(TokKind::LParen, "(");
    expect_kw("collect");
    expect(TokKind::LParen, "(");
    std::string var = expect_ident("collection variable");
    expect_kw("in");
    auto coll = parse_expr_primary_call();
    expect(TokKind::Pipe, "|");
    auto body = parse_expr();
    expect(TokKind::RParen, ")");
    expect(TokKind::RParen, ")");
    return make_expr(Expr::Aggregate{op, std::move(var), coll, body}, p);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

std::variant<ast::QueryAst, ParseError> parse_query(const std::string& text) {
  auto lexed = tokenize(text);
  if (auto* err = std::get_if<LexError>(&lexed)) {
    ParseError pe;
    pe.pos = err->pos;
    std::tie(pe.line, pe.col) = line_col(text, err->pos);
    pe.message = err->message;
    return pe;
  }
  try {
    Parser parser(std::move(std::get<std::vector<Token>>(lexed)));
    return parser.parse_program();
  } catch (const ParseFail& f) {
    ParseError pe;
    pe.pos = f.pos;
    std::tie(pe.line, pe.col) = line_col(text, f.pos);
    pe.message = f.message;
    pe.expected = f.expected;
    return pe;
  } catch (const std::exception& ex) {
    ParseError pe;
    pe.message = ex.what();
    return pe;
  }
}

}  // namespace provql
