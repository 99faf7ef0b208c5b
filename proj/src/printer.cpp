#include <sstream>

#include "provql/parser.hpp"

namespace provql {

using namespace ast;

const char* ast::to_string(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Eq: return "=";
    case BinOp::Ne: return "<>";
    case BinOp::Lt: return "<";
    case BinOp::Gt: return ">";
    case BinOp::Le: return "<=";
    case BinOp::Ge: return ">=";
    case BinOp::And: return "AND";
    case BinOp::Or: return "OR";
  }
  return "?";
}

const char* ast::to_string(AggOp op) { return op == AggOp::Max ? "max" : "min"; }

const char* ast::to_string(FuncKind f) {
  switch (f) {
    case FuncKind::Count: return "count";
    case FuncKind::Src: return "src";
    case FuncKind::Dst: return "dst";
    case FuncKind::Out: return "out";
    case FuncKind::In: return "in";
    case FuncKind::Abs: return "abs";
    case FuncKind::Ln: return "ln";
    case FuncKind::Nodes: return "nodes";
  }
  return "?";
}

namespace {

// Fully parenthesized canonical form, so reparsing is unambiguous.
void print_expr(std::ostream& os, const Expr& e) {
  if (auto* i = e.as<Expr::IntLit>()) {
    os << i->value;
  } else if (auto* f = e.as<Expr::FloatLit>()) {
    std::ostringstream tmp;
    tmp.precision(17);
    tmp << f->value;
    auto s = tmp.str();
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
      s += ".0";
    os << s;
  } else if (auto* s = e.as<Expr::StrLit>()) {
    os << '"';
    for (char c : s->value) {
      if (c == '"' || c == '\\') os << '\\';
      os << c;
    }
    os << '"';
  } else if (auto* v = e.as<Expr::Var>()) {
    os << v->name;
  } else if (auto* p = e.as<Expr::Prop>()) {
    print_expr(os, *p->base);
    os << '.' << p->name;
  } else if (auto* n = e.as<Expr::Not>()) {
    os << "NOT (";
    print_expr(os, *n->operand);
    os << ')';
  } else if (auto* b = e.as<Expr::Binary>()) {
    os << '(';
    print_expr(os, *b->lhs);
    os << ' ' << ast::to_string(b->op) << ' ';
    print_expr(os, *b->rhs);
    os << ')';
  } else if (auto* c = e.as<Expr::Call>()) {
    os << ast::to_string(c->fn) << '(';
    print_expr(os, *c->arg);
    os << ')';
  } else if (auto* a = e.as<Expr::Aggregate>()) {
    os << ast::to_string(a->op) << "(collect(" << a->var << " IN ";
    print_expr(os, *a->coll);
    os << " | ";
    print_expr(os, *a->body);
    os << "))";
  }
}

void print_props(std::ostream& os, const std::vector<PropConstraint>& props) {
  if (props.empty()) return;
  os << '{';
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (i) os << ", ";
    os << props[i].key << ':';
    if (auto* s = std::get_if<std::string>(&props[i].value)) {
      os << '"';
      for (char c : *s) {
        if (c == '"' || c == '\\') os << '\\';
        os << c;
      }
      os << '"';
    } else {
      os << std::get<std::int64_t>(props[i].value);
    }
  }
  os << '}';
}

void print_poi(std::ostream& os, const PoiMatch& m) {
  os << "MATCH (" << m.src.var << ':' << m.src.label;
  print_props(os, m.src.props);
  os << ")-[" << m.edge.var << ':' << m.edge.label;
  print_props(os, m.edge.props);
  os << "]->(" << m.dst.var << ':' << m.dst.label;
  print_props(os, m.dst.props);
  os << ")";
  if (m.where) {
    os << " WHERE ";
    print_expr(os, *m.where);
  }
}

void print_entry(std::ostream& os, const EntryBinding& b) {
  os << "WITH " << b.name << " = (MATCH " << b.match.node_var << " IN nodes("
     << b.match.graph_arg << ") WHERE ";
  print_expr(os, *b.match.filter);
  if (b.match.order_key) {
    os << " ORDER BY ";
    print_expr(os, *b.match.order_key);
    os << (b.match.descending ? " DESC" : " ASC");
  }
  if (b.match.limit) os << " LIMIT " << *b.match.limit;
  os << ")";
}

void print_stage(std::ostream& os, const Stage& stage) {
  if (auto* t = std::get_if<TraverseStage>(&stage)) {
    os << (t->spec.dfs ? "DFS" : "BFS") << " (" << t->spec.edge_var << " IN "
       << (t->spec.backward ? "backward" : "forward") << '(' << t->spec.start_var << ") | MATCH "
       << t->spec.step.node_var << '=' << ast::to_string(t->spec.step.bind_fn) << '('
       << t->spec.step.edge_arg << ") WHERE ";
    print_expr(os, *t->spec.step.where);
    os << ") YIELD " << t->yield_name;
  } else if (auto* u = std::get_if<UnwindStage>(&stage)) {
    os << "UNWIND " << u->graph << " AS " << u->edge_var;
  } else if (auto* w = std::get_if<SetWeightStage>(&stage)) {
    os << "SET " << w->target_var << '.' << w->prop << " = projection(";
    for (std::size_t i = 0; i < w->features.size(); ++i) {
      if (i) os << ", ";
      print_expr(os, *w->features[i]);
    }
    os << ')';
  } else if (auto* r = std::get_if<SetRelStage>(&stage)) {
    os << "MATCH " << r->bind_var << '=' << ast::to_string(r->bind_fn) << '(' << r->bind_arg
       << ") SET " << r->target_var << '.' << r->prop << " = reduce(" << r->acc_name << " = ";
    if (r->init == static_cast<std::int64_t>(r->init))
      os << static_cast<std::int64_t>(r->init);
    else
      os << r->init;
    os << ", " << r->iter_var << " IN ";
    print_expr(os, *r->coll);
    os << " | ";
    print_expr(os, *r->body);
    os << ')';
  } else if (auto* g = std::get_if<GenericSetStage>(&stage)) {
    os << "SET ";
    print_expr(os, *g->target);
    os << " = ";
    print_expr(os, *g->value);
  } else if (auto* f = std::get_if<WeightFilterStage>(&stage)) {
    os << "WITH " << f->var << " WHERE ";
    print_expr(os, *f->predicate);
  } else if (auto* ret = std::get_if<ReturnStage>(&stage)) {
    os << "RETURN " << ret->graph;
  }
}

void print_pipeline(std::ostream& os, const Pipeline& p, const char* indent) {
  if (auto* poi = std::get_if<PoiMatch>(&p.anchor)) {
    os << indent;
    print_poi(os, *poi);
    os << '\n';
  } else {
    os << indent;
    print_entry(os, std::get<EntryBinding>(p.anchor));
    os << '\n';
  }
  for (const auto& s : p.stages) {
    os << indent << "    ";
    print_stage(os, s);
    os << '\n';
  }
}

void print_sub_query(std::ostream& os, const SubQuery& sq, const char* indent) {
  for (std::size_t i = 0; i < sq.pipelines.size(); ++i) {
    if (i) os << indent << (sq.inner_merges[i - 1] == MergeOp::Union ? "UNION" : "INTERSECT")
              << '\n';
    print_pipeline(os, sq.pipelines[i], indent);
  }
}

}  // namespace

std::string pretty_print(const ast::QueryAst& q) {
  std::ostringstream os;
  for (std::size_t i = 0; i < q.sub_queries.size(); ++i) {
    if (i == 0) {
      print_sub_query(os, q.sub_queries[i], "");
    } else {
      os << (q.merges[i - 1] == MergeOp::Union ? "UNION" : "INTERSECT") << "\n(\n";
      print_sub_query(os, q.sub_queries[i], "");
      os << ")\n";
    }
  }
  return os.str();
}

std::string pretty_print(const ast::Expr& expr) {
  std::ostringstream os;
  print_expr(os, expr);
  return os.str();
}

}  // namespace provql
