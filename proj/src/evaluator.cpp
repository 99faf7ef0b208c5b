#include "provql/evaluator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace provql {

using namespace ast;

EdgeList GraphView::out(EntityId u) const {
  EdgeList r;
  if (adj_ && graph_)
    for (std::size_t i : adj_->out(u)) r.push_back(&graph_->edges[i]);
  if (auto it = extra_out_.find(u); it != extra_out_.end())
    r.insert(r.end(), it->second.begin(), it->second.end());
  return r;
}

EdgeList GraphView::in(EntityId v) const {
  EdgeList r;
  if (adj_ && graph_)
    for (std::size_t i : adj_->in(v)) r.push_back(&graph_->edges[i]);
  if (auto it = extra_in_.find(v); it != extra_in_.end())
    r.insert(r.end(), it->second.begin(), it->second.end());
  return r;
}

namespace {

struct EvalException {
  std::size_t pos;
  std::string message;
};

[[noreturn]] void bail(std::size_t pos, std::string msg) {
  throw EvalException{pos, std::move(msg)};
}

bool is_int(const Value& v) { return std::holds_alternative<std::int64_t>(v); }
bool is_double(const Value& v) { return std::holds_alternative<double>(v); }

double to_double(const Value& v, std::size_t pos) {
  if (is_int(v)) return static_cast<double>(std::get<std::int64_t>(v));
  if (is_double(v)) return std::get<double>(v);
  bail(pos, "expected a numeric value");
}

void check_not_nan(double d, std::size_t pos) {
  if (std::isnan(d)) bail(pos, "non-finite result");
}

// Denominator guard; `is_count` marks a syntactic count(...) denominator,
// whose zero means "no in-edges" and degrades the ratio to the numerator.
double guard_denominator(double d, bool is_count, std::size_t pos) {
  check_not_nan(d, pos);
  if (is_count && d == 0.0) return 1.0;
  if (std::fabs(d) < 1e-4) return d < 0 ? -1e-4 : 1e-4;
  return d;
}

class Evaluator {
 public:
  explicit Evaluator(const Binding& b) : b_(b) {}

  Value eval(const Expr& e) {
    if (auto* i = e.as<Expr::IntLit>()) return Value{i->value};
    if (auto* f = e.as<Expr::FloatLit>()) return Value{f->value};
    if (auto* s = e.as<Expr::StrLit>()) return Value{s->value};
    if (auto* v = e.as<Expr::Var>()) {
      auto it = b_.slots.find(v->name);
      if (it == b_.slots.end()) bail(e.pos, "unbound name: " + v->name);
      return it->second;
    }
    if (auto* p = e.as<Expr::Prop>()) return eval_prop(*p, e.pos);
    if (auto* n = e.as<Expr::Not>()) {
      Value v = eval(*n->operand);
      if (auto* bv = std::get_if<bool>(&v)) return Value{!*bv};
      bail(e.pos, "NOT expects a boolean");
    }
    if (auto* bin = e.as<Expr::Binary>()) return eval_binary(*bin, e.pos);
    if (auto* c = e.as<Expr::Call>()) return eval_call(*c, e.pos);
    if (auto* a = e.as<Expr::Aggregate>()) return eval_agg(*a, e.pos);
    bail(e.pos, "unhandled expression");
  }

 private:
  Value eval_agg(const Expr::Aggregate& a, std::size_t pos) {
    Value collv = eval(*a.coll);
    auto* list = std::get_if<EdgeList>(&collv);
    if (!list) bail(pos, "collect expects an edge collection");
    // Empty collections yield the -infinity sentinel for both max and min:
    // a backward bound of -inf stops expansion, a forward bound of -inf
    // admits everything.
    if (list->empty()) return Value{-std::numeric_limits<double>::infinity()};
    bool have = false;
    Value best;
    Binding inner = b_;
    for (const GraphEdge* edge : *list) {
      inner.set(a.var, EdgeRef{edge});
      Evaluator ev(inner);
      Value cur = ev.eval(*a.body);
      if (!is_int(cur) && !is_double(cur)) bail(pos, "aggregate body must be numeric");
      if (!have) {
        best = cur;
        have = true;
        continue;
      }
      double c = to_double(cur, pos), b = to_double(best, pos);
      bool better = a.op == AggOp::Max ? c > b : c < b;
      if (better) best = cur;
    }
    return best;
  }

  Value eval_prop(const Expr::Prop& p, std::size_t pos) {
    Value base = eval(*p.base);
    if (auto* er = std::get_if<EdgeRef>(&base)) {
      const GraphEdge* g = er->edge;
      if (!g) bail(pos, "null edge reference");
      const std::string& n = p.name;
      if (n == "starttime") return Value{g->starttime};
      if (n == "endtime") return Value{g->endtime};
      if (n == "amount") return Value{static_cast<std::int64_t>(g->amount)};
      if (n == "optype") return Value{std::string(to_string(g->optype))};
      if (n == "raw_count") return Value{static_cast<std::int64_t>(g->raw_count)};
      if (n == "id")
        return Value{static_cast<std::int64_t>(g->raw_ids.empty() ? 0 : g->raw_ids.front())};
      if (n == "weight") {
        if (!g->weight) bail(pos, "edge weight is not set");
        return Value{*g->weight};
      }
      bail(pos, "unknown edge property: " + n);
    }
    if (auto* nr = std::get_if<EntityRef>(&base)) {
      const std::string& n = p.name;
      if (n == "rel") {
        if (!b_.scores) bail(pos, "no scores in scope for .rel");
        auto it = b_.scores->find(nr->id);
        if (it == b_.scores->end()) bail(pos, "rel not computed for node");
        return Value{it->second};
      }
      if (n == "id") return Value{static_cast<std::int64_t>(nr->id)};
      if (!b_.store) bail(pos, "no store in scope for entity attributes");
      auto ent = b_.store->entity_by_id(nr->id);
      if (!ent) bail(pos, "unknown entity");
      auto attrs = pattern_attrs(*ent);
      auto it = attrs.find(n == "name" && ent->key.kind == EntityKind::File ? "path" : n);
      if (it == attrs.end()) bail(pos, "unknown entity property: " + n);
      if (n == "pid" || n == "srcport" || n == "dstport")
        return Value{static_cast<std::int64_t>(std::stoll(it->second))};
      return Value{it->second};
    }
    bail(pos, "property lookup on a non-reference value");
  }

  Value eval_binary(const Expr::Binary& b, std::size_t pos) {
    if (b.op == BinOp::And || b.op == BinOp::Or) {
      Value l = eval(*b.lhs);
      auto* lb = std::get_if<bool>(&l);
      if (!lb) bail(pos, "logical operand must be boolean");
      if (b.op == BinOp::And && !*lb) return Value{false};
      if (b.op == BinOp::Or && *lb) return Value{true};
      Value r = eval(*b.rhs);
      auto* rb = std::get_if<bool>(&r);
      if (!rb) bail(pos, "logical operand must be boolean");
      return Value{*rb};
    }

    Value l = eval(*b.lhs);
    Value r = eval(*b.rhs);

    switch (b.op) {
      case BinOp::Eq:
      case BinOp::Ne: {
        bool eq;
        if ((is_int(l) || is_double(l)) && (is_int(r) || is_double(r))) {
          eq = is_int(l) && is_int(r) ? std::get<std::int64_t>(l) == std::get<std::int64_t>(r)
                                      : to_double(l, pos) == to_double(r, pos);
        } else if (std::holds_alternative<std::string>(l) &&
                   std::holds_alternative<std::string>(r)) {
          eq = std::get<std::string>(l) == std::get<std::string>(r);
        } else if (std::holds_alternative<bool>(l) && std::holds_alternative<bool>(r)) {
          eq = std::get<bool>(l) == std::get<bool>(r);
        } else if (std::holds_alternative<EntityRef>(l) && std::holds_alternative<EntityRef>(r)) {
          eq = std::get<EntityRef>(l) == std::get<EntityRef>(r);
        } else {
          bail(pos, "type mismatch in comparison");
        }
        return Value{b.op == BinOp::Eq ? eq : !eq};
      }
      case BinOp::Lt:
      case BinOp::Gt:
      case BinOp::Le:
      case BinOp::Ge: {
        if (!(is_int(l) || is_double(l)) || !(is_int(r) || is_double(r)))
          bail(pos, "ordering comparison expects numeric operands");
        bool res;
        if (is_int(l) && is_int(r)) {
          auto a = std::get<std::int64_t>(l), c = std::get<std::int64_t>(r);
          res = b.op == BinOp::Lt   ? a < c
                : b.op == BinOp::Gt ? a > c
                : b.op == BinOp::Le ? a <= c
                                    : a >= c;
        } else {
          double a = to_double(l, pos), c = to_double(r, pos);
          res = b.op == BinOp::Lt   ? a < c
                : b.op == BinOp::Gt ? a > c
                : b.op == BinOp::Le ? a <= c
                                    : a >= c;
        }
        return Value{res};
      }
      case BinOp::Add:
      case BinOp::Sub:
      case BinOp::Mul: {
        if (!(is_int(l) || is_double(l)) || !(is_int(r) || is_double(r)))
          bail(pos, "arithmetic expects numeric operands");
        if (is_int(l) && is_int(r)) {
          std::int64_t a = std::get<std::int64_t>(l), c = std::get<std::int64_t>(r), out = 0;
          bool ovf = b.op == BinOp::Add   ? __builtin_add_overflow(a, c, &out)
                     : b.op == BinOp::Sub ? __builtin_sub_overflow(a, c, &out)
                                          : __builtin_mul_overflow(a, c, &out);
          if (ovf) bail(pos, "integer overflow");
          return Value{out};
        }
        double a = to_double(l, pos), c = to_double(r, pos);
        double out = b.op == BinOp::Add ? a + c : b.op == BinOp::Sub ? a - c : a * c;
        check_not_nan(out, pos);
        if (std::isinf(out)) bail(pos, "non-finite result");
        return Value{out};
      }
      case BinOp::Div: {
        // True division, always in double; integer division would silently
        // zero the reciprocal features.
        double a = to_double(l, pos);
        bool count_denom =
            b.rhs->as<Expr::Call>() && b.rhs->as<Expr::Call>()->fn == FuncKind::Count;
        double c = guard_denominator(to_double(r, pos), count_denom, pos);
        double out = a / c;
        check_not_nan(out, pos);
        if (std::isinf(out)) bail(pos, "non-finite result");
        return Value{out};
      }
      default: bail(pos, "unhandled operator");
    }
  }

  Value eval_call(const Expr::Call& c, std::size_t pos) {
    switch (c.fn) {
      case FuncKind::Abs: {
        Value v = eval(*c.arg);
        if (is_int(v)) {
          auto x = std::get<std::int64_t>(v);
          if (x == std::numeric_limits<std::int64_t>::min()) bail(pos, "integer overflow");
          return Value{x < 0 ? -x : x};
        }
        if (is_double(v)) return Value{std::fabs(std::get<double>(v))};
        bail(pos, "abs expects a numeric value");
      }
      case FuncKind::Ln: {
        double x = to_double(eval(*c.arg), pos);
        if (x <= 0.0) x = 1.0;  // domain guard: ln(<=0) evaluates as ln(1)
        double out = std::log(x);
        check_not_nan(out, pos);
        return Value{out};
      }
      case FuncKind::Src:
      case FuncKind::Dst: {
        Value v = eval(*c.arg);
        auto* er = std::get_if<EdgeRef>(&v);
        if (!er || !er->edge) bail(pos, "src/dst expects an edge");
        return Value{EntityRef{c.fn == FuncKind::Src ? er->edge->src : er->edge->dst}};
      }
      case FuncKind::Out:
      case FuncKind::In: {
        Value v = eval(*c.arg);
        auto* nr = std::get_if<EntityRef>(&v);
        if (!nr) bail(pos, "out/in expects a node");
        if (!b_.adjacency) bail(pos, "no adjacency view in scope");
        return Value{c.fn == FuncKind::Out ? b_.adjacency->out(nr->id) : b_.adjacency->in(nr->id)};
      }
      case FuncKind::Count: {
        Value v = eval(*c.arg);
        if (auto* el = std::get_if<EdgeList>(&v))
          return Value{static_cast<std::int64_t>(el->size())};
        if (auto* nl = std::get_if<NodeList>(&v))
          return Value{static_cast<std::int64_t>(nl->size())};
        bail(pos, "count expects a collection");
      }
      case FuncKind::Nodes: {
        Value v = eval(*c.arg);
        auto* gr = std::get_if<GraphRef>(&v);
        if (!gr || !gr->graph) bail(pos, "nodes expects a graph");
        NodeList ids(gr->graph->nodes.begin(), gr->graph->nodes.end());
        return Value{std::move(ids)};
      }
    }
    bail(pos, "unhandled function");
  }

  const Binding& b_;
};

}  // namespace

std::variant<Value, EvalError> eval(const Expr& expr, const Binding& binding) {
  try {
    Evaluator ev(binding);
    return ev.eval(expr);
  } catch (const EvalException& ex) {
    return EvalError{ex.pos, ex.message};
  } catch (const std::exception& ex) {
    return EvalError{expr.pos, ex.what()};
  }
}

std::variant<Value, EvalError> eval_aggregate(AggOp op, const std::string& var, const Expr& coll,
                                              const Expr& body, const Binding& binding) {
  // Wrap the borrowed children in non-owning pointers; the caller keeps
  // them alive for the duration of the call.
  auto coll_ptr = std::shared_ptr<const Expr>(&coll, [](const Expr*) {});
  auto body_ptr = std::shared_ptr<const Expr>(&body, [](const Expr*) {});
  Expr node;
  node.node = Expr::Aggregate{op, var, coll_ptr, body_ptr};
  return eval(node, binding);
}

bool value_truthy(const Value& v) {
  if (auto* b = std::get_if<bool>(&v)) return *b;
  return false;
}

double value_as_double(const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&v)) return *d;
  throw std::runtime_error("value is not numeric");
}

bool value_is_numeric(const Value& v) {
  return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v);
}

}  // namespace provql
