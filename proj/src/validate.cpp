#include <functional>
#include <set>

#include "provql/parser.hpp"

namespace provql {

using namespace ast;

namespace {

struct Checker {
  std::vector<SemanticError>& errors;

  void err(std::size_t pos, std::string msg) { errors.push_back({pos, std::move(msg)}); }

  // Walks an expression, checking that every variable is bound and that
  // aggregates appear only where allowed.
  void check_expr(const Expr& e, const std::set<std::string>& bound, bool aggregates_ok) {
    if (auto* v = e.as<Expr::Var>()) {
      if (!bound.count(v->name)) err(e.pos, "unbound variable: " + v->name);
      return;
    }
    if (auto* p = e.as<Expr::Prop>()) {
      check_expr(*p->base, bound, aggregates_ok);
      return;
    }
    if (auto* n = e.as<Expr::Not>()) {
      check_expr(*n->operand, bound, aggregates_ok);
      return;
    }
    if (auto* b = e.as<Expr::Binary>()) {
      check_expr(*b->lhs, bound, aggregates_ok);
      check_expr(*b->rhs, bound, aggregates_ok);
      return;
    }
    if (auto* c = e.as<Expr::Call>()) {
      check_expr(*c->arg, bound, aggregates_ok);
      return;
    }
    if (auto* a = e.as<Expr::Aggregate>()) {
      if (!aggregates_ok) {
        err(e.pos, "aggregate not allowed in this context");
        return;
      }
      check_expr(*a->coll, bound, false);
      auto inner = bound;
      inner.insert(a->var);
      check_expr(*a->body, inner, false);
      return;
    }
  }
};

}  // namespace

std::vector<SemanticError> validate_ast(const QueryAst& q) {
  std::vector<SemanticError> errors;
  Checker chk{errors};

  if (q.sub_queries.empty()) {
    chk.err(0, "query has no sub-queries");
    return errors;
  }
  if (q.merges.size() + 1 != q.sub_queries.size())
    chk.err(0, "merge operator count does not match sub-query count");

  for (const auto& sq : q.sub_queries) {
    if (sq.pipelines.empty()) {
      chk.err(0, "sub-query has no pipelines");
      continue;
    }
    if (sq.inner_merges.size() + 1 != sq.pipelines.size())
      chk.err(0, "pipeline merge count does not match pipeline count");

    // Names yielded by traversals in this sub-query, with their edge vars,
    // accumulate across pipelines (the entry WITH references an earlier
    // traversal's edge variable).
    std::set<std::string> yielded_graphs;
    std::set<std::string> traverse_edge_vars;

    for (const auto& pipe : sq.pipelines) {
      std::set<std::string> bound;  // variables visible in this pipeline
      bool is_poi = std::holds_alternative<PoiMatch>(pipe.anchor);
      std::string anchor_node;

      if (is_poi) {
        const auto& poi = std::get<PoiMatch>(pipe.anchor);
        bound.insert(poi.src.var);
        bound.insert(poi.edge.var);
        bound.insert(poi.dst.var);
        anchor_node = poi.dst.var;
        if (poi.where) chk.err(poi.where->pos, "unsupported construct: WHERE on the POI match");
      } else {
        const auto& eb = std::get<EntryBinding>(pipe.anchor);
        bound.insert(eb.name);
        anchor_node = eb.name;
        if (!traverse_edge_vars.count(eb.match.graph_arg))
          chk.err(0, "nodes(" + eb.match.graph_arg +
                         ") does not name an earlier traversal's edge variable");
        std::set<std::string> entry_scope = {eb.match.node_var};
        chk.check_expr(*eb.match.filter, entry_scope, true);
        if (eb.match.order_key) chk.check_expr(*eb.match.order_key, entry_scope, true);
        if (eb.match.limit && *eb.match.limit <= 0) chk.err(0, "LIMIT must be positive");
      }

      bool returned = false;
      for (const auto& stage : pipe.stages) {
        if (returned) chk.err(0, "stage after RETURN");
        if (auto* t = std::get_if<TraverseStage>(&stage)) {
          if (!bound.count(t->spec.start_var))
            chk.err(0, "traversal start variable is unbound: " + t->spec.start_var);
          if (t->spec.step.edge_arg != t->spec.edge_var)
            chk.err(0, "step binding must reference the traversal edge variable");
          auto scope = bound;
          scope.insert(t->spec.edge_var);
          scope.insert(t->spec.step.node_var);
          chk.check_expr(*t->spec.step.where, scope, true);
          bound.insert(t->spec.edge_var);
          bound.insert(t->spec.step.node_var);
          yielded_graphs.insert(t->yield_name);
          traverse_edge_vars.insert(t->spec.edge_var);
          bound.insert(t->yield_name);
        } else if (auto* u = std::get_if<UnwindStage>(&stage)) {
          if (!yielded_graphs.count(u->graph)) chk.err(0, "unbound graph: " + u->graph);
          bound.insert(u->edge_var);
        } else if (auto* w = std::get_if<SetWeightStage>(&stage)) {
          if (w->features.empty()) chk.err(w->pos, "projection requires at least one feature");
          if (!bound.count(w->target_var)) chk.err(w->pos, "unbound variable: " + w->target_var);
          if (w->prop != "weight")
            chk.err(w->pos, "unsupported construct: projection assigns only .weight");
          for (const auto& f : w->features) chk.check_expr(*f, bound, true);
        } else if (auto* r = std::get_if<SetRelStage>(&stage)) {
          if (!bound.count(r->bind_arg)) chk.err(0, "unbound variable: " + r->bind_arg);
          if (r->prop != "rel") chk.err(0, "unsupported construct: reduce assigns only .rel");
          if (r->target_var != r->bind_var)
            chk.err(0, "reduce target must be the variable bound by the preceding MATCH");
          auto scope = bound;
          scope.insert(r->bind_var);
          scope.insert(r->acc_name);
          scope.insert(r->iter_var);
          chk.check_expr(*r->coll, scope, false);
          chk.check_expr(*r->body, scope, true);
          bound.insert(r->bind_var);
        } else if (auto* g = std::get_if<GenericSetStage>(&stage)) {
          chk.err(g->pos, "unsupported construct: general SET expression");
        } else if (auto* f = std::get_if<WeightFilterStage>(&stage)) {
          if (!bound.count(f->var)) chk.err(0, "unbound variable: " + f->var);
          auto scope = bound;
          chk.check_expr(*f->predicate, scope, true);
        } else if (auto* ret = std::get_if<ReturnStage>(&stage)) {
          if (!yielded_graphs.count(ret->graph))
            chk.err(ret->pos, "unbound graph: " + ret->graph);
          returned = true;
        }
      }
      if (!returned) chk.err(0, "pipeline has no RETURN");

      // The forward traversal of an entry pipeline must start from the
      // entry binding.
      if (!is_poi) {
        bool ok = false;
        for (const auto& stage : pipe.stages)
          if (auto* t = std::get_if<TraverseStage>(&stage))
            if (t->spec.start_var == anchor_node && !t->spec.backward) ok = true;
        if (!ok) chk.err(0, "entry pipeline must traverse forward from its entry binding");
      }
    }
  }
  return errors;
}

}  // namespace provql
