#pragma once

// Expression evaluation against a binding environment: the current edge,
// current node, POI event and the graph under construction. out(v)/in(v)
// resolve against an AdjacencyView, which is how traversal constraints see
// the discovered graph rather than the whole store.

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "provql/ast.hpp"
#include "provql/model.hpp"
#include "provql/store.hpp"

namespace provql {

struct EntityRef {
  EntityId id = 0;
  bool operator==(const EntityRef&) const = default;
};
struct EdgeRef {
  const GraphEdge* edge = nullptr;
  bool operator==(const EdgeRef&) const = default;
};
struct GraphRef {
  const ProvGraph* graph = nullptr;
  bool operator==(const GraphRef&) const = default;
};
using EdgeList = std::vector<const GraphEdge*>;
using NodeList = std::vector<EntityId>;

using Value = std::variant<std::int64_t, double, bool, std::string, EntityRef, EdgeRef, GraphRef,
                           EdgeList, NodeList>;

// Adjacency resolution for out(v)/in(v). The engine's traversal state and
// graph snapshots both implement this, which is how traversal constraints
// see the discovered graph as it grows.
class AdjacencyView {
 public:
  virtual ~AdjacencyView() = default;
  virtual EdgeList out(EntityId u) const = 0;
  virtual EdgeList in(EntityId v) const = 0;
};

// Snapshot view over a finished graph, plus optional anchor seeds: the POI
// edge is listed among the anchor node's out-edges (it carries the
// traversal's initial time bound), and forward-entry nodes get a virtual
// in-edge whose starttime is the minimum representable time, so
// min-aggregates keep admitting their out-edges after real in-edges appear.
class GraphView final : public AdjacencyView {
 public:
  GraphView() = default;
  GraphView(const ProvGraph& g, const GraphAdjacency& adj) : graph_(&g), adj_(&adj) {}

  void seed_out(EntityId node, const GraphEdge* edge) { extra_out_[node].push_back(edge); }
  void seed_in(EntityId node, const GraphEdge* edge) { extra_in_[node].push_back(edge); }

  EdgeList out(EntityId u) const override;
  EdgeList in(EntityId v) const override;

 private:
  const ProvGraph* graph_ = nullptr;
  const GraphAdjacency* adj_ = nullptr;
  std::unordered_map<EntityId, std::vector<const GraphEdge*>> extra_out_;
  std::unordered_map<EntityId, std::vector<const GraphEdge*>> extra_in_;
};

struct EvalError {
  std::size_t pos = 0;
  std::string message;
};

struct Binding {
  std::unordered_map<std::string, Value> slots;
  const AdjacencyView* adjacency = nullptr;
  const std::unordered_map<EntityId, double>* scores = nullptr;  // node .rel lookups
  const EventStore* store = nullptr;                             // entity attribute lookups

  Binding& set(const std::string& name, Value v) {
    slots[name] = std::move(v);
    return *this;
  }
};

// Evaluates `expr` under `binding`. Unbound names, type mismatches and
// non-finite results are EvalErrors, never defaults. Guards:
//  - division always evaluates in double; a zero denominator is treated as
//    1 when the denominator expression is a count(...) call (degree
//    ratios), otherwise denominators with magnitude below 1e-4 clamp to
//    1e-4 (the epsilon the query formulas themselves use);
//  - ln clamps its argument to 1 when the formula yields <= 0;
//  - max/min over an empty collection return -infinity (see engine for how
//    anchors override this at the POI and entry nodes).
std::variant<Value, EvalError> eval(const ast::Expr& expr, const Binding& binding);

// Direct aggregate evaluation (max/min over collect(var IN coll | body)).
std::variant<Value, EvalError> eval_aggregate(ast::AggOp op, const std::string& var,
                                              const ast::Expr& coll, const ast::Expr& body,
                                              const Binding& binding);

// Helpers shared with the engine/analytics.
bool value_truthy(const Value& v);                  // bool or error by convention
double value_as_double(const Value& v);             // numeric widening; throws otherwise
bool value_is_numeric(const Value& v);

}  // namespace provql
