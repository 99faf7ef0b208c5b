#pragma once

// Typed AST for the query language. Expression children are shared_ptr so
// query objects stay cheaply copyable; nodes are immutable after parsing.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace provql::ast {

enum class BinOp { Add, Sub, Mul, Div, Eq, Ne, Lt, Gt, Le, Ge, And, Or };
enum class AggOp { Max, Min };
enum class FuncKind { Count, Src, Dst, Out, In, Abs, Ln, Nodes };

const char* to_string(BinOp op);
const char* to_string(AggOp op);
const char* to_string(FuncKind f);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  struct IntLit {
    std::int64_t value;
  };
  struct FloatLit {
    double value;
  };
  struct StrLit {
    std::string value;
  };
  struct Var {
    std::string name;
  };
  struct Prop {  // base.name
    ExprPtr base;
    std::string name;
  };
  struct Not {
    ExprPtr operand;
  };
  struct Binary {
    BinOp op;
    ExprPtr lhs;
    ExprPtr rhs;
  };
  struct Call {  // count(x), src(e), dst(e), out(v), in(v), abs(x), ln(x), nodes(g)
    FuncKind fn;
    ExprPtr arg;
  };
  struct Aggregate {  // max(collect(var IN coll | body)) / min(...)
    AggOp op;
    std::string var;
    ExprPtr coll;
    ExprPtr body;
  };

  using Node = std::variant<IntLit, FloatLit, StrLit, Var, Prop, Not, Binary, Call, Aggregate>;
  Node node;
  std::size_t pos = 0;  // byte offset in the query text

  template <typename T>
  const T* as() const {
    return std::get_if<T>(&node);
  }
};

template <typename T>
ExprPtr make_expr(T node, std::size_t pos = 0) {
  auto e = std::make_shared<Expr>();
  e->node = std::move(node);
  e->pos = pos;
  return e;
}

// --- match clauses -----------------------------------------------------------

using PropValue = std::variant<std::int64_t, std::string>;

struct PropConstraint {
  std::string key;
  PropValue value;
};

struct NodePattern {
  std::string var;
  std::string label;  // Process | File | Network
  std::vector<PropConstraint> props;
};

struct EdgePattern {
  std::string var;
  std::string label;  // FileEvent | ProcessEvent | NetworkEvent
  std::vector<PropConstraint> props;
};

// MATCH (p:Process)-[st:FileEvent{...}]->(f:File{...})
struct PoiMatch {
  NodePattern src;
  EdgePattern edge;
  NodePattern dst;
  ExprPtr where;  // parsed if present; not used by any corpus query
};

// MATCH v=dst(r) WHERE <expr>  (the per-step constraint of a traversal)
struct StepMatch {
  std::string node_var;   // v
  FuncKind bind_fn;       // Src or Dst
  std::string edge_arg;   // r
  ExprPtr where;
};

// MATCH n in nodes(r) WHERE <filter> ORDER BY <key> DESC LIMIT k
struct EntryMatch {
  std::string node_var;   // n
  std::string graph_arg;  // r (edge variable of an earlier traversal)
  ExprPtr filter;
  ExprPtr order_key;      // may be null (no ORDER BY)
  bool descending = true;
  std::optional<std::int64_t> limit;
};

// --- stages ------------------------------------------------------------------

struct TraverseSpec {
  bool dfs = false;
  std::string edge_var;  // r / re
  bool backward = true;
  std::string start_var;  // f / entry
  StepMatch step;
};

struct TraverseStage {
  TraverseSpec spec;
  std::string yield_name;  // g1
};

struct UnwindStage {
  std::string graph;
  std::string edge_var;
};

struct SetWeightStage {  // SET e.weight = projection(f1, f2, ...)
  std::string target_var;
  std::string prop;
  std::vector<ExprPtr> features;
  std::size_t pos = 0;
};

struct SetRelStage {  // MATCH u=src(e) SET u.rel = reduce(acc=init, o IN coll | body)
  std::string bind_var;  // u
  FuncKind bind_fn;      // Src
  std::string bind_arg;  // e
  std::string target_var;
  std::string prop;
  std::string acc_name;
  double init = 0.0;
  std::string iter_var;
  ExprPtr coll;
  ExprPtr body;
};

struct GenericSetStage {  // SET lhs = expr; parsed but not executable
  ExprPtr target;
  ExprPtr value;
  std::size_t pos = 0;
};

struct WeightFilterStage {  // WITH e WHERE e.weight >= 0.5
  std::string var;
  ExprPtr predicate;
};

struct ReturnStage {
  std::string graph;
  std::size_t pos = 0;
};

using Stage = std::variant<TraverseStage, UnwindStage, SetWeightStage, SetRelStage,
                           GenericSetStage, WeightFilterStage, ReturnStage>;

// --- query structure ---------------------------------------------------------

enum class MergeOp { Union, Intersect };

// One MATCH ... RETURN unit. The first pipeline of a sub-query anchors at a
// POI pattern; follow-up pipelines bind entry nodes selected from an
// earlier pipeline's graph (the WITH form).
struct EntryBinding {
  std::string name;  // entry
  EntryMatch match;
};

struct Pipeline {
  std::variant<PoiMatch, EntryBinding> anchor;
  std::vector<Stage> stages;
};

struct SubQuery {
  std::vector<Pipeline> pipelines;
  std::vector<MergeOp> inner_merges;  // |pipelines| - 1
};

struct QueryAst {
  std::vector<SubQuery> sub_queries;
  std::vector<MergeOp> merges;  // |sub_queries| - 1
};

}  // namespace provql::ast
