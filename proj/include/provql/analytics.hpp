#pragma once

// Edge merging, feature evaluation, two-class clustering, Fisher projection
// to scalar weights, per-node normalization and iterative impact-score
// propagation. The data-parallel kernels (feature evaluation, normalization,
// propagation sweeps) come in two implementations: a serial reference and an
// OpenMP variant. They compute identical results; tests pin the equivalence
// and the benchmark target compares their throughput.

#include <cstdint>
#include <string>
#include <vector>

#include "provql/ast.hpp"
#include "provql/evaluator.hpp"
#include "provql/model.hpp"

namespace provql {

// Kernel selection for the data-parallel loops.
enum class ExecMode { Serial, Parallel };

// --- edge merge --------------------------------------------------------------

// Fuses bursts of same-signature events: within each (src, dst, optype)
// group ordered by starttime, an event merges into the running edge when the
// gap to the hull's end (next.starttime - hull.endtime) is at most
// `gap_threshold_ns`. Overlapping and abutting events merge at threshold 0.
ProvGraph merge_parallel_edges(const ProvGraph& g, TimestampNs gap_threshold_ns);

// --- features ----------------------------------------------------------------

struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

// Evaluation context for per-edge feature expressions: the POI event edge,
// the variable names the query used, and the adjacency the degree features
// aggregate over (the backward graph).
struct FeatureContext {
  const GraphEdge* poi_edge = nullptr;
  std::string poi_var = "st";
  std::vector<std::string> edge_vars;  // the unwind var and the traversal edge var
  std::string step_node_var;           // v; bound per edge via step_bind
  ast::FuncKind step_bind = ast::FuncKind::Dst;
  std::vector<std::pair<std::string, EntityId>> extra_nodes;  // p, f
  const AdjacencyView* adjacency = nullptr;
  const EventStore* store = nullptr;
};

// One row per edge of `g`, one column per feature expression. Throws
// std::runtime_error carrying the edge id and feature index on evaluation
// failure.
FeatureMatrix compute_features(const ProvGraph& g, const FeatureContext& ctx,
                               const std::vector<ast::ExprPtr>& features,
                               ExecMode mode = ExecMode::Parallel);

// --- clustering and projection ------------------------------------------------

struct ClusterResult {
  std::vector<int> labels;  // 0/1 per row
  bool degenerate = false;  // all rows identical (or fewer than 2 rows)
  std::vector<double> mean;  // per-feature standardization
  std::vector<double> stddev;
};

// k-means, k=2, on z-scored features. Deterministic: centers start at the
// two most separated points (farthest from the centroid, then farthest from
// that). `seed` is accepted for interface stability; the initialization is
// already deterministic.
ClusterResult cluster_two(const FeatureMatrix& m, std::uint64_t seed = 0);

struct ProjectionModel {
  std::vector<int> labels;
  std::vector<double> w;  // Fisher direction, one coefficient per feature
  std::vector<double> mean;
  std::vector<double> stddev;  // floored at 1e-12
  int critical_cluster = 1;    // cluster oriented above the other
  bool fallback = false;       // equal-coefficient projection was used
  std::size_t cluster_sizes[2] = {0, 0};

  std::string dump_json() const;
};

struct ProjectionOutcome {
  ProjectionModel model;
  std::vector<double> weights;  // per edge, min-max scaled into [0,1]
};

// Fisher discriminant w = (S_W + 1e-6 I)^-1 (mu1 - mu0) on standardized
// features; scores are oriented so the cluster with the larger standardized
// centroid (component sum) lands on top, then min-max scaled to [0,1] with
// a 1e-6 floor so surviving paths never multiply through an exact zero.
ProjectionOutcome lda_project(const FeatureMatrix& m, const std::vector<int>& labels);

// Full weighting pipeline on a merged graph: features -> clustering ->
// projection -> per-node normalization. Degenerate feature matrices fall
// back to uniform weights. Returns the model for inspection; g's edge
// weights end up normalized unless `normalize` is false.
struct WeightingResult {
  ProjectionModel model;
  std::vector<double> pre_normalization;  // weights before the per-node step
  bool uniform_fallback = false;
};
WeightingResult assign_weights(ProvGraph& g, const FeatureContext& ctx,
                               const std::vector<ast::ExprPtr>& features, std::uint64_t seed,
                               bool normalize = true, ExecMode mode = ExecMode::Parallel);

// --- normalization and propagation --------------------------------------------

// weight(e) <- raw(e) / sum of raw over out(src(e)); zero-sum groups get
// uniform 1/deg. Every edge must carry a weight >= 0.
void normalize_outgoing(ProvGraph& g, ExecMode mode = ExecMode::Parallel);

// Generic reduce evaluation: how a node folds its out-edges into a score.
struct ReduceEval {
  std::string acc_name = "sum";
  double init = 0.0;
  std::string iter_var = "o";
  std::string node_var = "u";
  ast::ExprPtr body;                   // e.g. sum + o.weight * dst(o).rel
  const EventStore* store = nullptr;
};

struct PropagationResult {
  std::unordered_map<EntityId, double> scores;
  bool converged = false;
  int iterations = 0;
};

// Jacobi iteration of rel(u) <- reduce over out(u) with rel(poi) clamped to
// 1, until the aggregate delta drops below epsilon (default 1e-13) or
// max_iters is hit.
PropagationResult propagate(const ProvGraph& g, const ReduceEval& spec, EntityId poi_node,
                            double epsilon = 1e-13, int max_iters = 1000,
                            ExecMode mode = ExecMode::Parallel);

// --- weight filter -------------------------------------------------------------

// Keeps edges whose predicate evaluates to true (binding `var` per edge).
// Nodes left without incident edges are dropped, except the POI node.
ProvGraph filter_by_weight(const ProvGraph& g, const ast::Expr& predicate, const std::string& var,
                           std::optional<EntityId> poi_node, const EventStore* store = nullptr);

}  // namespace provql
