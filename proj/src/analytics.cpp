#include "provql/analytics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace provql {

using namespace ast;

namespace {

bool use_omp(ExecMode mode) {
#ifdef _OPENMP
  return mode == ExecMode::Parallel;
#else
  (void)mode;
  return false;
#endif
}

}  // namespace

// --- edge merge ----------------------------------------------------------------

ProvGraph merge_parallel_edges(const ProvGraph& g, TimestampNs gap_threshold_ns) {
  using Sig = std::tuple<EntityId, EntityId, OpType>;
  std::map<Sig, std::vector<const GraphEdge*>> groups;
  for (const auto& e : g.edges) groups[{e.src, e.dst, e.optype}].push_back(&e);

  ProvGraph out;
  out.nodes = g.nodes;
  out.scores = g.scores;
  out.truncated = g.truncated;
  for (auto& [sig, edges] : groups) {
    std::sort(edges.begin(), edges.end(), [](const GraphEdge* a, const GraphEdge* b) {
      if (a->starttime != b->starttime) return a->starttime < b->starttime;
      if (a->endtime != b->endtime) return a->endtime < b->endtime;
      return a->raw_ids < b->raw_ids;
    });
    GraphEdge current;
    bool open = false;
    auto flush = [&]() {
      if (!open) return;
      std::sort(current.raw_ids.begin(), current.raw_ids.end());
      out.edges.push_back(current);
      open = false;
    };
    for (const GraphEdge* e : edges) {
      if (open && e->starttime - current.endtime <= gap_threshold_ns) {
        current.endtime = std::max(current.endtime, e->endtime);
        current.starttime = std::min(current.starttime, e->starttime);
        current.amount += e->amount;
        current.raw_count += e->raw_count;
        current.raw_ids.insert(current.raw_ids.end(), e->raw_ids.begin(), e->raw_ids.end());
      } else {
        flush();
        current = *e;
        current.weight.reset();
        open = true;
      }
    }
    flush();
  }
  return out;
}

// --- features --------------------------------------------------------------------

FeatureMatrix compute_features(const ProvGraph& g, const FeatureContext& ctx,
                               const std::vector<ExprPtr>& features, ExecMode mode) {
  FeatureMatrix m;
  m.rows = g.edges.size();
  m.cols = features.size();
  m.data.assign(m.rows * m.cols, 0.0);

  std::atomic<bool> failed{false};
  std::string error;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(mode))
#endif
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(m.rows); ++i) {
    if (failed.load(std::memory_order_relaxed)) continue;
    const GraphEdge& edge = g.edges[i];
    Binding b;
    b.adjacency = ctx.adjacency;
    b.store = ctx.store;
    if (ctx.poi_edge) b.set(ctx.poi_var, EdgeRef{ctx.poi_edge});
    for (const auto& var : ctx.edge_vars) b.set(var, EdgeRef{&edge});
    if (!ctx.step_node_var.empty())
      b.set(ctx.step_node_var,
            EntityRef{ctx.step_bind == FuncKind::Src ? edge.src : edge.dst});
    for (const auto& [name, id] : ctx.extra_nodes) b.set(name, EntityRef{id});
    for (std::size_t j = 0; j < m.cols; ++j) {
      auto r = eval(*features[j], b);
      if (auto* err = std::get_if<EvalError>(&r)) {
        bool expected = false;
        if (failed.compare_exchange_strong(expected, true)) {
          std::ostringstream os;
          os << "feature evaluation failed at edge ";
          os << (edge.raw_ids.empty() ? 0 : edge.raw_ids.front());
          os << ", feature " << j << ": " << err->message;
#ifdef _OPENMP
#pragma omp critical
#endif
          error = os.str();
        }
        break;
      }
      const Value& v = std::get<Value>(r);
      if (!value_is_numeric(v)) {
        bool expected = false;
        if (failed.compare_exchange_strong(expected, true)) {
#ifdef _OPENMP
#pragma omp critical
#endif
          error = "feature " + std::to_string(j) + " is not numeric";
        }
        break;
      }
      m.at(i, j) = value_as_double(v);
    }
  }
  if (failed.load()) throw std::runtime_error(error);
  return m;
}

// --- clustering -------------------------------------------------------------------

namespace {

void standardize(const FeatureMatrix& m, std::vector<double>& mean, std::vector<double>& stddev,
                 FeatureMatrix& z) {
  mean.assign(m.cols, 0.0);
  stddev.assign(m.cols, 0.0);
  for (std::size_t j = 0; j < m.cols; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < m.rows; ++i) s += m.at(i, j);
    mean[j] = m.rows ? s / m.rows : 0.0;
    double var = 0;
    for (std::size_t i = 0; i < m.rows; ++i) {
      double d = m.at(i, j) - mean[j];
      var += d * d;
    }
    stddev[j] = std::max(std::sqrt(m.rows ? var / m.rows : 0.0), 1e-12);
  }
  z = m;
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) z.at(i, j) = (m.at(i, j) - mean[j]) / stddev[j];
}

double sq_dist(const FeatureMatrix& z, std::size_t row, const std::vector<double>& c) {
  double d = 0;
  for (std::size_t j = 0; j < z.cols; ++j) {
    double x = z.at(row, j) - c[j];
    d += x * x;
  }
  return d;
}

}  // namespace

ClusterResult cluster_two(const FeatureMatrix& m, std::uint64_t /*seed*/) {
  ClusterResult r;
  r.labels.assign(m.rows, 0);
  FeatureMatrix z;
  standardize(m, r.mean, r.stddev, z);

  if (m.rows < 2) {
    r.degenerate = true;
    return r;
  }
  bool all_same = true;
  for (std::size_t i = 1; i < m.rows && all_same; ++i)
    for (std::size_t j = 0; j < m.cols; ++j)
      if (m.at(i, j) != m.at(0, j)) {
        all_same = false;
        break;
      }
  if (all_same) {
    r.degenerate = true;
    return r;
  }

  // Farthest-pair initialization: the point farthest from the centroid,
  // then the point farthest from it.
  std::vector<double> centroid(z.cols, 0.0);  // zero in standardized space
  std::size_t p0 = 0;
  double best = -1;
  for (std::size_t i = 0; i < z.rows; ++i) {
    double d = sq_dist(z, i, centroid);
    if (d > best) {
      best = d;
      p0 = i;
    }
  }
  std::vector<double> c0(z.cols), c1(z.cols);
  for (std::size_t j = 0; j < z.cols; ++j) c0[j] = z.at(p0, j);
  std::size_t p1 = 0;
  best = -1;
  for (std::size_t i = 0; i < z.rows; ++i) {
    double d = sq_dist(z, i, c0);
    if (d > best) {
      best = d;
      p1 = i;
    }
  }
  for (std::size_t j = 0; j < z.cols; ++j) c1[j] = z.at(p1, j);

  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < z.rows; ++i) {
      int label = sq_dist(z, i, c1) < sq_dist(z, i, c0) ? 1 : 0;
      if (label != r.labels[i]) {
        r.labels[i] = label;
        changed = true;
      }
    }
    std::size_t n0 = 0, n1 = 0;
    std::vector<double> s0(z.cols, 0.0), s1(z.cols, 0.0);
    for (std::size_t i = 0; i < z.rows; ++i) {
      if (r.labels[i] == 0) {
        n0++;
        for (std::size_t j = 0; j < z.cols; ++j) s0[j] += z.at(i, j);
      } else {
        n1++;
        for (std::size_t j = 0; j < z.cols; ++j) s1[j] += z.at(i, j);
      }
    }
    if (n0 == 0 || n1 == 0) {
      r.degenerate = true;
      return r;
    }
    for (std::size_t j = 0; j < z.cols; ++j) {
      c0[j] = s0[j] / n0;
      c1[j] = s1[j] / n1;
    }
    if (!changed) break;
  }
  return r;
}

// --- LDA ---------------------------------------------------------------------------

namespace {

// Solves A x = b for a small dense symmetric system via Gaussian
// elimination with partial pivoting. Returns false when singular.
bool solve_dense(std::vector<double> a, std::vector<double> b, std::size_t n,
                 std::vector<double>& x) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t row = col + 1; row < n; ++row)
      if (std::fabs(a[row * n + col]) > std::fabs(a[piv * n + col])) piv = row;
    if (std::fabs(a[piv * n + col]) < 1e-300) return false;
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a[piv * n + j], a[col * n + j]);
      std::swap(b[piv], b[col]);
    }
    for (std::size_t row = col + 1; row < n; ++row) {
      double f = a[row * n + col] / a[col * n + col];
      for (std::size_t j = col; j < n; ++j) a[row * n + j] -= f * a[col * n + j];
      b[row] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t row = n; row-- > 0;) {
    double s = b[row];
    for (std::size_t j = row + 1; j < n; ++j) s -= a[row * n + j] * x[j];
    x[row] = s / a[row * n + row];
  }
  return true;
}

}  // namespace

ProjectionOutcome lda_project(const FeatureMatrix& m, const std::vector<int>& labels) {
  ProjectionOutcome out;
  ProjectionModel& model = out.model;
  model.labels = labels;
  const std::size_t d = m.cols;

  FeatureMatrix z;
  standardize(m, model.mean, model.stddev, z);

  std::vector<double> mu0(d, 0.0), mu1(d, 0.0);
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < z.rows; ++i) {
    if (labels[i] == 0) {
      n0++;
      for (std::size_t j = 0; j < d; ++j) mu0[j] += z.at(i, j);
    } else {
      n1++;
      for (std::size_t j = 0; j < d; ++j) mu1[j] += z.at(i, j);
    }
  }
  model.cluster_sizes[0] = n0;
  model.cluster_sizes[1] = n1;
  if (n0 == 0 || n1 == 0) throw std::runtime_error("lda_project requires two non-empty classes");
  for (std::size_t j = 0; j < d; ++j) {
    mu0[j] /= n0;
    mu1[j] /= n1;
  }

  double sep = 0;
  for (std::size_t j = 0; j < d; ++j) sep += (mu1[j] - mu0[j]) * (mu1[j] - mu0[j]);

  model.w.assign(d, 0.0);
  bool solved = false;
  if (sep >= 1e-24) {
    // Within-class scatter, regularized.
    std::vector<double> sw(d * d, 0.0);
    for (std::size_t i = 0; i < z.rows; ++i) {
      const auto& mu = labels[i] == 0 ? mu0 : mu1;
      for (std::size_t a = 0; a < d; ++a) {
        double da = z.at(i, a) - mu[a];
        for (std::size_t b = 0; b < d; ++b) sw[a * d + b] += da * (z.at(i, b) - mu[b]);
      }
    }
    for (std::size_t j = 0; j < d; ++j) sw[j * d + j] += 1e-6;
    std::vector<double> diff(d);
    for (std::size_t j = 0; j < d; ++j) diff[j] = mu1[j] - mu0[j];
    solved = solve_dense(sw, diff, d, model.w);
  }
  if (!solved) {
    model.fallback = true;
    double coeff = 1.0 / std::sqrt(static_cast<double>(d));
    model.w.assign(d, coeff);
  }

  // Orientation anchor: the cluster with the larger standardized centroid
  // (component sum) is the critical one; flip w so it scores higher.
  double sum0 = 0, sum1 = 0;
  for (std::size_t j = 0; j < d; ++j) {
    sum0 += mu0[j];
    sum1 += mu1[j];
  }
  model.critical_cluster = sum1 >= sum0 ? 1 : 0;

  auto mean_score = [&](int cls) {
    double s = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < z.rows; ++i) {
      if (labels[i] != cls) continue;
      double v = 0;
      for (std::size_t j = 0; j < d; ++j) v += model.w[j] * z.at(i, j);
      s += v;
      n++;
    }
    return s / n;
  };
  if (mean_score(model.critical_cluster) < mean_score(1 - model.critical_cluster))
    for (auto& c : model.w) c = -c;

  std::vector<double> scores(z.rows, 0.0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < z.rows; ++i) {
    double v = 0;
    for (std::size_t j = 0; j < d; ++j) v += model.w[j] * z.at(i, j);
    scores[i] = v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  out.weights.assign(z.rows, 0.5);
  if (hi > lo) {
    constexpr double kFloor = 1e-6;  // keep surviving paths strictly positive
    for (std::size_t i = 0; i < z.rows; ++i)
      out.weights[i] = kFloor + (1.0 - kFloor) * (scores[i] - lo) / (hi - lo);
  }
  return out;
}

std::string ProjectionModel::dump_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\"cluster_sizes\":[" << cluster_sizes[0] << "," << cluster_sizes[1] << "]";
  os << ",\"critical_cluster\":" << critical_cluster;
  os << ",\"fallback\":" << (fallback ? "true" : "false");
  auto arr = [&](const char* name, const std::vector<double>& v) {
    os << ",\"" << name << "\":[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) os << ",";
      os << v[i];
    }
    os << "]";
  };
  arr("w", w);
  arr("mean", mean);
  arr("stddev", stddev);
  os << "}";
  return os.str();
}

// --- normalization -----------------------------------------------------------------

void normalize_outgoing(ProvGraph& g, ExecMode mode) {
  GraphAdjacency adj(g);
  std::vector<EntityId> nodes(g.nodes.begin(), g.nodes.end());
  std::sort(nodes.begin(), nodes.end());
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(mode))
#endif
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(nodes.size()); ++i) {
    const auto& out = adj.out(nodes[i]);
    if (out.empty()) continue;
    double sum = 0;
    for (std::size_t e : out) sum += g.edges[e].weight.value_or(0.0);
    for (std::size_t e : out) {
      if (sum > 0)
        g.edges[e].weight = g.edges[e].weight.value_or(0.0) / sum;
      else
        g.edges[e].weight = 1.0 / static_cast<double>(out.size());
    }
  }
}

// --- full weighting pipeline ---------------------------------------------------------

WeightingResult assign_weights(ProvGraph& g, const FeatureContext& ctx,
                               const std::vector<ExprPtr>& features, std::uint64_t seed,
                               bool normalize, ExecMode mode) {
  WeightingResult result;
  if (g.edges.empty()) return result;
  FeatureMatrix m = compute_features(g, ctx, features, mode);
  ClusterResult clusters = cluster_two(m, seed);
  if (clusters.degenerate) {
    result.uniform_fallback = true;
    result.model.labels = clusters.labels;
    result.model.mean = clusters.mean;
    result.model.stddev = clusters.stddev;
    result.pre_normalization.assign(g.edges.size(), 1.0);
  } else {
    ProjectionOutcome proj = lda_project(m, clusters.labels);
    result.model = std::move(proj.model);
    result.pre_normalization = std::move(proj.weights);
  }
  for (std::size_t i = 0; i < g.edges.size(); ++i)
    g.edges[i].weight = result.pre_normalization[i];
  if (normalize) normalize_outgoing(g, mode);
  return result;
}

// --- propagation ------------------------------------------------------------------------

PropagationResult propagate(const ProvGraph& g, const ReduceEval& spec, EntityId poi_node,
                            double epsilon, int max_iters, ExecMode mode) {
  PropagationResult res;
  GraphAdjacency adj(g);
  GraphView view(g, adj);
  std::vector<EntityId> nodes(g.nodes.begin(), g.nodes.end());
  std::sort(nodes.begin(), nodes.end());

  std::unordered_map<EntityId, double> prev;
  for (EntityId n : nodes) prev[n] = 0.0;
  prev[poi_node] = 1.0;

  std::vector<double> next(nodes.size(), 0.0);
  std::atomic<bool> failed{false};
  std::string error;

  for (int iter = 1; iter <= max_iters; ++iter) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (use_omp(mode))
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(nodes.size()); ++i) {
      if (failed.load(std::memory_order_relaxed)) continue;
      EntityId u = nodes[i];
      if (u == poi_node) {
        next[i] = 1.0;
        continue;
      }
      double acc = spec.init;
      Binding b;
      b.adjacency = &view;
      b.scores = &prev;
      b.store = spec.store;
      b.set(spec.node_var, EntityRef{u});
      for (std::size_t ei : adj.out(u)) {
        b.set(spec.acc_name, acc);
        b.set(spec.iter_var, EdgeRef{&g.edges[ei]});
        auto r = eval(*spec.body, b);
        if (auto* err = std::get_if<EvalError>(&r)) {
          bool expected = false;
          if (failed.compare_exchange_strong(expected, true)) {
#ifdef _OPENMP
#pragma omp critical
#endif
            error = "reduce evaluation failed: " + err->message;
          }
          break;
        }
        const Value& v = std::get<Value>(r);
        if (!value_is_numeric(v)) {
          bool expected = false;
          if (failed.compare_exchange_strong(expected, true)) {
#ifdef _OPENMP
#pragma omp critical
#endif
            error = "reduce body must be numeric";
          }
          break;
        }
        acc = value_as_double(v);
      }
      next[i] = acc;
    }
    if (failed.load()) throw std::runtime_error(error);

    double delta = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) delta += std::fabs(next[i] - prev[nodes[i]]);
    for (std::size_t i = 0; i < nodes.size(); ++i) prev[nodes[i]] = next[i];
    res.iterations = iter;
    if (delta < epsilon) {
      res.converged = true;
      break;
    }
  }
  res.scores = std::move(prev);
  return res;
}

// --- weight filter -------------------------------------------------------------------------

ProvGraph filter_by_weight(const ProvGraph& g, const Expr& predicate, const std::string& var,
                           std::optional<EntityId> poi_node, const EventStore* store) {
  ProvGraph out;
  out.truncated = g.truncated;
  Binding b;
  b.store = store;
  b.scores = &g.scores;
  for (const auto& e : g.edges) {
    b.set(var, EdgeRef{&e});
    auto r = eval(predicate, b);
    if (auto* err = std::get_if<EvalError>(&r))
      throw std::runtime_error("weight filter failed: " + err->message);
    if (value_truthy(std::get<Value>(r))) out.add_edge(e);
  }
  if (poi_node) out.nodes.insert(*poi_node);
  for (const auto& [node, score] : g.scores)
    if (out.nodes.count(node)) out.scores[node] = score;
  return out;
}

}  // namespace provql
