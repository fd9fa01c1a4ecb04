#pragma once

#include <chrono>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

#include "tsodso/milp/model.hpp"
#include "tsodso/milp/simplex.hpp"

namespace tsodso::milp {

struct NodeInfo {
  std::size_t id = 0;
  std::size_t depth = 0;
  const std::vector<double>* lower = nullptr;  // node bounds, structural columns
  const std::vector<double>* upper = nullptr;
  const MilpSolution* relaxation = nullptr;
};

struct SolverConfig {
  std::size_t node_limit = std::numeric_limits<std::size_t>::max();
  double time_limit_seconds = std::numeric_limits<double>::infinity();
  double relative_gap = 1e-6;
  double absolute_gap = 1e-9;
  double integrality_tol = 1e-6;
  double feasibility_tol = 1e-6;
  double sos_zero_tol = 1e-6;
  /// Optional starting incumbent; used only if it is feasible within feasibility_tol.
  std::optional<std::vector<double>> initial_solution;
  /// Invoked after every node relaxation (for diagnostics and tests).
  std::function<void(const NodeInfo&)> on_node;
  /// Optional primal heuristic called with each node relaxation; a returned point is
  /// accepted as incumbent when feasible and better.
  std::function<std::optional<std::vector<double>>(const std::vector<double>&)> heuristic;
  /// Branch on the first violated SOS1 set in model order instead of the most violated.
  bool sos_first_violated = false;
  /// Invoked with every new incumbent.
  std::function<void(const std::vector<double>&)> on_incumbent;
  LpTolerances lp;
};

namespace detail {

struct BoundChange {
  std::size_t var;
  double lower;
  double upper;
};

struct OpenNode {
  std::size_t id = 0;
  std::size_t depth = 0;
  double bound = 0.0;  // parent relaxation, minimization form
  std::vector<BoundChange> changes;
  std::shared_ptr<const LpEngine::Basis> basis;
};

struct NodeOrder {
  bool operator()(const OpenNode& a, const OpenNode& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    // equal bounds: deepest, then newest (depth-first when there is no objective)
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.id < b.id;
  }
};

}  // namespace detail

/// Best-bound branch-and-bound with depth-first plunging. Binaries branch on the
/// most fractional value; violated SOS1 sets are split into two halves that are
/// fixed to zero in the respective child.
inline MilpSolution solve_milp(const MilpModel& model, const SolverConfig& cfg = {}) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const double sign = model.objective_sense() == ObjSense::Maximize ? -1.0 : 1.0;
  const std::size_t n = model.num_vars();

  std::vector<double> root_lo(n), root_up(n);
  for (std::size_t j = 0; j < n; ++j) {
    root_lo[j] = model.variable(j).lower;
    root_up[j] = model.variable(j).upper;
  }
  std::vector<std::size_t> binaries;
  for (std::size_t j = 0; j < n; ++j)
    if (model.variable(j).kind == VarKind::Binary) binaries.push_back(j);

  LpEngine eng(model, cfg.lp);
  MilpSolution best;
  best.status = Status::Infeasible;
  double incumbent = kInf;  // minimization form

  auto min_obj = [&](const std::vector<double>& x) { return sign * model.evaluate_objective(x); };
  if (cfg.initial_solution && cfg.initial_solution->size() == n &&
      model.max_violation(*cfg.initial_solution, cfg.sos_zero_tol) <= cfg.feasibility_tol) {
    best.values = *cfg.initial_solution;
    incumbent = min_obj(best.values);
    best.has_incumbent = true;
    if (cfg.on_incumbent) cfg.on_incumbent(best.values);
  }

  auto gap_closed = [&](double bound) {
    if (!std::isfinite(incumbent)) return false;
    double g = incumbent - bound;
    return g <= cfg.absolute_gap || g <= cfg.relative_gap * std::max(1.0, std::abs(incumbent));
  };

  std::vector<double> cur_lo = root_lo, cur_up = root_up;
  std::vector<std::size_t> touched;
  auto apply = [&](const std::vector<detail::BoundChange>& changes) {
    for (std::size_t j : touched) {
      cur_lo[j] = root_lo[j];
      cur_up[j] = root_up[j];
      eng.set_bounds(j, root_lo[j], root_up[j]);
    }
    touched.clear();
    for (const auto& c : changes) {
      cur_lo[c.var] = c.lower;
      cur_up[c.var] = c.upper;
      eng.set_bounds(c.var, c.lower, c.upper);
      touched.push_back(c.var);
    }
  };

  std::priority_queue<detail::OpenNode, std::vector<detail::OpenNode>, detail::NodeOrder> open;
  std::size_t next_id = 0;
  std::size_t nodes = 0;
  double global_bound = -kInf;
  bool root_unbounded = false;
  bool limit_hit = false;
  Status limit_status = Status::NodeLimit;

  std::optional<detail::OpenNode> plunge = detail::OpenNode{next_id++, 0, -kInf, {}, nullptr};
  bool engine_holds_parent = false;  // engine basis belongs to the plunge node's parent

  while (plunge || !open.empty()) {
    detail::OpenNode node;
    if (plunge) {
      node = std::move(*plunge);
      plunge.reset();
    } else {
      node = open.top();
      open.pop();
      engine_holds_parent = false;
    }
    if (gap_closed(node.bound)) continue;
    if (nodes >= cfg.node_limit) {
      limit_hit = true;
      limit_status = Status::NodeLimit;
      open.push(std::move(node));
      break;
    }
    if (std::chrono::duration<double>(clock::now() - t0).count() > cfg.time_limit_seconds) {
      limit_hit = true;
      limit_status = Status::TimeLimit;
      open.push(std::move(node));
      break;
    }
    ++nodes;
    apply(node.changes);
    if (!engine_holds_parent && node.basis) eng.set_basis(*node.basis);
    Status st = eng.solve();
    engine_holds_parent = false;

    if (st == Status::Unbounded) {
      if (node.depth == 0) {
        root_unbounded = true;
        break;
      }
      continue;
    }
    if (st == Status::IterationLimit) {
      eng.reset_basis();  // retry cold once
      st = eng.solve();
      if (st == Status::IterationLimit) {
        limit_hit = true;
        limit_status = Status::IterationLimit;
        break;
      }
    }
    if (st != Status::Optimal) continue;
    std::vector<double> x = eng.values();
    double obj = sign * eng.objective() + sign * model.objective_constant();

    if (cfg.on_node) {
      MilpSolution rel;
      rel.status = Status::Optimal;
      rel.values = x;
      rel.objective = sign * obj;
      rel.row_duals = eng.row_duals();
      rel.reduced_costs = eng.reduced_costs();
      cfg.on_node(NodeInfo{node.id, node.depth, &cur_lo, &cur_up, &rel});
    }
    if (obj >= incumbent - cfg.absolute_gap || gap_closed(obj)) continue;

    if (cfg.heuristic) {
      auto cand = cfg.heuristic(x);
      if (cand && cand->size() == n && model.max_violation(*cand, cfg.sos_zero_tol) <= cfg.feasibility_tol) {
        double v = min_obj(*cand);
        if (v < incumbent) {
          incumbent = v;
          best.values = std::move(*cand);
          best.row_duals.clear();
          best.reduced_costs.clear();
          best.has_incumbent = true;
          if (cfg.on_incumbent) cfg.on_incumbent(best.values);
          if (obj >= incumbent - cfg.absolute_gap || gap_closed(obj)) continue;
        }
      }
    }

    // branching candidate
    std::size_t bin = SIZE_MAX;
    double best_frac = cfg.integrality_tol;
    for (std::size_t j : binaries) {
      double f = std::abs(x[j] - std::round(x[j]));
      if (f > best_frac) {
        best_frac = f;
        bin = j;
      }
    }
    std::size_t sos = SIZE_MAX;
    double best_viol = 0.0;
    if (bin == SIZE_MAX) {
      for (std::size_t k = 0; k < model.sos1_sets().size(); ++k) {
        const auto& set = model.sos1_sets()[k];
        double mx = 0.0, sum = 0.0;
        std::size_t nz = 0;
        for (auto v : set.members) {
          double a = std::abs(x[v]);
          if (a > cfg.sos_zero_tol) {
            ++nz;
            sum += a;
            mx = std::max(mx, a);
          }
        }
        if (nz < 2) continue;
        double viol = sum - mx;
        if (viol > best_viol) {
          best_viol = viol;
          sos = k;
          if (cfg.sos_first_violated) break;
        }
      }
    }

    if (bin == SIZE_MAX && sos == SIZE_MAX) {
      for (std::size_t j : binaries) x[j] = std::round(x[j]);
      incumbent = min_obj(x);
      best.values = std::move(x);
      best.row_duals = eng.row_duals();
      best.reduced_costs = eng.reduced_costs();
      best.has_incumbent = true;
      if (cfg.on_incumbent) cfg.on_incumbent(best.values);
      continue;
    }

    auto basis = std::make_shared<const LpEngine::Basis>(eng.basis());
    auto child = [&](std::vector<detail::BoundChange> extra) {
      detail::OpenNode c;
      c.id = next_id++;
      c.depth = node.depth + 1;
      c.bound = obj;
      c.changes = node.changes;
      for (auto& e : extra) {
        auto it = std::find_if(c.changes.begin(), c.changes.end(),
                               [&](const auto& b) { return b.var == e.var; });
        if (it != c.changes.end()) *it = e;
        else c.changes.push_back(e);
      }
      c.basis = basis;
      return c;
    };

    detail::OpenNode first, second;
    bool have_first = true, have_second = true;
    if (bin != SIZE_MAX) {
      auto down = child({{bin, cur_lo[bin], 0.0}});
      auto up = child({{bin, 1.0, cur_up[bin]}});
      if (x[bin] >= 0.5) {
        first = std::move(up);
        second = std::move(down);
      } else {
        first = std::move(down);
        second = std::move(up);
      }
    } else {
      const auto& members = model.sos1_sets()[sos].members;
      std::vector<std::size_t> nzpos;
      for (std::size_t p = 0; p < members.size(); ++p)
        if (std::abs(x[members[p]]) > cfg.sos_zero_tol) nzpos.push_back(p);
      std::size_t split = nzpos[nzpos.size() / 2];
      std::vector<detail::BoundChange> left, right;  // left zero-fixes [0,split)
      double left_mass = 0.0, right_mass = 0.0;
      bool left_ok = true, right_ok = true;
      for (std::size_t p = 0; p < members.size(); ++p) {
        std::size_t v = members[p];
        bool feasible_zero = cur_lo[v] <= 0.0 && cur_up[v] >= 0.0;
        if (p < split) {
          left.push_back({v, 0.0, 0.0});
          left_mass += std::abs(x[v]);
          left_ok = left_ok && feasible_zero;
        } else {
          right.push_back({v, 0.0, 0.0});
          right_mass += std::abs(x[v]);
          right_ok = right_ok && feasible_zero;
        }
      }
      auto l = child(std::move(left));
      auto r = child(std::move(right));
      bool left_first = left_mass <= right_mass;
      first = left_first ? std::move(l) : std::move(r);
      second = left_first ? std::move(r) : std::move(l);
      have_first = left_first ? left_ok : right_ok;
      have_second = left_first ? right_ok : left_ok;
    }
    if (have_second) open.push(std::move(second));
    if (have_first) {
      plunge = std::move(first);
      engine_holds_parent = true;
    }
  }

  best.stats.nodes = nodes;
  best.stats.simplex_iterations = eng.iterations();
  best.stats.refactorizations = eng.refactorizations();
  best.stats.seconds = std::chrono::duration<double>(clock::now() - t0).count();
  if (root_unbounded) {
    best.status = Status::Unbounded;
    return best;
  }
  global_bound = incumbent;
  if (limit_hit) {
    double b = incumbent;
    if (plunge) b = std::min(b, plunge->bound);
    while (!open.empty()) {
      b = std::min(b, open.top().bound);
      open.pop();
    }
    global_bound = b;
  }
  if (best.has_incumbent) {
    best.objective = model.evaluate_objective(best.values);
    best.status = limit_hit ? limit_status : Status::Optimal;
  } else {
    best.status = limit_hit ? limit_status : Status::Infeasible;
  }
  best.bound = sign * global_bound;
  return best;
}

}  // namespace tsodso::milp
