#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "tsodso/milp/simplex.hpp"
#include "tsodso/model_core.hpp"
#include "tsodso/strategy.hpp"

namespace tsodso {

struct DamResult {
  std::vector<double> dispatch;       // g_u
  double price = 0.0;                 // λ
  std::vector<double> capacity_dual;  // ν_u
  double objective = 0.0;             // Σ b_u g_u
  std::vector<double> bids;           // b_u used for the clearing
};

/// Which lower-level problem an AsmResult comes from.
enum class AsmMarket { Common, Distribution, TransmissionB, TransmissionC };

inline const char* to_string(AsmMarket m) {
  switch (m) {
    case AsmMarket::Common: return "common";
    case AsmMarket::Distribution: return "distribution";
    case AsmMarket::TransmissionB: return "transmission-B";
    case AsmMarket::TransmissionC: return "transmission-C";
  }
  return "?";
}

struct AsmResult {
  AsmMarket market = AsmMarket::Common;
  Market family = Market::Asm;  // bid family priced in this market
  int subsystem = kTransmission;  // k for D_k markets
  std::size_t scenario = 0;
  double imbalance = 0.0;  // right-hand side of the balance row

  // primal, indexed like case.units / loads / renewables (0 when not participating)
  std::vector<double> up, down, curtail, spill;
  // duals
  double balance_dual = 0.0;                               // α
  std::vector<double> up_dual, down_dual, curtail_dual, spill_dual;  // β, φ, γ, χ
  std::vector<double> flow_dual;                           // μ, indexed like network.lines
  std::vector<double> flow;                                // post-ASM flow on the market's lines
  std::vector<bool> unit_in, load_in, renewable_in, line_in;
  double objective = 0.0;
  double dual_objective = 0.0;
};

namespace clearing_detail {

enum class Col { Up, Down, Curtail, Spill };

struct Column {
  Col kind;
  std::size_t index;
  double price;
  double upper;
  double sign;  // +1 raises injection, -1 lowers it
  std::size_t node_pos;
};

struct AsmSpec {
  AsmMarket market;
  Market family;
  int subsystem;
  std::size_t scenario;
  double imbalance;
  std::vector<Column> cols;
  std::vector<std::size_t> lines;
  std::vector<double> base_injection;  // per node position, pre-ASM
  std::vector<bool> node_in;           // nodes whose injections enter the flow sums
};

inline double clamp0(double v) { return v < 0.0 ? 0.0 : v; }

/// Nodal injections after the DAM with realized loads/renewables for scenario s.
inline std::vector<double> base_injection(const MarketCase& c, const DamResult& dam, std::size_t s) {
  std::vector<double> inj(c.network.nodes.size(), 0.0);
  for (std::size_t u = 0; u < c.units.size(); ++u) inj[c.network.node_index(c.units[u].node)] += dam.dispatch[u];
  for (const auto& r : c.renewables) inj[c.network.node_index(r.node)] += r.realized.at(s);
  for (const auto& l : c.loads) inj[c.network.node_index(l.node)] -= l.realized.at(s);
  return inj;
}

/// Adds the ASM re-dispatch of an already cleared market to nodal injections.
inline void add_redispatch(const MarketCase& c, const AsmResult& r, std::vector<double>& inj) {
  for (std::size_t u = 0; u < c.units.size(); ++u)
    inj[c.network.node_index(c.units[u].node)] += r.up[u] - r.down[u];
  for (std::size_t n = 0; n < c.loads.size(); ++n) inj[c.network.node_index(c.loads[n].node)] += r.curtail[n];
  for (std::size_t k = 0; k < c.renewables.size(); ++k)
    inj[c.network.node_index(c.renewables[k].node)] -= r.spill[k];
}

inline AsmResult solve_spec(const MarketCase& c, const AsmSpec& spec) {
  using namespace milp;
  const auto& net = c.network;
  MilpModel m;
  std::vector<Term> obj, bal;
  for (std::size_t j = 0; j < spec.cols.size(); ++j) {
    const auto& col = spec.cols[j];
    m.add_variable("q" + std::to_string(j), 0.0, clamp0(col.upper));
    obj.push_back({j, col.price});
    bal.push_back({j, col.sign});
  }
  m.add_constraint("balance", bal, Sense::Equal, spec.imbalance);
  std::vector<double> base_flow(spec.lines.size(), 0.0);
  for (std::size_t k = 0; k < spec.lines.size(); ++k) {
    std::size_t l = spec.lines[k];
    double f = 0.0;
    for (std::size_t p = 0; p < net.nodes.size(); ++p)
      if (spec.node_in[p]) f += net.ptdf[l][p] * spec.base_injection[p];
    base_flow[k] = f;
    std::vector<Term> t;
    for (std::size_t j = 0; j < spec.cols.size(); ++j) {
      const auto& col = spec.cols[j];
      double h = net.ptdf[l][col.node_pos];
      if (h != 0.0 && spec.node_in[col.node_pos]) t.push_back({j, h * col.sign});
    }
    m.add_constraint("flow_" + net.lines[l].id, t, Sense::LessEqual, net.lines[l].limit - f);
  }
  m.set_objective(ObjSense::Minimize, obj);
  auto sol = solve_lp(m);

  auto where = [&]() {
    std::string w = spec.market == AsmMarket::Distribution ? "distribution network D" + std::to_string(spec.subsystem)
                    : spec.market == AsmMarket::Common     ? "whole system"
                                                           : "transmission network";
    return w + ", scenario " + c.scenarios[spec.scenario].id;
  };
  if (sol.status == Status::Infeasible)
    throw Error(ErrorCode::Infeasible, "ancillary services market infeasible (" + where() + ")");
  if (!sol.optimal())
    throw Error(ErrorCode::SolverFailure, std::string("ASM LP ended with status ") + to_string(sol.status) + " (" + where() + ")");

  AsmResult r;
  r.market = spec.market;
  r.family = spec.family;
  r.subsystem = spec.subsystem;
  r.scenario = spec.scenario;
  r.imbalance = spec.imbalance;
  const std::size_t U = c.units.size(), N = c.loads.size(), R = c.renewables.size(), L = net.lines.size();
  r.up.assign(U, 0.0);
  r.down.assign(U, 0.0);
  r.curtail.assign(N, 0.0);
  r.spill.assign(R, 0.0);
  r.up_dual.assign(U, 0.0);
  r.down_dual.assign(U, 0.0);
  r.curtail_dual.assign(N, 0.0);
  r.spill_dual.assign(R, 0.0);
  r.flow_dual.assign(L, 0.0);
  r.flow.assign(L, 0.0);
  r.unit_in.assign(U, false);
  r.load_in.assign(N, false);
  r.renewable_in.assign(R, false);
  r.line_in.assign(L, false);
  r.balance_dual = sol.row_duals[0];
  r.objective = sol.objective;
  r.dual_objective = r.balance_dual * spec.imbalance;
  for (std::size_t j = 0; j < spec.cols.size(); ++j) {
    const auto& col = spec.cols[j];
    double q = sol.values[j];
    double bound_dual = std::max(0.0, -sol.reduced_costs[j]);
    r.dual_objective -= bound_dual * clamp0(col.upper);
    switch (col.kind) {
      case Col::Up:
        r.up[col.index] = q;
        r.up_dual[col.index] = bound_dual;
        r.unit_in[col.index] = true;
        break;
      case Col::Down:
        r.down[col.index] = q;
        r.down_dual[col.index] = bound_dual;
        r.unit_in[col.index] = true;
        break;
      case Col::Curtail:
        r.curtail[col.index] = q;
        r.curtail_dual[col.index] = bound_dual;
        r.load_in[col.index] = true;
        break;
      case Col::Spill:
        r.spill[col.index] = q;
        r.spill_dual[col.index] = bound_dual;
        r.renewable_in[col.index] = true;
        break;
    }
  }
  for (std::size_t k = 0; k < spec.lines.size(); ++k) {
    std::size_t l = spec.lines[k];
    double mu = std::max(0.0, -sol.row_duals[1 + k]);
    r.flow_dual[l] = mu;
    r.line_in[l] = true;
    r.dual_objective -= mu * (net.lines[l].limit - base_flow[k]);
    double f = base_flow[k];
    for (std::size_t j = 0; j < spec.cols.size(); ++j) {
      const auto& col = spec.cols[j];
      if (spec.node_in[col.node_pos]) f += net.ptdf[l][col.node_pos] * col.sign * sol.values[j];
    }
    r.flow[l] = f;
  }
  return r;
}

inline void require_price(double p, const MarketCase& c, const std::string& res, const char* what) {
  if (std::isnan(p))
    throw Error(ErrorCode::InvalidInput, std::string("missing ") + what + " bid for '" + res + "'");
  (void)c;
}

/// Columns of the units/loads/renewables in subsystem filter `in_sub`.
template <class InSub>
void add_columns(const MarketCase& c, const DamResult& dam, const AsmPrices& p, std::size_t s, InSub in_sub,
                 std::vector<Column>& cols) {
  const auto& net = c.network;
  for (std::size_t u = 0; u < c.units.size(); ++u) {
    if (!in_sub(c.unit_subsystem(u))) continue;
    require_price(p.up[u], c, c.units[u].id, "up-regulation");
    require_price(p.down[u], c, c.units[u].id, "down-regulation");
    std::size_t pos = net.node_index(c.units[u].node);
    cols.push_back({Col::Up, u, p.up[u], c.units[u].capacity - dam.dispatch[u], 1.0, pos});
    cols.push_back({Col::Down, u, -p.down[u], dam.dispatch[u], -1.0, pos});
  }
  for (std::size_t n = 0; n < c.loads.size(); ++n) {
    if (!c.loads[n].flexible() || !in_sub(c.load_subsystem(n))) continue;
    require_price(p.curtail[n], c, c.loads[n].id, "curtailment");
    cols.push_back({Col::Curtail, n, p.curtail[n], c.loads[n].curtailable(s), 1.0, net.node_index(c.loads[n].node)});
  }
  for (std::size_t r = 0; r < c.renewables.size(); ++r) {
    if (!in_sub(c.renewable_subsystem(r))) continue;
    cols.push_back({Col::Spill, r, 0.0, c.renewables[r].realized.at(s), -1.0, net.node_index(c.renewables[r].node)});
  }
}

inline std::vector<std::size_t> lines_of(const MarketCase& c, int sub) {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < c.network.lines.size(); ++l)
    if (c.network.lines[l].subsystem == sub) out.push_back(l);
  return out;
}

}  // namespace clearing_detail

/// Pay-as-clear day-ahead market. `bids` is indexed like case.units.
inline DamResult clear_dam(const MarketCase& c, const std::vector<double>& bids) {
  using namespace milp;
  const std::size_t U = c.units.size();
  if (bids.size() != U) throw Error(ErrorCode::InvalidInput, "DAM bid vector size differs from unit count");
  for (std::size_t u = 0; u < U; ++u)
    if (std::isnan(bids[u])) throw Error(ErrorCode::InvalidInput, "missing DAM bid for '" + c.units[u].id + "'");
  const double load = net_load(c);
  double cap = 0.0;
  for (const auto& u : c.units) cap += u.capacity;
  if (load < -1e-9 || load > cap + 1e-9)
    throw Error(ErrorCode::Infeasible, "day-ahead market infeasible: net load " + std::to_string(load) +
                                           " outside [0, total capacity " + std::to_string(cap) + "]");
  MilpModel m;
  std::vector<Term> obj, bal;
  for (std::size_t u = 0; u < U; ++u) {
    m.add_variable("g_" + c.units[u].id, 0.0, c.units[u].capacity);
    obj.push_back({u, bids[u]});
    bal.push_back({u, 1.0});
  }
  m.add_constraint("balance", bal, Sense::Equal, load);
  m.set_objective(ObjSense::Minimize, obj);
  auto sol = solve_lp(m);
  if (!sol.optimal())
    throw Error(ErrorCode::SolverFailure, std::string("DAM LP ended with status ") + to_string(sol.status));

  DamResult r;
  r.bids = bids;
  r.dispatch = sol.values;
  // Tied bids share their block's quantity in unit order.
  std::vector<bool> done(U, false);
  for (std::size_t u = 0; u < U; ++u) {
    if (done[u]) continue;
    double total = 0.0;
    std::vector<std::size_t> group;
    for (std::size_t v = u; v < U; ++v)
      if (!done[v] && bids[v] == bids[u]) {
        group.push_back(v);
        total += r.dispatch[v];
        done[v] = true;
      }
    for (std::size_t v : group) {
      double g = std::min(total, c.units[v].capacity);
      r.dispatch[v] = g;
      total -= g;
    }
  }
  const double tol = 1e-9;
  bool any = false;
  double lambda = 0.0;
  for (std::size_t u = 0; u < U; ++u) {
    if (r.dispatch[u] < tol) r.dispatch[u] = 0.0;
    if (r.dispatch[u] > c.units[u].capacity - tol) r.dispatch[u] = c.units[u].capacity;
    if (r.dispatch[u] > 0.0) {
      lambda = any ? std::max(lambda, bids[u]) : bids[u];
      any = true;
    }
  }
  // With nothing dispatched the balance dual is whatever the LP reports.
  r.price = any ? lambda : sol.row_duals[0];
  r.capacity_dual.assign(U, 0.0);
  r.objective = 0.0;
  for (std::size_t u = 0; u < U; ++u) {
    if (r.dispatch[u] >= c.units[u].capacity && c.units[u].capacity > 0.0)
      r.capacity_dual[u] = std::max(0.0, r.price - bids[u]);
    r.objective += bids[u] * r.dispatch[u];
  }
  return r;
}

inline DamResult clear_dam(const MarketCase& c, const std::map<std::string, double>& bids) {
  std::vector<double> b(c.units.size(), std::nan(""));
  for (const auto& [id, price] : bids) b[c.unit_index(id)] = price;
  return clear_dam(c, b);
}

inline DamResult clear_dam(const MarketCase& c, const StrategyProfile& p) { return clear_dam(c, dam_prices(c, p)); }

/// Scheme A: one ASM over all resources and all lines.
inline AsmResult clear_asm_common(const MarketCase& c, const DamResult& dam, const AsmPrices& p, std::size_t s) {
  using namespace clearing_detail;
  AsmSpec spec{AsmMarket::Common, Market::Asm, kTransmission, s, compute_imbalances(c, s).total, {}, {}, {}, {}};
  add_columns(c, dam, p, s, [](int) { return true; }, spec.cols);
  for (std::size_t l = 0; l < c.network.lines.size(); ++l) spec.lines.push_back(l);
  spec.base_injection = base_injection(c, dam, s);
  spec.node_in.assign(c.network.nodes.size(), true);
  return solve_spec(c, spec);
}

/// Distribution ASM of D_k (schemes B and C): D_k resources, D_k lines, Δ^{D_k}.
inline AsmResult clear_asm_distribution(const MarketCase& c, const DamResult& dam, const AsmPrices& p, std::size_t s,
                                        int k, Market family = Market::Asm) {
  using namespace clearing_detail;
  if (k < 1 || k > c.network.distribution_count())
    throw Error(ErrorCode::InvalidInput, "unknown distribution network " + std::to_string(k));
  auto im = compute_imbalances(c, s);
  AsmSpec spec{AsmMarket::Distribution, family, k, s, im.distribution[static_cast<std::size_t>(k - 1)], {}, {}, {}, {}};
  add_columns(c, dam, p, s, [k](int sub) { return sub == k; }, spec.cols);
  spec.lines = lines_of(c, k);
  spec.base_injection = base_injection(c, dam, s);
  spec.node_in.resize(c.network.nodes.size());
  for (std::size_t j = 0; j < c.network.nodes.size(); ++j) spec.node_in[j] = c.network.nodes[j].subsystem == k;
  return solve_spec(c, spec);
}

/// Scheme B transmission ASM: T resources only, balance on Δ^T, flows on L^T with
/// all-node injections (distribution re-dispatch from `dist`).
inline AsmResult clear_asm_transmission_B(const MarketCase& c, const DamResult& dam, const AsmPrices& p,
                                          std::size_t s, const std::vector<AsmResult>& dist) {
  using namespace clearing_detail;
  AsmSpec spec{AsmMarket::TransmissionB, Market::Asm, kTransmission, s, compute_imbalances(c, s).transmission, {}, {}, {}, {}};
  add_columns(c, dam, p, s, [](int sub) { return sub == kTransmission; }, spec.cols);
  spec.lines = lines_of(c, kTransmission);
  spec.base_injection = base_injection(c, dam, s);
  for (const auto& d : dist) add_redispatch(c, d, spec.base_injection);
  spec.node_in.assign(c.network.nodes.size(), true);
  return solve_spec(c, spec);
}

/// Scheme C transmission ASM: every resource offers what the distribution market
/// left over (residual bounds), balance on Δ^T, flows on L^T.
inline AsmResult clear_asm_transmission_C(const MarketCase& c, const DamResult& dam, const std::vector<AsmResult>& dist,
                                          const AsmPrices& p, std::size_t s) {
  using namespace clearing_detail;
  const auto& net = c.network;
  const int K = net.distribution_count();
  if (static_cast<int>(dist.size()) != K)
    throw Error(ErrorCode::InvalidInput, "scheme C transmission clearing needs one distribution result per network");
  std::vector<double> dup(c.units.size(), 0.0), ddown(c.units.size(), 0.0), dcurt(c.loads.size(), 0.0),
      dspill(c.renewables.size(), 0.0);
  for (const auto& d : dist) {
    for (std::size_t u = 0; u < c.units.size(); ++u) {
      dup[u] += d.up[u];
      ddown[u] += d.down[u];
    }
    for (std::size_t n = 0; n < c.loads.size(); ++n) dcurt[n] += d.curtail[n];
    for (std::size_t r = 0; r < c.renewables.size(); ++r) dspill[r] += d.spill[r];
  }
  AsmSpec spec{AsmMarket::TransmissionC, Market::AsmT, kTransmission, s, compute_imbalances(c, s).transmission, {}, {}, {}, {}};
  for (std::size_t u = 0; u < c.units.size(); ++u) {
    require_price(p.up[u], c, c.units[u].id, "T-market up-regulation");
    require_price(p.down[u], c, c.units[u].id, "T-market down-regulation");
    std::size_t pos = net.node_index(c.units[u].node);
    double g = dam.dispatch[u] + dup[u] - ddown[u];
    spec.cols.push_back({Col::Up, u, p.up[u], c.units[u].capacity - g, 1.0, pos});
    spec.cols.push_back({Col::Down, u, -p.down[u], g, -1.0, pos});
  }
  for (std::size_t n = 0; n < c.loads.size(); ++n) {
    if (!c.loads[n].flexible()) continue;
    require_price(p.curtail[n], c, c.loads[n].id, "T-market curtailment");
    spec.cols.push_back({Col::Curtail, n, p.curtail[n], c.loads[n].curtailable(s) - dcurt[n], 1.0,
                         net.node_index(c.loads[n].node)});
  }
  for (std::size_t r = 0; r < c.renewables.size(); ++r)
    spec.cols.push_back({Col::Spill, r, 0.0, c.renewables[r].realized.at(s) - dspill[r], -1.0,
                         net.node_index(c.renewables[r].node)});
  spec.lines = lines_of(c, kTransmission);
  spec.base_injection = base_injection(c, dam, s);
  for (const auto& d : dist) add_redispatch(c, d, spec.base_injection);
  spec.node_in.assign(net.nodes.size(), true);
  return solve_spec(c, spec);
}

struct MarketOutcome {
  Scheme scheme = Scheme::A;
  DamResult dam;
  /// [scenario][market]: A -> {common}; B, C -> {D_1..D_K, T}.
  std::vector<std::vector<AsmResult>> asm_results;
};

/// Full clearing cascade of a scheme under a complete profile.
inline MarketOutcome clear_markets(const MarketCase& c, Scheme scheme, const StrategyProfile& profile) {
  MarketOutcome out;
  out.scheme = scheme;
  out.dam = clear_dam(c, profile);
  const int K = c.network.distribution_count();
  for (std::size_t s = 0; s < c.scenarios.size(); ++s) {
    std::vector<AsmResult> row;
    if (scheme == Scheme::A) {
      row.push_back(clear_asm_common(c, out.dam, asm_prices(c, profile, Market::Asm), s));
    } else if (scheme == Scheme::B) {
      auto p = asm_prices(c, profile, Market::Asm);
      for (int k = 1; k <= K; ++k) row.push_back(clear_asm_distribution(c, out.dam, p, s, k, Market::Asm));
      row.push_back(clear_asm_transmission_B(c, out.dam, p, s, row));
    } else {
      auto pd = asm_prices(c, profile, Market::AsmD);
      for (int k = 1; k <= K; ++k) row.push_back(clear_asm_distribution(c, out.dam, pd, s, k, Market::AsmD));
      row.push_back(clear_asm_transmission_C(c, out.dam, row, asm_prices(c, profile, Market::AsmT), s));
    }
    out.asm_results.push_back(std::move(row));
  }
  return out;
}

struct SystemCost {
  std::vector<double> per_scenario;
  double expected = 0.0;
};

inline SystemCost system_cost(const std::vector<double>& scenario_costs, const std::vector<double>& probabilities) {
  if (scenario_costs.size() != probabilities.size())
    throw Error(ErrorCode::InvalidInput, "cost and probability vectors differ in length");
  SystemCost sc{scenario_costs, 0.0};
  for (std::size_t s = 0; s < scenario_costs.size(); ++s) sc.expected += probabilities[s] * scenario_costs[s];
  return sc;
}

inline SystemCost system_cost(const MarketCase& c, const MarketOutcome& o) {
  std::vector<double> costs, prob;
  for (std::size_t s = 0; s < o.asm_results.size(); ++s) {
    double v = 0.0;
    for (const auto& r : o.asm_results[s]) v += r.objective;
    costs.push_back(v);
    prob.push_back(c.scenarios[s].probability);
  }
  return system_cost(costs, prob);
}

/// Expected profit of `agg` under the scheme's leader objective.
inline double aggregator_profit(const MarketCase& c, const std::string& agg, const MarketOutcome& o,
                                const StrategyProfile& profile) {
  const auto units = c.units_of(agg);
  const auto loads = c.flexible_loads_of(agg);
  double profit = 0.0;
  for (std::size_t u : units) profit += (o.dam.price - c.units[u].cost) * o.dam.dispatch[u];
  for (std::size_t s = 0; s < o.asm_results.size(); ++s) {
    double sigma = c.scenarios[s].probability;
    double v = 0.0;
    for (const auto& r : o.asm_results[s]) {
      for (std::size_t u : units) {
        if (!r.unit_in[u]) continue;
        BidSlot up{ResourceKind::Unit, u, BidRole::Up, r.family};
        BidSlot dn{ResourceKind::Unit, u, BidRole::Down, r.family};
        if (r.up[u] != 0.0) v += (profile.price(c, up) - c.units[u].up_cost) * r.up[u];
        if (r.down[u] != 0.0) v += (c.units[u].down_cost - profile.price(c, dn)) * r.down[u];
      }
      for (std::size_t n : loads) {
        if (!r.load_in[n] || r.curtail[n] == 0.0) continue;
        BidSlot cu{ResourceKind::Load, n, BidRole::Curtail, r.family};
        v += (profile.price(c, cu) - o.dam.price) * r.curtail[n];
      }
    }
    profit += sigma * v;
  }
  return profit;
}

}  // namespace tsodso
