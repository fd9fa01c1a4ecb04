#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tsodso/market_clearing.hpp"
#include "tsodso/milp_kernel.hpp"
#include "tsodso/strategy.hpp"

namespace tsodso {

inline constexpr std::size_t kNoVar = std::numeric_limits<std::size_t>::max();

/// constant + Σ coef·var over upper-level variables.
struct AffineExpr {
  double constant = 0.0;
  std::vector<milp::Term> terms;
  bool is_constant() const { return terms.empty(); }
};

// ------------------------------------------------------------ generic KKT writer

/// min Σ price_j q_j  s.t. rows (= or <=), 0 <= q_j <= upper_j.
/// Prices, bounds and right-hand sides may depend on upper-level variables.
struct LowerColumn {
  std::string name;
  AffineExpr price;
  AffineExpr upper;
};

struct LowerRow {
  std::string name;
  std::vector<std::pair<std::size_t, double>> coefs;  // column index, coefficient
  milp::Sense sense = milp::Sense::Equal;             // Equal or LessEqual
  AffineExpr rhs;
};

struct LowerLp {
  std::vector<LowerColumn> cols;
  std::vector<LowerRow> rows;
};

struct KktBlock {
  std::vector<std::size_t> primal;       // q_j (fixed at 0 when its bound is identically 0)
  std::vector<std::size_t> reduced;      // r_j >= 0, kNoVar when the column was dropped
  std::vector<std::size_t> bound_dual;   // multiplier of q_j <= upper_j
  std::vector<std::size_t> bound_slack;  // upper_j - q_j
  std::vector<std::size_t> row_dual;     // free for equalities, >= 0 for <= rows
  std::vector<std::size_t> row_slack;    // kNoVar for equalities
  std::size_t pairs = 0;
};

/// Primal feasibility, stationarity, dual feasibility and complementarity of a
/// LowerLp, complementarity as SOS1 pairs of nonnegative variables.
inline KktBlock write_kkt(milp::MilpModel& m, const LowerLp& lp, const std::string& prefix) {
  using namespace milp;
  KktBlock k;
  const std::size_t n = lp.cols.size();
  k.primal.assign(n, kNoVar);
  k.reduced.assign(n, kNoVar);
  k.bound_dual.assign(n, kNoVar);
  k.bound_slack.assign(n, kNoVar);
  std::vector<bool> dropped(n, false);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& col = lp.cols[j];
    // presolve: a bound that is identically zero fixes q and removes its pairs
    dropped[j] = col.upper.is_constant() && col.upper.constant <= 0.0;
    double ub = dropped[j] ? 0.0 : (col.upper.is_constant() ? col.upper.constant : kInf);
    k.primal[j] = m.add_variable(prefix + "q[" + col.name + "]", 0.0, ub, VarKind::Continuous, "primal");
  }
  for (const auto& row : lp.rows) {
    bool eq = row.sense == Sense::Equal;
    k.row_dual.push_back(m.add_variable(prefix + (eq ? "alpha[" : "mu[") + row.name + "]", eq ? -kInf : 0.0, kInf,
                                        VarKind::Continuous, "dual"));
    std::vector<Term> t;
    for (const auto& [j, a] : row.coefs) t.push_back({k.primal[j], a});
    for (const auto& rt : row.rhs.terms) t.push_back({rt.var, -rt.coef});
    if (eq) {
      k.row_slack.push_back(kNoVar);
    } else {
      std::size_t s = m.add_variable(prefix + "slack[" + row.name + "]", 0.0, kInf, VarKind::Continuous, "slack");
      k.row_slack.push_back(s);
      t.push_back({s, 1.0});
      m.add_sos1(prefix + "cs[" + row.name + "]", {k.row_dual.back(), s});
      ++k.pairs;
    }
    m.add_constraint(prefix + "row[" + row.name + "]", t, Sense::Equal, row.rhs.constant, "primal");
  }
  // column -> rows it appears in
  std::vector<std::vector<std::pair<std::size_t, double>>> rows_of(n);
  for (std::size_t i = 0; i < lp.rows.size(); ++i)
    for (const auto& [j, a] : lp.rows[i].coefs) rows_of[j].push_back({i, a});
  for (std::size_t j = 0; j < n; ++j) {
    if (dropped[j]) continue;
    const auto& col = lp.cols[j];
    const std::string nm = col.name;
    std::size_t beta = m.add_variable(prefix + "beta[" + nm + "]", 0.0, kInf, VarKind::Continuous, "dual");
    std::size_t su = m.add_variable(prefix + "bslack[" + nm + "]", 0.0, kInf, VarKind::Continuous, "slack");
    k.bound_dual[j] = beta;
    k.bound_slack[j] = su;
    std::vector<Term> bt{{su, 1.0}, {k.primal[j], 1.0}};
    for (const auto& ut : col.upper.terms) bt.push_back({ut.var, -ut.coef});
    m.add_constraint(prefix + "bound[" + nm + "]", bt, Sense::Equal, col.upper.constant, "primal");
    m.add_sos1(prefix + "cs_bound[" + nm + "]", {beta, su});

    // r = price + beta - Σ_eq a·alpha + Σ_le a·mu >= 0
    std::size_t r = m.add_variable(prefix + "rc[" + nm + "]", 0.0, kInf, VarKind::Continuous, "dual");
    k.reduced[j] = r;
    std::vector<Term> st{{r, 1.0}, {beta, -1.0}};
    for (const auto& [i, a] : rows_of[j]) {
      double s = lp.rows[i].sense == Sense::Equal ? a : -a;
      st.push_back({k.row_dual[i], s});
    }
    for (const auto& pt : col.price.terms) st.push_back({pt.var, -pt.coef});
    m.add_constraint(prefix + "stat[" + nm + "]", st, Sense::Equal, col.price.constant, "stationarity");
    m.add_sos1(prefix + "cs_primal[" + nm + "]", {k.primal[j], r});
    k.pairs += 2;
  }
  return k;
}

// ------------------------------------------------------------ linearization helpers

/// Σ_a price_a·x_a·q as Σ_a price_a·Z_a with Z_a = x_a·q enforced by
/// q − M(1−x_a) <= Z_a <= q, 0 <= Z_a <= M·x_a. Requires 0 <= q <= M.
inline std::vector<milp::Term> linearize_price_times_quantity(milp::MilpModel& m, const std::vector<std::size_t>& x,
                                                              const std::vector<double>& prices, std::size_t q,
                                                              double bound, const std::string& name) {
  using namespace milp;
  if (!std::isfinite(bound) || bound < 0.0)
    throw Error(ErrorCode::InvalidInput, "McCormick bound for '" + name + "' must be finite and nonnegative");
  std::vector<Term> out;
  std::vector<Term> sum{{q, -1.0}};
  for (std::size_t a = 0; a < x.size(); ++a) {
    std::string zn = name + "[" + std::to_string(a) + "]";
    std::size_t z = m.add_variable("XP_" + zn, 0.0, bound, VarKind::Continuous, "mccormick");
    m.add_constraint("mc_ub_q_" + zn, {{z, 1.0}, {q, -1.0}}, Sense::LessEqual, 0.0, "mccormick");
    m.add_constraint("mc_lb_" + zn, {{z, 1.0}, {q, -1.0}, {x[a], -bound}}, Sense::GreaterEqual, -bound, "mccormick");
    m.add_constraint("mc_ub_x_" + zn, {{z, 1.0}, {x[a], -bound}}, Sense::LessEqual, 0.0, "mccormick");
    out.push_back({z, prices[a]});
    sum.push_back({z, 1.0});
  }
  // Σ_a x_a = 1 makes Σ_a Z_a = q valid; it tightens the relaxation
  if (!x.empty()) m.add_constraint("mc_sum_" + name, sum, Sense::Equal, 0.0, "mccormick");
  return out;
}

/// λ·g_u for a DAM unit through the KKT identities λ g = b g + ν g and ν g = ν G.
inline std::vector<milp::Term> linearize_dam_revenue(milp::MilpModel& m, const std::vector<std::size_t>& x,
                                                     const std::vector<double>& prices, std::size_t g,
                                                     std::size_t nu, double capacity, const std::string& name) {
  auto t = linearize_price_times_quantity(m, x, prices, g, capacity, "dam_" + name);
  if (nu != kNoVar) t.push_back({nu, capacity});
  return t;
}

struct PriceGrid {
  std::vector<double> prices;
  std::vector<std::size_t> select;  // y binaries
};

/// λ = Σ_k price_k y_k, Σ y = 1, linked to the dual λ by equality.
inline PriceGrid discretize_lambda(milp::MilpModel& m, std::vector<double> candidates, std::size_t lambda) {
  using namespace milp;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  PriceGrid g;
  g.prices = candidates;
  std::vector<Term> one, link{{lambda, -1.0}};
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    std::size_t y = m.add_binary("y[" + std::to_string(k) + "]", "price-grid");
    g.select.push_back(y);
    one.push_back({y, 1.0});
    link.push_back({y, candidates[k]});
  }
  m.add_constraint("grid_one", one, Sense::Equal, 1.0, "price-grid");
  m.add_constraint("grid_link", link, Sense::Equal, 0.0, "price-grid");
  return g;
}

// ------------------------------------------------------------ MPEC assembly

struct AsmColumnRef {
  clearing_detail::Col kind;
  std::size_t index;  // unit, load or renewable index
  double sign;
  std::optional<BidSlot> slot;  // bid slot priced in this market (none for spill)
};

struct AsmBlock {
  AsmMarket market = AsmMarket::Common;
  Market family = Market::Asm;
  int subsystem = kTransmission;
  std::size_t scenario = 0;
  double imbalance = 0.0;
  std::vector<std::size_t> lines;
  std::vector<AsmColumnRef> cols;
  KktBlock kkt;
};

struct DamBlock {
  std::vector<std::size_t> dispatch;
  std::vector<std::size_t> capacity_dual;  // kNoVar for zero-capacity units
  std::size_t price = kNoVar;
  PriceGrid grid;
  KktBlock kkt;
};

/// Z_a = x_a·q blocks created by the linearization, kept for warm starts.
struct ProductBlock {
  std::vector<std::size_t> select;
  std::vector<std::size_t> z;
  std::size_t quantity = kNoVar;
};

struct MpecInstance {
  milp::MilpModel model;
  Scheme scheme = Scheme::A;
  std::string aggregator;
  StrategyProfile rivals;
  std::vector<BidSlot> own_slots;
  std::vector<std::vector<std::size_t>> selection;  // x binaries per own slot
  DamBlock dam;
  std::vector<std::vector<AsmBlock>> asm_blocks;  // [scenario][market], same order as clear_markets
  std::vector<milp::Term> profit;                 // linearized objective
  std::vector<ProductBlock> products;
};

struct MpecOptions {
  bool fix_own = false;           // fix the leader binaries at the profile's own choices
  bool feasibility_only = false;  // leave the objective empty (any KKT point will do)
};

namespace mpec_detail {

inline std::string col_name(const MarketCase& c, const AsmColumnRef& r) {
  using clearing_detail::Col;
  switch (r.kind) {
    case Col::Up: return c.units[r.index].id + ".up";
    case Col::Down: return c.units[r.index].id + ".down";
    case Col::Curtail: return c.loads[r.index].id + ".curtail";
    case Col::Spill: return c.renewables[r.index].id + ".spill";
  }
  return "?";
}

}  // namespace mpec_detail

/// Single-level program of `agg`'s best response with every rival bid fixed at `profile`.
inline MpecInstance build_mpec(const MarketCase& c, Scheme scheme, const std::string& agg,
                               const StrategyProfile& profile, const MpecOptions& opt = {}) {
  using namespace milp;
  using clearing_detail::Col;
  const auto& net = c.network;
  if (scheme != Scheme::A && scheme != Scheme::B && scheme != Scheme::C)
    throw Error(ErrorCode::InvalidInput, "unsupported scheme tag");
  c.aggregator_index(agg);

  MpecInstance inst;
  inst.scheme = scheme;
  inst.aggregator = agg;
  auto& m = inst.model;
  m.set_name("mpec_" + agg + "_" + to_string(scheme));

  // leader binaries
  inst.own_slots = owned_slots(c, scheme, agg);
  std::map<BidSlot, std::size_t> own_pos;
  for (std::size_t k = 0; k < inst.own_slots.size(); ++k) {
    const auto& s = inst.own_slots[k];
    own_pos[s] = k;
    const auto& lad = slot_ladder(c, s);
    std::vector<std::size_t> xs;
    std::vector<Term> one;
    std::size_t fixed = opt.fix_own ? profile.choice(s) : kNoVar;
    for (std::size_t a = 0; a < lad.prices.size(); ++a) {
      std::size_t x = m.add_binary("x[" + slot_label(c, s) + "#" + std::to_string(a) + "]", "selection");
      if (fixed != kNoVar) m.set_bounds(x, a == fixed ? 1.0 : 0.0, a == fixed ? 1.0 : 0.0);
      xs.push_back(x);
      one.push_back({x, 1.0});
    }
    m.add_constraint("select[" + slot_label(c, s) + "]", one, Sense::Equal, 1.0, "selection");
    inst.selection.push_back(std::move(xs));
  }
  for (const auto& s : all_slots(c, scheme)) {
    if (own_pos.count(s)) continue;
    if (!profile.has(s)) throw Error(ErrorCode::InvalidInput, "missing rival price for " + slot_label(c, s));
    inst.rivals.set(s, profile.choice(s));
  }
  // price of a slot: Σ B x for own slots, constant for rivals
  auto price_expr = [&](const BidSlot& s, double sgn) {
    AffineExpr e;
    auto it = own_pos.find(s);
    if (it == own_pos.end()) {
      e.constant = sgn * inst.rivals.price(c, s);
      return e;
    }
    const auto& lad = slot_ladder(c, s);
    for (std::size_t a = 0; a < lad.prices.size(); ++a) e.terms.push_back({inst.selection[it->second][a], sgn * lad.prices[a]});
    return e;
  };
  auto own_choice = [&](const BidSlot& s) -> const std::vector<std::size_t>* {
    auto it = own_pos.find(s);
    return it == own_pos.end() ? nullptr : &inst.selection[it->second];
  };

  // ---------------- DAM
  const std::size_t U = c.units.size();
  LowerLp dam;
  std::vector<double> grid;
  double bid_hi = -kInf, bid_lo = kInf;
  std::vector<double> unit_min_bid(U, kInf);
  for (std::size_t u = 0; u < U; ++u) {
    BidSlot s{ResourceKind::Unit, u, BidRole::DamSale, Market::Dam};
    LowerColumn col{c.units[u].id, price_expr(s, 1.0), {c.units[u].capacity, {}}};
    if (own_pos.count(s)) {
      for (double p : slot_ladder(c, s).prices) {
        grid.push_back(p);
        unit_min_bid[u] = std::min(unit_min_bid[u], p);
      }
    } else {
      grid.push_back(col.price.constant);
      unit_min_bid[u] = col.price.constant;
    }
    dam.cols.push_back(std::move(col));
  }
  for (double p : grid) {
    bid_hi = std::max(bid_hi, p);
    bid_lo = std::min(bid_lo, p);
  }
  {
    LowerRow bal{"balance", {}, Sense::Equal, {net_load(c), {}}};
    for (std::size_t u = 0; u < U; ++u) bal.coefs.push_back({u, 1.0});
    dam.rows.push_back(std::move(bal));
  }
  inst.dam.kkt = write_kkt(m, dam, "dam.");
  inst.dam.dispatch = inst.dam.kkt.primal;
  inst.dam.capacity_dual = inst.dam.kkt.bound_dual;
  inst.dam.price = inst.dam.kkt.row_dual[0];
  m.set_bounds(inst.dam.price, bid_lo, bid_hi);
  for (std::size_t u = 0; u < U; ++u)
    if (inst.dam.capacity_dual[u] != kNoVar) m.set_bounds(inst.dam.capacity_dual[u], 0.0, bid_hi - unit_min_bid[u]);
  inst.dam.grid = discretize_lambda(m, grid, inst.dam.price);

  auto record = [&](const std::vector<std::size_t>& x, std::size_t q, const std::vector<Term>& t) {
    ProductBlock pb{x, {}, q};
    for (std::size_t a = 0; a < x.size(); ++a) pb.z.push_back(t[a].var);
    inst.products.push_back(std::move(pb));
  };
  std::vector<Term> obj;
  for (std::size_t u : c.units_of(agg)) {
    BidSlot s{ResourceKind::Unit, u, BidRole::DamSale, Market::Dam};
    const auto& lad = slot_ladder(c, s);
    auto t = linearize_dam_revenue(m, *own_choice(s), lad.prices, inst.dam.dispatch[u], inst.dam.capacity_dual[u],
                                   c.units[u].capacity, c.units[u].id);
    record(*own_choice(s), inst.dam.dispatch[u], t);
    obj.insert(obj.end(), t.begin(), t.end());
    obj.push_back({inst.dam.dispatch[u], -c.units[u].cost});
  }
  // DAM strong duality Σ b g = λ·NL − Σ ν G is linear here: own bids go through
  // the products, rival bids are constants. Valid, and it tightens relaxations.
  {
    std::vector<Term> sd{{inst.dam.price, -net_load(c)}};
    std::vector<bool> own_unit(U, false);
    for (const auto& pb : inst.products) {
      for (std::size_t u = 0; u < U; ++u)
        if (pb.quantity == inst.dam.dispatch[u]) {
          own_unit[u] = true;
          const auto& lad = slot_ladder(c, {ResourceKind::Unit, u, BidRole::DamSale, Market::Dam});
          for (std::size_t a = 0; a < pb.z.size(); ++a) sd.push_back({pb.z[a], lad.prices[a]});
        }
    }
    for (std::size_t u = 0; u < U; ++u) {
      if (!own_unit[u]) sd.push_back({inst.dam.dispatch[u], dam.cols[u].price.constant});
      if (inst.dam.capacity_dual[u] != kNoVar) sd.push_back({inst.dam.capacity_dual[u], c.units[u].capacity});
    }
    m.add_constraint("dam_strong_duality", sd, Sense::Equal, 0.0, "strong-duality");
  }

  // ---------------- ASM blocks
  const int K = net.distribution_count();
  std::vector<std::size_t> gvar = inst.dam.dispatch;
  auto unit_owned = [&](std::size_t u) { return c.units[u].owner == agg; };
  auto load_owned = [&](std::size_t n) { return c.loads[n].flexible() && c.loads[n].owner == agg; };

  for (std::size_t s = 0; s < c.scenarios.size(); ++s) {
    const double sigma = c.scenarios[s].probability;
    auto im = compute_imbalances(c, s);
    std::vector<AsmBlock> row;

    // nodal injection: constant part and upper-level terms
    std::vector<double> inj_const(net.nodes.size(), 0.0);
    std::vector<std::vector<Term>> inj_terms(net.nodes.size());
    for (std::size_t u = 0; u < U; ++u) inj_terms[net.node_index(c.units[u].node)].push_back({gvar[u], 1.0});
    for (const auto& r : c.renewables) inj_const[net.node_index(r.node)] += r.realized.at(s);
    for (const auto& l : c.loads) inj_const[net.node_index(l.node)] -= l.realized.at(s);

    // D-market quantities feeding later blocks (scheme C residual bounds)
    std::vector<std::size_t> d_up(U, kNoVar), d_down(U, kNoVar), d_curt(c.loads.size(), kNoVar),
        d_spill(c.renewables.size(), kNoVar);

    auto make_block = [&](AsmMarket market, Market family, int sub, double imbalance, auto in_scope,
                          const std::vector<bool>& node_in, bool residual) {
      AsmBlock b;
      b.market = market;
      b.family = family;
      b.subsystem = sub;
      b.scenario = s;
      b.imbalance = imbalance;
      LowerLp lp;
      auto add_col = [&](AsmColumnRef ref, AffineExpr price, AffineExpr upper) {
        lp.cols.push_back({mpec_detail::col_name(c, ref), std::move(price), std::move(upper)});
        b.cols.push_back(std::move(ref));
      };
      for (std::size_t u = 0; u < U; ++u) {
        if (!in_scope(c.unit_subsystem(u))) continue;
        BidSlot su{ResourceKind::Unit, u, BidRole::Up, family};
        BidSlot sd{ResourceKind::Unit, u, BidRole::Down, family};
        AffineExpr up{c.units[u].capacity, {{gvar[u], -1.0}}};
        AffineExpr dn{0.0, {{gvar[u], 1.0}}};
        if (residual && d_up[u] != kNoVar) {
          up.terms.push_back({d_up[u], -1.0});
          up.terms.push_back({d_down[u], 1.0});
          dn.terms.push_back({d_up[u], 1.0});
          dn.terms.push_back({d_down[u], -1.0});
        }
        add_col({Col::Up, u, 1.0, su}, price_expr(su, 1.0), up);
        add_col({Col::Down, u, -1.0, sd}, price_expr(sd, -1.0), dn);
      }
      for (std::size_t n = 0; n < c.loads.size(); ++n) {
        if (!c.loads[n].flexible() || !in_scope(c.load_subsystem(n))) continue;
        BidSlot sc{ResourceKind::Load, n, BidRole::Curtail, family};
        AffineExpr ub{c.loads[n].curtailable(s), {}};
        if (residual && d_curt[n] != kNoVar) ub.terms.push_back({d_curt[n], -1.0});
        add_col({Col::Curtail, n, 1.0, sc}, price_expr(sc, 1.0), ub);
      }
      for (std::size_t r = 0; r < c.renewables.size(); ++r) {
        if (!in_scope(c.renewable_subsystem(r))) continue;
        AffineExpr ub{c.renewables[r].realized.at(s), {}};
        if (residual && d_spill[r] != kNoVar) ub.terms.push_back({d_spill[r], -1.0});
        add_col({Col::Spill, r, -1.0, std::nullopt}, AffineExpr{}, ub);
      }
      LowerRow bal{"balance", {}, Sense::Equal, {imbalance, {}}};
      for (std::size_t j = 0; j < b.cols.size(); ++j) bal.coefs.push_back({j, b.cols[j].sign});
      lp.rows.push_back(std::move(bal));
      for (std::size_t l = 0; l < net.lines.size(); ++l) {
        if (market != AsmMarket::Common && net.lines[l].subsystem != sub) continue;
        b.lines.push_back(l);
        LowerRow fr{"flow." + net.lines[l].id, {}, Sense::LessEqual, {net.lines[l].limit, {}}};
        for (std::size_t p = 0; p < net.nodes.size(); ++p) {
          if (!node_in[p] || net.ptdf[l][p] == 0.0) continue;
          double h = net.ptdf[l][p];
          fr.rhs.constant -= h * inj_const[p];
          for (const auto& t : inj_terms[p]) fr.rhs.terms.push_back({t.var, -h * t.coef});
        }
        for (std::size_t j = 0; j < b.cols.size(); ++j) {
          int node = b.cols[j].kind == Col::Curtail  ? c.loads[b.cols[j].index].node
                     : b.cols[j].kind == Col::Spill ? c.renewables[b.cols[j].index].node
                                                     : c.units[b.cols[j].index].node;
          std::size_t p = net.node_index(node);
          if (node_in[p] && net.ptdf[l][p] != 0.0) fr.coefs.push_back({j, net.ptdf[l][p] * b.cols[j].sign});
        }
        lp.rows.push_back(std::move(fr));
      }
      std::string prefix = "s" + std::to_string(s + 1) + "." +
                           (market == AsmMarket::Distribution ? "D" + std::to_string(sub)
                            : market == AsmMarket::Common     ? std::string("A")
                                                              : std::string("T")) +
                           ".";
      b.kkt = write_kkt(m, lp, prefix);

      // leader's profit in this market
      for (std::size_t j = 0; j < b.cols.size(); ++j) {
        const auto& ref = b.cols[j];
        std::size_t q = b.kkt.primal[j];
        if (m.variable(q).upper == 0.0) continue;
        if (ref.kind == Col::Up && unit_owned(ref.index)) {
          const auto& u = c.units[ref.index];
          auto t = linearize_price_times_quantity(m, *own_choice(*ref.slot), slot_ladder(c, *ref.slot).prices, q,
                                                  u.capacity, prefix + u.id + ".up");
          record(*own_choice(*ref.slot), q, t);
          for (auto& x : t) obj.push_back({x.var, sigma * x.coef});
          obj.push_back({q, -sigma * u.up_cost});
        } else if (ref.kind == Col::Down && unit_owned(ref.index)) {
          const auto& u = c.units[ref.index];
          auto t = linearize_price_times_quantity(m, *own_choice(*ref.slot), slot_ladder(c, *ref.slot).prices, q,
                                                  u.capacity, prefix + u.id + ".down");
          record(*own_choice(*ref.slot), q, t);
          for (auto& x : t) obj.push_back({x.var, -sigma * x.coef});
          obj.push_back({q, sigma * u.down_cost});
        } else if (ref.kind == Col::Curtail && load_owned(ref.index)) {
          const auto& l = c.loads[ref.index];
          double bound = l.curtailable(s);
          auto t = linearize_price_times_quantity(m, *own_choice(*ref.slot), slot_ladder(c, *ref.slot).prices, q,
                                                  bound, prefix + l.id + ".curtail");
          record(*own_choice(*ref.slot), q, t);
          for (auto& x : t) obj.push_back({x.var, sigma * x.coef});
          // λ·d through the price grid
          auto lt = linearize_price_times_quantity(m, inst.dam.grid.select, inst.dam.grid.prices, q, bound,
                                                   prefix + l.id + ".lambda");
          record(inst.dam.grid.select, q, lt);
          for (auto& x : lt) obj.push_back({x.var, -sigma * x.coef});
        }
      }
      return b;
    };

    std::vector<bool> all_nodes(net.nodes.size(), true);
    if (scheme == Scheme::A) {
      row.push_back(make_block(AsmMarket::Common, Market::Asm, kTransmission, im.total, [](int) { return true; },
                               all_nodes, false));
    } else {
      Market dfam = scheme == Scheme::B ? Market::Asm : Market::AsmD;
      for (int k = 1; k <= K; ++k) {
        std::vector<bool> dn(net.nodes.size());
        for (std::size_t p = 0; p < net.nodes.size(); ++p) dn[p] = net.nodes[p].subsystem == k;
        row.push_back(make_block(AsmMarket::Distribution, dfam, k, im.distribution[static_cast<std::size_t>(k - 1)],
                                 [k](int sub) { return sub == k; }, dn, false));
      }
      // distribution re-dispatch enters T-market injections (and residual bounds in C)
      for (const auto& b : row) {
        for (std::size_t j = 0; j < b.cols.size(); ++j) {
          const auto& ref = b.cols[j];
          std::size_t q = b.kkt.primal[j];
          int node = 0;
          switch (ref.kind) {
            case Col::Up: d_up[ref.index] = q; node = c.units[ref.index].node; break;
            case Col::Down: d_down[ref.index] = q; node = c.units[ref.index].node; break;
            case Col::Curtail: d_curt[ref.index] = q; node = c.loads[ref.index].node; break;
            case Col::Spill: d_spill[ref.index] = q; node = c.renewables[ref.index].node; break;
          }
          inj_terms[net.node_index(node)].push_back({q, ref.sign});
        }
      }
      if (scheme == Scheme::B)
        row.push_back(make_block(AsmMarket::TransmissionB, Market::Asm, kTransmission, im.transmission,
                                 [](int sub) { return sub == kTransmission; }, all_nodes, false));
      else
        row.push_back(make_block(AsmMarket::TransmissionC, Market::AsmT, kTransmission, im.transmission,
                                 [](int) { return true; }, all_nodes, true));
    }
    inst.asm_blocks.push_back(std::move(row));
  }
  inst.profit = obj;
  if (!opt.feasibility_only) m.set_objective(ObjSense::Maximize, obj);
  return inst;
}

/// The leader's slice of the profile encoded by a solution.
inline StrategyProfile extract_strategy(const MarketCase& c, const MpecInstance& inst, const std::vector<double>& x) {
  StrategyProfile p;
  for (std::size_t k = 0; k < inst.own_slots.size(); ++k) {
    std::size_t pick = kNoVar;
    for (std::size_t a = 0; a < inst.selection[k].size(); ++a)
      if (x.at(inst.selection[k][a]) > 0.5) pick = a;
    if (pick == kNoVar)
      throw Error(ErrorCode::SolverFailure, "no candidate selected for " + slot_label(c, inst.own_slots[k]));
    p.set(inst.own_slots[k], pick);
  }
  return p;
}

/// Follower variables of a solution laid out like a MarketOutcome (primal and duals).
inline MarketOutcome outcome_from_solution(const MarketCase& c, const MpecInstance& inst, const std::vector<double>& x) {
  using clearing_detail::Col;
  MarketOutcome o;
  o.scheme = inst.scheme;
  auto val = [&](std::size_t v) { return v == kNoVar ? 0.0 : x.at(v); };
  const std::size_t U = c.units.size();
  o.dam.dispatch.resize(U);
  o.dam.capacity_dual.resize(U);
  o.dam.objective = 0.0;
  for (std::size_t u = 0; u < U; ++u) {
    o.dam.dispatch[u] = val(inst.dam.dispatch[u]);
    o.dam.capacity_dual[u] = val(inst.dam.capacity_dual[u]);
  }
  o.dam.price = val(inst.dam.price);
  for (const auto& row : inst.asm_blocks) {
    std::vector<AsmResult> out;
    for (const auto& b : row) {
      AsmResult r;
      r.market = b.market;
      r.family = b.family;
      r.subsystem = b.subsystem;
      r.scenario = b.scenario;
      r.imbalance = b.imbalance;
      r.up.assign(U, 0.0);
      r.down.assign(U, 0.0);
      r.up_dual.assign(U, 0.0);
      r.down_dual.assign(U, 0.0);
      r.curtail.assign(c.loads.size(), 0.0);
      r.curtail_dual.assign(c.loads.size(), 0.0);
      r.spill.assign(c.renewables.size(), 0.0);
      r.spill_dual.assign(c.renewables.size(), 0.0);
      r.unit_in.assign(U, false);
      r.load_in.assign(c.loads.size(), false);
      r.renewable_in.assign(c.renewables.size(), false);
      r.line_in.assign(c.network.lines.size(), false);
      r.flow_dual.assign(c.network.lines.size(), 0.0);
      r.flow.assign(c.network.lines.size(), 0.0);
      r.balance_dual = val(b.kkt.row_dual[0]);
      for (std::size_t k = 0; k < b.lines.size(); ++k) {
        r.line_in[b.lines[k]] = true;
        r.flow_dual[b.lines[k]] = val(b.kkt.row_dual[1 + k]);
        r.flow[b.lines[k]] = c.network.lines[b.lines[k]].limit - val(b.kkt.row_slack[1 + k]);
      }
      for (std::size_t j = 0; j < b.cols.size(); ++j) {
        const auto& ref = b.cols[j];
        double q = val(b.kkt.primal[j]), beta = val(b.kkt.bound_dual[j]);
        switch (ref.kind) {
          case Col::Up: r.up[ref.index] = q; r.up_dual[ref.index] = beta; r.unit_in[ref.index] = true; break;
          case Col::Down: r.down[ref.index] = q; r.down_dual[ref.index] = beta; r.unit_in[ref.index] = true; break;
          case Col::Curtail: r.curtail[ref.index] = q; r.curtail_dual[ref.index] = beta; r.load_in[ref.index] = true; break;
          case Col::Spill: r.spill[ref.index] = q; r.spill_dual[ref.index] = beta; r.renewable_in[ref.index] = true; break;
        }
      }
      out.push_back(std::move(r));
    }
    o.asm_results.push_back(std::move(out));
  }
  return o;
}

/// Follower objectives of a solution under a complete profile: DAM Σ b g and each ASM's cost.
struct FollowerObjectives {
  double dam = 0.0;
  std::vector<std::vector<double>> asm_costs;  // [scenario][market]
};

inline FollowerObjectives follower_objectives(const MarketCase& c, const MpecInstance& inst, const std::vector<double>& x,
                                              const StrategyProfile& full) {
  using clearing_detail::Col;
  FollowerObjectives f;
  for (std::size_t u = 0; u < c.units.size(); ++u)
    f.dam += full.price(c, {ResourceKind::Unit, u, BidRole::DamSale, Market::Dam}) * x.at(inst.dam.dispatch[u]);
  for (const auto& row : inst.asm_blocks) {
    std::vector<double> costs;
    for (const auto& b : row) {
      double v = 0.0;
      for (std::size_t j = 0; j < b.cols.size(); ++j) {
        const auto& ref = b.cols[j];
        if (!ref.slot) continue;
        double p = full.price(c, *ref.slot);
        v += (ref.kind == Col::Down ? -p : p) * x.at(b.kkt.primal[j]);
      }
      costs.push_back(v);
    }
    f.asm_costs.push_back(std::move(costs));
  }
  return f;
}

/// Leader profit encoded by a solution (the linearized objective).
inline double mpec_profit(const MpecInstance& inst, const std::vector<double>& x) {
  double v = 0.0;
  for (const auto& t : inst.profit) v += t.coef * x.at(t.var);
  return v;
}

/// Full MPEC point for a cleared outcome: primal and dual follower values are copied,
/// products and slacks follow from the equality rows. Empty when the outcome cannot
/// be represented (e.g. a DAM price outside the grid).
inline std::optional<std::vector<double>> point_from_outcome(const MarketCase& c, const MpecInstance& inst,
                                                             const MarketOutcome& o, const StrategyProfile& full) {
  using clearing_detail::Col;
  const auto& m = inst.model;
  const std::size_t n = m.num_vars();
  std::vector<double> x(n, 0.0);
  std::vector<bool> known(n, false);
  auto put = [&](std::size_t v, double val) {
    if (v == kNoVar) return;
    x[v] = val;
    known[v] = true;
  };
  for (std::size_t k = 0; k < inst.own_slots.size(); ++k) {
    std::size_t pick = full.choice(inst.own_slots[k]);
    for (std::size_t a = 0; a < inst.selection[k].size(); ++a) put(inst.selection[k][a], a == pick ? 1.0 : 0.0);
  }
  for (std::size_t u = 0; u < c.units.size(); ++u) {
    put(inst.dam.dispatch[u], o.dam.dispatch[u]);
    put(inst.dam.capacity_dual[u], o.dam.capacity_dual[u]);
  }
  put(inst.dam.price, o.dam.price);
  bool on_grid = false;
  for (std::size_t k = 0; k < inst.dam.grid.prices.size(); ++k) {
    bool hit = !on_grid && std::abs(inst.dam.grid.prices[k] - o.dam.price) <= 1e-9 * std::max(1.0, std::abs(o.dam.price));
    on_grid = on_grid || hit;
    put(inst.dam.grid.select[k], hit ? 1.0 : 0.0);
  }
  if (!on_grid) return std::nullopt;
  if (o.asm_results.size() != inst.asm_blocks.size()) return std::nullopt;
  for (std::size_t s = 0; s < inst.asm_blocks.size(); ++s) {
    if (o.asm_results[s].size() != inst.asm_blocks[s].size()) return std::nullopt;
    for (std::size_t mk = 0; mk < inst.asm_blocks[s].size(); ++mk) {
      const auto& b = inst.asm_blocks[s][mk];
      const auto& r = o.asm_results[s][mk];
      put(b.kkt.row_dual[0], r.balance_dual);
      for (std::size_t k = 0; k < b.lines.size(); ++k) put(b.kkt.row_dual[1 + k], r.flow_dual[b.lines[k]]);
      for (std::size_t j = 0; j < b.cols.size(); ++j) {
        const auto& ref = b.cols[j];
        double q = 0.0, beta = 0.0;
        switch (ref.kind) {
          case Col::Up: q = r.up[ref.index]; beta = r.up_dual[ref.index]; break;
          case Col::Down: q = r.down[ref.index]; beta = r.down_dual[ref.index]; break;
          case Col::Curtail: q = r.curtail[ref.index]; beta = r.curtail_dual[ref.index]; break;
          case Col::Spill: q = r.spill[ref.index]; beta = r.spill_dual[ref.index]; break;
        }
        put(b.kkt.primal[j], q);
        put(b.kkt.bound_dual[j], beta);
      }
    }
  }
  for (const auto& pb : inst.products)
    for (std::size_t a = 0; a < pb.select.size(); ++a) put(pb.z[a], x[pb.select[a]] * x[pb.quantity]);

  // remaining variables (reduced costs, slacks) are the single unknown of some equality row
  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& row : m.constraints()) {
      if (row.sense != milp::Sense::Equal) continue;
      std::size_t unknown = kNoVar;
      double coef = 0.0, act = 0.0;
      bool several = false;
      for (const auto& t : row.terms) {
        if (known[t.var]) {
          act += t.coef * x[t.var];
        } else if (unknown == kNoVar) {
          unknown = t.var;
          coef = t.coef;
        } else {
          several = true;
          break;
        }
      }
      if (several || unknown == kNoVar) continue;
      put(unknown, (row.rhs - act) / coef);
      progress = true;
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    if (!known[j]) return std::nullopt;
  // clip round-off on nonnegative variables
  for (std::size_t j = 0; j < n; ++j) {
    const auto& v = m.variable(j);
    if (x[j] < v.lower && x[j] > v.lower - 1e-9) x[j] = v.lower;
    if (x[j] > v.upper && x[j] < v.upper + 1e-9) x[j] = v.upper;
  }
  return x;
}

// ------------------------------------------------------------ best response

/// Relative tie tolerance shared by the MPEC canonicalization and the oracle.
inline double tie_tolerance(double profit) { return 1e-6 * std::max(1.0, std::abs(profit)); }

struct MpecResponse {
  StrategyProfile strategy;  // leader's slots only
  double profit = 0.0;       // MPEC objective
  milp::MilpSolution solution;
  std::size_t nodes = 0;
};

namespace mpec_detail {

/// Heuristic for the B&B: round the leader binaries, clear the markets for that
/// strategy and lift the outcome to a full MPEC point.
inline auto clearing_heuristic(const MarketCase& c, const MpecInstance& inst) {
  auto tried = std::make_shared<std::set<std::vector<std::size_t>>>();
  return [&c, &inst, tried](const std::vector<double>& x) -> std::optional<std::vector<double>> {
    std::vector<std::size_t> tuple;
    StrategyProfile full = inst.rivals;
    for (std::size_t k = 0; k < inst.own_slots.size(); ++k) {
      const auto& sel = inst.selection[k];
      std::size_t best = 0;
      for (std::size_t a = 1; a < sel.size(); ++a)
        if (x[sel[a]] > x[sel[best]] + 1e-9) best = a;
      // respect fixed bounds
      if (inst.model.variable(sel[best]).upper < 0.5) return std::nullopt;
      tuple.push_back(best);
      full.set(inst.own_slots[k], best);
    }
    if (!tried->insert(tuple).second) return std::nullopt;
    try {
      return point_from_outcome(c, inst, clear_markets(c, inst.scheme, full), full);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
}

}  // namespace mpec_detail

/// Solves the MPEC; with `canonical` a second solve returns the lexicographically
/// smallest candidate tuple whose profit is within tie_tolerance of the optimum.
/// Own entries of `profile`, when present, seed the incumbent.
inline MpecResponse mpec_best_response(const MarketCase& c, Scheme scheme, const std::string& agg,
                                       const StrategyProfile& profile, const milp::SolverConfig& cfg = {},
                                       bool canonical = true, bool use_heuristic = true) {
  using namespace milp;
  auto inst = build_mpec(c, scheme, agg, profile);
  SolverConfig c1 = cfg;
  // sets are laid out DAM first, then markets in clearing order: settle upstream first
  c1.sos_first_violated = true;
  if (use_heuristic) {
    c1.heuristic = mpec_detail::clearing_heuristic(c, inst);
    bool seeded = std::all_of(inst.own_slots.begin(), inst.own_slots.end(), [&](const BidSlot& s) { return profile.has(s); });
    if (seeded && !c1.initial_solution) {
      StrategyProfile full = inst.rivals;
      full.merge(profile.restricted(inst.own_slots));
      try {
        c1.initial_solution = point_from_outcome(c, inst, clear_markets(c, scheme, full), full);
      } catch (const Error&) {
      }
    }
  }
  auto sol = solve_milp(inst.model, c1);
  auto context = [&]() { return "best response of " + agg + " (scheme " + to_string(scheme) + ")"; };
  if (sol.status == Status::Infeasible)
    throw Error(ErrorCode::Infeasible, context() + ": no strategy clears every market");
  if (!sol.has_incumbent)
    throw Error(ErrorCode::SolverFailure, context() + ": solver stopped (" + to_string(sol.status) + ") without a solution");
  if (sol.status != Status::Optimal)
    throw Error(ErrorCode::LimitExceeded, context() + ": solver stopped (" + to_string(sol.status) + ") before optimality");
  MpecResponse out;
  out.profit = sol.objective;
  out.nodes = sol.stats.nodes;
  out.strategy = extract_strategy(c, inst, sol.values);

  // lexicographic weights: slot k counts Π_{j>k} n_j
  std::vector<double> w(inst.own_slots.size(), 1.0);
  double span = 1.0;
  for (std::size_t k = inst.own_slots.size(); k-- > 0;) {
    w[k] = span;
    span *= static_cast<double>(inst.selection[k].size());
  }
  if (canonical && span > 1.0 && span < 1e12) {
    auto& m = inst.model;
    m.add_constraint("profit_floor", inst.profit, Sense::GreaterEqual, sol.objective - tie_tolerance(sol.objective));
    std::vector<Term> lex;
    for (std::size_t k = 0; k < inst.own_slots.size(); ++k)
      for (std::size_t a = 1; a < inst.selection[k].size(); ++a) lex.push_back({inst.selection[k][a], w[k] * a});
    m.set_objective(ObjSense::Minimize, lex);
    SolverConfig c2 = cfg;
    c2.initial_solution = sol.values;
    c2.relative_gap = 0.0;
    c2.absolute_gap = 0.5;  // objective is integral
    if (use_heuristic) c2.heuristic = mpec_detail::clearing_heuristic(c, inst);
    auto sol2 = solve_milp(m, c2);
    if (sol2.has_incumbent && sol2.status == Status::Optimal) {
      out.strategy = extract_strategy(c, inst, sol2.values);
      out.profit = mpec_profit(inst, sol2.values);
      out.nodes += sol2.stats.nodes;
      out.solution = std::move(sol2);
      return out;
    }
  }
  out.solution = std::move(sol);
  return out;
}

}  // namespace tsodso
