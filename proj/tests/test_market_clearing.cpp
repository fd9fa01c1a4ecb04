#include <gtest/gtest.h>

#include <cmath>

#include "support/instances.hpp"
#include "support/lp_oracle.hpp"
#include "tsodso/market_clearing.hpp"

using namespace tsodso;
using test_support::feasible_case;
using test_support::InstanceOptions;
using test_support::random_profile;

namespace {

MarketCase merit_case(std::vector<double> caps, double load) {
  MarketCase c;
  c.network.nodes = {{1, kTransmission}};
  for (std::size_t u = 0; u < caps.size(); ++u)
    c.units.push_back({"U" + std::to_string(u + 1), 1, "A1", caps[u], 10.0, 12.0, 8.0});
  c.loads.push_back({"L1", 1, load, {load}, 0.0, ""});
  c.scenarios.push_back({"s1", 1.0});
  c.aggregators = {"A1"};
  return c;
}

// Scheme-independent checks on one ASM result.
void check_asm_invariants(const MarketCase& c, const AsmResult& r) {
  const double tol = 1e-6;
  double bal = 0.0;
  for (std::size_t u = 0; u < c.units.size(); ++u) {
    EXPECT_GE(r.up[u], -tol);
    EXPECT_GE(r.down[u], -tol);
    EXPECT_GE(r.up_dual[u], 0.0);
    EXPECT_GE(r.down_dual[u], 0.0);
    bal += r.up[u] - r.down[u];
  }
  for (std::size_t n = 0; n < c.loads.size(); ++n) {
    EXPECT_GE(r.curtail[n], -tol);
    EXPECT_LE(r.curtail[n], c.loads[n].curtailable(r.scenario) + tol);
    bal += r.curtail[n];
  }
  for (std::size_t k = 0; k < c.renewables.size(); ++k) {
    EXPECT_LE(r.spill[k], c.renewables[k].realized[r.scenario] + tol);
    bal -= r.spill[k];
  }
  EXPECT_NEAR(bal, r.imbalance, tol);
  for (std::size_t l = 0; l < c.network.lines.size(); ++l) {
    if (!r.line_in[l]) continue;
    EXPECT_LE(r.flow[l], c.network.lines[l].limit + tol) << c.network.lines[l].id;
    EXPECT_GE(r.flow_dual[l], 0.0);
    // complementary slackness on the flow row
    EXPECT_LE(r.flow_dual[l] * (c.network.lines[l].limit - r.flow[l]), 1e-5);
  }
  EXPECT_NEAR(r.objective, r.dual_objective, 1e-6 * (1.0 + std::abs(r.objective)));
}

// Stationarity of every participating column: price + bound dual - sign*alpha + flow terms >= 0,
// with equality when the quantity is strictly positive.
void check_stationarity(const MarketCase& c, const AsmResult& r, const StrategyProfile& p) {
  const auto& net = c.network;
  auto flow_term = [&](int node, double sign) {
    double t = 0.0;
    std::size_t pos = net.node_index(node);
    for (std::size_t l = 0; l < net.lines.size(); ++l)
      if (r.line_in[l]) t += net.ptdf[l][pos] * sign * r.flow_dual[l];
    return t;
  };
  auto check = [&](double price, double bound_dual, double sign, int node, double q, const std::string& what) {
    double rc = price + bound_dual - sign * r.balance_dual + flow_term(node, sign);
    EXPECT_GE(rc, -1e-6) << what;
    EXPECT_LE(std::abs(q * rc), 1e-5) << what;
  };
  for (std::size_t u = 0; u < c.units.size(); ++u) {
    if (!r.unit_in[u]) continue;
    double bu = p.price(c, {ResourceKind::Unit, u, BidRole::Up, r.family});
    double bd = p.price(c, {ResourceKind::Unit, u, BidRole::Down, r.family});
    check(bu, r.up_dual[u], 1.0, c.units[u].node, r.up[u], c.units[u].id + " up");
    check(-bd, r.down_dual[u], -1.0, c.units[u].node, r.down[u], c.units[u].id + " down");
  }
  for (std::size_t n = 0; n < c.loads.size(); ++n) {
    if (!r.load_in[n]) continue;
    double b = p.price(c, {ResourceKind::Load, n, BidRole::Curtail, r.family});
    check(b, r.curtail_dual[n], 1.0, c.loads[n].node, r.curtail[n], c.loads[n].id);
  }
  for (std::size_t k = 0; k < c.renewables.size(); ++k) {
    if (!r.renewable_in[k]) continue;
    check(0.0, r.spill_dual[k], -1.0, c.renewables[k].node, r.spill[k], c.renewables[k].id);
  }
}

struct RefColumn {
  double price, upper, sign;
  int node;
};

// Independent LP build: balance row plus one-sided flow rows, solved by vertex enumeration.
double reference_asm(const MarketCase& c, const std::vector<RefColumn>& cols, double imbalance,
                     const std::vector<std::size_t>& lines, const std::vector<double>& inj,
                     const std::vector<bool>& node_in) {
  using namespace milp;
  MilpModel m;
  std::vector<Term> obj, bal;
  std::vector<double> lo, up;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    m.add_variable("x" + std::to_string(j), 0.0, std::max(0.0, cols[j].upper));
    obj.push_back({j, cols[j].price});
    bal.push_back({j, cols[j].sign});
    lo.push_back(0.0);
    up.push_back(std::max(0.0, cols[j].upper));
  }
  m.add_constraint("bal", bal, Sense::Equal, imbalance);
  for (auto l : lines) {
    double f = 0.0;
    for (std::size_t p = 0; p < c.network.nodes.size(); ++p)
      if (node_in[p]) f += c.network.ptdf[l][p] * inj[p];
    std::vector<Term> t;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      std::size_t p = c.network.node_index(cols[j].node);
      if (node_in[p]) t.push_back({j, c.network.ptdf[l][p] * cols[j].sign});
    }
    m.add_constraint("f", t, Sense::LessEqual, c.network.lines[l].limit - f);
  }
  m.set_objective(ObjSense::Minimize, obj);
  auto v = oracle_support::vertex_enumeration(m, lo, up);
  EXPECT_TRUE(v.has_value());
  return v.value_or(NAN);
}

std::vector<double> injections(const MarketCase& c, const DamResult& dam, std::size_t s) {
  std::vector<double> inj(c.network.nodes.size(), 0.0);
  for (std::size_t u = 0; u < c.units.size(); ++u) inj[c.network.node_index(c.units[u].node)] += dam.dispatch[u];
  for (const auto& r : c.renewables) inj[c.network.node_index(r.node)] += r.realized[s];
  for (const auto& l : c.loads) inj[c.network.node_index(l.node)] -= l.realized[s];
  return inj;
}

InstanceOptions tiny() {
  InstanceOptions o;
  o.min_units = 2;
  o.max_units = 2;
  o.min_flex = 1;
  o.max_flex = 1;
  return o;
}

}  // namespace

TEST(Dam, SingleUnit) {
  auto c = merit_case({100.0}, 60.0);
  auto r = clear_dam(c, std::vector<double>{50.0});
  EXPECT_DOUBLE_EQ(r.dispatch[0], 60.0);
  EXPECT_DOUBLE_EQ(r.price, 50.0);
  EXPECT_DOUBLE_EQ(r.capacity_dual[0], 0.0);
}

TEST(Dam, MeritOrder) {
  auto c = merit_case({10.0, 10.0}, 15.0);
  auto r = clear_dam(c, std::vector<double>{1.0, 2.0});
  EXPECT_NEAR(r.dispatch[0], 10.0, 1e-9);
  EXPECT_NEAR(r.dispatch[1], 5.0, 1e-9);
  EXPECT_DOUBLE_EQ(r.price, 2.0);
  EXPECT_DOUBLE_EQ(r.capacity_dual[0], 1.0);
  EXPECT_DOUBLE_EQ(r.capacity_dual[1], 0.0);
}

TEST(Dam, CapacityDegenerateTakesMarginalBid) {
  auto c = merit_case({10.0, 10.0}, 20.0);
  auto r = clear_dam(c, std::vector<double>{1.0, 2.0});
  EXPECT_DOUBLE_EQ(r.price, 2.0);
  EXPECT_DOUBLE_EQ(r.capacity_dual[0], 1.0);
  EXPECT_DOUBLE_EQ(r.capacity_dual[1], 0.0);
}

TEST(Dam, TiedBidsFillLowerUnitFirst) {
  auto c = merit_case({10.0, 10.0, 10.0}, 15.0);
  auto r = clear_dam(c, std::vector<double>{3.0, 3.0, 3.0});
  EXPECT_DOUBLE_EQ(r.dispatch[0], 10.0);
  EXPECT_DOUBLE_EQ(r.dispatch[1], 5.0);
  EXPECT_DOUBLE_EQ(r.dispatch[2], 0.0);
}

TEST(Dam, InsufficientCapacityIsInfeasible) {
  auto c = merit_case({10.0}, 15.0);
  try {
    clear_dam(c, std::vector<double>{1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Infeasible);
  }
}

TEST(Dam, MapOverloadAndMissingBid) {
  auto c = merit_case({10.0, 10.0}, 15.0);
  auto r = clear_dam(c, std::map<std::string, double>{{"U1", 2.0}, {"U2", 1.0}});
  EXPECT_NEAR(r.dispatch[1], 10.0, 1e-9);
  EXPECT_THROW(clear_dam(c, std::map<std::string, double>{{"U1", 2.0}}), Error);
}

TEST(Dam, RandomInvariants) {
  std::mt19937 rng(7);
  for (int t = 0; t < 200; ++t) {
    int U = std::uniform_int_distribution<int>(1, 6)(rng);
    std::vector<double> caps, bids;
    double cap = 0.0;
    for (int u = 0; u < U; ++u) {
      caps.push_back(std::uniform_real_distribution<double>(1, 20)(rng));
      bids.push_back(std::uniform_real_distribution<double>(10, 100)(rng));
      cap += caps.back();
    }
    auto c = merit_case(caps, std::uniform_real_distribution<double>(0.1, 1.0)(rng) * cap);
    auto r = clear_dam(c, bids);
    double sum = 0.0, cost = 0.0;
    for (int u = 0; u < U; ++u) {
      EXPECT_GE(r.dispatch[u], 0.0);
      EXPECT_LE(r.dispatch[u], caps[u]);
      EXPECT_GE(r.capacity_dual[u], 0.0);
      EXPECT_LE(std::abs(r.dispatch[u] * (bids[u] + r.capacity_dual[u] - r.price)), 1e-6);
      EXPECT_LE(std::abs(r.capacity_dual[u] * (caps[u] - r.dispatch[u])), 1e-6);
      EXPECT_GE(bids[u] + r.capacity_dual[u] - r.price, -1e-9);
      sum += r.dispatch[u];
      cost += bids[u] * r.dispatch[u];
    }
    EXPECT_NEAR(sum, c.loads[0].forecast, 1e-6);
    // strong duality: λ·D − Σ ν G
    double dual = r.price * c.loads[0].forecast;
    for (int u = 0; u < U; ++u) dual -= r.capacity_dual[u] * caps[u];
    EXPECT_NEAR(cost, dual, 1e-6);
    EXPECT_NEAR(r.objective, cost, 1e-9);
  }
}

TEST(Asm, SingleResourceBalance) {
  auto c = merit_case({100.0}, 60.0);
  c.loads[0].realized = {64.0};
  c.ladders = {{"U1", BidRole::DamSale, {50.0}}, {"U1", BidRole::Up, {70.0}}, {"U1", BidRole::Down, {30.0}}};
  auto p = initial_profile(c, Scheme::A);
  auto o = clear_markets(c, Scheme::A, p);
  ASSERT_EQ(o.asm_results.size(), 1u);
  EXPECT_NEAR(o.asm_results[0][0].up[0], 4.0, 1e-9);
  EXPECT_NEAR(o.asm_results[0][0].objective, 280.0, 1e-9);
  EXPECT_NEAR(system_cost(c, o).expected, 280.0, 1e-9);
}

TEST(Asm, ZeroImbalanceNoCongestionIsIdle) {
  std::uint32_t seed = 100;
  auto c = feasible_case(seed);
  for (auto& l : c.loads) l.realized.assign(l.realized.size(), l.forecast);
  for (auto& r : c.renewables) r.realized.assign(r.realized.size(), r.forecast);
  for (auto& l : c.network.lines) l.limit = 1e6;
  for (auto scheme : {Scheme::A, Scheme::B, Scheme::C}) {
    auto o = clear_markets(c, scheme, initial_profile(c, scheme));
    EXPECT_NEAR(system_cost(c, o).expected, 0.0, 1e-9);
  }
}

TEST(Asm, RandomAgreesWithVertexEnumeration) {
  std::uint32_t seed = 1;
  std::mt19937 rng(11);
  for (int t = 0; t < 25; ++t) {
    auto c = feasible_case(seed, tiny());
    const auto& net = c.network;
    for (auto scheme : {Scheme::A, Scheme::B, Scheme::C}) {
      auto p = random_profile(c, scheme, rng);
      MarketOutcome o;
      try {
        o = clear_markets(c, scheme, p);
      } catch (const Error&) {
        continue;
      }
      for (std::size_t s = 0; s < c.scenarios.size(); ++s) {
        auto inj = injections(c, o.dam, s);
        auto im = compute_imbalances(c, s);
        std::vector<std::size_t> tlines, dlines, all;
        for (std::size_t l = 0; l < net.lines.size(); ++l) {
          (net.lines[l].subsystem == 0 ? tlines : dlines).push_back(l);
          all.push_back(l);
        }
        auto cols_of = [&](Market fam, auto in_scope, const std::vector<double>& cap_up,
                           const std::vector<double>& cap_down, const std::vector<double>& cap_curt,
                           const std::vector<double>& cap_spill) {
          std::vector<RefColumn> cols;
          for (std::size_t u = 0; u < c.units.size(); ++u) {
            if (!in_scope(c.unit_subsystem(u))) continue;
            cols.push_back({p.price(c, {ResourceKind::Unit, u, BidRole::Up, fam}), cap_up[u], 1.0, c.units[u].node});
            cols.push_back({-p.price(c, {ResourceKind::Unit, u, BidRole::Down, fam}), cap_down[u], -1.0, c.units[u].node});
          }
          for (std::size_t n = 0; n < c.loads.size(); ++n)
            if (c.loads[n].flexible() && in_scope(c.load_subsystem(n)))
              cols.push_back({p.price(c, {ResourceKind::Load, n, BidRole::Curtail, fam}), cap_curt[n], 1.0, c.loads[n].node});
          for (std::size_t k = 0; k < c.renewables.size(); ++k)
            if (in_scope(c.renewable_subsystem(k))) cols.push_back({0.0, cap_spill[k], -1.0, c.renewables[k].node});
          return cols;
        };
        std::vector<double> up, down, curt, spill;
        for (std::size_t u = 0; u < c.units.size(); ++u) {
          up.push_back(c.units[u].capacity - o.dam.dispatch[u]);
          down.push_back(o.dam.dispatch[u]);
        }
        for (const auto& l : c.loads) curt.push_back(l.curtailable(s));
        for (const auto& r : c.renewables) spill.push_back(r.realized[s]);
        std::vector<bool> every(net.nodes.size(), true), dnodes(net.nodes.size());
        for (std::size_t j = 0; j < net.nodes.size(); ++j) dnodes[j] = net.nodes[j].subsystem == 1;
        const auto& row = o.asm_results[s];
        for (const auto& r : row) {
          check_asm_invariants(c, r);
          check_stationarity(c, r, p);
        }
        if (scheme == Scheme::A) {
          double ref = reference_asm(c, cols_of(Market::Asm, [](int) { return true; }, up, down, curt, spill),
                                     im.total, all, inj, every);
          EXPECT_NEAR(row[0].objective, ref, 1e-6);
          continue;
        }
        Market dfam = scheme == Scheme::B ? Market::Asm : Market::AsmD;
        double dref = reference_asm(c, cols_of(dfam, [](int k) { return k == 1; }, up, down, curt, spill),
                                    im.distribution[0], dlines, inj, dnodes);
        EXPECT_NEAR(row[0].objective, dref, 1e-6);
        // post-distribution injections
        const auto& d = row[0];
        for (std::size_t u = 0; u < c.units.size(); ++u) inj[net.node_index(c.units[u].node)] += d.up[u] - d.down[u];
        for (std::size_t n = 0; n < c.loads.size(); ++n) inj[net.node_index(c.loads[n].node)] += d.curtail[n];
        for (std::size_t k = 0; k < c.renewables.size(); ++k) inj[net.node_index(c.renewables[k].node)] -= d.spill[k];
        if (scheme == Scheme::B) {
          double tref = reference_asm(c, cols_of(Market::Asm, [](int k) { return k == 0; }, up, down, curt, spill),
                                      im.transmission, tlines, inj, every);
          EXPECT_NEAR(row[1].objective, tref, 1e-6);
        } else {
          for (std::size_t u = 0; u < c.units.size(); ++u) {
            double g = o.dam.dispatch[u] + d.up[u] - d.down[u];
            up[u] = c.units[u].capacity - g;
            down[u] = g;
          }
          for (std::size_t n = 0; n < c.loads.size(); ++n) curt[n] -= d.curtail[n];
          for (std::size_t k = 0; k < c.renewables.size(); ++k) spill[k] -= d.spill[k];
          double tref = reference_asm(c, cols_of(Market::AsmT, [](int) { return true; }, up, down, curt, spill),
                                      im.transmission, tlines, inj, every);
          EXPECT_NEAR(row[1].objective, tref, 1e-6);
        }
      }
    }
  }
}

TEST(Asm, SchemeBBoundaryExchangeIsPreserved) {
  std::uint32_t seed = 500;
  std::mt19937 rng(3);
  int checked = 0;
  while (checked < 50) {
    auto c = feasible_case(seed);
    auto p = random_profile(c, Scheme::B, rng);
    MarketOutcome o;
    try {
      o = clear_markets(c, Scheme::B, p);
    } catch (const Error&) {
      continue;
    }
    for (std::size_t s = 0; s < c.scenarios.size(); ++s) {
      auto pre = injections(c, o.dam, s);
      // DAM exchange uses forecasts; post-ASM uses realizations plus re-dispatch
      double dam_exchange = 0.0, post = 0.0;
      for (std::size_t u = 0; u < c.units.size(); ++u)
        if (c.unit_subsystem(u) == 1) {
          dam_exchange += o.dam.dispatch[u];
          post += o.dam.dispatch[u] + o.asm_results[s][0].up[u] - o.asm_results[s][0].down[u];
        }
      for (std::size_t n = 0; n < c.loads.size(); ++n)
        if (c.load_subsystem(n) == 1) {
          dam_exchange -= c.loads[n].forecast;
          post -= c.loads[n].realized[s] - o.asm_results[s][0].curtail[n];
        }
      for (std::size_t k = 0; k < c.renewables.size(); ++k)
        if (c.renewable_subsystem(k) == 1) {
          dam_exchange += c.renewables[k].forecast;
          post += c.renewables[k].realized[s] - o.asm_results[s][0].spill[k];
        }
      EXPECT_NEAR(post, dam_exchange, 1e-6);
      (void)pre;
    }
    ++checked;
  }
}

TEST(Asm, SchemeCResidualConsistency) {
  std::uint32_t seed = 900;
  std::mt19937 rng(5);
  for (int t = 0; t < 30; ++t) {
    auto c = feasible_case(seed);
    auto p = random_profile(c, Scheme::C, rng);
    MarketOutcome o;
    try {
      o = clear_markets(c, Scheme::C, p);
    } catch (const Error&) {
      continue;
    }
    for (std::size_t s = 0; s < c.scenarios.size(); ++s) {
      const auto& d = o.asm_results[s][0];
      const auto& tr = o.asm_results[s][1];
      for (std::size_t u = 0; u < c.units.size(); ++u) {
        double g = o.dam.dispatch[u];
        // net position stays within [0, G]
        double final_g = g + d.up[u] - d.down[u] + tr.up[u] - tr.down[u];
        EXPECT_GE(final_g, -1e-6);
        EXPECT_LE(final_g, c.units[u].capacity + 1e-6);
        EXPECT_LE(tr.up[u], c.units[u].capacity - (g + d.up[u] - d.down[u]) + 1e-6);
        EXPECT_LE(tr.down[u], g + d.up[u] - d.down[u] + 1e-6);
      }
      for (std::size_t n = 0; n < c.loads.size(); ++n)
        EXPECT_LE(d.curtail[n] + tr.curtail[n], c.loads[n].curtailable(s) + 1e-6);
    }
  }
}

TEST(Asm, SchemeCBoundCollapse) {
  // D1's whole headroom goes to the distribution market, so it cannot sell up-regulation to T
  MarketCase c;
  c.network.nodes = {{1, 0}, {2, 1}};
  c.units = {{"T1", 1, "A1", 15.0, 10.0, 11.0, 5.0},
             {"T2", 1, "A1", 10.0, 10.0, 200.0, 5.0},
             {"D1", 2, "A1", 13.0, 10.0, 12.0, 5.0}};
  c.loads = {{"LT", 1, 20.0, {22.0}, 0.0, ""}, {"LD", 2, 5.0, {8.0}, 0.0, ""}};
  c.scenarios = {{"s1", 1.0}};
  c.aggregators = {"A1"};
  const std::map<std::string, double> dam{{"T1", 20.0}, {"T2", 50.0}, {"D1", 30.0}};
  for (const auto& u : c.units) {
    c.ladders.push_back({u.id, BidRole::DamSale, {dam.at(u.id)}});
    c.ladders.push_back({u.id, BidRole::Up, {u.up_cost}});
    c.ladders.push_back({u.id, BidRole::Down, {u.down_cost}});
  }
  auto o = clear_markets(c, Scheme::C, initial_profile(c, Scheme::C));
  EXPECT_NEAR(o.dam.dispatch[2], 10.0, 1e-9);
  const auto& d = o.asm_results[0][0];
  const auto& t = o.asm_results[0][1];
  EXPECT_NEAR(d.up[2], 3.0, 1e-9);
  EXPECT_NEAR(t.up[2], 0.0, 1e-12);
  EXPECT_NEAR(t.up[1], 2.0, 1e-9);
  EXPECT_NEAR(system_cost(c, o).expected, 3.0 * 12.0 + 2.0 * 200.0, 1e-9);
}

TEST(Profit, Examples) {
  MarketCase c;
  c.network.nodes = {{1, 0}};
  c.units = {{"U1", 1, "A1", 300.0, 88.0, 95.0, 80.0}};
  c.loads = {{"N1", 1, 10.0, {10.0}, 1.0, "A2"}};
  c.scenarios = {{"s1", 1.0}};
  c.aggregators = {"A1", "A2", "A3"};
  c.ladders = {{"U1", BidRole::DamSale, {96.80}}, {"U1", BidRole::Up, {100.0}}, {"U1", BidRole::Down, {50.0}},
               {"N1", BidRole::Curtail, {142.50}}};
  auto p = initial_profile(c, Scheme::A);
  MarketOutcome o;
  o.dam.dispatch = {259.0};
  o.dam.price = 96.80;
  AsmResult r;
  r.up = {0.0};
  r.down = {0.0};
  r.curtail = {10.0};
  r.spill = {};
  r.unit_in = {true};
  r.load_in = {true};
  o.asm_results = {{r}};
  EXPECT_NEAR(aggregator_profit(c, "A1", o, p), 2279.20, 1e-9);
  EXPECT_NEAR(aggregator_profit(c, "A2", o, p), 457.00, 1e-9);
  EXPECT_DOUBLE_EQ(aggregator_profit(c, "A3", o, p), 0.0);
}

TEST(Profit, SystemCostExamples) {
  EXPECT_NEAR(system_cost({10.0 * 145.20}, {1.0}).expected, 1452.00, 1e-9);
  EXPECT_DOUBLE_EQ(system_cost({0.0, 0.0}, {0.5, 0.5}).expected, 0.0);
  EXPECT_THROW(system_cost({1.0}, {0.5, 0.5}), Error);
}

TEST(Monotonicity, LosingBidRaiseLeavesObjective) {
  std::uint32_t seed = 1300;
  for (int t = 0; t < 20; ++t) {
    auto c = feasible_case(seed);
    auto p = initial_profile(c, Scheme::A);
    auto o = clear_markets(c, Scheme::A, p);
    auto base = system_cost(c, o).expected;
    // raise up-regulation ladders of units never dispatched upward
    auto c2 = c;
    for (std::size_t u = 0; u < c.units.size(); ++u) {
      bool used = false;
      for (const auto& row : o.asm_results) used = used || row[0].up[u] > 1e-9;
      if (used) continue;
      for (auto& l : c2.ladders)
        if (l.resource == c.units[u].id && l.role == BidRole::Up)
          for (auto& price : l.prices) price += 25.0;
    }
    EXPECT_NEAR(system_cost(c2, clear_markets(c2, Scheme::A, p)).expected, base, 1e-6);
    // raising accepted up bids weakly increases cost
    auto c3 = c;
    for (auto& l : c3.ladders)
      if (l.role == BidRole::Up)
        for (auto& price : l.prices) price += 5.0;
    EXPECT_GE(system_cost(c3, clear_markets(c3, Scheme::A, p)).expected, base - 1e-6);
  }
}
