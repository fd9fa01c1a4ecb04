#pragma once

// Small random market cases for property tests. Two transmission nodes joined by one
// line, one distribution network hanging off node 2 with an optional internal line.
// Prices are drawn from continuous distributions so clearing optima are unique a.s.

#include <algorithm>
#include <random>
#include <string>

#include "tsodso/market_clearing.hpp"

namespace test_support {

using namespace tsodso;

struct InstanceOptions {
  int min_units = 2, max_units = 4;
  int min_flex = 1, max_flex = 2;
  int max_scenarios = 3;
  int max_candidates = 3;
  int aggregators = 2;
  bool distribution_line = true;  // second line inside D1 (coin flip when true)
};

inline MarketCase random_case(std::uint32_t seed, const InstanceOptions& opt = {}) {
  std::mt19937 rng(seed);
  auto unif = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto pick = [&](int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); };

  MarketCase c;
  c.name = "random-" + std::to_string(seed);
  c.network.nodes = {{1, kTransmission}, {2, kTransmission}, {3, 1}, {4, 1}};
  // line T: flow 1->2 equals -(injection downstream of node 1) with slack at node 1
  double o1 = pick(0, 1) ? 1.0 : -1.0;
  c.network.lines.push_back({"T12", kTransmission, 1, 2, 0.0});
  c.network.ptdf.push_back({0.0, -o1, -o1, -o1});
  bool dline = opt.distribution_line && pick(0, 1);
  if (dline) {
    double o2 = pick(0, 1) ? 1.0 : -1.0;
    c.network.lines.push_back({"D34", 1, 3, 4, 0.0});
    c.network.ptdf.push_back({0.0, 0.0, 0.0, -o2});
  }

  int S = pick(1, opt.max_scenarios);
  double left = 1.0;
  for (int s = 0; s < S; ++s) {
    double p = s + 1 == S ? left : left * unif(0.3, 0.7);
    left -= p;
    c.scenarios.push_back({"s" + std::to_string(s + 1), p});
  }
  for (int i = 0; i < opt.aggregators; ++i) c.aggregators.push_back("A" + std::to_string(i + 1));
  auto owner = [&]() { return c.aggregators[static_cast<std::size_t>(pick(0, opt.aggregators - 1))]; };
  const int node_ids[] = {1, 2, 3, 4};

  auto ladder = [&](const std::string& res, BidRole role, double base, double lo, double hi) {
    BidLadder l{res, role, {}};
    int n = pick(1, opt.max_candidates);
    for (int a = 0; a < n; ++a) l.prices.push_back(base * unif(lo, hi));
    c.ladders.push_back(l);
  };

  int U = pick(opt.min_units, opt.max_units);
  for (int u = 0; u < U; ++u) {
    ProgrammableUnit pu;
    pu.id = "G" + std::to_string(u + 1);
    pu.node = node_ids[pick(0, 3)];
    pu.owner = owner();
    pu.capacity = unif(8.0, 20.0);
    pu.cost = unif(20.0, 60.0);
    pu.up_cost = pu.cost * unif(1.05, 1.3);
    pu.down_cost = pu.cost * unif(0.6, 0.95);
    c.units.push_back(pu);
    ladder(pu.id, BidRole::DamSale, pu.cost, 1.0, 1.4);
    ladder(pu.id, BidRole::Up, pu.up_cost, 1.0, 1.5);
    ladder(pu.id, BidRole::Down, pu.down_cost, 0.5, 1.0);
  }
  RenewableUnit ren{"W1", node_ids[pick(0, 3)], unif(2.0, 8.0), {}};
  int F = pick(opt.min_flex, opt.max_flex);
  for (int n = 0; n <= F; ++n) {
    LoadPoint l;
    l.id = "L" + std::to_string(n + 1);
    l.node = node_ids[pick(0, 3)];
    l.forecast = unif(4.0, 12.0);
    if (n < F) {
      l.flex_fraction = unif(0.1, 0.4);
      l.owner = owner();
    }
    c.loads.push_back(l);
  }
  // keep the DAM feasible with margin
  double cap = 0.0;
  for (const auto& u : c.units) cap += u.capacity;
  double nl = net_load(c);
  if (nl > 0.7 * cap) {
    double scale = nl / (0.7 * cap);
    for (auto& u : c.units) u.capacity *= scale;
  }
  if (nl < 1.0) c.loads.back().forecast += 1.0 - nl;
  for (int s = 0; s < S; ++s) {
    ren.realized.push_back(ren.forecast * unif(0.6, 1.3));
    for (auto& l : c.loads) l.realized.push_back(l.forecast * unif(0.85, 1.15));
  }
  c.renewables.push_back(ren);
  for (std::size_t n = 0; n < c.loads.size(); ++n)
    if (c.loads[n].flexible()) ladder(c.loads[n].id, BidRole::Curtail, 90.0, 0.8, 1.6);

  // limits: a fraction of the largest |DAM flow| seen over the candidate DAM bids
  // so the line sometimes binds; relaxed until every scheme clears at the start profile
  auto p0 = initial_profile(c, Scheme::A);
  auto dam = clear_dam(c, p0);
  std::vector<double> peak(c.network.lines.size(), 1.0);
  for (std::size_t s = 0; s < c.scenarios.size(); ++s) {
    auto f = ptdf_flows(c.network, clearing_detail::base_injection(c, dam, s));
    for (std::size_t l = 0; l < f.size(); ++l) peak[l] = std::max(peak[l], std::abs(f[l]));
  }
  double tight = unif(0.85, 1.4);
  for (std::size_t l = 0; l < c.network.lines.size(); ++l) c.network.lines[l].limit = peak[l] * tight;
  return c;
}

/// Uniform random candidate for every slot of a scheme.
inline StrategyProfile random_profile(const MarketCase& c, Scheme scheme, std::mt19937& rng) {
  StrategyProfile p;
  for (const auto& s : all_slots(c, scheme)) {
    auto n = slot_ladder(c, s).prices.size();
    p.set(s, std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
  }
  return p;
}

/// Two single-unit aggregators on one node, net load 25, no imbalance, so only the
/// DAM matters. Payoffs (A1, A2) for DAM bids:
///   (20,21): 220, 55   (20,31): 420, 105   (30,21): 100, 400   (30,31): 420, 105
/// The unique pure Nash profile is (20, 31).
inline MarketCase duopoly_case() {
  MarketCase c;
  c.name = "duopoly";
  c.network.nodes = {{1, kTransmission}};
  c.aggregators = {"A1", "A2"};
  c.units.push_back({"U1", 1, "A1", 20.0, 10.0, 12.0, 8.0});
  c.units.push_back({"U2", 1, "A2", 20.0, 10.0, 12.0, 8.0});
  c.loads.push_back({"L1", 1, 25.0, {25.0}, 0.0, ""});
  c.scenarios.push_back({"s1", 1.0});
  c.ladders = {{"U1", BidRole::DamSale, {20.0, 30.0}}, {"U1", BidRole::Up, {15.0}}, {"U1", BidRole::Down, {5.0}},
               {"U2", BidRole::DamSale, {21.0, 31.0}}, {"U2", BidRole::Up, {15.0}}, {"U2", BidRole::Down, {5.0}}};
  return c;
}

/// True when every scheme clears at the initial profile.
inline bool clears_everywhere(const MarketCase& c) {
  try {
    for (auto s : {Scheme::A, Scheme::B, Scheme::C}) clear_markets(c, s, initial_profile(c, s));
  } catch (const Error&) {
    return false;
  }
  return true;
}

/// Draws seeds from `seed` upward until a case clears in all schemes.
inline MarketCase feasible_case(std::uint32_t& seed, const InstanceOptions& opt = {}) {
  while (true) {
    auto c = random_case(seed++, opt);
    if (clears_everywhere(c)) return c;
  }
}

}  // namespace test_support
