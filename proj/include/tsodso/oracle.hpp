#pragma once

// Brute-force reference: strategies are scored by clearing the markets directly,
// never through the MPEC.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tsodso/market_clearing.hpp"
#include "tsodso/mpec_builder.hpp"
#include "tsodso/strategy.hpp"

namespace tsodso {

inline constexpr double kNoProfit = -std::numeric_limits<double>::infinity();

/// Cartesian product of one aggregator's ladders, enumerated like an odometer
/// (last slot fastest), which is lexicographic order on candidate tuples.
struct StrategySpace {
  std::vector<BidSlot> slots;
  std::vector<std::size_t> sizes;

  /// Π sizes, saturating at SIZE_MAX.
  std::size_t count() const {
    std::size_t n = 1;
    for (auto s : sizes) {
      if (s != 0 && n > std::numeric_limits<std::size_t>::max() / s) return std::numeric_limits<std::size_t>::max();
      n *= s;
    }
    return n;
  }
  std::vector<std::size_t> first() const { return std::vector<std::size_t>(slots.size(), 0); }
  /// Advances `t`; false after the last tuple.
  bool next(std::vector<std::size_t>& t) const {
    for (std::size_t k = t.size(); k-- > 0;) {
      if (++t[k] < sizes[k]) return true;
      t[k] = 0;
    }
    return false;
  }
  StrategyProfile profile(const std::vector<std::size_t>& t) const {
    StrategyProfile p;
    for (std::size_t k = 0; k < slots.size(); ++k) p.set(slots[k], t[k]);
    return p;
  }
};

inline StrategySpace strategy_space(const MarketCase& c, Scheme scheme, const std::string& agg) {
  c.aggregator_index(agg);
  StrategySpace sp;
  sp.slots = owned_slots(c, scheme, agg);
  for (const auto& s : sp.slots) sp.sizes.push_back(slot_ladder(c, s).prices.size());
  return sp;
}

struct OracleConfig {
  std::size_t max_strategies = 1'000'000;
  std::size_t max_profiles = 100'000;
  double profit_tolerance = 1e-4;  // Nash deviation threshold
};

/// Profit of `agg` under a complete profile, or kNoProfit when some market fails to clear.
inline double clearing_profit(const MarketCase& c, Scheme scheme, const std::string& agg, const StrategyProfile& p) {
  try {
    return aggregator_profit(c, agg, clear_markets(c, scheme, p), p);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Infeasible) return kNoProfit;
    throw;
  }
}

struct OracleResponse {
  StrategyProfile strategy;  // aggregator's slots only
  double profit = kNoProfit;
  std::size_t evaluated = 0;
  std::size_t infeasible = 0;
};

/// Exhaustive best response; ties within tie_tolerance go to the smallest tuple.
inline OracleResponse enumerate_best_response(const MarketCase& c, Scheme scheme, const std::string& agg,
                                              const StrategyProfile& profile, const OracleConfig& cfg = {}) {
  auto sp = strategy_space(c, scheme, agg);
  std::size_t n = sp.count();
  if (n > cfg.max_strategies)
    throw Error(ErrorCode::LimitExceeded, "strategy space of " + agg + " has " +
                                              (n == std::numeric_limits<std::size_t>::max() ? std::string("too many")
                                                                                            : std::to_string(n)) +
                                              " strategies, cap is " + std::to_string(cfg.max_strategies));
  StrategyProfile full = profile;
  std::vector<double> profits;
  profits.reserve(n);
  OracleResponse out;
  auto t = sp.first();
  do {
    for (std::size_t k = 0; k < t.size(); ++k) full.set(sp.slots[k], t[k]);
    double v = clearing_profit(c, scheme, agg, full);
    if (v == kNoProfit) ++out.infeasible;
    profits.push_back(v);
    ++out.evaluated;
  } while (sp.next(t));
  if (out.evaluated != n) throw Error(ErrorCode::Internal, "enumeration visited a wrong number of strategies");

  double best = kNoProfit;
  for (double v : profits) best = std::max(best, v);
  if (best == kNoProfit)
    throw Error(ErrorCode::Infeasible, "no strategy of " + agg + " clears every market");
  double floor = best - tie_tolerance(best);
  t = sp.first();
  std::size_t i = 0;
  do {
    if (profits[i] >= floor) break;
    ++i;
  } while (sp.next(t));
  out.strategy = sp.profile(t);
  out.profit = profits[i];
  return out;
}

struct NashEnumeration {
  std::vector<StrategyProfile> equilibria;
  std::size_t profiles = 0;
};

/// Every pure Nash profile of the joint space: profit at the profile is within
/// profit_tolerance of each aggregator's best unilateral deviation.
inline NashEnumeration enumerate_nash(const MarketCase& c, Scheme scheme, const OracleConfig& cfg = {}) {
  const std::size_t I = c.aggregators.size();
  std::vector<StrategySpace> spaces;
  std::vector<std::size_t> span(I);
  std::size_t total = 1;
  for (std::size_t i = 0; i < I; ++i) {
    spaces.push_back(strategy_space(c, scheme, c.aggregators[i]));
    span[i] = spaces.back().count();
    if (span[i] != 0 && total > cfg.max_profiles / span[i] + 1) total = cfg.max_profiles + 1;
    else total *= span[i];
    if (total > cfg.max_profiles)
      throw Error(ErrorCode::LimitExceeded, "joint strategy space exceeds " + std::to_string(cfg.max_profiles) + " profiles");
  }
  // joint index: mixed radix, aggregator 0 most significant
  std::vector<std::size_t> stride(I, 1);
  for (std::size_t i = I; i-- > 1;) stride[i - 1] = stride[i] * span[i];

  // each aggregator's strategies in lexicographic order
  std::vector<std::vector<StrategyProfile>> strategies(I);
  for (std::size_t i = 0; i < I; ++i) {
    auto t = spaces[i].first();
    do strategies[i].push_back(spaces[i].profile(t));
    while (spaces[i].next(t));
  }
  std::vector<std::vector<double>> payoff(I, std::vector<double>(total, kNoProfit));
  for (std::size_t j = 0; j < total; ++j) {
    StrategyProfile p;
    for (std::size_t i = 0; i < I; ++i) p.merge(strategies[i][(j / stride[i]) % span[i]]);
    MarketOutcome o;
    try {
      o = clear_markets(c, scheme, p);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Infeasible) throw;
      continue;
    }
    for (std::size_t i = 0; i < I; ++i) payoff[i][j] = aggregator_profit(c, c.aggregators[i], o, p);
  }
  NashEnumeration out;
  out.profiles = total;
  for (std::size_t j = 0; j < total; ++j) {
    bool nash = true;
    for (std::size_t i = 0; i < I && nash; ++i) {
      double own = payoff[i][j];
      if (own == kNoProfit) {
        nash = false;
        break;
      }
      std::size_t base = j - ((j / stride[i]) % span[i]) * stride[i];
      for (std::size_t a = 0; a < span[i] && nash; ++a)
        if (payoff[i][base + a * stride[i]] > own + cfg.profit_tolerance) nash = false;
    }
    if (!nash) continue;
    StrategyProfile p;
    for (std::size_t i = 0; i < I; ++i) p.merge(strategies[i][(j / stride[i]) % span[i]]);
    out.equilibria.push_back(std::move(p));
  }
  return out;
}

}  // namespace tsodso
