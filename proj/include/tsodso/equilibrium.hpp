#pragma once

#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "tsodso/market_clearing.hpp"
#include "tsodso/mpec_builder.hpp"
#include "tsodso/oracle.hpp"
#include "tsodso/strategy.hpp"

namespace tsodso {

/// A move must beat the incumbent by more than this (EUR) to count.
inline constexpr double kProfitTolerance = 1e-4;

struct ResponseResult {
  StrategyProfile strategy;  // responder's slots only
  double profit = kNoProfit;
};

/// Best response of one aggregator with rivals fixed at `profile`.
using BestResponder =
    std::function<ResponseResult(const MarketCase&, Scheme, const std::string&, const StrategyProfile&)>;

inline BestResponder mpec_responder(milp::SolverConfig cfg = {}) {
  return [cfg](const MarketCase& c, Scheme scheme, const std::string& agg, const StrategyProfile& p) {
    auto r = mpec_best_response(c, scheme, agg, p, cfg);
    return ResponseResult{r.strategy, r.profit};
  };
}

inline BestResponder oracle_responder(OracleConfig cfg = {}) {
  return [cfg](const MarketCase& c, Scheme scheme, const std::string& agg, const StrategyProfile& p) {
    auto r = enumerate_best_response(c, scheme, agg, p, cfg);
    return ResponseResult{r.strategy, r.profit};
  };
}

struct TraceStep {
  std::size_t iteration = 0;  // 1-based sweep
  std::string aggregator;
  StrategyProfile old_strategy, new_strategy;
  double old_profit = kNoProfit, new_profit = kNoProfit;
  bool changed = false;
};

struct EquilibriumReport {
  Scheme scheme = Scheme::A;
  StrategyProfile profile;
  bool converged = false;
  bool cycled = false;
  bool nash_certified = false;
  std::size_t iterations = 0;
  std::vector<TraceStep> trace;
  SystemCost cost;
  std::vector<double> improvements;  // per aggregator, from the certification
};

struct EquilibriumConfig {
  std::size_t max_iterations = 50;
  bool certify = true;
  BestResponder responder;  // defaults to the MPEC
};

struct NashCheck {
  bool nash = false;
  std::vector<double> improvements;  // best response profit minus current profit
};

/// No aggregator gains more than kProfitTolerance by deviating alone.
inline NashCheck is_nash(const MarketCase& c, Scheme scheme, const StrategyProfile& profile,
                         const BestResponder& responder = mpec_responder()) {
  for (const auto& s : all_slots(c, scheme))
    if (!profile.has(s)) throw Error(ErrorCode::InvalidInput, "profile lacks a bid for " + slot_label(c, s));
  NashCheck out;
  out.nash = true;
  for (const auto& agg : c.aggregators) {
    double now = clearing_profit(c, scheme, agg, profile);
    auto r = responder(c, scheme, agg, profile);
    double gain = r.profit - now;
    if (now == kNoProfit) gain = std::numeric_limits<double>::infinity();
    out.improvements.push_back(gain);
    if (gain > kProfitTolerance) out.nash = false;
  }
  return out;
}

/// Iterated best responses in roster order from the max-profit initialization.
inline EquilibriumReport find_equilibrium(const MarketCase& c, Scheme scheme, const EquilibriumConfig& cfg = {}) {
  if (cfg.max_iterations < 1) throw Error(ErrorCode::InvalidInput, "iteration limit must be at least 1");
  require_valid(c);
  BestResponder respond = cfg.responder ? cfg.responder : mpec_responder();
  EquilibriumReport rep;
  rep.scheme = scheme;
  rep.profile = initial_profile(c, scheme);
  std::map<std::uint64_t, std::size_t> seen{{rep.profile.hash(), 0}};

  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    rep.iterations = it;
    bool any = false;
    for (const auto& agg : c.aggregators) {
      auto slots = owned_slots(c, scheme, agg);
      TraceStep step;
      step.iteration = it;
      step.aggregator = agg;
      step.old_strategy = rep.profile.restricted(slots);
      step.old_profit = clearing_profit(c, scheme, agg, rep.profile);
      ResponseResult r;
      try {
        r = respond(c, scheme, agg, rep.profile);
      } catch (const Error& e) {
        throw Error(e.code(), "iteration " + std::to_string(it) + ", aggregator " + agg + ": " + e.what());
      }
      step.new_profit = r.profit;
      // keep the incumbent unless the move is strictly better
      if (!(r.strategy == step.old_strategy) && r.profit > step.old_profit + kProfitTolerance) {
        rep.profile.merge(r.strategy);
        step.new_strategy = r.strategy;
        step.changed = true;
        any = true;
      } else {
        step.new_strategy = step.old_strategy;
      }
      rep.trace.push_back(std::move(step));
    }
    if (!any) {
      rep.converged = true;
      break;
    }
    if (!seen.emplace(rep.profile.hash(), it).second) {
      rep.cycled = true;
      break;
    }
  }
  try {
    rep.cost = system_cost(c, clear_markets(c, scheme, rep.profile));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Infeasible) throw;
    rep.cost.expected = std::numeric_limits<double>::quiet_NaN();
  }
  if (rep.converged && cfg.certify) {
    auto n = is_nash(c, scheme, rep.profile, respond);
    rep.nash_certified = n.nash;
    rep.improvements = n.improvements;
  }
  return rep;
}

}  // namespace tsodso
