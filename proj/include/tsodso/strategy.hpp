#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tsodso/model_core.hpp"

namespace tsodso {

enum class Scheme { A, B, C };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::A: return "A";
    case Scheme::B: return "B";
    case Scheme::C: return "C";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "A" || s == "a") return Scheme::A;
  if (s == "B" || s == "b") return Scheme::B;
  if (s == "C" || s == "c") return Scheme::C;
  throw Error(ErrorCode::InvalidInput, "unsupported scheme tag '" + s + "'");
}

/// Market in which a bid is placed. Schemes A and B use one ASM bid family;
/// scheme C has separate distribution (AsmD) and transmission (AsmT) families.
enum class Market { Dam, Asm, AsmD, AsmT };

inline const char* to_string(Market m) {
  switch (m) {
    case Market::Dam: return "dam";
    case Market::Asm: return "asm";
    case Market::AsmD: return "asm-d";
    case Market::AsmT: return "asm-t";
  }
  return "?";
}

inline Market parse_market(const std::string& s) {
  if (s == "dam") return Market::Dam;
  if (s == "asm") return Market::Asm;
  if (s == "asm-d") return Market::AsmD;
  if (s == "asm-t") return Market::AsmT;
  throw Error(ErrorCode::InvalidInput, "unknown market '" + s + "'");
}

enum class ResourceKind { Unit, Load };

struct BidSlot {
  ResourceKind kind = ResourceKind::Unit;
  std::size_t index = 0;  // into case.units or case.loads
  BidRole role = BidRole::DamSale;
  Market market = Market::Dam;
  auto operator<=>(const BidSlot&) const = default;
};

inline const std::string& slot_resource(const MarketCase& c, const BidSlot& s) {
  return s.kind == ResourceKind::Unit ? c.units.at(s.index).id : c.loads.at(s.index).id;
}

inline const BidLadder& slot_ladder(const MarketCase& c, const BidSlot& s) {
  return c.ladder(slot_resource(c, s), s.role);
}

inline std::string slot_label(const MarketCase& c, const BidSlot& s) {
  return slot_resource(c, s) + "/" + to_string(s.role) + "/" + to_string(s.market);
}

/// Bid slots owned by aggregator `agg`, in the canonical order used for
/// strategy tuples: units (case order) then flexible loads; per unit the DAM
/// bid, then up/down per ASM family.
inline std::vector<BidSlot> owned_slots(const MarketCase& c, Scheme scheme, const std::string& agg) {
  std::vector<BidSlot> out;
  for (std::size_t u : c.units_of(agg)) {
    out.push_back({ResourceKind::Unit, u, BidRole::DamSale, Market::Dam});
    if (scheme != Scheme::C) {
      out.push_back({ResourceKind::Unit, u, BidRole::Up, Market::Asm});
      out.push_back({ResourceKind::Unit, u, BidRole::Down, Market::Asm});
    } else {
      if (c.unit_subsystem(u) != kTransmission) {
        out.push_back({ResourceKind::Unit, u, BidRole::Up, Market::AsmD});
        out.push_back({ResourceKind::Unit, u, BidRole::Down, Market::AsmD});
      }
      out.push_back({ResourceKind::Unit, u, BidRole::Up, Market::AsmT});
      out.push_back({ResourceKind::Unit, u, BidRole::Down, Market::AsmT});
    }
  }
  for (std::size_t n : c.flexible_loads_of(agg)) {
    if (scheme != Scheme::C) {
      out.push_back({ResourceKind::Load, n, BidRole::Curtail, Market::Asm});
    } else {
      if (c.load_subsystem(n) != kTransmission)
        out.push_back({ResourceKind::Load, n, BidRole::Curtail, Market::AsmD});
      out.push_back({ResourceKind::Load, n, BidRole::Curtail, Market::AsmT});
    }
  }
  return out;
}

inline std::vector<BidSlot> all_slots(const MarketCase& c, Scheme scheme) {
  std::vector<BidSlot> out;
  for (const auto& a : c.aggregators) {
    auto s = owned_slots(c, scheme, a);
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

/// Selected candidate index per bid slot.
class StrategyProfile {
 public:
  void set(const BidSlot& s, std::size_t candidate) { choice_[s] = candidate; }
  bool has(const BidSlot& s) const { return choice_.count(s) > 0; }
  std::size_t choice(const BidSlot& s) const {
    auto it = choice_.find(s);
    if (it == choice_.end()) throw Error(ErrorCode::InvalidInput, "profile lacks a bid slot");
    return it->second;
  }
  double price(const MarketCase& c, const BidSlot& s) const {
    const auto& lad = slot_ladder(c, s);
    std::size_t a = choice(s);
    if (a >= lad.prices.size())
      throw Error(ErrorCode::InvalidInput, "candidate index out of ladder range for " + slot_label(c, s));
    return lad.prices[a];
  }
  const std::map<BidSlot, std::size_t>& entries() const { return choice_; }
  std::size_t size() const { return choice_.size(); }

  /// Overwrite the entries of `other` into this profile.
  void merge(const StrategyProfile& other) {
    for (const auto& [s, a] : other.choice_) choice_[s] = a;
  }
  StrategyProfile restricted(const std::vector<BidSlot>& slots) const {
    StrategyProfile p;
    for (const auto& s : slots)
      if (has(s)) p.set(s, choice(s));
    return p;
  }
  std::vector<std::size_t> tuple(const std::vector<BidSlot>& slots) const {
    std::vector<std::size_t> t;
    t.reserve(slots.size());
    for (const auto& s : slots) t.push_back(choice(s));
    return t;
  }
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v) { h = (h ^ v) * 1099511628211ull; };
    for (const auto& [s, a] : choice_) {
      mix(static_cast<std::uint64_t>(s.kind));
      mix(s.index);
      mix(static_cast<std::uint64_t>(s.role));
      mix(static_cast<std::uint64_t>(s.market));
      mix(a);
    }
    return h;
  }
  bool operator==(const StrategyProfile&) const = default;

 private:
  std::map<BidSlot, std::size_t> choice_;
};

inline std::size_t max_index(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline std::size_t min_index(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = i;
  return best;
}

/// Starting bids of the best-response loop: DAM and up-regulation at their
/// maximum candidate, down-regulation at the minimum, curtailment at the maximum.
inline StrategyProfile initial_profile(const MarketCase& c, Scheme scheme) {
  StrategyProfile p;
  for (const auto& s : all_slots(c, scheme)) {
    const auto& prices = slot_ladder(c, s).prices;
    p.set(s, s.role == BidRole::Down ? min_index(prices) : max_index(prices));
  }
  return p;
}

/// Locate the candidate index of a price within a ladder (1e-9 tolerance).
inline std::size_t candidate_of(const BidLadder& lad, double price) {
  for (std::size_t a = 0; a < lad.prices.size(); ++a)
    if (std::abs(lad.prices[a] - price) <= 1e-9 * std::max(1.0, std::abs(price))) return a;
  throw Error(ErrorCode::InvalidInput, "price " + std::to_string(price) + " is not a candidate of " +
                                           lad.resource + "/" + to_string(lad.role));
}

/// Per-resource prices of one market family, flattened for the clearing code.
struct AsmPrices {
  std::vector<double> up;       // per unit
  std::vector<double> down;     // per unit
  std::vector<double> curtail;  // per load (0 for inflexible loads)
};

/// Prices of family `m` for every resource bidding in it; resources without a
/// slot in that family get NaN (they do not participate).
inline AsmPrices asm_prices(const MarketCase& c, const StrategyProfile& p, Market m) {
  const double nan = std::nan("");
  AsmPrices out{std::vector<double>(c.units.size(), nan), std::vector<double>(c.units.size(), nan),
                std::vector<double>(c.loads.size(), nan)};
  for (const auto& [s, a] : p.entries()) {
    if (s.market != m) continue;
    double price = p.price(c, s);
    if (s.kind == ResourceKind::Unit) {
      (s.role == BidRole::Up ? out.up : out.down)[s.index] = price;
    } else {
      out.curtail[s.index] = price;
    }
  }
  return out;
}

inline std::vector<double> dam_prices(const MarketCase& c, const StrategyProfile& p) {
  std::vector<double> b(c.units.size(), std::nan(""));
  for (const auto& [s, a] : p.entries())
    if (s.market == Market::Dam) b[s.index] = p.price(c, s);
  return b;
}

}  // namespace tsodso
