#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tsodso {

enum class ErrorCode {
  InvalidInput,
  DanglingReference,
  NotNormalized,
  Infeasible,
  SolverFailure,
  LimitExceeded,
  Parse,
  Io,
  Internal,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::DanglingReference: return "dangling-reference";
    case ErrorCode::NotNormalized: return "not-normalized";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::SolverFailure: return "solver-failure";
    case ErrorCode::LimitExceeded: return "limit-exceeded";
    case ErrorCode::Parse: return "parse-error";
    case ErrorCode::Io: return "io-error";
    case ErrorCode::Internal: return "internal-error";
  }
  return "unknown";
}

/// Every domain failure of the library surfaces as this exception.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Subsystem 0 is the transmission network, k >= 1 the distribution network D_k.
inline constexpr int kTransmission = 0;

struct Node {
  int id = 0;
  int subsystem = kTransmission;
  bool operator==(const Node&) const = default;
};

struct Line {
  std::string id;
  int subsystem = kTransmission;
  int from = 0;
  int to = 0;
  double limit = 0.0;  // MW
  bool operator==(const Line&) const = default;
};

struct Network {
  std::vector<Node> nodes;
  std::vector<Line> lines;
  /// ptdf[l][j]: sensitivity of line l to an injection at nodes[j].
  std::vector<std::vector<double>> ptdf;

  bool operator==(const Network&) const = default;

  std::optional<std::size_t> find_node(int id) const {
    for (std::size_t j = 0; j < nodes.size(); ++j)
      if (nodes[j].id == id) return j;
    return std::nullopt;
  }
  std::size_t node_index(int id) const {
    auto j = find_node(id);
    if (!j) throw Error(ErrorCode::DanglingReference, "unknown node " + std::to_string(id));
    return *j;
  }
  int subsystem_of(int node_id) const { return nodes[node_index(node_id)].subsystem; }
  /// Number K of distribution networks (largest subsystem index).
  int distribution_count() const {
    int k = 0;
    for (const auto& n : nodes) k = std::max(k, n.subsystem);
    return k;
  }
};

struct ProgrammableUnit {
  std::string id;
  int node = 0;
  std::string owner;
  double capacity = 0.0;
  double cost = 0.0;
  double up_cost = 0.0;
  double down_cost = 0.0;
  bool operator==(const ProgrammableUnit&) const = default;
};

struct RenewableUnit {
  std::string id;
  int node = 0;
  double forecast = 0.0;
  std::vector<double> realized;  // per scenario
  bool operator==(const RenewableUnit&) const = default;
};

struct LoadPoint {
  std::string id;
  int node = 0;
  double forecast = 0.0;
  std::vector<double> realized;  // per scenario
  double flex_fraction = 0.0;
  std::string owner;
  bool flexible() const { return flex_fraction > 0.0; }
  /// Curtailable quantity δ_n·D̃_{n,s}.
  double curtailable(std::size_t s) const { return flex_fraction * realized.at(s); }
  bool operator==(const LoadPoint&) const = default;
};

enum class BidRole { DamSale, Up, Down, Curtail };

inline const char* to_string(BidRole r) {
  switch (r) {
    case BidRole::DamSale: return "dam-sale";
    case BidRole::Up: return "up-regulation";
    case BidRole::Down: return "down-regulation";
    case BidRole::Curtail: return "load-curtailment";
  }
  return "?";
}

inline BidRole parse_role(const std::string& s) {
  if (s == "dam-sale") return BidRole::DamSale;
  if (s == "up-regulation") return BidRole::Up;
  if (s == "down-regulation") return BidRole::Down;
  if (s == "load-curtailment") return BidRole::Curtail;
  throw Error(ErrorCode::InvalidInput, "unknown bid role '" + s + "'");
}

struct BidLadder {
  std::string resource;
  BidRole role = BidRole::DamSale;
  std::vector<double> prices;
  bool operator==(const BidLadder&) const = default;
};

struct Scenario {
  std::string id;
  double probability = 0.0;
  bool operator==(const Scenario&) const = default;
};

struct MarketCase {
  std::string name;
  Network network;
  std::vector<ProgrammableUnit> units;
  std::vector<RenewableUnit> renewables;
  std::vector<LoadPoint> loads;
  std::vector<BidLadder> ladders;
  std::vector<Scenario> scenarios;
  std::vector<std::string> aggregators;  // roster order = sweep order
  /// Datum path -> "paper" | "calibrated" | "user".
  std::map<std::string, std::string> provenance;

  bool operator==(const MarketCase&) const = default;

  std::size_t scenario_index(const std::string& id) const {
    for (std::size_t s = 0; s < scenarios.size(); ++s)
      if (scenarios[s].id == id) return s;
    throw Error(ErrorCode::InvalidInput, "unknown scenario '" + id + "'");
  }
  std::size_t aggregator_index(const std::string& id) const {
    for (std::size_t i = 0; i < aggregators.size(); ++i)
      if (aggregators[i] == id) return i;
    throw Error(ErrorCode::InvalidInput, "unknown aggregator '" + id + "'");
  }
  std::size_t unit_index(const std::string& id) const {
    for (std::size_t u = 0; u < units.size(); ++u)
      if (units[u].id == id) return u;
    throw Error(ErrorCode::DanglingReference, "unknown unit '" + id + "'");
  }
  std::size_t load_index(const std::string& id) const {
    for (std::size_t n = 0; n < loads.size(); ++n)
      if (loads[n].id == id) return n;
    throw Error(ErrorCode::DanglingReference, "unknown load '" + id + "'");
  }
  const BidLadder* find_ladder(const std::string& resource, BidRole role) const {
    for (const auto& l : ladders)
      if (l.resource == resource && l.role == role) return &l;
    return nullptr;
  }
  const BidLadder& ladder(const std::string& resource, BidRole role) const {
    const auto* l = find_ladder(resource, role);
    if (!l)
      throw Error(ErrorCode::DanglingReference,
                  "no " + std::string(to_string(role)) + " ladder for '" + resource + "'");
    return *l;
  }
  int unit_subsystem(std::size_t u) const { return network.subsystem_of(units[u].node); }
  int load_subsystem(std::size_t n) const { return network.subsystem_of(loads[n].node); }
  int renewable_subsystem(std::size_t r) const { return network.subsystem_of(renewables[r].node); }

  std::vector<std::size_t> units_of(const std::string& agg) const {
    std::vector<std::size_t> out;
    for (std::size_t u = 0; u < units.size(); ++u)
      if (units[u].owner == agg) out.push_back(u);
    return out;
  }
  std::vector<std::size_t> flexible_loads_of(const std::string& agg) const {
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < loads.size(); ++n)
      if (loads[n].flexible() && loads[n].owner == agg) out.push_back(n);
    return out;
  }
};

struct Imbalance {
  double total = 0.0;
  double transmission = 0.0;
  std::vector<double> distribution;  // index k-1 for D_k
};

/// Δ_s with its split by subsystem. The split is computed first and summed so the
/// decomposition holds exactly in floating point.
inline Imbalance compute_imbalances(const MarketCase& c, std::size_t s) {
  if (s >= c.scenarios.size())
    throw Error(ErrorCode::InvalidInput, "scenario index out of range");
  Imbalance im;
  im.distribution.assign(static_cast<std::size_t>(c.network.distribution_count()), 0.0);
  auto slot = [&](int sub) -> double& {
    return sub == kTransmission ? im.transmission
                                : im.distribution[static_cast<std::size_t>(sub - 1)];
  };
  for (std::size_t n = 0; n < c.loads.size(); ++n)
    slot(c.load_subsystem(n)) += c.loads[n].realized.at(s) - c.loads[n].forecast;
  for (std::size_t r = 0; r < c.renewables.size(); ++r)
    slot(c.renewable_subsystem(r)) += c.renewables[r].forecast - c.renewables[r].realized.at(s);
  im.total = im.transmission;
  for (double d : im.distribution) im.total += d;
  return im;
}

inline Imbalance compute_imbalances(const MarketCase& c, const std::string& scenario_id) {
  return compute_imbalances(c, c.scenario_index(scenario_id));
}

/// Flows for injections given per node position (network.nodes order).
inline std::vector<double> ptdf_flows(const Network& net, std::span<const double> injection) {
  std::vector<double> flow(net.lines.size(), 0.0);
  for (std::size_t l = 0; l < net.lines.size(); ++l) {
    double f = 0.0;
    for (std::size_t j = 0; j < injection.size() && j < net.ptdf[l].size(); ++j)
      f += net.ptdf[l][j] * injection[j];
    flow[l] = f;
  }
  return flow;
}

inline std::map<std::string, double> ptdf_flows(const Network& net,
                                                const std::map<int, double>& injections) {
  std::vector<double> inj(net.nodes.size(), 0.0);
  for (const auto& [node, mw] : injections) inj[net.node_index(node)] = mw;
  auto f = ptdf_flows(net, inj);
  std::map<std::string, double> out;
  for (std::size_t l = 0; l < net.lines.size(); ++l) out[net.lines[l].id] = f[l];
  return out;
}

inline double net_load(const MarketCase& c) {
  double d = 0.0;
  for (const auto& l : c.loads) d += l.forecast;
  for (const auto& r : c.renewables) d -= r.forecast;
  return d;
}

struct ValidationIssue {
  std::string section;
  std::string field;
  std::string reason;
  ErrorCode code = ErrorCode::InvalidInput;
};

struct ValidationReport {
  std::vector<ValidationIssue> fatal;
  std::vector<ValidationIssue> warnings;
  bool ok() const { return fatal.empty(); }
};

inline ValidationReport validate_case(const MarketCase& c) {
  ValidationReport rep;
  auto fatal = [&](std::string sec, std::string field, std::string why,
                   ErrorCode code = ErrorCode::InvalidInput) {
    rep.fatal.push_back({std::move(sec), std::move(field), std::move(why), code});
  };
  auto warn = [&](std::string sec, std::string field, std::string why) {
    rep.warnings.push_back({std::move(sec), std::move(field), std::move(why), ErrorCode::InvalidInput});
  };
  const auto& net = c.network;
  const std::size_t S = c.scenarios.size();

  std::map<int, int> seen_nodes;
  for (const auto& n : net.nodes) {
    if (seen_nodes.count(n.id)) fatal("network", "nodes/" + std::to_string(n.id), "duplicate node id");
    seen_nodes[n.id] = n.subsystem;
    if (n.subsystem < 0) fatal("network", "nodes/" + std::to_string(n.id), "negative subsystem");
  }
  auto node_ok = [&](int id) { return seen_nodes.count(id) > 0; };

  if (net.ptdf.size() != net.lines.size())
    fatal("network", "ptdf", "row count differs from line count");
  for (std::size_t l = 0; l < net.lines.size(); ++l) {
    const auto& ln = net.lines[l];
    std::string f = "lines/" + ln.id;
    if (!node_ok(ln.from) || !node_ok(ln.to)) {
      fatal("network", f, "endpoint references unknown node", ErrorCode::DanglingReference);
    } else if (seen_nodes[ln.from] != ln.subsystem || seen_nodes[ln.to] != ln.subsystem) {
      fatal("network", f, "endpoints not in the line's subsystem");
    }
    if (!(ln.limit > 0.0)) fatal("network", f, "flow limit must be positive");
    if (l < net.ptdf.size() && net.ptdf[l].size() != net.nodes.size())
      fatal("network", "ptdf/" + ln.id, "column count differs from node count");
  }

  std::map<std::string, int> ids;
  auto unique_id = [&](const std::string& sec, const std::string& id) {
    if (ids[id]++) fatal(sec, id, "duplicate resource id");
  };
  std::map<std::string, int> roster;
  for (const auto& a : c.aggregators)
    if (roster[a]++) fatal("aggregators", a, "duplicate aggregator id");

  for (const auto& u : c.units) {
    unique_id("units", u.id);
    if (!node_ok(u.node)) fatal("units", u.id + "/node", "unknown node", ErrorCode::DanglingReference);
    if (!roster.count(u.owner))
      fatal("units", u.id + "/owner", "owner '" + u.owner + "' not in aggregator roster",
            ErrorCode::DanglingReference);
    if (u.capacity < 0.0) fatal("units", u.id + "/capacity", "negative capacity");
    else if (u.capacity == 0.0) warn("units", u.id + "/capacity", "zero capacity");
    if (!(u.up_cost >= u.cost && u.cost >= u.down_cost && u.down_cost >= 0.0))
      warn("units", u.id, "cost ordering C_up >= C >= C_down >= 0 violated");
  }
  for (const auto& r : c.renewables) {
    unique_id("renewables", r.id);
    if (!node_ok(r.node)) fatal("renewables", r.id + "/node", "unknown node", ErrorCode::DanglingReference);
    if (r.forecast < 0.0) fatal("renewables", r.id + "/forecast", "negative forecast");
    if (r.realized.size() != S) fatal("renewables", r.id + "/realized", "length differs from scenario count");
    for (double w : r.realized)
      if (w < 0.0) fatal("renewables", r.id + "/realized", "negative realization");
  }
  for (const auto& l : c.loads) {
    unique_id("loads", l.id);
    if (!node_ok(l.node)) fatal("loads", l.id + "/node", "unknown node", ErrorCode::DanglingReference);
    if (l.forecast < 0.0) fatal("loads", l.id + "/forecast", "negative forecast");
    if (l.realized.size() != S) fatal("loads", l.id + "/realized", "length differs from scenario count");
    for (double d : l.realized)
      if (d < 0.0) fatal("loads", l.id + "/realized", "negative realization");
    if (l.flex_fraction < 0.0 || l.flex_fraction > 1.0)
      fatal("loads", l.id + "/flex_fraction", "must lie in [0,1]");
    if (l.flexible() && !roster.count(l.owner))
      fatal("loads", l.id + "/owner", "flexible load owner '" + l.owner + "' not in aggregator roster",
            ErrorCode::DanglingReference);
  }

  std::map<std::pair<std::string, BidRole>, int> ladder_seen;
  for (const auto& lad : c.ladders) {
    std::string f = lad.resource + "/" + to_string(lad.role);
    if (ladder_seen[{lad.resource, lad.role}]++) fatal("ladders", f, "duplicate ladder");
    bool is_unit = std::any_of(c.units.begin(), c.units.end(),
                               [&](const auto& u) { return u.id == lad.resource; });
    bool is_flex = std::any_of(c.loads.begin(), c.loads.end(), [&](const auto& l) {
      return l.id == lad.resource && l.flexible();
    });
    bool role_ok = lad.role == BidRole::Curtail ? is_flex : is_unit;
    if (!role_ok)
      fatal("ladders", f, "references unknown resource '" + lad.resource + "'",
            ErrorCode::DanglingReference);
    if (lad.prices.empty()) fatal("ladders", f, "empty candidate list");
    for (std::size_t a = 0; a < lad.prices.size(); ++a) {
      if (!(lad.prices[a] > 0.0)) fatal("ladders", f, "candidate prices must be positive");
      for (std::size_t b = 0; b < a; ++b)
        if (lad.prices[a] == lad.prices[b]) fatal("ladders", f, "duplicate candidate price");
    }
  }
  for (const auto& u : c.units)
    for (BidRole r : {BidRole::DamSale, BidRole::Up, BidRole::Down})
      if (!ladder_seen.count({u.id, r})) fatal("ladders", u.id, std::string("missing ") + to_string(r) + " ladder");
  for (const auto& l : c.loads)
    if (l.flexible() && !ladder_seen.count({l.id, BidRole::Curtail}))
      fatal("ladders", l.id, "missing load-curtailment ladder");

  if (S == 0) fatal("scenarios", "", "no scenarios");
  double sum = 0.0;
  for (const auto& s : c.scenarios) {
    if (s.probability < 0.0) fatal("scenarios", s.id, "negative probability");
    sum += s.probability;
  }
  if (S > 0 && std::abs(sum - 1.0) > 1e-9)
    fatal("scenarios", "probability", "probabilities not normalized", ErrorCode::NotNormalized);
  if (c.aggregators.empty()) warn("aggregators", "", "empty roster");
  return rep;
}

/// Throws the first fatal issue of validate_case.
inline void require_valid(const MarketCase& c) {
  auto rep = validate_case(c);
  if (!rep.ok()) {
    const auto& f = rep.fatal.front();
    throw Error(f.code, f.section + (f.field.empty() ? "" : "/" + f.field) + ": " + f.reason);
  }
}

}  // namespace tsodso
