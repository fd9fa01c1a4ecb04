#pragma once

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tsodso/case_io.hpp"
#include "tsodso/equilibrium.hpp"
#include "tsodso/market_clearing.hpp"
#include "tsodso/mpec_builder.hpp"
#include "tsodso/oracle.hpp"

namespace tsodso {

namespace cli_detail {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Solver limits from TSODSO_NODE_LIMIT, TSODSO_TIME_LIMIT and TSODSO_GAP.
inline milp::SolverConfig solver_config_from_env() {
  milp::SolverConfig cfg;
  auto get = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  auto number = [](const char* name, const std::string& v) {
    try {
      std::size_t used = 0;
      double d = std::stod(v, &used);
      if (used != v.size() || !(d >= 0.0)) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw UsageError(std::string(name) + " must be a nonnegative number, got '" + v + "'");
    }
  };
  if (auto v = get("TSODSO_NODE_LIMIT")) cfg.node_limit = static_cast<std::size_t>(number("TSODSO_NODE_LIMIT", *v));
  if (auto v = get("TSODSO_TIME_LIMIT")) cfg.time_limit_seconds = number("TSODSO_TIME_LIMIT", *v);
  if (auto v = get("TSODSO_GAP")) cfg.relative_gap = number("TSODSO_GAP", *v);
  return cfg;
}

/// Aggregator by id, or by 1-based roster position.
inline std::string resolve_aggregator(const MarketCase& c, const std::string& arg) {
  for (const auto& a : c.aggregators)
    if (a == arg) return a;
  try {
    std::size_t used = 0;
    long k = std::stol(arg, &used);
    if (used == arg.size() && k >= 1 && static_cast<std::size_t>(k) <= c.aggregators.size())
      return c.aggregators[static_cast<std::size_t>(k - 1)];
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidInput, "unknown aggregator '" + arg + "'");
}

inline std::size_t resolve_scenario(const MarketCase& c, const std::string& arg) {
  for (std::size_t s = 0; s < c.scenarios.size(); ++s)
    if (c.scenarios[s].id == arg) return s;
  throw Error(ErrorCode::InvalidInput, "unknown scenario '" + arg + "'");
}

/// Profile file plus the initial bids for every slot it leaves open.
inline StrategyProfile profile_or_initial(const MarketCase& c, Scheme scheme, const std::string& path) {
  auto p = initial_profile(c, scheme);
  if (!path.empty()) p.merge(load_profile(c, path));
  return p;
}

inline json trace_json(const MarketCase& c, const EquilibriumReport& r) {
  json t = json::array();
  for (const auto& s : r.trace) {
    json step{{"iteration", s.iteration}, {"aggregator", s.aggregator}, {"changed", s.changed}};
    step["old_profit"] = std::isfinite(s.old_profit) ? json(s.old_profit) : json(nullptr);
    step["new_profit"] = std::isfinite(s.new_profit) ? json(s.new_profit) : json(nullptr);
    if (s.changed) {
      step["old_bids"] = profile_to_json(c, s.old_strategy)["bids"];
      step["new_bids"] = profile_to_json(c, s.new_strategy)["bids"];
    }
    t.push_back(std::move(step));
  }
  return t;
}

}  // namespace cli_detail

/// Command-line entry point; returns the process exit code
/// (0 success, 1 domain error, 2 usage error).
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Strategic bidding equilibria in sequential day-ahead and ancillary services markets"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tsodso 1.0");

  std::string case_path, profile_path, bids_path, scheme_s = "A", agg_s, scenario_s, out_path;
  std::size_t max_iter = 50;
  bool use_oracle = false, corrected = false, no_certify = false, json_out = false;

  auto add_case = [&](CLI::App* s) { s->add_option("case", case_path, "case file (JSON)")->required(); };
  auto add_scheme = [&](CLI::App* s) {
    s->add_option("--scheme", scheme_s, "coordination scheme A, B or C")
        ->check(CLI::IsMember({"A", "B", "C", "a", "b", "c"}));
  };

  auto* validate = app.add_subcommand("validate", "check a case file");
  add_case(validate);

  auto* clear_dam_cmd = app.add_subcommand("clear-dam", "clear the day-ahead market for given bids");
  add_case(clear_dam_cmd);
  clear_dam_cmd->add_option("--bids", bids_path, "DAM bids: {unit: price} or a profile file")->required();

  auto* clear_asm_cmd = app.add_subcommand("clear-asm", "clear the ancillary services markets of one scenario");
  add_case(clear_asm_cmd);
  add_scheme(clear_asm_cmd);
  clear_asm_cmd->add_option("--scenario", scenario_s, "scenario id")->required();
  clear_asm_cmd->add_option("--profile", profile_path, "bid profile (open slots take the initial bids)");

  auto* br = app.add_subcommand("best-response", "solve one aggregator's MPEC with rivals fixed");
  add_case(br);
  add_scheme(br);
  br->add_option("--aggregator", agg_s, "aggregator id or 1-based position")->required();
  br->add_option("--profile", profile_path, "rival bids (open slots take the initial bids)");
  br->add_flag("--oracle", use_oracle, "cross-check against exhaustive enumeration");

  auto* eq = app.add_subcommand("equilibrium", "run iterated best responses");
  add_case(eq);
  add_scheme(eq);
  eq->add_option("--max-iter", max_iter, "maximum number of sweeps")->check(CLI::PositiveNumber);
  eq->add_option("--out", out_path, "output directory");
  eq->add_flag("--no-certify", no_certify, "skip the final Nash check");

  auto* vn = app.add_subcommand("verify-nash", "check that no aggregator gains by deviating");
  add_case(vn);
  add_scheme(vn);
  vn->add_option("--profile", profile_path, "bid profile")->required();
  vn->add_flag("--oracle", use_oracle, "use exhaustive enumeration instead of the MPEC");

  auto* mps = app.add_subcommand("export-mps", "write one aggregator's MPEC in MPS format");
  add_case(mps);
  add_scheme(mps);
  mps->add_option("--aggregator", agg_s, "aggregator id or 1-based position")->required();
  mps->add_option("--profile", profile_path, "rival bids (open slots take the initial bids)");
  mps->add_option("--out", out_path, "output file")->required();

  auto* bundled = app.add_subcommand("write-bundled", "write the bundled CIGRE-like case");
  bundled->add_option("--out", out_path, "output file")->required();
  bundled->add_flag("--corrected-ladders", corrected, "rebuild ladders from cost multipliers");
  bundled->add_option("--dam-bids", bids_path, "also write the reference DAM bids to this file");

  for (auto* s : {clear_dam_cmd, clear_asm_cmd, br, eq, vn}) s->add_flag("--json", json_out, "print JSON instead of CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    Scheme scheme = parse_scheme(std::string(1, static_cast<char>(std::toupper(scheme_s[0]))));

    if (*validate) {
      auto c = case_from_json(parse_json_text(read_file(case_path), case_path));
      auto rep = validate_case(c);
      for (const auto& w : rep.warnings)
        err << "warning: " << w.section << (w.field.empty() ? "" : "/" + w.field) << ": " << w.reason << "\n";
      for (const auto& f : rep.fatal)
        err << "error: " << f.section << (f.field.empty() ? "" : "/" + f.field) << ": " << f.reason << "\n";
      if (!rep.ok()) return 1;
      std::size_t flex = 0;
      for (const auto& l : c.loads) flex += l.flexible();
      out << "ok," << c.name << "\n"
          << "units," << c.units.size() << "\nflexible_loads," << flex << "\nloads," << c.loads.size()
          << "\nrenewables," << c.renewables.size() << "\nlines," << c.network.lines.size() << "\nscenarios,"
          << c.scenarios.size() << "\naggregators," << c.aggregators.size() << "\n";
      return 0;
    }

    if (*bundled) {
      save_case(cigre_case(corrected), out_path);
      if (!bids_path.empty()) write_file(bids_path, json(cigre_reference_dam_bids()).dump(2) + "\n");
      out << "wrote " << out_path << "\n";
      return 0;
    }

    auto c = load_case(case_path);

    if (*clear_dam_cmd) {
      auto bids = load_dam_bids(bids_path);
      auto r = clear_dam(c, bids);
      if (json_out) {
        json units = json::array();
        for (std::size_t u = 0; u < c.units.size(); ++u)
          units.push_back({{"unit", c.units[u].id}, {"bid", r.bids[u]}, {"dispatch", r.dispatch[u]},
                           {"capacity_dual", r.capacity_dual[u]}});
        out << json{{"price", r.price}, {"objective", r.objective}, {"units", units}}.dump(2) << "\n";
        return 0;
      }
      out << "lambda," << fmt_num(r.price) << "\n\nunit,bid,dispatch\n";
      for (std::size_t u = 0; u < c.units.size(); ++u)
        out << c.units[u].id << "," << fmt_num(r.bids[u]) << "," << fmt_num(r.dispatch[u]) << "\n";
      return 0;
    }

    if (*clear_asm_cmd) {
      auto p = profile_or_initial(c, scheme, profile_path);
      std::size_t s = resolve_scenario(c, scenario_s);
      auto o = clear_markets(c, scheme, p);
      auto b = make_bundle(c, scheme, p, o);
      if (json_out) {
        json rows = json::array();
        for (const auto& d : b.dispatch[s])
          rows.push_back({{"resource", d.resource}, {"action", d.action}, {"market", d.market}, {"quantity", d.quantity}});
        json markets = json::array();
        for (const auto& r : o.asm_results[s])
          markets.push_back({{"market", market_label(r)}, {"imbalance", r.imbalance}, {"cost", r.objective},
                             {"balance_dual", r.balance_dual}});
        out << json{{"scenario", c.scenarios[s].id}, {"dam_price", o.dam.price}, {"markets", markets},
                    {"dispatch", rows}, {"cost", b.scenario_costs[s]}}
                   .dump(2)
            << "\n";
        return 0;
      }
      out << "market,imbalance,cost,balance_dual\n";
      for (const auto& r : o.asm_results[s])
        out << market_label(r) << "," << fmt_num(r.imbalance) << "," << fmt_num(r.objective) << ","
            << fmt_num(r.balance_dual) << "\n";
      out << "\nresource,action,market,quantity\n";
      for (const auto& d : b.dispatch[s])
        if (d.action != "dam") out << d.resource << "," << d.action << "," << d.market << "," << fmt_num(d.quantity) << "\n";
      return 0;
    }

    if (*br) {
      auto cfg = solver_config_from_env();
      std::string agg = resolve_aggregator(c, agg_s);
      auto p = profile_or_initial(c, scheme, profile_path);
      auto m = mpec_best_response(c, scheme, agg, p, cfg);
      json j{{"aggregator", agg}, {"scheme", to_string(scheme)}, {"profit", m.profit}, {"nodes", m.nodes},
             {"bids", profile_to_json(c, m.strategy)["bids"]}};
      bool agree = true;
      if (use_oracle) {
        auto o = enumerate_best_response(c, scheme, agg, p);
        agree = std::abs(o.profit - m.profit) <= kProfitTolerance && o.strategy == m.strategy;
        j["oracle_profit"] = o.profit;
        j["oracle_bids"] = profile_to_json(c, o.strategy)["bids"];
        j["agree"] = agree;
      }
      if (json_out) {
        out << j.dump(2) << "\n";
      } else {
        out << "aggregator," << agg << "\nprofit," << fmt_num(m.profit) << "\n";
        if (use_oracle) out << "oracle_profit," << fmt_num(j["oracle_profit"].get<double>()) << "\nagree," << (agree ? "true" : "false") << "\n";
        out << "\nresource,role,market,price\n";
        for (const auto& [s, a] : m.strategy.entries())
          out << slot_resource(c, s) << "," << to_string(s.role) << "," << to_string(s.market) << ","
              << fmt_num(m.strategy.price(c, s)) << "\n";
      }
      if (!agree) {
        err << "error: MPEC and enumeration disagree\n";
        return 1;
      }
      return 0;
    }

    if (*eq) {
      EquilibriumConfig cfg;
      cfg.max_iterations = max_iter;
      cfg.certify = !no_certify;
      cfg.responder = mpec_responder(solver_config_from_env());
      auto r = find_equilibrium(c, scheme, cfg);
      json rep{{"converged", r.converged}, {"cycled", r.cycled}, {"iterations", r.iterations},
               {"nash_certified", r.nash_certified}, {"trace", trace_json(c, r)}};
      rep["improvements"] = r.improvements;
      rep["profile"] = profile_to_json(c, r.profile)["bids"];
      std::optional<ResultBundle> bundle;
      try {
        bundle = make_bundle(c, scheme, r.profile, clear_markets(c, scheme, r.profile));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Infeasible) throw;
        err << "warning: final profile does not clear: " << e.what() << "\n";
      }
      if (bundle) {
        for (auto& [k, v] : rep.items()) bundle->report[k] = v;
      }
      if (!out_path.empty()) {
        ResultBundle empty;
        empty.scheme = scheme;
        empty.report = rep;
        write_results(bundle ? *bundle : empty, out_path);
      }
      if (json_out) {
        out << (bundle ? bundle->report : rep).dump(2) << "\n";
      } else {
        out << "scheme," << to_string(scheme) << "\nconverged," << (r.converged ? "true" : "false") << "\ncycled,"
            << (r.cycled ? "true" : "false") << "\niterations," << r.iterations << "\nnash_certified,"
            << (r.nash_certified ? "true" : "false") << "\n";
        if (bundle) out << "expected_cost," << fmt_num(r.cost.expected) << "\n";
      }
      return 0;
    }

    if (*vn) {
      auto p = load_profile(c, profile_path);
      auto check = is_nash(c, scheme, p, use_oracle ? oracle_responder() : mpec_responder(solver_config_from_env()));
      if (json_out) {
        json imp = json::object();
        for (std::size_t i = 0; i < c.aggregators.size(); ++i) imp[c.aggregators[i]] = check.improvements[i];
        out << json{{"nash", check.nash}, {"improvements", imp}}.dump(2) << "\n";
      } else {
        out << "aggregator,improvement\n";
        for (std::size_t i = 0; i < c.aggregators.size(); ++i)
          out << c.aggregators[i] << "," << fmt_num(check.improvements[i]) << "\n";
        out << "\nnash," << (check.nash ? "true" : "false") << "\n";
      }
      return 0;
    }

    if (*mps) {
      std::string agg = resolve_aggregator(c, agg_s);
      auto p = profile_or_initial(c, scheme, profile_path);
      auto inst = build_mpec(c, scheme, agg, p);
      write_file(out_path, milp::export_mps(inst.model));
      out << "wrote " << out_path << " (" << inst.model.num_vars() << " columns, " << inst.model.num_rows() << " rows, "
          << inst.model.num_binaries() << " binaries, " << inst.model.sos1_sets().size() << " SOS1 sets)\n";
      return 0;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace tsodso
