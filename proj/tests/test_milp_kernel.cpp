#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "support/lp_oracle.hpp"
#include "tsodso/milp_kernel.hpp"

using namespace tsodso::milp;
using oracle_support::check_duals;

namespace {

std::vector<double> lowers(const MilpModel& m) {
  std::vector<double> v;
  for (const auto& x : m.variables()) v.push_back(x.lower);
  return v;
}
std::vector<double> uppers(const MilpModel& m) {
  std::vector<double> v;
  for (const auto& x : m.variables()) v.push_back(x.upper);
  return v;
}

MilpModel random_lp(std::mt19937& rng, int n, int rows) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_int_distribution<int> S(0, 2);
  MilpModel m;
  for (int j = 0; j < n; ++j) m.add_variable("x" + std::to_string(j), -2.0 + U(rng), 3.0 + U(rng));
  // rows pass through an interior point so the LP is feasible
  std::vector<double> x0(n);
  for (int j = 0; j < n; ++j) x0[j] = 0.5 * U(rng);
  for (int i = 0; i < rows; ++i) {
    std::vector<Term> t;
    double a0 = 0.0;
    for (int j = 0; j < n; ++j) {
      double a = U(rng);
      t.push_back({static_cast<std::size_t>(j), a});
      a0 += a * x0[j];
    }
    int s = S(rng);
    Sense sense = s == 0 ? Sense::LessEqual : s == 1 ? Sense::GreaterEqual : Sense::Equal;
    double rhs = sense == Sense::LessEqual ? a0 + 0.5 * std::abs(U(rng))
                 : sense == Sense::GreaterEqual ? a0 - 0.5 * std::abs(U(rng))
                                                : a0;
    m.add_constraint("r" + std::to_string(i), t, sense, rhs);
  }
  std::vector<Term> obj;
  for (int j = 0; j < n; ++j) obj.push_back({static_cast<std::size_t>(j), U(rng)});
  m.set_objective(rng() % 2 ? ObjSense::Maximize : ObjSense::Minimize, obj, U(rng));
  return m;
}

MilpModel knapsack() {
  MilpModel m;
  m.set_name("knapsack");
  const double w[] = {12, 7, 11, 8, 9, 6};
  const double v[] = {24, 13, 23, 15, 16, 11};
  std::vector<Term> cap, obj;
  for (int j = 0; j < 6; ++j) {
    auto x = m.add_binary("item" + std::to_string(j));
    cap.push_back({x, w[j]});
    obj.push_back({x, v[j]});
  }
  m.add_constraint("capacity", cap, Sense::LessEqual, 26);
  m.set_objective(ObjSense::Maximize, obj);
  return m;
}

}  // namespace

TEST(SolveLp, BoundRowHasUnitDual) {
  MilpModel m;
  auto x = m.add_variable("x", -kInf, kInf);
  m.add_constraint("cap", {{x, 1.0}}, Sense::LessEqual, 3.0);
  m.set_objective(ObjSense::Maximize, {{x, 1.0}});
  auto s = solve_lp(m);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.values[0], 3.0, 1e-12);
  EXPECT_NEAR(s.row_duals[0], 1.0, 1e-12);
  EXPECT_NEAR(s.objective, 3.0, 1e-12);
}

TEST(SolveLp, TwoVariableHandSolution) {
  // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), value 36
  MilpModel m;
  auto x = m.add_variable("x", 0, kInf);
  auto y = m.add_variable("y", 0, kInf);
  m.add_constraint("a", {{x, 1}}, Sense::LessEqual, 4);
  m.add_constraint("b", {{y, 2}}, Sense::LessEqual, 12);
  m.add_constraint("c", {{x, 3}, {y, 2}}, Sense::LessEqual, 18);
  m.set_objective(ObjSense::Maximize, {{x, 3}, {y, 5}});
  auto s = solve_lp(m);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.values[x], 2.0, 1e-9);
  EXPECT_NEAR(s.values[y], 6.0, 1e-9);
  EXPECT_NEAR(s.objective, 36.0, 1e-9);
  EXPECT_NEAR(s.row_duals[0], 0.0, 1e-9);
  EXPECT_NEAR(s.row_duals[1], 1.5, 1e-9);
  EXPECT_NEAR(s.row_duals[2], 1.0, 1e-9);
}

TEST(SolveLp, DegenerateDuplicateRowsTerminate) {
  MilpModel m;
  auto x = m.add_variable("x", 0, kInf);
  auto y = m.add_variable("y", 0, kInf);
  for (int k = 0; k < 6; ++k) {
    m.add_constraint("d" + std::to_string(k), {{x, 1}, {y, 1}}, Sense::LessEqual, 1);
    m.add_constraint("e" + std::to_string(k), {{x, 1}, {y, -1}}, Sense::LessEqual, 0);
  }
  m.set_objective(ObjSense::Maximize, {{x, 1}, {y, 2}});
  auto s = solve_lp(m);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.values[x], 0.0, 1e-9);
  EXPECT_NEAR(s.values[y], 1.0, 1e-9);
  // perturbation oracle: tiny rhs perturbations leave the optimum unchanged
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1e-7);
  MilpModel p;
  p.add_variable("x", 0, kInf);
  p.add_variable("y", 0, kInf);
  for (const auto& r : m.constraints()) p.add_constraint(r.name, r.terms, r.sense, r.rhs + U(rng));
  p.set_objective(ObjSense::Maximize, {{0, 1}, {1, 2}});
  auto sp = solve_lp(p);
  ASSERT_TRUE(sp.optimal());
  EXPECT_NEAR(sp.objective, s.objective, 1e-6);
}

TEST(SolveLp, InfeasibleAndUnbounded) {
  MilpModel a;
  auto x = a.add_variable("x", 0, kInf);
  a.add_constraint("lo", {{x, 1}}, Sense::GreaterEqual, 5);
  a.add_constraint("hi", {{x, 1}}, Sense::LessEqual, 4);
  EXPECT_EQ(solve_lp(a).status, Status::Infeasible);

  MilpModel b;
  auto y = b.add_variable("y", 0, kInf);
  auto z = b.add_variable("z", -kInf, kInf);
  b.add_constraint("r", {{y, 1}, {z, -1}}, Sense::LessEqual, 2);
  b.set_objective(ObjSense::Maximize, {{y, 1}});
  EXPECT_EQ(solve_lp(b).status, Status::Unbounded);
}

TEST(SolveLp, RandomLpsMatchVertexEnumeration) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    int n = 2 + trial % 3;
    int rows = 1 + trial % 4;
    auto m = random_lp(rng, n, rows);
    auto ref = oracle_support::vertex_enumeration(m, lowers(m), uppers(m));
    auto s = solve_lp(m);
    ASSERT_TRUE(ref.has_value());
    ASSERT_EQ(s.status, Status::Optimal) << "trial " << trial;
    EXPECT_NEAR(s.objective, *ref, 1e-7) << "trial " << trial;
    EXPECT_LE(m.max_violation(s.values), 1e-7);
    auto dc = check_duals(m, s, lowers(m), uppers(m));
    EXPECT_NEAR(dc.dual_objective, s.objective, 1e-6) << "trial " << trial;
    EXPECT_LE(dc.worst_sign, 1e-7);
  }
}

TEST(SolveMilp, PureLpEqualsSolveLp) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = random_lp(rng, 4, 3);
    auto a = solve_lp(m);
    auto b = solve_milp(m);
    ASSERT_EQ(a.status, b.status);
    EXPECT_NEAR(a.objective, b.objective, 1e-9);
    EXPECT_EQ(b.stats.nodes, 1u);
  }
}

TEST(SolveMilp, KnapsackEqualsEnumeration) {
  auto m = knapsack();
  auto ref = oracle_support::enumerate_binary(m);
  auto s = solve_milp(m);
  ASSERT_TRUE(s.optimal());
  EXPECT_DOUBLE_EQ(s.objective, *ref);
  EXPECT_DOUBLE_EQ(s.objective, 51.0);
}

TEST(SolveMilp, SosTwoBranchCase) {
  MilpModel m;
  auto x = m.add_variable("x", 0, kInf);
  auto y = m.add_variable("y", 0, kInf);
  m.add_constraint("sum", {{x, 1}, {y, 1}}, Sense::Equal, 1);
  m.add_sos1("pair", {x, y});
  m.set_objective(ObjSense::Minimize, {{x, 1}});
  auto s = solve_milp(m);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.values[x], 0.0, 1e-9);
  EXPECT_NEAR(s.values[y], 1.0, 1e-9);
}

TEST(SolveMilp, SosForcesBranching) {
  // max x + y with x + y <= 2, x <= 1.5, y <= 1.2, SOS1{x,y} -> 1.5
  MilpModel m;
  auto x = m.add_variable("x", 0, 1.5);
  auto y = m.add_variable("y", 0, 1.2);
  m.add_constraint("sum", {{x, 1}, {y, 1}}, Sense::LessEqual, 2);
  m.add_sos1("pair", {x, y});
  m.set_objective(ObjSense::Maximize, {{x, 1}, {y, 1}});
  auto s = solve_milp(m);
  ASSERT_TRUE(s.optimal());
  EXPECT_NEAR(s.objective, 1.5, 1e-9);
  EXPECT_GT(s.stats.nodes, 1u);
}

TEST(SolveMilp, RandomMixedMatchesEnumeration) {
  // binaries + continuous SOS pairs; oracle enumerates binaries and zero patterns
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    MilpModel m;
    const int nb = 3, nc = 3;
    for (int j = 0; j < nb; ++j) m.add_binary("b" + std::to_string(j));
    for (int j = 0; j < nc; ++j) m.add_variable("c" + std::to_string(j), 0.0, 2.0);
    for (int i = 0; i < 3; ++i) {
      std::vector<Term> t;
      for (int j = 0; j < nb + nc; ++j) t.push_back({static_cast<std::size_t>(j), U(rng)});
      m.add_constraint("r" + std::to_string(i), t, Sense::LessEqual, 0.5 + std::abs(U(rng)));
    }
    m.add_sos1("s0", {3, 4});
    m.add_sos1("s1", {4, 5});
    std::vector<Term> obj;
    for (int j = 0; j < nb + nc; ++j) obj.push_back({static_cast<std::size_t>(j), U(rng)});
    m.set_objective(ObjSense::Maximize, obj);

    std::optional<double> ref;
    for (int mask = 0; mask < (1 << nb); ++mask) {
      // zero patterns consistent with the two SOS sets: which of c0..c2 may be nonzero
      for (int zp = 0; zp < (1 << nc); ++zp) {
        bool ok = !((zp & 1) && (zp & 2)) && !((zp & 2) && (zp & 4));
        if (!ok) continue;
        std::vector<double> lo(nb + nc), up(nb + nc);
        for (int j = 0; j < nb; ++j) lo[j] = up[j] = (mask >> j) & 1;
        for (int j = 0; j < nc; ++j) {
          lo[nb + j] = 0.0;
          up[nb + j] = (zp >> j) & 1 ? 2.0 : 0.0;
        }
        auto v = oracle_support::vertex_enumeration(m, lo, up);
        if (v && (!ref || *v > *ref)) ref = v;
      }
    }
    auto s = solve_milp(m);
    ASSERT_TRUE(ref.has_value());
    ASSERT_TRUE(s.optimal()) << "trial " << trial;
    EXPECT_NEAR(s.objective, *ref, 1e-7) << "trial " << trial;
    EXPECT_LE(m.max_violation(s.values), 1e-6);
  }
}

TEST(SolveMilp, NodeRelaxationsSatisfyStrongDuality) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> U(0.1, 1.0);
  MilpModel m;
  std::vector<Term> cap, obj;
  for (int j = 0; j < 10; ++j) {
    auto x = m.add_binary("x" + std::to_string(j));
    cap.push_back({x, U(rng)});
    obj.push_back({x, U(rng)});
  }
  m.add_constraint("cap", cap, Sense::LessEqual, 2.0);
  m.set_objective(ObjSense::Maximize, obj);
  std::size_t seen = 0;
  SolverConfig cfg;
  cfg.on_node = [&](const NodeInfo& info) {
    auto dc = check_duals(m, *info.relaxation, *info.lower, *info.upper);
    EXPECT_NEAR(dc.dual_objective, info.relaxation->objective, 1e-6);
    EXPECT_LE(dc.worst_sign, 1e-7);
    ++seen;
  };
  auto s = solve_milp(m, cfg);
  ASSERT_TRUE(s.optimal());
  EXPECT_GT(seen, 1u);
  EXPECT_LE(seen, s.stats.nodes);
  EXPECT_NEAR(s.objective, *oracle_support::enumerate_binary(m), 1e-9);
}

TEST(SolveMilp, Deterministic) {
  auto m = knapsack();
  auto a = solve_milp(m);
  auto b = solve_milp(m);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.stats.nodes, b.stats.nodes);
}

TEST(SolveMilp, NodeLimitReportsIncumbentAndBound) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> U(0.1, 1.0);
  MilpModel m;
  std::vector<Term> cap, obj;
  for (int j = 0; j < 16; ++j) {
    auto x = m.add_binary("x" + std::to_string(j));
    cap.push_back({x, U(rng)});
    obj.push_back({x, U(rng)});
  }
  m.add_constraint("cap", cap, Sense::LessEqual, 3.0);
  m.set_objective(ObjSense::Maximize, obj);
  SolverConfig cfg;
  cfg.node_limit = 3;
  auto s = solve_milp(m, cfg);
  EXPECT_EQ(s.status, Status::NodeLimit);
  EXPECT_LE(s.stats.nodes, 3u);
  if (s.has_incumbent) EXPECT_GE(s.bound, s.objective - 1e-9);
}

TEST(Mps, EmptyModelIsHeaderOnly) {
  MilpModel m;
  auto text = export_mps(m);
  EXPECT_EQ(text, "NAME model\nOBJSENSE\n    MIN\nROWS\n N  OBJ\nCOLUMNS\nRHS\nRANGES\nBOUNDS\nSOS\nENDATA\n");
  auto back = import_mps(text);
  EXPECT_EQ(back.num_vars(), 0u);
  EXPECT_EQ(back.num_rows(), 0u);
  EXPECT_EQ(import_mps("").num_vars(), 0u);
}

TEST(Mps, KnapsackGoldenFile) {
  auto text = export_mps(knapsack());
  std::ifstream in(std::string(TSODSO_FIXTURE_DIR) + "/knapsack.mps");
  ASSERT_TRUE(in.good()) << "missing golden file";
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(text, ss.str());
}

TEST(Mps, RoundTripSolvesToSameObjective) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = random_lp(rng, 3, 3);
    auto b = m.add_binary("flag");
    m.add_constraint("link", {{0, 1.0}, {b, -1.0}}, Sense::LessEqual, 1.0);
    m.add_sos1("pair", {1, 2});
    auto back = import_mps(export_mps(m));
    ASSERT_EQ(back.num_vars(), m.num_vars());
    ASSERT_EQ(back.num_rows(), m.num_rows());
    ASSERT_EQ(back.sos1_sets().size(), 1u);
    auto a = solve_milp(m);
    auto c = solve_milp(back);
    ASSERT_EQ(a.status, c.status);
    if (a.optimal()) EXPECT_DOUBLE_EQ(a.objective, c.objective);
    EXPECT_EQ(export_mps(back), export_mps(m));
  }
}

TEST(Mps, MalformedInputIsRejectedWithPosition) {
  try {
    import_mps("NAME x\nROWS\n N OBJ\nBOGUS\nENDATA\n");
    FAIL() << "expected parse error";
  } catch (const tsodso::Error& e) {
    EXPECT_EQ(e.code(), tsodso::ErrorCode::Parse);
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos);
  }
  EXPECT_THROW(import_mps("NAME x\nROWS\n N OBJ\nCOLUMNS\n    x  OBJ  abc\nENDATA\n"), tsodso::Error);
  EXPECT_THROW(import_mps("NAME x\nROWS\n N OBJ\nCOLUMNS\n    x  R9  1\nENDATA\n"), tsodso::Error);
}
