#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "tsodso/model_core.hpp"

namespace tsodso::milp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind { Continuous, Binary };
enum class Sense { LessEqual, Equal, GreaterEqual };
enum class ObjSense { Minimize, Maximize };

struct Term {
  std::size_t var = 0;
  double coef = 0.0;
};

struct Variable {
  std::string name;
  double lower = 0.0;
  double upper = kInf;
  VarKind kind = VarKind::Continuous;
  std::string tag;  // symbol family, e.g. "x_dam" or "mu"
};

struct Constraint {
  std::string name;
  std::vector<Term> terms;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
  std::string tag;
};

struct Sos1 {
  std::string name;
  std::vector<std::size_t> members;
};

class MilpModel {
 public:
  std::size_t add_variable(std::string name, double lower, double upper,
                           VarKind kind = VarKind::Continuous, std::string tag = {}) {
    if (kind == VarKind::Binary) {
      lower = std::max(lower, 0.0);
      upper = std::min(upper, 1.0);
    }
    if (lower > upper)
      throw Error(ErrorCode::InvalidInput, "variable '" + name + "' has lower > upper");
    vars_.push_back({std::move(name), lower, upper, kind, std::move(tag)});
    obj_.push_back(0.0);
    return vars_.size() - 1;
  }
  std::size_t add_binary(std::string name, std::string tag = {}) {
    return add_variable(std::move(name), 0.0, 1.0, VarKind::Binary, std::move(tag));
  }
  std::size_t add_constraint(std::string name, std::vector<Term> terms, Sense sense, double rhs,
                             std::string tag = {}) {
    for (const auto& t : terms)
      if (t.var >= vars_.size())
        throw Error(ErrorCode::InvalidInput, "constraint '" + name + "' references undeclared variable");
    rows_.push_back({std::move(name), merge_terms(std::move(terms)), sense, rhs, std::move(tag)});
    return rows_.size() - 1;
  }
  void add_sos1(std::string name, std::vector<std::size_t> members) {
    for (auto m : members)
      if (m >= vars_.size())
        throw Error(ErrorCode::InvalidInput, "SOS1 '" + name + "' references undeclared variable");
    sos_.push_back({std::move(name), std::move(members)});
  }
  void set_objective(ObjSense sense, const std::vector<Term>& terms, double constant = 0.0) {
    sense_ = sense;
    std::fill(obj_.begin(), obj_.end(), 0.0);
    for (const auto& t : terms) {
      if (t.var >= vars_.size()) throw Error(ErrorCode::InvalidInput, "objective references undeclared variable");
      obj_[t.var] += t.coef;
    }
    obj_constant_ = constant;
  }
  void set_objective_coef(std::size_t j, double c) { obj_.at(j) = c; }
  void set_objective_sense(ObjSense s) { sense_ = s; }
  void set_objective_constant(double c) { obj_constant_ = c; }
  void set_bounds(std::size_t j, double lo, double up) {
    vars_.at(j).lower = lo;
    vars_.at(j).upper = up;
  }
  void set_name(std::string n) { name_ = std::move(n); }

  const std::string& name() const { return name_; }
  std::size_t num_vars() const { return vars_.size(); }
  std::size_t num_rows() const { return rows_.size(); }
  const std::vector<Variable>& variables() const { return vars_; }
  const Variable& variable(std::size_t j) const { return vars_.at(j); }
  const std::vector<Constraint>& constraints() const { return rows_; }
  const std::vector<Sos1>& sos1_sets() const { return sos_; }
  const std::vector<double>& objective() const { return obj_; }
  double objective_constant() const { return obj_constant_; }
  ObjSense objective_sense() const { return sense_; }
  std::size_t num_binaries() const {
    std::size_t n = 0;
    for (const auto& v : vars_) n += v.kind == VarKind::Binary;
    return n;
  }

  double evaluate_objective(const std::vector<double>& x) const {
    double v = obj_constant_;
    for (std::size_t j = 0; j < obj_.size(); ++j) v += obj_[j] * x[j];
    return v;
  }
  static double activity(const Constraint& r, const std::vector<double>& x) {
    double a = 0.0;
    for (const auto& t : r.terms) a += t.coef * x[t.var];
    return a;
  }
  /// Largest violation of bounds, rows, integrality and SOS1 membership.
  double max_violation(const std::vector<double>& x, double zero_tol = 1e-6) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < vars_.size(); ++j) {
      worst = std::max({worst, vars_[j].lower - x[j], x[j] - vars_[j].upper});
      if (vars_[j].kind == VarKind::Binary) worst = std::max(worst, std::abs(x[j] - std::round(x[j])));
    }
    for (const auto& r : rows_) {
      double a = activity(r, x);
      double scale = 1.0;
      if (r.sense != Sense::GreaterEqual) worst = std::max(worst, (a - r.rhs) / scale);
      if (r.sense != Sense::LessEqual) worst = std::max(worst, (r.rhs - a) / scale);
    }
    for (const auto& s : sos_) {
      std::size_t nz = 0;
      double second = 0.0;
      std::vector<double> mags;
      for (auto m : s.members)
        if (std::abs(x[m]) > zero_tol) {
          ++nz;
          mags.push_back(std::abs(x[m]));
        }
      if (nz > 1) {
        std::sort(mags.begin(), mags.end());
        second = mags[mags.size() - 2];
        worst = std::max(worst, second);
      }
    }
    return worst;
  }

 private:
  static std::vector<Term> merge_terms(std::vector<Term> terms) {
    std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
    std::vector<Term> out;
    for (const auto& t : terms) {
      if (!out.empty() && out.back().var == t.var)
        out.back().coef += t.coef;
      else
        out.push_back(t);
    }
    std::erase_if(out, [](const Term& t) { return t.coef == 0.0; });
    return out;
  }

  std::string name_ = "model";
  std::vector<Variable> vars_;
  std::vector<Constraint> rows_;
  std::vector<Sos1> sos_;
  std::vector<double> obj_;
  double obj_constant_ = 0.0;
  ObjSense sense_ = ObjSense::Minimize;
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit, NodeLimit, TimeLimit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration-limit";
    case Status::NodeLimit: return "node-limit";
    case Status::TimeLimit: return "time-limit";
  }
  return "?";
}

struct SolveStats {
  std::size_t nodes = 0;
  std::size_t simplex_iterations = 0;
  std::size_t refactorizations = 0;
  double seconds = 0.0;
};

struct MilpSolution {
  Status status = Status::Infeasible;
  std::vector<double> values;
  double objective = std::nan("");
  /// Best bound in the model's objective sense (equals objective for LPs).
  double bound = std::nan("");
  /// Sensitivity ∂objective/∂rhs for every row, in the model's objective sense.
  std::vector<double> row_duals;
  /// Sensitivity ∂objective/∂x_j for nonbasic columns (0 for basic ones).
  std::vector<double> reduced_costs;
  bool has_incumbent = false;
  SolveStats stats;
  bool optimal() const { return status == Status::Optimal; }
};

}  // namespace tsodso::milp
