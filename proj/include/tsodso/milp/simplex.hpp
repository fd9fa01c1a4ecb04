#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "tsodso/milp/model.hpp"

namespace tsodso::milp {

struct LpTolerances {
  double primal = 1e-9;
  double dual = 1e-9;
  double pivot = 1e-7;
  std::size_t refactor_every = 80;
  std::size_t bland_after = 40;  // consecutive degenerate pivots before Bland's rule
};

/// Bounded-variable revised simplex on  min c'x  s.t.  A x - r = 0,  lo <= (x, r) <= up.
/// Columns n..n+m-1 are the row logicals r. The basis inverse is kept dense and
/// updated in product form; it is rebuilt from an LU factorization periodically.
class LpEngine {
 public:
  enum class VarState : std::uint8_t { Basic, AtLower, AtUpper, Free };

  struct Basis {
    std::vector<int> head;
    std::vector<VarState> state;
    bool empty() const { return head.empty(); }
  };

  explicit LpEngine(const MilpModel& model, LpTolerances tol = {}) : tol_(tol) {
    n_ = model.num_vars();
    m_ = model.num_rows();
    const std::size_t N = n_ + m_;
    lo_.resize(N);
    up_.resize(N);
    cost_.assign(N, 0.0);
    sign_ = model.objective_sense() == ObjSense::Maximize ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n_; ++j) {
      lo_[j] = model.variable(j).lower;
      up_[j] = model.variable(j).upper;
      cost_[j] = sign_ * model.objective()[j];
    }
    col_start_.assign(n_ + 1, 0);
    for (const auto& r : model.constraints())
      for (const auto& t : r.terms) ++col_start_[t.var + 1];
    for (std::size_t j = 0; j < n_; ++j) col_start_[j + 1] += col_start_[j];
    col_row_.resize(col_start_[n_]);
    col_val_.resize(col_start_[n_]);
    std::vector<std::size_t> fill(col_start_.begin(), col_start_.end() - 1);
    for (std::size_t i = 0; i < m_; ++i) {
      const auto& r = model.constraints()[i];
      for (const auto& t : r.terms) {
        col_row_[fill[t.var]] = static_cast<int>(i);
        col_val_[fill[t.var]++] = t.coef;
      }
      double lo = -kInf, up = kInf;
      if (r.sense != Sense::GreaterEqual) up = r.rhs;
      if (r.sense != Sense::LessEqual) lo = r.rhs;
      lo_[n_ + i] = lo;
      up_[n_ + i] = up;
    }
    x_.assign(N, 0.0);
    d_.assign(N, 0.0);
    state_.assign(N, VarState::AtLower);
  }

  std::size_t num_structural() const { return n_; }
  std::size_t num_rows() const { return m_; }
  double lower(std::size_t j) const { return lo_[j]; }
  double upper(std::size_t j) const { return up_[j]; }

  void set_bounds(std::size_t j, double lo, double up) {
    lo_[j] = lo;
    up_[j] = up;
    if (has_basis_ && state_[j] != VarState::Basic) place_nonbasic(j);
    values_stale_ = true;
  }

  Basis basis() const { return {head_, state_}; }

  /// Drop the current basis; the next solve starts from the slack basis.
  void reset_basis() {
    has_basis_ = false;
    factor_valid_ = false;
  }

  void set_basis(const Basis& b) {
    head_ = b.head;
    state_ = b.state;
    pos_.assign(n_ + m_, -1);
    for (std::size_t i = 0; i < m_; ++i) pos_[static_cast<std::size_t>(head_[i])] = static_cast<int>(i);
    for (std::size_t j = 0; j < n_ + m_; ++j)
      if (state_[j] != VarState::Basic) place_nonbasic(j);
    has_basis_ = true;
    factor_valid_ = false;
    values_stale_ = true;
  }

  /// Solve from the current basis (slack basis on first call).
  Status solve(std::size_t iteration_limit = 0) {
    if (iteration_limit == 0) iteration_limit = 20000 + 50 * (n_ + m_);
    iter_limit_ = iteration_limit;
    iters_ = 0;
    if (!has_basis_) slack_basis();
    if (!factor_valid_ && !refactor()) {
      slack_basis();
      refactor();
    }
    compute_primal();
    compute_duals(false);
    Status st;
    if (!primal_feasible() && dual_feasible()) {
      st = dual_simplex();
      if (st == Status::Optimal) st = primal_simplex();  // cleans up tolerance drift
    } else {
      st = primal_simplex();
    }
    for (int pass = 0; pass < 3 && st == Status::Optimal; ++pass) {
      if (!refactor()) {
        slack_basis();
        refactor();
      }
      compute_primal();
      compute_duals(false);
      if (primal_feasible() && dual_feasible()) break;
      st = primal_feasible() ? primal_simplex() : dual_feasible() ? dual_simplex() : primal_simplex();
    }
    status_ = st;
    return st;
  }

  Status status() const { return status_; }
  std::size_t iterations() const { return total_iters_; }
  std::size_t refactorizations() const { return refactors_; }

  /// Structural values.
  std::vector<double> values() const { return {x_.begin(), x_.begin() + static_cast<long>(n_)}; }
  double value(std::size_t j) const { return x_[j]; }
  /// Objective in the model's sense (without the constant).
  double objective() const {
    double v = 0.0;
    for (std::size_t j = 0; j < n_; ++j) v += cost_[j] * x_[j];
    return sign_ * v;
  }
  /// ∂objective/∂rhs_i in the model's sense.
  std::vector<double> row_duals() const {
    std::vector<double> y(m_);
    for (std::size_t i = 0; i < m_; ++i) y[i] = sign_ * y_[static_cast<long>(i)];
    return y;
  }
  std::vector<double> reduced_costs() const {
    std::vector<double> d(n_);
    for (std::size_t j = 0; j < n_; ++j) d[j] = state_[j] == VarState::Basic ? 0.0 : sign_ * d_[j];
    return d;
  }
  bool is_basic(std::size_t j) const { return state_[j] == VarState::Basic; }

 private:
  // ---- column access --------------------------------------------------------
  template <class F>
  void for_column(std::size_t j, F&& f) const {
    if (j < n_) {
      for (std::size_t k = col_start_[j]; k < col_start_[j + 1]; ++k)
        f(static_cast<std::size_t>(col_row_[k]), col_val_[k]);
    } else {
      f(j - n_, -1.0);
    }
  }
  double dot_column(const Eigen::VectorXd& v, std::size_t j) const {
    double s = 0.0;
    for_column(j, [&](std::size_t i, double a) { s += v[static_cast<long>(i)] * a; });
    return s;
  }
  double row_dot_column(std::size_t r, std::size_t j) const {
    double s = 0.0;
    for_column(j, [&](std::size_t i, double a) { s += binv_(static_cast<long>(r), static_cast<long>(i)) * a; });
    return s;
  }
  void ftran(std::size_t j, Eigen::VectorXd& out) const {
    out.setZero(static_cast<long>(m_));
    for_column(j, [&](std::size_t i, double a) { out.noalias() += a * binv_.col(static_cast<long>(i)); });
  }

  // ---- basis bookkeeping ----------------------------------------------------
  void place_nonbasic(std::size_t j) {
    VarState s = state_[j];
    if (s == VarState::Basic) return;
    bool lf = std::isfinite(lo_[j]), uf = std::isfinite(up_[j]);
    if (s == VarState::AtUpper && uf) {
      x_[j] = up_[j];
    } else if (lf) {
      state_[j] = VarState::AtLower;
      x_[j] = lo_[j];
    } else if (uf) {
      state_[j] = VarState::AtUpper;
      x_[j] = up_[j];
    } else {
      state_[j] = VarState::Free;
      x_[j] = 0.0;
    }
  }

  void slack_basis() {
    const std::size_t N = n_ + m_;
    head_.resize(m_);
    pos_.assign(N, -1);
    state_.assign(N, VarState::AtLower);
    for (std::size_t i = 0; i < m_; ++i) {
      head_[i] = static_cast<int>(n_ + i);
      pos_[n_ + i] = static_cast<int>(i);
      state_[n_ + i] = VarState::Basic;
    }
    for (std::size_t j = 0; j < n_; ++j) {
      state_[j] = std::isfinite(lo_[j]) || !std::isfinite(up_[j]) ? VarState::AtLower : VarState::AtUpper;
      place_nonbasic(j);
    }
    has_basis_ = true;
    factor_valid_ = false;
  }

  bool refactor() {
    ++refactors_;
    since_refactor_ = 0;
    const long m = static_cast<long>(m_);
    if (m == 0) {
      binv_.resize(0, 0);
      factor_valid_ = true;
      return true;
    }
    // the basis is very sparse: factor it sparse, then form the dense inverse
    std::vector<Eigen::Triplet<double>> trip;
    for (long i = 0; i < m; ++i)
      for_column(static_cast<std::size_t>(head_[static_cast<std::size_t>(i)]),
                 [&](std::size_t r, double a) { trip.emplace_back(static_cast<int>(r), static_cast<int>(i), a); });
    Eigen::SparseMatrix<double> B(m, m);
    B.setFromTriplets(trip.begin(), trip.end());
    B.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(B);
    lu.factorize(B);
    if (lu.info() != Eigen::Success) {
      factor_valid_ = false;
      return false;
    }
    binv_ = lu.solve(Eigen::MatrixXd::Identity(m, m));
    // probe B·B⁻¹ = I on a fixed vector instead of forming the product
    Eigen::VectorXd v(m);
    for (long i = 0; i < m; ++i) v[i] = 1.0 + 0.37 * static_cast<double>(i % 7);
    double err = (B * (binv_ * v) - v).cwiseAbs().maxCoeff() / 4.0;
    factor_valid_ = std::isfinite(err) && err < 1e-7;
    return factor_valid_;
  }

  void compute_primal() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<long>(m_));
    for (std::size_t j = 0; j < n_ + m_; ++j) {
      if (state_[j] == VarState::Basic || x_[j] == 0.0) continue;
      double xj = x_[j];
      for_column(j, [&](std::size_t i, double a) { rhs[static_cast<long>(i)] += a * xj; });
    }
    Eigen::VectorXd xb = -(binv_ * rhs);
    for (std::size_t i = 0; i < m_; ++i) x_[static_cast<std::size_t>(head_[i])] = xb[static_cast<long>(i)];
    values_stale_ = false;
  }

  /// phase1: costs are the infeasibility gradient of the basic variables.
  void compute_duals(bool phase1) {
    Eigen::VectorXd cb(static_cast<long>(m_));
    for (std::size_t i = 0; i < m_; ++i) {
      std::size_t b = static_cast<std::size_t>(head_[i]);
      cb[static_cast<long>(i)] = phase1 ? infeas_grad(b) : cost_[b];
    }
    y_ = binv_.transpose() * cb;
    for (std::size_t j = 0; j < n_ + m_; ++j) {
      if (state_[j] == VarState::Basic) {
        d_[j] = 0.0;
        continue;
      }
      d_[j] = (phase1 ? 0.0 : cost_[j]) - dot_column(y_, j);
    }
  }

  double ptol(std::size_t j, double bound) const { return tol_.primal * (1.0 + std::abs(bound)); }
  double infeas_grad(std::size_t b) const {
    if (x_[b] < lo_[b] - ptol(b, lo_[b])) return -1.0;
    if (x_[b] > up_[b] + ptol(b, up_[b])) return 1.0;
    return 0.0;
  }
  bool primal_feasible() const {
    for (std::size_t i = 0; i < m_; ++i)
      if (infeas_grad(static_cast<std::size_t>(head_[i])) != 0.0) return false;
    return true;
  }
  bool fixed(std::size_t j) const { return lo_[j] == up_[j]; }
  bool dual_feasible() const {
    for (std::size_t j = 0; j < n_ + m_; ++j) {
      if (state_[j] == VarState::Basic || fixed(j)) continue;
      double t = tol_.dual * (1.0 + std::abs(cost_[j]));
      if (state_[j] == VarState::AtLower && d_[j] < -t) return false;
      if (state_[j] == VarState::AtUpper && d_[j] > t) return false;
      if (state_[j] == VarState::Free && std::abs(d_[j]) > t) return false;
    }
    return true;
  }

  void pivot(std::size_t r, std::size_t q, const Eigen::VectorXd& alpha) {
    std::size_t p = static_cast<std::size_t>(head_[r]);
    const long rr = static_cast<long>(r);
    Eigen::RowVectorXd rowr = binv_.row(rr) / alpha[rr];
    binv_.noalias() -= alpha * rowr;
    binv_.row(rr) = rowr;
    head_[r] = static_cast<int>(q);
    pos_[q] = static_cast<int>(r);
    pos_[p] = -1;
    state_[q] = VarState::Basic;
    ++since_refactor_;
  }

  bool tick() {
    ++iters_;
    ++total_iters_;
    if (since_refactor_ >= tol_.refactor_every) {
      if (!refactor()) return false;
      compute_primal();
    }
    return iters_ <= iter_limit_;
  }

  // ---- primal simplex (phase 1 then phase 2) -------------------------------
  Status primal_simplex() {
    Eigen::VectorXd alpha;
    std::size_t degenerate = 0;
    for (;;) {
      if (!tick()) return factor_valid_ ? Status::IterationLimit : Status::IterationLimit;
      bool phase1 = !primal_feasible();
      compute_duals(phase1);
      bool bland = degenerate >= tol_.bland_after;

      // pricing
      std::size_t q = SIZE_MAX;
      double best = 0.0;
      int dir = 0;
      for (std::size_t j = 0; j < n_ + m_; ++j) {
        if (state_[j] == VarState::Basic || fixed(j)) continue;
        double t = tol_.dual * (1.0 + (phase1 ? 0.0 : std::abs(cost_[j])));
        int dj = 0;
        if ((state_[j] == VarState::AtLower || state_[j] == VarState::Free) && d_[j] < -t) dj = 1;
        else if ((state_[j] == VarState::AtUpper || state_[j] == VarState::Free) && d_[j] > t) dj = -1;
        if (!dj) continue;
        double score = std::abs(d_[j]);
        if (bland) {
          q = j;
          dir = dj;
          break;
        }
        if (score > best) {
          best = score;
          q = j;
          dir = dj;
        }
      }
      if (q == SIZE_MAX) return phase1 ? Status::Infeasible : Status::Optimal;

      ftran(q, alpha);
      // ratio test: basic i changes by -dir*alpha_i per unit step
      double tmax = kInf;
      std::size_t leave = SIZE_MAX;
      bool to_upper = false;
      double best_piv = 0.0;
      if (std::isfinite(lo_[q]) && std::isfinite(up_[q])) tmax = up_[q] - lo_[q];
      for (std::size_t i = 0; i < m_; ++i) {
        double delta = -dir * alpha[static_cast<long>(i)];
        if (std::abs(delta) < tol_.pivot) continue;
        std::size_t b = static_cast<std::size_t>(head_[i]);
        double xb = x_[b];
        double lim = kInf;
        bool up_side = false;
        double g = phase1 ? infeas_grad(b) : 0.0;
        if (g < 0.0) {  // below lower bound
          if (delta > 0.0) lim = (lo_[b] - xb) / delta;
        } else if (g > 0.0) {  // above upper bound
          if (delta < 0.0) {
            lim = (up_[b] - xb) / delta;
            up_side = true;
          }
        } else if (delta < 0.0) {
          if (std::isfinite(lo_[b])) lim = std::max(0.0, (xb - lo_[b]) / -delta);
        } else {
          if (std::isfinite(up_[b])) {
            lim = std::max(0.0, (up_[b] - xb) / delta);
            up_side = true;
          }
        }
        if (!std::isfinite(lim)) continue;
        bool take = false;
        if (lim < tmax - 1e-12) take = true;
        else if (lim <= tmax + 1e-12 && leave != SIZE_MAX) {
          take = bland ? b < static_cast<std::size_t>(head_[leave]) : std::abs(delta) > best_piv;
        } else if (lim <= tmax + 1e-12 && leave == SIZE_MAX) {
          take = true;  // ties the bound flip; prefer a basis change
        }
        if (take) {
          tmax = std::min(tmax, lim);
          leave = i;
          to_upper = up_side;
          best_piv = std::abs(delta);
        }
      }
      if (!std::isfinite(tmax)) return phase1 ? Status::Infeasible : Status::Unbounded;
      degenerate = tmax <= 1e-12 ? degenerate + 1 : 0;

      double step = dir * tmax;
      x_[q] += step;
      for (std::size_t i = 0; i < m_; ++i)
        x_[static_cast<std::size_t>(head_[i])] -= step * alpha[static_cast<long>(i)];
      if (leave == SIZE_MAX) {  // bound flip
        state_[q] = dir > 0 ? VarState::AtUpper : VarState::AtLower;
        x_[q] = dir > 0 ? up_[q] : lo_[q];
        continue;
      }
      std::size_t p = static_cast<std::size_t>(head_[leave]);
      pivot(leave, q, alpha);
      if (to_upper) {
        state_[p] = VarState::AtUpper;
        x_[p] = up_[p];
      } else {
        state_[p] = std::isfinite(lo_[p]) ? VarState::AtLower : VarState::Free;
        x_[p] = std::isfinite(lo_[p]) ? lo_[p] : 0.0;
      }
    }
  }

  // ---- dual simplex ---------------------------------------------------------
  Status dual_simplex() {
    Eigen::VectorXd alpha;
    std::vector<double> prow(n_ + m_, 0.0);
    std::size_t degenerate = 0;
    for (;;) {
      if (!tick()) return Status::IterationLimit;
      if (since_refactor_ == 0) compute_duals(false);
      bool bland = degenerate >= tol_.bland_after;
      // leaving row: largest bound violation
      std::size_t r = SIZE_MAX;
      double worst = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        std::size_t b = static_cast<std::size_t>(head_[i]);
        double v = 0.0;
        if (x_[b] < lo_[b] - ptol(b, lo_[b])) v = lo_[b] - x_[b];
        else if (x_[b] > up_[b] + ptol(b, up_[b])) v = x_[b] - up_[b];
        if (v <= 0.0) continue;
        if (bland) {
          if (r == SIZE_MAX || b < static_cast<std::size_t>(head_[r])) r = i;
        } else if (v > worst) {
          worst = v;
          r = i;
        }
      }
      if (r == SIZE_MAX) return Status::Optimal;
      std::size_t p = static_cast<std::size_t>(head_[r]);
      bool to_lower = x_[p] < lo_[p];
      double target = to_lower ? lo_[p] : up_[p];

      // pivot row and dual ratio test (Harris two-pass)
      Eigen::VectorXd rho = binv_.row(static_cast<long>(r)).transpose();
      double bound1 = kInf;
      for (std::size_t j = 0; j < n_ + m_; ++j) {
        prow[j] = 0.0;
        if (state_[j] == VarState::Basic || fixed(j)) continue;
        double a = dot_column(rho, j);
        prow[j] = a;
        double ratio = eligible_ratio(j, a, to_lower, tol_.dual * (1.0 + std::abs(cost_[j])));
        bound1 = std::min(bound1, ratio);
      }
      if (!std::isfinite(bound1)) return Status::Infeasible;
      std::size_t q = SIZE_MAX;
      double best_abs = 0.0;
      for (std::size_t j = 0; j < n_ + m_; ++j) {
        if (state_[j] == VarState::Basic || fixed(j) || prow[j] == 0.0) continue;
        double ratio = eligible_ratio(j, prow[j], to_lower, 0.0);
        if (!std::isfinite(ratio) || ratio > bound1) continue;
        if (bland) {
          if (q == SIZE_MAX) q = j;  // smallest index among admissible
        } else if (std::abs(prow[j]) > best_abs) {
          best_abs = std::abs(prow[j]);
          q = j;
        }
      }
      if (q == SIZE_MAX) return Status::Infeasible;

      ftran(q, alpha);
      double arq = alpha[static_cast<long>(r)];
      if (std::abs(arq) < 1e-11) {
        if (!refactor()) return Status::IterationLimit;
        compute_primal();
        compute_duals(false);
        continue;
      }
      double dxq = -(target - x_[p]) / arq;
      x_[q] += dxq;
      for (std::size_t i = 0; i < m_; ++i)
        x_[static_cast<std::size_t>(head_[i])] -= dxq * alpha[static_cast<long>(i)];
      double theta = d_[q] / arq;
      degenerate = std::abs(theta) <= 1e-12 ? degenerate + 1 : 0;
      for (std::size_t j = 0; j < n_ + m_; ++j)
        if (state_[j] != VarState::Basic && prow[j] != 0.0) d_[j] -= theta * prow[j];
      d_[q] = 0.0;
      pivot(r, q, alpha);
      d_[p] = -theta;
      state_[p] = to_lower ? VarState::AtLower : VarState::AtUpper;
      x_[p] = target;
    }
  }

  /// Ratio |d_j / a| if column j may enter for a leaving variable moving to its
  /// lower (to_lower) or upper bound; infinity otherwise. `slack` relaxes d_j's sign.
  double eligible_ratio(std::size_t j, double a, bool to_lower, double slack) const {
    if (std::abs(a) < tol_.pivot) return kInf;
    VarState s = state_[j];
    bool can_up = s == VarState::AtLower || s == VarState::Free;
    bool can_down = s == VarState::AtUpper || s == VarState::Free;
    // increasing x_j changes x_p by -a
    bool ok = to_lower ? ((can_up && a < 0.0) || (can_down && a > 0.0))
                       : ((can_up && a > 0.0) || (can_down && a < 0.0));
    if (!ok) return kInf;
    if (s == VarState::Free) return 0.0;
    double dj = s == VarState::AtLower ? std::max(d_[j], 0.0) : std::min(d_[j], 0.0);
    return (std::abs(dj) + slack) / std::abs(a);
  }

  LpTolerances tol_;
  std::size_t n_ = 0, m_ = 0;
  double sign_ = 1.0;
  std::vector<double> lo_, up_, cost_;
  std::vector<std::size_t> col_start_;
  std::vector<int> col_row_;
  std::vector<double> col_val_;

  std::vector<int> head_;
  std::vector<int> pos_;
  std::vector<VarState> state_;
  std::vector<double> x_, d_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd binv_;
  bool has_basis_ = false;
  bool factor_valid_ = false;
  bool values_stale_ = true;
  std::size_t since_refactor_ = 0;
  std::size_t iters_ = 0, iter_limit_ = 0, total_iters_ = 0, refactors_ = 0;
  Status status_ = Status::Infeasible;
};

/// Solve the LP relaxation (integrality and SOS1 sets ignored).
inline MilpSolution solve_lp(const MilpModel& model, LpTolerances tol = {}) {
  LpEngine eng(model, tol);
  MilpSolution sol;
  sol.status = eng.solve();
  sol.stats.simplex_iterations = eng.iterations();
  sol.stats.refactorizations = eng.refactorizations();
  if (sol.status == Status::Optimal) {
    sol.values = eng.values();
    sol.objective = eng.objective() + model.objective_constant();
    sol.bound = sol.objective;
    sol.row_duals = eng.row_duals();
    sol.reduced_costs = eng.reduced_costs();
    sol.has_incumbent = true;
  }
  return sol;
}

}  // namespace tsodso::milp
