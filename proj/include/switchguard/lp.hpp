#pragma once

// Dense two-phase primal simplex.
//
//   minimize c'v  subject to  a_i'v (<= | =) b_i,  lower <= v <= upper
//
// Bounds may be infinite. Dantzig pricing with a two-pass ratio test, Bland's
// rule while the objective stalls, and a periodic rebuild of the tableau from
// the original rows. All rules are fixed, so the iteration sequence is a pure
// function of the input; there is no randomness and no threading inside a
// solve. After phase 2 the basic solution is recomputed from the original
// data with an LU factorization of the final basis.

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "switchguard/operator.hpp"

namespace switchguard {

enum class Relation { less_equal, equal };

template <typename Scalar>
struct LinearConstraint {
  DynVector<Scalar> coefficients;
  Relation relation = Relation::less_equal;
  Scalar rhs{};
};

template <typename Scalar>
struct LinearProgram {
  static constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();

  Index variable_count = 0;
  DynVector<Scalar> objective;
  std::vector<LinearConstraint<Scalar>> constraints;
  std::vector<Scalar> lower;
  std::vector<Scalar> upper;
  std::vector<std::string> names;

  LinearProgram() = default;
  /// n variables, zero objective, bounds [0, +inf).
  explicit LinearProgram(Index n)
      : variable_count(n), objective(DynVector<Scalar>::Zero(n)),
        lower(static_cast<std::size_t>(n), Scalar(0)), upper(static_cast<std::size_t>(n), inf),
        names(static_cast<std::size_t>(n)) {}

  Index add_variable(Scalar lo, Scalar hi, std::string name = {}) {
    const Index id = variable_count++;
    objective.conservativeResize(variable_count);
    objective(id) = Scalar(0);
    for (auto& c : constraints) {
      c.coefficients.conservativeResize(variable_count);
      c.coefficients(id) = Scalar(0);
    }
    lower.push_back(lo);
    upper.push_back(hi);
    names.push_back(std::move(name));
    return id;
  }

  void add_constraint(DynVector<Scalar> coefficients, Relation relation, Scalar rhs) {
    constraints.push_back({std::move(coefficients), relation, rhs});
  }

  void validate() const {
    if (objective.size() != variable_count) throw ShapeError("LinearProgram: objective length mismatch");
    if (static_cast<Index>(lower.size()) != variable_count ||
        static_cast<Index>(upper.size()) != variable_count) {
      throw ShapeError("LinearProgram: bound vectors length mismatch");
    }
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      const auto& c = constraints[i];
      if (c.coefficients.size() != variable_count) {
        throw ShapeError("LinearProgram: constraint " + std::to_string(i) + " has wrong length");
      }
      if (!std::isfinite(c.rhs)) throw std::invalid_argument("LinearProgram: non-finite rhs");
    }
    for (Index j = 0; j < variable_count; ++j) {
      const auto lo = lower[static_cast<std::size_t>(j)];
      const auto hi = upper[static_cast<std::size_t>(j)];
      if (lo > hi || lo == inf || hi == -inf) {
        throw std::invalid_argument("LinearProgram: empty bound interval for variable " + std::to_string(j));
      }
    }
  }
};

enum class LpStatus { optimal, infeasible, unbounded, numerical_failure };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    case LpStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

template <typename Scalar>
struct LpSolution {
  LpStatus status = LpStatus::numerical_failure;
  Scalar objective_value{};
  DynVector<Scalar> values;
  Index iterations = 0;
  std::string message;
};

struct SimplexOptions {
  double pivot_tolerance = 1e-9;
  double feasibility_tolerance = 1e-9;
  /// Entries below this magnitude are flushed to zero after each pivot.
  double drop_tolerance = 1e-12;
  /// The tableau is rebuilt from the original rows every this many pivots.
  Index refactor_interval = 100;
  /// Degenerate pivots tolerated before switching to Bland's rule.
  Index stall_limit = 50;
  Index max_iterations = 2'000'000;
};

namespace detail {

template <typename Scalar>
class SimplexTableau {
 public:
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vec = DynVector<Scalar>;

  SimplexTableau(const LinearProgram<Scalar>& lp, const SimplexOptions& opts) : lp_(lp), opts_(opts) {}

  LpSolution<Scalar> run() {
    LpSolution<Scalar> out;
    standardize();
    build_tableau();

    // Phase 1: minimize the sum of artificials.
    if (artificial_count_ > 0) {
      Vec cost = Vec::Zero(cols_);
      for (Index j = art_begin_; j < cols_; ++j) cost(j) = Scalar(1);
      phase_cost_ = cost;
      load_costs(phase_cost_);
      const auto st = iterate(cols_, out.iterations);
      if (st != LpStatus::optimal) {
        out.status = st == LpStatus::unbounded ? LpStatus::numerical_failure : st;
        out.message = st == LpStatus::unbounded ? "phase 1 reported unbounded" : "iteration limit in phase 1";
        return out;
      }
      const Scalar infeas = -cost_(cols_);
      if (infeas > Scalar(opts_.feasibility_tolerance) * std::max(Scalar(1), rhs_scale_)) {
        out.status = LpStatus::infeasible;
        out.message = "phase 1 optimum " + std::to_string(static_cast<double>(infeas)) + " > 0";
        return out;
      }
      drive_out_artificials();
    }

    // Phase 2 over structural and slack columns.
    phase_cost_ = std_cost_;
    load_costs(phase_cost_);
    const auto st = iterate(art_begin_, out.iterations);
    if (st == LpStatus::unbounded) {
      out.status = LpStatus::unbounded;
      out.message = "objective unbounded below";
      return out;
    }
    if (st != LpStatus::optimal) {
      out.status = st;
      out.message = "iteration limit in phase 2";
      return out;
    }

    Vec y = basic_solution();
    out.values = recover(y);
    out.objective_value = lp_.objective.dot(out.values);
    out.status = LpStatus::optimal;
    return out;
  }

 private:
  struct Part {
    Index column;
    Scalar sign;
  };
  struct VarMap {
    Scalar offset{};
    std::vector<Part> parts;
  };

  void standardize() {
    const Index n = lp_.variable_count;
    maps_.resize(static_cast<std::size_t>(n));
    // Box rows for doubly bounded variables are appended after the given rows.
    std::vector<std::pair<Index, Scalar>> box_rows;
    Index col = 0;
    for (Index j = 0; j < n; ++j) {
      const Scalar lo = lp_.lower[static_cast<std::size_t>(j)];
      const Scalar hi = lp_.upper[static_cast<std::size_t>(j)];
      auto& m = maps_[static_cast<std::size_t>(j)];
      if (std::isfinite(lo)) {
        m.offset = lo;
        m.parts.push_back({col, Scalar(1)});
        if (std::isfinite(hi)) box_rows.emplace_back(col, hi - lo);
        ++col;
      } else if (std::isfinite(hi)) {
        m.offset = hi;
        m.parts.push_back({col++, Scalar(-1)});
      } else {
        m.parts.push_back({col++, Scalar(1)});
        m.parts.push_back({col++, Scalar(-1)});
      }
    }
    struct_count_ = col;

    const Index given = static_cast<Index>(lp_.constraints.size());
    rows_ = given + static_cast<Index>(box_rows.size());
    Index slack_count = static_cast<Index>(box_rows.size());
    for (const auto& c : lp_.constraints) slack_count += c.relation == Relation::less_equal ? 1 : 0;
    slack_count_ = slack_count;

    a_std_ = RowMatrix::Zero(rows_, struct_count_ + slack_count_);
    b_std_ = Vec::Zero(rows_);
    slack_of_row_.assign(static_cast<std::size_t>(rows_), -1);
    Index slack = struct_count_;
    for (Index i = 0; i < given; ++i) {
      const auto& c = lp_.constraints[static_cast<std::size_t>(i)];
      Scalar rhs = c.rhs;
      for (Index j = 0; j < n; ++j) {
        const Scalar a = c.coefficients(j);
        if (a == Scalar(0)) continue;
        const auto& m = maps_[static_cast<std::size_t>(j)];
        rhs -= a * m.offset;
        for (const auto& p : m.parts) a_std_(i, p.column) += a * p.sign;
      }
      if (c.relation == Relation::less_equal) {
        a_std_(i, slack) = Scalar(1);
        slack_of_row_[static_cast<std::size_t>(i)] = slack++;
      }
      b_std_(i) = rhs;
    }
    for (std::size_t k = 0; k < box_rows.size(); ++k) {
      const Index i = given + static_cast<Index>(k);
      a_std_(i, box_rows[k].first) = Scalar(1);
      a_std_(i, slack) = Scalar(1);
      slack_of_row_[static_cast<std::size_t>(i)] = slack++;
      b_std_(i) = box_rows[k].second;
    }
    for (Index i = 0; i < rows_; ++i) {
      if (b_std_(i) < Scalar(0)) {
        a_std_.row(i) *= Scalar(-1);
        b_std_(i) = -b_std_(i);
      }
    }
    rhs_scale_ = rows_ > 0 ? b_std_.cwiseAbs().maxCoeff() : Scalar(0);

    std_cost_ = Vec::Zero(struct_count_ + slack_count_);
    for (Index j = 0; j < n; ++j) {
      for (const auto& p : maps_[static_cast<std::size_t>(j)].parts) {
        std_cost_(p.column) += lp_.objective(j) * p.sign;
      }
    }
  }

  void build_tableau() {
    const Index base_cols = struct_count_ + slack_count_;
    art_begin_ = base_cols;
    basis_.assign(static_cast<std::size_t>(rows_), -1);
    artificial_count_ = 0;
    for (Index i = 0; i < rows_; ++i) {
      const Index s = slack_of_row_[static_cast<std::size_t>(i)];
      if (s >= 0 && a_std_(i, s) == Scalar(1)) {
        basis_[static_cast<std::size_t>(i)] = s;
      } else {
        ++artificial_count_;
      }
    }
    cols_ = base_cols + artificial_count_;
    tab_ = RowMatrix::Zero(rows_, cols_ + 1);
    tab_.leftCols(base_cols) = a_std_;
    tab_.col(cols_) = b_std_;
    Index art = art_begin_;
    for (Index i = 0; i < rows_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < 0) {
        tab_(i, art) = Scalar(1);
        basis_[static_cast<std::size_t>(i)] = art++;
      }
    }
    orig_ = tab_;
    cost_ = Vec::Zero(cols_ + 1);
  }

  // cost_(j) holds reduced costs, cost_(cols_) the negated objective.
  void load_costs(const Vec& c) {
    cost_.setZero();
    cost_.head(c.size()) = c;
    for (Index i = 0; i < rows_; ++i) {
      const Index b = basis_[static_cast<std::size_t>(i)];
      const Scalar cb = b < c.size() ? c(b) : Scalar(0);
      if (cb != Scalar(0)) cost_ -= cb * tab_.row(i).transpose();
    }
  }

  void pivot(Index r, Index c) {
    const Scalar p = tab_(r, c);
    tab_.row(r) /= p;
    tab_(r, c) = Scalar(1);
    for (Index i = 0; i < rows_; ++i) {
      if (i == r) continue;
      const Scalar f = tab_(i, c);
      if (f == Scalar(0)) continue;
      tab_.row(i) -= f * tab_.row(r);
      tab_(i, c) = Scalar(0);
    }
    const Scalar f = cost_(c);
    if (f != Scalar(0)) {
      cost_ -= f * tab_.row(r).transpose();
      cost_(c) = Scalar(0);
    }
    basis_[static_cast<std::size_t>(r)] = c;
    const Scalar drop = Scalar(opts_.drop_tolerance);
    tab_ = tab_.unaryExpr([drop](Scalar v) { return std::abs(v) < drop ? Scalar(0) : v; });
  }

  // Rebuilds B^{-1} [A | b] for the current basis from the original rows.
  bool refactor() {
    if (rows_ == 0) return true;
    DynMatrix<Scalar> basis_matrix(rows_, rows_);
    for (Index i = 0; i < rows_; ++i) basis_matrix.col(i) = orig_.col(basis_[static_cast<std::size_t>(i)]);
    Eigen::PartialPivLU<DynMatrix<Scalar>> lu(basis_matrix);
    if (!(lu.rcond() > Scalar(1e-14))) return false;
    DynMatrix<Scalar> fresh = lu.solve(DynMatrix<Scalar>(orig_));
    if (!fresh.allFinite()) return false;
    const Scalar drop = Scalar(opts_.drop_tolerance);
    tab_ = fresh.unaryExpr([drop](Scalar v) { return std::abs(v) < drop ? Scalar(0) : v; });
    for (Index i = 0; i < rows_; ++i) tab_(i, basis_[static_cast<std::size_t>(i)]) = Scalar(1);
    load_costs(phase_cost_);
    return true;
  }

  // Dantzig pricing with a two-pass ratio test that prefers large pivots.
  // While the objective stalls the rule drops to Bland's, which cannot cycle.
  LpStatus iterate(Index limit, Index& iterations) {
    const Scalar tol = Scalar(opts_.pivot_tolerance);
    const Scalar feas = Scalar(opts_.feasibility_tolerance);
    Index stalled = 0;
    Scalar last_objective = cost_(cols_);
    while (true) {
      if (iterations >= opts_.max_iterations) return LpStatus::numerical_failure;
      if (iterations > 0 && iterations % opts_.refactor_interval == 0 && !refactor()) {
        return LpStatus::numerical_failure;
      }
      const bool bland = stalled >= opts_.stall_limit;
      Index enter = -1;
      for (Index j = 0; j < limit; ++j) {
        if (cost_(j) >= -tol) continue;
        if (bland) {
          enter = j;
          break;
        }
        if (enter < 0 || cost_(j) < cost_(enter)) enter = j;
      }
      if (enter < 0) return LpStatus::optimal;

      Scalar col_max = 0;
      for (Index i = 0; i < rows_; ++i) col_max = std::max(col_max, tab_(i, enter));
      const Scalar min_pivot = std::max(tol, col_max * Scalar(1e-7));
      Index leave = -1;
      if (bland) {
        Scalar best = std::numeric_limits<Scalar>::infinity();
        for (Index i = 0; i < rows_; ++i) {
          const Scalar a = tab_(i, enter);
          if (a > min_pivot) best = std::min(best, std::max(Scalar(0), tab_(i, cols_)) / a);
        }
        for (Index i = 0; i < rows_ && std::isfinite(best); ++i) {
          const Scalar a = tab_(i, enter);
          if (a <= min_pivot || std::max(Scalar(0), tab_(i, cols_)) / a > best + tol) continue;
          if (leave < 0 || basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]) leave = i;
        }
      } else {
        Scalar bound = std::numeric_limits<Scalar>::infinity();
        for (Index i = 0; i < rows_; ++i) {
          const Scalar a = tab_(i, enter);
          if (a > min_pivot) bound = std::min(bound, (std::max(Scalar(0), tab_(i, cols_)) + feas) / a);
        }
        for (Index i = 0; i < rows_ && std::isfinite(bound); ++i) {
          const Scalar a = tab_(i, enter);
          if (a <= min_pivot || std::max(Scalar(0), tab_(i, cols_)) / a > bound) continue;
          if (leave < 0 || a > tab_(leave, enter)) leave = i;
        }
      }
      if (leave < 0) return LpStatus::unbounded;
      pivot(leave, enter);
      ++iterations;
      for (Index i = 0; i < rows_; ++i) tab_(i, cols_) = std::max(Scalar(0), tab_(i, cols_));
      const Scalar objective = cost_(cols_);
      if (std::abs(objective - last_objective) > feas * std::max(Scalar(1), std::abs(last_objective))) {
        stalled = 0;
        last_objective = objective;
      } else {
        ++stalled;
      }
    }
  }

  void drive_out_artificials() {
    const Scalar tol = Scalar(opts_.pivot_tolerance);
    std::vector<Index> redundant;
    for (Index i = 0; i < rows_; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < art_begin_) continue;
      Index col = -1;
      for (Index j = 0; j < art_begin_; ++j) {
        if (std::abs(tab_(i, j)) > tol) {
          col = j;
          break;
        }
      }
      if (col >= 0) {
        pivot(i, col);
      } else {
        redundant.push_back(i);
      }
    }
    if (redundant.empty()) return;
    // Drop rows that are linear combinations of the others.
    std::vector<Index> keep;
    for (Index i = 0, r = 0; i < rows_; ++i) {
      if (r < static_cast<Index>(redundant.size()) && redundant[static_cast<std::size_t>(r)] == i) {
        ++r;
        continue;
      }
      keep.push_back(i);
    }
    RowMatrix tab(static_cast<Index>(keep.size()), cols_ + 1);
    RowMatrix a(static_cast<Index>(keep.size()), a_std_.cols());
    RowMatrix orig(static_cast<Index>(keep.size()), cols_ + 1);
    Vec b(static_cast<Index>(keep.size()));
    std::vector<Index> basis;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      const Index i = keep[k];
      tab.row(static_cast<Index>(k)) = tab_.row(i);
      a.row(static_cast<Index>(k)) = a_std_.row(i);
      orig.row(static_cast<Index>(k)) = orig_.row(i);
      b(static_cast<Index>(k)) = b_std_(i);
      basis.push_back(basis_[static_cast<std::size_t>(i)]);
    }
    tab_ = std::move(tab);
    a_std_ = std::move(a);
    orig_ = std::move(orig);
    b_std_ = std::move(b);
    basis_ = std::move(basis);
    rows_ = static_cast<Index>(keep.size());
  }

  Vec basic_solution() const {
    const Index n = a_std_.cols();
    Vec y = Vec::Zero(n);
    for (Index i = 0; i < rows_; ++i) {
      const Index b = basis_[static_cast<std::size_t>(i)];
      if (b < n) y(b) = tab_(i, cols_);
    }
    if (rows_ == 0) return y;
    // Refine x_B from the original rows; keep the tableau values if the
    // factorization disagrees (ill-conditioned basis).
    DynMatrix<Scalar> basis_matrix(rows_, rows_);
    bool usable = true;
    for (Index i = 0; i < rows_; ++i) {
      const Index b = basis_[static_cast<std::size_t>(i)];
      if (b >= n) {
        usable = false;
        break;
      }
      basis_matrix.col(i) = a_std_.col(b);
    }
    if (!usable) return y;
    Eigen::PartialPivLU<DynMatrix<Scalar>> lu(basis_matrix);
    const Vec xb = lu.solve(b_std_);
    Scalar drift(0);
    for (Index i = 0; i < rows_; ++i) drift = std::max(drift, std::abs(xb(i) - tab_(i, cols_)));
    if (!(drift <= Scalar(1e-6) * std::max(Scalar(1), rhs_scale_))) return y;
    for (Index i = 0; i < rows_; ++i) {
      y(basis_[static_cast<std::size_t>(i)]) = std::max(Scalar(0), xb(i));
    }
    return y;
  }

  Vec recover(const Vec& y) const {
    Vec v(lp_.variable_count);
    for (Index j = 0; j < lp_.variable_count; ++j) {
      const auto& m = maps_[static_cast<std::size_t>(j)];
      Scalar val = m.offset;
      for (const auto& p : m.parts) val += p.sign * y(p.column);
      v(j) = val;
    }
    return v;
  }

  const LinearProgram<Scalar>& lp_;
  SimplexOptions opts_;
  std::vector<VarMap> maps_;
  Index struct_count_ = 0;
  Index slack_count_ = 0;
  Index rows_ = 0;
  Index cols_ = 0;
  Index art_begin_ = 0;
  Index artificial_count_ = 0;
  Scalar rhs_scale_{};
  RowMatrix a_std_;
  Vec b_std_;
  Vec std_cost_;
  std::vector<Index> slack_of_row_;
  RowMatrix orig_;
  RowMatrix tab_;
  Vec cost_;
  Vec phase_cost_;
  std::vector<Index> basis_;
};

}  // namespace detail

template <typename Scalar>
LpSolution<Scalar> solve(const LinearProgram<Scalar>& lp, const SimplexOptions& options = {}) {
  lp.validate();
  return detail::SimplexTableau<Scalar>(lp, options).run();
}

/// Writes the program in CPLEX LP text format.
template <typename Scalar>
void write_lp_format(std::ostream& os, const LinearProgram<Scalar>& lp, const std::string& title = {}) {
  auto name = [&](Index j) {
    const auto& n = lp.names[static_cast<std::size_t>(j)];
    return n.empty() ? "x" + std::to_string(j) : n;
  };
  auto term = [&](Scalar a, Index j) {
    os << (a < 0 ? " - " : " + ") << static_cast<double>(std::abs(a)) << ' ' << name(j);
  };
  const auto old_precision = os.precision(17);
  if (!title.empty()) os << "\\ " << title << '\n';
  os << "Minimize\n obj:";
  bool any = false;
  for (Index j = 0; j < lp.variable_count; ++j) {
    if (lp.objective(j) != Scalar(0)) {
      term(lp.objective(j), j);
      any = true;
    }
  }
  if (!any) os << " 0 " << (lp.variable_count ? name(0) : std::string("x0"));
  os << "\nSubject To\n";
  for (std::size_t i = 0; i < lp.constraints.size(); ++i) {
    const auto& c = lp.constraints[i];
    os << " c" << i << ':';
    bool nonzero = false;
    for (Index j = 0; j < lp.variable_count; ++j) {
      if (c.coefficients(j) != Scalar(0)) {
        term(c.coefficients(j), j);
        nonzero = true;
      }
    }
    if (!nonzero) os << " 0 " << (lp.variable_count ? name(0) : std::string("x0"));
    os << (c.relation == Relation::equal ? " = " : " <= ") << static_cast<double>(c.rhs) << '\n';
  }
  os << "Bounds\n";
  for (Index j = 0; j < lp.variable_count; ++j) {
    const Scalar lo = lp.lower[static_cast<std::size_t>(j)];
    const Scalar hi = lp.upper[static_cast<std::size_t>(j)];
    if (!std::isfinite(lo) && !std::isfinite(hi)) {
      os << ' ' << name(j) << " free\n";
    } else if (!std::isfinite(hi)) {
      if (lo != Scalar(0)) os << ' ' << name(j) << " >= " << static_cast<double>(lo) << '\n';
    } else if (!std::isfinite(lo)) {
      os << " -inf <= " << name(j) << " <= " << static_cast<double>(hi) << '\n';
    } else {
      os << ' ' << static_cast<double>(lo) << " <= " << name(j) << " <= " << static_cast<double>(hi) << '\n';
    }
  }
  os << "End\n";
  os.precision(old_precision);
}

}  // namespace switchguard
