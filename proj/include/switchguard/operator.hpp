#pragma once

// Finite-horizon causal linear operators.
//
// A causal operator R acting on sequences u(0), u(1), ... is the block lower
// triangular matrix
//
//   y(t) = sum_{k=0}^{t} R_{t,k} u(t - k),
//
// where R_{t,k} is the block at time t and lag k. Only the first `horizon`
// time steps are kept. Blocks are stored sparsely per time step, an absent
// block is zero, so diagonal and FIR operators cost O(taps).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace switchguard {

using Index = Eigen::Index;

template <typename Scalar>
using DynMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using DynVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Finite sequence of vectors x(0), ..., x(horizon - 1).
template <typename Scalar>
class Signal {
 public:
  using Vector = DynVector<Scalar>;

  Signal() = default;
  Signal(Index horizon, Index dim)
      : dim_(dim), samples_(static_cast<std::size_t>(horizon), Vector::Zero(dim)) {
    if (horizon < 1 || dim < 1) throw ShapeError("Signal: horizon and dim must be positive");
  }

  static Signal from_samples(std::vector<Vector> samples) {
    if (samples.empty()) throw ShapeError("Signal: no samples");
    Signal s;
    s.dim_ = samples.front().size();
    for (const auto& v : samples) {
      if (v.size() != s.dim_) throw ShapeError("Signal: samples differ in length");
    }
    s.samples_ = std::move(samples);
    return s;
  }

  /// Inverse of stacked(): splits a (dim * horizon) vector into samples.
  static Signal from_stacked(const Vector& stacked, Index dim) {
    if (dim < 1 || stacked.size() % dim != 0 || stacked.size() == 0) {
      throw ShapeError("Signal::from_stacked: length is not a multiple of dim");
    }
    Signal s(stacked.size() / dim, dim);
    for (Index t = 0; t < s.horizon(); ++t) s[t] = stacked.segment(t * dim, dim);
    return s;
  }

  Index horizon() const { return static_cast<Index>(samples_.size()); }
  Index dim() const { return dim_; }

  const Vector& operator[](Index t) const { return samples_.at(static_cast<std::size_t>(t)); }
  Vector& operator[](Index t) { return samples_.at(static_cast<std::size_t>(t)); }

  Vector stacked() const {
    Vector out(dim_ * horizon());
    for (Index t = 0; t < horizon(); ++t) out.segment(t * dim_, dim_) = (*this)[t];
    return out;
  }

  /// sup_t ||x(t)||_inf
  Scalar sup_norm() const {
    Scalar best(0);
    for (const auto& v : samples_) best = std::max(best, v.cwiseAbs().maxCoeff());
    return best;
  }

 private:
  Index dim_ = 0;
  std::vector<Vector> samples_;
};

template <typename Scalar>
class TruncatedOperator {
 public:
  using Matrix = DynMatrix<Scalar>;
  using TapMap = std::map<Index, Matrix>;

  TruncatedOperator() = default;
  TruncatedOperator(Index horizon, Index out_dim, Index in_dim)
      : out_dim_(out_dim), in_dim_(in_dim), kernel_(static_cast<std::size_t>(horizon)) {
    if (horizon < 1 || out_dim < 1 || in_dim < 1) {
      throw ShapeError("TruncatedOperator: horizon and dimensions must be positive");
    }
  }

  Index horizon() const { return static_cast<Index>(kernel_.size()); }
  Index out_dim() const { return out_dim_; }
  Index in_dim() const { return in_dim_; }

  void set(Index t, Index lag, Matrix block) {
    check_index(t, lag);
    if (block.rows() != out_dim_ || block.cols() != in_dim_) {
      throw ShapeError("TruncatedOperator::set: block is " + std::to_string(block.rows()) + "x" +
                       std::to_string(block.cols()) + ", expected " + std::to_string(out_dim_) +
                       "x" + std::to_string(in_dim_));
    }
    kernel_[static_cast<std::size_t>(t)][lag] = std::move(block);
  }

  /// Adds `block` into the (t, lag) entry, creating it if absent.
  void accumulate(Index t, Index lag, const Matrix& block) {
    check_index(t, lag);
    auto& taps = kernel_[static_cast<std::size_t>(t)];
    auto it = taps.find(lag);
    if (it == taps.end()) {
      if (block.rows() != out_dim_ || block.cols() != in_dim_) {
        throw ShapeError("TruncatedOperator::accumulate: block shape mismatch");
      }
      taps.emplace(lag, block);
    } else {
      it->second += block;
    }
  }

  /// nullptr when the entry is absent (zero).
  const Matrix* find(Index t, Index lag) const {
    if (t < 0 || t >= horizon()) return nullptr;
    const auto& taps = kernel_[static_cast<std::size_t>(t)];
    auto it = taps.find(lag);
    return it == taps.end() ? nullptr : &it->second;
  }

  Matrix block(Index t, Index lag) const {
    const Matrix* m = find(t, lag);
    return m ? *m : Matrix::Zero(out_dim_, in_dim_);
  }

  const TapMap& taps(Index t) const { return kernel_.at(static_cast<std::size_t>(t)); }

  /// Block lower-triangular (out_dim * H) x (in_dim * H) matrix.
  Matrix dense() const {
    const Index h = horizon();
    Matrix out = Matrix::Zero(out_dim_ * h, in_dim_ * h);
    for (Index t = 0; t < h; ++t) {
      for (const auto& [lag, m] : taps(t)) {
        out.block(t * out_dim_, (t - lag) * in_dim_, out_dim_, in_dim_) = m;
      }
    }
    return out;
  }

  /// Inverse of dense(). Exactly-zero blocks are not stored; a nonzero block
  /// above the diagonal is rejected.
  static TruncatedOperator from_dense(const Matrix& m, Index horizon, Index out_dim,
                                      Index in_dim) {
    if (m.rows() != out_dim * horizon || m.cols() != in_dim * horizon) {
      throw ShapeError("TruncatedOperator::from_dense: matrix shape mismatch");
    }
    TruncatedOperator op(horizon, out_dim, in_dim);
    for (Index t = 0; t < horizon; ++t) {
      for (Index s = 0; s < horizon; ++s) {
        Matrix b = m.block(t * out_dim, s * in_dim, out_dim, in_dim);
        if (b.isZero(0)) continue;
        if (s > t) throw ShapeError("TruncatedOperator::from_dense: matrix is not causal");
        op.set(t, t - s, std::move(b));
      }
    }
    return op;
  }

 private:
  void check_index(Index t, Index lag) const {
    if (t < 0 || t >= horizon()) throw std::out_of_range("TruncatedOperator: time out of range");
    if (lag < 0 || lag > t) throw std::out_of_range("TruncatedOperator: lag outside 0..t");
  }

  Index out_dim_ = 0;
  Index in_dim_ = 0;
  std::vector<TapMap> kernel_;
};

template <typename Scalar>
TruncatedOperator<Scalar> zero_operator(Index out_dim, Index in_dim, Index horizon) {
  return TruncatedOperator<Scalar>(horizon, out_dim, in_dim);
}

template <typename Scalar>
TruncatedOperator<Scalar> make_diagonal(std::span<const DynMatrix<Scalar>> blocks, Index horizon) {
  if (blocks.empty()) throw ShapeError("make_diagonal: no blocks");
  if (blocks.size() != 1 && static_cast<Index>(blocks.size()) < horizon) {
    throw ShapeError("make_diagonal: fewer blocks than time steps");
  }
  const Index rows = blocks.front().rows();
  const Index cols = blocks.front().cols();
  TruncatedOperator<Scalar> op(horizon, rows, cols);
  for (Index t = 0; t < horizon; ++t) {
    const auto& b = blocks.size() == 1 ? blocks.front() : blocks[static_cast<std::size_t>(t)];
    if (b.rows() != rows || b.cols() != cols) {
      throw ShapeError("make_diagonal: block " + std::to_string(t) + " has mismatched shape");
    }
    op.set(t, 0, b);
  }
  return op;
}

/// Diagonal lift of a single constant matrix.
template <typename Scalar>
TruncatedOperator<Scalar> make_diagonal(const DynMatrix<Scalar>& block, Index horizon) {
  return make_diagonal<Scalar>(std::span<const DynMatrix<Scalar>>(&block, 1), horizon);
}

template <typename Scalar>
TruncatedOperator<Scalar> identity_operator(Index dim, Index horizon) {
  return make_diagonal<Scalar>(DynMatrix<Scalar>::Identity(dim, dim), horizon);
}

/// Lambda^power: prepends `power` zero samples.
template <typename Scalar>
TruncatedOperator<Scalar> delay(Index power, Index dim, Index horizon) {
  if (power < 0) throw std::invalid_argument("delay: negative power");
  TruncatedOperator<Scalar> op(horizon, dim, dim);
  for (Index t = power; t < horizon; ++t) op.set(t, power, DynMatrix<Scalar>::Identity(dim, dim));
  return op;
}

namespace detail {
template <typename Scalar>
void require_same_horizon(const TruncatedOperator<Scalar>& r, const TruncatedOperator<Scalar>& s,
                          const char* what) {
  if (r.horizon() != s.horizon()) throw ShapeError(std::string(what) + ": horizon mismatch");
}
}  // namespace detail

/// R * S, i.e. apply S first.
template <typename Scalar>
TruncatedOperator<Scalar> compose(const TruncatedOperator<Scalar>& r,
                                  const TruncatedOperator<Scalar>& s) {
  detail::require_same_horizon(r, s, "compose");
  if (s.out_dim() != r.in_dim()) throw ShapeError("compose: inner dimensions differ");
  TruncatedOperator<Scalar> out(r.horizon(), r.out_dim(), s.in_dim());
  for (Index t = 0; t < r.horizon(); ++t) {
    for (const auto& [j, rb] : r.taps(t)) {
      for (const auto& [l, sb] : s.taps(t - j)) out.accumulate(t, j + l, rb * sb);
    }
  }
  return out;
}

template <typename Scalar>
TruncatedOperator<Scalar> scale(const TruncatedOperator<Scalar>& r, Scalar c) {
  TruncatedOperator<Scalar> out(r.horizon(), r.out_dim(), r.in_dim());
  for (Index t = 0; t < r.horizon(); ++t) {
    for (const auto& [lag, m] : r.taps(t)) out.set(t, lag, c * m);
  }
  return out;
}

template <typename Scalar>
TruncatedOperator<Scalar> add(const TruncatedOperator<Scalar>& r, const TruncatedOperator<Scalar>& s) {
  detail::require_same_horizon(r, s, "add");
  if (r.out_dim() != s.out_dim() || r.in_dim() != s.in_dim()) {
    throw ShapeError("add: dimension mismatch");
  }
  TruncatedOperator<Scalar> out = r;
  for (Index t = 0; t < s.horizon(); ++t) {
    for (const auto& [lag, m] : s.taps(t)) out.accumulate(t, lag, m);
  }
  return out;
}

template <typename Scalar>
TruncatedOperator<Scalar> operator+(const TruncatedOperator<Scalar>& r,
                                    const TruncatedOperator<Scalar>& s) {
  return add(r, s);
}

template <typename Scalar>
TruncatedOperator<Scalar> operator-(const TruncatedOperator<Scalar>& r,
                                    const TruncatedOperator<Scalar>& s) {
  return add(r, scale(s, Scalar(-1)));
}

template <typename Scalar>
TruncatedOperator<Scalar> operator-(const TruncatedOperator<Scalar>& r) {
  return scale(r, Scalar(-1));
}

template <typename Scalar>
TruncatedOperator<Scalar> operator*(const TruncatedOperator<Scalar>& r,
                                    const TruncatedOperator<Scalar>& s) {
  return compose(r, s);
}

/// [R S]: concatenates inputs.
template <typename Scalar>
TruncatedOperator<Scalar> hstack(const TruncatedOperator<Scalar>& r, const TruncatedOperator<Scalar>& s) {
  detail::require_same_horizon(r, s, "hstack");
  if (r.out_dim() != s.out_dim()) throw ShapeError("hstack: output dimensions differ");
  using Matrix = DynMatrix<Scalar>;
  TruncatedOperator<Scalar> out(r.horizon(), r.out_dim(), r.in_dim() + s.in_dim());
  for (Index t = 0; t < r.horizon(); ++t) {
    std::map<Index, Matrix> merged;
    auto slot = [&](Index lag) -> Matrix& {
      auto [it, fresh] = merged.try_emplace(lag, Matrix::Zero(out.out_dim(), out.in_dim()));
      return it->second;
    };
    for (const auto& [lag, m] : r.taps(t)) slot(lag).leftCols(r.in_dim()) = m;
    for (const auto& [lag, m] : s.taps(t)) slot(lag).rightCols(s.in_dim()) = m;
    for (auto& [lag, m] : merged) out.set(t, lag, std::move(m));
  }
  return out;
}

/// (I - Lambda Abar)^{-1}; kernel(t, k) = A^k.
template <typename Scalar>
TruncatedOperator<Scalar> resolvent_of_state(const DynMatrix<Scalar>& a, Index horizon) {
  if (a.rows() != a.cols()) throw ShapeError("resolvent_of_state: A must be square");
  const Index n = a.rows();
  std::vector<DynMatrix<Scalar>> powers;
  powers.reserve(static_cast<std::size_t>(horizon));
  powers.push_back(DynMatrix<Scalar>::Identity(n, n));
  for (Index k = 1; k < horizon; ++k) powers.push_back(a * powers.back());
  TruncatedOperator<Scalar> op(horizon, n, n);
  for (Index t = 0; t < horizon; ++t) {
    for (Index k = 0; k <= t; ++k) op.set(t, k, powers[static_cast<std::size_t>(k)]);
  }
  return op;
}

/// Causal inverse by forward substitution. Every lag-0 block must be
/// invertible; missing lag-0 blocks are singular.
template <typename Scalar>
TruncatedOperator<Scalar> causal_inverse(const TruncatedOperator<Scalar>& r) {
  if (r.out_dim() != r.in_dim()) throw ShapeError("causal_inverse: operator must be square");
  using Matrix = DynMatrix<Scalar>;
  const Index h = r.horizon();
  const Index n = r.out_dim();
  // Columns s of the inverse: G_{t,s} = -R_{t,t}^{-1} sum_{s<=j<t} R_{t,j} G_{j,s}
  std::vector<Eigen::FullPivLU<Matrix>> diag;
  diag.reserve(static_cast<std::size_t>(h));
  for (Index t = 0; t < h; ++t) {
    const Matrix* d = r.find(t, 0);
    if (d == nullptr) throw std::domain_error("causal_inverse: lag-0 block is zero");
    diag.emplace_back(*d);
    if (!diag.back().isInvertible()) {
      throw std::domain_error("causal_inverse: singular lag-0 block at t=" + std::to_string(t));
    }
  }
  TruncatedOperator<Scalar> g(h, n, n);
  for (Index t = 0; t < h; ++t) {
    const auto& lu = diag[static_cast<std::size_t>(t)];
    g.set(t, 0, lu.inverse());
    for (Index s = t - 1; s >= 0; --s) {
      Matrix acc = Matrix::Zero(n, n);
      bool any = false;
      for (const auto& [lag, rb] : r.taps(t)) {
        const Index j = t - lag;
        if (lag == 0 || j < s) continue;
        if (const Matrix* gb = g.find(j, j - s)) {
          acc += rb * *gb;
          any = true;
        }
      }
      if (any) g.set(t, t - s, -lu.solve(acc));
    }
  }
  return g;
}

template <typename Scalar>
Signal<Scalar> apply(const TruncatedOperator<Scalar>& r, const Signal<Scalar>& u) {
  if (u.dim() != r.in_dim()) throw ShapeError("apply: signal dimension mismatch");
  if (u.horizon() != r.horizon()) throw ShapeError("apply: horizon mismatch");
  Signal<Scalar> y(r.horizon(), r.out_dim());
  for (Index t = 0; t < r.horizon(); ++t) {
    for (const auto& [lag, m] : r.taps(t)) y[t].noalias() += m * u[t - lag];
  }
  return y;
}

/// l1 sum of output row i at time t, over all lags and input columns.
template <typename Scalar>
Scalar row_sum(const TruncatedOperator<Scalar>& r, Index t, Index row) {
  Scalar total(0);
  for (const auto& [lag, m] : r.taps(t)) total += m.row(row).cwiseAbs().sum();
  return total;
}

/// l_inf-induced norm over the horizon: max over times and rows of the
/// absolute row sum.
template <typename Scalar>
Scalar induced_norm(const TruncatedOperator<Scalar>& r) {
  Scalar best(0);
  for (Index t = 0; t < r.horizon(); ++t) {
    for (Index i = 0; i < r.out_dim(); ++i) best = std::max(best, row_sum(r, t, i));
  }
  return best;
}

template <typename Scalar>
struct RowGain {
  Scalar value{};
  Index row = 0;
  Signal<Scalar> witness;
};

/// Worst output row at time t and the +-1 input that attains it. Entries the
/// row does not read are set to +1.
template <typename Scalar>
RowGain<Scalar> row_gain(const TruncatedOperator<Scalar>& r, Index t) {
  if (t < 0 || t >= r.horizon()) throw std::out_of_range("row_gain: time out of range");
  RowGain<Scalar> g;
  g.value = Scalar(-1);
  for (Index i = 0; i < r.out_dim(); ++i) {
    const Scalar v = row_sum(r, t, i);
    if (v > g.value) {
      g.value = v;
      g.row = i;
    }
  }
  g.witness = Signal<Scalar>(r.horizon(), r.in_dim());
  for (Index s = 0; s < r.horizon(); ++s) g.witness[s].setOnes();
  for (const auto& [lag, m] : r.taps(t)) {
    for (Index j = 0; j < r.in_dim(); ++j) {
      g.witness[t - lag](j) = m(g.row, j) < Scalar(0) ? Scalar(-1) : Scalar(1);
    }
  }
  return g;
}

}  // namespace switchguard
