#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "switchguard/operator.hpp"

using namespace switchguard;
using Op = TruncatedOperator<double>;
using Sig = Signal<double>;

namespace {

Op random_op(std::mt19937_64& rng, Index h, Index out, Index in) {
  return Op::from_dense(oracle::random_causal(rng, h, out, in), h, out, in);
}

struct Dims {
  Index h, a, b, c;
};

Dims random_dims(std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> hd(1, 7), dd(1, 3);
  return {hd(rng), dd(rng), dd(rng), dd(rng)};
}

}  // namespace

TEST_CASE("signal stacking round trip") {
  std::mt19937_64 rng(1);
  const oracle::Vec v = oracle::random_matrix(rng, 12, 1);
  const Sig s = Sig::from_stacked(v, 3);
  CHECK(s.horizon() == 4);
  CHECK(s.stacked() == v);
  CHECK(s.sup_norm() == doctest::Approx(v.cwiseAbs().maxCoeff()));
  CHECK_THROWS_AS(Sig::from_stacked(v, 5), ShapeError);
  CHECK_THROWS_AS(Sig(0, 2), ShapeError);
  CHECK_THROWS_AS(Sig::from_samples({DynVector<double>::Zero(2), DynVector<double>::Zero(3)}), ShapeError);
}

TEST_CASE("kernel storage rejects bad shapes and indices") {
  Op op(3, 2, 1);
  CHECK_THROWS_AS(op.set(0, 0, DynMatrix<double>::Zero(1, 1)), ShapeError);
  CHECK_THROWS_AS(op.set(1, 2, DynMatrix<double>::Zero(2, 1)), std::out_of_range);
  CHECK_THROWS_AS(op.set(3, 0, DynMatrix<double>::Zero(2, 1)), std::out_of_range);
  CHECK(op.find(2, 1) == nullptr);
  CHECK(op.block(2, 1).isZero());
  op.accumulate(2, 1, DynMatrix<double>::Ones(2, 1));
  op.accumulate(2, 1, DynMatrix<double>::Ones(2, 1));
  CHECK(op.block(2, 1)(1, 0) == 2.0);
}

TEST_CASE("from_dense rejects non-causal matrices") {
  DynMatrix<double> m = DynMatrix<double>::Zero(4, 4);
  m(0, 3) = 1.0;
  CHECK_THROWS_AS(Op::from_dense(m, 2, 2, 2), ShapeError);
  CHECK_THROWS_AS(Op::from_dense(m, 3, 2, 2), ShapeError);
}

TEST_CASE("delay, identity and diagonal lifts") {
  const Op d = delay<double>(2, 1, 5);
  CHECK(d.dense() == oracle::shift(1, 5) * oracle::shift(1, 5));
  CHECK(identity_operator<double>(2, 3).dense() == DynMatrix<double>::Identity(6, 6));
  std::mt19937_64 rng(5);
  const DynMatrix<double> a = oracle::random_matrix(rng, 2, 3);
  CHECK(make_diagonal<double>(a, 4).dense() == oracle::repeat_diag(a, 4));
}

TEST_CASE("causal inverse of a singular lag-0 block fails") {
  Op r(2, 2, 2);
  r.set(0, 0, DynMatrix<double>::Identity(2, 2));
  r.set(1, 0, DynMatrix<double>::Zero(2, 2));
  CHECK_THROWS_AS(causal_inverse(r), std::domain_error);
  Op missing(2, 1, 1);
  missing.set(0, 0, DynMatrix<double>::Ones(1, 1));
  CHECK_THROWS_AS(causal_inverse(missing), std::domain_error);
}

TEST_CASE("shape mismatches are reported") {
  const Op r(3, 2, 2), s(3, 1, 2), t(4, 2, 2);
  CHECK_THROWS_AS(compose(r, s), ShapeError);
  CHECK_THROWS_AS(r + t, ShapeError);
  CHECK_THROWS_AS(apply(r, Sig(3, 1)), ShapeError);
  CHECK_THROWS_AS(hstack(r, t), ShapeError);
}

TEST_CASE("property: operator algebra matches dense oracles") {
  std::mt19937_64 rng(20240101);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims d = random_dims(rng);
    const Op r = random_op(rng, d.h, d.a, d.b);
    const Op s = random_op(rng, d.h, d.b, d.c);
    const Op r2 = random_op(rng, d.h, d.a, d.b);
    CHECK((compose(r, s).dense() - r.dense() * s.dense()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(((r + r2).dense() - (r.dense() + r2.dense())).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((scale(r, -2.5).dense() + 2.5 * r.dense()).cwiseAbs().maxCoeff() <= 1e-12);
    const oracle::Vec u = oracle::random_matrix(rng, d.b * d.h, 1);
    CHECK((apply(r, Sig::from_stacked(u, d.b)).stacked() - r.dense() * u).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(induced_norm(r) == doctest::Approx(oracle::induced_norm(r.dense())).epsilon(1e-12));
    // Norm axioms on the truncated space.
    CHECK(induced_norm(compose(r, s)) <= induced_norm(r) * induced_norm(s) + 1e-12);
    CHECK(induced_norm(r + r2) <= induced_norm(r) + induced_norm(r2) + 1e-12);
  }
}

TEST_CASE("property: resolvent and causal inverse") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims d = random_dims(rng);
    const DynMatrix<double> a = oracle::random_matrix(rng, d.a, d.a);
    const Op res = resolvent_of_state<double>(a, d.h);
    CHECK((res.dense() - oracle::resolvent(a, d.h)).cwiseAbs().maxCoeff() <= 1e-9);
    // A lag-0 block of I + small keeps the inverse well conditioned.
    Op g = random_op(rng, d.h, d.a, d.a);
    for (Index t = 0; t < d.h; ++t) g.set(t, 0, DynMatrix<double>::Identity(d.a, d.a) + 0.2 * oracle::random_matrix(rng, d.a, d.a));
    const Op gi = causal_inverse(g);
    CHECK((gi.dense() - g.dense().inverse()).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((compose(g, gi).dense() - DynMatrix<double>::Identity(d.a * d.h, d.a * d.h)).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("property: row_gain witness attains the row sum") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims d = random_dims(rng);
    const Op r = random_op(rng, d.h, d.a, d.b);
    const Index t = d.h - 1;
    const RowGain<double> g = row_gain(r, t);
    CHECK(g.witness.sup_norm() <= 1.0);
    const Sig y = apply(r, g.witness);
    CHECK(std::abs(y[t](g.row)) == doctest::Approx(g.value).epsilon(1e-12));
    const auto dense = r.dense();
    CHECK(g.value == doctest::Approx(dense.middleRows(t * d.a, d.a).cwiseAbs().rowwise().sum().maxCoeff()));
  }
}

TEST_CASE("hstack places the second operator's columns after the first") {
  std::mt19937_64 rng(3);
  const Op r = random_op(rng, 3, 2, 1), s = random_op(rng, 3, 2, 2);
  const Op h = hstack(r, s);
  CHECK(h.in_dim() == 3);
  for (Index t = 0; t < 3; ++t) {
    for (Index k = 0; k <= t; ++k) {
      CHECK(h.block(t, k).leftCols(1) == r.block(t, k));
      CHECK(h.block(t, k).rightCols(2) == s.block(t, k));
    }
  }
}
