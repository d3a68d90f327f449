#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "oracles.hpp"
#include "switchguard/fixtures.hpp"
#include "switchguard/synthesis.hpp"

using namespace switchguard;

namespace {

struct Problem {
  ChannelPlant plant = fixtures::example_plant();
  std::vector<SelectionMask> patterns;
  SwitchedOutputModel model;
  SwitchingAutomaton automaton;

  explicit Problem(std::size_t modes)
      : patterns(make_patterns(modes)), model(build_modes(plant, patterns)),
        automaton(SwitchingAutomaton::complete(modes)) {}

  static std::vector<SelectionMask> make_patterns(std::size_t modes) {
    auto p = fixtures::example_patterns();
    p.resize(modes);
    return p;
  }

  SynthesisResult run(std::size_t n, std::size_t m = 1, ResidualMode mode = ResidualMode::exact, double eps = 0) const {
    SynthesisConfig c;
    c.memory = m;
    c.fir_length = n;
    c.mode = mode;
    c.eps_bar = eps;
    return synthesize(plant, model, automaton, c);
  }
};

SwitchingFIR random_fir(std::mt19937_64& rng, const SwitchingAutomaton& a, std::size_t m, std::size_t n, Index out,
                        Index in, double scale) {
  SwitchingFIR f(m, n, out, in);
  for (const auto& h : enumerate_histories(a, m)) {
    for (std::size_t k = 0; k < n; ++k) f.set(h, k, oracle::random_matrix(rng, out, in, scale));
  }
  return f;
}

const SynthesisResult& switching_n5() {
  static const SynthesisResult r = Problem(2).run(5);
  return r;
}

}  // namespace

TEST_CASE("config validation") {
  SynthesisConfig c;
  c.fir_length = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.eps_bar = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.memory = 3;
  c.fir_length = 2;
  CHECK(c.extended_length() == 3);
}

TEST_CASE("decision layout packs and unpacks") {
  std::mt19937_64 rng(1);
  const auto a = SwitchingAutomaton::complete(2);
  const DecisionLayout layout(enumerate_histories(a, 1), 3, 3, 2);
  CHECK(layout.size() == 2 * 3 * (3 * 2 + 3 * 3));
  const SwitchingFIR q = random_fir(rng, a, 1, 3, 3, 3, 1.0), z = random_fir(rng, a, 1, 3, 3, 2, 1.0);
  const Vector v = layout.pack(q, z);
  CHECK(layout.unpack(Factor::Q, v).tap(ModeHistory{{1}}, 2) == q.tap(ModeHistory{{1}}, 2));
  CHECK(layout.unpack(Factor::Z, v).tap(ModeHistory{{0}}, 1) == z.tap(ModeHistory{{0}}, 1));
  std::set<Index> ids;
  for (const auto& h : layout.histories()) {
    for (std::size_t k = 0; k < 3; ++k) {
      for (Index i = 0; i < 3; ++i) {
        for (Index j = 0; j < 3; ++j) ids.insert(layout.id(Factor::Q, h, k, i, j));
        for (Index j = 0; j < 2; ++j) ids.insert(layout.id(Factor::Z, h, k, i, j));
      }
    }
  }
  CHECK(static_cast<Index>(ids.size()) == layout.size());
  CHECK_THROWS_AS(layout.id(Factor::Q, ModeHistory{{2}}, 0, 0, 0), std::out_of_range);
  CHECK(layout.name(layout.id(Factor::Z, ModeHistory{{1}}, 2, 0, 1)).find('Z') != std::string::npos);
}

TEST_CASE("affine forms evaluate") {
  AffineForm f{{{0, 2.0}, {2, -1.0}}, 0.5};
  Vector v(3);
  v << 1, 7, 3;
  CHECK(f.evaluate(v) == doctest::Approx(-0.5));
  CHECK_FALSE(f.is_constant());
}

TEST_CASE("mismatched automaton is rejected") {
  const Problem p(2);
  SynthesisConfig c;
  CHECK_THROWS_AS(synthesize(p.plant, p.model, SwitchingAutomaton::complete(3), c), ShapeError);
}

TEST_CASE("property: constraint rows equal operator row sums once every lag is present") {
  std::mt19937_64 rng(99);
  const Problem p(2);
  for (int trial = 0; trial < 20; ++trial) {
    SynthesisConfig c;
    c.memory = 1 + static_cast<std::size_t>(trial % 2);
    c.fir_length = 1 + static_cast<std::size_t>(trial % 3);
    const DecisionLayout layout(enumerate_histories(p.automaton, c.memory), c.fir_length, 3, 2);
    const SwitchingFIR q = random_fir(rng, p.automaton, c.memory, c.fir_length, 3, 3, 0.5);
    const SwitchingFIR z = random_fir(rng, p.automaton, c.memory, c.fir_length, 3, 2, 0.5);
    const Vector v = layout.pack(q, z);
    const auto resid = build_residual_rows(p.plant, p.model, p.automaton, c, layout);
    const auto perf = build_performance_rows(p.plant, p.model, p.automaton, c, layout);
    std::map<std::pair<ModeHistory, Index>, double> resid_l1, perf_l1;
    for (const auto& r : resid) resid_l1[{r.history, r.output_row}] = r.l1_value(v);
    for (const auto& r : perf) perf_l1[{r.history, r.output_row}] = r.l1_value(v);
    ModeSequence sigma(9);
    for (auto& s : sigma) s = static_cast<Mode>(rng() % 2);
    const Operator E = residual_operator(q, z, p.plant, p.model, sigma);
    const Operator Phi = performance_operator(q, z, p.plant, p.model, sigma);
    for (Index t = 0; t < 9; ++t) {
      const ModeHistory h = window(sigma, t, c.extended_length(), 0);
      for (Index i = 0; i < 3; ++i) {
        if (t >= static_cast<Index>(c.fir_length)) {
          CHECK(row_sum(E, t, i) == doctest::Approx(resid_l1.at({h, i})).epsilon(1e-12));
          CHECK(row_sum(Phi, t, i) == doctest::Approx(perf_l1.at({h, i})).epsilon(1e-12));
        } else {
          CHECK(row_sum(E, t, i) <= resid_l1.at({h, i}) + 1e-12);
          CHECK(row_sum(Phi, t, i) <= perf_l1.at({h, i}) + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("property: residual and performance operators match dense oracles") {
  std::mt19937_64 rng(123);
  const Problem p(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + static_cast<std::size_t>(trial % 2), n = 1 + static_cast<std::size_t>(trial % 4);
    const SwitchingFIR q = random_fir(rng, p.automaton, m, n, 3, 3, 1.0);
    const SwitchingFIR z = random_fir(rng, p.automaton, m, n, 3, 2, 1.0);
    const Index h = 6;
    ModeSequence sigma(static_cast<std::size_t>(h));
    for (auto& s : sigma) s = static_cast<Mode>(rng() % 2);
    std::vector<oracle::Mat> cs, ds;
    for (Mode s : sigma) {
      cs.push_back(p.model.C(s));
      ds.push_back(p.model.D(s));
    }
    const oracle::Mat sa = oracle::shift(3, h) * oracle::repeat_diag(p.plant.A(), h);
    const oracle::Mat sb = oracle::shift(3, h) * oracle::repeat_diag(p.plant.B(), h);
    const oracle::Mat I = oracle::Mat::Identity(3 * h, 3 * h);
    const oracle::Mat Qd = instantiate(q, sigma, h).dense(), Zd = instantiate(z, sigma, h).dense();
    const oracle::Mat E = sa + Zd * oracle::block_diag(cs) + Qd * (sa - I);
    CHECK((residual_operator(q, z, p.plant, p.model, sigma).dense() - E).cwiseAbs().maxCoeff() <= 1e-12);
    const oracle::Mat Pw = sb + Zd * oracle::block_diag(ds) + Qd * sb;
    const oracle::Mat Px = I + Qd;
    const oracle::Mat phi = performance_operator(q, z, p.plant, p.model, sigma).dense();
    // hstack interleaves per time step: columns of step s are [w(s), x0(s)].
    for (Index s = 0; s < h; ++s) {
      CHECK((phi.middleCols(s * 5, 2) - Pw.middleCols(s * 2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((phi.middleCols(s * 5 + 2, 3) - Px.middleCols(s * 3, 3)).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("nominal synthesis reaches the published cost") {
  const Problem p(1);
  const SynthesisResult r = p.run(2);
  REQUIRE(r.ok());
  CHECK(r.gamma_bar == doctest::Approx(5.0275).epsilon(1e-9));
  CHECK(r.lp_objective == doctest::Approx(r.gamma_bar).epsilon(1e-9));
  CHECK(r.eps_achieved <= 1e-9);
  CHECK(r.certified_bound == r.gamma_bar);
  const auto rm = evaluate_factors(r.Q, r.Z, p.plant, p.model, p.automaton, 2);
  CHECK(rm.performance == r.gamma_bar);
  CHECK(rm.residual == r.eps_achieved);
  const auto rep = certify(r, p.plant, p.model, p.automaton, 30, 5, 1);
  CHECK(rep.max_parametrization_residual <= 1e-7);
  CHECK(rep.max_performance <= r.gamma_bar + 1e-9);
}

TEST_CASE("too short an FIR is infeasible with guidance") {
  const SynthesisResult r = Problem(1).run(1);
  CHECK(r.status == SynthesisStatus::infeasible);
  CHECK(r.diagnostic.find("increase N") != std::string::npos);
  CHECK(r.diagnostic.find("eps_bar") != std::string::npos);
  CHECK_THROWS_AS(recover_observer_factors(r, Problem(1).model), std::invalid_argument);
}

TEST_CASE("switching synthesis across FIR lengths") {
  const Problem p(2);
  CHECK(p.run(2).status == SynthesisStatus::infeasible);
  const SynthesisResult r3 = p.run(3), r4 = p.run(4);
  REQUIRE(r3.ok());
  REQUIRE(r4.ok());
  CHECK(r3.gamma_bar == doctest::Approx(52).epsilon(1e-9));
  CHECK(r4.gamma_bar == doctest::Approx(36).epsilon(1e-9));
  const SynthesisResult& r5 = switching_n5();
  REQUIRE(r5.ok());
  CHECK(r5.gamma_bar == doctest::Approx(32.5).epsilon(1e-9));
  CHECK(r5.eps_achieved <= 1e-9);
}

TEST_CASE("longer mode memory does not raise the cost") {
  const SynthesisResult r = Problem(2).run(5, 2);
  REQUIRE(r.ok());
  CHECK(r.gamma_bar <= switching_n5().gamma_bar + 1e-7);
}

TEST_CASE("relaxed synthesis respects the residual budget") {
  const Problem p(2);
  for (double eps : {0.1, 0.5}) {
    const SynthesisResult r = p.run(5, 1, ResidualMode::relaxed, eps);
    REQUIRE(r.ok());
    CHECK(r.eps_achieved <= eps + 1e-9);
    CHECK(r.gamma_bar <= switching_n5().gamma_bar + 1e-9);
    CHECK(r.certified_bound == doctest::Approx(r.gamma_bar / (1 - eps)).epsilon(1e-12));
    const auto rep = certify(r, p.plant, p.model, p.automaton, 25, 5, 3);
    CHECK(rep.max_residual <= eps + 1e-9);
  }
}

TEST_CASE("certified bound formula") {
  CHECK(certified_bound(2.0, ResidualMode::exact, 0.5) == 2.0);
  CHECK(certified_bound(2.0, ResidualMode::relaxed, 0.5) == doctest::Approx(4.0));
  CHECK(certified_bound(3.0, ResidualMode::relaxed, 0.0) == 3.0);
}

TEST_CASE("parametrization residual detects a perturbed estimator") {
  const Problem p(2);
  const SynthesisResult& r = switching_n5();
  REQUIRE(r.ok());
  const ModeSequence sigma{0, 1, 1, 0, 1, 0, 0, 1, 1, 1};
  CHECK(parametrization_residual(r.T, r.Q, p.plant, p.model, sigma) <= 1e-7);
  SwitchingFIR bad = r.T;
  Matrix tap = bad.tap(ModeHistory{{1}}, 2);
  tap(0, 0) += 0.1;
  bad.set(ModeHistory{{1}}, 2, tap);
  CHECK(parametrization_residual(bad, r.Q, p.plant, p.model, sigma) >= 0.05);
}

TEST_CASE("observer factor recovery reports the lag-0 margin") {
  const Problem p(2);
  const ObserverFactors f = recover_observer_factors(switching_n5(), p.model);
  CHECK(f.lag0_margin == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(f.note.find("margin") != std::string::npos);
}

TEST_CASE("slack sharing keeps the LP small") {
  const Problem p(2);
  SynthesisConfig c;
  c.fir_length = 5;
  const DecisionLayout layout(enumerate_histories(p.automaton, 1), 5, 3, 2);
  const auto resid = build_residual_rows(p.plant, p.model, p.automaton, c, layout);
  const auto perf = build_performance_rows(p.plant, p.model, p.automaton, c, layout);
  const SynthesisLp lp = assemble_lp(resid, perf, c, layout);
  std::size_t entries = 0;
  for (const auto& r : perf) entries += r.entries.size();
  CHECK(lp.slack_count < static_cast<Index>(entries));
  CHECK(lp.decision_count == layout.size());
  CHECK(lp.lp.variable_count == layout.size() + 1 + lp.slack_count);
}

TEST_CASE("sampled sequences are admissible and reproducible") {
  const SwitchingAutomaton a({{true, true}, {true, false}}, {true, true});
  std::mt19937_64 r1(8), r2(8);
  for (int i = 0; i < 20; ++i) {
    const ModeSequence s = sample_sequence(a, 15, r1);
    CHECK(a.admissible(s));
    CHECK(s == sample_sequence(a, 15, r2));
  }
}
