#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <set>

#include "oracles.hpp"
#include "switchguard/fixtures.hpp"
#include "switchguard/switched_model.hpp"

using namespace switchguard;

namespace {

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Index>(v.size()));
  Index j = 0;
  for (double x : v) m(0, j++) = x;
  return m;
}

// Every window of every admissible sequence up to `max_len`, padded.
std::set<ModeHistory> brute_windows(const SwitchingAutomaton& a, std::size_t length, std::size_t max_len) {
  std::set<ModeHistory> out;
  std::vector<Mode> seq;
  std::function<void()> grow = [&] {
    if (!seq.empty()) out.insert(window(seq, static_cast<Index>(seq.size()) - 1, length, a.padding_mode()));
    if (seq.size() == max_len) return;
    for (Mode m = 0; m < static_cast<Mode>(a.mode_count()); ++m) {
      if (seq.empty() ? !a.can_start(m) : !a.allows(seq.back(), m)) continue;
      seq.push_back(m);
      grow();
      seq.pop_back();
    }
  };
  grow();
  return out;
}

SwitchingAutomaton random_automaton(std::mt19937_64& rng, std::size_t modes) {
  std::bernoulli_distribution coin(0.6);
  std::vector<std::vector<bool>> allowed(modes, std::vector<bool>(modes));
  for (auto& r : allowed) {
    bool any = false;
    for (std::size_t j = 0; j < modes; ++j) any |= (r[j] = coin(rng));
    if (!any) r[0] = true;
  }
  std::vector<bool> initial(modes, false);
  initial[0] = true;
  for (std::size_t j = 1; j < modes; ++j) initial[j] = coin(rng);
  return SwitchingAutomaton(allowed, initial, 0);
}

}  // namespace

TEST_CASE("plant validation") {
  const Matrix a = Matrix::Identity(2, 2), b = Matrix::Ones(2, 1);
  CHECK_THROWS_AS(ChannelPlant(Matrix::Ones(2, 3), b, {{row({1, 0}), row({0})}}), ShapeError);
  CHECK_THROWS_AS(ChannelPlant(a, Matrix::Ones(3, 1), {{row({1, 0}), row({0})}}), ShapeError);
  CHECK_THROWS_AS(ChannelPlant(a, b, {}), ShapeError);
  CHECK_THROWS_AS(ChannelPlant(a, b, {{row({1, 0, 0}), row({0})}}), ShapeError);
  CHECK_THROWS_AS(ChannelPlant(a, b, {{row({1, 0}), row({0, 1})}}), ShapeError);
  CHECK_THROWS_AS(ChannelPlant(a, b, {{row({1, 0}), row({0})}}, -1.0), std::invalid_argument);
}

TEST_CASE("stacked outputs and channel offsets") {
  const ChannelPlant p = fixtures::example_plant();
  CHECK(p.output_dim() == 2);
  CHECK(p.channel_offset(0) == 0);
  CHECK(p.channel_offset(1) == 1);
  CHECK(p.stacked_C().row(1) == row({1, -1, -2}));
  CHECK(p.stacked_D()(1, 1) == doctest::Approx(0.01));
}

TEST_CASE("build_modes zeroes dropped channels") {
  const ChannelPlant p = fixtures::example_plant();
  const auto pats = fixtures::example_patterns();
  const SwitchedOutputModel m = build_modes(p, pats);
  CHECK(m.mode_count() == 2);
  CHECK(m.C(0) == p.stacked_C());
  CHECK(m.C(1).row(0) == p.stacked_C().row(0));
  CHECK(m.C(1).row(1).isZero());
  CHECK(m.D(1).row(1).isZero());
  CHECK_THROWS_AS(m.mode(2), std::out_of_range);
}

TEST_CASE("build_modes rejects a partial nominal mask and reports duplicates") {
  const ChannelPlant p = fixtures::example_plant();
  const std::vector<SelectionMask> bad{SelectionMask{{0}}};
  CHECK_THROWS_AS(build_modes(p, bad), std::invalid_argument);
  CHECK_THROWS_AS(build_modes(p, std::vector<SelectionMask>{}), std::invalid_argument);
  const std::vector<SelectionMask> out_of_range{SelectionMask::all(2), SelectionMask{{5}}};
  CHECK_THROWS_AS(build_modes(p, out_of_range), std::out_of_range);
  std::vector<std::string> warnings;
  const std::vector<SelectionMask> dup{SelectionMask::all(2), SelectionMask{{0}}, SelectionMask{{0}}};
  build_modes(p, dup, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("duplicates") != std::string::npos);
}

TEST_CASE("mode history windows and padding") {
  const ModeSequence sigma{1, 0, 1, 1};
  CHECK(window(sigma, 0, 3, 0).modes == std::vector<Mode>{0, 0, 1});
  CHECK(window(sigma, 3, 2, 0).modes == std::vector<Mode>{1, 1});
  CHECK(window(sigma, 1, 3, 1).modes == std::vector<Mode>{1, 1, 0});
  const ModeHistory h = window(sigma, 3, 3, 0);
  CHECK(h.current() == 1);
  CHECK(h.at_lag(2) == 0);
  CHECK(h.suffix(1).modes == std::vector<Mode>{1});
  CHECK(h.to_string() == "(0,1,1)");
  CHECK_THROWS_AS(window(sigma, 4, 2, 0), std::out_of_range);
  CHECK_THROWS_AS(window(sigma, 0, 0, 0), std::invalid_argument);
}

TEST_CASE("automaton admissibility") {
  // 1 -> 1 forbidden: the attacker cannot drop twice in a row.
  const SwitchingAutomaton a({{true, true}, {true, false}}, {true, false});
  CHECK(a.admissible(ModeSequence{0, 1, 0, 1}));
  CHECK_FALSE(a.admissible(ModeSequence{0, 1, 1}));
  CHECK_FALSE(a.admissible(ModeSequence{1, 0}));
  CHECK_FALSE(a.is_complete());
  CHECK(SwitchingAutomaton::complete(3).is_complete());
  CHECK_THROWS(SwitchingAutomaton({{true}}, {false}));
  CHECK_THROWS(SwitchingAutomaton({{true, true}}, {true}));
  const SwitchingAutomaton unreachable({{true, false}, {false, true}}, {true, false});
  CHECK(unreachable.reachable() == std::vector<bool>{true, false});
}

TEST_CASE("complete automata present every window") {
  for (std::size_t len = 1; len <= 4; ++len) {
    CHECK(enumerate_histories(SwitchingAutomaton::complete(2), len).size() == (std::size_t{1} << len));
  }
  CHECK(enumerate_histories(SwitchingAutomaton::complete(3), 3).size() == 27);
}

TEST_CASE("property: enumerated histories equal the brute-force windows") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t modes = 2 + trial % 2;
    const SwitchingAutomaton a = random_automaton(rng, modes);
    const std::size_t len = 1 + static_cast<std::size_t>(trial % 3);
    const auto got = enumerate_histories(a, len);
    const auto want = brute_windows(a, len, len + modes + 1);
    CHECK(std::set<ModeHistory>(got.begin(), got.end()) == want);
    CHECK(std::is_sorted(got.begin(), got.end()));
  }
}

TEST_CASE("switching FIR storage") {
  SwitchingFIR f(2, 3, 2, 1);
  CHECK_THROWS_AS(f.set(ModeHistory{{0}}, 0, Matrix::Ones(2, 1)), std::invalid_argument);
  CHECK_THROWS_AS(f.set(ModeHistory{{0, 1}}, 3, Matrix::Ones(2, 1)), std::out_of_range);
  CHECK_THROWS_AS(f.set(ModeHistory{{0, 1}}, 0, Matrix::Ones(1, 1)), ShapeError);
  f.set(ModeHistory{{0, 1}}, 1, Matrix::Ones(2, 1));
  CHECK(f.contains(ModeHistory{{0, 1}}));
  CHECK(f.tap(ModeHistory{{0, 1}}, 0).isZero());
  try {
    f.tap(ModeHistory{{1, 1}}, 0);
    FAIL("expected a missing-history error");
  } catch (const std::out_of_range& e) {
    CHECK(std::string(e.what()).find("(1,1)") != std::string::npos);
  }
  CHECK(f.scaled(-2.0).tap(ModeHistory{{0, 1}}, 1)(1, 0) == -2.0);
}

TEST_CASE("property: instantiate selects taps by window") {
  std::mt19937_64 rng(4);
  const auto a = SwitchingAutomaton::complete(2);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t M = 1 + static_cast<std::size_t>(trial % 2), N = 1 + static_cast<std::size_t>(trial % 4);
    SwitchingFIR f(M, N, 2, 3);
    for (const auto& h : enumerate_histories(a, M)) {
      for (std::size_t k = 0; k < N; ++k) f.set(h, k, oracle::random_matrix(rng, 2, 3));
    }
    ModeSequence sigma(7);
    for (auto& s : sigma) s = static_cast<Mode>(rng() % 2);
    const Operator op = instantiate(f, sigma, 7, 0);
    for (Index t = 0; t < 7; ++t) {
      for (Index k = 0; k <= t; ++k) {
        const Matrix want = k < static_cast<Index>(N) ? f.tap(window(sigma, t, M, 0), static_cast<std::size_t>(k))
                                                      : Matrix::Zero(2, 3);
        CHECK(op.block(t, k) == want);
      }
    }
  }
}

TEST_CASE("lifted outputs follow sigma") {
  const ChannelPlant p = fixtures::example_plant();
  const SwitchedOutputModel m = build_modes(p, fixtures::example_patterns());
  const ModeSequence sigma{0, 1, 0};
  const LiftedOutputs l = lift_outputs(m, sigma, 3);
  const oracle::Mat want = oracle::block_diag({m.C(0), m.C(1), m.C(0)});
  CHECK(l.Cbar.dense() == want);
  CHECK_THROWS_AS(lift_outputs(m, sigma, 4), std::invalid_argument);
}

TEST_CASE("broadcast copies single-mode taps to every history") {
  SwitchingFIR f(1, 2, 1, 1);
  f.set(ModeHistory{{0}}, 0, Matrix::Constant(1, 1, 3.0));
  const SwitchingFIR b = broadcast_to_modes(f, SwitchingAutomaton::complete(3));
  CHECK(b.histories().size() == 3);
  CHECK(b.tap(ModeHistory{{2}}, 0)(0, 0) == 3.0);
  CHECK_THROWS_AS(broadcast_to_modes(SwitchingFIR(1, 1, 1, 1), SwitchingAutomaton::complete(2)), std::invalid_argument);
}
