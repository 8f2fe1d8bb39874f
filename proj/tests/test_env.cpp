#include <doctest.h>

#include <random>

#include "clab/env.hpp"
#include "clab/rng.hpp"
#include "test_support.hpp"

using namespace clab;
using namespace clab::testing;

TEST_CASE("flattened state length follows the closed form") {
  CHECK(state_dim(2) == 16);
  CHECK(state_dim(3) == 24);
  CHECK(state_dim(5) == 46);
  for (int k : {2, 3, 5}) {
    std::mt19937_64 rng(42);
    const EnvState st = sample_state(rng, ranges_for(k));
    CHECK(st.flat.size() == state_dim(k));
  }
}

TEST_CASE("sampling is deterministic given the seed") {
  for (int k : {2, 3}) {
    std::mt19937_64 a(7), b(7);
    const EnvState s1 = sample_state(a, ranges_for(k));
    const EnvState s2 = sample_state(b, ranges_for(k));
    CHECK(s1.flat == s2.flat);
  }
}

TEST_CASE("sampled states satisfy every ladder invariant and table range") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const EnvState st = sample_state(rng, ranges_for(3));
    CHECK_NOTHROW(st.market.validate());
    CHECK(st.market.sigma >= 0.5);
    CHECK(st.market.sigma <= 1.0);
    CHECK(st.tx_power_dbm >= 20.0);
    CHECK(st.tx_power_dbm <= 33.0);
    CHECK(st.link_rate_bps >= 1e6);
    CHECK(st.link_rate_bps <= 3e6);
    CHECK(st.market.e_cloud >= 20.0);
    CHECK(st.market.e_cloud <= 25.0);
    CHECK((st.market.alpha == 200.0 || st.market.alpha == 250.0));
    CHECK(st.market.ladder.theta1[0] >= 15.0);
    CHECK(st.market.ladder.theta1[0] < 20.0);
  }
}

TEST_CASE("action mapping endpoints and sorting") {
  const int k = 2;
  const int d = action_dim(k, ActionMode::Full);
  CHECK(d == 6);
  CHECK(action_dim(k, ActionMode::Shared) == 4);

  SUBCASE("all -1 maps to t_min everywhere") {
    const MappedAction m = map_action(Vector::Constant(d, -1.0), k, 0.0, 200.0,
                                      ActionMode::Full);
    CHECK(m.t1.maxCoeff() == 0.0);
    CHECK(m.t2.maxCoeff() == 0.0);
    CHECK_FALSE(m.clamped);
  }
  SUBCASE("all +1 maps to t_max everywhere") {
    const MappedAction m = map_action(Vector::Constant(d, 1.0), k, 0.0, 200.0,
                                      ActionMode::Full);
    CHECK(m.t1.minCoeff() == 200.0);
    CHECK(m.t2.minCoeff() == 200.0);
  }
  SUBCASE("blocks are sorted after the affine map") {
    Vector raw(d);
    raw << 0.5, -0.5, 0.5, -0.5, 0.5, -0.5;
    const MappedAction m = map_action(raw, k, 0.0, 200.0, ActionMode::Full);
    CHECK(m.t1[0] == doctest::Approx(50.0));
    CHECK(m.t1[1] == doctest::Approx(150.0));
    // Each menu row ends up sorted too.
    for (int r = 0; r < k; ++r) CHECK(m.t2(r, 0) <= m.t2(r, 1));
  }
  SUBCASE("out-of-range entries are clamped and flagged") {
    Vector raw = Vector::Zero(d);
    raw[0] = -3.0;
    const MappedAction m = map_action(raw, k, 0.0, 200.0, ActionMode::Full);
    CHECK(m.clamped);
    CHECK(m.t1[0] == 0.0);
  }
  SUBCASE("shared mode replicates one menu row") {
    Vector raw(action_dim(k, ActionMode::Shared));
    raw << -0.2, 0.4, 0.1, -0.6;
    const MappedAction m = map_action(raw, k, 0.0, 200.0, ActionMode::Shared);
    CHECK(m.t2.row(0) == m.t2.row(1));
  }
}

TEST_CASE("penalty reward separates profit and penalty") {
  std::mt19937_64 rng(21);
  const EnvState st = sample_state(rng, ranges_for(2));
  const int d = action_dim(2, ActionMode::Full);

  SUBCASE("zero action has zero penalty") {
    const StepOutcome out = eval_action(st, Vector::Zero(d), 0.01, 0.0, 200.0,
                                        ActionMode::Full);
    CHECK(out.penalty == 0.0);
    CHECK(out.reward == out.profit);
  }
  SUBCASE("lambda = 0 returns the profit exactly") {
    Vector raw(d);
    raw << 0.3, -0.7, 0.2, 0.9, -0.1, 0.5;
    const StepOutcome out = eval_action(st, raw, 0.0, 0.0, 200.0, ActionMode::Full);
    CHECK(out.reward == out.profit);
  }
  SUBCASE("a unit-square action costs lambda per entry") {
    Vector raw(d);
    raw << 1.0, 1.0, -1.0, -1.0, 0.0, 0.0;  // squared norm 4
    const StepOutcome out = eval_action(st, raw, 0.01, 0.0, 200.0, ActionMode::Full);
    CHECK(out.penalty == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(out.reward == doctest::Approx(out.profit - 0.04).epsilon(1e-12));
  }
  SUBCASE("profit is invariant to lambda") {
    Vector raw(d);
    raw << 0.3, -0.7, 0.2, 0.9, -0.1, 0.5;
    const StepOutcome a = eval_action(st, raw, 0.0, 0.0, 200.0, ActionMode::Full);
    const StepOutcome b = eval_action(st, raw, 0.3, 0.0, 200.0, ActionMode::Full);
    CHECK(a.profit == b.profit);
    CHECK(b.reward + b.penalty == doctest::Approx(a.profit).epsilon(1e-12));
  }
  SUBCASE("evaluation is a pure function") {
    Vector raw(d);
    raw << 0.3, -0.7, 0.2, 0.9, -0.1, 0.5;
    const StepOutcome a = eval_action(st, raw, 0.01, 0.0, 200.0, ActionMode::Full);
    const StepOutcome b = eval_action(st, raw, 0.01, 0.0, 200.0, ActionMode::Full);
    CHECK(a.reward == b.reward);
    CHECK(a.profit == b.profit);
  }
}

TEST_CASE("every mapped action induces a feasible contract") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uni(-1.3, 1.3);  // includes out-of-range raws
  for (int k : {2, 3, 5}) {
    for (ActionMode mode : {ActionMode::Full, ActionMode::Shared}) {
      for (int trial = 0; trial < 60; ++trial) {
        const EnvState st = sample_state(rng, ranges_for(k));
        Vector raw(action_dim(k, mode));
        for (int i = 0; i < raw.size(); ++i) raw[i] = uni(rng);
        const StepOutcome out = eval_action(st, raw, 0.01, 0.0, 200.0, mode);
        const ConstraintReport rep = verify_all_constraints(
            out.contract, st.market.ladder, st.market.costs, st.market.beta);
        CHECK(rep.min_slack() >= -1e-9 * rep.scale);
      }
    }
  }
}

TEST_CASE("episodic wrapper raises the terminal flag on schedule") {
  SUBCASE("horizon one means every step is terminal") {
    ContractEnv env(ranges_for(2), 5, 0.01, 0.0, 200.0, ActionMode::Full, 1);
    for (int i = 0; i < 3; ++i) {
      const auto s = env.step(Vector::Zero(6));
      CHECK(s.done == 1.0);
    }
  }
  SUBCASE("longer horizons terminate every Z-th step") {
    ContractEnv env(ranges_for(2), 5, 0.01, 0.0, 200.0, ActionMode::Full, 3);
    std::vector<double> dones;
    for (int i = 0; i < 6; ++i) dones.push_back(env.step(Vector::Zero(6)).done);
    CHECK(dones == std::vector<double>{0.0, 0.0, 1.0, 0.0, 0.0, 1.0});
  }
  SUBCASE("same seed gives the same trajectory") {
    ContractEnv a(ranges_for(2), 9, 0.01, 0.0, 200.0, ActionMode::Full, 1);
    ContractEnv b(ranges_for(2), 9, 0.01, 0.0, 200.0, ActionMode::Full, 1);
    for (int i = 0; i < 4; ++i) {
      CHECK(a.state().flat == b.state().flat);
      Vector raw = Vector::Constant(6, 0.1 * i);
      CHECK(a.step(raw).outcome.reward == b.step(raw).outcome.reward);
    }
  }
}
