#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "clab/oracle.hpp"
#include "test_support.hpp"

using namespace clab;
using namespace clab::testing;

namespace {

MarketState single_type_market() {
  MarketState m;
  m.n_servers = 3;
  m.ladder.theta1 = Vector{{20.0}};
  m.ladder.theta2 = Vector{{20.0}};
  m.ladder.p1 = Vector{{1.0}};
  m.ladder.p2 = Matrix{{1.0}};
  m.costs = table_costs();
  m.alpha = 200.0;
  m.beta = 0.0;
  m.sigma = 0.5;
  m.e_cloud = 22.5;
  return m;
}

double analytic_optimum(const MarketState& m, double theta) {
  const double a = m.hyper.exponent_coeff();
  return -std::log2(m.costs.c / (theta * m.alpha * a * std::numbers::ln2_v<double>)) / a;
}

}  // namespace

TEST_CASE("single-type grid search hits the analytic optimum") {
  const MarketState m = single_type_market();
  OracleOptions opt;
  const double t_star = analytic_optimum(m, 20.0);
  CHECK(t_star == doctest::Approx(55.8068).epsilon(1e-4));

  const OracleResult res = grid_search(m, opt);
  const double grid_step = (opt.t_max - opt.t_min) / (opt.grid_points - 1);
  CHECK(std::abs(res.contract.t1[0] - t_star) <= grid_step);
  CHECK(std::abs(res.contract.t2(0, 0) - t_star) <= grid_step);

  // Profit at the stationary point beats nearby rounds.
  auto profit_at = [&](double t) {
    const TwoPeriodContract c = build_contract(Vector::Constant(1, t),
                                               Matrix::Constant(1, 1, t), m.ladder, m.costs,
                                               m.beta);
    return cloud_profit(c, m).total;
  };
  CHECK(profit_at(t_star) >= profit_at(t_star - 5.0));
  CHECK(profit_at(t_star) >= profit_at(t_star + 5.0));
}

TEST_CASE("vanishing alpha drives the optimum to zero rounds") {
  MarketState m = single_type_market();
  m.alpha = 1e-9;
  const OracleResult res = grid_search(m, OracleOptions{});
  CHECK(res.contract.t1[0] == 0.0);
  CHECK(res.contract.t2(0, 0) == 0.0);
}

TEST_CASE("beta = 0 decouples the periods") {
  std::mt19937_64 rng(101);
  MarketState m = random_market(rng, 2);
  m.beta = 0.0;
  OracleOptions opt;
  opt.grid_points = 12;
  const OracleResult joint = grid_search(m, opt);
  const OracleResult st = static_scheme(m, opt);
  const OracleResult solved = solve_oracle(m, opt);
  // Full enumeration and the per-period solves coincide at beta = 0.
  CHECK(joint.profit == doctest::Approx(st.profit).epsilon(1e-9));
  CHECK(solved.profit == doctest::Approx(joint.profit).epsilon(1e-9));
}

TEST_CASE("coordinate descent improves monotonically and matches the joint grid") {
  std::mt19937_64 rng(103);
  MarketState m = random_market(rng, 2);
  m.beta = 0.5;
  OracleOptions opt;
  opt.grid_points = 12;
  const OracleResult joint = grid_search(m, opt);

  SUBCASE("the joint optimum is a fixed point") {
    const OracleResult cd = coordinate_descent(m, joint.contract.t1, joint.contract.t2, opt);
    CHECK(cd.profit == doctest::Approx(joint.profit).epsilon(1e-9));
  }
  SUBCASE("descent from a poor start only improves") {
    Vector t1 = Vector::Zero(2);
    Matrix t2 = Matrix::Zero(2, 2);
    const double init_profit =
        cloud_profit(build_contract(t1, t2, m.ladder, m.costs, m.beta), m).total;
    const OracleResult cd = coordinate_descent(m, t1, t2, opt);
    CHECK(cd.profit >= init_profit);
    CHECK(cd.profit >= 0.99 * joint.profit - 1e-9);
  }
  SUBCASE("the default solver is within one percent of the joint grid") {
    const OracleResult solved = solve_oracle(m, opt);
    CHECK(solved.profit >= 0.99 * joint.profit - 1e-9);
  }
}

TEST_CASE("scheme contracts are always feasible and ranked") {
  std::mt19937_64 rng(107);
  std::mt19937_64 scheme_rng(1009);
  OracleOptions opt;
  opt.grid_points = 32;
  opt.sweeps = 8;
  double dyn_sum = 0.0, st_sum = 0.0, rnd_sum = 0.0;
  const int n_states = 20;
  for (int i = 0; i < n_states; ++i) {
    MarketState m = random_market(rng, 2);
    m.beta = 0.5;
    const OracleResult dyn = solve_oracle(m, opt);
    const OracleResult st = static_scheme(m, opt);
    const OracleResult rnd = random_scheme(m, scheme_rng, opt);
    for (const OracleResult* r : {&dyn, &st, &rnd}) {
      const ConstraintReport rep =
          verify_all_constraints(r->contract, m.ladder, m.costs, m.beta);
      CHECK(rep.min_slack() >= -1e-9 * rep.scale);
    }
    CHECK(dyn.profit >= st.profit - 1e-9);
    CHECK(dyn.profit >= rnd.profit - 1e-9);
    dyn_sum += dyn.profit;
    st_sum += st.profit;
    rnd_sum += rnd.profit;
  }
  CHECK(dyn_sum / n_states > st_sum / n_states);
  CHECK(st_sum / n_states > rnd_sum / n_states);
}

TEST_CASE("oracle profit is monotone in N, alpha, and beta") {
  std::mt19937_64 rng(109);
  OracleOptions opt;
  opt.grid_points = 32;
  opt.sweeps = 8;
  for (int trial = 0; trial < 4; ++trial) {
    MarketState base = random_market(rng, 2);
    base.beta = 0.5;
    base.alpha = 200.0;
    base.n_servers = 3;

    double prev = -1e18;
    for (int n : {3, 6, 12, 18}) {
      MarketState m = base;
      m.n_servers = n;
      const double p = solve_oracle(m, opt).profit;
      CHECK(p >= prev - 1e-9);
      prev = p;
    }
    prev = -1e18;
    for (double alpha : {200.0, 250.0}) {
      MarketState m = base;
      m.alpha = alpha;
      const double p = solve_oracle(m, opt).profit;
      CHECK(p >= prev - 1e-9);
      prev = p;
    }
    prev = -1e18;
    for (double beta : {0.0, 0.5, 1.0}) {
      MarketState m = base;
      m.beta = beta;
      const double p = solve_oracle(m, opt).profit;
      CHECK(p >= prev - 1e-9);
      prev = p;
    }
  }
}

TEST_CASE("optimal first-period rounds rise strictly across types") {
  std::mt19937_64 rng(113);
  OracleOptions opt;
  opt.grid_points = 96;
  opt.sweeps = 10;
  int strict = 0, interior = 0;
  for (int trial = 0; trial < 6; ++trial) {
    MarketState m = random_market(rng, 2);
    m.beta = 0.5;
    const OracleResult res = solve_oracle(m, opt);
    CHECK(res.contract.t1[1] >= res.contract.t1[0]);
    const bool at_edge = res.contract.t1[1] >= opt.t_max - 1e-9 ||
                         res.contract.t1[0] <= opt.t_min + 1e-9;
    if (!at_edge) {
      ++interior;
      if (res.contract.t1[1] > res.contract.t1[0]) ++strict;
    }
  }
  CHECK(strict == interior);
  CHECK(interior > 0);
}

TEST_CASE("grid search rejects intractable dimensions") {
  std::mt19937_64 rng(127);
  const MarketState m = random_market(rng, 3);
  CHECK_THROWS_AS(grid_search(m, OracleOptions{}), std::invalid_argument);
  OracleOptions bad;
  bad.grid_points = 1;
  CHECK_THROWS_AS(grid_search(single_type_market(), bad), std::invalid_argument);
}

TEST_CASE("random scheme never beats the exact single-type grid") {
  std::mt19937_64 rng(131);
  std::mt19937_64 scheme_rng(67);
  for (int trial = 0; trial < 10; ++trial) {
    MarketState m = random_market(rng, 1);
    const OracleOptions opt;
    const OracleResult best = grid_search(m, opt);
    const OracleResult rnd = random_scheme(m, scheme_rng, opt);
    CHECK(best.profit >= rnd.profit - 1e-9);
  }
}

TEST_CASE("integer rounds mode floors the grid") {
  MarketState m = single_type_market();
  OracleOptions opt;
  opt.integer_rounds = true;
  const OracleResult res = grid_search(m, opt);
  CHECK(res.contract.t1[0] == std::floor(res.contract.t1[0]));
}
