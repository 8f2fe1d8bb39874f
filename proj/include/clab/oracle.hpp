#pragma once

#include <random>

#include "clab/contract.hpp"

namespace clab {

struct OracleOptions {
  double t_min = 0.0;
  double t_max = 200.0;
  int grid_points = 64;
  bool joint = false;        // exhaustive joint enumeration (K <= 2 only)
  int sweeps = 12;           // coordinate-descent sweep budget
  bool integer_rounds = false;
};

struct OracleResult {
  TwoPeriodContract contract;
  ProfitSplit split;
  double profit = 0.0;
};

/// Exhaustive enumeration of monotone grid assignments. K = 1 always; K = 2
/// when `joint` is set (cost grows as the sixth power of the grid).
OracleResult grid_search(const MarketState& state, const OracleOptions& opt);

/// Cyclic one-coordinate improvement over the grid starting from the given
/// monotone rounds; profit is non-decreasing across sweeps and the result is
/// deterministic (ties keep the smallest rounds).
OracleResult coordinate_descent(const MarketState& state, Vector t1_init, Matrix t2_init,
                                const OracleOptions& opt);

/// Default solver: joint grid for K = 1 (or K = 2 with opt.joint), otherwise
/// coordinate descent started from the static solution.
OracleResult solve_oracle(const MarketState& state, const OracleOptions& opt);

/// Both periods optimised independently as if beta were zero, then priced and
/// evaluated under the true beta. Because the resulting rounds are chosen
/// without the intertemporal rent channel, this is the "execute a static
/// contract twice" baseline.
OracleResult static_scheme(const MarketState& state, const OracleOptions& opt);

/// Monotone rounds drawn uniformly from the grid, rewards still closed-form.
OracleResult random_scheme(const MarketState& state, std::mt19937_64& rng,
                           const OracleOptions& opt);

}  // namespace clab
