#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "clab/contract.hpp"

namespace clab {

enum class ActionMode { Full, Shared };

/// Flattened state length: (N, K, sigma, P, r, E_C) + p1 + theta1 + theta2 + p2.
int state_dim(int k_types);

/// Raw action length: one full second-period menu per first-period type, or a
/// single shared menu.
int action_dim(int k_types, ActionMode mode);

/// Sampling ranges for market instances, defaults mirroring the simulation
/// parameter table. The theta band [theta_lo, theta_lo + band_width * K) is
/// split into K ascending sub-bands, one per type.
struct SampleRanges {
  int n_servers = 3;
  int k_types = 2;
  double beta = 0.5;
  std::vector<double> alpha_choices{200.0, 250.0};
  double theta_lo = 15.0;
  double band_width = 5.0;
  double sigma_lo = 0.5, sigma_hi = 1.0;
  double p_dbm_lo = 20.0, p_dbm_hi = 33.0;
  double rate_lo = 1e6, rate_hi = 3e6;
  double ec_lo = 20.0, ec_hi = 25.0;
  QualityHyper hyper;
  EdgeProfile profile;  // tx power, link rate, and sigma are overwritten per draw
};

/// A sampled market plus its flattened numeric vector.
struct EnvState {
  MarketState market;
  double tx_power_dbm = 20.0;
  double link_rate_bps = 1e6;
  Vector flat;
};

/// Deterministic given the generator state. Probability rows are Dirichlet
/// draws re-ordered and clipped so each row stochastically dominates the one
/// below it.
EnvState sample_state(std::mt19937_64& rng, const SampleRanges& ranges);

/// Flatten in the fixed order (N, K, sigma, P_dbm, r_mbps, E_C, p1, theta1,
/// theta2, p2 row-major).
Vector flatten_state(const MarketState& m, double tx_power_dbm, double link_rate_bps);

struct MappedAction {
  Vector t1;
  Matrix t2;
  bool clamped = false;  // some raw entry fell outside [-1, 1]
};

/// Affine map of [-1, 1] entries onto [t_min, t_max] rounds, then projected to
/// the monotone family (t1 sorted; t2 sorted along rows and columns).
MappedAction map_action(const Vector& raw, int k_types, double t_min, double t_max,
                        ActionMode mode);

struct StepOutcome {
  double reward = 0.0;
  double profit = 0.0;
  double penalty = 0.0;
  ProfitSplit split;
  TwoPeriodContract contract;
};

/// Pure penalty-based reward of playing `raw` in `state`:
/// profit of the induced closed-form contract minus lambda * |raw|^2.
StepOutcome eval_action(const EnvState& state, const Vector& raw, double lambda,
                        double t_min, double t_max, ActionMode mode);

/// Episodic wrapper: every step evaluates the action on the current state and
/// draws a fresh state; the terminal flag rises after `horizon` steps.
class ContractEnv {
 public:
  ContractEnv(SampleRanges ranges, std::uint64_t seed, double lambda, double t_min,
              double t_max, ActionMode mode, int horizon);

  struct Step {
    StepOutcome outcome;
    double done = 1.0;
  };

  const EnvState& state() const { return state_; }
  Step step(const Vector& raw);

 private:
  SampleRanges ranges_;
  double lambda_;
  double t_min_, t_max_;
  ActionMode mode_;
  int horizon_;
  std::mt19937_64 rng_;
  EnvState state_;
  int step_in_episode_ = 0;
};

}  // namespace clab
