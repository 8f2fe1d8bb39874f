#include "clab/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "clab/rng.hpp"

namespace clab {

int state_dim(int k_types) { return 6 + 3 * k_types + k_types * k_types; }

int action_dim(int k_types, ActionMode mode) {
  return mode == ActionMode::Full ? k_types + k_types * k_types : 2 * k_types;
}

namespace {

Vector dirichlet(std::mt19937_64& rng, int k) {
  std::exponential_distribution<double> expo(1.0);
  Vector v(k);
  for (int i = 0; i < k; ++i) v[i] = expo(rng);
  return v / v.sum();
}

// Ascending theta draw: one uniform per type from its own sub-band, jittered
// if consecutive values collide.
Vector theta_ladder(std::mt19937_64& rng, int k, double lo, double band) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Vector v(k);
  for (int i = 0; i < k; ++i) v[i] = lo + band * (i + uni(rng));
  for (int i = 1; i < k; ++i)
    if (v[i] <= v[i - 1]) v[i] = v[i - 1] + 1e-6;
  return v;
}

// Order Dirichlet rows by mean type, then clip cumulative masses so row k
// first-order dominates row k-1.
Matrix transition_matrix(std::mt19937_64& rng, int k) {
  std::vector<Vector> rows(k);
  for (auto& r : rows) r = dirichlet(rng, k);
  std::stable_sort(rows.begin(), rows.end(), [](const Vector& a, const Vector& b) {
    double ma = 0.0, mb = 0.0;
    for (int j = 0; j < a.size(); ++j) {
      ma += j * a[j];
      mb += j * b[j];
    }
    return ma < mb;
  });
  Matrix cum(k, k);
  for (int r = 0; r < k; ++r) {
    double acc = 0.0;
    for (int j = 0; j < k; ++j) {
      acc += rows[r][j];
      cum(r, j) = acc;
    }
    cum(r, k - 1) = 1.0;
  }
  for (int r = 1; r < k; ++r)
    for (int j = 0; j + 1 < k; ++j) cum(r, j) = std::min(cum(r, j), cum(r - 1, j));
  Matrix p2(k, k);
  for (int r = 0; r < k; ++r) {
    double prev = 0.0;
    for (int j = 0; j < k; ++j) {
      p2(r, j) = std::max(cum(r, j) - prev, 0.0);
      prev = cum(r, j);
    }
  }
  return p2;
}

}  // namespace

Vector flatten_state(const MarketState& m, double tx_power_dbm, double link_rate_bps) {
  const int k = m.ladder.k_types();
  Vector flat(state_dim(k));
  int at = 0;
  flat[at++] = m.n_servers;
  flat[at++] = k;
  flat[at++] = m.sigma;
  flat[at++] = tx_power_dbm;
  flat[at++] = link_rate_bps / 1e6;  // Mbps
  flat[at++] = m.e_cloud;
  for (int i = 0; i < k; ++i) flat[at++] = m.ladder.p1[i];
  for (int i = 0; i < k; ++i) flat[at++] = m.ladder.theta1[i];
  for (int i = 0; i < k; ++i) flat[at++] = m.ladder.theta2[i];
  for (int r = 0; r < k; ++r)
    for (int j = 0; j < k; ++j) flat[at++] = m.ladder.p2(r, j);
  return flat;
}

EnvState sample_state(std::mt19937_64& rng, const SampleRanges& ranges) {
  const int k = ranges.k_types;
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  EnvState st;
  MarketState& m = st.market;
  m.n_servers = ranges.n_servers;
  m.beta = ranges.beta;
  m.hyper = ranges.hyper;
  m.ladder.theta1 = theta_ladder(rng, k, ranges.theta_lo, ranges.band_width);
  m.ladder.theta2 = theta_ladder(rng, k, ranges.theta_lo, ranges.band_width);
  m.ladder.p1 = dirichlet(rng, k);
  m.ladder.p2 = transition_matrix(rng, k);
  m.sigma = ranges.sigma_lo + (ranges.sigma_hi - ranges.sigma_lo) * uni(rng);
  st.tx_power_dbm = ranges.p_dbm_lo + (ranges.p_dbm_hi - ranges.p_dbm_lo) * uni(rng);
  st.link_rate_bps = ranges.rate_lo + (ranges.rate_hi - ranges.rate_lo) * uni(rng);
  m.e_cloud = ranges.ec_lo + (ranges.ec_hi - ranges.ec_lo) * uni(rng);
  {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(ranges.alpha_choices.size()) - 1);
    m.alpha = ranges.alpha_choices[pick(rng)];
  }
  EdgeProfile prof = ranges.profile;
  prof.tx_power_dbm = st.tx_power_dbm;
  prof.link_rate_bps = st.link_rate_bps;
  prof.unit_energy_cost = m.sigma;
  m.costs = cost_coeffs(prof);
  st.flat = flatten_state(m, st.tx_power_dbm, st.link_rate_bps);
  return st;
}

MappedAction map_action(const Vector& raw, int k_types, double t_min, double t_max,
                        ActionMode mode) {
  if (raw.size() != action_dim(k_types, mode))
    throw std::invalid_argument("map_action: raw action has wrong dimension");
  MappedAction out;
  Vector a = raw;
  for (int i = 0; i < a.size(); ++i) {
    if (a[i] < -1.0 || a[i] > 1.0) {
      out.clamped = true;
      a[i] = std::clamp(a[i], -1.0, 1.0);
    }
  }
  const auto to_rounds = [&](double v) { return t_min + 0.5 * (v + 1.0) * (t_max - t_min); };
  const int k = k_types;
  out.t1.resize(k);
  for (int i = 0; i < k; ++i) out.t1[i] = to_rounds(a[i]);
  std::sort(out.t1.data(), out.t1.data() + k);
  out.t2.resize(k, k);
  if (mode == ActionMode::Full) {
    for (int r = 0; r < k; ++r)
      for (int j = 0; j < k; ++j) out.t2(r, j) = to_rounds(a[k + r * k + j]);
    make_doubly_monotone(out.t2);
  } else {
    Vector row(k);
    for (int j = 0; j < k; ++j) row[j] = to_rounds(a[k + j]);
    std::sort(row.data(), row.data() + k);
    for (int r = 0; r < k; ++r) out.t2.row(r) = row.transpose();
  }
  return out;
}

StepOutcome eval_action(const EnvState& state, const Vector& raw, double lambda,
                        double t_min, double t_max, ActionMode mode) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("eval_action: lambda must be >= 0");
  const MarketState& m = state.market;
  MappedAction mapped = map_action(raw, m.ladder.k_types(), t_min, t_max, mode);
  StepOutcome out;
  out.contract = build_contract(mapped.t1, mapped.t2, m.ladder, m.costs, m.beta);
  out.split = cloud_profit(out.contract, m);
  out.profit = out.split.total;
  double pen = 0.0;
  for (int i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(raw[i], -1.0, 1.0);
    pen += v * v;
  }
  out.penalty = lambda * pen;
  out.reward = out.profit - out.penalty;
  return out;
}

ContractEnv::ContractEnv(SampleRanges ranges, std::uint64_t seed, double lambda,
                         double t_min, double t_max, ActionMode mode, int horizon)
    : ranges_(std::move(ranges)),
      lambda_(lambda),
      t_min_(t_min),
      t_max_(t_max),
      mode_(mode),
      horizon_(std::max(horizon, 1)),
      rng_(make_rng(seed, "env")) {
  state_ = sample_state(rng_, ranges_);
}

ContractEnv::Step ContractEnv::step(const Vector& raw) {
  Step s;
  s.outcome = eval_action(state_, raw, lambda_, t_min_, t_max_, mode_);
  ++step_in_episode_;
  s.done = step_in_episode_ >= horizon_ ? 1.0 : 0.0;
  if (s.done > 0.0) step_in_episode_ = 0;
  state_ = sample_state(rng_, ranges_);
  return s;
}

}  // namespace clab
