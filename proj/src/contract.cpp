#include "clab/contract.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clab {

namespace {

constexpr double kMonoTol = 1e-12;

bool nondecreasing(const Vector& v, double tol = 0.0) {
  for (int i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1] - tol) return false;
  return true;
}

void require_nondecreasing(const Vector& v, const char* what) {
  if (!nondecreasing(v)) throw std::invalid_argument(std::string(what) + " must be non-decreasing");
}

// Information-rent gap of the second-period menus `cur` vs `prev`:
//   phi_j = sum_{l<j} theta2_j * c * (prev_l - cur_l) * (1/theta2_l - 1/theta2_{l+1}).
// Equals u_j(prev menu) - u_j(cur menu) under the closed-form rewards.
double phi_gap(int j, const Vector& prev, const Vector& cur, const Vector& theta2, double c) {
  double acc = 0.0;
  for (int l = 0; l + 1 <= j; ++l)
    acc += theta2[j] * c * (prev[l] - cur[l]) * (1.0 / theta2[l] - 1.0 / theta2[l + 1]);
  return acc;
}

Vector row_utilities(const Vector& t_row, const Vector& r_row, const Vector& theta,
                     const CostCoeffs& costs) {
  Vector u(t_row.size());
  for (int j = 0; j < t_row.size(); ++j)
    u[j] = es_utility(theta[j], r_row[j], t_row[j], costs);
  return u;
}

}  // namespace

void TypeLadder::validate() const {
  const int k = k_types();
  if (k < 1) throw std::invalid_argument("ladder: theta1 must be non-empty");
  if (theta2.size() != k) throw std::invalid_argument("ladder: theta2 size must match theta1");
  if (p1.size() != k) throw std::invalid_argument("ladder: p1 size must match theta1");
  if (p2.rows() != k || p2.cols() != k)
    throw std::invalid_argument("ladder: p2 must be K x K");
  for (int i = 0; i < k; ++i) {
    if (!(theta1[i] > 0.0)) throw std::invalid_argument("ladder: theta1 entries must be > 0");
    if (!(theta2[i] > 0.0)) throw std::invalid_argument("ladder: theta2 entries must be > 0");
    if (i > 0 && !(theta1[i] > theta1[i - 1]))
      throw std::invalid_argument("ladder: theta1 must be strictly ascending");
    if (i > 0 && !(theta2[i] > theta2[i - 1]))
      throw std::invalid_argument("ladder: theta2 must be strictly ascending");
    if (p1[i] < -kMonoTol) throw std::invalid_argument("ladder: p1 entries must be >= 0");
  }
  if (std::abs(p1.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("ladder: p1 must sum to 1");
  for (int r = 0; r < k; ++r) {
    if (p2.row(r).minCoeff() < -kMonoTol)
      throw std::invalid_argument("ladder: p2 entries must be >= 0");
    if (std::abs(p2.row(r).sum() - 1.0) > 1e-12)
      throw std::invalid_argument("ladder: p2 row " + std::to_string(r + 1) + " must sum to 1");
  }
  // Stochastic ordering: cumulative mass of row r must not exceed row r-1.
  for (int r = 1; r < k; ++r) {
    double cum_hi = 0.0, cum_lo = 0.0;
    for (int j = 0; j + 1 < k; ++j) {
      cum_hi += p2(r, j);
      cum_lo += p2(r - 1, j);
      if (cum_hi > cum_lo + 1e-9)
        throw std::invalid_argument("ladder: p2 rows must be stochastically ordered in k");
    }
  }
}

void MarketState::validate() const {
  ladder.validate();
  hyper.validate();
  if (n_servers < 1) throw std::invalid_argument("market: n_servers must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("market: alpha must be > 0");
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("market: beta must lie in [0, 1]");
  if (!(costs.c > 0.0)) throw std::invalid_argument("market: cost coefficient c must be > 0");
  if (!(costs.e_fixed >= 0.0)) throw std::invalid_argument("market: fixed cost E must be >= 0");
}

double contract_scale(const TwoPeriodContract& c, const TypeLadder& ladder) {
  double r_max = 0.0;
  if (c.r1.size() > 0) r_max = c.r1.cwiseAbs().maxCoeff();
  if (c.r2.size() > 0) r_max = std::max(r_max, c.r2.cwiseAbs().maxCoeff());
  const double theta_max = std::max(ladder.theta1[ladder.k_types() - 1],
                                    ladder.theta2[ladder.k_types() - 1]);
  return std::max(1.0, theta_max * r_max);
}

Vector optimal_rewards_p2(const Vector& t2_row, const Vector& theta2, const CostCoeffs& costs) {
  if (t2_row.size() != theta2.size())
    throw std::invalid_argument("optimal_rewards_p2: size mismatch");
  require_nondecreasing(t2_row, "optimal_rewards_p2: t2_row");
  const int k = static_cast<int>(t2_row.size());
  Vector r(k);
  r[0] = (costs.c * t2_row[0] + costs.e_fixed) / theta2[0];
  for (int i = 1; i < k; ++i)
    r[i] = r[i - 1] + costs.c * (t2_row[i] - t2_row[i - 1]) / theta2[i];
  return r;
}

Vector optimal_rewards_p1(const Vector& t1, const Matrix& t2, const TypeLadder& ladder,
                          const CostCoeffs& costs, double beta) {
  const int k = ladder.k_types();
  if (t1.size() != k || t2.rows() != k || t2.cols() != k)
    throw std::invalid_argument("optimal_rewards_p1: dimension mismatch");
  require_nondecreasing(t1, "optimal_rewards_p1: t1");
  for (int r = 0; r < k; ++r) {
    const Vector row = t2.row(r).transpose();
    require_nondecreasing(row, "optimal_rewards_p1: t2 row");
  }
  Vector r1(k);
  r1[0] = (costs.c * t1[0] + costs.e_fixed) / ladder.theta1[0];
  for (int i = 1; i < k; ++i) {
    double rent = 0.0;
    const Vector prev = t2.row(i - 1).transpose();
    const Vector cur = t2.row(i).transpose();
    for (int j = 1; j < k; ++j) {
      rent += ladder.p2(i, j) * phi_gap(j, prev, cur, ladder.theta2, costs.c);
    }
    r1[i] = r1[i - 1] + (t1[i] - t1[i - 1]) * costs.c / ladder.theta1[i] +
            beta / ladder.theta1[i] * rent;
  }
  return r1;
}

FeasibilityResult check_feasible_p2(const Vector& t2_row, const Vector& r2_row,
                                    const Vector& theta2, const CostCoeffs& costs,
                                    double tol_scale) {
  FeasibilityResult out;
  const int k = static_cast<int>(t2_row.size());
  double r_max = r2_row.size() ? r2_row.cwiseAbs().maxCoeff() : 0.0;
  const double tol = tol_scale * std::max(1.0, theta2[k - 1] * r_max);
  if (r2_row[0] < -tol || !nondecreasing(r2_row, tol))
    out.violations.push_back("condition 1: rewards not non-negative non-decreasing");
  if (t2_row[0] < -tol || !nondecreasing(t2_row, tol))
    out.violations.push_back("condition 2: rounds not non-negative non-decreasing");
  if (std::abs(es_utility(theta2[0], r2_row[0], t2_row[0], costs)) > tol)
    out.violations.push_back("condition 3: type-1 IR not binding");
  for (int i = 1; i < k; ++i) {
    const double own = theta2[i] * r2_row[i] - costs.c * t2_row[i];
    const double down = theta2[i] * r2_row[i - 1] - costs.c * t2_row[i - 1];
    if (std::abs(own - down) > tol) {
      out.violations.push_back("condition 4: adjacent IC not binding at type " +
                               std::to_string(i + 1));
      break;
    }
  }
  out.pass = out.violations.empty();
  return out;
}

FeasibilityResult check_feasible_p1(const TwoPeriodContract& c, const TypeLadder& ladder,
                                    const CostCoeffs& costs, double beta, double tol_scale) {
  FeasibilityResult out;
  const int k = ladder.k_types();
  const double tol = tol_scale * contract_scale(c, ladder);
  if (c.r1[0] < -tol || !nondecreasing(c.r1, tol))
    out.violations.push_back("condition 1: first-period rewards not non-negative non-decreasing");
  if (c.t1[0] < -tol || !nondecreasing(c.t1, tol))
    out.violations.push_back("condition 2: first-period rounds not non-negative non-decreasing");
  if (std::abs(es_utility(ladder.theta1[0], c.r1[0], c.t1[0], costs)) > tol)
    out.violations.push_back("condition 3: first-period type-1 IR not binding");
  for (int kk = 1; kk < k; ++kk) {
    double own = es_utility(ladder.theta1[kk], c.r1[kk], c.t1[kk], costs);
    double dev = es_utility(ladder.theta1[kk], c.r1[kk - 1], c.t1[kk - 1], costs);
    for (int j = 0; j < k; ++j) {
      const double u_own = es_utility(ladder.theta2[j], c.r2(kk, j), c.t2(kk, j), costs);
      const double u_dev = es_utility(ladder.theta2[j], c.r2(kk - 1, j), c.t2(kk - 1, j), costs);
      own += beta * ladder.p2(kk, j) * u_own;
      dev += beta * ladder.p2(kk, j) * u_dev;
    }
    if (std::abs(own - dev) > tol) {
      out.violations.push_back("condition 4: local downward IIC not binding at type " +
                               std::to_string(kk + 1));
      break;
    }
  }
  out.pass = out.violations.empty();
  return out;
}

double ConstraintReport::min_slack() const {
  return std::min(std::min(ir2_min, ic2_min), std::min(ir1_min, iic_min));
}

ConstraintReport verify_all_constraints(const TwoPeriodContract& c, const TypeLadder& ladder,
                                        const CostCoeffs& costs, double beta) {
  const int k = ladder.k_types();
  ConstraintReport rep;
  rep.scale = contract_scale(c, ladder);

  // Second-period families, one full menu per first-period type.
  for (int row = 0; row < k; ++row) {
    const Vector u = row_utilities(c.t2.row(row).transpose(), c.r2.row(row).transpose(),
                                   ladder.theta2, costs);
    rep.ir2_min = std::min(rep.ir2_min, u.minCoeff());
    rep.ir2_type1_resid = std::max(rep.ir2_type1_resid, std::abs(u[0]));
    for (int i = 0; i < k; ++i) {
      const double own = ladder.theta2[i] * c.r2(row, i) - costs.c * c.t2(row, i);
      for (int j = 0; j < k; ++j) {
        if (i == j) continue;
        const double dev = ladder.theta2[i] * c.r2(row, j) - costs.c * c.t2(row, j);
        rep.ic2_min = std::min(rep.ic2_min, own - dev);
        if (j == i - 1) rep.ic2_adj_resid = std::max(rep.ic2_adj_resid, std::abs(own - dev));
      }
    }
  }

  // First-period IR plus the full intertemporal IC family. V(k, k') is the
  // two-period value of a type-k server reporting type k' in period 1.
  Vector u1(k);
  Matrix u2(k, k);  // row = menu index, col = second-period type
  for (int row = 0; row < k; ++row)
    u2.row(row) = row_utilities(c.t2.row(row).transpose(), c.r2.row(row).transpose(),
                                ladder.theta2, costs)
                      .transpose();
  for (int i = 0; i < k; ++i) {
    u1[i] = es_utility(ladder.theta1[i], c.r1[i], c.t1[i], costs);
    rep.ir1_min = std::min(rep.ir1_min, u1[i]);
  }
  rep.ir1_type1_resid = std::abs(u1[0]);
  auto value = [&](int true_k, int report) {
    double v = es_utility(ladder.theta1[true_k], c.r1[report], c.t1[report], costs);
    for (int j = 0; j < k; ++j) v += beta * ladder.p2(true_k, j) * u2(report, j);
    return v;
  };
  for (int i = 0; i < k; ++i) {
    const double own = value(i, i);
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      const double slack = own - value(i, j);
      rep.iic_min = std::min(rep.iic_min, slack);
      if (j == i - 1) rep.iic_adj_resid = std::max(rep.iic_adj_resid, std::abs(slack));
    }
  }
  return rep;
}

double es_expected_utility(int k, const TwoPeriodContract& c, const TypeLadder& ladder,
                           const CostCoeffs& costs, double beta) {
  if (k < 0 || k >= ladder.k_types())
    throw std::out_of_range("es_expected_utility: type index out of range");
  double v = es_utility(ladder.theta1[k], c.r1[k], c.t1[k], costs);
  for (int j = 0; j < ladder.k_types(); ++j)
    v += beta * ladder.p2(k, j) *
         es_utility(ladder.theta2[j], c.r2(k, j), c.t2(k, j), costs);
  return v;
}

ProfitSplit cloud_profit(const TwoPeriodContract& c, const MarketState& state) {
  const TypeLadder& lad = state.ladder;
  const int k = lad.k_types();
  ProfitSplit out;
  double p1 = 0.0;
  for (int i = 0; i < k; ++i)
    p1 += lad.p1[i] * state.n_servers *
          (state.alpha * model_quality(c.t1[i], state.hyper) - c.r1[i]);
  out.period1 = p1 - state.sigma * state.e_cloud;
  double p2 = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      p2 += lad.p1[i] * lad.p2(i, j) * state.n_servers *
            (state.alpha * model_quality(c.t2(i, j), state.hyper) - c.r2(i, j));
  out.period2 = p2 - state.sigma * state.e_cloud;
  out.total = out.period1 + state.beta * out.period2;
  return out;
}

TwoPeriodContract build_contract(Vector t1, Matrix t2, const TypeLadder& ladder,
                                 const CostCoeffs& costs, double beta, bool repair,
                                 BuildDiag* diag) {
  const int k = ladder.k_types();
  if (t1.size() != k || t2.rows() != k || t2.cols() != k)
    throw std::invalid_argument("build_contract: dimension mismatch");
  require_nondecreasing(t1, "build_contract: t1");
  for (int r = 0; r < k; ++r) {
    const Vector row = t2.row(r).transpose();
    require_nondecreasing(row, "build_contract: t2 row");
  }
  if (repair) {
    for (int r = 1; r < k; ++r)
      for (int j = 0; j < k; ++j)
        if (t2(r, j) < t2(r - 1, j) - kMonoTol)
          throw std::invalid_argument("build_contract: t2 columns must be non-decreasing");

    // Shrink each menu row toward its predecessor just enough that the
    // first-period reward increments stay non-negative and every first-period
    // IR constraint holds. Both margins are linear in the blend factor.
    double r_prev = (costs.c * t1[0] + costs.e_fixed) / ladder.theta1[0];
    double u_prev = 0.0;  // type-1 first-period IR binds
    for (int r = 1; r < k; ++r) {
      const double d_t1 = t1[r] - t1[r - 1];
      double rent = 0.0;  // beta-weighted expected second-period rent gap at s = 1
      const Vector prev = t2.row(r - 1).transpose();
      const Vector cur = t2.row(r).transpose();
      for (int j = 1; j < k; ++j) {
        rent += ladder.p2(r, j) * (-phi_gap(j, prev, cur, ladder.theta2, costs.c));
      }
      rent *= beta;
      rent = std::max(rent, 0.0);
      if (rent > 0.0) {
        const double s_mono = costs.c * d_t1 / rent;
        const double s_ir =
            (u_prev + (ladder.theta1[r] - ladder.theta1[r - 1]) * r_prev) / rent;
        const double s = std::clamp(std::min(s_mono, s_ir), 0.0, 1.0);
        if (s < 1.0) {
          t2.row(r) = t2.row(r - 1) + s * (t2.row(r) - t2.row(r - 1));
          rent *= s;
          if (diag) {
            diag->repaired = true;
            diag->min_shrink = std::min(diag->min_shrink, s);
          }
        }
      }
      const double r_cur = r_prev + (costs.c * d_t1 - rent) / ladder.theta1[r];
      u_prev += (ladder.theta1[r] - ladder.theta1[r - 1]) * r_prev - rent;
      r_prev = r_cur;
    }
  }

  TwoPeriodContract c;
  c.t1 = std::move(t1);
  c.t2 = std::move(t2);
  c.r2.resize(k, k);
  for (int r = 0; r < k; ++r)
    c.r2.row(r) = optimal_rewards_p2(c.t2.row(r).transpose(), ladder.theta2, costs).transpose();
  c.r1 = optimal_rewards_p1(c.t1, c.t2, ladder, costs, beta);
  return c;
}

void make_doubly_monotone(Matrix& m) {
  for (int r = 0; r < m.rows(); ++r) {
    Eigen::RowVectorXd row = m.row(r);
    std::sort(row.data(), row.data() + row.size());
    m.row(r) = row;
  }
  for (int c = 0; c < m.cols(); ++c) {
    Vector col = m.col(c);
    std::sort(col.data(), col.data() + col.size());
    m.col(c) = col;
  }
}

}  // namespace clab
