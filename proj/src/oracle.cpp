#include "clab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace clab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> grid_values(const OracleOptions& opt) {
  if (opt.grid_points < 2) throw std::invalid_argument("oracle: grid_points must be >= 2");
  if (!(opt.t_min < opt.t_max)) throw std::invalid_argument("oracle: t_min must be < t_max");
  std::vector<double> g(opt.grid_points);
  for (int i = 0; i < opt.grid_points; ++i)
    g[i] = opt.t_min +
           (opt.t_max - opt.t_min) * static_cast<double>(i) / (opt.grid_points - 1);
  if (opt.integer_rounds)
    for (auto& v : g) v = std::floor(v);
  return g;
}

double total_profit(const MarketState& s, const Vector& t1, const Matrix& t2) {
  const TwoPeriodContract c = build_contract(t1, t2, s.ladder, s.costs, s.beta, true, nullptr);
  return cloud_profit(c, s).total;
}

OracleResult finish(const MarketState& s, const Vector& t1, const Matrix& t2) {
  OracleResult out;
  out.contract = build_contract(t1, t2, s.ladder, s.costs, s.beta, true, nullptr);
  out.split = cloud_profit(out.contract, s);
  out.profit = out.split.total;
  return out;
}

// Interior single-type optimum of alpha*Q(T) - (cT+E)/theta, clamped to the
// grid range and snapped to the nearest grid value.
double single_type_heuristic(double theta, const MarketState& s, const OracleOptions& opt,
                             const std::vector<double>& grid) {
  const double a = s.hyper.exponent_coeff();
  const double ratio = s.costs.c / (theta * s.alpha * a * std::numbers::ln2_v<double>);
  double t = 0.0;
  if (ratio < 1.0) t = -std::log2(ratio) / a;
  t = std::clamp(t, opt.t_min, opt.t_max);
  const auto it = std::min_element(grid.begin(), grid.end(), [&](double x, double y) {
    return std::abs(x - t) < std::abs(y - t);
  });
  return *it;
}

using Objective = std::function<double(const Vector&, const Matrix&)>;

struct CdScope {
  bool move_t1 = true;
  bool move_t2 = true;
  int t2_row_only = -1;          // restrict second-period moves to one row
  bool cross_lower_only = false; // sequential row solves: ignore rows above
  bool column_moves = true;      // joint moves of one whole t2 column
};

// One-coordinate-at-a-time improvement over the grid, plus joint moves of a
// whole second-period column (single-entry moves stall when the rent repair
// collapses a lone row change). Candidates are scanned in ascending order and
// accepted only on strict improvement, so ties keep the smallest rounds and
// the result is deterministic. A current value outside its window (possible
// while rows are solved sequentially) is projected onto the window.
double cd_run(Vector& t1, Matrix& t2, const std::vector<double>& grid, int sweeps,
              const Objective& objective, const CdScope& scope) {
  const int k = static_cast<int>(t1.size());
  double best = objective(t1, t2);
  const double eps = 1e-10;

  // Scans grid values in [lo, hi] through `setter`; returns true on a move.
  const auto scan = [&](double cur, double lo, double hi, auto&& setter) {
    const bool cur_ok = cur >= lo - 1e-12 && cur <= hi + 1e-12;
    double best_p = cur_ok ? best : -kInf;
    double best_v = cur;
    bool have = cur_ok;
    for (double v : grid) {
      if (v < lo - 1e-12 || v > hi + 1e-12) continue;
      if (v == cur && cur_ok) continue;
      setter(v);
      const double p = objective(t1, t2);
      if (p > best_p + eps * (1.0 + std::abs(best_p)) || !have) {
        best_p = p;
        best_v = v;
        have = true;
      }
    }
    setter(best_v);
    if (best_v != cur) {
      best = best_p;
      return true;
    }
    return false;
  };

  for (int sweep = 0; sweep < sweeps; ++sweep) {
    bool changed = false;
    if (scope.move_t1) {
      for (int i = 0; i < k; ++i) {
        const double lo = i > 0 ? t1[i - 1] : -kInf;
        const double hi = i + 1 < k ? t1[i + 1] : kInf;
        changed |= scan(t1[i], lo, hi, [&](double v) { t1[i] = v; });
      }
    }
    if (scope.move_t2) {
      for (int i = 0; i < k; ++i) {
        if (scope.t2_row_only >= 0 && i != scope.t2_row_only) continue;
        for (int j = 0; j < k; ++j) {
          double lo = j > 0 ? t2(i, j - 1) : -kInf;
          if (i > 0) lo = std::max(lo, t2(i - 1, j));
          double hi = j + 1 < k ? t2(i, j + 1) : kInf;
          if (!scope.cross_lower_only && i + 1 < k) hi = std::min(hi, t2(i + 1, j));
          changed |= scan(t2(i, j), lo, hi, [&](double v) { t2(i, j) = v; });
        }
      }
      if (scope.column_moves && scope.t2_row_only < 0) {
        // Collapse one column to a shared value; improvement-only moves.
        for (int j = 0; j < k; ++j) {
          double lo = -kInf, hi = kInf;
          for (int i = 0; i < k; ++i) {
            if (j > 0) lo = std::max(lo, t2(i, j - 1));
            if (j + 1 < k) hi = std::min(hi, t2(i, j + 1));
          }
          if (lo > hi) continue;
          const Vector saved = t2.col(j);
          double best_p = best;
          Vector best_col = saved;
          bool moved = false;
          for (double v : grid) {
            if (v < lo - 1e-12 || v > hi + 1e-12) continue;
            t2.col(j).setConstant(v);
            const double p = objective(t1, t2);
            if (p > best_p + eps * (1.0 + std::abs(best_p))) {
              best_p = p;
              best_col = t2.col(j);
              moved = true;
            }
          }
          t2.col(j) = best_col;
          if (moved) {
            best = best_p;
            changed = true;
          }
        }
      }
    }
    if (!changed) break;
  }
  return best;
}

// Static (beta = 0) profits: the two periods decouple.
double period1_profit_beta0(const MarketState& s, const Vector& t1) {
  Vector r1(t1.size());
  r1[0] = (s.costs.c * t1[0] + s.costs.e_fixed) / s.ladder.theta1[0];
  for (int i = 1; i < t1.size(); ++i)
    r1[i] = r1[i - 1] + s.costs.c * (t1[i] - t1[i - 1]) / s.ladder.theta1[i];
  double p = 0.0;
  for (int i = 0; i < t1.size(); ++i)
    p += s.ladder.p1[i] * s.n_servers *
         (s.alpha * model_quality(t1[i], s.hyper) - r1[i]);
  return p - s.sigma * s.e_cloud;
}

double period2_row_profit(const MarketState& s, int row, const Vector& t_row) {
  const Vector r = optimal_rewards_p2(t_row, s.ladder.theta2, s.costs);
  double p = 0.0;
  for (int j = 0; j < t_row.size(); ++j)
    p += s.ladder.p2(row, j) * s.n_servers *
         (s.alpha * model_quality(t_row[j], s.hyper) - r[j]);
  return p - s.sigma * s.e_cloud;
}

struct Rounds {
  Vector t1;
  Matrix t2;
};

Rounds heuristic_rounds(const MarketState& s, const OracleOptions& opt,
                        const std::vector<double>& grid) {
  const int k = s.ladder.k_types();
  Rounds r;
  r.t1.resize(k);
  r.t2.resize(k, k);
  for (int i = 0; i < k; ++i) r.t1[i] = single_type_heuristic(s.ladder.theta1[i], s, opt, grid);
  std::sort(r.t1.data(), r.t1.data() + k);
  Vector row(k);
  for (int j = 0; j < k; ++j) row[j] = single_type_heuristic(s.ladder.theta2[j], s, opt, grid);
  std::sort(row.data(), row.data() + k);
  for (int i = 0; i < k; ++i) r.t2.row(i) = row.transpose();
  return r;
}

// Each period optimised on its own with beta treated as zero: first-period
// rounds against the static first-period profit, then each second-period
// menu row against its own expected profit. Rows are solved bottom-up with a
// lower bound from the row below, which keeps columns monotone.
Rounds solve_static_rounds(const MarketState& s, const OracleOptions& opt,
                           const std::vector<double>& grid) {
  const int k = s.ladder.k_types();
  Rounds r = heuristic_rounds(s, opt, grid);
  {
    Objective obj = [&](const Vector& t1, const Matrix&) { return period1_profit_beta0(s, t1); };
    CdScope scope;
    scope.move_t2 = false;
    cd_run(r.t1, r.t2, grid, opt.sweeps, obj, scope);
  }
  for (int row = 0; row < k; ++row) {
    Objective obj = [&](const Vector&, const Matrix& t2) {
      return period2_row_profit(s, row, t2.row(row).transpose());
    };
    CdScope scope;
    scope.move_t1 = false;
    scope.t2_row_only = row;
    scope.cross_lower_only = true;
    cd_run(r.t1, r.t2, grid, opt.sweeps, obj, scope);
  }
  return r;
}

OracleResult grid_search_k1(const MarketState& s, const std::vector<double>& grid) {
  Vector t1(1), best_t1(1);
  Matrix t2(1, 1), best_t2(1, 1);
  double best1 = -kInf, best2 = -kInf;
  for (double v : grid) {
    t1[0] = v;
    const double p = period1_profit_beta0(s, t1);
    if (p > best1) {
      best1 = p;
      best_t1 = t1;
    }
  }
  for (double v : grid) {
    Vector row(1);
    row[0] = v;
    const double p = period2_row_profit(s, 0, row);
    if (p > best2) {
      best2 = p;
      best_t2(0, 0) = v;
    }
  }
  return finish(s, best_t1, best_t2);
}

OracleResult grid_search_k2(const MarketState& s, const OracleOptions& opt,
                            const std::vector<double>& grid) {
  const int g = static_cast<int>(grid.size());
  Vector t1(2);
  Matrix t2(2, 2);
  Vector best_t1(2);
  Matrix best_t2(2, 2);
  double best = -kInf;
  if (s.beta == 0.0) {
    // Periods decouple; rows of the second-period menu decouple too (up to
    // the column-monotonicity window, enumerated jointly below).
    double b1 = -kInf;
    for (int a = 0; a < g; ++a)
      for (int b = a; b < g; ++b) {
        t1 << grid[a], grid[b];
        const double p = period1_profit_beta0(s, t1);
        if (p > b1) {
          b1 = p;
          best_t1 = t1;
        }
      }
    double b2 = -kInf;
    for (int c = 0; c < g; ++c)
      for (int d = c; d < g; ++d)
        for (int e = c; e < g; ++e)
          for (int f = std::max(d, e); f < g; ++f) {
            t2 << grid[c], grid[d], grid[e], grid[f];
            const double p = period2_row_profit(s, 0, t2.row(0).transpose()) +
                             period2_row_profit(s, 1, t2.row(1).transpose());
            if (p > b2) {
              b2 = p;
              best_t2 = t2;
            }
          }
    return finish(s, best_t1, best_t2);
  }
  for (int a = 0; a < g; ++a)
    for (int b = a; b < g; ++b) {
      t1 << grid[a], grid[b];
      for (int c = 0; c < g; ++c)
        for (int d = c; d < g; ++d)
          for (int e = c; e < g; ++e)
            for (int f = std::max(d, e); f < g; ++f) {
              t2 << grid[c], grid[d], grid[e], grid[f];
              const double p = total_profit(s, t1, t2);
              if (p > best) {
                best = p;
                best_t1 = t1;
                best_t2 = t2;
              }
            }
    }
  return finish(s, best_t1, best_t2);
}

}  // namespace

OracleResult grid_search(const MarketState& state, const OracleOptions& opt) {
  state.validate();
  const auto grid = grid_values(opt);
  const int k = state.ladder.k_types();
  if (k == 1) return grid_search_k1(state, grid);
  if (k == 2) return grid_search_k2(state, opt, grid);
  throw std::invalid_argument(
      "grid_search: joint enumeration is intractable for K > 2; use coordinate descent");
}

OracleResult coordinate_descent(const MarketState& state, Vector t1_init, Matrix t2_init,
                                const OracleOptions& opt) {
  state.validate();
  const auto grid = grid_values(opt);
  Objective obj = [&](const Vector& t1, const Matrix& t2) {
    return total_profit(state, t1, t2);
  };
  cd_run(t1_init, t2_init, grid, opt.sweeps, obj, CdScope{});
  return finish(state, t1_init, t2_init);
}

OracleResult solve_oracle(const MarketState& state, const OracleOptions& opt) {
  state.validate();
  const auto grid = grid_values(opt);
  const int k = state.ladder.k_types();
  if (k == 1) return grid_search_k1(state, grid);
  if (state.beta == 0.0) {
    const Rounds r = solve_static_rounds(state, opt, grid);
    return finish(state, r.t1, r.t2);
  }
  if (opt.joint && k == 2) return grid_search_k2(state, opt, grid);
  const Rounds st = solve_static_rounds(state, opt, grid);
  const Rounds heur = heuristic_rounds(state, opt, grid);
  OracleResult a = coordinate_descent(state, st.t1, st.t2, opt);
  OracleResult b = coordinate_descent(state, heur.t1, heur.t2, opt);
  return a.profit >= b.profit ? a : b;
}

OracleResult static_scheme(const MarketState& state, const OracleOptions& opt) {
  state.validate();
  const auto grid = grid_values(opt);
  const Rounds r = solve_static_rounds(state, opt, grid);
  return finish(state, r.t1, r.t2);
}

OracleResult random_scheme(const MarketState& state, std::mt19937_64& rng,
                           const OracleOptions& opt) {
  state.validate();
  const auto grid = grid_values(opt);
  const int k = state.ladder.k_types();
  std::uniform_int_distribution<int> pick(0, static_cast<int>(grid.size()) - 1);
  Vector t1(k);
  for (int i = 0; i < k; ++i) t1[i] = grid[pick(rng)];
  std::sort(t1.data(), t1.data() + k);
  Matrix t2(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) t2(i, j) = grid[pick(rng)];
  make_doubly_monotone(t2);
  return finish(state, t1, t2);
}

}  // namespace clab
