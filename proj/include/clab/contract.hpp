#pragma once

#include <limits>
#include <string>
#include <vector>

#include "clab/econ.hpp"

namespace clab {

/// Ascending willingness-to-participate types for both periods, the
/// first-period type distribution, and the first-period-type-conditioned
/// transition matrix. Row k of `p2` gives the second-period type
/// probabilities of a server whose first-period type was k; rows must be
/// stochastically ordered (row k dominates row k-1 in first order).
struct TypeLadder {
  Vector theta1;
  Vector theta2;
  Vector p1;
  Matrix p2;

  int k_types() const { return static_cast<int>(theta1.size()); }
  void validate() const;  // throws std::invalid_argument with the offending field
};

/// A full two-period menu: first-period items (t1, r1) per type and, for each
/// first-period type k, a complete second-period menu (row k of t2/r2).
struct TwoPeriodContract {
  Vector t1;
  Vector r1;
  Matrix t2;
  Matrix r2;

  int k_types() const { return static_cast<int>(t1.size()); }
};

/// One sampled market instance.
struct MarketState {
  int n_servers = 3;
  TypeLadder ladder;
  CostCoeffs costs;
  QualityHyper hyper;
  double alpha = 200.0;
  double beta = 0.5;
  double sigma = 0.5;    // unit energy cost, also charged on e_cloud
  double e_cloud = 22.5; // Joules spent integrating modules

  void validate() const;
};

/// Tolerance scale for binding checks: max(1, |theta_max * R_max|).
double contract_scale(const TwoPeriodContract& c, const TypeLadder& ladder);

/// Second-period rewards that bind the type-1 IR and every adjacent IC
/// constraint. `t2_row` must be non-decreasing.
Vector optimal_rewards_p2(const Vector& t2_row, const Vector& theta2, const CostCoeffs& costs);

/// First-period rewards that bind the type-1 IR and every local downward
/// intertemporal IC constraint, including the information-rent correction
/// driven by differences between consecutive second-period menus.
Vector optimal_rewards_p1(const Vector& t1, const Matrix& t2, const TypeLadder& ladder,
                          const CostCoeffs& costs, double beta);

struct FeasibilityResult {
  bool pass = true;
  std::vector<std::string> violations;
};

/// Reduced second-period conditions: monotone rewards, monotone rounds,
/// binding type-1 IR, binding adjacent IC.
FeasibilityResult check_feasible_p2(const Vector& t2_row, const Vector& r2_row,
                                    const Vector& theta2, const CostCoeffs& costs,
                                    double tol_scale = 1e-9);

/// Reduced first-period conditions: monotone rewards, monotone rounds,
/// binding type-1 IR, binding local downward intertemporal IC.
FeasibilityResult check_feasible_p1(const TwoPeriodContract& c, const TypeLadder& ladder,
                                    const CostCoeffs& costs, double beta,
                                    double tol_scale = 1e-9);

/// Result of brute-force enumeration of every IR, IC, and intertemporal IC
/// constraint. Vacuous families (K = 1) report +inf slack.
struct ConstraintReport {
  double scale = 1.0;
  double ir2_min = std::numeric_limits<double>::infinity();
  double ic2_min = std::numeric_limits<double>::infinity();
  double ir1_min = std::numeric_limits<double>::infinity();
  double iic_min = std::numeric_limits<double>::infinity();
  double ir2_type1_resid = 0.0;  // max |type-1 IR residual| across second-period menus
  double ir1_type1_resid = 0.0;
  double ic2_adj_resid = 0.0;    // max |adjacent IC equality residual|
  double iic_adj_resid = 0.0;

  double min_slack() const;
  bool feasible(double tol = 1e-9) const { return min_slack() >= -tol * scale; }
};

ConstraintReport verify_all_constraints(const TwoPeriodContract& c, const TypeLadder& ladder,
                                        const CostCoeffs& costs, double beta);

/// Expected discounted utility of a type-k server (0-based k) that reports
/// truthfully in both periods.
double es_expected_utility(int k, const TwoPeriodContract& c, const TypeLadder& ladder,
                           const CostCoeffs& costs, double beta);

struct ProfitSplit {
  double period1 = 0.0;
  double period2 = 0.0;  // undiscounted
  double total = 0.0;    // period1 + beta * period2
};

/// Expected cloud profit; the second-period expectation marginalises the
/// transition matrix by the first-period distribution.
ProfitSplit cloud_profit(const TwoPeriodContract& c, const MarketState& state);

struct BuildDiag {
  bool repaired = false;
  double min_shrink = 1.0;  // smallest blend factor applied to a menu row
};

/// Closed-form contract for the given rounds. `t1` must be non-decreasing and
/// `t2` non-decreasing along rows; with `repair` enabled `t2` must also be
/// non-decreasing along columns, and menu rows are blended toward their
/// predecessor just enough to keep the first-period reward schedule monotone
/// and every first-period IR constraint non-negative.
TwoPeriodContract build_contract(Vector t1, Matrix t2, const TypeLadder& ladder,
                                 const CostCoeffs& costs, double beta, bool repair = true,
                                 BuildDiag* diag = nullptr);

/// Sort each row ascending, then each column ascending. Column sorting of a
/// row-sorted matrix preserves row order, so the result is monotone both ways.
void make_doubly_monotone(Matrix& m);

}  // namespace clab
