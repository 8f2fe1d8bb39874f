#pragma once

#include <Eigen/Core>

namespace clab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Hyperparameters of the module-quality curve Q(T) = 1 - 2^(-a T), where
/// a = (2 - L*delta) * delta * epsilon / 2 must be positive.
struct QualityHyper {
  double delta = 0.02;
  double lipschitz = 8.0;         // L
  double strong_convexity = 2.0;  // epsilon

  double exponent_coeff() const {
    return 0.5 * (2.0 - lipschitz * delta) * delta * strong_convexity;
  }
  void validate() const;  // throws std::invalid_argument
};

/// Hardware and cost parameters of a single edge server. All quantities are
/// SI: Hz, bits, bits/s, Joules. Data sizes use decimal megabytes
/// (1 MB = 8e6 bits), so the defaults reproduce the reference energy numbers.
struct EdgeProfile {
  double hw_const = 1e-23;         // hardware constant (perception)
  double cycles_perceive = 100.0;  // cycles/bit
  double cycles_create = 120.0;    // cycles/bit
  double switch_cap = 1e-16;       // effective switched capacitance
  double cpu_hz = 6.4e7;
  double tx_power_dbm = 20.0;
  double data_feature_bits = 8e6;  // 1 MB of perceived feature data
  double data_agent_bits = 8e7;    // 10 MB module upload
  double link_rate_bps = 1e6;
  double unit_energy_cost = 0.5;   // sigma, cost per Joule

  void validate() const;
};

/// Per-round cost c and fixed cost E entering the server utility
/// u = theta * R - c * T - E.
struct CostCoeffs {
  double c = 0.0;
  double e_fixed = 0.0;
};

/// dBm -> linear Watts.
double dbm_to_watts(double dbm);

/// Module quality after `rounds` training rounds; in [0, 1), increasing and
/// concave in rounds.
double model_quality(double rounds, const QualityHyper& hyper);

/// Energy (J) spent perceiving feature data: hw_const * cyc * bits * f^2.
double energy_perception(const EdgeProfile& p);

/// Energy (J) spent on `rounds` rounds of module creation; linear in rounds.
double energy_creation(const EdgeProfile& p, double rounds);

/// Energy (J) spent uploading the constructed modules: P_watts * bits / rate.
double energy_upload(const EdgeProfile& p);

/// Sum of the three energy terms.
double total_energy(const EdgeProfile& p, double rounds);

/// c = sigma * rho * cyc_create * f^2;  E = sigma * (E_per + E_upl).
CostCoeffs cost_coeffs(const EdgeProfile& p);

/// Edge-server utility theta * R - c * T - E.
double es_utility(double theta, double reward, double rounds, const CostCoeffs& costs);

}  // namespace clab
