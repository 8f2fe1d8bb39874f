#include "clab/econ.hpp"

#include <cmath>
#include <stdexcept>

namespace clab {

void QualityHyper::validate() const {
  if (!(lipschitz > 0.0)) throw std::invalid_argument("quality: lipschitz must be > 0");
  if (!(strong_convexity > 0.0)) throw std::invalid_argument("quality: strong_convexity must be > 0");
  if (!(delta > 0.0 && delta < 2.0 / lipschitz))
    throw std::invalid_argument("quality: delta must lie in (0, 2/L)");
}

void EdgeProfile::validate() const {
  auto pos = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("profile: ") + name + " must be > 0");
  };
  pos(hw_const, "hw_const");
  pos(cycles_perceive, "cycles_perceive");
  pos(cycles_create, "cycles_create");
  pos(switch_cap, "switch_cap");
  pos(cpu_hz, "cpu_hz");
  pos(data_feature_bits, "data_feature_bits");
  pos(data_agent_bits, "data_agent_bits");
  pos(link_rate_bps, "link_rate_bps");
  if (!(unit_energy_cost >= 0.0))
    throw std::invalid_argument("profile: unit_energy_cost must be >= 0");
  if (!(tx_power_dbm >= 0.0 && tx_power_dbm <= 60.0))
    throw std::invalid_argument("profile: tx_power_dbm must lie in [0, 60]");
}

double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

double model_quality(double rounds, const QualityHyper& hyper) {
  hyper.validate();
  if (!(rounds >= 0.0)) throw std::invalid_argument("model_quality: rounds must be >= 0");
  return 1.0 - std::exp2(-rounds * hyper.exponent_coeff());
}

double energy_perception(const EdgeProfile& p) {
  return p.hw_const * p.cycles_perceive * p.data_feature_bits * p.cpu_hz * p.cpu_hz;
}

double energy_creation(const EdgeProfile& p, double rounds) {
  if (!(rounds >= 0.0)) throw std::invalid_argument("energy_creation: rounds must be >= 0");
  return p.switch_cap * rounds * p.cycles_create * p.cpu_hz * p.cpu_hz;
}

double energy_upload(const EdgeProfile& p) {
  if (!(p.link_rate_bps > 0.0)) throw std::invalid_argument("energy_upload: link rate must be > 0");
  return dbm_to_watts(p.tx_power_dbm) * p.data_agent_bits / p.link_rate_bps;
}

double total_energy(const EdgeProfile& p, double rounds) {
  return energy_perception(p) + energy_creation(p, rounds) + energy_upload(p);
}

CostCoeffs cost_coeffs(const EdgeProfile& p) {
  CostCoeffs out;
  out.c = p.unit_energy_cost * p.switch_cap * p.cycles_create * p.cpu_hz * p.cpu_hz;
  out.e_fixed = p.unit_energy_cost * (energy_perception(p) + energy_upload(p));
  return out;
}

double es_utility(double theta, double reward, double rounds, const CostCoeffs& costs) {
  return theta * reward - costs.c * rounds - costs.e_fixed;
}

}  // namespace clab
