#include "clab/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace clab {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  std::string current;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: malformed section at line " +
                                    std::to_string(line_no));
      current = trim(line.substr(1, line.size() - 2));
      cfg.sections_.push_back({current, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at line " +
                                  std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config: empty key at line " + std::to_string(line_no));
    if (cfg.sections_.empty()) cfg.sections_.push_back({"", {}});
    cfg.sections_.back().entries.emplace_back(key, value);
  }
  return cfg;
}

std::string Config::serialize() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& sec : sections_) {
    if (!first) os << "\n";
    first = false;
    if (!sec.name.empty()) os << "[" << sec.name << "]\n";
    for (const auto& [k, v] : sec.entries) os << k << " = " << v << "\n";
  }
  return os.str();
}

const std::string* Config::find(const std::string& section, const std::string& key) const {
  for (const auto& sec : sections_) {
    if (sec.name != section) continue;
    for (const auto& [k, v] : sec.entries)
      if (k == key) return &v;
  }
  return nullptr;
}

bool Config::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

double Config::number(const std::string& section, const std::string& key) const {
  const std::string* v = find(section, key);
  if (!v) throw std::invalid_argument("config: missing [" + section + "] " + key);
  char* end = nullptr;
  const double x = std::strtod(v->c_str(), &end);
  if (end == v->c_str() || trim(end).size() != 0)
    throw std::invalid_argument("config: [" + section + "] " + key + " is not a number");
  return x;
}

double Config::number_or(const std::string& section, const std::string& key,
                         double fallback) const {
  return has(section, key) ? number(section, key) : fallback;
}

std::string Config::text(const std::string& section, const std::string& key) const {
  const std::string* v = find(section, key);
  if (!v) throw std::invalid_argument("config: missing [" + section + "] " + key);
  return *v;
}

std::string Config::text_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
  const std::string* v = find(section, key);
  return v ? *v : fallback;
}

std::vector<double> Config::numbers(const std::string& section, const std::string& key) const {
  const std::string* v = find(section, key);
  if (!v) throw std::invalid_argument("config: missing [" + section + "] " + key);
  std::istringstream in(*v);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    const double x = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      throw std::invalid_argument("config: [" + section + "] " + key +
                                  " has a non-numeric entry");
    out.push_back(x);
  }
  if (out.empty())
    throw std::invalid_argument("config: [" + section + "] " + key + " is empty");
  return out;
}

void Config::set(const std::string& section, const std::string& key,
                 const std::string& value) {
  for (auto& sec : sections_) {
    if (sec.name != section) continue;
    for (auto& [k, v] : sec.entries)
      if (k == key) {
        v = value;
        return;
      }
    sec.entries.emplace_back(key, value);
    return;
  }
  sections_.push_back({section, {{key, value}}});
}

std::string default_config_text() {
  return R"(# contractlab configuration; values follow the simulation parameter table.

[quality]
delta = 0.02
lipschitz = 8
strong_convexity = 2

[profile]
hw_const = 1e-23
cycles_perceive = 100
cycles_create = 120
switch_cap = 1e-16
cpu_hz = 6.4e7
# 1 MB = 8e6 bits (decimal megabytes)
data_feature_bits = 8e6
data_agent_bits = 8e7
tx_power_dbm = 20
link_rate_bps = 1e6
unit_energy_cost = 0.5

[market]
n_servers = 3
alpha = 200
beta = 0.5
e_cloud = 22.5
theta1 = 15 20
theta2 = 15 20
p1 = 0.5 0.5
p2_row1 = 0.6 0.4
p2_row2 = 0.4 0.6

[contract]
t_min = 0
t_max = 200
grid_points = 64
joint_grid = 0
integer_rounds = 0
cd_sweeps = 12

[env]
k_types = 2
n_servers = 3
beta = 0.5
alpha_choices = 200 250
theta_lo = 15
band_width = 5
sigma_lo = 0.5
sigma_hi = 1
p_dbm_lo = 20
p_dbm_hi = 33
rate_lo = 1e6
rate_hi = 3e6
ec_lo = 20
ec_hi = 25
lambda = 0.01
action_mode = full
horizon = 1

[train]
variant = edmsac
seed = 1
steps = 5000
transitions_per_step = 1
gamma = 0.99
tau = 0.005
kappa = 0.05
actor_lr = 3e-4
critic_lr = 3e-4
weight_decay = 1e-4
batch = 256
buffer_capacity = 100000
prune_rate = 0.5
denoise_steps = 6
eps_min = 0.1
eps_max = 10
hidden = 256
emb_width = 16
reward_scale = 0.01
eval_states = 32
eval_seed = 777
eval_every = 10
paper_actor_sign = 0

[compare]
states = 20
)";
}

AppConfig resolve_config(const Config& cfg) {
  AppConfig app;

  QualityHyper hyper;
  hyper.delta = cfg.number_or("quality", "delta", hyper.delta);
  hyper.lipschitz = cfg.number_or("quality", "lipschitz", hyper.lipschitz);
  hyper.strong_convexity = cfg.number_or("quality", "strong_convexity", hyper.strong_convexity);
  hyper.validate();

  EdgeProfile prof;
  prof.hw_const = cfg.number_or("profile", "hw_const", prof.hw_const);
  prof.cycles_perceive = cfg.number_or("profile", "cycles_perceive", prof.cycles_perceive);
  prof.cycles_create = cfg.number_or("profile", "cycles_create", prof.cycles_create);
  prof.switch_cap = cfg.number_or("profile", "switch_cap", prof.switch_cap);
  prof.cpu_hz = cfg.number_or("profile", "cpu_hz", prof.cpu_hz);
  prof.tx_power_dbm = cfg.number_or("profile", "tx_power_dbm", prof.tx_power_dbm);
  prof.data_feature_bits = cfg.number_or("profile", "data_feature_bits", prof.data_feature_bits);
  prof.data_agent_bits = cfg.number_or("profile", "data_agent_bits", prof.data_agent_bits);
  prof.link_rate_bps = cfg.number_or("profile", "link_rate_bps", prof.link_rate_bps);
  prof.unit_energy_cost = cfg.number_or("profile", "unit_energy_cost", prof.unit_energy_cost);
  prof.validate();
  app.profile = prof;

  MarketState m;
  m.hyper = hyper;
  m.n_servers = static_cast<int>(cfg.number_or("market", "n_servers", 3));
  m.alpha = cfg.number_or("market", "alpha", 200.0);
  m.beta = cfg.number_or("market", "beta", 0.5);
  m.e_cloud = cfg.number_or("market", "e_cloud", 22.5);
  m.sigma = prof.unit_energy_cost;
  m.costs = cost_coeffs(prof);
  {
    const auto th1 = cfg.has("market", "theta1") ? cfg.numbers("market", "theta1")
                                                 : std::vector<double>{15.0, 20.0};
    const auto th2 = cfg.has("market", "theta2") ? cfg.numbers("market", "theta2")
                                                 : std::vector<double>{15.0, 20.0};
    const auto p1 = cfg.has("market", "p1") ? cfg.numbers("market", "p1")
                                            : std::vector<double>{0.5, 0.5};
    const int k = static_cast<int>(th1.size());
    m.ladder.theta1 = Eigen::Map<const Vector>(th1.data(), k);
    m.ladder.theta2 = Eigen::Map<const Vector>(th2.data(), static_cast<int>(th2.size()));
    m.ladder.p1 = Eigen::Map<const Vector>(p1.data(), static_cast<int>(p1.size()));
    m.ladder.p2.resize(k, k);
    for (int r = 0; r < k; ++r) {
      const std::string key = "p2_row" + std::to_string(r + 1);
      std::vector<double> row;
      if (cfg.has("market", key)) {
        row = cfg.numbers("market", key);
      } else if (k == 1) {
        row = {1.0};
      } else {
        throw std::invalid_argument("config: missing [market] " + key);
      }
      if (static_cast<int>(row.size()) != k)
        throw std::invalid_argument("config: [market] " + key + " must have K entries");
      for (int j = 0; j < k; ++j) m.ladder.p2(r, j) = row[static_cast<std::size_t>(j)];
    }
  }
  m.validate();
  app.market = m;

  OracleOptions opt;
  opt.t_min = cfg.number_or("contract", "t_min", 0.0);
  opt.t_max = cfg.number_or("contract", "t_max", 200.0);
  opt.grid_points = static_cast<int>(cfg.number_or("contract", "grid_points", 64));
  opt.joint = cfg.number_or("contract", "joint_grid", 0) != 0;
  opt.integer_rounds = cfg.number_or("contract", "integer_rounds", 0) != 0;
  opt.sweeps = static_cast<int>(cfg.number_or("contract", "cd_sweeps", 12));
  app.oracle = opt;

  SampleRanges r;
  r.k_types = static_cast<int>(cfg.number_or("env", "k_types", 2));
  r.n_servers = static_cast<int>(cfg.number_or("env", "n_servers", 3));
  r.beta = cfg.number_or("env", "beta", 0.5);
  if (cfg.has("env", "alpha_choices")) r.alpha_choices = cfg.numbers("env", "alpha_choices");
  r.theta_lo = cfg.number_or("env", "theta_lo", 15.0);
  r.band_width = cfg.number_or("env", "band_width", 5.0);
  r.sigma_lo = cfg.number_or("env", "sigma_lo", 0.5);
  r.sigma_hi = cfg.number_or("env", "sigma_hi", 1.0);
  r.p_dbm_lo = cfg.number_or("env", "p_dbm_lo", 20.0);
  r.p_dbm_hi = cfg.number_or("env", "p_dbm_hi", 33.0);
  r.rate_lo = cfg.number_or("env", "rate_lo", 1e6);
  r.rate_hi = cfg.number_or("env", "rate_hi", 3e6);
  r.ec_lo = cfg.number_or("env", "ec_lo", 20.0);
  r.ec_hi = cfg.number_or("env", "ec_hi", 25.0);
  r.hyper = hyper;
  r.profile = prof;
  if (r.k_types < 1) throw std::invalid_argument("config: [env] k_types must be >= 1");
  app.ranges = r;

  TrainerConfig t;
  t.variant = variant_from_name(cfg.text_or("train", "variant", "edmsac"));
  t.seed = static_cast<std::uint64_t>(cfg.number_or("train", "seed", 1));
  t.steps = static_cast<int>(cfg.number_or("train", "steps", 5000));
  t.transitions_per_step = static_cast<int>(cfg.number_or("train", "transitions_per_step", 1));
  t.gamma = cfg.number_or("train", "gamma", 0.99);
  t.tau = cfg.number_or("train", "tau", 0.005);
  t.kappa = cfg.number_or("train", "kappa", 0.05);
  t.actor_lr = cfg.number_or("train", "actor_lr", 3e-4);
  t.critic_lr = cfg.number_or("train", "critic_lr", 3e-4);
  t.weight_decay = cfg.number_or("train", "weight_decay", 1e-4);
  t.batch = static_cast<int>(cfg.number_or("train", "batch", 256));
  t.buffer_capacity = static_cast<int>(cfg.number_or("train", "buffer_capacity", 100000));
  t.prune_rate = cfg.number_or("train", "prune_rate", 0.5);
  t.denoise_steps = static_cast<int>(cfg.number_or("train", "denoise_steps", 6));
  t.eps_min = cfg.number_or("train", "eps_min", 0.1);
  t.eps_max = cfg.number_or("train", "eps_max", 10.0);
  t.lambda = cfg.number_or("env", "lambda", 0.01);
  t.hidden = static_cast<int>(cfg.number_or("train", "hidden", 256));
  t.emb_width = static_cast<int>(cfg.number_or("train", "emb_width", 16));
  t.reward_scale = cfg.number_or("train", "reward_scale", 0.01);
  t.eval_states = static_cast<int>(cfg.number_or("train", "eval_states", 32));
  t.eval_seed = static_cast<std::uint64_t>(cfg.number_or("train", "eval_seed", 777));
  t.eval_every = static_cast<int>(cfg.number_or("train", "eval_every", 10));
  t.paper_actor_sign = cfg.number_or("train", "paper_actor_sign", 0) != 0;
  t.t_min = opt.t_min;
  t.t_max = opt.t_max;
  {
    const std::string mode = cfg.text_or("env", "action_mode", "full");
    if (mode == "full")
      t.action_mode = ActionMode::Full;
    else if (mode == "shared")
      t.action_mode = ActionMode::Shared;
    else
      throw std::invalid_argument("config: [env] action_mode must be full or shared");
  }
  if (!(t.gamma > 0.0 && t.gamma <= 1.0))
    throw std::invalid_argument("config: [train] gamma must lie in (0, 1]");
  if (!(t.tau > 0.0 && t.tau <= 1.0))
    throw std::invalid_argument("config: [train] tau must lie in (0, 1]");
  if (t.kappa < 0.0) throw std::invalid_argument("config: [train] kappa must be >= 0");
  if (t.batch < 1) throw std::invalid_argument("config: [train] batch must be >= 1");
  if (!(t.prune_rate >= 0.0 && t.prune_rate < 1.0))
    throw std::invalid_argument("config: [train] prune_rate must lie in [0, 1)");
  app.trainer = t;

  app.compare_states = static_cast<int>(cfg.number_or("compare", "states", 20));
  return app;
}

}  // namespace clab
