#include "clab/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace clab {

namespace {

constexpr double kSquashEps = 1e-6;

Matrix gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = normal(rng);
  return m;
}

double logp_column(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& mu,
                   double var) {
  double lp = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    const double e = a[i] - mu[i];
    const double th = std::tanh(mu[i]);
    lp += -0.5 * e * e / var - 0.5 * std::log(2.0 * std::numbers::pi_v<double> * var) -
          std::log(1.0 - th * th + kSquashEps);
  }
  return lp;
}

// d(logp)/d(mean) used by the actor update. Inside the box the Gaussian
// quadratic vanishes (the action equals the mean), and the clamp is treated
// straight-through, so only the squash-correction gradient remains; it pushes
// the mean away from saturation.
double dlogp_dmu(double mu, double var) {
  (void)var;
  const double th = std::tanh(mu);
  const double u = 1.0 - th * th + kSquashEps;
  return 2.0 * th * (1.0 - th * th) / u;
}

}  // namespace

NoiseSchedule vp_schedule(int steps, double eps_min, double eps_max) {
  if (steps < 1) throw std::invalid_argument("vp_schedule: steps must be >= 1");
  if (!(eps_min > 0.0) || eps_max < eps_min)
    throw std::invalid_argument("vp_schedule: need 0 < eps_min <= eps_max");
  NoiseSchedule s;
  s.eps.resize(steps);
  s.chi.resize(steps);
  s.chi_bar.resize(steps);
  const double m_d = static_cast<double>(steps);
  double prod = 1.0;
  for (int m = 1; m <= steps; ++m) {
    const double e =
        1.0 - std::exp(-eps_min / m_d -
                       (2.0 * m - 1.0) / (2.0 * m_d * m_d) * (eps_max - eps_min));
    s.eps[m - 1] = e;
    s.chi[m - 1] = 1.0 - e;
    prod *= s.chi[m - 1];
    s.chi_bar[m - 1] = prod;
  }
  return s;
}

Denoiser::Denoiser(int action_dim_, int state_dim_, int hidden, int emb_width_,
                   std::mt19937_64& rng)
    : action_dim(action_dim_), state_dim(state_dim_), emb_width(emb_width_) {
  time_mlp = nn::Mlp({emb_width, 2 * emb_width, emb_width},
                     {nn::Act::Mish, nn::Act::Identity});
  trunk = nn::Mlp({action_dim + state_dim + emb_width, hidden, hidden, action_dim},
                  {nn::Act::Mish, nn::Act::Mish, nn::Act::Tanh});
  time_mlp.init_glorot(rng);
  trunk.init_glorot(rng, 0.01);
}

Matrix Denoiser::forward(const Matrix& actions, const Matrix& states, int m,
                         Cache* cache) const {
  const int batch = static_cast<int>(actions.cols());
  const Vector emb = nn::sinusoidal_embed(m, emb_width);
  const Matrix feat = time_mlp.forward(emb, cache ? &cache->time_tape : nullptr);
  Matrix in(action_dim + state_dim + emb_width, batch);
  in.topRows(action_dim) = actions;
  in.middleRows(action_dim, state_dim) = states;
  in.bottomRows(emb_width) = feat.col(0).replicate(1, batch);
  if (cache) cache->m = m;
  return trunk.forward(in, cache ? &cache->trunk_tape : nullptr);
}

Matrix Denoiser::backward(const Cache& cache, const Matrix& dout) {
  const Matrix din = trunk.backward(cache.trunk_tape, dout);
  const Matrix time_grad = din.bottomRows(emb_width).rowwise().sum();
  time_mlp.backward(cache.time_tape, time_grad);
  return din.topRows(action_dim);
}

void Denoiser::zero_grad() {
  time_mlp.zero_grad();
  trunk.zero_grad();
}

bool Denoiser::finite() const { return time_mlp.finite() && trunk.finite(); }

std::vector<nn::Dense*> Denoiser::prunable_layers() {
  std::vector<nn::Dense*> out;
  for (std::size_t i = 0; i + 1 < trunk.layers.size(); ++i) out.push_back(&trunk.layers[i]);
  return out;
}

std::vector<const nn::Dense*> Denoiser::prunable_layers() const {
  std::vector<const nn::Dense*> out;
  for (std::size_t i = 0; i + 1 < trunk.layers.size(); ++i) out.push_back(&trunk.layers[i]);
  return out;
}

namespace {

struct ChainWork {
  Matrix x;
  Matrix mu;
};

// Shared reverse-chain body. `cache` may be null (inference only).
void run_chain(const DiffusionPolicy& policy, const Matrix& states, std::mt19937_64* rng,
               DiffusionPolicy::ChainCache* cache, std::vector<Matrix>* trace,
               ChainWork& work) {
  const int d = policy.net.action_dim;
  const int batch = static_cast<int>(states.cols());
  const NoiseSchedule& s = policy.sched;
  work.x = rng ? gaussian(*rng, d, batch) : Matrix::Zero(d, batch);
  if (trace) trace->push_back(work.x);
  for (int m = s.steps(); m >= 1; --m) {
    const int i = m - 1;
    Denoiser::Cache* step_cache = nullptr;
    if (cache) {
      cache->steps.emplace_back();
      step_cache = &cache->steps.back();
    }
    const Matrix f = policy.net.forward(work.x, states, m, step_cache);
    const double coef = s.eps[i] / std::sqrt(s.chi[i] * (1.0 - s.chi_bar[i]));
    work.mu = work.x / std::sqrt(s.chi[i]) - coef * f;
    if (m > 1 && rng)
      work.x = work.mu + std::sqrt(s.eps[i]) * gaussian(*rng, d, batch);
    else
      work.x = work.mu;
    if (trace) trace->push_back(work.x);
    if (!work.x.allFinite())
      throw std::runtime_error("diffusion chain produced non-finite values at step " +
                               std::to_string(m));
  }
}

Vector chain_logp(const Matrix& actions, const Matrix& mu, double var) {
  Vector lp(actions.cols());
  for (int c = 0; c < actions.cols(); ++c) lp[c] = logp_column(actions.col(c), mu.col(c), var);
  return lp;
}

}  // namespace

DiffusionPolicy::SampleResult DiffusionPolicy::sample(const Matrix& states,
                                                      std::mt19937_64* rng,
                                                      bool keep_trace) const {
  SampleResult out;
  ChainWork work;
  run_chain(*this, states, rng, nullptr, keep_trace ? &out.trace : nullptr, work);
  out.final_mean = work.mu;
  out.actions = work.x.cwiseMax(-1.0).cwiseMin(1.0);
  out.logp = chain_logp(out.actions, out.final_mean, sched.eps[0]);
  return out;
}

DiffusionPolicy::SampleResult DiffusionPolicy::sample_cached(const Matrix& states,
                                                             std::mt19937_64* rng,
                                                             ChainCache& cache) const {
  cache.steps.clear();
  SampleResult out;
  ChainWork work;
  run_chain(*this, states, rng, &cache, nullptr, work);
  cache.final_mean = work.mu;
  cache.actions = work.x.cwiseMax(-1.0).cwiseMin(1.0);
  cache.logp = chain_logp(cache.actions, cache.final_mean, sched.eps[0]);
  out.final_mean = cache.final_mean;
  out.actions = cache.actions;
  out.logp = cache.logp;
  return out;
}

void DiffusionPolicy::backward_chain(const ChainCache& cache, const Matrix& dL_dA,
                                     double entropy_coeff) {
  const NoiseSchedule& s = sched;
  const double var = s.eps[0];
  // The final clamp is handled straight-through: an untrained chain saturates
  // almost every coordinate, and a hard-zero clamp gradient would never let
  // the policy re-enter the action box.
  Matrix d = dL_dA;
  if (entropy_coeff != 0.0)
    for (int c = 0; c < d.cols(); ++c)
      for (int r = 0; r < d.rows(); ++r)
        d(r, c) += entropy_coeff * dlogp_dmu(cache.final_mean(r, c), var);
  // Steps were recorded for m = M .. 1; walk them back from m = 1.
  for (int idx = static_cast<int>(cache.steps.size()) - 1; idx >= 0; --idx) {
    const int m = cache.steps[idx].m;
    const int i = m - 1;
    const double coef = s.eps[i] / std::sqrt(s.chi[i] * (1.0 - s.chi_bar[i]));
    const Matrix up = -coef * d;
    const Matrix din = net.backward(cache.steps[idx], up);
    d = d / std::sqrt(s.chi[i]) + din;
  }
}

double gaussian_logpdf_squashed(const Vector& action, const Vector& mean, double var) {
  return logp_column(action, mean, var);
}

double log_prob_approx(const DiffusionPolicy& policy, const Vector& state,
                       const Vector& action) {
  if (action.size() != policy.net.action_dim)
    throw std::invalid_argument("log_prob_approx: action dimension mismatch");
  const DiffusionPolicy::SampleResult ref = policy.sample(state, nullptr);
  return gaussian_logpdf_squashed(action, ref.final_mean.col(0), policy.sched.eps[0]);
}

}  // namespace clab
