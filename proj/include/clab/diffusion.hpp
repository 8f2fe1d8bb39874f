#pragma once

#include <random>
#include <vector>

#include "clab/econ.hpp"
#include "clab/nn.hpp"

namespace clab {

/// Variance-proportional forward schedule. Index m-1 stores the step-m value.
struct NoiseSchedule {
  Eigen::VectorXd eps;      // forward variances, strictly increasing
  Eigen::VectorXd chi;      // 1 - eps, reused as the reverse-process coefficient
  Eigen::VectorXd chi_bar;  // running product of chi

  int steps() const { return static_cast<int>(eps.size()); }
  /// Residual signal weight after the full forward pass; should be near zero.
  double terminal_signal() const { return chi_bar[steps() - 1]; }
};

/// eps_m = 1 - exp(-eps_min/M - (2m-1)/(2M^2) * (eps_max - eps_min)).
NoiseSchedule vp_schedule(int steps, double eps_min, double eps_max);

/// State- and step-conditioned denoiser. Sinusoidal step features run through
/// a small MLP whose output is concatenated with [action; state] ahead of the
/// trunk; the trunk ends in a tanh so the output is bounded.
struct Denoiser {
  nn::Mlp time_mlp;
  nn::Mlp trunk;
  int action_dim = 0;
  int state_dim = 0;
  int emb_width = 16;

  Denoiser() = default;
  Denoiser(int action_dim, int state_dim, int hidden, int emb_width, std::mt19937_64& rng);

  struct Cache {
    nn::Tape time_tape;
    nn::Tape trunk_tape;
    int m = 0;
  };

  Matrix forward(const Matrix& actions, const Matrix& states, int m,
                 Cache* cache = nullptr) const;
  /// Accumulates parameter gradients; returns dLoss/dActions.
  Matrix backward(const Cache& cache, const Matrix& dout);

  void zero_grad();
  bool finite() const;
  /// Hidden trunk layers, the targets of structured pruning.
  std::vector<nn::Dense*> prunable_layers();
  std::vector<const nn::Dense*> prunable_layers() const;
};

/// Conditional denoising-diffusion actor.
struct DiffusionPolicy {
  Denoiser net;
  NoiseSchedule sched;

  struct SampleResult {
    Matrix actions;     // final sample, clamped to [-1, 1]
    Matrix final_mean;  // pre-clamp output of the last reverse step
    Vector logp;        // approximate log-density per column
    std::vector<Matrix> trace;  // optional per-step chain states
  };

  /// Reverse-chain sampling. rng == nullptr gives the deterministic chain
  /// (zero initial noise, zero step noise); otherwise noise is injected at
  /// every step except the last.
  SampleResult sample(const Matrix& states, std::mt19937_64* rng,
                      bool keep_trace = false) const;

  struct ChainCache {
    std::vector<Denoiser::Cache> steps;  // in sampling order, m = M .. 1
    Matrix final_mean;
    Matrix actions;
    Vector logp;
  };

  SampleResult sample_cached(const Matrix& states, std::mt19937_64* rng,
                             ChainCache& cache) const;

  /// Backward through the whole reverse chain: dL_dA seeds the clamp
  /// pass-through, entropy_coeff seeds d(logp)/d(final mean) for a loss that
  /// contains entropy_coeff * logp per column.
  void backward_chain(const ChainCache& cache, const Matrix& dL_dA, double entropy_coeff);
};

/// Gaussian log-density of `action` under the deterministic chain's final
/// step mean, variance eps_1, with a tanh squash correction at the mean.
double log_prob_approx(const DiffusionPolicy& policy, const Vector& state,
                       const Vector& action);

/// Shared kernel for the approximation above and for in-chain scoring.
double gaussian_logpdf_squashed(const Vector& action, const Vector& mean, double var);

}  // namespace clab
