#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "clab/diffusion.hpp"
#include "clab/env.hpp"
#include "clab/pruning.hpp"

namespace clab {

enum class Variant { Edmsac, Dmsac, Gsac };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& s);

struct TrainerConfig {
  Variant variant = Variant::Edmsac;
  std::uint64_t seed = 1;
  int steps = 5000;              // training steps V
  int transitions_per_step = 1;  // Z
  double gamma = 0.99;
  double tau = 0.005;
  double kappa = 0.05;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  double weight_decay = 1e-4;
  int batch = 256;
  int buffer_capacity = 100000;
  double prune_rate = 0.5;  // ignored by DMSAC (forced 0) and GSAC
  int denoise_steps = 6;
  double eps_min = 0.1;
  double eps_max = 10.0;
  double lambda = 0.01;
  int hidden = 256;
  int emb_width = 16;
  double reward_scale = 0.01;  // critic-side conditioning; logs stay unscaled
  int eval_states = 32;
  std::uint64_t eval_seed = 777;  // frozen eval set, shared across training seeds
  int eval_every = 1;
  bool paper_actor_sign = false;  // the literal published actor-loss sign
  double t_min = 0.0;
  double t_max = 200.0;
  ActionMode action_mode = ActionMode::Full;
};

struct Transition {
  Vector s;
  Vector a;
  Vector s2;
  double r = 0.0;
  double d = 1.0;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity);
  void push(Transition t);
  int size() const { return size_; }
  int capacity() const { return capacity_; }
  const Transition& at(int i) const { return data_[static_cast<std::size_t>(i)]; }
  std::vector<int> sample_indices(std::mt19937_64& rng, int batch) const;

 private:
  std::vector<Transition> data_;
  int capacity_;
  int size_ = 0;
  int next_ = 0;
};

/// Fixed affine normalisation of flattened states, derived from the sampling
/// ranges so identical configs give identical inputs.
struct StateNormalizer {
  Vector center;
  Vector half;

  static StateNormalizer from_ranges(const SampleRanges& r);
  Vector apply(const Vector& raw) const;
  Matrix apply(const Matrix& raw) const;
};

/// Policy abstraction shared by the diffusion variants and the Gaussian
/// baseline. States are pre-normalised.
class Actor {
 public:
  virtual ~Actor() = default;
  virtual int action_dim() const = 0;
  /// Stochastic sample from the online policy.
  virtual Matrix act(const Matrix& states, std::mt19937_64& rng) const = 0;
  /// Deterministic action from the target policy (inference).
  virtual Matrix act_eval(const Matrix& states) const = 0;
  /// Stochastic target-policy sample with approximate log-probs.
  virtual std::pair<Matrix, Vector> act_target(const Matrix& states,
                                               std::mt19937_64& rng) const = 0;
  /// Differentiable online sample; keeps internal caches for update().
  virtual std::pair<Matrix, Vector> sample_for_update(const Matrix& states,
                                                      std::mt19937_64& rng) = 0;
  /// One optimizer step given dLoss/dAction of the recorded sample;
  /// entropy_coeff multiplies the log-prob inside the loss.
  virtual void update(const Matrix& dL_dA, double entropy_coeff) = 0;
  virtual void soft_update_target(double tau) = 0;
  /// Recompute and install structured masks (no-op for the Gaussian actor).
  virtual void prune(double rate) { (void)rate; }
  virtual double masked_frac() const { return 0.0; }
  virtual bool finite() const = 0;
  /// Hexfloat dump of every parameter (online and target) for bitwise checks.
  virtual std::string param_digest() const = 0;
  /// Write the inference policy (target, compact-exported when pruned).
  virtual void save_inference(std::ostream& os) const = 0;
  /// Online denoiser, when the policy is diffusion-based (tests, pruning).
  virtual const Denoiser* denoiser() const { return nullptr; }
};

std::unique_ptr<Actor> make_actor(const TrainerConfig& cfg, int action_dim, int state_dim,
                                  std::mt19937_64& init_rng);

struct TwinCritics {
  nn::Mlp q1, q2, tq1, tq2;
  nn::Adam opt1, opt2;

  TwinCritics() = default;
  TwinCritics(int in_dim, const TrainerConfig& cfg, std::mt19937_64& rng);
};

struct TrainLogRow {
  int step = 0;
  double eval_mean = 0.0;
  double eval_std = 0.0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double masked_fraction = 0.0;
};

/// Loaded inference policy: enough to map states to raw actions.
struct PolicySnapshot {
  Variant variant = Variant::Edmsac;
  ActionMode mode = ActionMode::Full;
  int k_types = 2;
  StateNormalizer norm;
  DiffusionPolicy diffusion;  // edmsac / dmsac
  nn::Mlp gaussian;           // gsac

  Vector act(const Vector& state_flat) const;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  bool diverged = false;
  double final_eval_mean = 0.0;
  double final_eval_std = 0.0;
  std::vector<EnvState> eval_states;
  std::string param_digest;
  std::string checkpoint;  // serialized inference policy + metadata
};

/// Off-policy loop: generate transitions, recompute masks, update the actor
/// then the twin critics on one minibatch, soft-update the targets.
class Trainer {
 public:
  Trainer(const TrainerConfig& cfg, const SampleRanges& ranges);

  void collect();
  void prune_step();
  std::vector<int> draw_batch();
  double actor_update(const std::vector<int>& idx);
  double critic_update(const std::vector<int>& idx);
  void soft_updates();
  /// One full training step; returns false once the run has diverged.
  bool step();

  std::pair<double, double> evaluate_policy() const;
  TrainResult finish();

  int steps_done() const { return step_; }
  bool diverged() const { return diverged_; }
  const std::vector<TrainLogRow>& log() const { return log_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  ReplayBuffer& buffer() { return buffer_; }
  Actor& actor() { return *actor_; }
  TwinCritics& critics() { return critics_; }
  const StateNormalizer& normalizer() const { return norm_; }
  const std::vector<EnvState>& eval_states() const { return eval_states_; }

 private:
  TrainerConfig cfg_;
  SampleRanges ranges_;
  std::unique_ptr<Actor> actor_;
  TwinCritics critics_;
  StateNormalizer norm_;
  ContractEnv env_;
  ReplayBuffer buffer_;
  std::mt19937_64 explore_rng_, batch_rng_, update_rng_, target_rng_;
  std::vector<EnvState> eval_states_;
  Matrix eval_norm_states_;
  std::vector<TrainLogRow> log_;
  int step_ = 0;
  bool diverged_ = false;
  double last_actor_loss_ = 0.0;
  double last_critic_loss_ = 0.0;
};

TrainResult train(const TrainerConfig& cfg, const SampleRanges& ranges);

PolicySnapshot load_checkpoint(std::istream& is);

/// Mean penalty-based reward of the snapshot's deterministic actions on the
/// given states.
double mean_policy_reward(const PolicySnapshot& snap, const std::vector<EnvState>& states,
                          double lambda, double t_min, double t_max);

/// The frozen eval-state set for a config (independent of the training seed).
std::vector<EnvState> make_eval_states(const TrainerConfig& cfg, const SampleRanges& ranges);

}  // namespace clab
