#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace clab::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Array = Eigen::ArrayXd;

enum class Act { Identity, Mish, Tanh };

const char* act_name(Act a);
Act act_from_name(const std::string& s);

Matrix activate(Act a, const Matrix& z);
Matrix activate_grad(Act a, const Matrix& z);

/// Fully connected layer with gradient accumulators and an optional
/// structured row mask. Masking keeps the dense parameters intact: the
/// effective weights used by forward/backward have the masked rows zeroed,
/// masked rows receive no gradient and no optimizer update, so they can
/// return later if their importance recovers.
struct Dense {
  Matrix w;  // out x in
  Vector b;
  Act act = Act::Identity;
  Matrix gw;
  Vector gb;
  Array row_mask;  // empty = dense; else 1 keep / 0 prune
  Matrix w_eff;
  Vector b_eff;

  Dense() = default;
  Dense(int in, int out, Act a);

  int in_dim() const { return static_cast<int>(w.cols()); }
  int out_dim() const { return static_cast<int>(w.rows()); }
  bool masked() const { return row_mask.size() != 0; }
  void set_row_mask(Array mask);
  void clear_row_mask();
  void sync_mask();  // refresh the masked copies after the dense params change
  const Matrix& weights() const { return masked() ? w_eff : w; }
  const Vector& bias() const { return masked() ? b_eff : b; }
  void zero_grad();
};

/// Per-forward-pass cache for the backward sweep.
struct Tape {
  std::vector<Matrix> x;  // input of each layer
  std::vector<Matrix> z;  // preactivation of each layer
};

struct Mlp {
  std::vector<Dense> layers;

  Mlp() = default;
  /// widths = {in, h1, ..., out}; acts has one entry per layer.
  Mlp(const std::vector<int>& widths, const std::vector<Act>& acts);

  int in_dim() const { return layers.front().in_dim(); }
  int out_dim() const { return layers.back().out_dim(); }

  Matrix forward(const Matrix& x, Tape* tape = nullptr) const;
  /// Reverse sweep over a recorded pass: accumulates parameter gradients and
  /// returns dLoss/dInput.
  Matrix backward(const Tape& tape, const Matrix& dy);
  void zero_grad();
  void init_glorot(std::mt19937_64& rng, double final_layer_scale = 1.0);
  std::size_t param_count() const;
  bool finite() const;
};

void soft_update(const Mlp& online, Mlp& target, double tau);

/// Adam with decoupled weight decay. Masked rows get exactly zero update.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  long t = 0;
  std::vector<Matrix> mw, vw;
  std::vector<Vector> mb, vb;

  void step(Mlp& net);
};

/// Interleaved sine/cosine features with geometrically spaced frequencies.
Vector sinusoidal_embed(int step, int width);

void save_mlp(std::ostream& os, const Mlp& net, const std::string& name);
Mlp load_mlp(std::istream& is, std::string* name = nullptr);

}  // namespace clab::nn
