#include "clab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "clab/rng.hpp"

namespace clab {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Edmsac: return "edmsac";
    case Variant::Dmsac: return "dmsac";
    case Variant::Gsac: return "gsac";
  }
  return "edmsac";
}

Variant variant_from_name(const std::string& s) {
  if (s == "edmsac") return Variant::Edmsac;
  if (s == "dmsac") return Variant::Dmsac;
  if (s == "gsac") return Variant::Gsac;
  throw std::invalid_argument("unknown variant: " + s);
}

ReplayBuffer::ReplayBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw std::invalid_argument("replay capacity must be >= 1");
  data_.resize(static_cast<std::size_t>(capacity));
}

void ReplayBuffer::push(Transition t) {
  data_[static_cast<std::size_t>(next_)] = std::move(t);
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

std::vector<int> ReplayBuffer::sample_indices(std::mt19937_64& rng, int batch) const {
  if (size_ == 0) throw std::logic_error("replay buffer is empty");
  std::uniform_int_distribution<int> pick(0, size_ - 1);
  std::vector<int> idx(static_cast<std::size_t>(batch));
  for (auto& i : idx) i = pick(rng);
  return idx;
}

StateNormalizer StateNormalizer::from_ranges(const SampleRanges& r) {
  const int k = r.k_types;
  StateNormalizer n;
  n.center.resize(state_dim(k));
  n.half.resize(state_dim(k));
  auto set = [&](int i, double lo, double hi) {
    n.center[i] = 0.5 * (lo + hi);
    n.half[i] = hi > lo ? 0.5 * (hi - lo) : 1.0;
  };
  int at = 0;
  set(at++, r.n_servers, r.n_servers);
  set(at++, k, k);
  set(at++, r.sigma_lo, r.sigma_hi);
  set(at++, r.p_dbm_lo, r.p_dbm_hi);
  set(at++, r.rate_lo / 1e6, r.rate_hi / 1e6);
  set(at++, r.ec_lo, r.ec_hi);
  for (int i = 0; i < k; ++i) set(at++, 0.0, 1.0);  // p1
  const double theta_hi = r.theta_lo + r.band_width * k;
  for (int i = 0; i < 2 * k; ++i) set(at++, r.theta_lo, theta_hi);  // theta1, theta2
  for (int i = 0; i < k * k; ++i) set(at++, 0.0, 1.0);              // p2
  return n;
}

Vector StateNormalizer::apply(const Vector& raw) const {
  return ((raw - center).array() / half.array()).matrix();
}

Matrix StateNormalizer::apply(const Matrix& raw) const {
  return ((raw.colwise() - center).array().colwise() / half.array()).matrix();
}

// ---------------------------------------------------------------------------
// Diffusion actor (EDMSAC / DMSAC)
// ---------------------------------------------------------------------------

namespace {

class DiffusionActor final : public Actor {
 public:
  DiffusionActor(int action_dim, int state_dim, const TrainerConfig& cfg,
                 std::mt19937_64& rng) {
    online_.net = Denoiser(action_dim, state_dim, cfg.hidden, cfg.emb_width, rng);
    online_.sched = vp_schedule(cfg.denoise_steps, cfg.eps_min, cfg.eps_max);
    target_ = online_;
    opt_trunk_.lr = cfg.actor_lr;
    opt_trunk_.weight_decay = cfg.weight_decay;
    opt_time_.lr = cfg.actor_lr;
    opt_time_.weight_decay = cfg.weight_decay;
  }

  int action_dim() const override { return online_.net.action_dim; }

  Matrix act(const Matrix& states, std::mt19937_64& rng) const override {
    return online_.sample(states, &rng).actions;
  }

  Matrix act_eval(const Matrix& states) const override {
    return target_.sample(states, nullptr).actions;
  }

  std::pair<Matrix, Vector> act_target(const Matrix& states,
                                       std::mt19937_64& rng) const override {
    auto res = target_.sample(states, &rng);
    return {std::move(res.actions), std::move(res.logp)};
  }

  std::pair<Matrix, Vector> sample_for_update(const Matrix& states,
                                              std::mt19937_64& rng) override {
    auto res = online_.sample_cached(states, &rng, cache_);
    return {std::move(res.actions), std::move(res.logp)};
  }

  void update(const Matrix& dL_dA, double entropy_coeff) override {
    online_.net.zero_grad();
    online_.backward_chain(cache_, dL_dA, entropy_coeff);
    opt_trunk_.step(online_.net.trunk);
    opt_time_.step(online_.net.time_mlp);
  }

  void soft_update_target(double tau) override {
    nn::soft_update(online_.net.trunk, target_.net.trunk, tau);
    nn::soft_update(online_.net.time_mlp, target_.net.time_mlp, tau);
  }

  void prune(double rate) override {
    const MaskSet online_masks = build_masks(online_.net, rate);
    apply_masks(online_.net, online_masks);
    last_masks_ = online_masks;
    const MaskSet target_masks = build_masks(target_.net, rate);
    apply_masks(target_.net, target_masks);
  }

  double masked_frac() const override { return masked_fraction(online_.net); }

  bool finite() const override { return online_.net.finite() && target_.net.finite(); }

  std::string param_digest() const override {
    std::ostringstream os;
    nn::save_mlp(os, online_.net.trunk, "online_trunk");
    nn::save_mlp(os, online_.net.time_mlp, "online_time");
    nn::save_mlp(os, target_.net.trunk, "target_trunk");
    nn::save_mlp(os, target_.net.time_mlp, "target_time");
    return os.str();
  }

  void save_inference(std::ostream& os) const override {
    // Inference uses the target policy; export it compactly when pruned.
    Denoiser compact = target_.net.prunable_layers().front()->masked()
                           ? compact_export(target_.net, build_masks_current(target_.net))
                           : target_.net;
    os << "diffusion steps=" << online_.sched.steps() << " action_dim=" << compact.action_dim
       << " state_dim=" << compact.state_dim << " emb=" << compact.emb_width << "\n";
    const auto flags = os.flags();
    os << std::hexfloat;
    for (int i = 0; i < online_.sched.steps(); ++i) os << (i ? " " : "") << online_.sched.eps[i];
    os << "\n";
    os.flags(flags);
    nn::save_mlp(os, compact.time_mlp, "time");
    nn::save_mlp(os, compact.trunk, "trunk");
  }

  const Denoiser* denoiser() const override { return &online_.net; }

 private:
  static MaskSet build_masks_current(const Denoiser& net) {
    MaskSet m;
    m.rate = -1.0;  // marker: taken from the installed row masks
    for (const nn::Dense* l : net.prunable_layers())
      m.rows.push_back(l->masked() ? l->row_mask : nn::Array::Ones(l->out_dim()));
    return m;
  }

  DiffusionPolicy online_;
  DiffusionPolicy target_;
  DiffusionPolicy::ChainCache cache_;
  nn::Adam opt_trunk_, opt_time_;
  MaskSet last_masks_;
};

// ---------------------------------------------------------------------------
// Tanh-Gaussian actor (GSAC baseline)
// ---------------------------------------------------------------------------

constexpr double kLogStdMin = -5.0;
constexpr double kLogStdMax = 2.0;
constexpr double kSquashEps = 1e-6;

class GaussianActor final : public Actor {
 public:
  GaussianActor(int action_dim, int state_dim, const TrainerConfig& cfg,
                std::mt19937_64& rng)
      : adim_(action_dim) {
    online_ = nn::Mlp({state_dim, cfg.hidden, cfg.hidden, 2 * action_dim},
                      {nn::Act::Mish, nn::Act::Mish, nn::Act::Identity});
    online_.init_glorot(rng, 0.01);
    target_ = online_;
    opt_.lr = cfg.actor_lr;
    opt_.weight_decay = cfg.weight_decay;
  }

  int action_dim() const override { return adim_; }

  Matrix act(const Matrix& states, std::mt19937_64& rng) const override {
    return sample_net(online_, states, &rng, nullptr, nullptr, nullptr, nullptr);
  }

  Matrix act_eval(const Matrix& states) const override {
    return sample_net(target_, states, nullptr, nullptr, nullptr, nullptr, nullptr);
  }

  std::pair<Matrix, Vector> act_target(const Matrix& states,
                                       std::mt19937_64& rng) const override {
    Vector logp;
    Matrix a = sample_net(target_, states, &rng, nullptr, nullptr, nullptr, &logp);
    return {std::move(a), std::move(logp)};
  }

  std::pair<Matrix, Vector> sample_for_update(const Matrix& states,
                                              std::mt19937_64& rng) override {
    Vector logp;
    cache_actions_ =
        sample_net(online_, states, &rng, &cache_tape_, &cache_out_, &cache_xi_, &logp);
    return {cache_actions_, logp};
  }

  void update(const Matrix& dL_dA, double entropy_coeff) override {
    const int d = adim_;
    const int batch = static_cast<int>(cache_actions_.cols());
    Matrix dout = Matrix::Zero(2 * d, batch);
    for (int c = 0; c < batch; ++c)
      for (int r = 0; r < d; ++r) {
        const double a = cache_actions_(r, c);
        const double one_m_a2 = 1.0 - a * a;
        const double ls = std::clamp(cache_out_(d + r, c), kLogStdMin, kLogStdMax);
        const double sigma = std::exp(ls);
        const double xi = cache_xi_(r, c);
        const double g = dL_dA(r, c);
        const double corr = 2.0 * a * one_m_a2 / (one_m_a2 + kSquashEps);
        // d/dmean
        dout(r, c) = g * one_m_a2 + entropy_coeff * corr;
        // d/dlogstd (zero outside the clamp range)
        if (cache_out_(d + r, c) > kLogStdMin && cache_out_(d + r, c) < kLogStdMax)
          dout(d + r, c) =
              g * one_m_a2 * sigma * xi + entropy_coeff * (corr * sigma * xi - 1.0);
      }
    online_.zero_grad();
    online_.backward(cache_tape_, dout);
    opt_.step(online_);
  }

  void soft_update_target(double tau) override { nn::soft_update(online_, target_, tau); }

  bool finite() const override { return online_.finite() && target_.finite(); }

  std::string param_digest() const override {
    std::ostringstream os;
    nn::save_mlp(os, online_, "online");
    nn::save_mlp(os, target_, "target");
    return os.str();
  }

  void save_inference(std::ostream& os) const override {
    os << "gaussian action_dim=" << adim_ << " state_dim=" << online_.in_dim() << "\n";
    nn::save_mlp(os, target_, "policy");
  }

 private:
  // Shared forward: returns tanh(mean + std * xi); deterministic when rng is
  // null. Optionally records the tape/outputs/noise and per-column log-probs.
  Matrix sample_net(const nn::Mlp& net, const Matrix& states, std::mt19937_64* rng,
                    nn::Tape* tape, Matrix* out_cache, Matrix* xi_cache,
                    Vector* logp) const {
    const int d = adim_;
    const Matrix out = net.forward(states, tape);
    const int batch = static_cast<int>(states.cols());
    Matrix xi = Matrix::Zero(d, batch);
    if (rng) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (int c = 0; c < batch; ++c)
        for (int r = 0; r < d; ++r) xi(r, c) = normal(*rng);
    }
    Matrix a(d, batch);
    if (logp) logp->setZero(batch);
    for (int c = 0; c < batch; ++c)
      for (int r = 0; r < d; ++r) {
        const double mean = out(r, c);
        const double ls = std::clamp(out(d + r, c), kLogStdMin, kLogStdMax);
        const double sigma = std::exp(ls);
        const double u = mean + sigma * xi(r, c);
        a(r, c) = std::tanh(u);
        if (logp) {
          const double one_m_a2 = 1.0 - a(r, c) * a(r, c);
          (*logp)[c] += -0.5 * xi(r, c) * xi(r, c) - ls -
                        0.5 * std::log(2.0 * std::numbers::pi_v<double>) -
                        std::log(one_m_a2 + kSquashEps);
        }
      }
    if (out_cache) *out_cache = out;
    if (xi_cache) *xi_cache = xi;
    return a;
  }

  int adim_;
  nn::Mlp online_, target_;
  nn::Adam opt_;
  nn::Tape cache_tape_;
  Matrix cache_out_, cache_xi_, cache_actions_;
};

}  // namespace

std::unique_ptr<Actor> make_actor(const TrainerConfig& cfg, int action_dim, int state_dim_in,
                                  std::mt19937_64& init_rng) {
  if (cfg.variant == Variant::Gsac)
    return std::make_unique<GaussianActor>(action_dim, state_dim_in, cfg, init_rng);
  return std::make_unique<DiffusionActor>(action_dim, state_dim_in, cfg, init_rng);
}

TwinCritics::TwinCritics(int in_dim, const TrainerConfig& cfg, std::mt19937_64& rng) {
  const std::vector<int> widths{in_dim, cfg.hidden, cfg.hidden, 1};
  const std::vector<nn::Act> acts{nn::Act::Mish, nn::Act::Mish, nn::Act::Identity};
  q1 = nn::Mlp(widths, acts);
  q2 = nn::Mlp(widths, acts);
  q1.init_glorot(rng);
  q2.init_glorot(rng);
  tq1 = q1;
  tq2 = q2;
  opt1.lr = opt2.lr = cfg.critic_lr;
  opt1.weight_decay = opt2.weight_decay = cfg.weight_decay;
}

namespace {

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace

Vector PolicySnapshot::act(const Vector& state_flat) const {
  const Vector s = norm.apply(state_flat);
  if (variant == Variant::Gsac) {
    const Matrix out = gaussian.forward(s);
    const int d = static_cast<int>(out.rows()) / 2;
    Vector a(d);
    for (int r = 0; r < d; ++r) a[r] = std::tanh(out(r, 0));
    return a;
  }
  return diffusion.sample(s, nullptr).actions.col(0);
}

std::vector<EnvState> make_eval_states(const TrainerConfig& cfg, const SampleRanges& ranges) {
  auto rng = make_rng(cfg.eval_seed, "eval-states");
  std::vector<EnvState> out;
  out.reserve(static_cast<std::size_t>(cfg.eval_states));
  for (int i = 0; i < cfg.eval_states; ++i) out.push_back(sample_state(rng, ranges));
  return out;
}

double mean_policy_reward(const PolicySnapshot& snap, const std::vector<EnvState>& states,
                          double lambda, double t_min, double t_max) {
  double acc = 0.0;
  for (const auto& st : states) {
    const Vector a = snap.act(st.flat);
    acc += eval_action(st, a, lambda, t_min, t_max, snap.mode).reward;
  }
  return states.empty() ? 0.0 : acc / static_cast<double>(states.size());
}

Trainer::Trainer(const TrainerConfig& cfg, const SampleRanges& ranges)
    : cfg_(cfg),
      ranges_(ranges),
      norm_(StateNormalizer::from_ranges(ranges)),
      env_(ranges, cfg.seed, cfg.lambda, cfg.t_min, cfg.t_max, cfg.action_mode,
           cfg.transitions_per_step),
      buffer_(cfg.buffer_capacity),
      explore_rng_(make_rng(cfg.seed, "explore")),
      batch_rng_(make_rng(cfg.seed, "batch")),
      update_rng_(make_rng(cfg.seed, "update")),
      target_rng_(make_rng(cfg.seed, "target")) {
  const int sdim = state_dim(ranges.k_types);
  const int adim = action_dim(ranges.k_types, cfg.action_mode);
  auto init_rng = make_rng(cfg.seed, "init");
  actor_ = make_actor(cfg, adim, sdim, init_rng);
  critics_ = TwinCritics(sdim + adim, cfg, init_rng);
  eval_states_ = make_eval_states(cfg, ranges);
  eval_norm_states_.resize(sdim, static_cast<int>(eval_states_.size()));
  for (std::size_t i = 0; i < eval_states_.size(); ++i)
    eval_norm_states_.col(static_cast<int>(i)) = norm_.apply(eval_states_[i].flat);
}

void Trainer::collect() {
  for (int z = 0; z < cfg_.transitions_per_step; ++z) {
    const EnvState cur = env_.state();
    const Matrix a = actor_->act(norm_.apply(cur.flat), explore_rng_);
    const auto stepped = env_.step(a.col(0));
    Transition tr;
    tr.s = cur.flat;
    tr.a = a.col(0);
    tr.s2 = env_.state().flat;
    tr.r = stepped.outcome.reward;
    tr.d = stepped.done;
    buffer_.push(std::move(tr));
  }
}

void Trainer::prune_step() {
  if (cfg_.variant == Variant::Gsac) return;
  actor_->prune(cfg_.variant == Variant::Edmsac ? cfg_.prune_rate : 0.0);
}

std::vector<int> Trainer::draw_batch() {
  return buffer_.sample_indices(batch_rng_, cfg_.batch);
}

double Trainer::actor_update(const std::vector<int>& idx) {
  const int batch = static_cast<int>(idx.size());
  const int sdim = state_dim(ranges_.k_types);
  const int adim = actor_->action_dim();
  Matrix S(sdim, batch);
  for (int i = 0; i < batch; ++i) S.col(i) = buffer_.at(idx[static_cast<std::size_t>(i)]).s;
  const Matrix Sn = norm_.apply(S);

  auto [a0, logp] = actor_->sample_for_update(Sn, update_rng_);
  const Matrix x = stack(Sn, a0);
  nn::Tape tape1, tape2;
  const Matrix q1 = critics_.q1.forward(x, &tape1);
  const Matrix q2 = critics_.q2.forward(x, &tape2);
  Matrix dy1 = Matrix::Zero(1, batch), dy2 = Matrix::Zero(1, batch);
  double loss = 0.0;
  const double sign = cfg_.paper_actor_sign ? -1.0 : 1.0;
  for (int i = 0; i < batch; ++i) {
    const double qmin = std::min(q1(0, i), q2(0, i));
    loss += (sign * cfg_.kappa * logp[i] - qmin) / batch;
    if (q1(0, i) <= q2(0, i))
      dy1(0, i) = -1.0 / batch;
    else
      dy2(0, i) = -1.0 / batch;
  }
  critics_.q1.zero_grad();
  critics_.q2.zero_grad();
  const Matrix dx = critics_.q1.backward(tape1, dy1) + critics_.q2.backward(tape2, dy2);
  actor_->update(dx.bottomRows(adim), sign * cfg_.kappa / batch);
  last_actor_loss_ = loss;
  return loss;
}

double Trainer::critic_update(const std::vector<int>& idx) {
  const int batch = static_cast<int>(idx.size());
  const int sdim = state_dim(ranges_.k_types);
  const int adim = actor_->action_dim();
  Matrix S(sdim, batch), A(adim, batch), S2(sdim, batch);
  Vector r(batch), d(batch);
  for (int i = 0; i < batch; ++i) {
    const Transition& t = buffer_.at(idx[static_cast<std::size_t>(i)]);
    S.col(i) = t.s;
    A.col(i) = t.a;
    S2.col(i) = t.s2;
    r[i] = t.r * cfg_.reward_scale;
    d[i] = t.d;
  }
  const Matrix Sn = norm_.apply(S);

  Vector y(batch);
  if ((d.array() < 0.5).any()) {
    const Matrix S2n = norm_.apply(S2);
    auto [a2, logp2] = actor_->act_target(S2n, target_rng_);
    const Matrix x2 = stack(S2n, a2);
    const Matrix tq1 = critics_.tq1.forward(x2);
    const Matrix tq2 = critics_.tq2.forward(x2);
    for (int i = 0; i < batch; ++i) {
      const double qmin = std::min(tq1(0, i), tq2(0, i));
      y[i] = r[i] + cfg_.gamma * (1.0 - d[i]) * (qmin - cfg_.kappa * logp2[i]);
    }
  } else {
    y = r;  // every transition terminal: the target is the reward itself
  }
  const Matrix x = stack(Sn, A);
  nn::Tape tape1, tape2;
  const Matrix q1 = critics_.q1.forward(x, &tape1);
  const Matrix q2 = critics_.q2.forward(x, &tape2);
  Matrix dy1(1, batch), dy2(1, batch);
  double loss = 0.0;
  for (int i = 0; i < batch; ++i) {
    const double e1 = q1(0, i) - y[i];
    const double e2 = q2(0, i) - y[i];
    loss += (e1 * e1 + e2 * e2) / batch;
    dy1(0, i) = 2.0 * e1 / batch;
    dy2(0, i) = 2.0 * e2 / batch;
  }
  critics_.q1.zero_grad();
  critics_.q2.zero_grad();
  critics_.q1.backward(tape1, dy1);
  critics_.q2.backward(tape2, dy2);
  critics_.opt1.step(critics_.q1);
  critics_.opt2.step(critics_.q2);
  last_critic_loss_ = loss;
  return loss;
}

void Trainer::soft_updates() {
  actor_->soft_update_target(cfg_.tau);
  nn::soft_update(critics_.q1, critics_.tq1, cfg_.tau);
  nn::soft_update(critics_.q2, critics_.tq2, cfg_.tau);
}

std::pair<double, double> Trainer::evaluate_policy() const {
  const Matrix actions = actor_->act_eval(eval_norm_states_);
  const int n = static_cast<int>(eval_states_.size());
  double mean = 0.0, m2 = 0.0;
  std::vector<double> rewards(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    rewards[static_cast<std::size_t>(i)] =
        eval_action(eval_states_[static_cast<std::size_t>(i)], actions.col(i), cfg_.lambda,
                    cfg_.t_min, cfg_.t_max, cfg_.action_mode)
            .reward;
    mean += rewards[static_cast<std::size_t>(i)];
  }
  mean /= n;
  for (double rw : rewards) m2 += (rw - mean) * (rw - mean);
  return {mean, std::sqrt(m2 / n)};
}

bool Trainer::step() {
  if (diverged_) return false;
  ++step_;
  collect();
  prune_step();
  const auto idx = draw_batch();
  actor_update(idx);
  critic_update(idx);
  soft_updates();

  if (!std::isfinite(last_actor_loss_) || !std::isfinite(last_critic_loss_) ||
      !actor_->finite()) {
    diverged_ = true;
    return false;
  }
  if (step_ % cfg_.eval_every == 0 || step_ == cfg_.steps) {
    const auto [mean, stddev] = evaluate_policy();
    TrainLogRow row;
    row.step = step_;
    row.eval_mean = mean;
    row.eval_std = stddev;
    row.actor_loss = last_actor_loss_;
    row.critic_loss = last_critic_loss_;
    row.masked_fraction = actor_->masked_frac();
    log_.push_back(row);
  }
  return true;
}

TrainResult Trainer::finish() {
  TrainResult result;
  result.log = log_;
  result.diverged = diverged_;
  result.eval_states = eval_states_;
  if (!log_.empty()) {
    result.final_eval_mean = log_.back().eval_mean;
    result.final_eval_std = log_.back().eval_std;
  }
  result.param_digest = actor_->param_digest();
  std::ostringstream os;
  os << "contractlab-checkpoint v1\n";
  os << "variant " << variant_name(cfg_.variant) << "\n";
  os << "action_mode " << (cfg_.action_mode == ActionMode::Full ? "full" : "shared")
     << "\n";
  os << "k_types " << ranges_.k_types << "\n";
  const auto flags = os.flags();
  os << std::hexfloat;
  os << "norm_center";
  for (int i = 0; i < norm_.center.size(); ++i) os << " " << norm_.center[i];
  os << "\nnorm_half";
  for (int i = 0; i < norm_.half.size(); ++i) os << " " << norm_.half[i];
  os << "\n";
  os.flags(flags);
  actor_->save_inference(os);
  result.checkpoint = os.str();
  return result;
}

TrainResult train(const TrainerConfig& cfg, const SampleRanges& ranges) {
  Trainer trainer(cfg, ranges);
  for (int step = 1; step <= cfg.steps; ++step)
    if (!trainer.step()) break;
  return trainer.finish();
}

PolicySnapshot load_checkpoint(std::istream& is) {
  PolicySnapshot snap;
  std::string tag, version;
  is >> tag >> version;
  if (tag != "contractlab-checkpoint" || version != "v1")
    throw std::runtime_error("checkpoint: unsupported header");
  std::string key;
  is >> key;
  std::string variant_s;
  is >> variant_s;
  snap.variant = variant_from_name(variant_s);
  std::string mode_s;
  is >> key >> mode_s;
  snap.mode = mode_s == "shared" ? ActionMode::Shared : ActionMode::Full;
  is >> key >> snap.k_types;
  const int sdim = state_dim(snap.k_types);
  snap.norm.center.resize(sdim);
  snap.norm.half.resize(sdim);
  is >> key;  // norm_center
  for (int i = 0; i < sdim; ++i) {
    std::string tok;
    is >> tok;
    snap.norm.center[i] = std::strtod(tok.c_str(), nullptr);
  }
  is >> key;  // norm_half
  for (int i = 0; i < sdim; ++i) {
    std::string tok;
    is >> tok;
    snap.norm.half[i] = std::strtod(tok.c_str(), nullptr);
  }
  std::string kind;
  is >> kind;
  if (kind == "gaussian") {
    std::string a, s;
    is >> a >> s;
    snap.gaussian = nn::load_mlp(is);
  } else if (kind == "diffusion") {
    std::string steps_tok, a, s, e;
    is >> steps_tok >> a >> s >> e;
    const int steps = std::stoi(steps_tok.substr(6));
    snap.diffusion.sched.eps.resize(steps);
    snap.diffusion.sched.chi.resize(steps);
    snap.diffusion.sched.chi_bar.resize(steps);
    double prod = 1.0;
    for (int i = 0; i < steps; ++i) {
      std::string tok;
      is >> tok;
      snap.diffusion.sched.eps[i] = std::strtod(tok.c_str(), nullptr);
      snap.diffusion.sched.chi[i] = 1.0 - snap.diffusion.sched.eps[i];
      prod *= snap.diffusion.sched.chi[i];
      snap.diffusion.sched.chi_bar[i] = prod;
    }
    snap.diffusion.net.emb_width = std::stoi(e.substr(4));
    snap.diffusion.net.action_dim = std::stoi(a.substr(11));
    snap.diffusion.net.state_dim = std::stoi(s.substr(10));
    snap.diffusion.net.time_mlp = nn::load_mlp(is);
    snap.diffusion.net.trunk = nn::load_mlp(is);
  } else {
    throw std::runtime_error("checkpoint: unknown policy kind " + kind);
  }
  return snap;
}

}  // namespace clab
