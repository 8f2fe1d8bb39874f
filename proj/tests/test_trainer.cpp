#include <doctest.h>

#include <random>
#include <sstream>

#include "clab/oracle.hpp"
#include "clab/rng.hpp"
#include "clab/trainer.hpp"

using namespace clab;

namespace {

TrainerConfig small_config(Variant v, std::uint64_t seed) {
  TrainerConfig cfg;
  cfg.variant = v;
  cfg.seed = seed;
  cfg.steps = 30;
  cfg.batch = 32;
  cfg.hidden = 48;
  cfg.eval_states = 8;
  cfg.eval_every = 10;
  return cfg;
}

SampleRanges k2_ranges() {
  SampleRanges r;
  r.k_types = 2;
  return r;
}

}  // namespace

TEST_CASE("replay buffer ring semantics") {
  ReplayBuffer buf(10);
  auto tr = [](double r) {
    Transition t;
    t.s = Vector::Constant(2, r);
    t.a = Vector::Constant(1, r);
    t.s2 = Vector::Constant(2, r);
    t.r = r;
    t.d = 1.0;
    return t;
  };
  buf.push(tr(0.0));
  CHECK(buf.size() == 1);
  for (int i = 1; i < 15; ++i) buf.push(tr(i));
  CHECK(buf.size() == 10);
  // oldest five evicted: remaining rewards are 5..14
  double lo = 1e9, hi = -1e9;
  for (int i = 0; i < buf.size(); ++i) {
    lo = std::min(lo, buf.at(i).r);
    hi = std::max(hi, buf.at(i).r);
  }
  CHECK(lo == 5.0);
  CHECK(hi == 14.0);
}

TEST_CASE("replay sampling is uniform") {
  ReplayBuffer buf(100);
  for (int i = 0; i < 100; ++i) {
    Transition t;
    t.s = Vector::Constant(1, i);
    t.a = Vector::Zero(1);
    t.s2 = Vector::Zero(1);
    t.r = i;
    buf.push(std::move(t));
  }
  std::mt19937_64 rng(12345);
  std::vector<int> counts(100, 0);
  const int draws = 100000;
  for (int i = 0; i < draws / 100; ++i)
    for (int idx : buf.sample_indices(rng, 100)) ++counts[static_cast<std::size_t>(idx)];
  const double expect = draws / 100.0;
  const double sigma = std::sqrt(expect * (1.0 - 1.0 / 100.0));
  for (int c : counts) CHECK(std::abs(c - expect) <= 4.0 * sigma);
}

TEST_CASE("training is a deterministic function of config and seed") {
  const TrainerConfig cfg = small_config(Variant::Edmsac, 3);
  const TrainResult a = train(cfg, k2_ranges());
  const TrainResult b = train(cfg, k2_ranges());
  CHECK(a.param_digest == b.param_digest);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].eval_mean == b.log[i].eval_mean);
    CHECK(a.log[i].critic_loss == b.log[i].critic_loss);
  }
}

TEST_CASE("EDMSAC with zero pruning is bitwise-identical to DMSAC") {
  TrainerConfig e = small_config(Variant::Edmsac, 5);
  e.prune_rate = 0.0;
  TrainerConfig d = small_config(Variant::Dmsac, 5);
  d.prune_rate = 0.5;  // ignored: DMSAC forces zero
  const TrainResult re = train(e, k2_ranges());
  const TrainResult rd = train(d, k2_ranges());
  CHECK(re.param_digest == rd.param_digest);
  REQUIRE(re.log.size() == rd.log.size());
  for (std::size_t i = 0; i < re.log.size(); ++i) {
    CHECK(re.log[i].eval_mean == rd.log[i].eval_mean);
    CHECK(re.log[i].actor_loss == rd.log[i].actor_loss);
    CHECK(re.log[i].critic_loss == rd.log[i].critic_loss);
  }
  // sanity: actual pruning changes the trajectory
  TrainerConfig ep = small_config(Variant::Edmsac, 5);
  ep.prune_rate = 0.5;
  CHECK(train(ep, k2_ranges()).param_digest != rd.param_digest);
}

TEST_CASE("terminal-only batches ignore gamma") {
  // With horizon 1 every stored transition is terminal, so the TD target is
  // the reward itself and gamma cannot matter.
  TrainerConfig a = small_config(Variant::Dmsac, 7);
  a.gamma = 0.99;
  TrainerConfig b = a;
  b.gamma = 0.0;
  CHECK(train(a, k2_ranges()).param_digest == train(b, k2_ranges()).param_digest);
}

TEST_CASE("identically initialized twin critics stay identical") {
  TrainerConfig cfg = small_config(Variant::Dmsac, 9);
  Trainer t(cfg, k2_ranges());
  t.critics().q2 = t.critics().q1;
  t.critics().tq2 = t.critics().tq1;
  for (int i = 0; i < 10; ++i) t.step();
  std::ostringstream s1, s2;
  nn::save_mlp(s1, t.critics().q1, "q");
  nn::save_mlp(s2, t.critics().q2, "q");
  CHECK(s1.str() == s2.str());
}

TEST_CASE("masked rows receive no update during training") {
  TrainerConfig cfg = small_config(Variant::Edmsac, 11);
  cfg.prune_rate = 0.5;
  Trainer t(cfg, k2_ranges());
  t.collect();
  t.prune_step();
  const Denoiser* net = t.actor().denoiser();
  REQUIRE(net != nullptr);
  const nn::Dense& layer = *net->prunable_layers().front();
  REQUIRE(layer.masked());
  // snapshot masked rows, run the updates, compare
  std::vector<int> masked_rows;
  for (int r = 0; r < layer.out_dim(); ++r)
    if (layer.row_mask[r] == 0.0) masked_rows.push_back(r);
  REQUIRE(!masked_rows.empty());
  const Matrix before = layer.w;
  const auto idx = t.draw_batch();
  t.actor_update(idx);
  for (int r : masked_rows)
    CHECK(layer.w.row(r) == before.row(r));
  // and at least one surviving row moved
  bool any_moved = false;
  for (int r = 0; r < layer.out_dim(); ++r)
    if (layer.row_mask[r] == 1.0 && layer.w.row(r) != before.row(r)) any_moved = true;
  CHECK(any_moved);
}

TEST_CASE("policy drifts toward zero action under a quadratic penalty critic") {
  // kappa = 0 and an analytic critic Q = -|a|^2: the chain mean must shrink.
  const int sdim = state_dim(2);
  TrainerConfig cfg = small_config(Variant::Dmsac, 13);
  cfg.kappa = 0.0;
  cfg.actor_lr = 1e-3;
  auto init = make_rng(13, "init");
  auto actor = make_actor(cfg, 6, sdim, init);
  std::mt19937_64 rng = make_rng(13, "toy");
  Matrix states = Matrix::Random(sdim, 16);

  auto det_norm = [&]() { return actor->act_eval(states).squaredNorm() / 16.0; };
  const double initial = det_norm();
  double loss_first = 0.0, loss_last = 0.0;
  for (int step = 0; step < 100; ++step) {
    auto [a0, logp] = actor->sample_for_update(states, rng);
    const double loss = a0.squaredNorm() / 16.0;  // -mean Q
    if (step == 0) loss_first = loss;
    loss_last = loss;
    const Matrix dl = 2.0 * a0 / 16.0;  // d(-Q)/da
    actor->update(dl, 0.0);
  }
  CHECK(loss_last < loss_first);
  CHECK(det_norm() < 0.5 * initial);

  SUBCASE("zero learning rate leaves the policy unchanged") {
    TrainerConfig frozen = cfg;
    frozen.actor_lr = 0.0;
    auto init2 = make_rng(13, "init");
    auto still = make_actor(frozen, 6, sdim, init2);
    const std::string before = still->param_digest();
    auto [a0, logp] = still->sample_for_update(states, rng);
    still->update(Matrix::Ones(6, 16), 0.0);
    CHECK(still->param_digest() == before);
  }
}

TEST_CASE("divergence is detected and reported") {
  TrainerConfig cfg = small_config(Variant::Dmsac, 17);
  cfg.actor_lr = 1e25;
  cfg.critic_lr = 1e25;
  const TrainResult res = train(cfg, k2_ranges());
  CHECK(res.diverged);
}

TEST_CASE("checkpoints round-trip and reproduce the final evaluation") {
  for (Variant v : {Variant::Edmsac, Variant::Gsac}) {
    TrainerConfig cfg = small_config(v, 19);
    const TrainResult res = train(cfg, k2_ranges());
    std::istringstream in(res.checkpoint);
    const PolicySnapshot snap = load_checkpoint(in);
    const double mean = mean_policy_reward(snap, res.eval_states, cfg.lambda, cfg.t_min,
                                           cfg.t_max);
    CHECK(mean == doctest::Approx(res.final_eval_mean).epsilon(1e-6));
  }
}

TEST_CASE("frozen eval states are shared across training seeds") {
  TrainerConfig a = small_config(Variant::Dmsac, 21);
  TrainerConfig b = small_config(Variant::Dmsac, 22);
  const auto sa = make_eval_states(a, k2_ranges());
  const auto sb = make_eval_states(b, k2_ranges());
  REQUIRE(sa.size() == sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].flat == sb[i].flat);
}

TEST_CASE("gaussian actor learns the quadratic toy task too") {
  const int sdim = state_dim(2);
  TrainerConfig cfg = small_config(Variant::Gsac, 23);
  cfg.kappa = 0.0;
  cfg.actor_lr = 1e-3;
  auto init = make_rng(23, "init");
  auto actor = make_actor(cfg, 6, sdim, init);
  std::mt19937_64 rng = make_rng(23, "toy");
  Matrix states = Matrix::Random(sdim, 16);
  const double initial = actor->act_eval(states).squaredNorm();
  for (int step = 0; step < 200; ++step) {
    auto [a0, logp] = actor->sample_for_update(states, rng);
    actor->update(2.0 * a0 / 16.0, 0.0);
  }
  CHECK(actor->act_eval(states).squaredNorm() < 0.5 * initial);
}

TEST_CASE("behaviour cloning through the differentiable chain") {
  // Train the denoiser so the chain regresses a fixed target action from any
  // state; exercises the complete backward path before any RL enters.
  const int d = 3, sdim = 4, batch = 32;
  std::mt19937_64 init(61);
  DiffusionPolicy p;
  p.net = Denoiser(d, sdim, 128, 16, init);
  p.sched = vp_schedule(6, 0.1, 10.0);
  Vector target(d);
  target << 0.5, -0.3, 0.2;

  nn::Adam opt_trunk, opt_time;
  opt_trunk.lr = opt_time.lr = 1.5e-3;
  std::mt19937_64 rng(71);
  std::normal_distribution<double> normal(0.0, 1.0);
  DiffusionPolicy::ChainCache cache;
  const int steps = 4000;
  for (int step = 0; step < steps; ++step) {
    if (step == steps * 3 / 5) opt_trunk.lr = opt_time.lr = 3e-4;
    if (step == steps * 6 / 7) opt_trunk.lr = opt_time.lr = 1e-4;
    Matrix states(sdim, batch);
    for (int c = 0; c < batch; ++c)
      for (int r = 0; r < sdim; ++r) states(r, c) = normal(rng);
    const auto res = p.sample_cached(states, &rng, cache);
    const Matrix dl = (res.actions.colwise() - target) / batch;
    p.net.zero_grad();
    p.backward_chain(cache, dl, 0.0);
    opt_trunk.step(p.net.trunk);
    opt_time.step(p.net.time_mlp);
  }

  Matrix fresh(sdim, 64);
  for (int c = 0; c < 64; ++c)
    for (int r = 0; r < sdim; ++r) fresh(r, c) = normal(rng);
  const auto out = p.sample(fresh, nullptr);
  CHECK((out.actions.colwise() - target).cwiseAbs().mean() <= 0.05);
}
