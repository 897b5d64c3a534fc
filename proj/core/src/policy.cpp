#include "tfa/policy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "tfa/common.hpp"
#include "tfa/nn/optim.hpp"

namespace tfa {

using nn::Var;

nn::ParamMap PolicyNet::params() const {
  nn::ParamMap p;
  p.add("policy.ctx_table", ctx_table);
  p.add("policy.w_in", w_in);
  p.add("policy.b_in", b_in);
  for (size_t i = 0; i < res.size(); ++i) {
    p.add("policy.res_w" + std::to_string(i), res[i].first);
    p.add("policy.res_b" + std::to_string(i), res[i].second);
  }
  p.add("policy.w_out", w_out);
  p.add("policy.b_out", b_out);
  return p;
}

PolicyNet make_policy(const FlowConfig& cfg, int z_dim, bool use_tactile, std::uint64_t seed) {
  if (std::abs(cfg.euler_steps * cfg.delta - 1.0) > 1e-9) {
    throw ConfigError("policy: euler_steps * delta must equal 1");
  }
  Rng rng(derive_seed(seed, 0x90));
  PolicyNet net;
  net.cfg = cfg;
  net.z_dim = z_dim;
  net.use_tactile = use_tactile;
  net.ctx_table = nn::leaf(0.1 * nn::xavier_init(cfg.n_ctx, cfg.ctx_dim, rng));
  net.w_in = nn::leaf(nn::xavier_init(net.feature_dim(), cfg.hidden, rng));
  net.b_in = nn::leaf(nn::Mat::Zero(1, cfg.hidden));
  for (int i = 0; i < cfg.res_blocks; ++i) {
    net.res.emplace_back(nn::leaf(nn::xavier_init(cfg.hidden, cfg.hidden, rng)),
                         nn::leaf(nn::Mat::Zero(1, cfg.hidden)));
  }
  net.w_out = nn::leaf(nn::xavier_init(cfg.hidden, cfg.horizon, rng));
  net.b_out = nn::leaf(nn::Mat::Zero(1, cfg.horizon));
  return net;
}

Eigen::VectorXd flow_interpolate(const Eigen::VectorXd& a, const Eigen::VectorXd& u, double tau) {
  if (a.size() != u.size()) throw ShapeError("flow_interpolate: size mismatch");
  if (tau < 0.0 || tau > 1.0) throw ConfigError("flow_interpolate: tau must lie in [0, 1]");
  return tau * a + (1.0 - tau) * u;
}

nn::Var policy_velocity(const PolicyNet& net, const nn::Var& a_tau, const Eigen::VectorXd& taus,
                        const std::vector<int>& ctx_ids, const Eigen::MatrixXd& z_tac,
                        const Eigen::MatrixXd& q) {
  const Eigen::Index b = a_tau->val.rows();
  if (taus.size() != b || static_cast<Eigen::Index>(ctx_ids.size()) != b || q.rows() != b) {
    throw ShapeError("policy_velocity: batch sizes disagree");
  }
  Var ctx = nn::gather_rows(net.ctx_table, ctx_ids);
  Eigen::MatrixXd rest(b, 1 + net.z_dim + net.q_dim);
  rest.col(0) = taus;
  if (net.z_dim > 0) {
    if (z_tac.rows() != b || z_tac.cols() != net.z_dim) {
      throw ShapeError("policy_velocity: z_tac shape mismatch");
    }
    rest.middleCols(1, net.z_dim) = net.use_tactile ? z_tac : Eigen::MatrixXd::Zero(b, net.z_dim);
  }
  rest.rightCols(net.q_dim) = q;

  Var x = nn::concat_cols(nn::concat_cols(a_tau, nn::constant(rest)), ctx);
  Var h = nn::tanh_v(nn::linear(x, net.w_in, net.b_in));
  for (const auto& [w, bb] : net.res) {
    h = nn::add(h, nn::tanh_v(nn::linear(h, w, bb)));
  }
  return nn::linear(h, net.w_out, net.b_out);
}

nn::Var fm_loss(const PolicyNet& net, std::span<const PolicySample> batch, Rng& rng) {
  const int b = static_cast<int>(batch.size());
  if (b == 0) throw EmptyInputError("fm_loss: empty batch");
  const int h = net.cfg.horizon;

  Eigen::MatrixXd a_tau(b, h), target(b, h), z(b, std::max(net.z_dim, 1)), q(b, net.q_dim);
  Eigen::VectorXd taus(b);
  std::vector<int> ctx(static_cast<size_t>(b));
  for (int i = 0; i < b; ++i) {
    const PolicySample& s = batch[static_cast<size_t>(i)];
    if (s.action.size() != h) throw ShapeError("fm_loss: action horizon mismatch");
    if (!s.action.allFinite() || !s.q.allFinite()) throw NumericalError("fm_loss: non-finite sample");
    Eigen::VectorXd u(h);
    for (int k = 0; k < h; ++k) u[k] = gaussian(rng);
    const double tau = uniform01(rng);
    a_tau.row(i) = flow_interpolate(s.action, u, tau).transpose();
    target.row(i) = (s.action - u).transpose();
    taus[i] = tau;
    ctx[static_cast<size_t>(i)] = s.ctx_id;
    if (net.z_dim > 0) z.row(i) = s.z_tac.transpose();
    q.row(i) = s.q.transpose();
  }
  Var v = policy_velocity(net, nn::constant(a_tau), taus, ctx, z.leftCols(net.z_dim), q);
  return nn::scale(nn::sum_sq(nn::sub(v, nn::constant(target))), 1.0 / b);
}

Eigen::VectorXd euler_integrate(const VelocityField& field, Eigen::VectorXd a0, int steps,
                                double delta) {
  if (std::abs(steps * delta - 1.0) > 1e-9) {
    throw ConfigError("euler_integrate: steps * delta must equal 1");
  }
  for (int i = 0; i < steps; ++i) {
    const double tau = i * delta;
    a0 += delta * field(a0, tau);
  }
  return a0;
}

Eigen::VectorXd sample_action(const PolicyNet& net, int ctx_id, const Eigen::VectorXd& z_tac,
                              const Eigen::VectorXd& q, Rng& rng) {
  nn::NoGrad ng;
  const int h = net.cfg.horizon;
  Eigen::VectorXd a0(h);
  for (int k = 0; k < h; ++k) a0[k] = gaussian(rng);

  Eigen::MatrixXd z(1, std::max(net.z_dim, 1));
  if (net.z_dim > 0) z.row(0) = z_tac.transpose();
  Eigen::MatrixXd qm = q.transpose();
  const std::vector<int> ctx{ctx_id};

  VelocityField field = [&](const Eigen::VectorXd& a, double tau) {
    Eigen::VectorXd taus = Eigen::VectorXd::Constant(1, tau);
    Var v = policy_velocity(net, nn::constant(a.transpose()), taus, ctx, z.leftCols(net.z_dim), qm);
    return Eigen::VectorXd(v->val.row(0).transpose());
  };
  return euler_integrate(field, std::move(a0), net.cfg.euler_steps, net.cfg.delta);
}

// ---------------------------------------------------------------------------
// Environment
// ---------------------------------------------------------------------------

GripEnv::GripEnv(const GripEnvConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  sensor_ = &sensor_by_id(cfg.sensor_id);
  tip_.id = "env-flat";
  tip_.shape = Indenter::Shape::kFlat;
  tip_.size_m = cfg.flat_halfwidth;
  tip_.stiffness = cfg.contact_stiffness;
  tip_.damping = 0.0;
  tip_.friction = 0.8;
  reset(seed);
}

void GripEnv::reset(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xe2));
  state_ = GripEnvState{};
  state_.mass = cfg_.masses[static_cast<size_t>(uniform_int(rng, static_cast<int>(cfg_.masses.size())))];
  state_.mu = uniform(rng, cfg_.mu_lo, cfg_.mu_hi);
  slip_counter_ = 0;
  prev_depth_ = 0.0;
  frames_.clear();
  render_frame();
}

double GripEnv::g_required() const {
  return state_.mass * cfg_.gravity / (2.0 * state_.mu);
}

double GripEnv::load_per_finger() const {
  if (state_.t < cfg_.lift_step) return 0.0;
  const double frac =
      std::min(1.0, static_cast<double>(state_.t - cfg_.lift_step + 1) / cfg_.load_ramp_steps);
  return frac * state_.mass * cfg_.gravity / 2.0;
}

double GripEnv::utilization() const {
  const double load = load_per_finger();
  if (load <= 0.0) return 0.0;
  return load / (state_.mu * std::max(state_.grip, 1e-6));
}

void GripEnv::render_frame() {
  const double area = (2.0 * cfg_.flat_halfwidth) * (2.0 * cfg_.flat_halfwidth);
  const double depth = state_.grip / (cfg_.contact_stiffness * area);
  ContactState cs;
  cs.d = depth;
  cs.d_dot = (depth - prev_depth_) * kTactileRateHz;
  cs.shear << cfg_.shear_cap * std::min(utilization(), 1.3), 0.0;
  prev_depth_ = depth;
  frames_.push_back(render_tactile(cs, tip_, *sensor_));
  while (static_cast<int>(frames_.size()) > cfg_.window) frames_.pop_front();
}

void GripEnv::step(double grip_increment) {
  if (done()) throw ConfigError("GripEnv::step: episode already finished");
  const double inc = std::clamp(grip_increment, -cfg_.max_rate, cfg_.max_rate);
  ++state_.t;
  state_.phase = state_.t < cfg_.approach_steps ? 0 : (state_.t < cfg_.lift_step ? 1 : 2);
  if (state_.phase == 0) {
    state_.grip = 0.0;  // fingers still closing
  } else {
    state_.grip = std::max(0.0, state_.grip + inc);
  }

  if (state_.grip > g_crush()) state_.crush = true;
  if (state_.phase == 2 && utilization() >= 1.0) {
    if (++slip_counter_ >= cfg_.slip_sustain) state_.slip = true;
  } else {
    slip_counter_ = 0;
  }
  render_frame();
}

bool GripEnv::success() const {
  if (!done() || state_.slip || state_.crush) return false;
  const double lo = (1.0 + cfg_.success_margin) * g_required();
  return state_.grip >= lo && state_.grip <= g_crush();
}

Eigen::VectorXd GripEnv::proprio() const {
  const double area = (2.0 * cfg_.flat_halfwidth) * (2.0 * cfg_.flat_halfwidth);
  const double depth = state_.grip / (cfg_.contact_stiffness * area);
  const double width = 0.08 - 2.0 * depth;
  Eigen::VectorXd q(2);
  q << (width - 0.08) * 1000.0, state_.grip / 10.0;
  return q;
}

std::vector<TactileImage> GripEnv::recent_frames() const {
  std::vector<TactileImage> out;
  out.reserve(static_cast<size_t>(cfg_.window));
  const int pad = cfg_.window - static_cast<int>(frames_.size());
  for (int i = 0; i < pad; ++i) out.push_back(frames_.front());
  for (const TactileImage& f : frames_) out.push_back(f);
  return out;
}

double expert_grip_target(double mass, double mu, double gravity) {
  return mass * gravity / (2.0 * mu) * 1.3;
}

Eigen::VectorXd expert_chunk(const GripEnv& env, const FlowConfig& flow) {
  const GripEnvConfig& cfg = env.config();
  const GripEnvState& s = env.state();
  Eigen::VectorXd chunk(flow.horizon);
  double g = s.grip;
  for (int i = 0; i < flow.horizon; ++i) {
    const int t = s.t + i + 1;  // step index the increment lands on
    double inc = 0.0;
    if (t >= cfg.approach_steps) {
      // The expert reacts to the load rather than anticipating it, keeping
      // its pre-lift behavior mass-independent like the learner's.
      const double target = t >= cfg.lift_step + cfg.expert_react_steps
                                ? expert_grip_target(s.mass, s.mu, cfg.gravity)
                                : cfg.stage_grip;
      inc = std::clamp(target - g, -cfg.max_rate, cfg.max_rate);
    }
    chunk[i] = inc;
    if (t >= cfg.approach_steps) g = std::max(0.0, g + inc);
  }
  return chunk;
}

namespace {

Eigen::VectorXd z_for_frames(const Adapter& adapter, const std::vector<TactileImage>& frames) {
  Eigen::VectorXd z = encode_window(adapter.tactile, frames, adapter.norm.image_mean,
                                    adapter.norm.image_std);
  const double n = z.norm();
  return n > 1e-12 ? Eigen::VectorXd(z / n) : z;
}

}  // namespace

std::vector<Episode> collect_demos(const GripEnvConfig& env_cfg, const FlowConfig& flow,
                                   int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw ConfigError("collect_demos: need at least one episode");
  std::vector<Episode> demos;
  demos.reserve(static_cast<size_t>(n_episodes));
  GripEnv env(env_cfg, seed);

  for (int e = 0; e < n_episodes; ++e) {
    const std::uint64_t ep_seed = derive_seed(seed, static_cast<std::uint64_t>(e));
    env.reset(ep_seed);
    Rng noise(derive_seed(ep_seed, 0x401));

    Episode ep;
    ep.sensor_id = env_cfg.sensor_id;
    ep.indenter_id = "env-flat";
    ep.seed = ep_seed;
    ep.ctx_id = 0;
    ep.actions.resize(env_cfg.episode_steps, flow.horizon);
    ep.proprio.resize(env_cfg.episode_steps, 2);

    for (int t = 0; t < env_cfg.episode_steps; ++t) {
      const Eigen::VectorXd chunk = expert_chunk(env, flow);
      SyncedFrame frame;
      frame.t = t / kTactileRateHz;
      frame.sensor_id = env_cfg.sensor_id;
      frame.image = env.recent_frames().back();
      frame.pmap.taxel_area = taxel_area_m2();
      ep.frames.push_back(std::move(frame));
      ep.actions.row(t) = chunk.cast<float>().transpose();
      ep.proprio.row(t) = env.proprio().transpose();

      // Execute the first increment with small exploration noise; labels
      // stay the clean intended chunk recomputed at the reached state.
      env.step(chunk[0] + 0.1 * gaussian(noise));
    }
    demos.push_back(std::move(ep));
  }
  return demos;
}

std::vector<PolicySample> demos_to_samples(std::span<const Episode> demos, const Adapter& adapter,
                                           const FlowConfig& flow, bool use_tactile) {
  std::vector<PolicySample> out;
  const int n = adapter.cfg.window();
  for (const Episode& ep : demos) {
    if (ep.actions.rows() != ep.size() || ep.proprio.rows() != ep.size()) {
      throw ShapeError("demos_to_samples: episode lacks action/proprio arrays");
    }
    if (ep.actions.cols() != flow.horizon) {
      throw ShapeError("demos_to_samples: demo horizon differs from the flow config");
    }
    for (int t = 0; t < ep.size(); ++t) {
      PolicySample s;
      s.ctx_id = ep.ctx_id;
      // Window of the last n frames ending at t, front-padded at the start.
      std::vector<TactileImage> frames;
      frames.reserve(static_cast<size_t>(n));
      for (int j = n - 1; j >= 0; --j) frames.push_back(ep.frames[static_cast<size_t>(std::max(0, t - j))].image);
      s.z_tac = use_tactile ? z_for_frames(adapter, frames)
                            : Eigen::VectorXd::Zero(adapter.cfg.tactile.embed);
      s.q = ep.proprio.row(t).transpose();
      s.action = ep.actions.row(t).cast<double>().transpose();
      out.push_back(std::move(s));
    }
  }
  return out;
}

PolicyTrainResult train_policy(PolicyNet& net, std::span<const PolicySample> samples,
                               const std::string& run_id) {
  if (samples.size() < static_cast<size_t>(net.cfg.batch)) {
    throw ConfigError("train_policy: fewer samples than the batch size");
  }
  PolicyTrainResult result;
  Rng rng(derive_seed(net.cfg.seed, 0xf10));
  nn::Adam opt(net.cfg.lr);
  const std::vector<Var> params = net.params().vars();
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<PolicySample> batch(static_cast<size_t>(net.cfg.batch));
  for (int step = 0; step < net.cfg.steps; ++step) {
    for (int i = 0; i < net.cfg.batch; ++i) {
      batch[static_cast<size_t>(i)] = samples[static_cast<size_t>(uniform_int(rng, static_cast<int>(samples.size())))];
    }
    Var loss = fm_loss(net, batch, rng);
    const double lv = loss->val(0, 0);
    if (!std::isfinite(lv)) {
      throw NumericalError("train_policy: non-finite loss at step " + std::to_string(step));
    }
    nn::backward(loss);
    opt.step(params);
    nn::Adam::zero_grad(params);

    if (step % 50 == 0 || step + 1 == net.cfg.steps) {
      MetricsRecord rec;
      rec.run_id = run_id;
      rec.step = step;
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      rec.values = {{"l_fm", lv}};
      result.log.push_back(std::move(rec));
    }
  }
  return result;
}

std::pair<double, double> wilson_interval(int successes, int n) {
  if (n <= 0) throw ConfigError("wilson_interval: n must be positive");
  const double z = 1.959963984540054;
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace {

template <typename ActFn>
EvalResult run_rollouts(const GripEnvConfig& env_cfg, int episodes, std::uint64_t seed,
                        ActFn&& act) {
  EvalResult res;
  GripEnv env(env_cfg, seed);
  int hits = 0;
  for (int e = 0; e < episodes; ++e) {
    const std::uint64_t ep_seed = derive_seed(seed, static_cast<std::uint64_t>(e));
    env.reset(ep_seed);
    Rng rng(derive_seed(ep_seed, 0xac7));
    while (!env.done()) act(env, rng);

    RolloutRecord rec;
    rec.seed = ep_seed;
    rec.success = env.success();
    rec.final_grip = env.state().grip;
    rec.slip = env.state().slip;
    rec.crush = env.state().crush;
    if (rec.success) ++hits;
    res.records.push_back(rec);
  }
  res.success_rate = static_cast<double>(hits) / episodes;
  std::tie(res.ci_lo, res.ci_hi) = wilson_interval(hits, episodes);
  return res;
}

}  // namespace

EvalResult evaluate_policy(const PolicyNet& net, const Adapter* adapter,
                           const GripEnvConfig& env_cfg, int episodes, std::uint64_t seed) {
  if (net.use_tactile && adapter == nullptr) {
    throw ConfigError("evaluate_policy: tactile policy needs an adapter");
  }
  const int zdim = net.z_dim;
  return run_rollouts(env_cfg, episodes, seed, [&](GripEnv& env, Rng& rng) {
    Eigen::VectorXd z = Eigen::VectorXd::Zero(zdim);
    if (net.use_tactile && adapter != nullptr) {
      z = z_for_frames(*adapter, env.recent_frames());
    }
    const Eigen::VectorXd chunk = sample_action(net, 0, z, env.proprio(), rng);
    const int exec = std::min(net.cfg.exec_steps, net.cfg.horizon);
    for (int i = 0; i < exec && !env.done(); ++i) {
      env.step(std::clamp(chunk[i], -env_cfg.max_rate, env_cfg.max_rate));
    }
  });
}

EvalResult evaluate_expert(const GripEnvConfig& env_cfg, const FlowConfig& flow, int episodes,
                           std::uint64_t seed, double exec_noise) {
  return run_rollouts(env_cfg, episodes, seed, [&](GripEnv& env, Rng& rng) {
    const Eigen::VectorXd chunk = expert_chunk(env, flow);
    env.step(chunk[0] + exec_noise * gaussian(rng));
  });
}

EvalResult evaluate_random_policy(const GripEnvConfig& env_cfg, int episodes, std::uint64_t seed) {
  return run_rollouts(env_cfg, episodes, seed, [&](GripEnv& env, Rng& rng) {
    env.step(uniform(rng, -env_cfg.max_rate, env_cfg.max_rate));
  });
}

Blob policy_to_blob(const PolicyNet& net) {
  Blob blob;
  blob.set_scalar("cfg.horizon", net.cfg.horizon);
  blob.set_scalar("cfg.exec_steps", net.cfg.exec_steps);
  blob.set_scalar("cfg.delta", net.cfg.delta);
  blob.set_scalar("cfg.euler_steps", net.cfg.euler_steps);
  blob.set_scalar("cfg.ctx_dim", net.cfg.ctx_dim);
  blob.set_scalar("cfg.n_ctx", net.cfg.n_ctx);
  blob.set_scalar("cfg.hidden", net.cfg.hidden);
  blob.set_scalar("cfg.res_blocks", net.cfg.res_blocks);
  blob.set_scalar("cfg.action_limit", net.cfg.action_limit);
  blob.set_scalar("net.z_dim", net.z_dim);
  blob.set_scalar("net.use_tactile", net.use_tactile ? 1.0 : 0.0);
  for (const auto& [name, var] : net.params().items) blob.mats["param." + name] = var->val;
  return blob;
}

PolicyNet policy_from_blob(const Blob& blob) {
  FlowConfig cfg;
  cfg.horizon = static_cast<int>(blob.scalar("cfg.horizon"));
  cfg.exec_steps = static_cast<int>(blob.scalar("cfg.exec_steps"));
  cfg.delta = blob.scalar("cfg.delta");
  cfg.euler_steps = static_cast<int>(blob.scalar("cfg.euler_steps"));
  cfg.ctx_dim = static_cast<int>(blob.scalar("cfg.ctx_dim"));
  cfg.n_ctx = static_cast<int>(blob.scalar("cfg.n_ctx"));
  cfg.hidden = static_cast<int>(blob.scalar("cfg.hidden"));
  cfg.res_blocks = static_cast<int>(blob.scalar("cfg.res_blocks"));
  cfg.action_limit = blob.scalar("cfg.action_limit");

  PolicyNet net = make_policy(cfg, static_cast<int>(blob.scalar("net.z_dim")),
                              blob.scalar("net.use_tactile") != 0.0, /*seed=*/0);
  for (const auto& [name, var] : net.params().items) {
    const Eigen::MatrixXd& m = blob.mat("param." + name);
    if (m.rows() != var->val.rows() || m.cols() != var->val.cols()) {
      throw ShapeError("policy checkpoint: shape mismatch for " + name);
    }
    var->val = m;
  }
  return net;
}

void save_policy(const PolicyNet& net, const std::filesystem::path& path) {
  save_blob(policy_to_blob(net), path);
}

PolicyNet load_policy(const std::filesystem::path& path) { return policy_from_blob(load_blob(path)); }

}  // namespace tfa
