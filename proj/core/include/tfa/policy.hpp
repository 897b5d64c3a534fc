#pragma once

#include <Eigen/Core>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tfa/align.hpp"
#include "tfa/sim.hpp"

namespace tfa {

struct FlowConfig {
  int horizon = 8;        // action chunk length
  int exec_steps = 4;     // receding-horizon prefix executed per replan
  double delta = 0.1;     // Euler step size
  int euler_steps = 10;   // euler_steps * delta must equal 1
  int ctx_dim = 8;
  int n_ctx = 4;
  int hidden = 128;
  int res_blocks = 2;
  int steps = 2500;
  int batch = 64;
  double lr = 1e-3;
  double action_limit = 5.0;  // newtons per control step, enforced at execution
  std::uint64_t seed = 1;
};

/// Velocity-field network on concatenated (a_tau, tau, ctx, z_tac, q).
struct PolicyNet {
  FlowConfig cfg;
  int z_dim = 0;  // tactile embedding width (0 disables the channel entirely)
  int q_dim = 2;
  bool use_tactile = true;  // false zeroes z_tac at train and eval time
  nn::Var ctx_table;
  nn::Var w_in, b_in;
  std::vector<std::pair<nn::Var, nn::Var>> res;  // tanh residual blocks
  nn::Var w_out, b_out;

  nn::ParamMap params() const;
  int feature_dim() const { return cfg.horizon + 1 + cfg.ctx_dim + z_dim + q_dim; }
};

PolicyNet make_policy(const FlowConfig& cfg, int z_dim, bool use_tactile, std::uint64_t seed);

/// a^tau = tau * a + (1 - tau) * u, elementwise.
Eigen::VectorXd flow_interpolate(const Eigen::VectorXd& a, const Eigen::VectorXd& u, double tau);

/// One training sample: observation features plus the expert chunk.
struct PolicySample {
  int ctx_id = 0;
  Eigen::VectorXd z_tac;  // may be empty when the policy has no tactile channel
  Eigen::VectorXd q;
  Eigen::VectorXd action;  // horizon
};

/// Batch velocity prediction (differentiable).
nn::Var policy_velocity(const PolicyNet& net, const nn::Var& a_tau, const Eigen::VectorXd& taus,
                        const std::vector<int>& ctx_ids, const Eigen::MatrixXd& z_tac,
                        const Eigen::MatrixXd& q);

/// Flow-matching loss: mean over the batch of |v - (a - u)|^2 with one
/// (tau, u) draw per element.
nn::Var fm_loss(const PolicyNet& net, std::span<const PolicySample> batch, Rng& rng);

using VelocityField = std::function<Eigen::VectorXd(const Eigen::VectorXd& a, double tau)>;

/// Euler integration of a velocity field from a0 at tau=0 to tau=1.
Eigen::VectorXd euler_integrate(const VelocityField& field, Eigen::VectorXd a0, int steps,
                                double delta);

/// Draws A0 ~ N(0, I) from rng and integrates the policy's field.
Eigen::VectorXd sample_action(const PolicyNet& net, int ctx_id, const Eigen::VectorXd& z_tac,
                              const Eigen::VectorXd& q, Rng& rng);

// ---------------------------------------------------------------------------
// Grip-force environment: hidden mass/friction, tactile-only observability.
// ---------------------------------------------------------------------------

struct GripEnvConfig {
  std::vector<double> masses{0.3, 0.8, 2.0};  // kg, drawn uniformly
  double mu_lo = 0.45, mu_hi = 0.55;
  double gravity = 9.81;
  double success_margin = 0.1;  // success needs g >= (1+margin)*g_req
  double crush_factor = 1.8;    // crush when g > crush_factor*g_req
  int episode_steps = 36;
  int approach_steps = 3;
  int lift_step = 15;       // load ramp starts at this step
  int load_ramp_steps = 6;  // steps until the object's full weight is carried
  int expert_react_steps = 2;  // expert holds the staging grip this long into the lift
  int slip_sustain = 6;     // consecutive over-limit steps before gross slip
  double stage_grip = 3.5;  // mass-independent pre-lift staging force
  double max_rate = 5.0;    // newtons per control step
  int window = kDefaultWindow;

  // Contact rendering: a flat tip on a marker sensor, scaled so grip forces
  // land inside the adapter's training indentation range.
  std::string sensor_id = "cb-7x7";
  double contact_stiffness = 2.1e8;
  double flat_halfwidth = 6e-3;
  double shear_cap = 1.5e-3;
};

struct GripEnvState {
  double mass = 0.0;
  double mu = 0.5;
  double grip = 0.0;
  bool slip = false;
  bool crush = false;
  int phase = 0;  // 0 approach, 1 grasp, 2 lift
  int t = 0;
};

class GripEnv {
 public:
  GripEnv(const GripEnvConfig& cfg, std::uint64_t seed);

  void reset(std::uint64_t seed);
  /// Applies one grip increment (clamped to +-max_rate) and advances one
  /// 30 Hz control step; renders the resulting tactile frame.
  void step(double grip_increment);

  const GripEnvConfig& config() const { return cfg_; }
  const GripEnvState& state() const { return state_; }
  bool done() const { return state_.t >= cfg_.episode_steps; }
  bool success() const;
  double g_required() const;  // m*g/(2*mu)
  double g_crush() const { return cfg_.crush_factor * g_required(); }
  double load_per_finger() const;  // current load share, newtons
  double utilization() const;      // load / (mu * grip)

  Eigen::VectorXd proprio() const;  // (width, grip), feature-scaled
  /// Last `window` frames, oldest first, front-padded with the first frame.
  std::vector<TactileImage> recent_frames() const;

 private:
  void render_frame();

  GripEnvConfig cfg_;
  GripEnvState state_;
  Indenter tip_;
  const SensorVariant* sensor_;
  double prev_depth_ = 0.0;
  int slip_counter_ = 0;
  std::deque<TactileImage> frames_;
};

/// Grip target the expert ramps toward once the load is active.
double expert_grip_target(double mass, double mu, double gravity);

/// Next-horizon increments of the scripted expert from the env's current
/// state (full state access: mass and friction are known to the expert).
Eigen::VectorXd expert_chunk(const GripEnv& env, const FlowConfig& flow);

/// Demonstration episodes: tactile frames plus per-step expert chunks and
/// proprioception, stored in the standard container with extra arrays.
std::vector<Episode> collect_demos(const GripEnvConfig& env_cfg, const FlowConfig& flow,
                                   int n_episodes, std::uint64_t seed);

std::vector<PolicySample> demos_to_samples(std::span<const Episode> demos, const Adapter& adapter,
                                           const FlowConfig& flow, bool use_tactile);

struct PolicyTrainResult {
  std::vector<MetricsRecord> log;
};
PolicyTrainResult train_policy(PolicyNet& net, std::span<const PolicySample> samples,
                               const std::string& run_id);

struct RolloutRecord {
  std::uint64_t seed = 0;
  bool success = false;
  double final_grip = 0.0;
  bool slip = false, crush = false;
};

struct EvalResult {
  double success_rate = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // Wilson 95% interval
  std::vector<RolloutRecord> records;
};

/// Seeded closed-loop rollouts with receding-horizon execution. Pass
/// adapter=nullptr (or a net with use_tactile=false) for the
/// proprioception-only variant.
EvalResult evaluate_policy(const PolicyNet& net, const Adapter* adapter,
                           const GripEnvConfig& env_cfg, int episodes, std::uint64_t seed);

/// Scripted-expert rollouts (optionally with execution noise), for oracle
/// success-rate checks.
EvalResult evaluate_expert(const GripEnvConfig& env_cfg, const FlowConfig& flow, int episodes,
                           std::uint64_t seed, double exec_noise = 0.0);

/// Uniform-random action policy, the floor reference.
EvalResult evaluate_random_policy(const GripEnvConfig& env_cfg, int episodes, std::uint64_t seed);

std::pair<double, double> wilson_interval(int successes, int n);

// Policy checkpoints share the versioned blob format.
Blob policy_to_blob(const PolicyNet& net);
PolicyNet policy_from_blob(const Blob& blob);
void save_policy(const PolicyNet& net, const std::filesystem::path& path);
PolicyNet load_policy(const std::filesystem::path& path);

}  // namespace tfa
