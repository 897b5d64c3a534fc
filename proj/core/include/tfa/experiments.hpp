#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "tfa/align.hpp"
#include "tfa/policy.hpp"
#include "tfa/sim.hpp"

namespace tfa {

/// Declarative dataset recipe: episodes round-robin over the sensor and
/// indenter lists, one derived seed per episode.
struct GenConfig {
  int episodes = 200;
  std::vector<std::string> sensors{"cb-plain", "cb-4x4", "cb-7x7", "cb-9x9", "gs-plain"};
  std::vector<std::string> indenters;  // empty = full library
  double duration_s = 2.0;
  TrajectoryConfig traj;
  std::uint64_t seed = 7;
};

std::vector<Episode> generate_dataset(const GenConfig& cfg);

/// Pooled std of the viscous term over the recipe's indenter mix.
double viscous_floor(const GenConfig& cfg, int n_trajectories = 48, std::uint64_t seed = 0x5d);

/// Frozen-model evaluation bundle shared by the ablation and cross-sensor
/// harnesses. The probe is fitted on training-split embeddings.
struct RunEval {
  double top1 = 0.0, top5 = 0.0;
  Eigen::Matrix<double, 6, 1> probe_rmse_channels = Eigen::Matrix<double, 6, 1>::Zero();
  double probe_rmse_norm = 0.0;  // channel-std-normalized aggregate
  double fz_rmse = 0.0;          // newtons, normal-force channel
  double ppl_pmap = 0.0, ppl_wrench = 0.0;
  double recon_val = 0.0;  // combined reconstruction error on held-out windows
};

RunEval evaluate_adapter(Adapter& adapter, std::span<const Episode> episodes,
                         const EpisodeSplit& split, int b_eval, std::uint64_t seed);

struct AblationSpec {
  enum class Variant { kNoHistory, kSmallCodebook, kSharedCodebook, kLabelNoise };
  Variant variant = Variant::kNoHistory;
  double sigma_frac = 1.0;  // label-noise variant only
};
AblationSpec parse_ablation(const std::string& name, double sigma_frac);
std::string ablation_name(const AblationSpec& spec);

/// Applies the single factor the variant changes; everything else (seed,
/// budget, data) is shared with the reference.
AlignConfig apply_ablation(const AlignConfig& base, const AblationSpec& spec);

struct AblationReport {
  std::string variant_name;
  RunEval reference, variant;
  double viscous_floor = 0.0;  // no-history variant
  double fz_gap = 0.0;         // variant fz_rmse - reference fz_rmse
  double top1_delta = 0.0;     // reference top1 - variant top1
};

AblationReport run_ablation(const AblationSpec& spec, const AlignConfig& base,
                            const GenConfig& data, std::uint64_t seed);

struct CrossSensorReport {
  std::vector<std::string> train_sensors;
  std::string held_out;
  double adapter_top1_seen = 0.0, adapter_top1_unseen = 0.0;
  double adapter_rmse_seen = 0.0, adapter_rmse_unseen = 0.0, adapter_ratio = 0.0;
  double regression_rmse_seen = 0.0, regression_rmse_unseen = 0.0, regression_ratio = 0.0;
};

CrossSensorReport run_cross_sensor(const std::vector<std::string>& train_sensors,
                                   const std::string& held_out, const AlignConfig& base,
                                   const GenConfig& data, std::uint64_t seed);

struct DataEfficiencyPoint {
  int budget = 0;
  double tactile_rate = 0.0, tactile_lo = 0.0, tactile_hi = 0.0;
  double proprio_rate = 0.0, proprio_lo = 0.0, proprio_hi = 0.0;
};

struct DataEfficiencyReport {
  std::vector<DataEfficiencyPoint> points;
};

DataEfficiencyReport run_data_efficiency(const std::vector<int>& budgets,
                                         const GripEnvConfig& env_cfg, const FlowConfig& flow,
                                         const Adapter& adapter, int eval_episodes,
                                         std::uint64_t seed);

/// Trains one policy pair (tactile + proprio-only) on shared demos.
struct PolicyPairResult {
  EvalResult tactile, proprio;
};
PolicyPairResult train_and_eval_policy_pair(std::span<const Episode> demos,
                                            const GripEnvConfig& env_cfg, const FlowConfig& flow,
                                            const Adapter& adapter, int eval_episodes,
                                            std::uint64_t seed);

// JSON (de)serialization of reports for the CLI and plot emission.
void write_ablation_report(const AblationReport& r, const std::filesystem::path& path);
void write_cross_sensor_report(const CrossSensorReport& r, const std::filesystem::path& path);
void write_data_efficiency_report(const DataEfficiencyReport& r, const std::filesystem::path& path);

}  // namespace tfa
