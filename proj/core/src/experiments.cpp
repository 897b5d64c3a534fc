#include "tfa/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "tfa/common.hpp"

namespace tfa {

using nlohmann::json;

std::vector<Episode> generate_dataset(const GenConfig& cfg) {
  if (cfg.episodes < 1) throw ConfigError("generate_dataset: episodes must be >= 1");
  if (cfg.sensors.empty()) throw ConfigError("generate_dataset: sensor list is empty");
  std::vector<std::string> indenters = cfg.indenters;
  if (indenters.empty()) {
    for (const Indenter& ind : indenter_library()) indenters.push_back(ind.id);
  }
  std::vector<Episode> out;
  out.reserve(static_cast<size_t>(cfg.episodes));
  for (int e = 0; e < cfg.episodes; ++e) {
    const SensorVariant& sensor = sensor_by_id(cfg.sensors[static_cast<size_t>(e) % cfg.sensors.size()]);
    const Indenter& ind = indenter_by_id(indenters[static_cast<size_t>(e) % indenters.size()]);
    TrajectoryConfig traj = cfg.traj;
    traj.duration_s = cfg.duration_s;
    out.push_back(simulate_episode(traj, ind, sensor, derive_seed(cfg.seed, static_cast<std::uint64_t>(e))));
  }
  return out;
}

double viscous_floor(const GenConfig& cfg, int n_trajectories, std::uint64_t seed) {
  std::vector<std::string> indenters = cfg.indenters;
  if (indenters.empty()) {
    for (const Indenter& ind : indenter_library()) indenters.push_back(ind.id);
  }
  TrajectoryConfig traj = cfg.traj;
  traj.duration_s = cfg.duration_s;
  double var_sum = 0.0;
  for (const std::string& id : indenters) {
    const double s = viscous_force_std(traj, indenter_by_id(id).damping, n_trajectories, seed);
    var_sum += s * s;
  }
  return std::sqrt(var_sum / static_cast<double>(indenters.size()));
}

RunEval evaluate_adapter(Adapter& adapter, std::span<const Episode> episodes,
                         const EpisodeSplit& split, int b_eval, std::uint64_t seed) {
  const int n = adapter.cfg.window();
  const std::vector<WindowRef> val_refs = collect_windows(episodes, split.val, n, n);
  std::vector<WindowRef> fit_refs = collect_windows(episodes, split.train, n, n);
  if (fit_refs.size() > 4000) fit_refs.resize(4000);

  RunEval ev;
  const RetrievalResult rr = retrieval_eval(adapter, episodes, val_refs,
                                            std::min<int>(b_eval, static_cast<int>(val_refs.size())), seed);
  ev.top1 = rr.top1;
  ev.top5 = rr.top5;

  const Eigen::MatrixXd z_fit = embed_windows(adapter, episodes, fit_refs);
  const Eigen::MatrixXd y_fit = final_wrench_targets(episodes, fit_refs, n);
  const RidgeProbe probe = fit_wrench_probe(z_fit, y_fit);

  const Eigen::MatrixXd z_val = embed_windows(adapter, episodes, val_refs);
  const Eigen::MatrixXd y_val = final_wrench_targets(episodes, val_refs, n);
  const Eigen::MatrixXd pred = probe_predict(probe, z_val);
  ev.probe_rmse_channels = wrench_rmse(pred, y_val);
  ev.probe_rmse_norm = wrench_rmse_normalized(pred, y_val, adapter.norm.wrench_std);
  ev.fz_rmse = ev.probe_rmse_channels[2];

  ev.ppl_pmap = codebook_perplexity(adapter.codec.book_pmap);
  ev.ppl_wrench = adapter.cfg.codec.shared_codebook
                      ? ev.ppl_pmap
                      : codebook_perplexity(adapter.codec.book_wrench);
  ev.recon_val = recon_error(adapter, episodes, val_refs);
  return ev;
}

AblationSpec parse_ablation(const std::string& name, double sigma_frac) {
  AblationSpec spec;
  spec.sigma_frac = sigma_frac;
  if (name == "no_history") {
    spec.variant = AblationSpec::Variant::kNoHistory;
  } else if (name == "small_codebook") {
    spec.variant = AblationSpec::Variant::kSmallCodebook;
  } else if (name == "shared_codebook") {
    spec.variant = AblationSpec::Variant::kSharedCodebook;
  } else if (name == "label_noise") {
    spec.variant = AblationSpec::Variant::kLabelNoise;
  } else {
    throw ConfigError("unknown ablation variant: " + name);
  }
  return spec;
}

std::string ablation_name(const AblationSpec& spec) {
  switch (spec.variant) {
    case AblationSpec::Variant::kNoHistory: return "no_history";
    case AblationSpec::Variant::kSmallCodebook: return "small_codebook";
    case AblationSpec::Variant::kSharedCodebook: return "shared_codebook";
    case AblationSpec::Variant::kLabelNoise: return "label_noise";
  }
  return "unknown";
}

AlignConfig apply_ablation(const AlignConfig& base, const AblationSpec& spec) {
  AlignConfig cfg = base;
  switch (spec.variant) {
    case AblationSpec::Variant::kNoHistory:
      cfg.tactile.window = 1;
      cfg.codec.window = 1;
      break;
    case AblationSpec::Variant::kSmallCodebook:
      cfg.codec.k_pmap = 4;
      cfg.codec.k_wrench = 4;
      break;
    case AblationSpec::Variant::kSharedCodebook:
      cfg.codec.shared_codebook = true;
      break;
    case AblationSpec::Variant::kLabelNoise:
      break;  // the data changes, not the architecture
  }
  return cfg;
}

AblationReport run_ablation(const AblationSpec& spec, const AlignConfig& base,
                            const GenConfig& data, std::uint64_t seed) {
  AblationReport report;
  report.variant_name = ablation_name(spec);

  const std::vector<Episode> clean = generate_dataset(data);

  AlignConfig ref_cfg = base;
  ref_cfg.seed = seed;
  AlignConfig var_cfg = apply_ablation(base, spec);
  var_cfg.seed = seed;
  if (ref_cfg.steps != var_cfg.steps || ref_cfg.batch != var_cfg.batch) {
    throw ConfigError("run_ablation: reference and variant budgets must match");
  }

  Adapter reference = make_adapter(ref_cfg, seed);
  train_adapter(reference, clean, "ablation-reference");
  EpisodeSplit split = split_by_episode(static_cast<int>(clean.size()), ref_cfg.val_fraction, seed);
  report.reference = evaluate_adapter(reference, clean, split, ref_cfg.probe_batch, seed);

  // The label-noise variant corrupts training-split labels only; evaluation
  // stays on clean data.
  std::vector<Episode> variant_data = clean;
  if (spec.variant == AblationSpec::Variant::kLabelNoise && spec.sigma_frac > 0.0) {
    const Normalization norm = compute_normalization(clean, split.train);
    for (int id : split.train) {
      variant_data[static_cast<size_t>(id)] =
          inject_label_noise(clean[static_cast<size_t>(id)], spec.sigma_frac, norm,
                             derive_seed(seed, 0xf00d));
    }
  }

  Adapter variant = make_adapter(var_cfg, seed);
  train_adapter(variant, variant_data, "ablation-" + report.variant_name);
  // Evaluation always runs on clean windows, whatever the variant trained on.
  report.variant = evaluate_adapter(variant, clean, split, var_cfg.probe_batch, seed);

  report.fz_gap = report.variant.fz_rmse - report.reference.fz_rmse;
  report.top1_delta = report.reference.top1 - report.variant.top1;
  if (spec.variant == AblationSpec::Variant::kNoHistory) {
    report.viscous_floor = viscous_floor(data);
  }
  return report;
}

CrossSensorReport run_cross_sensor(const std::vector<std::string>& train_sensors,
                                   const std::string& held_out, const AlignConfig& base,
                                   const GenConfig& data, std::uint64_t seed) {
  for (const std::string& s : train_sensors) {
    if (s == held_out) {
      throw ConfigError("cross-sensor: held-out sensor " + held_out + " found in training set");
    }
  }
  CrossSensorReport report;
  report.train_sensors = train_sensors;
  report.held_out = held_out;

  GenConfig train_gen = data;
  train_gen.sensors = train_sensors;
  const std::vector<Episode> train_eps = generate_dataset(train_gen);
  for (const Episode& ep : train_eps) {
    if (ep.sensor_id == held_out) {
      throw ConfigError("cross-sensor: leakage, held-out sensor present in training data");
    }
  }

  GenConfig unseen_gen = data;
  unseen_gen.sensors = {held_out};
  unseen_gen.episodes = std::max(8, data.episodes / 4);
  unseen_gen.seed = derive_seed(data.seed, 0xdead001);
  const std::vector<Episode> unseen_eps = generate_dataset(unseen_gen);

  AlignConfig cfg = base;
  cfg.seed = seed;
  const int n = cfg.window();

  Adapter adapter = make_adapter(cfg, seed);
  const AdapterTrainResult tr = train_adapter(adapter, train_eps, "cross-sensor-adapter");

  RegressionBaseline regression = make_regression_baseline(cfg, seed);
  train_regression_baseline(regression, train_eps, "cross-sensor-regression");

  const std::vector<WindowRef> seen_refs = collect_windows(train_eps, tr.split.val, n, n);
  std::vector<int> unseen_ids(unseen_eps.size());
  for (size_t i = 0; i < unseen_eps.size(); ++i) unseen_ids[i] = static_cast<int>(i);
  const std::vector<WindowRef> unseen_refs = collect_windows(unseen_eps, unseen_ids, n, n);

  std::vector<WindowRef> fit_refs = collect_windows(train_eps, tr.split.train, n, n);
  if (fit_refs.size() > 4000) fit_refs.resize(4000);
  const RidgeProbe probe = fit_wrench_probe(embed_windows(adapter, train_eps, fit_refs),
                                            final_wrench_targets(train_eps, fit_refs, n));

  const int b_eval = std::min<int>(
      {cfg.probe_batch, static_cast<int>(seen_refs.size()), static_cast<int>(unseen_refs.size())});
  report.adapter_top1_seen = retrieval_eval(adapter, train_eps, seen_refs, b_eval, seed).top1;
  report.adapter_top1_unseen = retrieval_eval(adapter, unseen_eps, unseen_refs, b_eval, seed).top1;

  auto probe_rmse_on = [&](std::span<const Episode> eps, std::span<const WindowRef> refs) {
    const Eigen::MatrixXd pred = probe_predict(probe, embed_windows(adapter, eps, refs));
    return wrench_rmse_normalized(pred, final_wrench_targets(eps, refs, n), adapter.norm.wrench_std);
  };
  report.adapter_rmse_seen = probe_rmse_on(train_eps, seen_refs);
  report.adapter_rmse_unseen = probe_rmse_on(unseen_eps, unseen_refs);
  report.adapter_ratio = report.adapter_rmse_unseen / report.adapter_rmse_seen;

  auto regression_rmse_on = [&](std::span<const Episode> eps, std::span<const WindowRef> refs) {
    const Eigen::MatrixXd pred = regression_predict_wrench(regression, eps, refs);
    return wrench_rmse_normalized(pred, final_wrench_targets(eps, refs, n), regression.norm.wrench_std);
  };
  report.regression_rmse_seen = regression_rmse_on(train_eps, seen_refs);
  report.regression_rmse_unseen = regression_rmse_on(unseen_eps, unseen_refs);
  report.regression_ratio = report.regression_rmse_unseen / report.regression_rmse_seen;
  return report;
}

PolicyPairResult train_and_eval_policy_pair(std::span<const Episode> demos,
                                            const GripEnvConfig& env_cfg, const FlowConfig& flow,
                                            const Adapter& adapter, int eval_episodes,
                                            std::uint64_t seed) {
  const std::vector<PolicySample> tactile_samples = demos_to_samples(demos, adapter, flow, true);
  const std::vector<PolicySample> proprio_samples = demos_to_samples(demos, adapter, flow, false);

  FlowConfig fc = flow;
  fc.seed = seed;
  PolicyNet tactile = make_policy(fc, adapter.cfg.tactile.embed, /*use_tactile=*/true, seed);
  PolicyNet proprio = make_policy(fc, adapter.cfg.tactile.embed, /*use_tactile=*/false, seed);
  train_policy(tactile, tactile_samples, "policy-tactile");
  train_policy(proprio, proprio_samples, "policy-proprio");

  PolicyPairResult out;
  const std::uint64_t eval_seed = derive_seed(seed, 0xe7a1);
  out.tactile = evaluate_policy(tactile, &adapter, env_cfg, eval_episodes, eval_seed);
  out.proprio = evaluate_policy(proprio, nullptr, env_cfg, eval_episodes, eval_seed);
  return out;
}

DataEfficiencyReport run_data_efficiency(const std::vector<int>& budgets,
                                         const GripEnvConfig& env_cfg, const FlowConfig& flow,
                                         const Adapter& adapter, int eval_episodes,
                                         std::uint64_t seed) {
  if (budgets.empty()) throw ConfigError("data-efficiency: empty budget list");
  for (size_t i = 0; i < budgets.size(); ++i) {
    if (budgets[i] <= 0) throw ConfigError("data-efficiency: budgets must be positive");
    if (i > 0 && budgets[i] <= budgets[i - 1]) {
      throw ConfigError("data-efficiency: budgets must be sorted ascending");
    }
  }
  // One demo pool; smaller budgets are prefixes, so runs stay paired.
  const std::vector<Episode> pool = collect_demos(env_cfg, flow, budgets.back(),
                                                  derive_seed(seed, 0xdee5));

  DataEfficiencyReport report;
  for (int budget : budgets) {
    const std::span<const Episode> demos(pool.data(), static_cast<size_t>(budget));
    const PolicyPairResult pair =
        train_and_eval_policy_pair(demos, env_cfg, flow, adapter, eval_episodes, seed);
    DataEfficiencyPoint p;
    p.budget = budget;
    p.tactile_rate = pair.tactile.success_rate;
    p.tactile_lo = pair.tactile.ci_lo;
    p.tactile_hi = pair.tactile.ci_hi;
    p.proprio_rate = pair.proprio.success_rate;
    p.proprio_lo = pair.proprio.ci_lo;
    p.proprio_hi = pair.proprio.ci_hi;
    report.points.push_back(p);
  }
  return report;
}

namespace {

void dump_json(const json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("report: cannot open " + path.string());
  os << j.dump(2) << "\n";
}

json run_eval_json(const RunEval& ev) {
  json j;
  j["top1"] = ev.top1;
  j["top5"] = ev.top5;
  j["probe_rmse_norm"] = ev.probe_rmse_norm;
  j["fz_rmse"] = ev.fz_rmse;
  j["probe_rmse_channels"] =
      std::vector<double>(ev.probe_rmse_channels.data(), ev.probe_rmse_channels.data() + 6);
  j["ppl_pmap"] = ev.ppl_pmap;
  j["ppl_wrench"] = ev.ppl_wrench;
  j["recon_val"] = ev.recon_val;
  return j;
}

}  // namespace

void write_ablation_report(const AblationReport& r, const std::filesystem::path& path) {
  json j;
  j["kind"] = "ablation";
  j["variant"] = r.variant_name;
  j["reference"] = run_eval_json(r.reference);
  j["variant_eval"] = run_eval_json(r.variant);
  j["viscous_floor"] = r.viscous_floor;
  j["fz_gap"] = r.fz_gap;
  j["top1_delta"] = r.top1_delta;
  dump_json(j, path);
}

void write_cross_sensor_report(const CrossSensorReport& r, const std::filesystem::path& path) {
  json j;
  j["kind"] = "cross_sensor";
  j["train_sensors"] = r.train_sensors;
  j["held_out"] = r.held_out;
  j["adapter"] = {{"top1_seen", r.adapter_top1_seen},
                  {"top1_unseen", r.adapter_top1_unseen},
                  {"rmse_seen", r.adapter_rmse_seen},
                  {"rmse_unseen", r.adapter_rmse_unseen},
                  {"ratio", r.adapter_ratio}};
  j["regression"] = {{"rmse_seen", r.regression_rmse_seen},
                     {"rmse_unseen", r.regression_rmse_unseen},
                     {"ratio", r.regression_ratio}};
  dump_json(j, path);
}

void write_data_efficiency_report(const DataEfficiencyReport& r, const std::filesystem::path& path) {
  json j;
  j["kind"] = "data_efficiency";
  j["points"] = json::array();
  for (const DataEfficiencyPoint& p : r.points) {
    j["points"].push_back({{"budget", p.budget},
                           {"tactile", p.tactile_rate},
                           {"tactile_lo", p.tactile_lo},
                           {"tactile_hi", p.tactile_hi},
                           {"proprio", p.proprio_rate},
                           {"proprio_lo", p.proprio_lo},
                           {"proprio_hi", p.proprio_hi}});
  }
  dump_json(j, path);
}

}  // namespace tfa
