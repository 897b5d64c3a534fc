#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tfa/checkpoint.hpp"
#include "tfa/codec.hpp"
#include "tfa/dataset.hpp"
#include "tfa/metrics.hpp"
#include "tfa/tactile.hpp"

namespace tfa {

struct AlignConfig {
  TactileConfig tactile;
  CodecConfig codec;
  double tau_temp = 0.07;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  int batch = 64;
  int steps = 5000;
  double lr = 1e-3;
  int log_every = 50;
  int probe_batch = 64;
  double val_fraction = 0.1;
  int train_stride = 1;
  std::uint64_t seed = 1;

  int window() const { return tactile.window; }
};

struct WindowRef {
  int episode = 0;
  int start = 0;
};

/// The full tactile-force adapter: tactile trunk, force codec, and a linear
/// projection from the tactile embedding into the code space where the
/// contrastive loss lives. z* (pre-projection) is the representation used
/// by probes and the policy.
struct Adapter {
  AlignConfig cfg;
  TactileEncoder tactile;
  ForceCodec codec;
  nn::Var proj_w, proj_b;
  Normalization norm;

  nn::ParamMap params() const;
  int code_dim() const { return 2 * cfg.codec.code_dim; }
};

Adapter make_adapter(const AlignConfig& cfg, std::uint64_t seed);

/// Mean of the row-wise (tactile->force) and column-wise (force->tactile)
/// InfoNCE losses on the cosine similarity matrix scaled by 1/tau.
nn::Var info_nce_symmetric(const nn::Var& z, const nn::Var& c, double tau_temp);

struct EpisodeSplit {
  std::vector<int> train, val;
};
EpisodeSplit split_by_episode(int n_episodes, double val_fraction, std::uint64_t seed);

std::vector<WindowRef> collect_windows(std::span<const Episode> episodes,
                                       std::span<const int> episode_ids, int window, int stride);

/// Normalized model inputs for a batch of windows.
struct BatchData {
  Eigen::MatrixXd patches;  // (B*window*patches_per_frame) x patch_dim
  Eigen::MatrixXd pmap;     // B x (window*144)
  Eigen::MatrixXd wrench;   // B x (window*6)
  int batch = 0;
};
BatchData assemble_batch(std::span<const Episode> episodes, std::span<const WindowRef> refs,
                         const TactileConfig& tc, const Normalization& norm);

struct TotalLoss {
  nn::Var total;
  double nce = 0.0, quant = 0.0, recon = 0.0;
  nn::Var z_star;  // B x embed
  nn::Var z_proj;  // B x 2*code_dim
  CodecForward codec_fwd;
};
TotalLoss total_loss(Adapter& adapter, const BatchData& batch, bool update_usage);

struct AdapterTrainResult {
  std::vector<MetricsRecord> log;
  EpisodeSplit split;
};
AdapterTrainResult train_adapter(Adapter& adapter, std::span<const Episode> episodes,
                                 const std::string& run_id);

// Frozen-adapter evaluation helpers (no gradients, chunked internally).
Eigen::MatrixXd embed_windows(const Adapter& adapter, std::span<const Episode> episodes,
                              std::span<const WindowRef> refs);
Eigen::MatrixXd project_embeddings(const Adapter& adapter, const Eigen::MatrixXd& z_star);
Eigen::MatrixXd codes_for_windows(Adapter& adapter, std::span<const Episode> episodes,
                                  std::span<const WindowRef> refs);
Eigen::MatrixXd final_wrench_targets(std::span<const Episode> episodes,
                                     std::span<const WindowRef> refs, int window);
/// Validation reconstruction error (batch-mean combined L_recon).
double recon_error(Adapter& adapter, std::span<const Episode> episodes,
                   std::span<const WindowRef> refs);

struct RetrievalResult {
  double top1 = 0.0;
  double top5 = 0.0;
  int n = 0;
};
/// In-batch ranking of force codes by cosine similarity to each projected
/// tactile embedding. A similarity tie with the true pair counts as a hit.
RetrievalResult retrieval_eval(Adapter& adapter, std::span<const Episode> episodes,
                               std::span<const WindowRef> refs, int b_eval, std::uint64_t seed);
RetrievalResult retrieval_from_embeddings(const Eigen::MatrixXd& z_proj, const Eigen::MatrixXd& codes,
                                          int b_eval, std::uint64_t seed);

/// Ridge regression from frozen embeddings to the window's final wrench.
struct RidgeProbe {
  Eigen::MatrixXd w;  // (dim+1) x 6, fitted on z-scored targets
  Eigen::Matrix<double, 6, 1> y_mean, y_std;
};
RidgeProbe fit_wrench_probe(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y,
                            double lambda = 1e-3);
Eigen::MatrixXd probe_predict(const RidgeProbe& probe, const Eigen::MatrixXd& z);
/// Per-channel RMSE in raw units (row 6-vector).
Eigen::Matrix<double, 6, 1> wrench_rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth);
/// Dimensionless aggregate: RMS over channels normalized by per-channel std.
double wrench_rmse_normalized(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
                              const Eigen::Matrix<double, 6, 1>& channel_std);

/// Explicit force-regression baseline sharing the adapter's tactile trunk
/// capacity; the head regresses the full wrench and pressure sequences.
struct RegressionBaseline {
  AlignConfig cfg;
  TactileEncoder trunk;
  nn::Mlp head;
  Normalization norm;

  nn::ParamMap params() const;
};
RegressionBaseline make_regression_baseline(const AlignConfig& cfg, std::uint64_t seed);
AdapterTrainResult train_regression_baseline(RegressionBaseline& model,
                                             std::span<const Episode> episodes,
                                             const std::string& run_id);
/// Predicted final-frame wrench, raw units.
Eigen::MatrixXd regression_predict_wrench(const RegressionBaseline& model,
                                          std::span<const Episode> episodes,
                                          std::span<const WindowRef> refs);

// Checkpoint round trip (shared versioned blob format).
Blob adapter_to_blob(const Adapter& adapter);
Adapter adapter_from_blob(const Blob& blob);
void save_adapter(const Adapter& adapter, const std::filesystem::path& path);
Adapter load_adapter(const std::filesystem::path& path);

}  // namespace tfa
