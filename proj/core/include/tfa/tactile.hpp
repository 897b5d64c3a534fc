#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "tfa/dataset.hpp"
#include "tfa/nn/layers.hpp"
#include "tfa/types.hpp"

namespace tfa {

struct TactileConfig {
  int image_h = 32;
  int image_w = 32;
  int patch = 8;
  int embed = 64;
  int frame_depth = 2;
  int frame_heads = 4;
  int frame_mlp_hidden = 128;
  int temporal_depth = 2;
  int temporal_heads = 4;
  int temporal_mlp_hidden = 128;
  int window = kDefaultWindow;

  int patches_per_frame() const { return (image_h / patch) * (image_w / patch); }
  int patch_dim() const { return patch * patch; }
};

/// Per-frame patch-attention encoder followed by a causal temporal stage
/// with a learnable summary token in the last slot. The summary slot's
/// output is the window representation z*.
struct TactileEncoder {
  TactileConfig cfg;
  nn::Var patch_w, patch_b;
  nn::Var patch_pos;     // patches_per_frame x embed
  std::vector<nn::TransformerBlock> frame_blocks;
  nn::Var frame_ln_g, frame_ln_b;
  nn::Var summary;       // 1 x embed
  nn::Var temporal_pos;  // (window+1) x embed
  std::vector<nn::TransformerBlock> temporal_blocks;
  nn::Var temporal_ln_g, temporal_ln_b;

  nn::ParamMap params() const;
};

TactileEncoder make_tactile_encoder(const TactileConfig& cfg, std::uint64_t seed);

/// Flattens frames into normalized patch rows: (frames * patches_per_frame)
/// x patch_dim, patches row-major within each frame.
Eigen::MatrixXd patchify(std::span<const TactileImage> images, const TactileConfig& cfg,
                         double image_mean, double image_std);

/// Per-frame features: one embed-dim row per frame (mean-pooled patches).
nn::Var encode_frames(const TactileEncoder& enc, const nn::Var& patches);

/// Temporal stage over `batch` windows of cfg.window frame features; returns
/// z* rows (batch x embed).
nn::Var encode_windows(const TactileEncoder& enc, const nn::Var& frame_feats, int batch);

/// Convenience single-image / single-window entry points.
Eigen::VectorXd encode_frame(const TactileEncoder& enc, const TactileImage& image,
                             double image_mean, double image_std);
Eigen::VectorXd encode_window(const TactileEncoder& enc, std::span<const TactileImage> frames,
                              double image_mean, double image_std);

}  // namespace tfa
