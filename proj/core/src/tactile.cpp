#include "tfa/tactile.hpp"

#include "tfa/common.hpp"

namespace tfa {

using nn::Var;

nn::ParamMap TactileEncoder::params() const {
  nn::ParamMap p;
  p.add("tactile.patch_w", patch_w);
  p.add("tactile.patch_b", patch_b);
  p.add("tactile.patch_pos", patch_pos);
  for (size_t i = 0; i < frame_blocks.size(); ++i) {
    p.merge(frame_blocks[i].params("tactile.frame" + std::to_string(i)), "");
  }
  p.add("tactile.frame_ln_g", frame_ln_g);
  p.add("tactile.frame_ln_b", frame_ln_b);
  p.add("tactile.summary", summary);
  p.add("tactile.temporal_pos", temporal_pos);
  for (size_t i = 0; i < temporal_blocks.size(); ++i) {
    p.merge(temporal_blocks[i].params("tactile.temporal" + std::to_string(i)), "");
  }
  p.add("tactile.temporal_ln_g", temporal_ln_g);
  p.add("tactile.temporal_ln_b", temporal_ln_b);
  return p;
}

TactileEncoder make_tactile_encoder(const TactileConfig& cfg, std::uint64_t seed) {
  if (cfg.image_h % cfg.patch != 0 || cfg.image_w % cfg.patch != 0) {
    throw ConfigError("tactile: patch size must tile the image exactly");
  }
  if (cfg.embed % cfg.frame_heads != 0 || cfg.embed % cfg.temporal_heads != 0) {
    throw ConfigError("tactile: embed_dim must be divisible by the head counts");
  }
  Rng rng(derive_seed(seed, 0x7ac));
  TactileEncoder e;
  e.cfg = cfg;
  e.patch_w = nn::leaf(nn::xavier_init(cfg.patch_dim(), cfg.embed, rng));
  e.patch_b = nn::leaf(nn::Mat::Zero(1, cfg.embed));
  e.patch_pos = nn::leaf(0.02 * nn::xavier_init(cfg.patches_per_frame(), cfg.embed, rng));
  for (int i = 0; i < cfg.frame_depth; ++i) {
    e.frame_blocks.push_back(nn::make_block(cfg.embed, cfg.frame_mlp_hidden, rng));
  }
  e.frame_ln_g = nn::leaf(nn::Mat::Ones(1, cfg.embed));
  e.frame_ln_b = nn::leaf(nn::Mat::Zero(1, cfg.embed));
  e.summary = nn::leaf(0.02 * nn::xavier_init(1, cfg.embed, rng));
  e.temporal_pos = nn::leaf(0.02 * nn::xavier_init(cfg.window + 1, cfg.embed, rng));
  for (int i = 0; i < cfg.temporal_depth; ++i) {
    e.temporal_blocks.push_back(nn::make_block(cfg.embed, cfg.temporal_mlp_hidden, rng));
  }
  e.temporal_ln_g = nn::leaf(nn::Mat::Ones(1, cfg.embed));
  e.temporal_ln_b = nn::leaf(nn::Mat::Zero(1, cfg.embed));
  return e;
}

Eigen::MatrixXd patchify(std::span<const TactileImage> images, const TactileConfig& cfg,
                         double image_mean, double image_std) {
  const int grid = cfg.image_h / cfg.patch;
  const int ppf = cfg.patches_per_frame();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(images.size()) * ppf, cfg.patch_dim());
  Eigen::Index row = 0;
  for (const TactileImage& img : images) {
    if (img.height != cfg.image_h || img.width != cfg.image_w) {
      throw ShapeError("patchify: image resolution differs from the encoder config");
    }
    for (int pr = 0; pr < grid; ++pr) {
      for (int pc = 0; pc < grid; ++pc) {
        Eigen::Index col = 0;
        for (int r = 0; r < cfg.patch; ++r) {
          for (int c = 0; c < cfg.patch; ++c) {
            const double v = img.at(pr * cfg.patch + r, pc * cfg.patch + c);
            out(row, col++) = (v - image_mean) / image_std;
          }
        }
        ++row;
      }
    }
  }
  return out;
}

nn::Var encode_frames(const TactileEncoder& enc, const nn::Var& patches) {
  const TactileConfig& cfg = enc.cfg;
  const int ppf = cfg.patches_per_frame();
  if (patches->val.cols() != cfg.patch_dim() || patches->val.rows() % ppf != 0) {
    throw ShapeError("encode_frames: patch matrix shape mismatch");
  }
  const int frames = static_cast<int>(patches->val.rows()) / ppf;

  std::vector<int> pos_idx(static_cast<size_t>(frames) * ppf);
  for (int f = 0; f < frames; ++f) {
    for (int p = 0; p < ppf; ++p) pos_idx[static_cast<size_t>(f) * ppf + p] = p;
  }

  Var x = nn::add(nn::linear(patches, enc.patch_w, enc.patch_b),
                  nn::gather_rows(enc.patch_pos, pos_idx));
  for (const auto& blk : enc.frame_blocks) {
    x = nn::block_forward(blk, x, ppf, cfg.frame_heads, /*causal=*/false);
  }
  x = nn::layer_norm(x, enc.frame_ln_g, enc.frame_ln_b);
  return nn::mean_rows_group(x, ppf);
}

nn::Var encode_windows(const TactileEncoder& enc, const nn::Var& frame_feats, int batch) {
  const TactileConfig& cfg = enc.cfg;
  const int n = cfg.window;
  if (frame_feats->val.rows() != static_cast<Eigen::Index>(batch) * n) {
    throw ShapeError("encode_windows: expected batch*window frame features");
  }

  // Token order per window: the N frame features then the summary token.
  // With the causal mask this is the one arrangement where frame slot j sees
  // only slots <= j while the summary slot sees the whole window.
  Var pool = nn::concat_rows(frame_feats, enc.summary);
  const int summary_row = batch * n;
  std::vector<int> order(static_cast<size_t>(batch) * (n + 1));
  std::vector<int> pos_idx(order.size());
  std::vector<int> out_idx(static_cast<size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    for (int j = 0; j < n; ++j) {
      order[static_cast<size_t>(b) * (n + 1) + j] = b * n + j;
      pos_idx[static_cast<size_t>(b) * (n + 1) + j] = j;
    }
    order[static_cast<size_t>(b) * (n + 1) + n] = summary_row;
    pos_idx[static_cast<size_t>(b) * (n + 1) + n] = n;
    out_idx[static_cast<size_t>(b)] = b * (n + 1) + n;
  }

  Var x = nn::add(nn::gather_rows(pool, order), nn::gather_rows(enc.temporal_pos, pos_idx));
  for (const auto& blk : enc.temporal_blocks) {
    x = nn::block_forward(blk, x, n + 1, cfg.temporal_heads, /*causal=*/true);
  }
  x = nn::layer_norm(x, enc.temporal_ln_g, enc.temporal_ln_b);
  return nn::gather_rows(x, out_idx);
}

Eigen::VectorXd encode_frame(const TactileEncoder& enc, const TactileImage& image,
                             double image_mean, double image_std) {
  nn::NoGrad ng;
  Eigen::MatrixXd patches = patchify(std::span<const TactileImage>(&image, 1), enc.cfg,
                                     image_mean, image_std);
  Var h = encode_frames(enc, nn::constant(std::move(patches)));
  return h->val.row(0).transpose();
}

Eigen::VectorXd encode_window(const TactileEncoder& enc, std::span<const TactileImage> frames,
                              double image_mean, double image_std) {
  if (static_cast<int>(frames.size()) != enc.cfg.window) {
    throw ShapeError("encode_window: expected exactly window frames");
  }
  nn::NoGrad ng;
  Var h = encode_frames(enc, nn::constant(patchify(frames, enc.cfg, image_mean, image_std)));
  Var z = encode_windows(enc, h, 1);
  return z->val.row(0).transpose();
}

}  // namespace tfa
