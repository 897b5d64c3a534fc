#include "tfa/align.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "tfa/common.hpp"
#include "tfa/nn/optim.hpp"

namespace tfa {

using nn::Var;

nn::ParamMap Adapter::params() const {
  nn::ParamMap p;
  p.merge(tactile.params(), "");
  p.merge(codec.params(), "");
  p.add("align.proj_w", proj_w);
  p.add("align.proj_b", proj_b);
  return p;
}

Adapter make_adapter(const AlignConfig& cfg, std::uint64_t seed) {
  if (cfg.tau_temp <= 0.0) throw ConfigError("adapter: tau_temp must be positive");
  if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0) throw ConfigError("adapter: lambda weights must be >= 0");
  if (cfg.codec.window != cfg.tactile.window) {
    throw ConfigError("adapter: codec and tactile window lengths disagree");
  }
  Adapter a;
  a.cfg = cfg;
  a.tactile = make_tactile_encoder(cfg.tactile, derive_seed(seed, 1));
  a.codec = make_force_codec(cfg.codec, derive_seed(seed, 2));
  Rng rng(derive_seed(seed, 3));
  a.proj_w = nn::leaf(nn::xavier_init(cfg.tactile.embed, 2 * cfg.codec.code_dim, rng));
  a.proj_b = nn::leaf(nn::Mat::Zero(1, 2 * cfg.codec.code_dim));
  return a;
}

nn::Var info_nce_symmetric(const nn::Var& z, const nn::Var& c, double tau_temp) {
  if (tau_temp <= 0.0) throw ConfigError("info_nce: temperature must be positive");
  if (z->val.rows() != c->val.rows() || z->val.cols() != c->val.cols()) {
    throw ShapeError("info_nce: embedding matrices must share shape");
  }
  Var zn = nn::l2_normalize_rows(z);
  Var cn = nn::l2_normalize_rows(c);
  Var s = nn::scale(nn::matmul(zn, nn::transpose(cn)), 1.0 / tau_temp);
  Var row_loss = nn::mean_all(nn::sub(nn::logsumexp_rows(s), nn::diag_vec(s)));
  Var st = nn::transpose(s);
  Var col_loss = nn::mean_all(nn::sub(nn::logsumexp_rows(st), nn::diag_vec(st)));
  return nn::scale(nn::add(row_loss, col_loss), 0.5);
}

EpisodeSplit split_by_episode(int n_episodes, double val_fraction, std::uint64_t seed) {
  if (n_episodes < 2) throw ConfigError("split_by_episode: need at least two episodes");
  std::vector<int> ids(static_cast<size_t>(n_episodes));
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(derive_seed(seed, 0x511));
  for (int i = n_episodes - 1; i > 0; --i) {
    std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(uniform_int(rng, i + 1))]);
  }
  int n_val = std::clamp(static_cast<int>(std::llround(val_fraction * n_episodes)), 1, n_episodes - 1);
  EpisodeSplit split;
  split.val.assign(ids.begin(), ids.begin() + n_val);
  split.train.assign(ids.begin() + n_val, ids.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

std::vector<WindowRef> collect_windows(std::span<const Episode> episodes,
                                       std::span<const int> episode_ids, int window, int stride) {
  std::vector<WindowRef> refs;
  for (int id : episode_ids) {
    const Episode& ep = episodes[static_cast<size_t>(id)];
    for (int start = 0; start + window <= ep.size(); start += stride) {
      refs.push_back(WindowRef{id, start});
    }
  }
  return refs;
}

BatchData assemble_batch(std::span<const Episode> episodes, std::span<const WindowRef> refs,
                         const TactileConfig& tc, const Normalization& norm) {
  const int n = tc.window;
  BatchData b;
  b.batch = static_cast<int>(refs.size());

  std::vector<TactileImage> images;
  images.reserve(refs.size() * static_cast<size_t>(n));
  b.pmap.resize(b.batch, n * PressureMap::kTaxels);
  b.wrench.resize(b.batch, n * 6);
  for (size_t i = 0; i < refs.size(); ++i) {
    const Episode& ep = episodes[static_cast<size_t>(refs[i].episode)];
    if (refs[i].start + n > ep.size()) throw ShapeError("assemble_batch: window exceeds episode");
    for (int j = 0; j < n; ++j) {
      const SyncedFrame& f = ep.frames[static_cast<size_t>(refs[i].start + j)];
      images.push_back(f.image);
      for (int k = 0; k < PressureMap::kTaxels; ++k) {
        b.pmap(static_cast<Eigen::Index>(i), j * PressureMap::kTaxels + k) =
            (static_cast<double>(f.pmap.p[static_cast<size_t>(k)]) - norm.pmap_mean) / norm.pmap_std;
      }
      Eigen::Matrix<double, 6, 1> w = f.wrench.vec6();
      for (int k = 0; k < 6; ++k) {
        b.wrench(static_cast<Eigen::Index>(i), j * 6 + k) =
            (w[k] - norm.wrench_mean[k]) / norm.wrench_std[k];
      }
    }
  }
  b.patches = patchify(images, tc, norm.image_mean, norm.image_std);
  return b;
}

TotalLoss total_loss(Adapter& adapter, const BatchData& batch, bool update_usage) {
  TotalLoss out;
  out.codec_fwd = codec_forward(adapter.codec, batch.pmap, batch.wrench, update_usage);

  Var h = encode_frames(adapter.tactile, nn::constant(batch.patches));
  out.z_star = encode_windows(adapter.tactile, h, batch.batch);
  out.z_proj = nn::linear(out.z_star, adapter.proj_w, adapter.proj_b);

  Var nce = info_nce_symmetric(out.z_proj, out.codec_fwd.code_st, adapter.cfg.tau_temp);
  out.nce = nce->val(0, 0);
  out.quant = out.codec_fwd.quant_loss->val(0, 0);
  out.recon = out.codec_fwd.recon_loss->val(0, 0);

  out.total = nce;
  if (adapter.cfg.lambda1 != 0.0) {
    out.total = nn::add(out.total, nn::scale(out.codec_fwd.quant_loss, adapter.cfg.lambda1));
  }
  if (adapter.cfg.lambda2 != 0.0) {
    out.total = nn::add(out.total, nn::scale(out.codec_fwd.recon_loss, adapter.cfg.lambda2));
  }
  return out;
}

namespace {

/// Uniform window sampling with a minimum start gap inside one episode, so a
/// batch never pairs near-duplicate neighbors as negatives.
std::vector<WindowRef> sample_batch(const std::vector<WindowRef>& pool, int batch, int min_gap,
                                    Rng& rng) {
  std::vector<WindowRef> out;
  out.reserve(static_cast<size_t>(batch));
  int guard = 0;
  while (static_cast<int>(out.size()) < batch) {
    const WindowRef& cand = pool[static_cast<size_t>(uniform_int(rng, static_cast<int>(pool.size())))];
    bool clash = false;
    for (const WindowRef& r : out) {
      if (r.episode == cand.episode && std::abs(r.start - cand.start) < min_gap) {
        clash = true;
        break;
      }
    }
    if (!clash || ++guard > 50 * batch) {
      out.push_back(cand);
      if (clash) guard = 0;
    }
  }
  return out;
}

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

AdapterTrainResult train_adapter(Adapter& adapter, std::span<const Episode> episodes,
                                 const std::string& run_id) {
  const AlignConfig& cfg = adapter.cfg;
  AdapterTrainResult result;
  result.split = split_by_episode(static_cast<int>(episodes.size()), cfg.val_fraction, cfg.seed);
  adapter.norm = compute_normalization(episodes, result.split.train);

  const std::vector<WindowRef> train_refs =
      collect_windows(episodes, result.split.train, cfg.window(), cfg.train_stride);
  if (static_cast<int>(train_refs.size()) < cfg.batch) {
    throw ConfigError("train_adapter: fewer training windows than the batch size");
  }
  std::vector<WindowRef> probe_refs =
      collect_windows(episodes, result.split.val, cfg.window(), cfg.window());
  {
    Rng probe_rng(derive_seed(cfg.seed, 0x9e0b));
    for (int i = static_cast<int>(probe_refs.size()) - 1; i > 0; --i) {
      std::swap(probe_refs[static_cast<size_t>(i)],
                probe_refs[static_cast<size_t>(uniform_int(probe_rng, i + 1))]);
    }
    if (static_cast<int>(probe_refs.size()) > cfg.probe_batch) {
      probe_refs.resize(static_cast<size_t>(cfg.probe_batch));
    }
  }

  Rng batch_rng(derive_seed(cfg.seed, 0xba7c));
  Rng revive_rng(derive_seed(cfg.seed, 0xdead));
  nn::Adam opt(cfg.lr);
  const std::vector<Var> params = adapter.params().vars();
  const double t_start = now_ms();

  for (int step = 0; step < cfg.steps; ++step) {
    const std::vector<WindowRef> refs = sample_batch(train_refs, cfg.batch, cfg.window(), batch_rng);
    const BatchData batch = assemble_batch(episodes, refs, cfg.tactile, adapter.norm);

    if (!adapter.codec.books_ready) {
      nn::NoGrad ng;
      Var zp = nn::mlp_forward(adapter.codec.enc_pmap, nn::constant(batch.pmap));
      Var zw = nn::mlp_forward(adapter.codec.enc_wrench, nn::constant(batch.wrench));
      init_codebooks(adapter.codec, zp->val, zw->val, derive_seed(cfg.seed, 0xb00c));
    }

    TotalLoss tl = total_loss(adapter, batch, /*update_usage=*/true);
    const double total = tl.total->val(0, 0);
    if (!std::isfinite(total)) {
      throw NumericalError("train_adapter: non-finite loss at step " + std::to_string(step) +
                           " (nce=" + std::to_string(tl.nce) + ", quant=" + std::to_string(tl.quant) +
                           ", recon=" + std::to_string(tl.recon) + ")");
    }
    nn::backward(tl.total);
    opt.step(params);
    nn::Adam::zero_grad(params);
    revive_dead_codes(adapter.codec, revive_rng);

    if (step % cfg.log_every == 0 || step + 1 == cfg.steps) {
      double probe_top1 = -1.0;
      if (probe_refs.size() >= 2) {
        nn::NoGrad ng;
        const Eigen::MatrixXd z = embed_windows(adapter, episodes, probe_refs);
        const Eigen::MatrixXd zp = project_embeddings(adapter, z);
        const Eigen::MatrixXd codes = codes_for_windows(adapter, episodes, probe_refs);
        probe_top1 = retrieval_from_embeddings(zp, codes, static_cast<int>(probe_refs.size()), 0).top1;
      }
      MetricsRecord rec;
      rec.run_id = run_id;
      rec.step = step;
      rec.wall_ms = now_ms() - t_start;
      rec.values = {{"l_total", total},
                    {"l_nce", tl.nce},
                    {"l_quant", tl.quant},
                    {"l_recon", tl.recon},
                    {"ppl_pmap", codebook_perplexity(adapter.codec.book_pmap)},
                    {"ppl_wrench", adapter.cfg.codec.shared_codebook
                                       ? codebook_perplexity(adapter.codec.book_pmap)
                                       : codebook_perplexity(adapter.codec.book_wrench)},
                    {"probe_top1", probe_top1}};
      result.log.push_back(std::move(rec));
    }
  }
  return result;
}

Eigen::MatrixXd embed_windows(const Adapter& adapter, std::span<const Episode> episodes,
                              std::span<const WindowRef> refs) {
  nn::NoGrad ng;
  const int chunk = 128;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(refs.size()), adapter.cfg.tactile.embed);
  for (size_t at = 0; at < refs.size(); at += chunk) {
    const size_t n = std::min(static_cast<size_t>(chunk), refs.size() - at);
    const BatchData b = assemble_batch(episodes, refs.subspan(at, n), adapter.cfg.tactile, adapter.norm);
    Var h = encode_frames(adapter.tactile, nn::constant(b.patches));
    Var z = encode_windows(adapter.tactile, h, b.batch);
    out.middleRows(static_cast<Eigen::Index>(at), static_cast<Eigen::Index>(n)) = z->val;
  }
  return out;
}

Eigen::MatrixXd project_embeddings(const Adapter& adapter, const Eigen::MatrixXd& z_star) {
  Eigen::MatrixXd out = z_star * adapter.proj_w->val;
  out.rowwise() += adapter.proj_b->val.row(0);
  return out;
}

Eigen::MatrixXd codes_for_windows(Adapter& adapter, std::span<const Episode> episodes,
                                  std::span<const WindowRef> refs) {
  nn::NoGrad ng;
  const int chunk = 256;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(refs.size()), adapter.code_dim());
  for (size_t at = 0; at < refs.size(); at += chunk) {
    const size_t n = std::min(static_cast<size_t>(chunk), refs.size() - at);
    const BatchData b = assemble_batch(episodes, refs.subspan(at, n), adapter.cfg.tactile, adapter.norm);
    CodecForward f = codec_forward(adapter.codec, b.pmap, b.wrench, /*update_usage=*/false);
    out.middleRows(static_cast<Eigen::Index>(at), static_cast<Eigen::Index>(n)) = f.code_st->val;
  }
  return out;
}

Eigen::MatrixXd final_wrench_targets(std::span<const Episode> episodes,
                                     std::span<const WindowRef> refs, int window) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(refs.size()), 6);
  for (size_t i = 0; i < refs.size(); ++i) {
    const Episode& ep = episodes[static_cast<size_t>(refs[i].episode)];
    y.row(static_cast<Eigen::Index>(i)) =
        ep.frames[static_cast<size_t>(refs[i].start + window - 1)].wrench.vec6().transpose();
  }
  return y;
}

double recon_error(Adapter& adapter, std::span<const Episode> episodes,
                   std::span<const WindowRef> refs) {
  nn::NoGrad ng;
  const int chunk = 256;
  double total = 0.0;
  for (size_t at = 0; at < refs.size(); at += chunk) {
    const size_t n = std::min(static_cast<size_t>(chunk), refs.size() - at);
    const BatchData b = assemble_batch(episodes, refs.subspan(at, n), adapter.cfg.tactile, adapter.norm);
    CodecForward f = codec_forward(adapter.codec, b.pmap, b.wrench, /*update_usage=*/false);
    total += f.recon_loss->val(0, 0) * static_cast<double>(n);
  }
  return total / static_cast<double>(refs.size());
}

RetrievalResult retrieval_from_embeddings(const Eigen::MatrixXd& z_proj,
                                          const Eigen::MatrixXd& codes, int b_eval,
                                          std::uint64_t seed) {
  if (z_proj.rows() != codes.rows()) throw ShapeError("retrieval: row counts differ");
  const int n = static_cast<int>(z_proj.rows());
  if (b_eval < 2 || n < b_eval) throw ConfigError("retrieval: need at least b_eval windows");

  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x3e7));
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(uniform_int(rng, i + 1))]);
  }

  auto normalized = [](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double nr = out.row(r).norm();
      if (nr < 1e-12) throw NumericalError("retrieval: zero-norm embedding row");
      out.row(r) /= nr;
    }
    return out;
  };

  RetrievalResult res;
  int hits1 = 0, hits5 = 0;
  for (int at = 0; at + b_eval <= n; at += b_eval) {
    Eigen::MatrixXd zb(b_eval, z_proj.cols()), cb(b_eval, codes.cols());
    for (int i = 0; i < b_eval; ++i) {
      zb.row(i) = z_proj.row(order[static_cast<size_t>(at + i)]);
      cb.row(i) = codes.row(order[static_cast<size_t>(at + i)]);
    }
    const Eigen::MatrixXd s = normalized(zb) * normalized(cb).transpose();
    for (int i = 0; i < b_eval; ++i) {
      const double truth = s(i, i);
      int above = 0;
      for (int k = 0; k < b_eval; ++k) {
        if (s(i, k) > truth) ++above;
      }
      if (above == 0) ++hits1;
      if (above < 5) ++hits5;
      ++res.n;
    }
  }
  if (res.n == 0) throw ConfigError("retrieval: not enough windows for one batch");
  res.top1 = static_cast<double>(hits1) / res.n;
  res.top5 = static_cast<double>(hits5) / res.n;
  return res;
}

RetrievalResult retrieval_eval(Adapter& adapter, std::span<const Episode> episodes,
                               std::span<const WindowRef> refs, int b_eval, std::uint64_t seed) {
  const Eigen::MatrixXd z = embed_windows(adapter, episodes, refs);
  const Eigen::MatrixXd zp = project_embeddings(adapter, z);
  const Eigen::MatrixXd codes = codes_for_windows(adapter, episodes, refs);
  return retrieval_from_embeddings(zp, codes, b_eval, seed);
}

RidgeProbe fit_wrench_probe(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y, double lambda) {
  if (z.rows() != y.rows() || y.cols() != 6) throw ShapeError("probe: bad target shape");
  const Eigen::Index n = z.rows(), d = z.cols();

  RidgeProbe probe;
  for (int c = 0; c < 6; ++c) {
    probe.y_mean[c] = y.col(c).mean();
    const double var = (y.col(c).array() - probe.y_mean[c]).square().mean();
    probe.y_std[c] = std::max(std::sqrt(var), kStdFloor);
  }
  Eigen::MatrixXd yn = (y.rowwise() - probe.y_mean.transpose());
  yn.array().rowwise() /= probe.y_std.transpose().array();

  Eigen::MatrixXd x(n, d + 1);
  x << z, Eigen::VectorXd::Ones(n);
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().array() += lambda * static_cast<double>(n);
  probe.w = gram.ldlt().solve(x.transpose() * yn);
  return probe;
}

Eigen::MatrixXd probe_predict(const RidgeProbe& probe, const Eigen::MatrixXd& z) {
  Eigen::MatrixXd x(z.rows(), z.cols() + 1);
  x << z, Eigen::VectorXd::Ones(z.rows());
  Eigen::MatrixXd yn = x * probe.w;
  yn.array().rowwise() *= probe.y_std.transpose().array();
  yn.rowwise() += probe.y_mean.transpose();
  return yn;
}

Eigen::Matrix<double, 6, 1> wrench_rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != 6 || truth.cols() != 6) {
    throw ShapeError("wrench_rmse: shape mismatch");
  }
  Eigen::Matrix<double, 6, 1> rmse;
  for (int c = 0; c < 6; ++c) {
    rmse[c] = std::sqrt((pred.col(c) - truth.col(c)).squaredNorm() / pred.rows());
  }
  return rmse;
}

double wrench_rmse_normalized(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth,
                              const Eigen::Matrix<double, 6, 1>& channel_std) {
  const Eigen::Matrix<double, 6, 1> rmse = wrench_rmse(pred, truth);
  double acc = 0.0;
  for (int c = 0; c < 6; ++c) {
    const double r = rmse[c] / std::max(channel_std[c], kStdFloor);
    acc += r * r;
  }
  return std::sqrt(acc / 6.0);
}

nn::ParamMap RegressionBaseline::params() const {
  nn::ParamMap p;
  p.merge(trunk.params(), "");
  p.merge(head.params("regression.head"), "");
  return p;
}

RegressionBaseline make_regression_baseline(const AlignConfig& cfg, std::uint64_t seed) {
  RegressionBaseline m;
  m.cfg = cfg;
  m.trunk = make_tactile_encoder(cfg.tactile, derive_seed(seed, 21));
  Rng rng(derive_seed(seed, 22));
  const int out = cfg.window() * (6 + PressureMap::kTaxels);
  m.head = nn::make_mlp({cfg.tactile.embed, cfg.codec.hidden, out}, rng);
  return m;
}

AdapterTrainResult train_regression_baseline(RegressionBaseline& model,
                                             std::span<const Episode> episodes,
                                             const std::string& run_id) {
  const AlignConfig& cfg = model.cfg;
  AdapterTrainResult result;
  result.split = split_by_episode(static_cast<int>(episodes.size()), cfg.val_fraction, cfg.seed);
  model.norm = compute_normalization(episodes, result.split.train);

  const std::vector<WindowRef> train_refs =
      collect_windows(episodes, result.split.train, cfg.window(), cfg.train_stride);
  if (static_cast<int>(train_refs.size()) < cfg.batch) {
    throw ConfigError("train_regression_baseline: fewer training windows than the batch size");
  }

  Rng batch_rng(derive_seed(cfg.seed, 0xba7c));
  nn::Adam opt(cfg.lr);
  const std::vector<Var> params = model.params().vars();
  const double t_start = now_ms();

  for (int step = 0; step < cfg.steps; ++step) {
    const std::vector<WindowRef> refs = sample_batch(train_refs, cfg.batch, cfg.window(), batch_rng);
    const BatchData batch = assemble_batch(episodes, refs, cfg.tactile, model.norm);

    Var h = encode_frames(model.trunk, nn::constant(batch.patches));
    Var z = encode_windows(model.trunk, h, batch.batch);
    Var pred = nn::mlp_forward(model.head, z);
    Eigen::MatrixXd target(batch.batch, pred->val.cols());
    target << batch.wrench, batch.pmap;
    Var loss = nn::scale(nn::sum_sq(nn::sub(pred, nn::constant(target))),
                         1.0 / static_cast<double>(batch.batch));
    const double lv = loss->val(0, 0);
    if (!std::isfinite(lv)) {
      throw NumericalError("train_regression_baseline: non-finite loss at step " +
                           std::to_string(step));
    }
    nn::backward(loss);
    opt.step(params);
    nn::Adam::zero_grad(params);

    if (step % cfg.log_every == 0 || step + 1 == cfg.steps) {
      MetricsRecord rec;
      rec.run_id = run_id;
      rec.step = step;
      rec.wall_ms = now_ms() - t_start;
      rec.values = {{"l_mse", lv}};
      result.log.push_back(std::move(rec));
    }
  }
  return result;
}

Eigen::MatrixXd regression_predict_wrench(const RegressionBaseline& model,
                                          std::span<const Episode> episodes,
                                          std::span<const WindowRef> refs) {
  nn::NoGrad ng;
  const AlignConfig& cfg = model.cfg;
  const int chunk = 128;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(refs.size()), 6);
  for (size_t at = 0; at < refs.size(); at += chunk) {
    const size_t n = std::min(static_cast<size_t>(chunk), refs.size() - at);
    const BatchData b = assemble_batch(episodes, refs.subspan(at, n), cfg.tactile, model.norm);
    Var h = encode_frames(model.trunk, nn::constant(b.patches));
    Var z = encode_windows(model.trunk, h, b.batch);
    Var pred = nn::mlp_forward(model.head, z);
    // Head layout: normalized wrench sequence first; take the final frame.
    const int off = (cfg.window() - 1) * 6;
    for (size_t i = 0; i < n; ++i) {
      for (int c = 0; c < 6; ++c) {
        out(static_cast<Eigen::Index>(at + i), c) =
            pred->val(static_cast<Eigen::Index>(i), off + c) * model.norm.wrench_std[c] +
            model.norm.wrench_mean[c];
      }
    }
  }
  return out;
}

namespace {

void store_params(Blob& blob, const nn::ParamMap& params) {
  for (const auto& [name, var] : params.items) blob.mats["param." + name] = var->val;
}

void load_params(const Blob& blob, const nn::ParamMap& params) {
  for (const auto& [name, var] : params.items) {
    const Eigen::MatrixXd& m = blob.mat("param." + name);
    if (m.rows() != var->val.rows() || m.cols() != var->val.cols()) {
      throw ShapeError("checkpoint: shape mismatch for " + name);
    }
    var->val = m;
  }
}

}  // namespace

Blob adapter_to_blob(const Adapter& adapter) {
  Blob blob;
  const AlignConfig& cfg = adapter.cfg;
  blob.set_scalar("cfg.window", cfg.tactile.window);
  blob.set_scalar("cfg.image_h", cfg.tactile.image_h);
  blob.set_scalar("cfg.image_w", cfg.tactile.image_w);
  blob.set_scalar("cfg.patch", cfg.tactile.patch);
  blob.set_scalar("cfg.embed", cfg.tactile.embed);
  blob.set_scalar("cfg.frame_depth", cfg.tactile.frame_depth);
  blob.set_scalar("cfg.frame_heads", cfg.tactile.frame_heads);
  blob.set_scalar("cfg.frame_mlp_hidden", cfg.tactile.frame_mlp_hidden);
  blob.set_scalar("cfg.temporal_depth", cfg.tactile.temporal_depth);
  blob.set_scalar("cfg.temporal_heads", cfg.tactile.temporal_heads);
  blob.set_scalar("cfg.temporal_mlp_hidden", cfg.tactile.temporal_mlp_hidden);
  blob.set_scalar("cfg.hidden", cfg.codec.hidden);
  blob.set_scalar("cfg.code_dim", cfg.codec.code_dim);
  blob.set_scalar("cfg.k_pmap", cfg.codec.k_pmap);
  blob.set_scalar("cfg.k_wrench", cfg.codec.k_wrench);
  blob.set_scalar("cfg.beta", cfg.codec.beta);
  blob.set_scalar("cfg.shared_codebook", cfg.codec.shared_codebook ? 1.0 : 0.0);
  blob.set_scalar("cfg.tau_temp", cfg.tau_temp);
  blob.set_scalar("cfg.lambda1", cfg.lambda1);
  blob.set_scalar("cfg.lambda2", cfg.lambda2);

  blob.mats["norm.wrench_mean"] = adapter.norm.wrench_mean;
  blob.mats["norm.wrench_std"] = adapter.norm.wrench_std;
  blob.set_scalar("norm.pmap_mean", adapter.norm.pmap_mean);
  blob.set_scalar("norm.pmap_std", adapter.norm.pmap_std);
  blob.set_scalar("norm.image_mean", adapter.norm.image_mean);
  blob.set_scalar("norm.image_std", adapter.norm.image_std);

  store_params(blob, adapter.params());
  blob.counts["usage.pmap"] = adapter.codec.book_pmap.usage;
  if (!cfg.codec.shared_codebook) blob.counts["usage.wrench"] = adapter.codec.book_wrench.usage;
  return blob;
}

Adapter adapter_from_blob(const Blob& blob) {
  AlignConfig cfg;
  cfg.tactile.window = static_cast<int>(blob.scalar("cfg.window"));
  cfg.tactile.image_h = static_cast<int>(blob.scalar("cfg.image_h"));
  cfg.tactile.image_w = static_cast<int>(blob.scalar("cfg.image_w"));
  cfg.tactile.patch = static_cast<int>(blob.scalar("cfg.patch"));
  cfg.tactile.embed = static_cast<int>(blob.scalar("cfg.embed"));
  cfg.tactile.frame_depth = static_cast<int>(blob.scalar("cfg.frame_depth"));
  cfg.tactile.frame_heads = static_cast<int>(blob.scalar("cfg.frame_heads"));
  cfg.tactile.frame_mlp_hidden = static_cast<int>(blob.scalar("cfg.frame_mlp_hidden"));
  cfg.tactile.temporal_depth = static_cast<int>(blob.scalar("cfg.temporal_depth"));
  cfg.tactile.temporal_heads = static_cast<int>(blob.scalar("cfg.temporal_heads"));
  cfg.tactile.temporal_mlp_hidden = static_cast<int>(blob.scalar("cfg.temporal_mlp_hidden"));
  cfg.codec.window = cfg.tactile.window;
  cfg.codec.hidden = static_cast<int>(blob.scalar("cfg.hidden"));
  cfg.codec.code_dim = static_cast<int>(blob.scalar("cfg.code_dim"));
  cfg.codec.k_pmap = static_cast<int>(blob.scalar("cfg.k_pmap"));
  cfg.codec.k_wrench = static_cast<int>(blob.scalar("cfg.k_wrench"));
  cfg.codec.beta = blob.scalar("cfg.beta");
  cfg.codec.shared_codebook = blob.scalar("cfg.shared_codebook") != 0.0;
  cfg.tau_temp = blob.scalar("cfg.tau_temp");
  cfg.lambda1 = blob.scalar("cfg.lambda1");
  cfg.lambda2 = blob.scalar("cfg.lambda2");

  Adapter adapter = make_adapter(cfg, /*seed=*/0);
  adapter.norm.wrench_mean = blob.mat("norm.wrench_mean");
  adapter.norm.wrench_std = blob.mat("norm.wrench_std");
  adapter.norm.pmap_mean = blob.scalar("norm.pmap_mean");
  adapter.norm.pmap_std = blob.scalar("norm.pmap_std");
  adapter.norm.image_mean = blob.scalar("norm.image_mean");
  adapter.norm.image_std = blob.scalar("norm.image_std");

  load_params(blob, adapter.params());
  adapter.codec.book_pmap.usage = blob.counts.at("usage.pmap");
  if (!cfg.codec.shared_codebook) adapter.codec.book_wrench.usage = blob.counts.at("usage.wrench");
  adapter.codec.books_ready = true;
  return adapter;
}

void save_adapter(const Adapter& adapter, const std::filesystem::path& path) {
  save_blob(adapter_to_blob(adapter), path);
}

Adapter load_adapter(const std::filesystem::path& path) { return adapter_from_blob(load_blob(path)); }

}  // namespace tfa
