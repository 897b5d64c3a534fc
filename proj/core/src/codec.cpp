#include "tfa/codec.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tfa/common.hpp"
#include "tfa/nn/autodiff.hpp"

namespace tfa {

using nn::Var;

namespace {
constexpr int kRecentCapacity = 512;
}

Codebook make_codebook(const Eigen::MatrixXd& words) {
  Codebook b;
  b.words = nn::leaf(words);
  b.usage.assign(static_cast<size_t>(words.rows()), 0);
  b.idle.assign(static_cast<size_t>(words.rows()), 0);
  return b;
}

int nearest_code(const Eigen::MatrixXd& words, const Eigen::VectorXd& z) {
  if (words.rows() == 0) throw EmptyInputError("nearest_code: empty codebook");
  if (words.cols() != z.size()) throw ShapeError("nearest_code: dimension mismatch");
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < words.rows(); ++k) {
    const double d = (words.row(k).transpose() - z).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

QuantResult quantize(Codebook& book, const Eigen::VectorXd& z) {
  if (!z.allFinite()) throw NumericalError("quantize: non-finite latent");
  const int idx = nearest_code(book.words->val, z);
  ++book.usage[static_cast<size_t>(idx)];
  return {idx, book.words->val.row(idx).transpose()};
}

double codebook_perplexity(const Codebook& book) {
  std::uint64_t total = 0;
  for (std::uint64_t u : book.usage) total += u;
  if (total == 0) throw EmptyInputError("codebook_perplexity: no usage recorded");
  double h = 0.0;
  for (std::uint64_t u : book.usage) {
    if (u == 0) continue;
    const double p = static_cast<double>(u) / static_cast<double>(total);
    h -= p * std::log(p);
  }
  return std::exp(h);
}

Eigen::MatrixXd kmeans_rows(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                            int iterations) {
  if (points.rows() < k) throw ConfigError("kmeans_rows: need at least k points");
  Rng rng(seed);

  // Degenerate batch: fewer than k distinct rows cannot seed k clusters.
  {
    std::vector<Eigen::Index> distinct;
    for (Eigen::Index i = 0; i < points.rows() && static_cast<int>(distinct.size()) < k; ++i) {
      bool dup = false;
      for (Eigen::Index j : distinct) {
        if ((points.row(i) - points.row(j)).squaredNorm() < 1e-24) {
          dup = true;
          break;
        }
      }
      if (!dup) distinct.push_back(i);
    }
    if (static_cast<int>(distinct.size()) < k) {
      Eigen::MatrixXd words(k, points.cols());
      for (int r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < points.cols(); ++c) words(r, c) = gaussian(rng);
      }
      return words;
    }
  }

  // k-means++ seeding.
  Eigen::MatrixXd centers(k, points.cols());
  centers.row(0) = points.row(uniform_int(rng, static_cast<int>(points.rows())));
  Eigen::VectorXd d2 = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double r = uniform01(rng) * total;
      for (Eigen::Index i = 0; i < points.rows(); ++i) {
        r -= d2[i];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = uniform_int(rng, static_cast<int>(points.rows()));
    }
    centers.row(c) = points.row(pick);
    d2 = d2.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> assign(static_cast<size_t>(points.rows()), 0);
  for (int it = 0; it < iterations; ++it) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      assign[static_cast<size_t>(i)] = nearest_code(centers, points.row(i).transpose());
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      sums.row(assign[static_cast<size_t>(i)]) += points.row(i);
      ++counts[static_cast<size_t>(assign[static_cast<size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] > 0) centers.row(c) = sums.row(c) / counts[static_cast<size_t>(c)];
    }
  }
  return centers;
}

nn::ParamMap ForceCodec::params() const {
  nn::ParamMap p;
  p.merge(enc_pmap.params("codec.enc_pmap"), "");
  p.merge(enc_wrench.params("codec.enc_wrench"), "");
  p.merge(dec_pmap.params("codec.dec_pmap"), "");
  p.merge(dec_wrench.params("codec.dec_wrench"), "");
  p.add("codec.book_pmap", book_pmap.words);
  if (!cfg.shared_codebook) p.add("codec.book_wrench", book_wrench.words);
  return p;
}

ForceCodec make_force_codec(const CodecConfig& cfg, std::uint64_t seed) {
  if (cfg.k_pmap < 2 || cfg.k_wrench < 2) throw ConfigError("codec: codebook sizes must be >= 2");
  Rng rng(derive_seed(seed, 0x10));
  ForceCodec c;
  c.cfg = cfg;
  c.enc_pmap = nn::make_mlp({cfg.pmap_in(), cfg.hidden, cfg.hidden, cfg.code_dim}, rng);
  c.enc_wrench = nn::make_mlp({cfg.wrench_in(), cfg.hidden, cfg.hidden, cfg.code_dim}, rng);
  c.dec_pmap = nn::make_mlp({cfg.code_dim, cfg.hidden, cfg.hidden, cfg.pmap_in()}, rng);
  c.dec_wrench = nn::make_mlp({cfg.code_dim, cfg.hidden, cfg.hidden, cfg.wrench_in()}, rng);

  if (cfg.shared_codebook) {
    Eigen::MatrixXd w(cfg.k_pmap + cfg.k_wrench, 2 * cfg.code_dim);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index cc = 0; cc < w.cols(); ++cc) w(r, cc) = 0.1 * gaussian(rng);
    }
    c.book_pmap = make_codebook(w);
  } else {
    Eigen::MatrixXd wp(cfg.k_pmap, cfg.code_dim), ww(cfg.k_wrench, cfg.code_dim);
    for (Eigen::Index r = 0; r < wp.rows(); ++r) {
      for (Eigen::Index cc = 0; cc < wp.cols(); ++cc) wp(r, cc) = 0.1 * gaussian(rng);
    }
    for (Eigen::Index r = 0; r < ww.rows(); ++r) {
      for (Eigen::Index cc = 0; cc < ww.cols(); ++cc) ww(r, cc) = 0.1 * gaussian(rng);
    }
    c.book_pmap = make_codebook(wp);
    c.book_wrench = make_codebook(ww);
  }
  return c;
}

void init_codebooks(ForceCodec& codec, const Eigen::MatrixXd& z_pmap,
                    const Eigen::MatrixXd& z_wrench, std::uint64_t seed) {
  const CodecConfig& cfg = codec.cfg;
  const int needed = std::max(cfg.k_pmap, cfg.k_wrench);
  if (z_pmap.rows() < needed || z_wrench.rows() < needed) {
    throw ConfigError("init_codebooks: first batch smaller than the largest codebook");
  }
  if (cfg.shared_codebook) {
    Eigen::MatrixXd z(z_pmap.rows(), z_pmap.cols() + z_wrench.cols());
    z << z_pmap, z_wrench;
    codec.book_pmap.words->val = kmeans_rows(z, cfg.k_pmap + cfg.k_wrench, derive_seed(seed, 1));
  } else {
    codec.book_pmap.words->val = kmeans_rows(z_pmap, cfg.k_pmap, derive_seed(seed, 1));
    codec.book_wrench.words->val = kmeans_rows(z_wrench, cfg.k_wrench, derive_seed(seed, 2));
  }
  codec.books_ready = true;
}

namespace {

void remember_latents(ForceCodec& codec, const Eigen::MatrixXd& zp, const Eigen::MatrixXd& zw) {
  for (Eigen::Index i = 0; i < zp.rows(); ++i) {
    if (static_cast<int>(codec.recent_pmap.size()) < kRecentCapacity) {
      codec.recent_pmap.push_back(zp.row(i).transpose());
      codec.recent_wrench.push_back(zw.row(i).transpose());
    } else {
      codec.recent_pmap[static_cast<size_t>(codec.recent_next)] = zp.row(i).transpose();
      codec.recent_wrench[static_cast<size_t>(codec.recent_next)] = zw.row(i).transpose();
      codec.recent_next = (codec.recent_next + 1) % kRecentCapacity;
    }
  }
}

/// quant + commitment terms for one modality, batch mean.
Var quant_terms(const Var& z, const Var& words, const std::vector<int>& idx, double beta) {
  const Eigen::Index b = z->val.rows();
  Var sel = nn::gather_rows(words, idx);
  Var codebook_term = nn::sum_sq(nn::sub(nn::constant(z->val), sel));
  Var commit_term = nn::sum_sq(nn::sub(z, nn::constant(sel->val)));
  return nn::scale(nn::add(codebook_term, nn::scale(commit_term, beta)), 1.0 / static_cast<double>(b));
}

}  // namespace

CodecForward codec_forward(ForceCodec& codec, const Eigen::MatrixXd& x_pmap,
                           const Eigen::MatrixXd& x_wrench, bool update_usage) {
  const CodecConfig& cfg = codec.cfg;
  if (x_pmap.cols() != cfg.pmap_in() || x_wrench.cols() != cfg.wrench_in() ||
      x_pmap.rows() != x_wrench.rows()) {
    throw ShapeError("codec_forward: window shapes disagree with the config");
  }
  const Eigen::Index b = x_pmap.rows();

  CodecForward out;
  out.z_pmap = nn::mlp_forward(codec.enc_pmap, nn::constant(x_pmap));
  out.z_wrench = nn::mlp_forward(codec.enc_wrench, nn::constant(x_wrench));
  if (!out.z_pmap->val.allFinite() || !out.z_wrench->val.allFinite()) {
    throw NumericalError("codec_forward: non-finite encoder output");
  }

  if (update_usage) remember_latents(codec, out.z_pmap->val, out.z_wrench->val);

  auto pick = [&](Codebook& book, const Eigen::MatrixXd& z, std::vector<int>& idx) {
    idx.resize(static_cast<size_t>(z.rows()));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      if (update_usage) {
        idx[static_cast<size_t>(i)] = quantize(book, z.row(i).transpose()).index;
      } else {
        idx[static_cast<size_t>(i)] = nearest_code(book.words->val, z.row(i).transpose());
      }
    }
  };

  if (cfg.shared_codebook) {
    Var z_cat = nn::concat_cols(out.z_pmap, out.z_wrench);
    pick(codec.book_pmap, z_cat->val, out.idx_pmap);
    out.idx_wrench = out.idx_pmap;

    Var sel = nn::gather_rows(codec.book_pmap.words, out.idx_pmap);
    out.code_st = nn::straight_through(z_cat, sel->val);
    out.quant_loss = quant_terms(z_cat, codec.book_pmap.words, out.idx_pmap, cfg.beta);

    Eigen::MatrixXd sel_val = sel->val;
    Var dec_in_p = nn::constant(sel_val.leftCols(cfg.code_dim));
    Var dec_in_w = nn::constant(sel_val.rightCols(cfg.code_dim));
    Var xhat_p = nn::mlp_forward(codec.dec_pmap, dec_in_p);
    Var xhat_w = nn::mlp_forward(codec.dec_wrench, dec_in_w);
    out.recon_loss = nn::scale(nn::add(nn::sum_sq(nn::sub(xhat_p, nn::constant(x_pmap))),
                                       nn::sum_sq(nn::sub(xhat_w, nn::constant(x_wrench)))),
                               1.0 / static_cast<double>(b));
  } else {
    pick(codec.book_pmap, out.z_pmap->val, out.idx_pmap);
    pick(codec.book_wrench, out.z_wrench->val, out.idx_wrench);

    Var sel_p = nn::gather_rows(codec.book_pmap.words, out.idx_pmap);
    Var sel_w = nn::gather_rows(codec.book_wrench.words, out.idx_wrench);
    Var st_p = nn::straight_through(out.z_pmap, sel_p->val);
    Var st_w = nn::straight_through(out.z_wrench, sel_w->val);
    out.code_st = nn::concat_cols(st_p, st_w);

    out.quant_loss = nn::add(quant_terms(out.z_pmap, codec.book_pmap.words, out.idx_pmap, cfg.beta),
                             quant_terms(out.z_wrench, codec.book_wrench.words, out.idx_wrench, cfg.beta));

    Var xhat_p = nn::mlp_forward(codec.dec_pmap, nn::constant(sel_p->val));
    Var xhat_w = nn::mlp_forward(codec.dec_wrench, nn::constant(sel_w->val));
    out.recon_loss = nn::scale(nn::add(nn::sum_sq(nn::sub(xhat_p, nn::constant(x_pmap))),
                                       nn::sum_sq(nn::sub(xhat_w, nn::constant(x_wrench)))),
                               1.0 / static_cast<double>(b));
  }

  if (update_usage) {
    auto mark = [](Codebook& book, const std::vector<int>& idx) {
      std::vector<bool> used(book.idle.size(), false);
      for (int i : idx) used[static_cast<size_t>(i)] = true;
      for (size_t k = 0; k < book.idle.size(); ++k) {
        book.idle[k] = used[k] ? 0 : book.idle[k] + 1;
      }
    };
    mark(codec.book_pmap, out.idx_pmap);
    if (!cfg.shared_codebook) mark(codec.book_wrench, out.idx_wrench);
  }
  return out;
}

void revive_dead_codes(ForceCodec& codec, Rng& rng) {
  auto revive = [&](Codebook& book, const std::vector<Eigen::VectorXd>& recent_a,
                    const std::vector<Eigen::VectorXd>* recent_b) {
    if (recent_a.empty()) return;
    for (size_t k = 0; k < book.idle.size(); ++k) {
      if (book.idle[k] < codec.cfg.dead_code_steps) continue;
      const int pick = uniform_int(rng, static_cast<int>(recent_a.size()));
      if (recent_b == nullptr) {
        book.words->val.row(static_cast<Eigen::Index>(k)) = recent_a[static_cast<size_t>(pick)].transpose();
      } else {
        // Shared book rows span both modalities.
        book.words->val.row(static_cast<Eigen::Index>(k))
            << recent_a[static_cast<size_t>(pick)].transpose(),
            (*recent_b)[static_cast<size_t>(pick)].transpose();
      }
      book.idle[k] = 0;
    }
  };
  if (codec.cfg.shared_codebook) {
    revive(codec.book_pmap, codec.recent_pmap, &codec.recent_wrench);
  } else {
    revive(codec.book_pmap, codec.recent_pmap, nullptr);
    revive(codec.book_wrench, codec.recent_wrench, nullptr);
  }
}

QuantizedForceCode encode_and_quantize(ForceCodec& codec, const Eigen::VectorXd& x_pmap,
                                       const Eigen::VectorXd& x_wrench, bool update_usage) {
  nn::NoGrad ng;
  CodecForward f = codec_forward(codec, x_pmap.transpose(), x_wrench.transpose(), update_usage);
  QuantizedForceCode q;
  q.idx_pmap = f.idx_pmap[0];
  q.idx_wrench = f.idx_wrench[0];
  q.concat = f.code_st->val.row(0).transpose();
  q.code_pmap = q.concat.head(codec.cfg.code_dim);
  q.code_wrench = q.concat.tail(codec.cfg.code_dim);
  return q;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> decode_force_window(const ForceCodec& codec,
                                                                const Eigen::VectorXd& code_pmap,
                                                                const Eigen::VectorXd& code_wrench) {
  nn::NoGrad ng;
  Var xp = nn::mlp_forward(codec.dec_pmap, nn::constant(code_pmap.transpose()));
  Var xw = nn::mlp_forward(codec.dec_wrench, nn::constant(code_wrench.transpose()));
  return {xp->val.row(0).transpose(), xw->val.row(0).transpose()};
}

}  // namespace tfa
