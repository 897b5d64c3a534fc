#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "tfa/codec.hpp"
#include "tfa/nn/autodiff.hpp"
#include "tfa/nn/layers.hpp"
#include "tfa/rng.hpp"

namespace tfa::test {

inline nn::Mat random_mat(int rows, int cols, Rng& rng, double scale = 1.0) {
  nn::Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = scale * gaussian(rng);
  }
  return m;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "param[i](r,c)" of the worst coordinate
  int checked = 0;

  bool ok(double tol = 1e-4) const { return checked > 0 && max_rel_error < tol; }
};

/// Central finite differences against the tape's gradients. `make_loss`
/// must rebuild the full graph from the current parameter values and return
/// the scalar loss node.
inline GradCheckResult check_gradients(const std::vector<nn::Var>& params,
                                       const std::function<nn::Var()>& make_loss,
                                       double h = 1e-5) {
  nn::Var loss = make_loss();
  nn::backward(loss);
  std::vector<nn::Mat> analytic;
  analytic.reserve(params.size());
  for (const nn::Var& p : params) {
    analytic.push_back(p->grad.size() == 0 ? nn::Mat::Zero(p->val.rows(), p->val.cols()) : p->grad);
    if (p->grad.size() != 0) p->grad.setZero();
  }

  auto eval = [&]() {
    nn::NoGrad ng;
    return make_loss()->val(0, 0);
  };

  GradCheckResult res;
  for (size_t i = 0; i < params.size(); ++i) {
    nn::Mat& v = params[i]->val;
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        const double keep = v(r, c);
        v(r, c) = keep + h;
        const double up = eval();
        v(r, c) = keep - h;
        const double down = eval();
        v(r, c) = keep;
        const double fd = (up - down) / (2.0 * h);
        const double an = analytic[i](r, c);
        const double diff = std::abs(fd - an);
        const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
        double rel = diff / denom;
        if (diff < 1e-8) rel = 0.0;  // both effectively zero
        if (rel > res.max_rel_error) {
          res.max_rel_error = rel;
          res.worst = "param[" + std::to_string(i) + "](" + std::to_string(r) + "," +
                      std::to_string(c) + ") fd=" + std::to_string(fd) + " an=" + std::to_string(an);
        }
        ++res.checked;
      }
    }
  }
  return res;
}

/// Snapshot of everything the codec's stop-gradient operators capture at the
/// base point: quantization indices, latent values, selected codewords.
/// Finite differences cannot see through sg[.], so the checkable function is
/// the surrogate with these captures frozen; its gradient is exactly the
/// gradient the straight-through estimator defines.
struct FrozenQuant {
  std::vector<int> idx_pmap, idx_wrench;
  nn::Mat z_pmap0, z_wrench0;    // latents at the base point
  nn::Mat sel_pmap0, sel_wrench0;  // selected codewords at the base point
  double min_margin = 0.0;  // top-2 distance gap; must dwarf the FD step
};

inline FrozenQuant freeze_quantization(ForceCodec& codec, const nn::Mat& xp, const nn::Mat& xw) {
  nn::NoGrad ng;
  CodecForward f = codec_forward(codec, xp, xw, false);
  FrozenQuant fz;
  fz.idx_pmap = f.idx_pmap;
  fz.idx_wrench = f.idx_wrench;
  fz.z_pmap0 = f.z_pmap->val;
  fz.z_wrench0 = f.z_wrench->val;

  auto margin = [](const Codebook& book, const Eigen::VectorXd& z) {
    double best = 1e300, second = 1e300;
    for (int k = 0; k < book.size(); ++k) {
      const double d = (book.words->val.row(k).transpose() - z).squaredNorm();
      if (d < best) {
        second = best;
        best = d;
      } else if (d < second) {
        second = d;
      }
    }
    return second - best;
  };

  fz.min_margin = 1e300;
  if (codec.cfg.shared_codebook) {
    nn::Mat zc(fz.z_pmap0.rows(), fz.z_pmap0.cols() + fz.z_wrench0.cols());
    zc << fz.z_pmap0, fz.z_wrench0;
    nn::Mat sel(zc.rows(), zc.cols());
    for (Eigen::Index i = 0; i < zc.rows(); ++i) {
      sel.row(i) = codec.book_pmap.words->val.row(fz.idx_pmap[static_cast<size_t>(i)]);
      fz.min_margin = std::min(fz.min_margin, margin(codec.book_pmap, zc.row(i).transpose()));
    }
    fz.sel_pmap0 = sel.leftCols(codec.cfg.code_dim);
    fz.sel_wrench0 = sel.rightCols(codec.cfg.code_dim);
  } else {
    fz.sel_pmap0.resize(fz.z_pmap0.rows(), fz.z_pmap0.cols());
    fz.sel_wrench0.resize(fz.z_wrench0.rows(), fz.z_wrench0.cols());
    for (Eigen::Index i = 0; i < fz.z_pmap0.rows(); ++i) {
      fz.sel_pmap0.row(i) = codec.book_pmap.words->val.row(fz.idx_pmap[static_cast<size_t>(i)]);
      fz.sel_wrench0.row(i) = codec.book_wrench.words->val.row(fz.idx_wrench[static_cast<size_t>(i)]);
      fz.min_margin = std::min(fz.min_margin, margin(codec.book_pmap, fz.z_pmap0.row(i).transpose()));
      fz.min_margin = std::min(fz.min_margin, margin(codec.book_wrench, fz.z_wrench0.row(i).transpose()));
    }
  }
  return fz;
}

/// Surrogate codec pass with the sg captures frozen. Gradient routing is
/// identical to codec_forward: encoders via straight-through + commitment,
/// codebooks via the codebook term, decoders via reconstruction.
struct SurrogateCodec {
  nn::Var code_st, quant_loss, recon_loss;
};

inline SurrogateCodec codec_surrogate(ForceCodec& codec, const nn::Mat& xp, const nn::Mat& xw,
                                      const FrozenQuant& fz) {
  const CodecConfig& cfg = codec.cfg;
  const double inv_b = 1.0 / static_cast<double>(xp.rows());
  nn::Var zp = nn::mlp_forward(codec.enc_pmap, nn::constant(xp));
  nn::Var zw = nn::mlp_forward(codec.enc_wrench, nn::constant(xw));

  SurrogateCodec out;
  if (cfg.shared_codebook) {
    nn::Var zc = nn::concat_cols(zp, zw);
    nn::Var sel = nn::gather_rows(codec.book_pmap.words, fz.idx_pmap);
    nn::Mat zc0(fz.z_pmap0.rows(), 2 * cfg.code_dim);
    zc0 << fz.z_pmap0, fz.z_wrench0;
    nn::Mat sel0(fz.sel_pmap0.rows(), 2 * cfg.code_dim);
    sel0 << fz.sel_pmap0, fz.sel_wrench0;
    nn::Var t1 = nn::sum_sq(nn::sub(nn::constant(zc0), sel));
    nn::Var t2 = nn::sum_sq(nn::sub(zc, nn::constant(sel0)));
    out.quant_loss = nn::scale(nn::add(t1, nn::scale(t2, cfg.beta)), inv_b);
    out.code_st = nn::add(zc, nn::constant(sel0 - zc0));
  } else {
    nn::Var sel_p = nn::gather_rows(codec.book_pmap.words, fz.idx_pmap);
    nn::Var sel_w = nn::gather_rows(codec.book_wrench.words, fz.idx_wrench);
    nn::Var t1 = nn::add(nn::sum_sq(nn::sub(nn::constant(fz.z_pmap0), sel_p)),
                         nn::sum_sq(nn::sub(nn::constant(fz.z_wrench0), sel_w)));
    nn::Var t2 = nn::add(nn::sum_sq(nn::sub(zp, nn::constant(fz.sel_pmap0))),
                         nn::sum_sq(nn::sub(zw, nn::constant(fz.sel_wrench0))));
    out.quant_loss = nn::scale(nn::add(t1, nn::scale(t2, cfg.beta)), inv_b);
    out.code_st = nn::concat_cols(nn::add(zp, nn::constant(fz.sel_pmap0 - fz.z_pmap0)),
                                  nn::add(zw, nn::constant(fz.sel_wrench0 - fz.z_wrench0)));
  }
  nn::Var xhat_p = nn::mlp_forward(codec.dec_pmap, nn::constant(fz.sel_pmap0));
  nn::Var xhat_w = nn::mlp_forward(codec.dec_wrench, nn::constant(fz.sel_wrench0));
  out.recon_loss = nn::scale(nn::add(nn::sum_sq(nn::sub(xhat_p, nn::constant(xp))),
                                     nn::sum_sq(nn::sub(xhat_w, nn::constant(xw)))),
                             inv_b);
  return out;
}

}  // namespace tfa::test
