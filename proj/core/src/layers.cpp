#include "tfa/nn/layers.hpp"

#include <cmath>

#include "tfa/common.hpp"

namespace tfa::nn {

Mat xavier_init(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = uniform(rng, -bound, bound);
  }
  return m;
}

ParamMap Mlp::params(const std::string& prefix) const {
  ParamMap p;
  for (size_t i = 0; i < weights.size(); ++i) {
    p.add(prefix + ".w" + std::to_string(i), weights[i]);
    p.add(prefix + ".b" + std::to_string(i), biases[i]);
  }
  return p;
}

Mlp make_mlp(const std::vector<int>& dims, Rng& rng, bool zero_last) {
  if (dims.size() < 2) throw ConfigError("make_mlp: need at least input and output dims");
  Mlp mlp;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    const bool last = i + 2 == dims.size();
    Mat w = (last && zero_last) ? Mat::Zero(dims[i], dims[i + 1])
                                : xavier_init(dims[i], dims[i + 1], rng);
    mlp.weights.push_back(leaf(std::move(w)));
    mlp.biases.push_back(leaf(Mat::Zero(1, dims[i + 1])));
  }
  return mlp;
}

Var linear(const Var& x, const Var& w, const Var& b) { return add_rowvec(matmul(x, w), b); }

Var mlp_forward(const Mlp& mlp, const Var& x) {
  Var h = x;
  for (size_t i = 0; i < mlp.weights.size(); ++i) {
    h = linear(h, mlp.weights[i], mlp.biases[i]);
    if (i + 1 < mlp.weights.size()) h = tanh_v(h);
  }
  return h;
}

ParamMap TransformerBlock::params(const std::string& prefix) const {
  ParamMap p;
  p.add(prefix + ".ln1_g", ln1_g);
  p.add(prefix + ".ln1_b", ln1_b);
  p.add(prefix + ".wq", wq);
  p.add(prefix + ".bq", bq);
  p.add(prefix + ".wk", wk);
  p.add(prefix + ".bk", bk);
  p.add(prefix + ".wv", wv);
  p.add(prefix + ".bv", bv);
  p.add(prefix + ".wo", wo);
  p.add(prefix + ".bo", bo);
  p.add(prefix + ".ln2_g", ln2_g);
  p.add(prefix + ".ln2_b", ln2_b);
  p.add(prefix + ".w1", w1);
  p.add(prefix + ".b1", b1);
  p.add(prefix + ".w2", w2);
  p.add(prefix + ".b2", b2);
  return p;
}

TransformerBlock make_block(int embed, int mlp_hidden, Rng& rng) {
  TransformerBlock b;
  b.ln1_g = leaf(Mat::Ones(1, embed));
  b.ln1_b = leaf(Mat::Zero(1, embed));
  b.wq = leaf(xavier_init(embed, embed, rng));
  b.bq = leaf(Mat::Zero(1, embed));
  b.wk = leaf(xavier_init(embed, embed, rng));
  b.bk = leaf(Mat::Zero(1, embed));
  b.wv = leaf(xavier_init(embed, embed, rng));
  b.bv = leaf(Mat::Zero(1, embed));
  b.wo = leaf(xavier_init(embed, embed, rng));
  b.bo = leaf(Mat::Zero(1, embed));
  b.ln2_g = leaf(Mat::Ones(1, embed));
  b.ln2_b = leaf(Mat::Zero(1, embed));
  b.w1 = leaf(xavier_init(embed, mlp_hidden, rng));
  b.b1 = leaf(Mat::Zero(1, mlp_hidden));
  b.w2 = leaf(xavier_init(mlp_hidden, embed, rng));
  b.b2 = leaf(Mat::Zero(1, embed));
  return b;
}

Var block_forward(const TransformerBlock& blk, const Var& x, int seq_len, int heads, bool causal) {
  Var h = layer_norm(x, blk.ln1_g, blk.ln1_b);
  Var q = linear(h, blk.wq, blk.bq);
  Var k = linear(h, blk.wk, blk.bk);
  Var v = linear(h, blk.wv, blk.bv);
  Var probs = attention_probs(q, k, seq_len, heads, causal);
  Var mixed = attention_mix(probs, v, seq_len, heads);
  Var attn = linear(mixed, blk.wo, blk.bo);
  Var x1 = add(x, attn);

  Var h2 = layer_norm(x1, blk.ln2_g, blk.ln2_b);
  Var m = linear(tanh_v(linear(h2, blk.w1, blk.b1)), blk.w2, blk.b2);
  return add(x1, m);
}

}  // namespace tfa::nn
