#pragma once

#include <string>
#include <vector>

#include "tfa/nn/autodiff.hpp"
#include "tfa/rng.hpp"

namespace tfa::nn {

/// Ordered, named collection of trainable leaves. The order defines both
/// the optimizer slot layout and the checkpoint layout.
struct ParamMap {
  std::vector<std::pair<std::string, Var>> items;

  void add(const std::string& name, const Var& v) { items.emplace_back(name, v); }
  void merge(const ParamMap& other, const std::string& prefix) {
    for (const auto& [n, v] : other.items) items.emplace_back(prefix + n, v);
  }
  std::vector<Var> vars() const {
    std::vector<Var> out;
    out.reserve(items.size());
    for (const auto& [n, v] : items) out.push_back(v);
    return out;
  }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : items) n += static_cast<std::size_t>(v->val.size());
    return n;
  }
};

Mat xavier_init(int rows, int cols, Rng& rng);

/// Dense layers with tanh between them and a linear output layer.
struct Mlp {
  std::vector<Var> weights;
  std::vector<Var> biases;

  ParamMap params(const std::string& prefix) const;
};

Mlp make_mlp(const std::vector<int>& dims, Rng& rng, bool zero_last = false);
Var mlp_forward(const Mlp& mlp, const Var& x);

Var linear(const Var& x, const Var& w, const Var& b);

/// Pre-norm transformer block: x += MHA(LN(x)); x += MLP(LN(x)).
struct TransformerBlock {
  Var ln1_g, ln1_b;
  Var wq, bq, wk, bk, wv, bv, wo, bo;
  Var ln2_g, ln2_b;
  Var w1, b1, w2, b2;

  ParamMap params(const std::string& prefix) const;
};

TransformerBlock make_block(int embed, int mlp_hidden, Rng& rng);
Var block_forward(const TransformerBlock& blk, const Var& x, int seq_len, int heads, bool causal);

}  // namespace tfa::nn
