#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <vector>

namespace tfa::nn {

using Mat = Eigen::MatrixXd;

/// One value in a dynamically built computation graph. Ops run eagerly; the
/// backward closure of each node scatters the node's gradient into its
/// parents. Creation order is a valid topological order.
struct Node {
  Mat val;
  Mat grad;  // allocated on first use
  bool needs_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  Mat& g() {
    if (grad.size() == 0) grad = Mat::Zero(val.rows(), val.cols());
    return grad;
  }
};

using Var = std::shared_ptr<Node>;

/// Gradient recording is on by default; wrap inference-only code in NoGrad
/// to skip building the tape.
bool grad_enabled();
struct NoGrad {
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  bool prev_;
};

Var leaf(Mat v);           // trainable leaf
Var constant(Mat v);       // non-differentiable input
Var scalar(double v);      // 1x1 constant

/// Backpropagates from a 1x1 root, accumulating into .grad of every
/// reachable node that needs gradients.
void backward(const Var& root);

// Elementwise and shape ops ------------------------------------------------
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_rowvec(const Var& x, const Var& row);  // broadcast 1xD over rows
Var tanh_v(const Var& a);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const Var& a, const Var& b);
Var slice_cols(const Var& a, int col0, int ncols);
Var slice_rows(const Var& a, int row0, int nrows);
Var gather_rows(const Var& table, const std::vector<int>& idx);
Var stopgrad(const Var& a);

/// Forward value is `quantized`; gradients pass through to z unchanged.
Var straight_through(const Var& z, const Mat& quantized);

// Rowwise reductions and normalizations ------------------------------------
Var softmax_rows(const Var& a);
Var logsumexp_rows(const Var& a);          // Rx1
Var diag_vec(const Var& a);                // Rx1 from square matrix
Var l2_normalize_rows(const Var& a);       // throws on zero-norm rows
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
Var mean_rows_group(const Var& x, int group);  // (R/group)xD block means

// Scalar reductions ---------------------------------------------------------
Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var sum_sq(const Var& a);  // squared Frobenius norm

// Attention -----------------------------------------------------------------
/// Rowwise-softmax attention probabilities for S stacked sequences of length
/// seq_len. q and k are (S*seq_len) x dim with heads side by side in the
/// column dimension. Output stacks one seq_len x seq_len block per
/// (sequence, head) pair. With `causal`, position i attends to j <= i.
Var attention_probs(const Var& q, const Var& k, int seq_len, int heads, bool causal);

/// Applies attention probabilities to values: output is (S*seq_len) x dim.
Var attention_mix(const Var& probs, const Var& v, int seq_len, int heads);

}  // namespace tfa::nn
