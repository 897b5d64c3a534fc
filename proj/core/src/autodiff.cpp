#include "tfa/nn/autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "tfa/common.hpp"

namespace tfa::nn {

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_next_id{1};

Var make_node(Mat val, std::vector<Var> parents, std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  if (g_grad_enabled) {
    bool any = false;
    for (const Var& p : parents) any = any || p->needs_grad;
    if (any) {
      n->needs_grad = true;
      n->parents = std::move(parents);
      n->backward = std::move(bw);
    }
  }
  return n;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (a->val.rows() != b->val.rows() || a->val.cols() != b->val.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a->val.rows()) + "x" +
                     std::to_string(a->val.cols()) + " vs " + std::to_string(b->val.rows()) + "x" +
                     std::to_string(b->val.cols()));
  }
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGrad::NoGrad() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGrad::~NoGrad() { g_grad_enabled = prev_; }

Var leaf(Mat v) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  n->needs_grad = true;
  return n;
}

Var constant(Mat v) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

Var scalar(double v) { return constant(Mat::Constant(1, 1, v)); }

void backward(const Var& root) {
  if (root->val.rows() != 1 || root->val.cols() != 1) {
    throw ShapeError("backward: root must be a 1x1 scalar");
  }
  // Collect the reachable subgraph; creation ids give a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<Node*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const Var& p : n->parents) {
      if (p->needs_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
  std::sort(order.begin(), order.end(), [](Node* a, Node* b) { return a->id > b->id; });

  root->g()(0, 0) += 1.0;
  for (Node* n : order) {
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Var add(const Var& a, const Var& b) {
  check_same_shape(a, b, "add");
  return make_node(a->val + b->val, {a, b}, [a, b](Node& n) {
    if (a->needs_grad) a->g() += n.grad;
    if (b->needs_grad) b->g() += n.grad;
  });
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  return make_node(a->val - b->val, {a, b}, [a, b](Node& n) {
    if (a->needs_grad) a->g() += n.grad;
    if (b->needs_grad) b->g() -= n.grad;
  });
}

Var hadamard(const Var& a, const Var& b) {
  check_same_shape(a, b, "hadamard");
  return make_node(a->val.cwiseProduct(b->val), {a, b}, [a, b](Node& n) {
    if (a->needs_grad) a->g() += n.grad.cwiseProduct(b->val);
    if (b->needs_grad) b->g() += n.grad.cwiseProduct(a->val);
  });
}

Var scale(const Var& a, double c) {
  return make_node(a->val * c, {a}, [a, c](Node& n) {
    if (a->needs_grad) a->g() += c * n.grad;
  });
}

Var add_rowvec(const Var& x, const Var& row) {
  if (row->val.rows() != 1 || row->val.cols() != x->val.cols()) {
    throw ShapeError("add_rowvec: bias must be 1 x cols(x)");
  }
  Mat out = x->val;
  out.rowwise() += row->val.row(0);
  return make_node(std::move(out), {x, row}, [x, row](Node& n) {
    if (x->needs_grad) x->g() += n.grad;
    if (row->needs_grad) row->g() += n.grad.colwise().sum();
  });
}

Var tanh_v(const Var& a) {
  Mat out = a->val.array().tanh();
  return make_node(out, {a}, [a, out](Node& n) {
    if (a->needs_grad) a->g().array() += n.grad.array() * (1.0 - out.array().square());
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a->val.cols() != b->val.rows()) {
    throw ShapeError("matmul: inner dimensions disagree");
  }
  return make_node(a->val * b->val, {a, b}, [a, b](Node& n) {
    if (a->needs_grad) a->g().noalias() += n.grad * b->val.transpose();
    if (b->needs_grad) b->g().noalias() += a->val.transpose() * n.grad;
  });
}

Var transpose(const Var& a) {
  return make_node(a->val.transpose(), {a}, [a](Node& n) {
    if (a->needs_grad) a->g() += n.grad.transpose();
  });
}

Var concat_cols(const Var& a, const Var& b) {
  if (a->val.rows() != b->val.rows()) throw ShapeError("concat_cols: row counts differ");
  Mat out(a->val.rows(), a->val.cols() + b->val.cols());
  out << a->val, b->val;
  const int ca = static_cast<int>(a->val.cols());
  return make_node(std::move(out), {a, b}, [a, b, ca](Node& n) {
    if (a->needs_grad) a->g() += n.grad.leftCols(ca);
    if (b->needs_grad) b->g() += n.grad.rightCols(n.grad.cols() - ca);
  });
}

Var concat_rows(const Var& a, const Var& b) {
  if (a->val.cols() != b->val.cols()) throw ShapeError("concat_rows: column counts differ");
  Mat out(a->val.rows() + b->val.rows(), a->val.cols());
  out << a->val, b->val;
  const int ra = static_cast<int>(a->val.rows());
  return make_node(std::move(out), {a, b}, [a, b, ra](Node& n) {
    if (a->needs_grad) a->g() += n.grad.topRows(ra);
    if (b->needs_grad) b->g() += n.grad.bottomRows(n.grad.rows() - ra);
  });
}

Var slice_cols(const Var& a, int col0, int ncols) {
  return make_node(a->val.middleCols(col0, ncols), {a}, [a, col0, ncols](Node& n) {
    if (a->needs_grad) a->g().middleCols(col0, ncols) += n.grad;
  });
}

Var slice_rows(const Var& a, int row0, int nrows) {
  return make_node(a->val.middleRows(row0, nrows), {a}, [a, row0, nrows](Node& n) {
    if (a->needs_grad) a->g().middleRows(row0, nrows) += n.grad;
  });
}

Var gather_rows(const Var& table, const std::vector<int>& idx) {
  Mat out(static_cast<Eigen::Index>(idx.size()), table->val.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= table->val.rows()) throw ShapeError("gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = table->val.row(idx[i]);
  }
  return make_node(std::move(out), {table}, [table, idx](Node& n) {
    if (!table->needs_grad) return;
    Mat& g = table->g();
    for (size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += n.grad.row(static_cast<Eigen::Index>(i));
  });
}

Var stopgrad(const Var& a) { return constant(a->val); }

Var straight_through(const Var& z, const Mat& quantized) {
  if (z->val.rows() != quantized.rows() || z->val.cols() != quantized.cols()) {
    throw ShapeError("straight_through: shape mismatch");
  }
  return make_node(quantized, {z}, [z](Node& n) {
    if (z->needs_grad) z->g() += n.grad;
  });
}

Var softmax_rows(const Var& a) {
  Mat out = a->val;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return make_node(out, {a}, [a, out](Node& n) {
    if (!a->needs_grad) return;
    Mat& g = a->g();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double dot = n.grad.row(r).dot(out.row(r));
      g.row(r).array() += out.row(r).array() * (n.grad.row(r).array() - dot);
    }
  });
}

Var logsumexp_rows(const Var& a) {
  Mat out(a->val.rows(), 1);
  Mat soft = a->val;
  for (Eigen::Index r = 0; r < a->val.rows(); ++r) {
    const double m = a->val.row(r).maxCoeff();
    const Eigen::ArrayXd e = (a->val.row(r).array() - m).exp();
    const double s = e.sum();
    out(r, 0) = m + std::log(s);
    soft.row(r) = (e / s).matrix();
  }
  return make_node(std::move(out), {a}, [a, soft](Node& n) {
    if (a->needs_grad) {
      a->g().array() += soft.array().colwise() * n.grad.col(0).array();
    }
  });
}

Var diag_vec(const Var& a) {
  if (a->val.rows() != a->val.cols()) throw ShapeError("diag_vec: matrix must be square");
  return make_node(a->val.diagonal(), {a}, [a](Node& n) {
    if (a->needs_grad) a->g().diagonal() += n.grad.col(0);
  });
}

Var l2_normalize_rows(const Var& a) {
  Mat out = a->val;
  Eigen::VectorXd norms(a->val.rows());
  for (Eigen::Index r = 0; r < a->val.rows(); ++r) {
    const double nr = a->val.row(r).norm();
    if (nr < 1e-12) throw NumericalError("l2_normalize_rows: zero-norm row " + std::to_string(r));
    norms[r] = nr;
    out.row(r) /= nr;
  }
  return make_node(out, {a}, [a, out, norms](Node& n) {
    if (!a->needs_grad) return;
    Mat& g = a->g();
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      const double dot = n.grad.row(r).dot(out.row(r));
      g.row(r) += (n.grad.row(r) - dot * out.row(r)) / norms[r];
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Eigen::Index rows = x->val.rows(), cols = x->val.cols();
  if (gain->val.cols() != cols || bias->val.cols() != cols) {
    throw ShapeError("layer_norm: gain/bias must be 1 x cols(x)");
  }
  Mat xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mu = x->val.row(r).mean();
    const double var = (x->val.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (x->val.row(r).array() - mu) * inv_std[r];
  }
  Mat out = (xhat.array().rowwise() * gain->val.row(0).array()).rowwise() + bias->val.row(0).array();
  return make_node(std::move(out), {x, gain, bias}, [x, gain, bias, xhat, inv_std](Node& n) {
    if (gain->needs_grad) gain->g() += (n.grad.cwiseProduct(xhat)).colwise().sum();
    if (bias->needs_grad) bias->g() += n.grad.colwise().sum();
    if (!x->needs_grad) return;
    Mat& g = x->g();
    for (Eigen::Index r = 0; r < x->val.rows(); ++r) {
      const Eigen::Array<double, 1, Eigen::Dynamic> dxhat =
          n.grad.row(r).array() * gain->val.row(0).array();
      const double m1 = dxhat.mean();
      const double m2 = (dxhat * xhat.row(r).array()).mean();
      g.row(r).array() += inv_std[r] * (dxhat - m1 - xhat.row(r).array() * m2);
    }
  });
}

Var mean_rows_group(const Var& x, int group) {
  if (group < 1 || x->val.rows() % group != 0) {
    throw ShapeError("mean_rows_group: rows must be a multiple of the group size");
  }
  const Eigen::Index groups = x->val.rows() / group;
  Mat out(groups, x->val.cols());
  for (Eigen::Index s = 0; s < groups; ++s) {
    out.row(s) = x->val.middleRows(s * group, group).colwise().mean();
  }
  return make_node(std::move(out), {x}, [x, group](Node& n) {
    if (!x->needs_grad) return;
    Mat& g = x->g();
    const double inv = 1.0 / group;
    for (Eigen::Index s = 0; s < n.grad.rows(); ++s) {
      const Eigen::RowVectorXd part = inv * n.grad.row(s);
      g.middleRows(s * group, group).rowwise() += part;
    }
  });
}

Var sum_all(const Var& a) {
  return make_node(Mat::Constant(1, 1, a->val.sum()), {a}, [a](Node& n) {
    if (a->needs_grad) a->g().array() += n.grad(0, 0);
  });
}

Var mean_all(const Var& a) {
  const double inv = 1.0 / static_cast<double>(a->val.size());
  return make_node(Mat::Constant(1, 1, a->val.sum() * inv), {a}, [a, inv](Node& n) {
    if (a->needs_grad) a->g().array() += n.grad(0, 0) * inv;
  });
}

Var sum_sq(const Var& a) {
  return make_node(Mat::Constant(1, 1, a->val.squaredNorm()), {a}, [a](Node& n) {
    if (a->needs_grad) a->g() += 2.0 * n.grad(0, 0) * a->val;
  });
}

Var attention_probs(const Var& q, const Var& k, int seq_len, int heads, bool causal) {
  const Eigen::Index rows = q->val.rows();
  const Eigen::Index dim = q->val.cols();
  if (rows % seq_len != 0 || dim % heads != 0 || k->val.rows() != rows || k->val.cols() != dim) {
    throw ShapeError("attention_probs: inconsistent shapes");
  }
  const Eigen::Index seqs = rows / seq_len;
  const Eigen::Index dh = dim / heads;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat probs(seqs * heads * seq_len, seq_len);
  for (Eigen::Index s = 0; s < seqs; ++s) {
    for (Eigen::Index h = 0; h < heads; ++h) {
      auto qb = q->val.block(s * seq_len, h * dh, seq_len, dh);
      auto kb = k->val.block(s * seq_len, h * dh, seq_len, dh);
      Mat sc = att_scale * (qb * kb.transpose());
      auto pb = probs.block((s * heads + h) * seq_len, 0, seq_len, seq_len);
      for (Eigen::Index i = 0; i < seq_len; ++i) {
        const Eigen::Index width = causal ? i + 1 : seq_len;
        const double m = sc.row(i).head(width).maxCoeff();
        Eigen::ArrayXd e = (sc.row(i).head(width).array() - m).exp();
        const double sum = e.sum();
        pb.row(i).setZero();
        pb.row(i).head(width) = (e / sum).matrix();
      }
    }
  }
  return make_node(std::move(probs), {q, k},
                   [q, k, seq_len, heads, att_scale](Node& n) {
                     const Eigen::Index dim = q->val.cols();
                     const Eigen::Index dh = dim / heads;
                     const Eigen::Index seqs = q->val.rows() / seq_len;
                     Mat* qg = q->needs_grad ? &q->g() : nullptr;
                     Mat* kg = k->needs_grad ? &k->g() : nullptr;
                     for (Eigen::Index s = 0; s < seqs; ++s) {
                       for (Eigen::Index h = 0; h < heads; ++h) {
                         auto pb = n.val.block((s * heads + h) * seq_len, 0, seq_len, seq_len);
                         auto dp = n.grad.block((s * heads + h) * seq_len, 0, seq_len, seq_len);
                         // Softmax backward per row; masked entries have p=0
                         // so they contribute nothing.
                         Mat ds(seq_len, seq_len);
                         for (Eigen::Index i = 0; i < seq_len; ++i) {
                           const double dot = dp.row(i).dot(pb.row(i));
                           ds.row(i) = pb.row(i).cwiseProduct(dp.row(i)) - dot * pb.row(i);
                         }
                         ds *= att_scale;
                         auto qb = q->val.block(s * seq_len, h * dh, seq_len, dh);
                         auto kb = k->val.block(s * seq_len, h * dh, seq_len, dh);
                         if (qg) qg->block(s * seq_len, h * dh, seq_len, dh).noalias() += ds * kb;
                         if (kg) kg->block(s * seq_len, h * dh, seq_len, dh).noalias() += ds.transpose() * qb;
                       }
                     }
                   });
}

Var attention_mix(const Var& probs, const Var& v, int seq_len, int heads) {
  const Eigen::Index rows = v->val.rows();
  const Eigen::Index dim = v->val.cols();
  if (rows % seq_len != 0 || dim % heads != 0) throw ShapeError("attention_mix: inconsistent shapes");
  const Eigen::Index seqs = rows / seq_len;
  const Eigen::Index dh = dim / heads;
  if (probs->val.rows() != seqs * heads * seq_len || probs->val.cols() != seq_len) {
    throw ShapeError("attention_mix: probs shape mismatch");
  }

  Mat out(rows, dim);
  for (Eigen::Index s = 0; s < seqs; ++s) {
    for (Eigen::Index h = 0; h < heads; ++h) {
      auto pb = probs->val.block((s * heads + h) * seq_len, 0, seq_len, seq_len);
      auto vb = v->val.block(s * seq_len, h * dh, seq_len, dh);
      out.block(s * seq_len, h * dh, seq_len, dh).noalias() = pb * vb;
    }
  }
  return make_node(std::move(out), {probs, v}, [probs, v, seq_len, heads](Node& n) {
    const Eigen::Index dim = v->val.cols();
    const Eigen::Index dh = dim / heads;
    const Eigen::Index seqs = v->val.rows() / seq_len;
    Mat* pg = probs->needs_grad ? &probs->g() : nullptr;
    Mat* vg = v->needs_grad ? &v->g() : nullptr;
    for (Eigen::Index s = 0; s < seqs; ++s) {
      for (Eigen::Index h = 0; h < heads; ++h) {
        auto pb = probs->val.block((s * heads + h) * seq_len, 0, seq_len, seq_len);
        auto vb = v->val.block(s * seq_len, h * dh, seq_len, dh);
        auto dout = n.grad.block(s * seq_len, h * dh, seq_len, dh);
        if (pg) pg->block((s * heads + h) * seq_len, 0, seq_len, seq_len).noalias() += dout * vb.transpose();
        if (vg) vg->block(s * seq_len, h * dh, seq_len, dh).noalias() += pb.transpose() * dout;
      }
    }
  });
}

}  // namespace tfa::nn
