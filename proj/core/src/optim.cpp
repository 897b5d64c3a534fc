#include "tfa/nn/optim.hpp"

#include <cmath>

#include "tfa/common.hpp"

namespace tfa::nn {

void Adam::step(const std::vector<Var>& params) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const Var& p : params) {
      m_.push_back(Mat::Zero(p->val.rows(), p->val.cols()));
      v_.push_back(Mat::Zero(p->val.rows(), p->val.cols()));
    }
  }
  if (m_.size() != params.size()) throw ShapeError("Adam::step: parameter count changed");

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1, t_);
  const double bc2 = 1.0 - std::pow(beta2, t_);
  for (size_t i = 0; i < params.size(); ++i) {
    Node& p = *params[i];
    if (p.grad.size() == 0) continue;
    m_[i] = beta1 * m_[i] + (1.0 - beta1) * p.grad;
    v_[i] = beta2 * v_[i] + (1.0 - beta2) * p.grad.cwiseProduct(p.grad);
    p.val.array() -=
        lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps);
  }
}

void Adam::zero_grad(const std::vector<Var>& params) {
  for (const Var& p : params) {
    if (p->grad.size() != 0) p->grad.setZero();
  }
}

}  // namespace tfa::nn
