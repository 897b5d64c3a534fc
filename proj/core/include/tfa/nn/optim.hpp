#pragma once

#include <vector>

#include "tfa/nn/autodiff.hpp"

namespace tfa::nn {

/// Adam with bias correction. Parameter order fixes the state slots, so the
/// same ParamMap ordering must be used for every step of one run.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit Adam(double lr_ = 1e-3) : lr(lr_) {}

  void step(const std::vector<Var>& params);
  static void zero_grad(const std::vector<Var>& params);

 private:
  int t_ = 0;
  std::vector<Mat> m_, v_;
};

}  // namespace tfa::nn
