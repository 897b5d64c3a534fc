#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "tfa/common.hpp"
#include "tfa/nn/optim.hpp"

using namespace tfa;
using nn::Mat;
using nn::Var;
using test::check_gradients;
using test::random_mat;

TEST_CASE("elementwise and matmul gradients") {
  Rng rng(7);
  Var a = nn::leaf(random_mat(3, 4, rng));
  Var b = nn::leaf(random_mat(4, 5, rng));
  Var bias = nn::leaf(random_mat(1, 5, rng));
  auto loss = [&] {
    Var y = nn::tanh_v(nn::linear(a, b, bias));
    return nn::sum_sq(nn::sub(y, nn::constant(Mat::Ones(3, 5))));
  };
  CHECK(check_gradients({a, b, bias}, loss).ok());
}

TEST_CASE("diamond reuse accumulates gradients once per path") {
  Rng rng(3);
  Var a = nn::leaf(random_mat(2, 2, rng));
  auto loss = [&] {
    Var left = nn::scale(a, 2.0);
    Var right = nn::hadamard(a, a);
    return nn::sum_all(nn::add(left, right));
  };
  Var l = loss();
  nn::backward(l);
  // d/da (2a + a^2) = 2 + 2a
  Mat expect = Mat::Constant(2, 2, 2.0) + 2.0 * a->val;
  CHECK((a->grad - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("softmax, logsumexp, diag, l2norm gradients") {
  Rng rng(11);
  Var x = nn::leaf(random_mat(4, 4, rng));
  auto loss1 = [&] { return nn::sum_sq(nn::softmax_rows(x)); };
  CHECK(check_gradients({x}, loss1).ok());
  auto loss2 = [&] { return nn::sum_all(nn::logsumexp_rows(x)); };
  CHECK(check_gradients({x}, loss2).ok());
  auto loss3 = [&] { return nn::sum_sq(nn::sub(nn::logsumexp_rows(x), nn::diag_vec(x))); };
  CHECK(check_gradients({x}, loss3).ok());
  auto loss4 = [&] { return nn::sum_sq(nn::sub(nn::l2_normalize_rows(x), nn::constant(Mat::Ones(4, 4)))); };
  CHECK(check_gradients({x}, loss4).ok());
}

TEST_CASE("layer_norm matches finite differences") {
  Rng rng(13);
  Var x = nn::leaf(random_mat(5, 6, rng));
  Var g = nn::leaf(random_mat(1, 6, rng, 0.5));
  Var b = nn::leaf(random_mat(1, 6, rng, 0.5));
  auto loss = [&] { return nn::sum_sq(nn::layer_norm(x, g, b)); };
  CHECK(check_gradients({x, g, b}, loss, 1e-6).ok());
}

TEST_CASE("attention probs/mix gradients, causal and full") {
  Rng rng(17);
  const int seq = 3, heads = 2, dim = 4, seqs = 2;
  Var q = nn::leaf(random_mat(seqs * seq, dim, rng));
  Var k = nn::leaf(random_mat(seqs * seq, dim, rng));
  Var v = nn::leaf(random_mat(seqs * seq, dim, rng));
  for (bool causal : {false, true}) {
    auto loss = [&] {
      Var p = nn::attention_probs(q, k, seq, heads, causal);
      Var o = nn::attention_mix(p, v, seq, heads);
      return nn::sum_sq(o);
    };
    CHECK(check_gradients({q, k, v}, loss).ok());
  }
}

TEST_CASE("causal attention zeroes future probabilities") {
  Rng rng(19);
  Var q = nn::constant(random_mat(4, 4, rng));
  Var k = nn::constant(random_mat(4, 4, rng));
  Var p = nn::attention_probs(q, k, 4, 2, true);
  for (int h = 0; h < 2; ++h) {
    for (int i = 0; i < 4; ++i) {
      double row = 0.0;
      for (int j = 0; j < 4; ++j) {
        const double pij = p->val(h * 4 + i, j);
        if (j > i) CHECK(pij == 0.0);
        row += pij;
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("group mean, concat, slice, gather gradients") {
  Rng rng(23);
  Var x = nn::leaf(random_mat(6, 3, rng));
  Var t = nn::leaf(random_mat(4, 3, rng));
  auto loss = [&] {
    Var m = nn::mean_rows_group(x, 3);                  // 2x3
    Var g = nn::gather_rows(t, {1, 3, 1});              // 3x3, row reuse
    Var c = nn::concat_rows(m, nn::slice_rows(g, 0, 1));  // 3x3
    Var cc = nn::concat_cols(c, c);                     // 3x6
    return nn::mean_all(nn::hadamard(cc, cc));
  };
  CHECK(check_gradients({x, t}, loss).ok());
}

TEST_CASE("straight-through passes gradients to the latent") {
  Rng rng(29);
  Var z = nn::leaf(random_mat(1, 3, rng));
  Mat codeword = random_mat(1, 3, rng);
  Var q = nn::straight_through(z, codeword);
  CHECK((q->val - codeword).cwiseAbs().maxCoeff() == 0.0);

  Var loss = nn::sum_sq(q);
  nn::backward(loss);
  // d||q||^2/dz with identity pass-through = 2*codeword
  CHECK((z->grad - 2.0 * codeword).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stopgrad blocks the tape") {
  Rng rng(31);
  Var z = nn::leaf(random_mat(2, 2, rng));
  Var loss = nn::sum_sq(nn::stopgrad(z));
  nn::backward(loss);
  CHECK(z->grad.size() == 0);
}

TEST_CASE("NoGrad skips recording") {
  Rng rng(37);
  Var a = nn::leaf(random_mat(2, 2, rng));
  nn::NoGrad ng;
  Var y = nn::scale(a, 3.0);
  CHECK_FALSE(y->needs_grad);
  CHECK(y->parents.empty());
}

TEST_CASE("shape errors are reported") {
  Var a = nn::constant(Mat::Zero(2, 3));
  Var b = nn::constant(Mat::Zero(3, 2));
  CHECK_THROWS_AS((void)nn::add(a, b), ShapeError);
  CHECK_THROWS_AS((void)nn::diag_vec(a), ShapeError);
  CHECK_THROWS_AS(nn::backward(a), ShapeError);
  Var zero = nn::leaf(Mat::Zero(1, 3));
  CHECK_THROWS_AS((void)nn::l2_normalize_rows(zero), NumericalError);
}

TEST_CASE("transformer block gradients at tiny width") {
  Rng rng(41);
  nn::TransformerBlock blk = nn::make_block(4, 8, rng);
  Var x = nn::leaf(random_mat(6, 4, rng, 0.5));
  auto loss = [&] { return nn::sum_sq(nn::block_forward(blk, x, 3, 2, true)); };
  std::vector<Var> params = blk.params("blk").vars();
  params.push_back(x);
  CHECK(check_gradients(params, loss).ok());
}

TEST_CASE("adam descends a quadratic") {
  Var w = nn::leaf(Mat::Constant(1, 1, 5.0));
  nn::Adam opt(0.05);
  for (int i = 0; i < 400; ++i) {
    Var loss = nn::sum_sq(w);
    nn::backward(loss);
    opt.step({w});
    nn::Adam::zero_grad({w});
  }
  CHECK(std::abs(w->val(0, 0)) < 1e-2);
}
