#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "tfa/common.hpp"
#include "tfa/tactile.hpp"

using namespace tfa;
using nn::Mat;
using nn::Var;
using test::check_gradients;
using test::random_mat;

namespace {

TactileConfig tiny_config() {
  TactileConfig cfg;
  cfg.image_h = cfg.image_w = 8;
  cfg.patch = 4;  // 4 patches per frame
  cfg.embed = 8;
  cfg.frame_depth = 1;
  cfg.frame_heads = 2;
  cfg.frame_mlp_hidden = 16;
  cfg.temporal_depth = 1;
  cfg.temporal_heads = 2;
  cfg.temporal_mlp_hidden = 16;
  cfg.window = 3;
  return cfg;
}

TactileImage random_image(int h, int w, Rng& rng) {
  TactileImage img(h, w);
  for (auto& p : img.pixels) p = static_cast<float>(uniform01(rng));
  return img;
}

}  // namespace

TEST_CASE("identical images produce identical features") {
  TactileConfig cfg = tiny_config();
  TactileEncoder enc = make_tactile_encoder(cfg, 5);
  Rng rng(6);
  TactileImage img = random_image(8, 8, rng);
  const Eigen::VectorXd h1 = encode_frame(enc, img, 0.5, 0.3);
  const Eigen::VectorXd h2 = encode_frame(enc, img, 0.5, 0.3);
  CHECK(h1 == h2);
}

TEST_CASE("batch items are independent: permuting inputs permutes outputs") {
  TactileConfig cfg = tiny_config();
  TactileEncoder enc = make_tactile_encoder(cfg, 7);
  Rng rng(8);
  std::vector<TactileImage> imgs{random_image(8, 8, rng), random_image(8, 8, rng),
                                 random_image(8, 8, rng)};
  nn::NoGrad ng;
  Var h = encode_frames(enc, nn::constant(patchify(imgs, cfg, 0.4, 0.2)));
  std::vector<TactileImage> swapped{imgs[2], imgs[1], imgs[0]};
  Var h2 = encode_frames(enc, nn::constant(patchify(swapped, cfg, 0.4, 0.2)));
  CHECK((h->val.row(0) - h2->val.row(2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((h->val.row(1) - h2->val.row(1)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((h->val.row(2) - h2->val.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("resolution mismatch is rejected") {
  TactileConfig cfg = tiny_config();
  TactileEncoder enc = make_tactile_encoder(cfg, 9);
  TactileImage wrong(16, 16);
  CHECK_THROWS_AS((void)encode_frame(enc, wrong, 0.0, 1.0), ShapeError);
  TactileConfig bad = cfg;
  bad.patch = 3;
  CHECK_THROWS_AS((void)make_tactile_encoder(bad, 1), ConfigError);
}

TEST_CASE("temporal stage is strictly causal over frame slots") {
  TactileConfig cfg = tiny_config();
  cfg.window = 5;
  TactileEncoder enc = make_tactile_encoder(cfg, 11);
  Rng rng(12);

  // Token-level contract on the causal blocks themselves: perturbing slot j
  // leaves outputs at slots < j bit-identical and changes slots >= j.
  Mat tokens = random_mat(cfg.window + 1, cfg.embed, rng);
  nn::NoGrad ng;
  auto run_blocks = [&](const Mat& x) {
    Var v = nn::constant(x);
    for (const auto& blk : enc.temporal_blocks) {
      v = nn::block_forward(blk, v, cfg.window + 1, cfg.temporal_heads, true);
    }
    return v->val;
  };
  const Mat base = run_blocks(tokens);
  for (int j = 0; j < cfg.window + 1; ++j) {
    Mat perturbed = tokens;
    perturbed(j, 0) += 0.25;
    const Mat out = run_blocks(perturbed);
    for (int i = 0; i < cfg.window + 1; ++i) {
      const double delta = (out.row(i) - base.row(i)).cwiseAbs().maxCoeff();
      if (i < j) {
        CHECK(delta == 0.0);
      } else if (i == j) {
        CHECK(delta > 0.0);
      }
    }
  }
}

TEST_CASE("z* is sensitive to every frame position") {
  TactileConfig cfg = tiny_config();
  cfg.window = 5;
  TactileEncoder enc = make_tactile_encoder(cfg, 13);
  Rng rng(14);
  std::vector<TactileImage> frames;
  for (int j = 0; j < cfg.window; ++j) frames.push_back(random_image(8, 8, rng));
  const Eigen::VectorXd z = encode_window(enc, frames, 0.5, 0.25);

  for (int j = 0; j < cfg.window; ++j) {
    std::vector<TactileImage> mod = frames;
    mod[static_cast<size_t>(j)].pixels[10] = 1.0f - mod[static_cast<size_t>(j)].pixels[10];
    const Eigen::VectorXd z2 = encode_window(enc, mod, 0.5, 0.25);
    CHECK((z2 - z).norm() > 0.0);
  }
}

TEST_CASE("window length one reduces to a single-frame encoder") {
  TactileConfig cfg = tiny_config();
  cfg.window = 1;
  TactileEncoder enc = make_tactile_encoder(cfg, 15);
  Rng rng(16);
  TactileImage img = random_image(8, 8, rng);
  const Eigen::VectorXd z = encode_window(enc, std::span<const TactileImage>(&img, 1), 0.5, 0.25);
  CHECK(z.allFinite());
  std::vector<TactileImage> two{img, img};
  CHECK_THROWS_AS((void)encode_window(enc, two, 0.5, 0.25), ShapeError);
}

TEST_CASE("full image-to-z* pipeline passes finite differences at reduced width") {
  TactileConfig cfg = tiny_config();
  Rng rng(17);
  TactileEncoder enc = make_tactile_encoder(cfg, 18);
  const int batch = 2;
  std::vector<TactileImage> imgs;
  for (int i = 0; i < batch * cfg.window; ++i) imgs.push_back(random_image(8, 8, rng));
  const Mat patches = patchify(imgs, cfg, 0.5, 0.25);

  auto loss = [&]() {
    Var h = encode_frames(enc, nn::constant(patches));
    Var z = encode_windows(enc, h, batch);
    return nn::sum_sq(nn::tanh_v(z));
  };
  const auto res = check_gradients(enc.params().vars(), loss);
  INFO(res.worst);
  CHECK(res.ok());
}

TEST_CASE("activations stay bounded over many random windows") {
  // Reduced width for volume, default width for a spot check.
  TactileConfig small = tiny_config();
  TactileEncoder enc = make_tactile_encoder(small, 19);
  Rng rng(20);
  nn::NoGrad ng;
  double max_norm = 0.0;
  for (int trial = 0; trial < 10000 / 25; ++trial) {
    std::vector<TactileImage> imgs;
    for (int i = 0; i < 25 * small.window; ++i) imgs.push_back(random_image(8, 8, rng));
    Var h = encode_frames(enc, nn::constant(patchify(imgs, small, 0.5, 0.25)));
    Var z = encode_windows(enc, h, 25);
    REQUIRE(z->val.allFinite());
    max_norm = std::max(max_norm, z->val.rowwise().norm().maxCoeff());
  }
  CHECK(max_norm < 1e3);

  TactileConfig full;  // defaults: 32x32, embed 64, window 5
  TactileEncoder enc_full = make_tactile_encoder(full, 21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TactileImage> imgs;
    for (int i = 0; i < 25 * full.window; ++i) imgs.push_back(random_image(32, 32, rng));
    Var h = encode_frames(enc_full, nn::constant(patchify(imgs, full, 0.5, 0.25)));
    Var z = encode_windows(enc_full, h, 25);
    REQUIRE(z->val.allFinite());
    CHECK(z->val.rowwise().norm().maxCoeff() < 1e3);
  }
}
