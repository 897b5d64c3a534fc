#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>

#include "tfa/dataset.hpp"
#include "tfa/rng.hpp"
#include "tfa/sim.hpp"

using namespace tfa;

namespace {

Episode tiny_episode(int frames, std::uint64_t seed) {
  TrajectoryConfig cfg;
  cfg.duration_s = frames / kTactileRateHz;
  return simulate_episode(cfg, indenter_library()[0], sensor_library()[2], seed);
}

std::vector<std::pair<double, Eigen::VectorXd>> signal_from(
    const std::vector<double>& ts, const std::function<Eigen::VectorXd(double)>& f) {
  std::vector<std::pair<double, Eigen::VectorXd>> out;
  for (double t : ts) out.emplace_back(t, f(t));
  return out;
}

}  // namespace

TEST_CASE("resampling interpolates linear signals exactly") {
  std::vector<double> raw_t;
  for (int i = 0; i <= 300; ++i) raw_t.push_back(i * 0.005);
  auto raw = signal_from(raw_t, [](double t) { return Eigen::VectorXd::Constant(1, t); });

  auto out = resample_to_tactile_rate(raw, {0.0, 1.0 / 30.0});
  CHECK(out[0][0] == doctest::Approx(0.0));
  CHECK(out[1][0] == doctest::Approx(1.0 / 30.0).epsilon(1e-12));

  // Any affine-in-time signal is reproduced exactly.
  auto affine = signal_from(raw_t, [](double t) {
    Eigen::VectorXd v(2);
    v << 3.0 - 2.0 * t, 0.5 * t + 1.0;
    return v;
  });
  Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    const double t = uniform(rng, 0.0, raw_t.back());
    auto v = resample_to_tactile_rate(affine, {t});
    CHECK(v[0][0] == doctest::Approx(3.0 - 2.0 * t).epsilon(1e-12));
    CHECK(v[0][1] == doctest::Approx(0.5 * t + 1.0).epsilon(1e-12));
  }
}

TEST_CASE("resampling of a constant signal returns the constant") {
  auto raw = signal_from({0.0, 0.3, 0.7, 1.1}, [](double) { return Eigen::VectorXd::Constant(3, 7.0); });
  for (const auto& v : resample_to_tactile_rate(raw, {0.0, 0.5, 1.1})) {
    CHECK((v.array() == 7.0).all());
  }
}

TEST_CASE("resampling hand-evaluated point") {
  auto raw = signal_from({0.0, 1.0}, [](double t) { return Eigen::VectorXd::Constant(1, 10.0 * t); });
  CHECK(resample_to_tactile_rate(raw, {0.25})[0][0] == doctest::Approx(2.5));
}

TEST_CASE("resampling error paths") {
  auto raw = signal_from({0.0, 1.0}, [](double t) { return Eigen::VectorXd::Constant(1, t); });
  CHECK_THROWS_AS((void)resample_to_tactile_rate(raw, {1.5}), ExtrapolationError);
  CHECK_THROWS_AS((void)resample_to_tactile_rate(raw, {-0.1}), ExtrapolationError);
  CHECK_THROWS_AS((void)resample_to_tactile_rate({}, {0.0}), EmptyInputError);
}

TEST_CASE("window counting") {
  Episode ep = tiny_episode(10, 1);
  ep.frames.resize(7);
  CHECK(make_windows(ep, 5, 1).size() == 3);
  CHECK(make_windows(ep, 5, 1)[2].start == 2);
  ep.frames.resize(5);
  CHECK(make_windows(ep, 5, 1).size() == 1);
  ep.frames.resize(4);
  CHECK(make_windows(ep, 5, 1).empty());

  Episode ep10 = tiny_episode(10, 2);
  auto disjoint = make_windows(ep10, 5, 5);
  CHECK(disjoint.size() == 2);
  CHECK(disjoint[0].start == 0);
  CHECK(disjoint[1].start == 5);
}

TEST_CASE("stride-N windows tile the episode exactly once") {
  Episode ep = tiny_episode(30, 3);
  auto windows = make_windows(ep, 5, 5);
  std::vector<const SyncedFrame*> seen;
  for (const WindowSample& w : windows) {
    for (int j = 0; j < w.length; ++j) seen.push_back(&w.frame(j));
  }
  REQUIRE(seen.size() == ep.frames.size());
  for (size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == &ep.frames[i]);
}

TEST_CASE("normalization statistics") {
  Episode a = tiny_episode(6, 4);
  // Identical frames: per-channel wrench stds hit the floor; making the
  // taxel and pixel fields uniform floors those stds too.
  Episode constant = a;
  for (auto& f : constant.frames) {
    f = constant.frames[0];
    f.pmap.p.fill(2.5f);
    std::fill(f.image.pixels.begin(), f.image.pixels.end(), 0.25f);
  }
  std::vector<Episode> ds{constant};
  Normalization n = compute_normalization(ds);
  for (int i = 0; i < 6; ++i) CHECK(n.wrench_std[i] == doctest::Approx(kStdFloor));
  CHECK(n.pmap_std == doctest::Approx(kStdFloor));
  CHECK(n.pmap_mean == doctest::Approx(2.5));
  CHECK(n.image_std == doctest::Approx(kStdFloor));

  // Two-point statistics on fx.
  Episode two = a;
  two.frames.resize(2);
  two.frames[0].wrench = Wrench{};
  two.frames[1].wrench = Wrench{};
  two.frames[1].wrench.force.x() = 2.0;
  std::vector<Episode> ds2{two};
  Normalization n2 = compute_normalization(ds2);
  CHECK(n2.wrench_mean[0] == doctest::Approx(1.0));
  CHECK(n2.wrench_std[0] == doctest::Approx(1.0));

  // Normalize then denormalize is the identity.
  std::vector<Episode> ds3{a};
  Normalization n3 = compute_normalization(ds3);
  Rng rng(9);
  for (int k = 0; k < 100; ++k) {
    const double v = gaussian(rng) * 3.0;
    const double z = (v - n3.wrench_mean[2]) / n3.wrench_std[2];
    CHECK(z * n3.wrench_std[2] + n3.wrench_mean[2] == doctest::Approx(v).epsilon(1e-10));
  }
  CHECK_THROWS_AS((void)compute_normalization(std::span<const Episode>{}), EmptyInputError);
}

TEST_CASE("container round trip is bit exact") {
  std::vector<Episode> eps{tiny_episode(9, 11), tiny_episode(12, 12)};
  eps[1].actions = Eigen::MatrixXf::Random(12, 8);
  eps[1].proprio = Eigen::MatrixXd::Random(12, 2);
  eps[1].ctx_id = 2;

  DatasetManifest m = make_manifest(eps, kDefaultForceRateHz, 32, 32);
  m.normalization = compute_normalization(eps);
  const auto dir = std::filesystem::temp_directory_path() / "tfa_test_ds";
  std::filesystem::remove_all(dir);
  save_dataset(m, eps, dir);
  auto [m2, eps2] = load_dataset(dir);

  REQUIRE(eps2.size() == eps.size());
  for (size_t e = 0; e < eps.size(); ++e) {
    REQUIRE(eps2[e].size() == eps[e].size());
    CHECK(eps2[e].sensor_id == eps[e].sensor_id);
    CHECK(eps2[e].indenter_id == eps[e].indenter_id);
    CHECK(eps2[e].seed == eps[e].seed);
    for (int i = 0; i < eps[e].size(); ++i) {
      const SyncedFrame& x = eps[e].frames[static_cast<size_t>(i)];
      const SyncedFrame& y = eps2[e].frames[static_cast<size_t>(i)];
      CHECK(std::memcmp(x.image.pixels.data(), y.image.pixels.data(),
                        x.image.pixels.size() * sizeof(float)) == 0);
      CHECK(std::memcmp(x.pmap.p.data(), y.pmap.p.data(), x.pmap.p.size() * sizeof(float)) == 0);
      CHECK(x.wrench.vec6() == y.wrench.vec6());
      CHECK(x.t == y.t);
    }
  }
  CHECK(eps2[1].actions == eps[1].actions);
  CHECK(eps2[1].proprio == eps[1].proprio);
  CHECK(eps2[1].ctx_id == 2);
  REQUIRE(m2.normalization.has_value());
  CHECK(m2.normalization->wrench_mean == m.normalization->wrench_mean);
}

TEST_CASE("loaded timestamps are strictly increasing at the tactile rate") {
  std::vector<Episode> eps{tiny_episode(30, 21)};
  DatasetManifest m = make_manifest(eps, kDefaultForceRateHz, 32, 32);
  const auto dir = std::filesystem::temp_directory_path() / "tfa_test_ts";
  std::filesystem::remove_all(dir);
  save_dataset(m, eps, dir);
  auto [m2, eps2] = load_dataset(dir);
  for (int i = 1; i < eps2[0].size(); ++i) {
    const double dt = eps2[0].frames[static_cast<size_t>(i)].t - eps2[0].frames[static_cast<size_t>(i - 1)].t;
    CHECK(dt > 0.0);
    CHECK(std::abs(dt - 1.0 / kTactileRateHz) < 1e-9);
  }
}

TEST_CASE("container error paths") {
  std::vector<Episode> eps{tiny_episode(10, 31)};
  DatasetManifest m = make_manifest(eps, kDefaultForceRateHz, 32, 32);
  const auto dir = std::filesystem::temp_directory_path() / "tfa_test_err";
  std::filesystem::remove_all(dir);
  save_dataset(m, eps, dir);

  SUBCASE("manifest frame count larger than blob") {
    // Truncate the blob: reader must flag a shape mismatch.
    const auto blob = dir / m.episodes[0].file;
    const auto size = std::filesystem::file_size(blob);
    std::filesystem::resize_file(blob, size - 64);
    CHECK_THROWS_AS((void)load_dataset(dir), ShapeError);
  }

  SUBCASE("oversized blob is rejected") {
    std::ofstream os(dir / m.episodes[0].file, std::ios::binary | std::ios::app);
    const double extra = 0.0;
    os.write(reinterpret_cast<const char*>(&extra), sizeof(extra));
    os.close();
    CHECK_THROWS_AS((void)load_dataset(dir), ShapeError);
  }

  SUBCASE("format version mismatch names both versions") {
    std::ifstream is(dir / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    is.close();
    const std::string needle = "\"format_version\": 1";
    text.replace(text.find(needle), needle.size(), "\"format_version\": 9");
    std::ofstream os(dir / "manifest.json");
    os << text;
    os.close();
    try {
      (void)load_dataset(dir);
      FAIL("expected VersionError");
    } catch (const VersionError& err) {
      const std::string msg = err.what();
      CHECK(msg.find('9') != std::string::npos);
      CHECK(msg.find('1') != std::string::npos);
    }
  }

  SUBCASE("manifest/episode count mismatch on save") {
    DatasetManifest bad = m;
    bad.episodes.push_back(bad.episodes[0]);
    CHECK_THROWS_AS(save_dataset(bad, eps, dir), ShapeError);
  }
}
