#include "tfa/sim.hpp"

#include <algorithm>
#include <cmath>

#include "tfa/common.hpp"
#include "tfa/rng.hpp"

namespace tfa {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;
}  // namespace

double taxel_area_m2() {
  const double pitch = 2.0 * kSensorHalfWidthM / PressureMap::kGrid;
  return pitch * pitch;
}

std::array<bool, PressureMap::kTaxels> SensorVariant::full_field() {
  std::array<bool, PressureMap::kTaxels> m{};
  m.fill(true);
  return m;
}

std::array<bool, PressureMap::kTaxels> SensorVariant::inset_field() {
  std::array<bool, PressureMap::kTaxels> m{};
  for (int r = 0; r < PressureMap::kGrid; ++r) {
    for (int c = 0; c < PressureMap::kGrid; ++c) {
      bool edge = r == 0 || c == 0 || r == PressureMap::kGrid - 1 || c == PressureMap::kGrid - 1;
      m[r * PressureMap::kGrid + c] = !edge;
    }
  }
  return m;
}

namespace {

/// Sum of seeded random-phase sinusoids with band-limited frequencies,
/// scaled to a target standard deviation. Differentiable in closed form.
struct SmoothNoise {
  static constexpr int kModes = 4;
  std::array<double, kModes> amp{}, freq{}, phase{};

  SmoothNoise(Rng& rng, double target_std, double f_lo, double f_hi) {
    double sum_var = 0.0;
    for (int i = 0; i < kModes; ++i) {
      amp[i] = 0.5 + uniform01(rng);
      freq[i] = uniform(rng, f_lo, f_hi);
      phase[i] = uniform(rng, 0.0, 2.0 * kPi);
      sum_var += 0.5 * amp[i] * amp[i];
    }
    const double scale = target_std > 0.0 ? target_std / std::sqrt(sum_var) : 0.0;
    for (double& a : amp) a *= scale;
  }

  double value(double t) const {
    double v = 0.0;
    for (int i = 0; i < kModes; ++i) v += amp[i] * std::sin(2.0 * kPi * freq[i] * t + phase[i]);
    return v;
  }
  double rate(double t) const {
    double v = 0.0;
    for (int i = 0; i < kModes; ++i) {
      v += amp[i] * 2.0 * kPi * freq[i] * std::cos(2.0 * kPi * freq[i] * t + phase[i]);
    }
    return v;
  }
};

/// Clipped Ornstein-Uhlenbeck walk; stationary std targets limit/2.2.
struct BoundedWalk {
  double theta = 1.2;
  double sigma = 0.0;
  double limit = 0.0;
  double x = 0.0;

  BoundedWalk(double limit_, double theta_ = 1.2) : theta(theta_), limit(limit_) {
    sigma = limit_ / 2.2 * std::sqrt(2.0 * theta);
  }
  double step(Rng& rng, double dt) {
    x += -theta * x * dt + sigma * std::sqrt(dt) * gaussian(rng);
    x = std::clamp(x, -limit, limit);
    return x;
  }
};

}  // namespace

std::vector<std::pair<double, ContactState>> press_and_perturb_trajectory(
    const TrajectoryConfig& cfg) {
  if (cfg.duration_s <= 0.0 || cfg.raw_rate_hz <= 0.0) {
    throw ConfigError("trajectory: duration and raw rate must be positive");
  }
  Rng rng(cfg.seed);
  SmoothNoise depth_noise(rng, cfg.depth_noise_std_m, 0.3, 2.5);

  const double dt = 1.0 / cfg.raw_rate_hz;
  const int steps = static_cast<int>(std::llround(cfg.duration_s * cfg.raw_rate_hz));
  const double rp_limit = cfg.roll_pitch_limit_deg * kDeg;
  const double yaw_rate_limit = cfg.yaw_rate_limit_dps * kDeg;

  BoundedWalk shear_x(cfg.shear_limit_m), shear_y(cfg.shear_limit_m);
  BoundedWalk yaw_rate(yaw_rate_limit, 0.8);
  BoundedWalk roll(rp_limit), pitch(rp_limit);
  double yaw = 0.0;

  std::vector<std::pair<double, ContactState>> out;
  out.reserve(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double t = i * dt;
    ContactState s;
    const double d_raw = cfg.depth_offset_m +
                         cfg.z_amplitude_m * std::sin(2.0 * kPi * cfg.z_frequency_hz * t) +
                         depth_noise.value(t);
    if (d_raw > 0.0) {
      s.d = d_raw;
      s.d_dot = cfg.z_amplitude_m * 2.0 * kPi * cfg.z_frequency_hz *
                    std::cos(2.0 * kPi * cfg.z_frequency_hz * t) +
                depth_noise.rate(t);
    }
    s.shear << shear_x.step(rng, dt), shear_y.step(rng, dt);
    s.yaw_rate = yaw_rate.step(rng, dt);
    yaw += s.yaw_rate * dt;
    s.yaw = yaw;
    s.roll = roll.step(rng, dt);
    s.pitch = pitch.step(rng, dt);
    out.emplace_back(t, s);
  }
  return out;
}

double footprint_depth(const ContactState& state, const Indenter& ind, double x, double y) {
  const double dx = x - kFootprintShearCoupling * state.shear.x();
  const double dy = y - kFootprintShearCoupling * state.shear.y();
  switch (ind.shape) {
    case Indenter::Shape::kSphere: {
      const double r2 = dx * dx + dy * dy;
      return std::max(0.0, state.d - r2 / (2.0 * ind.size_m));
    }
    case Indenter::Shape::kFlat: {
      return (std::max(std::abs(dx), std::abs(dy)) <= ind.size_m) ? state.d : 0.0;
    }
    case Indenter::Shape::kRidge: {
      const double cy_ = std::cos(state.yaw), sy_ = std::sin(state.yaw);
      const double u = cy_ * dx + sy_ * dy;
      const double v = -sy_ * dx + cy_ * dy;
      if (std::abs(v) > kRidgeHalfLengthM) return 0.0;
      return std::max(0.0, state.d - u * u / (2.0 * ind.size_m));
    }
  }
  return 0.0;
}

std::pair<PressureMap, Wrench> contact_response(const ContactState& state, const Indenter& ind,
                                                const SensorVariant& sensor) {
  if (state.d < 0.0) throw ConfigError("contact_response: indentation depth must be >= 0");

  PressureMap pmap;
  pmap.taxel_area = taxel_area_m2();
  const double pitch = 2.0 * kSensorHalfWidthM / PressureMap::kGrid;

  double moment_x = 0.0, moment_y = 0.0;  // pressure-weighted taxel positions
  int contact_taxels = 0;
  for (int r = 0; r < PressureMap::kGrid; ++r) {
    for (int c = 0; c < PressureMap::kGrid; ++c) {
      if (!sensor.field_mask[r * PressureMap::kGrid + c]) continue;
      const double x = -kSensorHalfWidthM + (c + 0.5) * pitch;
      const double y = -kSensorHalfWidthM + (r + 0.5) * pitch;
      const double pressure = ind.stiffness * footprint_depth(state, ind, x, y);
      if (pressure <= 0.0) continue;
      const float stored = static_cast<float>(pressure);
      pmap.at(r, c) = stored;
      moment_x += static_cast<double>(stored) * x;
      moment_y += static_cast<double>(stored) * y;
      ++contact_taxels;
    }
  }

  // Elastic Fz is defined as the stored taxel sum times area so that the
  // construction identity holds bit-for-bit downstream of the float cast.
  const double fz_elastic = pmap.force_sum();

  Wrench w;
  w.force.z() = fz_elastic + ind.damping * state.d_dot;
  const Eigen::Vector2d sat = (state.shear / kShearSaturationM).array().tanh();
  w.force.x() = ind.friction * fz_elastic * sat.x();
  w.force.y() = ind.friction * fz_elastic * sat.y();

  if (fz_elastic > 0.0) {
    const double sum_p = fz_elastic / pmap.taxel_area;
    const double cx = moment_x / sum_p;
    const double cy = moment_y / sum_p;
    w.torque.x() = cy * fz_elastic;
    w.torque.y() = -cx * fz_elastic;
  }
  const double contact_area = contact_taxels * pmap.taxel_area;
  w.torque.z() = kYawTorqueCoeff * state.yaw_rate * contact_area;
  return {pmap, w};
}

std::vector<Eigen::Vector2d> marker_positions(const SensorVariant& sensor,
                                              const Eigen::Vector2d& shear, double yaw,
                                              int image_h, int image_w) {
  int gx = 0, gy = 0;
  switch (sensor.grid) {
    case SensorVariant::MarkerGrid::kNone: return {};
    case SensorVariant::MarkerGrid::k4x4: gx = gy = 4; break;
    case SensorVariant::MarkerGrid::k7x7: gx = gy = 7; break;
    case SensorVariant::MarkerGrid::k9x9: gx = gy = 9; break;
    case SensorVariant::MarkerGrid::k7x9: gx = 7; gy = 9; break;
  }
  const double cx = image_w / 2.0, cy = image_h / 2.0;
  const double px_per_m = image_w / (2.0 * kSensorHalfWidthM);
  const double cos_y = std::cos(yaw), sin_y = std::sin(yaw);

  std::vector<Eigen::Vector2d> out;
  out.reserve(static_cast<size_t>(gx) * gy);
  for (int j = 0; j < gy; ++j) {
    for (int i = 0; i < gx; ++i) {
      const double x0 = (i + 0.5) * image_w / gx - cx;
      const double y0 = (j + 0.5) * image_h / gy - cy;
      const double xr = cos_y * x0 - sin_y * y0;
      const double yr = sin_y * x0 + cos_y * y0;
      out.emplace_back(cx + xr + shear.x() * px_per_m, cy + yr + shear.y() * px_per_m);
    }
  }
  return out;
}

TactileImage render_tactile(const ContactState& state, const Indenter& ind,
                            const SensorVariant& sensor, int image_h, int image_w) {
  TactileImage img(image_h, image_w);
  const double sx = 2.0 * kSensorHalfWidthM / image_w;
  const double sy = 2.0 * kSensorHalfWidthM / image_h;
  for (int r = 0; r < image_h; ++r) {
    const double y = -kSensorHalfWidthM + (r + 0.5) * sy;
    for (int c = 0; c < image_w; ++c) {
      const double x = -kSensorHalfWidthM + (c + 0.5) * sx;
      const double v = sensor.gain * footprint_depth(state, ind, x, y);
      img.at(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }

  // Marker dots ride on top of the deformation brightness; they move with
  // the shear field and rotate with yaw. Edges are coverage-antialiased so
  // sub-pixel displacement stays visible to the encoder.
  for (const Eigen::Vector2d& m : marker_positions(sensor, state.shear, state.yaw, image_h, image_w)) {
    const double rad = sensor.marker_radius_px;
    const int r0 = std::max(0, static_cast<int>(std::floor(m.y() - rad - 1.0)));
    const int r1 = std::min(image_h - 1, static_cast<int>(std::ceil(m.y() + rad + 1.0)));
    const int c0 = std::max(0, static_cast<int>(std::floor(m.x() - rad - 1.0)));
    const int c1 = std::min(image_w - 1, static_cast<int>(std::ceil(m.x() + rad + 1.0)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double dist = std::hypot(c + 0.5 - m.x(), r + 0.5 - m.y());
        const double coverage = std::clamp(rad + 0.5 - dist, 0.0, 1.0);
        if (coverage > 0.0) {
          img.at(r, c) = std::max(img.at(r, c), static_cast<float>(kMarkerValue * coverage));
        }
      }
    }
  }
  return img;
}

Episode simulate_episode(const TrajectoryConfig& cfg, const Indenter& ind,
                         const SensorVariant& sensor, std::uint64_t seed) {
  TrajectoryConfig c = cfg;
  c.seed = seed;
  const auto traj = press_and_perturb_trajectory(c);
  const int n_frames = static_cast<int>(std::llround(cfg.duration_s * kTactileRateHz));
  if (n_frames < 1) throw ConfigError("simulate_episode: duration too short for one frame");

  std::vector<double> tactile_t(static_cast<size_t>(n_frames));
  for (int i = 0; i < n_frames; ++i) tactile_t[static_cast<size_t>(i)] = i / kTactileRateHz;

  // Raw-rate measurements, packed for the shared resampler: 144 pressure
  // channels, 5 wrench channels (fx fy tx ty tz), d_dot, and the rendering
  // state (d, shear, yaw).
  std::vector<std::pair<double, Eigen::VectorXd>> raw_pmap, raw_wrench, raw_aux;
  raw_pmap.reserve(traj.size());
  raw_wrench.reserve(traj.size());
  raw_aux.reserve(traj.size());
  for (const auto& [t, st] : traj) {
    auto [pm, w] = contact_response(st, ind, sensor);
    Eigen::VectorXd pv(PressureMap::kTaxels);
    for (int i = 0; i < PressureMap::kTaxels; ++i) pv[i] = pm.p[static_cast<size_t>(i)];
    raw_pmap.emplace_back(t, std::move(pv));
    Eigen::VectorXd wv(5);
    wv << w.force.x(), w.force.y(), w.torque.x(), w.torque.y(), w.torque.z();
    raw_wrench.emplace_back(t, std::move(wv));
    Eigen::VectorXd aux(5);
    aux << st.d_dot, st.d, st.shear.x(), st.shear.y(), st.yaw;
    raw_aux.emplace_back(t, std::move(aux));
  }

  const auto pmaps = resample_to_tactile_rate(raw_pmap, tactile_t);
  const auto wrenches = resample_to_tactile_rate(raw_wrench, tactile_t);
  const auto aux = resample_to_tactile_rate(raw_aux, tactile_t);

  Episode ep;
  ep.indenter_id = ind.id;
  ep.sensor_id = sensor.id;
  ep.seed = seed;
  ep.frames.resize(static_cast<size_t>(n_frames));
  for (int i = 0; i < n_frames; ++i) {
    SyncedFrame& f = ep.frames[static_cast<size_t>(i)];
    f.t = tactile_t[static_cast<size_t>(i)];
    f.sensor_id = sensor.id;

    f.pmap.taxel_area = taxel_area_m2();
    for (int k = 0; k < PressureMap::kTaxels; ++k) {
      f.pmap.p[static_cast<size_t>(k)] = static_cast<float>(pmaps[static_cast<size_t>(i)][k]);
    }

    // Fz is reconstituted from the resampled pressure field so the taxel-sum
    // identity survives interpolation exactly.
    const double d_dot = aux[static_cast<size_t>(i)][0];
    f.wrench.force.x() = wrenches[static_cast<size_t>(i)][0];
    f.wrench.force.y() = wrenches[static_cast<size_t>(i)][1];
    f.wrench.force.z() = f.pmap.force_sum() + ind.damping * d_dot;
    f.wrench.torque.x() = wrenches[static_cast<size_t>(i)][2];
    f.wrench.torque.y() = wrenches[static_cast<size_t>(i)][3];
    f.wrench.torque.z() = wrenches[static_cast<size_t>(i)][4];

    ContactState render_state;
    render_state.d = std::max(0.0, aux[static_cast<size_t>(i)][1]);
    render_state.shear << aux[static_cast<size_t>(i)][2], aux[static_cast<size_t>(i)][3];
    render_state.yaw = aux[static_cast<size_t>(i)][4];
    f.image = render_tactile(render_state, ind, sensor);
  }
  return ep;
}

Episode inject_label_noise(const Episode& episode, double sigma_frac, const Normalization& norm,
                           std::uint64_t seed) {
  if (sigma_frac < 0.0) throw ConfigError("inject_label_noise: sigma_frac must be >= 0");
  Episode out = episode;
  if (sigma_frac == 0.0) return out;

  std::array<bool, PressureMap::kTaxels> mask = SensorVariant::full_field();
  for (const SensorVariant& s : sensor_library()) {
    if (s.id == episode.sensor_id) {
      mask = s.field_mask;
      break;
    }
  }

  Rng rng(derive_seed(seed, episode.seed));
  for (SyncedFrame& f : out.frames) {
    Eigen::Matrix<double, 6, 1> w = f.wrench.vec6();
    for (int i = 0; i < 6; ++i) w[i] += sigma_frac * norm.wrench_std[i] * gaussian(rng);
    f.wrench = Wrench::from_vec6(w);
    for (int k = 0; k < PressureMap::kTaxels; ++k) {
      if (!mask[static_cast<size_t>(k)]) continue;
      f.pmap.p[static_cast<size_t>(k)] += static_cast<float>(sigma_frac * norm.pmap_std * gaussian(rng));
    }
  }
  return out;
}

const std::vector<Indenter>& indenter_library() {
  static const std::vector<Indenter> lib = [] {
    std::vector<Indenter> v;
    struct ShapeSpec {
      Indenter::Shape shape;
      const char* name;
      double small, large;
    };
    const ShapeSpec shapes[] = {
        {Indenter::Shape::kSphere, "sphere", 3e-3, 8e-3},
        {Indenter::Shape::kFlat, "flat", 2.5e-3, 4.5e-3},
        {Indenter::Shape::kRidge, "ridge", 2e-3, 6e-3},
    };
    const double frictions[] = {0.45, 0.6, 0.75, 0.9, 1.05, 0.5, 0.65, 0.8, 0.95, 1.1, 0.55, 0.7};
    int idx = 0;
    for (const auto& sh : shapes) {
      for (bool hard : {false, true}) {
        for (bool large : {false, true}) {
          Indenter ind;
          ind.shape = sh.shape;
          ind.size_m = large ? sh.large : sh.small;
          ind.stiffness = hard ? 2e7 : 5e6;
          ind.damping = hard ? 350.0 : 120.0;
          ind.friction = frictions[idx];
          ind.id = std::string(sh.name) + (hard ? "-hard" : "-soft") + (large ? "-large" : "-small");
          v.push_back(ind);
          ++idx;
        }
      }
    }
    return v;
  }();
  return lib;
}

const Indenter& indenter_by_id(const std::string& id) {
  for (const Indenter& i : indenter_library()) {
    if (i.id == id) return i;
  }
  throw ConfigError("unknown indenter id: " + id);
}

const std::vector<SensorVariant>& sensor_library() {
  static const std::vector<SensorVariant> lib = [] {
    std::vector<SensorVariant> v;
    auto make = [](std::string id, SensorVariant::MarkerGrid grid, double gain_mult, bool inset) {
      SensorVariant s;
      s.id = std::move(id);
      s.grid = grid;
      s.gain = 550.0 * gain_mult;
      s.field_mask = inset ? SensorVariant::inset_field() : SensorVariant::full_field();
      return s;
    };
    v.push_back(make("cb-plain", SensorVariant::MarkerGrid::kNone, 1.00, false));
    v.push_back(make("cb-4x4", SensorVariant::MarkerGrid::k4x4, 0.90, false));
    v.push_back(make("cb-7x7", SensorVariant::MarkerGrid::k7x7, 1.10, false));
    v.push_back(make("cb-9x9", SensorVariant::MarkerGrid::k9x9, 1.05, false));
    v.push_back(make("gs-plain", SensorVariant::MarkerGrid::kNone, 0.95, true));
    v.push_back(make("gs-7x9", SensorVariant::MarkerGrid::k7x9, 1.25, true));
    return v;
  }();
  return lib;
}

const SensorVariant& sensor_by_id(const std::string& id) {
  for (const SensorVariant& s : sensor_library()) {
    if (s.id == id) return s;
  }
  throw ConfigError("unknown sensor id: " + id);
}

double viscous_force_std(const TrajectoryConfig& cfg, double damping, int n_trajectories,
                         std::uint64_t seed) {
  double sum = 0.0, sum2 = 0.0;
  std::int64_t n = 0;
  for (int k = 0; k < n_trajectories; ++k) {
    TrajectoryConfig c = cfg;
    c.seed = derive_seed(seed, static_cast<std::uint64_t>(k));
    const auto traj = press_and_perturb_trajectory(c);
    const int n_frames = static_cast<int>(std::llround(cfg.duration_s * kTactileRateHz));
    std::vector<double> tactile_t(static_cast<size_t>(n_frames));
    for (int i = 0; i < n_frames; ++i) tactile_t[static_cast<size_t>(i)] = i / kTactileRateHz;
    std::vector<std::pair<double, Eigen::VectorXd>> raw;
    raw.reserve(traj.size());
    for (const auto& [t, st] : traj) {
      raw.emplace_back(t, Eigen::VectorXd::Constant(1, st.d_dot));
    }
    for (const Eigen::VectorXd& v : resample_to_tactile_rate(raw, tactile_t)) {
      const double f = damping * v[0];
      sum += f;
      sum2 += f * f;
      ++n;
    }
  }
  const double mean = sum / static_cast<double>(n);
  return std::sqrt(std::max(0.0, sum2 / static_cast<double>(n) - mean * mean));
}

}  // namespace tfa
