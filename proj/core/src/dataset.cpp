#include "tfa/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "tfa/common.hpp"

namespace tfa {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

using nlohmann::json;

Normalization compute_normalization(std::span<const Episode> dataset) {
  std::vector<int> all(dataset.size());
  for (size_t i = 0; i < dataset.size(); ++i) all[i] = static_cast<int>(i);
  return compute_normalization(dataset, all);
}

Normalization compute_normalization(std::span<const Episode> dataset,
                                    std::span<const int> episode_ids) {
  if (dataset.empty() || episode_ids.empty()) {
    throw EmptyInputError("compute_normalization: empty dataset");
  }

  Eigen::Matrix<double, 6, 1> wsum = Eigen::Matrix<double, 6, 1>::Zero();
  Eigen::Matrix<double, 6, 1> wsum2 = Eigen::Matrix<double, 6, 1>::Zero();
  double psum = 0.0, psum2 = 0.0, isum = 0.0, isum2 = 0.0;
  std::int64_t nframes = 0, ntaxels = 0, npixels = 0;

  for (int id : episode_ids) {
    const Episode& ep = dataset[static_cast<size_t>(id)];
    for (const SyncedFrame& f : ep.frames) {
      Eigen::Matrix<double, 6, 1> w = f.wrench.vec6();
      wsum += w;
      wsum2 += w.cwiseProduct(w);
      ++nframes;
      for (float v : f.pmap.p) {
        psum += v;
        psum2 += static_cast<double>(v) * v;
        ++ntaxels;
      }
      for (float v : f.image.pixels) {
        isum += v;
        isum2 += static_cast<double>(v) * v;
        ++npixels;
      }
    }
  }
  if (nframes == 0) throw EmptyInputError("compute_normalization: dataset has no frames");

  auto finish = [](double sum, double sum2, std::int64_t n, double& mean, double& std) {
    mean = sum / static_cast<double>(n);
    double var = std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
    std = std::max(std::sqrt(var), kStdFloor);
  };

  Normalization norm;
  for (int i = 0; i < 6; ++i) {
    finish(wsum[i], wsum2[i], nframes, norm.wrench_mean[i], norm.wrench_std[i]);
  }
  finish(psum, psum2, ntaxels, norm.pmap_mean, norm.pmap_std);
  finish(isum, isum2, npixels, norm.image_mean, norm.image_std);
  return norm;
}

std::vector<Eigen::VectorXd> resample_to_tactile_rate(
    const std::vector<std::pair<double, Eigen::VectorXd>>& raw_signal,
    const std::vector<double>& tactile_timestamps) {
  if (raw_signal.empty()) throw EmptyInputError("resample: raw signal is empty");
  for (size_t i = 1; i < raw_signal.size(); ++i) {
    if (raw_signal[i].first <= raw_signal[i - 1].first) {
      throw ConfigError("resample: raw timestamps must be strictly increasing");
    }
  }
  const double t0 = raw_signal.front().first;
  const double t1 = raw_signal.back().first;

  std::vector<Eigen::VectorXd> out;
  out.reserve(tactile_timestamps.size());
  size_t hi = 1;
  for (double t : tactile_timestamps) {
    if (t < t0 || t > t1) {
      throw ExtrapolationError("resample: timestamp " + std::to_string(t) +
                               " outside raw support [" + std::to_string(t0) + ", " +
                               std::to_string(t1) + "]");
    }
    // Timestamps are queried in increasing order in every caller, but fall
    // back to a fresh scan if they are not.
    if (hi >= raw_signal.size() || raw_signal[hi - 1].first > t) hi = 1;
    while (hi < raw_signal.size() && raw_signal[hi].first < t) ++hi;
    if (hi >= raw_signal.size()) hi = raw_signal.size() - 1;
    const auto& [ta, va] = raw_signal[hi - 1];
    const auto& [tb, vb] = raw_signal[hi];
    const double alpha = (t - ta) / (tb - ta);
    out.push_back(va + alpha * (vb - va));
  }
  return out;
}

std::vector<WindowSample> make_windows(const Episode& episode, int n, int stride) {
  if (n < 1 || stride < 1) throw ConfigError("make_windows: n and stride must be >= 1");
  std::vector<WindowSample> out;
  for (int start = 0; start + n <= episode.size(); start += stride) {
    out.push_back(WindowSample{&episode, start, n});
  }
  return out;
}

namespace {

json norm_to_json(const Normalization& n) {
  json j;
  j["wrench_mean"] = std::vector<double>(n.wrench_mean.data(), n.wrench_mean.data() + 6);
  j["wrench_std"] = std::vector<double>(n.wrench_std.data(), n.wrench_std.data() + 6);
  j["pmap_mean"] = n.pmap_mean;
  j["pmap_std"] = n.pmap_std;
  j["image_mean"] = n.image_mean;
  j["image_std"] = n.image_std;
  return j;
}

Normalization norm_from_json(const json& j) {
  Normalization n;
  auto wm = j.at("wrench_mean").get<std::vector<double>>();
  auto ws = j.at("wrench_std").get<std::vector<double>>();
  if (wm.size() != 6 || ws.size() != 6) throw ShapeError("manifest: wrench stats must have 6 entries");
  for (int i = 0; i < 6; ++i) {
    n.wrench_mean[i] = wm[i];
    n.wrench_std[i] = ws[i];
  }
  n.pmap_mean = j.at("pmap_mean").get<double>();
  n.pmap_std = j.at("pmap_std").get<double>();
  n.image_mean = j.at("image_mean").get<double>();
  n.image_std = j.at("image_std").get<double>();
  return n;
}

template <typename T>
void write_raw(std::ofstream& os, const T* data, size_t count) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

template <typename T>
void read_raw(std::ifstream& is, T* data, size_t count, const std::string& what) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if (static_cast<size_t>(is.gcount()) != count * sizeof(T)) {
    throw ShapeError("load_dataset: truncated blob while reading " + what);
  }
}

}  // namespace

DatasetManifest make_manifest(std::span<const Episode> episodes, double force_hz,
                              int image_height, int image_width) {
  DatasetManifest m;
  m.force_hz = force_hz;
  m.image_height = image_height;
  m.image_width = image_width;
  char name[32];
  for (size_t i = 0; i < episodes.size(); ++i) {
    const Episode& ep = episodes[i];
    std::snprintf(name, sizeof(name), "ep_%05zu.bin", i);
    ManifestEpisode me;
    me.file = name;
    me.frames = ep.size();
    me.sensor_id = ep.sensor_id;
    me.indenter_id = ep.indenter_id;
    me.seed = ep.seed;
    me.taxel_area = ep.frames.empty() ? 0.0 : ep.frames.front().pmap.taxel_area;
    me.action_dim = static_cast<int>(ep.actions.cols());
    me.proprio_dim = static_cast<int>(ep.proprio.cols());
    me.ctx_id = ep.ctx_id;
    m.episodes.push_back(std::move(me));
  }
  return m;
}

void save_dataset(const DatasetManifest& manifest, std::span<const Episode> episodes,
                  const std::filesystem::path& dir) {
  if (manifest.episodes.size() != episodes.size()) {
    throw ShapeError("save_dataset: manifest lists " + std::to_string(manifest.episodes.size()) +
                     " episodes but " + std::to_string(episodes.size()) + " were given");
  }
  std::filesystem::create_directories(dir);

  json j;
  j["format_version"] = manifest.format_version;
  j["rates"] = {{"tactile_hz", manifest.tactile_hz}, {"force_hz", manifest.force_hz}};
  j["image"] = {{"height", manifest.image_height}, {"width", manifest.image_width}};
  if (manifest.normalization) j["normalization"] = norm_to_json(*manifest.normalization);
  j["episodes"] = json::array();

  for (size_t i = 0; i < episodes.size(); ++i) {
    const Episode& ep = episodes[i];
    const ManifestEpisode& me = manifest.episodes[i];
    if (me.frames != ep.size()) {
      throw ShapeError("save_dataset: manifest frame count mismatch for " + me.file);
    }
    json je;
    je["file"] = me.file;
    je["frames"] = me.frames;
    je["sensor_id"] = me.sensor_id;
    je["indenter_id"] = me.indenter_id;
    je["seed"] = me.seed;
    je["taxel_area"] = me.taxel_area;
    je["ctx_id"] = me.ctx_id;
    if (me.action_dim > 0) je["action_dim"] = me.action_dim;
    if (me.proprio_dim > 0) je["proprio_dim"] = me.proprio_dim;
    j["episodes"].push_back(je);

    std::ofstream os(dir / me.file, std::ios::binary);
    if (!os) throw Error("save_dataset: cannot open " + (dir / me.file).string());
    for (const SyncedFrame& f : ep.frames) write_raw(os, f.image.pixels.data(), f.image.pixels.size());
    for (const SyncedFrame& f : ep.frames) write_raw(os, f.pmap.p.data(), f.pmap.p.size());
    for (const SyncedFrame& f : ep.frames) {
      Eigen::Matrix<double, 6, 1> w = f.wrench.vec6();
      write_raw(os, w.data(), 6);
    }
    for (const SyncedFrame& f : ep.frames) write_raw(os, &f.t, 1);
    if (me.action_dim > 0) {
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a = ep.actions;
      write_raw(os, a.data(), static_cast<size_t>(a.size()));
    }
    if (me.proprio_dim > 0) {
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> q = ep.proprio;
      write_raw(os, q.data(), static_cast<size_t>(q.size()));
    }
  }

  std::ofstream ms(dir / "manifest.json");
  if (!ms) throw Error("save_dataset: cannot open manifest.json");
  ms << j.dump(2) << "\n";
}

std::pair<DatasetManifest, std::vector<Episode>> load_dataset(const std::filesystem::path& dir) {
  std::ifstream ms(dir / "manifest.json");
  if (!ms) throw Error("load_dataset: cannot open " + (dir / "manifest.json").string());
  json j = json::parse(ms);

  DatasetManifest m;
  m.format_version = j.at("format_version").get<int>();
  if (m.format_version != kDatasetFormatVersion) {
    throw VersionError("load_dataset: manifest format_version " +
                       std::to_string(m.format_version) + ", reader supports " +
                       std::to_string(kDatasetFormatVersion));
  }
  m.tactile_hz = j.at("rates").at("tactile_hz").get<double>();
  m.force_hz = j.at("rates").at("force_hz").get<double>();
  m.image_height = j.at("image").at("height").get<int>();
  m.image_width = j.at("image").at("width").get<int>();
  if (j.contains("normalization")) m.normalization = norm_from_json(j.at("normalization"));

  std::vector<Episode> episodes;
  for (const json& je : j.at("episodes")) {
    ManifestEpisode me;
    me.file = je.at("file").get<std::string>();
    me.frames = je.at("frames").get<int>();
    me.sensor_id = je.at("sensor_id").get<std::string>();
    me.indenter_id = je.at("indenter_id").get<std::string>();
    me.seed = je.at("seed").get<std::uint64_t>();
    me.taxel_area = je.at("taxel_area").get<double>();
    me.ctx_id = je.value("ctx_id", 0);
    me.action_dim = je.value("action_dim", 0);
    me.proprio_dim = je.value("proprio_dim", 0);

    std::ifstream is(dir / me.file, std::ios::binary);
    if (!is) throw Error("load_dataset: cannot open " + (dir / me.file).string());

    Episode ep;
    ep.sensor_id = me.sensor_id;
    ep.indenter_id = me.indenter_id;
    ep.seed = me.seed;
    ep.ctx_id = me.ctx_id;
    ep.frames.resize(static_cast<size_t>(me.frames));
    const size_t npix = static_cast<size_t>(m.image_height) * m.image_width;
    for (SyncedFrame& f : ep.frames) {
      f.sensor_id = me.sensor_id;
      f.image = TactileImage(m.image_height, m.image_width);
      read_raw(is, f.image.pixels.data(), npix, me.file + " images");
    }
    for (SyncedFrame& f : ep.frames) {
      read_raw(is, f.pmap.p.data(), f.pmap.p.size(), me.file + " pressure maps");
      f.pmap.taxel_area = me.taxel_area;
    }
    for (SyncedFrame& f : ep.frames) {
      Eigen::Matrix<double, 6, 1> w;
      read_raw(is, w.data(), 6, me.file + " wrenches");
      f.wrench = Wrench::from_vec6(w);
    }
    for (SyncedFrame& f : ep.frames) read_raw(is, &f.t, 1, me.file + " timestamps");
    if (me.action_dim > 0) {
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a(me.frames, me.action_dim);
      read_raw(is, a.data(), static_cast<size_t>(a.size()), me.file + " actions");
      ep.actions = a;
    }
    if (me.proprio_dim > 0) {
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> q(me.frames, me.proprio_dim);
      read_raw(is, q.data(), static_cast<size_t>(q.size()), me.file + " proprio");
      ep.proprio = q;
    }
    is.peek();
    if (!is.eof()) throw ShapeError("load_dataset: blob " + me.file + " larger than manifest declares");

    m.episodes.push_back(me);
    episodes.push_back(std::move(ep));
  }
  return {std::move(m), std::move(episodes)};
}

}  // namespace tfa
