#include "tfa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tfa/common.hpp"

namespace tfa {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'T', 'F', 'A', 'B', 'L', 'O', 'B', '\0'};

enum EntryKind : std::uint32_t { kMat = 0, kCounts = 1, kString = 2 };

template <typename T>
void put(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& is, const char* what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (is.gcount() != sizeof(T)) throw ShapeError(std::string("checkpoint: truncated ") + what);
  return v;
}

void put_string(std::ofstream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& is) {
  const auto len = get<std::uint32_t>(is, "string length");
  std::string s(len, '\0');
  is.read(s.data(), len);
  if (static_cast<std::uint32_t>(is.gcount()) != len) throw ShapeError("checkpoint: truncated string");
  return s;
}

}  // namespace

double Blob::scalar(const std::string& name) const {
  const Eigen::MatrixXd& m = mat(name);
  if (m.size() != 1) throw ShapeError("checkpoint: " + name + " is not a scalar");
  return m(0, 0);
}

void Blob::set_scalar(const std::string& name, double v) {
  mats[name] = Eigen::MatrixXd::Constant(1, 1, v);
}

const Eigen::MatrixXd& Blob::mat(const std::string& name) const {
  auto it = mats.find(name);
  if (it == mats.end()) throw Error("checkpoint: missing entry " + name);
  return it->second;
}

void save_blob(const Blob& blob, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("checkpoint: cannot open " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, blob.mats.size() + blob.counts.size() + blob.strings.size());

  for (const auto& [name, m] : blob.mats) {
    put_string(os, name);
    put<std::uint32_t>(os, kMat);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
    // Row-major on disk.
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      os.write(reinterpret_cast<const char*>(m.row(r).eval().data()),
               static_cast<std::streamsize>(sizeof(double) * m.cols()));
    }
  }
  for (const auto& [name, v] : blob.counts) {
    put_string(os, name);
    put<std::uint32_t>(os, kCounts);
    put<std::uint64_t>(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(sizeof(std::uint64_t) * v.size()));
  }
  for (const auto& [name, s] : blob.strings) {
    put_string(os, name);
    put<std::uint32_t>(os, kString);
    put_string(os, s);
  }
}

Blob load_blob(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (is.gcount() != sizeof(magic) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw VersionError("checkpoint: bad magic in " + path.string());
  }
  const auto version = get<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint: file version " + std::to_string(version) +
                       ", reader supports " + std::to_string(kCheckpointVersion));
  }
  const auto n_entries = get<std::uint64_t>(is, "entry count");

  Blob blob;
  for (std::uint64_t i = 0; i < n_entries; ++i) {
    const std::string name = get_string(is);
    const auto kind = get<std::uint32_t>(is, "entry kind");
    switch (kind) {
      case kMat: {
        const auto rows = get<std::uint64_t>(is, "rows");
        const auto cols = get<std::uint64_t>(is, "cols");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        std::vector<double> row(cols);
        for (std::uint64_t r = 0; r < rows; ++r) {
          is.read(reinterpret_cast<char*>(row.data()),
                  static_cast<std::streamsize>(sizeof(double) * cols));
          if (static_cast<std::uint64_t>(is.gcount()) != sizeof(double) * cols) {
            throw ShapeError("checkpoint: truncated matrix " + name);
          }
          for (std::uint64_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
          }
        }
        blob.mats[name] = std::move(m);
        break;
      }
      case kCounts: {
        const auto len = get<std::uint64_t>(is, "count length");
        std::vector<std::uint64_t> v(len);
        is.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(sizeof(std::uint64_t) * len));
        if (static_cast<std::uint64_t>(is.gcount()) != sizeof(std::uint64_t) * len) {
          throw ShapeError("checkpoint: truncated counts " + name);
        }
        blob.counts[name] = std::move(v);
        break;
      }
      case kString:
        blob.strings[name] = get_string(is);
        break;
      default:
        throw VersionError("checkpoint: unknown entry kind " + std::to_string(kind));
    }
  }
  return blob;
}

}  // namespace tfa
