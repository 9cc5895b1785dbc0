#include "evigrid/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace evigrid {

namespace {

constexpr char kMagic[4] = {'E', 'G', 'M', 'F'};
constexpr std::uint32_t kVersion = 1;

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<unsigned char>& out) : out_(out) {}

  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) out_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    out_.insert(out_.end(), p, p + n);
  }

 private:
  std::vector<unsigned char>& out_;
};

class ByteReader {
 public:
  ByteReader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

  void need(std::size_t n, const char* what) const {
    if (size_ - pos_ < n) {
      throw FormatError(std::string("truncated file while reading ") + what + " at byte " + std::to_string(pos_));
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(data_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(data_[pos_ + k]) << (8 * k);
    pos_ += 8;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  const unsigned char* take(std::size_t n, const char* what) {
    need(n, what);
    const unsigned char* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error while reading '" + path.string() + "'");
  return bytes;
}

void write_bytes(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError("error while writing '" + path.string() + "'");
}

// The header stores the cell size as f32; read it back as the shortest
// decimal that round-trips through f32 so that 0.15 stays 0.15.
double widen_cell_size(float v) {
  char buf[32];
  for (int digits = 1; digits <= 9; ++digits) {
    std::snprintf(buf, sizeof buf, "%.*g", digits, static_cast<double>(v));
    if (std::strtof(buf, nullptr) == v) return std::strtod(buf, nullptr);
  }
  return static_cast<double>(v);
}

}  // namespace

CloudFormat parse_cloud_format(std::string_view tag) {
  if (tag == "xyzi_f32") return CloudFormat::kXyziF32;
  if (tag == "nuscenes_bin") return CloudFormat::kNuscenesBin;
  throw FormatError("unknown point cloud format '" + std::string(tag) + "'");
}

std::string_view cloud_format_name(CloudFormat format) {
  return format == CloudFormat::kXyziF32 ? "xyzi_f32" : "nuscenes_bin";
}

std::size_t record_stride(CloudFormat format) { return format == CloudFormat::kXyziF32 ? 16 : 20; }

CloudReadResult read_point_cloud(const std::filesystem::path& path, CloudFormat format) {
  const auto bytes = read_bytes(path);
  const std::size_t stride = record_stride(format);
  if (bytes.size() % stride != 0) {
    throw FormatError("'" + path.string() + "' has " + std::to_string(bytes.size()) +
                      " bytes, not a multiple of the " + std::to_string(stride) + "-byte record");
  }
  CloudReadResult result;
  const std::size_t n = bytes.size() / stride;
  result.cloud.points.reserve(n);
  ByteReader r(bytes.data(), bytes.size());
  for (std::size_t k = 0; k < n; ++k) {
    float v[5] = {};
    for (std::size_t c = 0; c < stride / 4; ++c) v[c] = r.f32("point record");
    if (std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]) && std::isfinite(v[3])) {
      result.cloud.points.push_back({v[0], v[1], v[2], v[3]});
    } else {
      ++result.dropped_non_finite;
    }
  }
  return result;
}

void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format) {
  std::vector<unsigned char> bytes;
  bytes.reserve(cloud.points.size() * record_stride(format));
  ByteWriter w(bytes);
  for (const auto& p : cloud.points) {
    w.f32(static_cast<float>(p.x));
    w.f32(static_cast<float>(p.y));
    w.f32(static_cast<float>(p.z));
    w.f32(static_cast<float>(p.intensity));
    if (format == CloudFormat::kNuscenesBin) w.f32(0.0f);
  }
  write_bytes(path, bytes.data(), bytes.size());
}

std::vector<unsigned char> encode_grid_map(const MultiLayerGridMap& map) {
  const GridSpec& spec = map.spec();
  std::vector<unsigned char> bytes;
  ByteWriter w(bytes);
  w.raw(kMagic, 4);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(spec.width));
  w.u32(static_cast<std::uint32_t>(spec.height));
  w.f32(static_cast<float>(spec.cell_size));
  w.f64(spec.origin_x);
  w.f64(spec.origin_y);
  w.u32(static_cast<std::uint32_t>(map.layers().size()));
  for (const auto& layer : map.layers()) {
    w.u32(static_cast<std::uint32_t>(layer.name.size()));
    w.raw(layer.name.data(), layer.name.size());
    for (const float v : layer.values) w.f32(v);
  }
  return bytes;
}

MultiLayerGridMap decode_grid_map(const std::vector<unsigned char>& bytes) {
  ByteReader r(bytes.data(), bytes.size());
  if (std::memcmp(r.take(4, "magic"), kMagic, 4) != 0) throw FormatError("bad magic, not an EGMF grid map");
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) throw FormatError("unsupported EGMF version " + std::to_string(version));
  GridSpec spec;
  const std::uint32_t width = r.u32("width");
  const std::uint32_t height = r.u32("height");
  if (width == 0 || height == 0 || width > (1u << 20) || height > (1u << 20)) {
    throw FormatError("implausible grid dimensions " + std::to_string(width) + "x" + std::to_string(height));
  }
  spec.width = static_cast<int>(width);
  spec.height = static_cast<int>(height);
  spec.cell_size = widen_cell_size(r.f32("cell size"));
  spec.origin_x = r.f64("origin");
  spec.origin_y = r.f64("origin");
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
  MultiLayerGridMap map(spec);
  const std::uint32_t layer_count = r.u32("layer count");
  const std::size_t cells = spec.cell_count();
  std::set<std::string> seen;
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    const std::uint32_t name_len = r.u32("layer name length");
    const auto* name_ptr = r.take(name_len, "layer name");
    std::string name(reinterpret_cast<const char*>(name_ptr), name_len);
    if (name.empty()) throw FormatError("empty layer name");
    if (!seen.insert(name).second) throw FormatError("duplicate layer name '" + name + "'");
    if (r.remaining() / 4 < cells) throw FormatError("truncated payload in layer '" + name + "'");
    Layer layer{std::move(name), std::vector<float>(cells)};
    for (auto& v : layer.values) v = r.f32("layer values");
    map.add_layer(std::move(layer));
  }
  if (r.remaining() != 0) {
    throw FormatError(std::to_string(r.remaining()) + " trailing bytes after the last layer");
  }
  return map;
}

void write_grid_map(const MultiLayerGridMap& map, const std::filesystem::path& path) {
  const auto bytes = encode_grid_map(map);
  write_bytes(path, bytes.data(), bytes.size());
}

MultiLayerGridMap read_grid_map(const std::filesystem::path& path) { return decode_grid_map(read_bytes(path)); }

std::vector<Pose> parse_poses(std::string_view text) {
  std::vector<Pose> poses;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    double v[8];
    for (double& x : v) {
      if (!(fields >> x)) throw FormatError("pose line " + std::to_string(line_no) + ": expected 8 numbers");
    }
    std::string extra;
    if (fields >> extra) throw FormatError("pose line " + std::to_string(line_no) + ": trailing field '" + extra + "'");
    for (const double x : v) {
      if (!std::isfinite(x)) throw FormatError("pose line " + std::to_string(line_no) + ": non-finite value");
    }
    Eigen::Quaterniond q(v[4], v[5], v[6], v[7]);
    const double norm = q.norm();
    if (std::abs(norm - 1.0) > 1e-3) {
      throw FormatError("pose line " + std::to_string(line_no) + ": quaternion norm " + std::to_string(norm) +
                        " is not unit");
    }
    q.normalize();
    if (!poses.empty() && v[0] < poses.back().timestamp) {
      throw FormatError("pose line " + std::to_string(line_no) + ": timestamp decreases");
    }
    Pose p;
    p.timestamp = v[0];
    p.translation = Eigen::Vector3d(v[1], v[2], v[3]);
    p.rotation = q;
    poses.push_back(p);
  }
  return poses;
}

std::vector<Pose> read_poses(const std::filesystem::path& path) { return parse_poses(read_text_file(path)); }

std::string format_poses(const std::vector<Pose>& poses) {
  std::string out = "# timestamp x y z qw qx qy qz\n";
  char line[512];
  for (const auto& p : poses) {
    std::snprintf(line, sizeof line, "%.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n", p.timestamp,
                  p.translation.x(), p.translation.y(), p.translation.z(), p.rotation.w(), p.rotation.x(),
                  p.rotation.y(), p.rotation.z());
    out += line;
  }
  return out;
}

void write_poses(const std::vector<Pose>& poses, const std::filesystem::path& path) {
  write_text_file(path, format_poses(poses));
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_bytes(path, text.data(), text.size());
}

}  // namespace evigrid
