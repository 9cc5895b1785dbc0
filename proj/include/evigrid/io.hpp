#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "evigrid/grid.hpp"

namespace evigrid {

/// Unreadable or unwritable file.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File readable but its content violates the format.
class FormatError : public Error {
 public:
  using Error::Error;
};

enum class CloudFormat {
  kXyziF32,      // 4 x f32 per point: x, y, z, intensity
  kNuscenesBin,  // 5 x f32 per point: x, y, z, intensity, ring
};

/// "xyzi_f32" or "nuscenes_bin"; throws FormatError otherwise.
CloudFormat parse_cloud_format(std::string_view tag);
std::string_view cloud_format_name(CloudFormat format);
std::size_t record_stride(CloudFormat format);

struct CloudReadResult {
  PointCloud cloud;
  std::size_t dropped_non_finite = 0;
};

/// Points in file order, non-finite records dropped and counted.
CloudReadResult read_point_cloud(const std::filesystem::path& path, CloudFormat format);
/// Writes points as f32 records; the ring field of nuscenes_bin is written as 0.
void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path, CloudFormat format);

/// Little-endian EGMF container, see docs/FORMATS.md.
std::vector<unsigned char> encode_grid_map(const MultiLayerGridMap& map);
MultiLayerGridMap decode_grid_map(const std::vector<unsigned char>& bytes);
void write_grid_map(const MultiLayerGridMap& map, const std::filesystem::path& path);
MultiLayerGridMap read_grid_map(const std::filesystem::path& path);

/// Text poses, one per line: timestamp x y z qw qx qy qz. Lines starting with
/// '#' and blank lines are skipped. Quaternions within 1e-3 of unit norm are
/// renormalized, others rejected; timestamps must not decrease.
std::vector<Pose> parse_poses(std::string_view text);
std::vector<Pose> read_poses(const std::filesystem::path& path);
std::string format_poses(const std::vector<Pose>& poses);
void write_poses(const std::vector<Pose>& poses, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace evigrid
