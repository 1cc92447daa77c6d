#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dyad/geometry.hpp"

namespace dyad {

/// Malformed world/scenario/trajectory input. Line and column are 1-based;
/// zero means "not applicable".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line, int column)
      : std::runtime_error(format(what, line, column)), line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string format(const std::string& what, int line, int column);
  int line_;
  int column_;
};

struct SensorNoise {
  double lidar_sigma = 0.05;  // meters, i.i.d. Gaussian per beam
  std::uint64_t seed = 0;
};

struct LidarConfig {
  int n_beams = 72;
  double max_range = 10.0;

  /// Robot-frame beam angles: -pi + 2*pi*i/n.
  std::vector<double> beam_angles() const;
};

struct LidarScan {
  std::vector<double> angles;  // robot frame, strictly increasing
  std::vector<double> ranges;
  double max_range = 0.0;
};

/// Immutable occupancy grid. Cell (i, j) covers
/// [origin.x + i*cell, origin.x + (i+1)*cell) x [origin.y + j*cell, ...).
/// Everything outside the grid counts as occupied.
class OccupancyWorld {
 public:
  OccupancyWorld(double cell_size, Vec2 origin, int width, int height, std::vector<std::uint8_t> cells,
                 std::optional<Vec2> start_marker = std::nullopt);

  double cell_size() const { return cell_size_; }
  Vec2 origin() const { return origin_; }
  int width() const { return width_; }
  int height() const { return height_; }
  Vec2 extent() const { return {width_ * cell_size_, height_ * cell_size_}; }
  /// Start position from an ASCII map's 'S', if any.
  const std::optional<Vec2>& start_marker() const { return start_marker_; }

  bool cell_occupied(int i, int j) const;
  bool occupied(const Vec2& p) const;
  /// Exact disc/cell-square intersection test against every nearby cell.
  bool circle_collides(const Vec2& center, double radius) const;
  /// Exact first-hit distance of a ray against occupied cells (grid DDA),
  /// clamped to max_range. A ray starting in an occupied cell returns 0.
  double raycast(const Vec2& origin, double angle, double max_range) const;

 private:
  double cell_size_;
  Vec2 origin_;
  int width_;
  int height_;
  std::vector<std::uint8_t> cells_;
  std::optional<Vec2> start_marker_;
};

/// Rasterizes obstacles into a grid covering [0, w] x [0, h].
class WorldBuilder {
 public:
  WorldBuilder(double width_m, double height_m, double cell_size = 0.05);

  /// Marks cells whose centers fall inside the closed box.
  WorldBuilder& box(double x0, double y0, double x1, double y1);
  /// Frees cells whose centers fall inside the closed box.
  WorldBuilder& clear(double x0, double y0, double x1, double y1);
  /// Marks cells whose centers fall inside a convex polygon.
  WorldBuilder& convex(const Polygon2& poly);
  /// Solid walls of the given thickness along the four borders.
  WorldBuilder& border(double thickness);
  WorldBuilder& cell(int i, int j, bool occupied);
  WorldBuilder& start(Vec2 p);

  int width() const { return width_; }
  int height() const { return height_; }
  OccupancyWorld build() const;

 private:
  WorldBuilder& fill(double x0, double y0, double x1, double y1, bool occupied);

  double cell_size_;
  int width_;
  int height_;
  std::vector<std::uint8_t> cells_;
  std::optional<Vec2> start_;
};

struct AsciiMapOptions {
  double char_size = 0.25;  // meters covered by one map character
  double cell_size = 0.05;
};

/// '#' occupied, '.' free, 'S' start marker (free). Row 0 is the max-y row.
OccupancyWorld world_from_ascii(std::string_view text, const AsciiMapOptions& opts = {});

/// {"cell_size": m, "extent": [w, h], "boxes": [[x0,y0,x1,y1], ...],
///  "polygons": [[[x,y], ...], ...]}  (polygons optional, convex)
OccupancyWorld world_from_json(std::string_view text);

/// Dispatches on file extension: .json -> JSON world, anything else -> ASCII.
OccupancyWorld load_world(const std::string& path, const AsciiMapOptions& opts = {});

/// Simulated 2D lidar. Noise is drawn from a stream keyed by
/// (noise.seed, scan_index); the caller owns the scan counter.
LidarScan lidar_scan(const OccupancyWorld& world, const Pose2& pose, const LidarConfig& cfg,
                     const SensorNoise* noise, std::uint64_t scan_index);

}  // namespace dyad
