#include "dyad/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "dyad/rng.hpp"
#include "json.hpp"

namespace dyad {

std::string ParseError::format(const std::string& what, int line, int column) {
  if (line <= 0) return what;
  std::ostringstream os;
  os << what << " (line " << line;
  if (column > 0) os << ", column " << column;
  os << ")";
  return os.str();
}

std::vector<double> LidarConfig::beam_angles() const {
  std::vector<double> out(static_cast<std::size_t>(n_beams));
  for (int i = 0; i < n_beams; ++i) out[static_cast<std::size_t>(i)] = -kPi + 2.0 * kPi * i / n_beams;
  return out;
}

OccupancyWorld::OccupancyWorld(double cell_size, Vec2 origin, int width, int height,
                               std::vector<std::uint8_t> cells, std::optional<Vec2> start_marker)
    : cell_size_(cell_size),
      origin_(origin),
      width_(width),
      height_(height),
      cells_(std::move(cells)),
      start_marker_(start_marker) {
  if (!(cell_size_ > 0.0)) throw std::invalid_argument("cell_size must be positive");
  if (width_ <= 0 || height_ <= 0) throw std::invalid_argument("world grid must be non-empty");
  if (cells_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_))
    throw std::invalid_argument("cell buffer does not match grid dimensions");
}

bool OccupancyWorld::cell_occupied(int i, int j) const {
  if (i < 0 || j < 0 || i >= width_ || j >= height_) return true;
  return cells_[static_cast<std::size_t>(j) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(i)] != 0;
}

bool OccupancyWorld::occupied(const Vec2& p) const {
  const double fx = std::floor((p.x - origin_.x) / cell_size_);
  const double fy = std::floor((p.y - origin_.y) / cell_size_);
  if (!(fx >= 0.0 && fy >= 0.0 && fx < width_ && fy < height_)) return true;
  return cell_occupied(static_cast<int>(fx), static_cast<int>(fy));
}

bool OccupancyWorld::circle_collides(const Vec2& center, double radius) const {
  const double lx = (center.x - radius - origin_.x) / cell_size_;
  const double hx = (center.x + radius - origin_.x) / cell_size_;
  const double ly = (center.y - radius - origin_.y) / cell_size_;
  const double hy = (center.y + radius - origin_.y) / cell_size_;
  // Off-grid cells are solid; clamp the scan to a one-cell ring around the grid.
  const int i0 = static_cast<int>(std::floor(std::max(lx, -1.0)));
  const int i1 = static_cast<int>(std::floor(std::min(hx, static_cast<double>(width_))));
  const int j0 = static_cast<int>(std::floor(std::max(ly, -1.0)));
  const int j1 = static_cast<int>(std::floor(std::min(hy, static_cast<double>(height_))));
  const double r2 = radius * radius;
  for (int j = j0; j <= j1; ++j) {
    const double y0 = origin_.y + j * cell_size_;
    const double dy = std::max({y0 - center.y, 0.0, center.y - (y0 + cell_size_)});
    for (int i = i0; i <= i1; ++i) {
      if (!cell_occupied(i, j)) continue;
      const double x0 = origin_.x + i * cell_size_;
      const double dx = std::max({x0 - center.x, 0.0, center.x - (x0 + cell_size_)});
      if (dx * dx + dy * dy <= r2) return true;
    }
  }
  return false;
}

double OccupancyWorld::raycast(const Vec2& origin, double angle, double max_range) const {
  const double gx = (origin.x - origin_.x) / cell_size_;
  const double gy = (origin.y - origin_.y) / cell_size_;
  int i = static_cast<int>(std::floor(gx));
  int j = static_cast<int>(std::floor(gy));
  if (cell_occupied(i, j)) return 0.0;

  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  constexpr double inf = std::numeric_limits<double>::infinity();
  const int step_i = dx > 0.0 ? 1 : -1;
  const int step_j = dy > 0.0 ? 1 : -1;
  // Ray parameter t is in meters.
  const double delta_x = dx != 0.0 ? cell_size_ / std::abs(dx) : inf;
  const double delta_y = dy != 0.0 ? cell_size_ / std::abs(dy) : inf;
  double next_x = dx > 0.0 ? (i + 1 - gx) * delta_x : dx < 0.0 ? (gx - i) * delta_x : inf;
  double next_y = dy > 0.0 ? (j + 1 - gy) * delta_y : dy < 0.0 ? (gy - j) * delta_y : inf;

  while (true) {
    double t;
    if (next_x < next_y) {
      t = next_x;
      next_x += delta_x;
      i += step_i;
    } else {
      t = next_y;
      next_y += delta_y;
      j += step_j;
    }
    if (t >= max_range) return max_range;
    if (cell_occupied(i, j)) return t;
  }
}

WorldBuilder::WorldBuilder(double width_m, double height_m, double cell_size) : cell_size_(cell_size) {
  if (!(cell_size > 0.0)) throw std::invalid_argument("cell_size must be positive");
  width_ = static_cast<int>(std::lround(width_m / cell_size));
  height_ = static_cast<int>(std::lround(height_m / cell_size));
  if (width_ <= 0 || height_ <= 0) throw std::invalid_argument("world extent must be positive");
  cells_.assign(static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_), 0);
}

WorldBuilder& WorldBuilder::cell(int i, int j, bool occupied) {
  if (i >= 0 && j >= 0 && i < width_ && j < height_)
    cells_[static_cast<std::size_t>(j) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(i)] =
        occupied ? 1 : 0;
  return *this;
}

WorldBuilder& WorldBuilder::box(double x0, double y0, double x1, double y1) { return fill(x0, y0, x1, y1, true); }

WorldBuilder& WorldBuilder::clear(double x0, double y0, double x1, double y1) { return fill(x0, y0, x1, y1, false); }

WorldBuilder& WorldBuilder::fill(double x0, double y0, double x1, double y1, bool occupied) {
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  constexpr double eps = 1e-9;
  const int i0 = std::max(0, static_cast<int>(std::ceil(x0 / cell_size_ - 0.5 - eps)));
  const int i1 = std::min(width_ - 1, static_cast<int>(std::floor(x1 / cell_size_ - 0.5 + eps)));
  const int j0 = std::max(0, static_cast<int>(std::ceil(y0 / cell_size_ - 0.5 - eps)));
  const int j1 = std::min(height_ - 1, static_cast<int>(std::floor(y1 / cell_size_ - 0.5 + eps)));
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) cell(i, j, occupied);
  return *this;
}

WorldBuilder& WorldBuilder::convex(const Polygon2& poly) {
  if (poly.vertices.empty()) return *this;
  double x0 = poly.vertices[0].x, x1 = x0, y0 = poly.vertices[0].y, y1 = y0;
  for (const auto& v : poly.vertices) {
    x0 = std::min(x0, v.x);
    x1 = std::max(x1, v.x);
    y0 = std::min(y0, v.y);
    y1 = std::max(y1, v.y);
  }
  const int i0 = std::max(0, static_cast<int>(std::floor(x0 / cell_size_)));
  const int i1 = std::min(width_ - 1, static_cast<int>(std::floor(x1 / cell_size_)));
  const int j0 = std::max(0, static_cast<int>(std::floor(y0 / cell_size_)));
  const int j1 = std::min(height_ - 1, static_cast<int>(std::floor(y1 / cell_size_)));
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i)
      if (polygon_contains(poly, {(i + 0.5) * cell_size_, (j + 0.5) * cell_size_}, 1e-9)) cell(i, j, true);
  return *this;
}

WorldBuilder& WorldBuilder::border(double thickness) {
  const double w = width_ * cell_size_;
  const double h = height_ * cell_size_;
  box(0.0, 0.0, w, thickness);
  box(0.0, h - thickness, w, h);
  box(0.0, 0.0, thickness, h);
  box(w - thickness, 0.0, w, h);
  return *this;
}

WorldBuilder& WorldBuilder::start(Vec2 p) {
  start_ = p;
  return *this;
}

OccupancyWorld WorldBuilder::build() const {
  return OccupancyWorld(cell_size_, {0.0, 0.0}, width_, height_, cells_, start_);
}

OccupancyWorld world_from_ascii(std::string_view text, const AsciiMapOptions& opts) {
  std::vector<std::string> rows;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string row(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    if (!row.empty() && row.back() == '\r') row.pop_back();
    rows.push_back(std::move(row));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty()) throw ParseError("empty ASCII map", 1, 1);

  const std::size_t cols = rows.front().size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols)
      throw ParseError("ragged ASCII map row (expected " + std::to_string(cols) + " columns)",
                       static_cast<int>(r + 1), static_cast<int>(std::min(rows[r].size(), cols) + 1));
  }
  const double ratio = opts.char_size / opts.cell_size;
  const int per_char = static_cast<int>(std::lround(ratio));
  if (per_char < 1 || std::abs(ratio - per_char) > 1e-6)
    throw std::invalid_argument("char_size must be a positive multiple of cell_size");

  WorldBuilder builder(static_cast<double>(cols) * opts.char_size, static_cast<double>(rows.size()) * opts.char_size,
                       opts.cell_size);
  const int n_rows = static_cast<int>(rows.size());
  for (int r = 0; r < n_rows; ++r) {
    const int gy = n_rows - 1 - r;  // row 0 is the top (max-y) row
    for (std::size_t c = 0; c < cols; ++c) {
      const char ch = rows[static_cast<std::size_t>(r)][c];
      if (ch == '.') continue;
      if (ch == 'S') {
        builder.start({(static_cast<double>(c) + 0.5) * opts.char_size, (gy + 0.5) * opts.char_size});
        continue;
      }
      if (ch != '#')
        throw ParseError(std::string("unexpected character '") + ch + "' in ASCII map", r + 1,
                         static_cast<int>(c + 1));
      for (int dj = 0; dj < per_char; ++dj)
        for (int di = 0; di < per_char; ++di)
          builder.cell(static_cast<int>(c) * per_char + di, gy * per_char + dj, true);
    }
  }
  return builder.build();
}

namespace {

std::pair<int, int> line_col(std::string_view text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

OccupancyWorld world_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ParseError(std::string("invalid JSON world: ") + e.what(), line, col);
  }
  try {
    const double cell = j.value("cell_size", 0.05);
    const auto extent = j.at("extent").get<std::vector<double>>();
    if (extent.size() != 2) throw ParseError("\"extent\" must be [w, h]", 0, 0);
    WorldBuilder builder(extent[0], extent[1], cell);
    for (const auto& b : j.value("boxes", nlohmann::json::array())) {
      const auto v = b.get<std::vector<double>>();
      if (v.size() != 4) throw ParseError("each box must be [x0, y0, x1, y1]", 0, 0);
      builder.box(v[0], v[1], v[2], v[3]);
    }
    for (const auto& p : j.value("polygons", nlohmann::json::array())) {
      std::vector<Vec2> pts;
      for (const auto& q : p) {
        const auto v = q.get<std::vector<double>>();
        if (v.size() != 2) throw ParseError("polygon vertices must be [x, y]", 0, 0);
        pts.push_back({v[0], v[1]});
      }
      builder.convex(convex_hull(pts));
    }
    if (j.contains("start")) {
      const auto s = j.at("start").get<std::vector<double>>();
      if (s.size() >= 2) builder.start({s[0], s[1]});
    }
    return builder.build();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON world: ") + e.what(), 0, 0);
  }
}

OccupancyWorld load_world(const std::string& path, const AsciiMapOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open world file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) return world_from_json(text);
  return world_from_ascii(text, opts);
}

LidarScan lidar_scan(const OccupancyWorld& world, const Pose2& pose, const LidarConfig& cfg,
                     const SensorNoise* noise, std::uint64_t scan_index) {
  if (cfg.n_beams < 8) throw std::invalid_argument("lidar needs at least 8 beams");
  LidarScan scan;
  scan.max_range = cfg.max_range;
  scan.angles = cfg.beam_angles();
  scan.ranges.resize(scan.angles.size());
  const Vec2 origin = pose.translation();
  for (std::size_t i = 0; i < scan.angles.size(); ++i)
    scan.ranges[i] = world.raycast(origin, pose.theta + scan.angles[i], cfg.max_range);

  if (noise != nullptr && noise->lidar_sigma > 0.0) {
    Rng rng(derive_seed(noise->seed, scan_index));
    for (double& r : scan.ranges) r = std::clamp(r + rng.normal(0.0, noise->lidar_sigma), 0.0, cfg.max_range);
  }
  return scan;
}

}  // namespace dyad
