#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace gnnmp {

using Point2 = Eigen::Vector2d;

/// Closed axis-aligned rectangle in unit-square coordinates.
struct Rect {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

  bool contains(const Point2& p) const {
    return p.x() >= xmin && p.x() <= xmax && p.y() >= ymin && p.y() <= ymax;
  }
  Point2 center() const { return {0.5 * (xmin + xmax), 0.5 * (ymin + ymax)}; }
  bool operator==(const Rect&) const = default;
};

/// Closed disc.
struct Disc {
  Point2 center = Point2::Zero();
  double radius = 0;

  bool contains(const Point2& p) const { return (p - center).norm() <= radius; }
  bool operator==(const Disc& o) const { return center == o.center && radius == o.radius; }
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A 2-D world on [0,1]^2. Walls are the rectangles left after cutting one
/// corridor gap into each full-span wall; `gaps` records those corridors.
struct World2D {
  std::vector<Rect> walls;
  std::vector<Disc> blobs;
  std::vector<Rect> gaps;

  bool operator==(const World2D&) const = default;
};

struct WallOptions {
  double thickness = 0.05;
  double corridor_width = 0.08;
};

inline constexpr double kDefaultMinCorridor = 0.05;
inline constexpr double kDefaultCollisionStep = 0.01;

World2D generate_world(std::uint64_t seed, int n_walls, double corridor_width,
                       double thickness = WallOptions{}.thickness);

/// Throws std::domain_error for points outside [0,1]^2.
bool is_free(const World2D& world, const Point2& p);

bool segment_free(const World2D& world, const Point2& a, const Point2& b,
                  double step = kDefaultCollisionStep);

/// Adds `n_blobs` discs with radii in (0, r_max]. A candidate disc is
/// rejected when it touches a corridor gap or one of `keep_free`.
World2D corrupt_with_blobs(const World2D& world, std::uint64_t seed, int n_blobs, double r_max,
                           const std::vector<Point2>& keep_free = {},
                           int rejection_budget = 10000);

nlohmann::json to_json(const World2D& world);
World2D world_from_json(const nlohmann::json& doc);

/// Planning problem on a 2-D world.
struct PlanningProblem2D {
  World2D world;
  Point2 start = Point2::Zero();
  Point2 goal = Point2::Zero();
};

/// Start and goal drawn in the first and last free strip of the world so
/// every solution crosses each corridor. Throws GenerationError when no
/// free point can be found.
PlanningProblem2D generate_problem(std::uint64_t seed, int n_walls, double corridor_width);

}  // namespace gnnmp
