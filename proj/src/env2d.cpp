#include "gnnmp/env2d.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gnnmp/rng.hpp"

namespace gnnmp {

namespace {

struct WallLayout {
  bool vertical = true;
  std::vector<double> positions;  // wall centerlines, increasing
  std::vector<double> gap_lo;     // gap start along the wall's long axis
};

WallLayout layout_walls(std::uint64_t seed, int n_walls, double corridor_width) {
  Rng rng = make_stream(seed, "world");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  WallLayout layout;
  layout.vertical = unit(rng) < 0.5;
  if (n_walls <= 0) return layout;
  // One slot per wall inside [0.2, 0.8] so every strip between walls stays open.
  const double slot = 0.6 / n_walls;
  for (int i = 0; i < n_walls; ++i) {
    layout.positions.push_back(0.2 + slot * (i + 0.25 + 0.5 * unit(rng)));
    layout.gap_lo.push_back(0.05 + (0.9 - corridor_width) * unit(rng));
  }
  return layout;
}

Rect oriented(bool vertical, double across_lo, double across_hi, double along_lo,
              double along_hi) {
  if (vertical) return {across_lo, along_lo, across_hi, along_hi};
  return {along_lo, across_lo, along_hi, across_hi};
}

void check_bounds(const Point2& p) {
  if (!(p.x() >= 0.0 && p.x() <= 1.0 && p.y() >= 0.0 && p.y() <= 1.0))
    throw std::domain_error("point outside the unit square");
}

double rect_distance(const Rect& r, const Point2& p) {
  const double dx = std::max({r.xmin - p.x(), 0.0, p.x() - r.xmax});
  const double dy = std::max({r.ymin - p.y(), 0.0, p.y() - r.ymax});
  return std::hypot(dx, dy);
}

}  // namespace

World2D generate_world(std::uint64_t seed, int n_walls, double corridor_width, double thickness) {
  if (n_walls < 0) throw std::invalid_argument("n_walls must be non-negative");
  if (!(corridor_width > 0.0 && corridor_width < 1.0))
    throw std::invalid_argument("corridor_width must lie in (0, 1)");
  const WallLayout layout = layout_walls(seed, n_walls, corridor_width);
  World2D world;
  for (std::size_t i = 0; i < layout.positions.size(); ++i) {
    const double lo = layout.positions[i] - 0.5 * thickness;
    const double hi = layout.positions[i] + 0.5 * thickness;
    const double g0 = layout.gap_lo[i];
    const double g1 = g0 + corridor_width;
    world.walls.push_back(oriented(layout.vertical, lo, hi, 0.0, g0));
    world.walls.push_back(oriented(layout.vertical, lo, hi, g1, 1.0));
    world.gaps.push_back(oriented(layout.vertical, lo, hi, g0, g1));
  }
  return world;
}

bool is_free(const World2D& world, const Point2& p) {
  check_bounds(p);
  for (const Rect& r : world.walls)
    if (r.contains(p)) return false;
  for (const Disc& d : world.blobs)
    if (d.contains(p)) return false;
  return true;
}

bool segment_free(const World2D& world, const Point2& a, const Point2& b, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("segment step must be positive");
  // Canonical endpoint order makes the sampled point set independent of direction.
  const bool swap = std::make_pair(b.x(), b.y()) < std::make_pair(a.x(), a.y());
  const Point2& p = swap ? b : a;
  const Point2& q = swap ? a : b;
  const double length = (q - p).norm();
  const auto pieces = static_cast<long>(std::ceil(length / step));
  if (pieces == 0) return is_free(world, p);
  for (long i = 0; i <= pieces; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(pieces);
    if (!is_free(world, p + t * (q - p))) return false;
  }
  return true;
}

World2D corrupt_with_blobs(const World2D& world, std::uint64_t seed, int n_blobs, double r_max,
                           const std::vector<Point2>& keep_free, int rejection_budget) {
  if (n_blobs < 0) throw std::invalid_argument("n_blobs must be non-negative");
  if (!(r_max > 0.0)) throw std::invalid_argument("r_max must be positive");
  World2D out = world;
  Rng rng = make_stream(seed, "blobs");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int attempts = 0;
  while (static_cast<int>(out.blobs.size()) < n_blobs) {
    if (attempts++ >= rejection_budget)
      throw GenerationError("blob rejection budget exhausted");
    Disc disc;
    disc.center = Point2(unit(rng), unit(rng));
    disc.radius = r_max * (1.0 - unit(rng));  // (0, r_max]
    const bool blocks_gap = std::any_of(out.gaps.begin(), out.gaps.end(), [&](const Rect& g) {
      return rect_distance(g, disc.center) <= disc.radius;
    });
    const bool covers_kept = std::any_of(keep_free.begin(), keep_free.end(),
                                         [&](const Point2& p) { return disc.contains(p); });
    if (blocks_gap || covers_kept) continue;
    out.blobs.push_back(disc);
  }
  return out;
}

nlohmann::json to_json(const World2D& world) {
  nlohmann::json doc;
  doc["walls"] = nlohmann::json::array();
  for (const Rect& r : world.walls) doc["walls"].push_back({r.xmin, r.ymin, r.xmax, r.ymax});
  doc["blobs"] = nlohmann::json::array();
  for (const Disc& d : world.blobs)
    doc["blobs"].push_back({d.center.x(), d.center.y(), d.radius});
  doc["gaps"] = nlohmann::json::array();
  for (const Rect& r : world.gaps) doc["gaps"].push_back({r.xmin, r.ymin, r.xmax, r.ymax});
  return doc;
}

World2D world_from_json(const nlohmann::json& doc) {
  auto rects = [](const nlohmann::json& list) {
    std::vector<Rect> out;
    for (const auto& r : list) {
      if (r.size() != 4) throw std::invalid_argument("rectangle needs 4 coordinates");
      out.push_back({r[0].get<double>(), r[1].get<double>(), r[2].get<double>(),
                     r[3].get<double>()});
    }
    return out;
  };
  World2D world;
  world.walls = rects(doc.at("walls"));
  for (const auto& b : doc.at("blobs")) {
    if (b.size() != 3) throw std::invalid_argument("blob needs 3 values");
    world.blobs.push_back({Point2(b[0].get<double>(), b[1].get<double>()), b[2].get<double>()});
  }
  if (doc.contains("gaps")) world.gaps = rects(doc.at("gaps"));
  return world;
}

PlanningProblem2D generate_problem(std::uint64_t seed, int n_walls, double corridor_width) {
  const double thickness = WallOptions{}.thickness;
  PlanningProblem2D problem;
  problem.world = generate_world(seed, n_walls, corridor_width, thickness);
  const WallLayout layout = layout_walls(seed, n_walls, corridor_width);

  Rng rng = make_stream(seed, "endpoints");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr double margin = 0.03;
  double first_hi = 1.0 - margin, last_lo = margin;
  if (!layout.positions.empty()) {
    first_hi = layout.positions.front() - 0.5 * thickness - margin;
    last_lo = layout.positions.back() + 0.5 * thickness + margin;
  }
  auto draw = [&](double across_lo, double across_hi) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const double across = across_lo + (across_hi - across_lo) * unit(rng);
      const double along = margin + (1.0 - 2.0 * margin) * unit(rng);
      const Point2 p = layout.vertical ? Point2(across, along) : Point2(along, across);
      if (is_free(problem.world, p)) return p;
    }
    throw GenerationError("no free endpoint found");
  };
  problem.start = draw(margin, first_hi);
  problem.goal = draw(last_lo, 1.0 - margin);
  if (unit(rng) < 0.5) std::swap(problem.start, problem.goal);
  return problem;
}

}  // namespace gnnmp
