#include "synseg/synthworld.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "synseg/errors.hpp"
#include "synseg/rng.hpp"
#include "synseg/taxonomy.hpp"

namespace synseg::world {
namespace {

constexpr double kEps = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr double kBlockPitch = 40.0;
constexpr double kRoadHalfWidth = 5.0;
constexpr double kLaneOffset = 2.5;
constexpr double kSidewalkWidth = 4.0;
constexpr double kBuildingCell = 14.0;
constexpr double kCarLength = 4.5, kCarWidth = 1.9, kCarHeight = 1.5;
constexpr double kPedestrianRadius = 0.3, kPedestrianHeight = 1.75;
constexpr double kEgoClearance = 10.0;

// Entry parameter of a ray against an axis-aligned box, or +inf. Rays that
// start inside the box do not hit it.
double SlabEntry(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
                 const Eigen::Vector3d& hi, double t_max) {
  double t0 = -kInf, t1 = kInf;
  for (int k = 0; k < 3; ++k) {
    if (d[k] == 0.0) {
      if (o[k] < lo[k] || o[k] > hi[k]) return kInf;
      continue;
    }
    const double inv = 1.0 / d[k];
    double ta = (lo[k] - o[k]) * inv;
    double tb = (hi[k] - o[k]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return kInf;
  }
  if (t0 <= kEps || t0 > t_max) return kInf;
  return t0;
}

// Same as SlabEntry but only reports whether the segment [0, t_max] can touch the box.
bool SlabTouches(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& lo,
                 const Eigen::Vector3d& hi, double t_max) {
  double t0 = 0.0, t1 = t_max;
  for (int k = 0; k < 3; ++k) {
    if (d[k] == 0.0) {
      if (o[k] < lo[k] || o[k] > hi[k]) return false;
      continue;
    }
    const double inv = 1.0 / d[k];
    double ta = (lo[k] - o[k]) * inv;
    double tb = (hi[k] - o[k]) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

Eigen::Vector3d ToLocal(const Solid& s, const Eigen::Vector3d& p) {
  const double c = std::cos(s.yaw), sn = std::sin(s.yaw);
  const double px = p.x() - s.x, py = p.y() - s.y;
  return {c * px + sn * py, -sn * px + c * py, p.z() - s.base_z};
}

Eigen::Vector3d DirToLocal(const Solid& s, const Eigen::Vector3d& d) {
  const double c = std::cos(s.yaw), sn = std::sin(s.yaw);
  return {c * d.x() + sn * d.y(), -sn * d.x() + c * d.y(), d.z()};
}

double SolveEntry(double a, double b, double c, double t_max) {
  // Origin inside the quadric: no hit.
  if (c < 0.0 || a <= 0.0) return kInf;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return kInf;
  const double t = (-b - std::sqrt(disc)) / (2.0 * a);
  return (t > kEps && t <= t_max) ? t : kInf;
}

double IntersectSolid(const Solid& s, const Eigen::Vector3d& o_world, const Eigen::Vector3d& d_world, double t_max) {
  const Eigen::Vector3d o = ToLocal(s, o_world);
  const Eigen::Vector3d d = DirToLocal(s, d_world);
  switch (s.kind) {
    case ShapeKind::kBox: {
      const Eigen::Vector3d& h = s.half_extents;
      return SlabEntry(o, d, {-h.x(), -h.y(), 0.0}, {h.x(), h.y(), 2.0 * h.z()}, t_max);
    }
    case ShapeKind::kCylinder: {
      const double r2 = s.radius * s.radius;
      const bool inside = o.x() * o.x() + o.y() * o.y() < r2 && o.z() > 0.0 && o.z() < s.height;
      if (inside) return kInf;
      double best = kInf;
      const double a = d.x() * d.x() + d.y() * d.y();
      if (a > 0.0) {
        const double b = 2.0 * (o.x() * d.x() + o.y() * d.y());
        const double c = o.x() * o.x() + o.y() * o.y() - r2;
        const double disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
          const double t = (-b - std::sqrt(disc)) / (2.0 * a);
          const double z = o.z() + t * d.z();
          if (t > kEps && t <= t_max && z >= 0.0 && z <= s.height) best = t;
        }
      }
      if (d.z() != 0.0) {
        for (double cap : {0.0, s.height}) {
          const double t = (cap - o.z()) / d.z();
          if (t <= kEps || t > t_max || t >= best) continue;
          const double x = o.x() + t * d.x(), y = o.y() + t * d.y();
          if (x * x + y * y <= r2) best = t;
        }
      }
      return best;
    }
    case ShapeKind::kEllipsoidCluster: {
      double best = kInf;
      for (const Ellipsoid& e : s.lobes) {
        const Eigen::Vector3d os = (o - e.center).cwiseQuotient(e.radii);
        const Eigen::Vector3d ds = d.cwiseQuotient(e.radii);
        best = std::min(best, SolveEntry(ds.squaredNorm(), 2.0 * os.dot(ds), os.squaredNorm() - 1.0, t_max));
      }
      return best;
    }
  }
  return kInf;
}

// Conservative world-space bounds.
void SolidBounds(const Solid& s, Eigen::Vector3d& lo, Eigen::Vector3d& hi) {
  switch (s.kind) {
    case ShapeKind::kBox: {
      const double c = std::abs(std::cos(s.yaw)), sn = std::abs(std::sin(s.yaw));
      const double ex = c * s.half_extents.x() + sn * s.half_extents.y();
      const double ey = sn * s.half_extents.x() + c * s.half_extents.y();
      lo = {s.x - ex, s.y - ey, s.base_z};
      hi = {s.x + ex, s.y + ey, s.base_z + 2.0 * s.half_extents.z()};
      return;
    }
    case ShapeKind::kCylinder:
      lo = {s.x - s.radius, s.y - s.radius, s.base_z};
      hi = {s.x + s.radius, s.y + s.radius, s.base_z + s.height};
      return;
    case ShapeKind::kEllipsoidCluster: {
      lo = Eigen::Vector3d::Constant(kInf);
      hi = Eigen::Vector3d::Constant(-kInf);
      const double c = std::cos(s.yaw), sn = std::sin(s.yaw);
      for (const Ellipsoid& e : s.lobes) {
        const double wx = s.x + c * e.center.x() - sn * e.center.y();
        const double wy = s.y + sn * e.center.x() + c * e.center.y();
        const double rxy = std::max(e.radii.x(), e.radii.y());
        lo = lo.cwiseMin(Eigen::Vector3d(wx - rxy, wy - rxy, s.base_z + e.center.z() - e.radii.z()));
        hi = hi.cwiseMax(Eigen::Vector3d(wx + rxy, wy + rxy, s.base_z + e.center.z() + e.radii.z()));
      }
      return;
    }
  }
}

// 2D footprint used for overlap tests.
struct Footprint {
  bool is_circle = false;
  double cx = 0, cy = 0;
  double radius = 0;
  double hx = 0, hy = 0, yaw = 0;
  double z0 = 0, z1 = 0;
};

Footprint FootprintOf(const Solid& s) {
  Footprint f;
  f.cx = s.x;
  f.cy = s.y;
  switch (s.kind) {
    case ShapeKind::kBox:
      f.hx = s.half_extents.x();
      f.hy = s.half_extents.y();
      f.yaw = s.yaw;
      f.z0 = s.base_z;
      f.z1 = s.base_z + 2.0 * s.half_extents.z();
      break;
    case ShapeKind::kCylinder:
      f.is_circle = true;
      f.radius = s.radius;
      f.z0 = s.base_z;
      f.z1 = s.base_z + s.height;
      break;
    case ShapeKind::kEllipsoidCluster: {
      Eigen::Vector3d lo, hi;
      SolidBounds(s, lo, hi);
      f.is_circle = true;
      f.cx = 0.5 * (lo.x() + hi.x());
      f.cy = 0.5 * (lo.y() + hi.y());
      f.radius = 0.5 * std::max(hi.x() - lo.x(), hi.y() - lo.y());
      f.z0 = lo.z();
      f.z1 = hi.z();
      break;
    }
  }
  return f;
}

bool CircleBox(const Footprint& circle, const Footprint& box, double margin) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  const double px = circle.cx - box.cx, py = circle.cy - box.cy;
  const double lx = c * px + s * py, ly = -s * px + c * py;
  const double qx = std::clamp(lx, -box.hx, box.hx), qy = std::clamp(ly, -box.hy, box.hy);
  const double r = circle.radius + margin;
  return (lx - qx) * (lx - qx) + (ly - qy) * (ly - qy) < r * r;
}

bool BoxBox(const Footprint& a, const Footprint& b, double margin) {
  const std::array<const Footprint*, 2> boxes = {&a, &b};
  for (const Footprint* axis_owner : boxes) {
    for (int k = 0; k < 2; ++k) {
      const double ang = axis_owner->yaw + (k == 0 ? 0.0 : M_PI / 2.0);
      const double ax = std::cos(ang), ay = std::sin(ang);
      auto radius = [&](const Footprint& f) {
        const double c = std::cos(f.yaw), s = std::sin(f.yaw);
        return f.hx * std::abs(c * ax + s * ay) + f.hy * std::abs(-s * ax + c * ay);
      };
      const double dist = std::abs((b.cx - a.cx) * ax + (b.cy - a.cy) * ay);
      if (dist >= radius(a) + radius(b) + margin) return false;
    }
  }
  return true;
}

Rgb Shade(const Rgb& base, const double tint[3], double jitter) {
  auto ch = [&](std::uint8_t v, double t) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v * t * jitter), 0L, 255L));
  };
  return {ch(base.r, tint[0]), ch(base.g, tint[1]), ch(base.b, tint[2])};
}

double Jitter(std::uint64_t scene_seed, std::uint64_t key) {
  const std::uint64_t h = MixSeed(scene_seed, key);
  return 0.85 + 0.3 * (static_cast<double>(h >> 11) * 0x1.0p-53);
}

}  // namespace

void SceneConfig::Validate() const {
  if (vehicle_count < 0 || pedestrian_count < 0) throw InvalidArgument("actor counts must be >= 0");
  if (weather_id < 0 || weather_id >= kWeatherCount) throw InvalidArgument("weather_id must be in [0,13]");
  if (!(town_extent > 0.0) || !std::isfinite(town_extent)) throw InvalidArgument("town_extent must be > 0");
  if (!(building_density >= 0.0 && building_density <= 1.0)) throw InvalidArgument("building_density not in [0,1]");
  if (!(vegetation_density >= 0.0 && vegetation_density <= 1.0)) {
    throw InvalidArgument("vegetation_density not in [0,1]");
  }
}

void LidarSpec::Validate() const {
  if (channels < 1) throw InvalidArgument("lidar channels must be >= 1");
  if (points_per_channel < 1) throw InvalidArgument("lidar points_per_channel must be >= 1");
  if (!(max_range > 0.0)) throw InvalidArgument("lidar max_range must be > 0");
  if (!(lower_fov_deg < upper_fov_deg)) throw InvalidArgument("lidar lower fov must be < upper fov");
  if (lower_fov_deg < -90.0 || upper_fov_deg > 90.0) throw InvalidArgument("lidar fov must lie in [-90, 90]");
  if (!(range_noise_stddev >= 0.0)) throw InvalidArgument("lidar range noise must be >= 0");
}

Solid Solid::Box(LabelId label, double x, double y, double base_z, double yaw, double length, double width,
                 double height) {
  Solid s;
  s.kind = ShapeKind::kBox;
  s.label = label;
  s.x = x;
  s.y = y;
  s.base_z = base_z;
  s.yaw = yaw;
  s.half_extents = {length / 2.0, width / 2.0, height / 2.0};
  return s;
}

Solid Solid::Cylinder(LabelId label, double x, double y, double base_z, double radius, double height) {
  Solid s;
  s.kind = ShapeKind::kCylinder;
  s.label = label;
  s.x = x;
  s.y = y;
  s.base_z = base_z;
  s.radius = radius;
  s.height = height;
  return s;
}

Solid Solid::Cluster(LabelId label, double x, double y, double base_z, std::vector<Ellipsoid> lobes) {
  Solid s;
  s.kind = ShapeKind::kEllipsoidCluster;
  s.label = label;
  s.x = x;
  s.y = y;
  s.base_z = base_z;
  s.lobes = std::move(lobes);
  return s;
}

std::size_t Scene::CountLabel(LabelId l) const {
  return static_cast<std::size_t>(std::count_if(solids.begin(), solids.end(), [&](const Solid& s) { return s.label == l; }));
}

bool SolidsOverlap(const Solid& a, const Solid& b, double margin) {
  const Footprint fa = FootprintOf(a), fb = FootprintOf(b);
  if (fa.z1 <= fb.z0 || fb.z1 <= fa.z0) return false;
  if (fa.is_circle && fb.is_circle) {
    const double r = fa.radius + fb.radius + margin;
    const double dx = fa.cx - fb.cx, dy = fa.cy - fb.cy;
    return dx * dx + dy * dy < r * r;
  }
  if (fa.is_circle) return CircleBox(fa, fb, margin);
  if (fb.is_circle) return CircleBox(fb, fa, margin);
  return BoxBox(fa, fb, margin);
}

Scene GenerateScene(const SceneConfig& config) {
  config.Validate();
  Rng rng(MixSeed(config.seed, 0x5ce7e));
  Scene scene;
  scene.seed = config.seed;
  const double half = config.town_extent / 2.0;

  // Road centerlines: always one through the origin on each axis, more
  // every block pitch while a block still fits beyond them.
  std::vector<double> centers = {0.0};
  for (int k = 1;; ++k) {
    const double c = k * kBlockPitch;
    if (c + kRoadHalfWidth + kSidewalkWidth + 8.0 > half) break;
    centers.push_back(c);
    centers.push_back(-c);
  }
  std::sort(centers.begin(), centers.end());

  for (double c : centers) {
    scene.ground.push_back({c - kRoadHalfWidth, c + kRoadHalfWidth, -half, half, kRoadElevation, label::kRoad});
    scene.ground.push_back({-half, half, c - kRoadHalfWidth, c + kRoadHalfWidth, kRoadElevation, label::kRoad});
  }
  // Dashed center lines, skipped inside intersections.
  auto in_intersection = [&](double along) {
    for (double c : centers) {
      if (std::abs(along - c) < kRoadHalfWidth + 1.0) return true;
    }
    return false;
  };
  constexpr double kDash = 3.0, kLineHalf = 0.075, kLineTop = kRoadElevation + 0.01;
  for (double c : centers) {
    for (double s = -half + 1.0; s + kDash < half; s += 2 * kDash) {
      if (in_intersection(s) || in_intersection(s + kDash)) continue;
      scene.ground.push_back({c - kLineHalf, c + kLineHalf, s, s + kDash, kLineTop, label::kRoadLine});
      scene.ground.push_back({s, s + kDash, c - kLineHalf, c + kLineHalf, kLineTop, label::kRoadLine});
    }
  }

  // Blocks between road edges.
  std::vector<std::pair<double, double>> spans;
  double prev = -half;
  for (double c : centers) {
    if (c - kRoadHalfWidth > prev) spans.emplace_back(prev, c - kRoadHalfWidth);
    prev = c + kRoadHalfWidth;
  }
  if (half > prev) spans.emplace_back(prev, half);

  const double sidewalk_top = kRoadElevation + kCurbHeight;
  std::vector<GroundPatch> sidewalks;
  std::vector<Solid> statics;
  for (const auto& [x0, x1] : spans) {
    for (const auto& [y0, y1] : spans) {
      const double w = std::min({kSidewalkWidth, (x1 - x0) / 2.0, (y1 - y0) / 2.0});
      const std::array<GroundPatch, 4> ring = {
          GroundPatch{x0, x1, y0, y0 + w, sidewalk_top, label::kSidewalk},
          GroundPatch{x0, x1, y1 - w, y1, sidewalk_top, label::kSidewalk},
          GroundPatch{x0, x0 + w, y0 + w, y1 - w, sidewalk_top, label::kSidewalk},
          GroundPatch{x1 - w, x1, y0 + w, y1 - w, sidewalk_top, label::kSidewalk}};
      for (const GroundPatch& g : ring) {
        if (g.xmax > g.xmin && g.ymax > g.ymin) sidewalks.push_back(g);
      }
      const double ix0 = x0 + w, ix1 = x1 - w, iy0 = y0 + w, iy1 = y1 - w;
      if (ix1 - ix0 <= 0.5 || iy1 - iy0 <= 0.5) continue;
      scene.ground.push_back({ix0, ix1, iy0, iy1, sidewalk_top, label::kOther});

      // Buildings along the block perimeter, fences/walls in the gaps,
      // shrubs in the interior.
      const int nx = std::max(1, static_cast<int>((ix1 - ix0) / kBuildingCell));
      const int ny = std::max(1, static_cast<int>((iy1 - iy0) / kBuildingCell));
      const double cw = (ix1 - ix0) / nx, ch = (iy1 - iy0) / ny;
      for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
          const double cx0 = ix0 + i * cw, cy0 = iy0 + j * ch;
          const bool border = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
          if (border && rng.Bernoulli(config.building_density)) {
            const double mx = rng.Uniform(0.3, 1.2), my = rng.Uniform(0.3, 1.2);
            const double height = rng.Uniform(6.0, 30.0);
            statics.push_back(Solid::Box(label::kBuilding, cx0 + cw / 2, cy0 + ch / 2, sidewalk_top, 0.0,
                                         cw - 2 * mx, ch - 2 * my, height));
          } else if (border && rng.Bernoulli(0.6)) {
            const LabelId l = rng.Bernoulli(0.5) ? label::kFence : label::kWall;
            const double h = l == label::kFence ? 1.3 : rng.Uniform(2.0, 3.5);
            const double t = l == label::kFence ? 0.1 : 0.3;
            // Along whichever outer edges this cell touches.
            if (j == 0) statics.push_back(Solid::Box(l, cx0 + cw / 2, cy0 + t, sidewalk_top, 0.0, cw - 0.2, t, h));
            if (j == ny - 1 && ny > 1) {
              statics.push_back(Solid::Box(l, cx0 + cw / 2, cy0 + ch - t, sidewalk_top, 0.0, cw - 0.2, t, h));
            }
            if (i == 0 && j != 0 && j != ny - 1) {
              statics.push_back(Solid::Box(l, cx0 + t, cy0 + ch / 2, sidewalk_top, 0.0, t, ch - 0.2, h));
            }
            if (i == nx - 1 && nx > 1 && j != 0 && j != ny - 1) {
              statics.push_back(Solid::Box(l, cx0 + cw - t, cy0 + ch / 2, sidewalk_top, 0.0, t, ch - 0.2, h));
            }
          } else if (!border && rng.Bernoulli(config.vegetation_density * 0.5)) {
            std::vector<Ellipsoid> lobes;
            const int n = static_cast<int>(rng.UniformInt(2, 4));
            for (int k = 0; k < n; ++k) {
              const double r = rng.Uniform(0.8, 1.6);
              lobes.push_back({{rng.Uniform(-1.5, 1.5), rng.Uniform(-1.5, 1.5), r * 0.7},
                               {r, r, r * 0.7}});
            }
            statics.push_back(Solid::Cluster(label::kVegetation, cx0 + cw / 2, cy0 + ch / 2, sidewalk_top, lobes));
          }
        }
      }
    }
  }

  // Street furniture on the sidewalk strips, curb side.
  for (const GroundPatch& g : sidewalks) {
    const bool along_x = (g.xmax - g.xmin) >= (g.ymax - g.ymin);
    const double lo = along_x ? g.xmin : g.ymin, hi = along_x ? g.xmax : g.ymax;
    const double across_lo = along_x ? g.ymin : g.xmin, across_hi = along_x ? g.ymax : g.xmax;
    // Curb side is the edge nearer a road centerline.
    auto dist_to_road = [&](double v) {
      double best = kInf;
      for (double c : centers) best = std::min(best, std::abs(v - c));
      return best;
    };
    const bool curb_low = dist_to_road(across_lo) <= dist_to_road(across_hi);
    auto place = [&](double along, double inset) {
      const double across = curb_low ? across_lo + inset : across_hi - inset;
      return along_x ? std::pair{along, across} : std::pair{across, along};
    };
    for (double s = lo + 4.0; s < hi - 4.0; s += 8.0) {
      if (!rng.Bernoulli(config.vegetation_density)) continue;
      const auto [tx, ty] = place(s + rng.Uniform(-1.0, 1.0), 1.3);
      statics.push_back(Solid::Cylinder(label::kVegetation, tx, ty, sidewalk_top, 0.15, 2.6));
      std::vector<Ellipsoid> lobes;
      const int n = static_cast<int>(rng.UniformInt(2, 4));
      for (int k = 0; k < n; ++k) {
        const double r = rng.Uniform(1.0, 1.8);
        lobes.push_back({{rng.Uniform(-0.6, 0.6), rng.Uniform(-0.6, 0.6), rng.Uniform(3.2, 4.5)}, {r, r, r * 0.8}});
      }
      statics.push_back(Solid::Cluster(label::kVegetation, tx, ty, sidewalk_top, lobes));
    }
    for (double s = lo + 6.0; s < hi - 2.0; s += 24.0) {
      if (!rng.Bernoulli(0.6)) continue;
      const auto [px, py] = place(s, 0.4);
      statics.push_back(Solid::Cylinder(label::kPole, px, py, sidewalk_top, 0.12, 6.0));
      if (rng.Bernoulli(0.35)) {
        statics.push_back(Solid::Box(label::kTrafficSign, px, py, sidewalk_top + 2.6, along_x ? 0.0 : M_PI / 2,
                                     0.8, 0.06, 0.8));
      }
    }
  }
  scene.ground.insert(scene.ground.end(), sidewalks.begin(), sidewalks.end());

  // Ego start: right-hand lane of a random road, clear of intersections.
  const double range = std::max(0.0, std::min(half - kRoadHalfWidth, half * 0.5));
  double ego_along = 0.0;
  for (int attempt = 0; attempt < 100; ++attempt) {
    ego_along = rng.Uniform(-range, range);
    if (!in_intersection(ego_along) || centers.size() == 1) break;
  }
  const double ego_road = centers[rng.Index(centers.size())];
  const bool ego_on_x_road = rng.Bernoulli(0.5);
  const bool ego_forward = rng.Bernoulli(0.5);
  {
    const double offset = ego_forward ? -kLaneOffset : kLaneOffset;
    double ex, ey, yaw;
    if (ego_on_x_road) {  // road runs along y at x = ego_road
      ex = ego_road - offset;
      ey = ego_along;
      yaw = ego_forward ? M_PI / 2 : -M_PI / 2;
    } else {  // road runs along x at y = ego_road
      ex = ego_along;
      ey = ego_road + offset;
      yaw = ego_forward ? 0.0 : M_PI;
    }
    scene.ego_start = Pose::FromYawPitchRoll(yaw, 0, 0, {ex, ey, kRoadElevation});
  }
  const Eigen::Vector3d ego_xy = scene.ego_start.translation();

  std::vector<Solid> cars;
  for (int n = 0; n < config.vehicle_count; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
      const double c = centers[rng.Index(centers.size())];
      const bool along_y = rng.Bernoulli(0.5);
      const bool forward = rng.Bernoulli(0.5);
      const double along = rng.Uniform(-half + 3.0, half - 3.0);
      const double offset = forward ? -kLaneOffset : kLaneOffset;
      Solid car = along_y ? Solid::Box(label::kCar, c - offset, along, kRoadElevation,
                                       forward ? M_PI / 2 : -M_PI / 2, kCarLength, kCarWidth, kCarHeight)
                          : Solid::Box(label::kCar, along, c + offset, kRoadElevation, forward ? 0.0 : M_PI,
                                       kCarLength, kCarWidth, kCarHeight);
      if (std::hypot(car.x - ego_xy.x(), car.y - ego_xy.y()) < kEgoClearance) continue;
      bool clash = false;
      for (const Solid& other : cars) {
        if (SolidsOverlap(car, other, 0.8)) {
          clash = true;
          break;
        }
      }
      if (clash) continue;
      cars.push_back(car);
      placed = true;
    }
    if (!placed) throw InvalidArgument("town_extent too small to place " + std::to_string(config.vehicle_count) + " vehicles");
  }

  std::vector<Solid> pedestrians;
  double sidewalk_area = 0.0;
  for (const GroundPatch& g : sidewalks) sidewalk_area += (g.xmax - g.xmin) * (g.ymax - g.ymin);
  for (int n = 0; n < config.pedestrian_count; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < 2000 && !placed && sidewalk_area > 0; ++attempt) {
      double pick = rng.Uniform(0.0, sidewalk_area);
      const GroundPatch* patch = &sidewalks.back();
      for (const GroundPatch& g : sidewalks) {
        pick -= (g.xmax - g.xmin) * (g.ymax - g.ymin);
        if (pick <= 0) {
          patch = &g;
          break;
        }
      }
      const double m = kPedestrianRadius + 0.05;
      if (patch->xmax - patch->xmin < 2 * m || patch->ymax - patch->ymin < 2 * m) continue;
      Solid p = Solid::Cylinder(label::kPedestrian, rng.Uniform(patch->xmin + m, patch->xmax - m),
                                rng.Uniform(patch->ymin + m, patch->ymax - m), sidewalk_top, kPedestrianRadius,
                                kPedestrianHeight);
      bool clash = std::hypot(p.x - ego_xy.x(), p.y - ego_xy.y()) < 2.0;
      for (const std::vector<Solid>* group : {&statics, &pedestrians}) {
        for (const Solid& other : *group) {
          if (clash) break;
          clash = SolidsOverlap(p, other, 0.1);
        }
      }
      if (clash) continue;
      pedestrians.push_back(p);
      placed = true;
    }
    if (!placed) {
      throw InvalidArgument("town_extent too small to place " + std::to_string(config.pedestrian_count) +
                            " pedestrians");
    }
  }

  scene.solids = std::move(statics);
  scene.solids.insert(scene.solids.end(), cars.begin(), cars.end());
  scene.solids.insert(scene.solids.end(), pedestrians.begin(), pedestrians.end());
  for (std::size_t i = 0; i < scene.solids.size(); ++i) scene.solids[i].appearance = static_cast<std::uint32_t>(i);
  return scene;
}

RayCaster::RayCaster(const Scene& scene) : scene_(scene) {
  solid_bounds_.reserve(scene.solids.size());
  for (const Solid& s : scene.solids) {
    Bounds b;
    SolidBounds(s, b.lo, b.hi);
    solid_bounds_.push_back(b);
  }
}

std::optional<RayHit> RayCaster::Cast(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                                      double t_max) const {
  std::optional<RayHit> best;
  double best_t = t_max;
  for (std::size_t i = 0; i < scene_.ground.size(); ++i) {
    const GroundPatch& g = scene_.ground[i];
    const double t = SlabEntry(origin, direction, {g.xmin, g.ymin, g.top - kGroundThickness},
                               {g.xmax, g.ymax, g.top}, best_t);
    if (t < best_t || (!best && std::isfinite(t))) {
      best_t = t;
      best = RayHit{t, g.label, i, true};
    }
  }
  for (std::size_t i = 0; i < scene_.solids.size(); ++i) {
    const Bounds& b = solid_bounds_[i];
    if (!SlabTouches(origin, direction, b.lo, b.hi, best_t)) continue;
    const double t = IntersectSolid(scene_.solids[i], origin, direction, best_t);
    if (t < best_t || (!best && std::isfinite(t))) {
      best_t = t;
      best = RayHit{t, scene_.solids[i].label, i, false};
    }
  }
  return best;
}

PointCloud SimulateLidar(const Scene& scene, const Pose& sensor_pose, const LidarSpec& spec) {
  spec.Validate();
  const RayCaster caster(scene);
  Rng noise(MixSeed(spec.noise_seed, 0x11da5));
  std::vector<Point3> points;
  std::vector<LabelId> labels;
  const Eigen::Vector3d origin = sensor_pose.translation();
  for (int ch = 0; ch < spec.channels; ++ch) {
    const double el_deg = spec.channels == 1
                              ? spec.lower_fov_deg
                              : spec.lower_fov_deg + ch * (spec.upper_fov_deg - spec.lower_fov_deg) / (spec.channels - 1);
    const double el = el_deg * M_PI / 180.0;
    for (int j = 0; j < spec.points_per_channel; ++j) {
      const double az = 2.0 * M_PI * j / spec.points_per_channel;
      const Eigen::Vector3d dir_sensor(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      const Eigen::Vector3d dir_world = sensor_pose.rotation() * dir_sensor;
      const auto hit = caster.Cast(origin, dir_world, spec.max_range);
      if (!hit) continue;
      double range = hit->t;
      if (spec.range_noise_stddev > 0.0) {
        range = std::clamp(range + noise.Normal(0.0, spec.range_noise_stddev), 0.0, spec.max_range);
      }
      points.push_back(Point3::FromVec(dir_sensor * range));
      labels.push_back(hit->label);
    }
  }
  return PointCloud(std::move(points), std::nullopt, std::move(labels), builtin_taxonomies().carla12.name());
}

const WeatherPreset& Weather(int weather_id) {
  // Seven noon and seven dusk presets, from clear to heavy rain.
  static const std::array<WeatherPreset, kWeatherCount> kPresets = {{
      {{1.00, 1.00, 1.00}, {135, 190, 235}},
      {{0.92, 0.93, 0.96}, {170, 180, 195}},
      {{0.85, 0.87, 0.92}, {150, 160, 175}},
      {{0.80, 0.82, 0.88}, {140, 145, 155}},
      {{0.74, 0.76, 0.82}, {120, 125, 135}},
      {{0.66, 0.68, 0.75}, {100, 105, 115}},
      {{0.88, 0.89, 0.93}, {160, 168, 180}},
      {{1.10, 0.92, 0.78}, {250, 170, 110}},
      {{1.02, 0.88, 0.80}, {205, 160, 140}},
      {{0.96, 0.84, 0.76}, {190, 140, 120}},
      {{0.90, 0.80, 0.75}, {165, 130, 120}},
      {{0.84, 0.76, 0.72}, {140, 115, 110}},
      {{0.76, 0.70, 0.68}, {115, 100, 100}},
      {{0.94, 0.84, 0.78}, {185, 150, 130}},
  }};
  if (weather_id < 0 || weather_id >= kWeatherCount) throw InvalidArgument("weather_id must be in [0,13]");
  return kPresets[static_cast<std::size_t>(weather_id)];
}

CameraFrame RenderCamera(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& intr, int weather_id) {
  CameraIntrinsics::Checked(intr.width, intr.height, intr.fx, intr.fy, intr.cx, intr.cy);
  const WeatherPreset& weather = Weather(weather_id);
  const Taxonomy& palette = builtin_taxonomies().carla12;
  const RayCaster caster(scene);
  CameraFrame frame{DepthImage(intr.width, intr.height, 0.0), SemanticImage(intr.width, intr.height, kUnlabelled),
                    ColorImage(intr.width, intr.height, weather.sky)};
  const Eigen::Vector3d origin = camera_pose.translation();
  const Eigen::Matrix3d& r = camera_pose.rotation();
  for (int v = 0; v < intr.height; ++v) {
    for (int u = 0; u < intr.width; ++u) {
      // Camera-frame direction with unit z, so the hit parameter is the depth.
      const Eigen::Vector3d dir_cam((u + 0.5 - intr.cx) / intr.fx, (v + 0.5 - intr.cy) / intr.fy, 1.0);
      const auto hit = caster.Cast(origin, r * dir_cam, kCameraFarClip);
      if (!hit || hit->t >= kCameraFarClip) continue;
      frame.depth.at(u, v) = hit->t;
      frame.semantic.at(u, v) = hit->label;
      const std::uint64_t key =
          hit->is_ground ? (std::uint64_t{1} << 32) + hit->entity : scene.solids[hit->entity].appearance;
      frame.color.at(u, v) = Shade(palette.ColorOf(hit->label), weather.tint, Jitter(scene.seed, key));
    }
  }
  return frame;
}

DepthImage RenderDepth(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& intr, int weather_id) {
  return RenderCamera(scene, camera_pose, intr, weather_id).depth;
}

SemanticImage RenderSemantic(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& intr,
                             int weather_id) {
  return RenderCamera(scene, camera_pose, intr, weather_id).semantic;
}

ColorImage RenderColor(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& intr, int weather_id) {
  return RenderCamera(scene, camera_pose, intr, weather_id).color;
}

}  // namespace synseg::world
