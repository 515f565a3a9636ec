#include "deltagan/condmap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "deltagan/error.hpp"

namespace deltagan {

namespace {

struct Segment {
  Point a;
  Point b;
};

void check_frame(int height, int width) {
  if (height <= 0 || width <= 0) {
    throw Error(ErrorKind::InvalidShape, "map dimensions must be positive");
  }
}

bool finite(const Point& p) { return std::isfinite(p.x) && std::isfinite(p.y); }

// Squared distance from p to segment [a, b]. Works on coordinates relative
// to `a` so mirroring the inputs mirrors every intermediate exactly.
// Division-free form: exact for coordinates on a coarse binary grid, so ties
// on the stripe boundary resolve consistently.
bool within_segment(const Point& p, const Segment& s, double radius2) {
  const double dx = s.b.x - s.a.x;
  const double dy = s.b.y - s.a.y;
  const double px = p.x - s.a.x;
  const double py = p.y - s.a.y;
  const double dot = px * dx + py * dy;
  const double len2 = dx * dx + dy * dy;
  if (dot <= 0.0 || len2 == 0.0) return px * px + py * py <= radius2;
  if (dot >= len2) {
    const double bx = p.x - s.b.x;
    const double by = p.y - s.b.y;
    return bx * bx + by * by <= radius2;
  }
  const double cross = px * dy - py * dx;
  return cross * cross <= radius2 * len2;
}

double distance2_to_segment(const Point& p, const Segment& s) {
  const double dx = s.b.x - s.a.x;
  const double dy = s.b.y - s.a.y;
  const double px = p.x - s.a.x;
  const double py = p.y - s.a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp((px * dx + py * dy) / len2, 0.0, 1.0);
  }
  const double qx = px - t * dx;
  const double qy = py - t * dy;
  return qx * qx + qy * qy;
}

double edge_function(const Point& a, const Point& b, const Point& p) {
  return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

struct PixelRange {
  int row0, row1, col0, col1;  // inclusive; empty when row0 > row1 or col0 > col1
};

PixelRange clip_box(double min_x, double max_x, double min_y, double max_y, int height,
                    int width) {
  auto lo = [](double v, int limit) {
    return static_cast<int>(std::clamp(std::floor(v) - 1.0, 0.0, static_cast<double>(limit)));
  };
  auto hi = [](double v, int limit) {
    return static_cast<int>(std::clamp(std::ceil(v) + 1.0, -1.0, static_cast<double>(limit - 1)));
  };
  return {lo(min_y, height), hi(max_y, height), lo(min_x, width), hi(max_x, width)};
}

void stroke_segments(ConditionalMap& map, const std::vector<Segment>& segments, double stroke) {
  const double radius = stroke / 2.0;
  const double radius2 = radius * radius;
  for (const auto& s : segments) {
    const auto box = clip_box(std::min(s.a.x, s.b.x) - radius, std::max(s.a.x, s.b.x) + radius,
                              std::min(s.a.y, s.b.y) - radius, std::max(s.a.y, s.b.y) + radius,
                              map.height(), map.width());
    for (int row = box.row0; row <= box.row1; ++row) {
      for (int col = box.col0; col <= box.col1; ++col) {
        const Point p{static_cast<double>(col), static_cast<double>(row)};
        if (distance2_to_segment(p, s) <= radius2) {
          map.at(row, col) = 1.0f;
        }
      }
    }
  }
}

void check_stroke(double stroke) {
  if (!(stroke >= 1.0)) {
    throw Error(ErrorKind::InvalidAnnotation, "stroke must be >= 1 pixel");
  }
}

Point flip_point(const Point& p, int width) { return {static_cast<double>(width - 1) - p.x, p.y}; }

Point rescale_point(const Point& p, double sx, double sy) {
  return {(p.x + 0.5) * sx - 0.5, (p.y + 0.5) * sy - 0.5};
}

template <typename F>
Annotation map_points(const Annotation& a, F&& f) {
  return std::visit(
      [&](const auto& ann) -> Annotation {
        using T = std::decay_t<decltype(ann)>;
        T out = ann;
        if constexpr (std::is_same_v<T, TriangleAnnotation>) {
          for (auto& v : out.vertices) v = f(v);
        } else if constexpr (std::is_same_v<T, BoundaryAnnotation>) {
          for (auto& v : out.polyline) v = f(v);
        } else {
          for (auto& v : out.keypoints) {
            if (v) *v = f(*v);
          }
        }
        return out;
      },
      a);
}

}  // namespace

std::string to_string(MapType type) {
  switch (type) {
    case MapType::Triangle: return "triangle";
    case MapType::Boundary: return "boundary";
    case MapType::Skeleton: return "skeleton";
  }
  return "triangle";
}

MapType parse_map_type(const std::string& name) {
  if (name == "triangle") return MapType::Triangle;
  if (name == "boundary") return MapType::Boundary;
  if (name == "skeleton") return MapType::Skeleton;
  throw Error(ErrorKind::InvalidAnnotation, "unknown map type '" + name + "'");
}

ConditionalMap::ConditionalMap(int height, int width) : height_(height), width_(width) {
  check_frame(height, width);
  values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0.0f);
}

ConditionalMap ConditionalMap::flipped_x() const {
  ConditionalMap out(height_, width_);
  for (int row = 0; row < height_; ++row) {
    for (int col = 0; col < width_; ++col) {
      out.at(row, width_ - 1 - col) = at(row, col);
    }
  }
  return out;
}

torch::Tensor ConditionalMap::to_tensor() const {
  return torch::from_blob(const_cast<float*>(values_.data()), {1, height_, width_},
                          torch::kFloat32)
      .clone();
}

ConditionalMap ConditionalMap::from_tensor(const torch::Tensor& t) {
  auto m = t.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  if (m.dim() == 3 && m.size(0) == 1) m = m.squeeze(0);
  if (m.dim() != 2) {
    throw Error(ErrorKind::ShapeMismatch, "conditional map tensor must be [1,H,W] or [H,W]");
  }
  ConditionalMap out(static_cast<int>(m.size(0)), static_cast<int>(m.size(1)));
  std::copy_n(m.data_ptr<float>(), out.values_.size(), out.values_.begin());
  for (auto& v : out.values_) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

int base_stripe_width(int height, int width) {
  return static_cast<int>(std::ceil(0.01 * static_cast<double>(std::max(height, width))));
}

double signed_area2(const TriangleAnnotation& tri) {
  const auto& v = tri.vertices;
  return edge_function(v[0], v[1], v[2]);
}

ConditionalMap rasterize_triangle(const TriangleAnnotation& a, int height, int width) {
  check_frame(height, width);
  for (const auto& v : a.vertices) {
    if (!finite(v)) throw Error(ErrorKind::InvalidAnnotation, "non-finite triangle vertex");
  }
  if (a.base_edge < 0 || a.base_edge > 2) {
    throw Error(ErrorKind::InvalidAnnotation, "base edge index must be 0, 1 or 2");
  }
  if (std::abs(signed_area2(a)) <= 2.0 * kMinTriangleArea) {
    throw Error(ErrorKind::DegenerateAnnotation, "triangle vertices are collinear");
  }

  ConditionalMap map(height, width);
  const auto& v = a.vertices;
  const Segment base{v[static_cast<std::size_t>(a.base_edge)],
                     v[static_cast<std::size_t>((a.base_edge + 1) % 3)]};
  const double stripe = base_stripe_width(height, width);
  const double stripe2 = stripe * stripe;

  const auto [min_x, max_x] = std::minmax({v[0].x, v[1].x, v[2].x});
  const auto [min_y, max_y] = std::minmax({v[0].y, v[1].y, v[2].y});
  const auto box = clip_box(min_x, max_x, min_y, max_y, height, width);

  for (int row = box.row0; row <= box.row1; ++row) {
    for (int col = box.col0; col <= box.col1; ++col) {
      const Point p{static_cast<double>(col), static_cast<double>(row)};
      const double e0 = edge_function(v[0], v[1], p);
      const double e1 = edge_function(v[1], v[2], p);
      const double e2 = edge_function(v[2], v[0], p);
      const bool inside = (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
      if (!inside) continue;
      map.at(row, col) = within_segment(p, base, stripe2) ? kTriangleBase : kTriangleFill;
    }
  }
  return map;
}

ConditionalMap rasterize_boundary(const BoundaryAnnotation& a, int height, int width,
                                  double stroke) {
  check_frame(height, width);
  check_stroke(stroke);
  const auto& pts = a.polyline;
  if (pts.size() < 3) {
    throw Error(ErrorKind::InvalidAnnotation, "boundary needs at least 3 points");
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (!finite(pts[i])) throw Error(ErrorKind::InvalidAnnotation, "non-finite boundary point");
    if (i > 0 && pts[i] == pts[i - 1]) {
      throw Error(ErrorKind::InvalidAnnotation, "consecutive duplicate boundary points");
    }
  }
  std::vector<Segment> segments;
  segments.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    segments.push_back({pts[i], pts[(i + 1) % pts.size()]});
  }
  ConditionalMap map(height, width);
  stroke_segments(map, segments, stroke);
  return map;
}

ConditionalMap rasterize_skeleton(const SkeletonAnnotation& a, int height, int width,
                                  double stroke) {
  check_frame(height, width);
  check_stroke(stroke);
  std::vector<Segment> segments;
  segments.reserve(a.edges.size());
  const auto count = static_cast<int>(a.keypoints.size());
  for (const auto& [i, j] : a.edges) {
    if (i < 0 || j < 0 || i >= count || j >= count || !a.keypoints[static_cast<std::size_t>(i)] ||
        !a.keypoints[static_cast<std::size_t>(j)]) {
      throw Error(ErrorKind::InvalidAnnotation,
                  "skeleton edge references a missing keypoint (" + std::to_string(i) + ", " +
                      std::to_string(j) + ")");
    }
    const Point& p = *a.keypoints[static_cast<std::size_t>(i)];
    const Point& q = *a.keypoints[static_cast<std::size_t>(j)];
    if (!finite(p) || !finite(q)) {
      throw Error(ErrorKind::InvalidAnnotation, "non-finite skeleton keypoint");
    }
    segments.push_back({p, q});
  }
  ConditionalMap map(height, width);
  stroke_segments(map, segments, stroke);
  return map;
}

ConditionalMap rasterize(const Annotation& a, int height, int width, double stroke) {
  return std::visit(
      [&](const auto& ann) {
        using T = std::decay_t<decltype(ann)>;
        if constexpr (std::is_same_v<T, TriangleAnnotation>) {
          return rasterize_triangle(ann, height, width);
        } else if constexpr (std::is_same_v<T, BoundaryAnnotation>) {
          return rasterize_boundary(ann, height, width, stroke);
        } else {
          return rasterize_skeleton(ann, height, width, stroke);
        }
      },
      a);
}

Annotation flip_x(const Annotation& a, int width) {
  return map_points(a, [width](const Point& p) { return flip_point(p, width); });
}

Annotation rescale(const Annotation& a, int src_height, int src_width, int dst_height,
                   int dst_width) {
  check_frame(src_height, src_width);
  check_frame(dst_height, dst_width);
  const double sx = static_cast<double>(dst_width) / src_width;
  const double sy = static_cast<double>(dst_height) / src_height;
  return map_points(a, [sx, sy](const Point& p) { return rescale_point(p, sx, sy); });
}

std::vector<float> encode_category(const CategoryLabel& c) {
  if (c.count <= 0 || c.index < 0 || c.index >= c.count) {
    throw Error(ErrorKind::InvalidCategory, "category " + std::to_string(c.index) +
                                                " outside [0, " + std::to_string(c.count) + ")");
  }
  std::vector<float> out(static_cast<std::size_t>(c.count), 0.0f);
  out[static_cast<std::size_t>(c.index)] = 1.0f;
  return out;
}

torch::Tensor assemble_condition(const torch::Tensor& maps, const torch::Tensor& categories,
                                 int category_count, const std::optional<torch::Tensor>& rolled) {
  if (maps.dim() != 4 || maps.size(1) != 1) {
    throw Error(ErrorKind::ShapeMismatch, "maps must be [B,1,H,W]");
  }
  const auto batch = maps.size(0);
  const auto height = maps.size(2);
  const auto width = maps.size(3);
  if (categories.dim() != 1 || categories.size(0) != batch) {
    throw Error(ErrorKind::ShapeMismatch, "categories must be [B]");
  }
  if (category_count <= 0) {
    throw Error(ErrorKind::InvalidCategory, "category count must be positive");
  }
  auto labels = categories.to(torch::kInt64);
  if (batch > 0 && (labels.min().item<int64_t>() < 0 ||
                    labels.max().item<int64_t>() >= category_count)) {
    throw Error(ErrorKind::InvalidCategory,
                "category outside [0, " + std::to_string(category_count) + ")");
  }
  auto one_hot = torch::one_hot(labels, category_count)
                     .to(maps.scalar_type())
                     .view({batch, category_count, 1, 1})
                     .expand({batch, category_count, height, width});
  std::vector<torch::Tensor> parts{maps, one_hot};
  if (rolled) {
    const auto& r = *rolled;
    if (r.dim() != 4 || r.size(0) != batch || r.size(1) != 3 || r.size(2) != height ||
        r.size(3) != width) {
      throw Error(ErrorKind::ShapeMismatch, "rolled image must be [B,3,H,W] matching the map");
    }
    parts.push_back(r.to(maps.scalar_type()));
  }
  return torch::cat(parts, 1);
}

torch::Tensor assemble_condition(const ConditionalMap& map, const CategoryLabel& c,
                                 const std::optional<torch::Tensor>& rolled) {
  encode_category(c);
  std::optional<torch::Tensor> batched_rolled;
  if (rolled) {
    auto r = *rolled;
    if (r.dim() == 3) r = r.unsqueeze(0);
    batched_rolled = r;
  }
  auto labels = torch::tensor({static_cast<int64_t>(c.index)}, torch::kInt64);
  return assemble_condition(map.to_tensor().unsqueeze(0), labels, c.count, batched_rolled)
      .squeeze(0);
}

}  // namespace deltagan
