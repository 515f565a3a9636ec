#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <torch/torch.h>

namespace deltagan {

/// Pixel-space point. x grows right, y grows down, the centre of pixel
/// (row i, column j) sits at (j, i).
struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct TriangleAnnotation {
  std::array<Point, 3> vertices{};
  int base_edge = 0;  // edge (v[i], v[(i+1)%3]) marking the palm base
};

struct BoundaryAnnotation {
  std::vector<Point> polyline;  // closed implicitly
};

struct SkeletonAnnotation {
  std::vector<std::optional<Point>> keypoints;  // absent keypoints stay empty
  std::vector<std::pair<int, int>> edges;
};

using Annotation = std::variant<TriangleAnnotation, BoundaryAnnotation, SkeletonAnnotation>;

enum class MapType { Triangle, Boundary, Skeleton };

std::string to_string(MapType type);
MapType parse_map_type(const std::string& name);

/// Single-channel conditional map with values in [0, 1], row-major.
class ConditionalMap {
 public:
  ConditionalMap(int height, int width);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }

  float at(int row, int col) const { return values_[index(row, col)]; }
  float& at(int row, int col) { return values_[index(row, col)]; }

  const std::vector<float>& values() const noexcept { return values_; }

  /// Mirror across the vertical axis (column j -> W-1-j).
  ConditionalMap flipped_x() const;

  /// [1, H, W] float tensor.
  torch::Tensor to_tensor() const;
  static ConditionalMap from_tensor(const torch::Tensor& t);

  friend bool operator==(const ConditionalMap&, const ConditionalMap&) = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_;
  int width_;
  std::vector<float> values_;
};

struct CategoryLabel {
  int index = 0;
  int count = 0;  // n_c
};

inline constexpr float kTriangleFill = 1.0f;
inline constexpr float kTriangleBase = 0.5f;
inline constexpr double kMinTriangleArea = 1e-6;

/// Width in pixels of the base-edge stripe: ceil(0.01 * max(H, W)).
int base_stripe_width(int height, int width);

/// Twice the signed area of the triangle (positive when counter-clockwise
/// in the y-down frame is clockwise on screen; sign is only used for
/// degeneracy checks).
double signed_area2(const TriangleAnnotation& tri);

ConditionalMap rasterize_triangle(const TriangleAnnotation& a, int height, int width);
ConditionalMap rasterize_boundary(const BoundaryAnnotation& a, int height, int width,
                                  double stroke = 1.0);
ConditionalMap rasterize_skeleton(const SkeletonAnnotation& a, int height, int width,
                                  double stroke = 1.0);

/// Dispatches on the annotation alternative.
ConditionalMap rasterize(const Annotation& a, int height, int width, double stroke = 1.0);

/// Mirrors annotation coordinates (x -> W-1-x).
Annotation flip_x(const Annotation& a, int width);

/// Maps pixel-centre coordinates from a (src_h, src_w) frame into a
/// (dst_h, dst_w) frame.
Annotation rescale(const Annotation& a, int src_height, int src_width, int dst_height,
                   int dst_width);

std::vector<float> encode_category(const CategoryLabel& c);

/// Builds the generator/discriminator condition for a batch:
/// channels are [map, one-hot(n_c)..., rolled RGB (optional)].
/// maps: [B,1,H,W]; categories: [B] int64; rolled: [B,3,H,W].
torch::Tensor assemble_condition(const torch::Tensor& maps, const torch::Tensor& categories,
                                 int category_count,
                                 const std::optional<torch::Tensor>& rolled = std::nullopt);

/// Single-sample form; returns [C,H,W].
torch::Tensor assemble_condition(const ConditionalMap& map, const CategoryLabel& c,
                                 const std::optional<torch::Tensor>& rolled = std::nullopt);

// Annotation JSON (one file per image).
struct AnnotationRecord {
  std::string image;
  int category = 0;
  std::string subject;
  std::string scene;
  std::optional<TriangleAnnotation> triangle;
  std::optional<BoundaryAnnotation> boundary;
  std::optional<SkeletonAnnotation> skeleton;

  /// The annotation of the requested kind; InvalidAnnotation when absent.
  Annotation select(MapType type) const;
};

AnnotationRecord parse_annotation_record(const std::string& json_text);
std::string serialize_annotation_record(const AnnotationRecord& record);

/// Parses a bare annotation fragment: an object holding exactly one of
/// "triangle", "boundary" or "skeleton" (extra fields are ignored).
Annotation parse_annotation_fragment(const std::string& json_text);

// 8-bit map PNG codec: 0 <-> 0.0, 128 <-> 0.5, 255 <-> 1.0.
std::vector<unsigned char> encode_map_png(const ConditionalMap& map);
ConditionalMap decode_map_png(const std::vector<unsigned char>& bytes);

}  // namespace deltagan
