#include <string>

#include "json.hpp"

#include "deltagan/condmap.hpp"
#include "deltagan/error.hpp"

namespace deltagan {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void invalid(const std::string& what) {
  throw Error(ErrorKind::InvalidAnnotation, what);
}

Point parse_point(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    invalid("point must be [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

TriangleAnnotation parse_triangle(const json& j) {
  if (!j.is_object() || !j.contains("vertices") || !j.contains("base")) {
    invalid("triangle needs \"vertices\" and \"base\"");
  }
  const auto& verts = j.at("vertices");
  if (!verts.is_array() || verts.size() != 3) invalid("triangle needs exactly 3 vertices");
  TriangleAnnotation t;
  for (std::size_t i = 0; i < 3; ++i) t.vertices[i] = parse_point(verts[i]);
  if (!j.at("base").is_number_integer()) invalid("triangle base must be an integer");
  t.base_edge = j.at("base").get<int>();
  if (t.base_edge < 0 || t.base_edge > 2) invalid("triangle base must be 0, 1 or 2");
  return t;
}

BoundaryAnnotation parse_boundary(const json& j) {
  if (!j.is_array()) invalid("boundary must be an array of points");
  BoundaryAnnotation b;
  for (const auto& p : j) b.polyline.push_back(parse_point(p));
  return b;
}

// Keypoints are either an object keyed by decimal index ({"0": [x,y],
// "4": null}) or a positional array with nulls for absent points.
SkeletonAnnotation parse_skeleton(const json& j) {
  if (!j.is_object()) invalid("skeleton must be an object");
  SkeletonAnnotation s;
  const auto& kps = j.value("keypoints", json::object());
  if (kps.is_array()) {
    for (const auto& p : kps) {
      if (p.is_null()) {
        s.keypoints.emplace_back();
      } else {
        s.keypoints.emplace_back(parse_point(p));
      }
    }
  } else if (kps.is_object()) {
    for (const auto& [key, value] : kps.items()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(key, &used);
        if (used != key.size()) invalid("keypoint key '" + key + "' is not an index");
      } catch (const std::logic_error&) {
        invalid("keypoint key '" + key + "' is not an index");
      }
      if (idx >= 4096) invalid("keypoint index too large");
      if (s.keypoints.size() <= idx) s.keypoints.resize(idx + 1);
      if (!value.is_null()) s.keypoints[idx] = parse_point(value);
    }
  } else {
    invalid("skeleton keypoints must be an object or array");
  }
  const auto& edges = j.value("edges", json::array());
  if (!edges.is_array()) invalid("skeleton edges must be an array");
  for (const auto& e : edges) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
        !e[1].is_number_integer()) {
      invalid("skeleton edge must be [i, j]");
    }
    s.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  return s;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    invalid(std::string("malformed JSON: ") + e.what());
  }
}

ordered_json point_json(const Point& p) { return ordered_json::array({p.x, p.y}); }

}  // namespace

Annotation AnnotationRecord::select(MapType type) const {
  switch (type) {
    case MapType::Triangle:
      if (triangle) return *triangle;
      break;
    case MapType::Boundary:
      if (boundary) return *boundary;
      break;
    case MapType::Skeleton:
      if (skeleton) return *skeleton;
      break;
  }
  invalid("annotation for '" + image + "' has no " + to_string(type) + " entry");
}

AnnotationRecord parse_annotation_record(const std::string& json_text) {
  const auto j = parse_json(json_text);
  if (!j.is_object()) invalid("annotation must be a JSON object");
  AnnotationRecord r;
  try {
    r.image = j.at("image").get<std::string>();
    r.category = j.at("category").get<int>();
    r.subject = j.value("subject", std::string{});
    r.scene = j.value("scene", std::string{});
  } catch (const json::exception& e) {
    invalid(std::string("annotation header: ") + e.what());
  }
  if (j.contains("triangle")) r.triangle = parse_triangle(j.at("triangle"));
  if (j.contains("boundary")) r.boundary = parse_boundary(j.at("boundary"));
  if (j.contains("skeleton")) r.skeleton = parse_skeleton(j.at("skeleton"));
  if (!r.triangle && !r.boundary && !r.skeleton) {
    invalid("annotation has no triangle, boundary or skeleton");
  }
  return r;
}

std::string serialize_annotation_record(const AnnotationRecord& r) {
  ordered_json j;
  j["image"] = r.image;
  j["category"] = r.category;
  j["subject"] = r.subject;
  if (!r.scene.empty()) j["scene"] = r.scene;
  if (r.triangle) {
    ordered_json verts = ordered_json::array();
    for (const auto& v : r.triangle->vertices) verts.push_back(point_json(v));
    j["triangle"] = {{"vertices", verts}, {"base", r.triangle->base_edge}};
  }
  if (r.boundary) {
    ordered_json pts = ordered_json::array();
    for (const auto& p : r.boundary->polyline) pts.push_back(point_json(p));
    j["boundary"] = pts;
  }
  if (r.skeleton) {
    ordered_json kps = ordered_json::object();
    for (std::size_t i = 0; i < r.skeleton->keypoints.size(); ++i) {
      const auto& kp = r.skeleton->keypoints[i];
      kps[std::to_string(i)] = kp ? point_json(*kp) : ordered_json(nullptr);
    }
    ordered_json edges = ordered_json::array();
    for (const auto& [a, b] : r.skeleton->edges) edges.push_back({a, b});
    j["skeleton"] = {{"keypoints", kps}, {"edges", edges}};
  }
  return j.dump();
}

Annotation parse_annotation_fragment(const std::string& json_text) {
  const auto j = parse_json(json_text);
  if (!j.is_object()) invalid("annotation must be a JSON object");
  int present = 0;
  std::optional<Annotation> out;
  if (j.contains("triangle")) {
    out = parse_triangle(j.at("triangle"));
    ++present;
  }
  if (j.contains("boundary")) {
    out = parse_boundary(j.at("boundary"));
    ++present;
  }
  if (j.contains("skeleton")) {
    out = parse_skeleton(j.at("skeleton"));
    ++present;
  }
  if (present != 1) invalid("annotation fragment must hold exactly one map entry");
  return *out;
}

}  // namespace deltagan
