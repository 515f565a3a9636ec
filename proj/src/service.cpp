#include "deltagan/service.hpp"

#include <chrono>
#include <mutex>

#include "httplib.h"
#include "json.hpp"

#include "deltagan/condmap.hpp"
#include "deltagan/datapipe.hpp"
#include "deltagan/error.hpp"
#include "deltagan/image_io.hpp"

namespace deltagan {

namespace {

constexpr const char* kMixedBoundary = "deltagan-result-boundary";

bool parse_flag(const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off" || value.empty()) {
    return false;
  }
  throw Error(ErrorKind::InvalidShape, "expected a boolean, got '" + value + "'");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
}

std::string mixed_body(const TranslateResult& r) {
  std::string body;
  auto part = [&](const char* name, const std::vector<unsigned char>& png) {
    body += std::string("--") + kMixedBoundary + "\r\n";
    body += "Content-Type: image/png\r\n";
    body += std::string("Content-Disposition: inline; name=\"") + name + "\"\r\n\r\n";
    body.append(png.begin(), png.end());
    body += "\r\n";
  };
  part("image", r.image_png);
  part("mask", *r.mask_png);
  body += std::string("--") + kMixedBoundary + "--\r\n";
  return body;
}

}  // namespace

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidAnnotation:
    case ErrorKind::DegenerateAnnotation:
    case ErrorKind::InvalidCategory:
    case ErrorKind::InvalidShape:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::Io:
      return 400;
    default:
      return 500;
  }
}

TranslationService::TranslationService(ServiceConfig config) : config_(config) {}

void TranslationService::load(const Archive& archive, std::string checkpoint_id) {
  auto generator = load_generator(archive);
  auto names = category_names(archive);
  std::unique_lock lock(mutex_);
  generator_ = std::move(generator);
  category_names_ = std::move(names);
  checkpoint_id_ = std::move(checkpoint_id);
}

void TranslationService::load_file(const std::filesystem::path& checkpoint) {
  const auto bytes = read_file(checkpoint);
  load(decode_archive(bytes), content_id(bytes));
}

bool TranslationService::ready() const {
  std::shared_lock lock(mutex_);
  return generator_.has_value();
}

TranslateResult TranslationService::translate(const TranslateRequest& request) const {
  std::shared_lock lock(mutex_);
  if (!generator_) throw Error(ErrorKind::InvalidCheckpoint, "no model loaded");
  const auto started = std::chrono::steady_clock::now();
  Generator generator = *generator_;
  const auto& gc = generator->config();
  if (request.category < 0 || request.category >= gc.category_count) {
    throw Error(ErrorKind::InvalidCategory, "category " + std::to_string(request.category) +
                                                " outside [0, " +
                                                std::to_string(gc.category_count) + ")");
  }
  const auto annotation = parse_annotation_fragment(request.annotation);
  const auto source = decode_image(request.image);
  const int src_h = static_cast<int>(source.size(1));
  const int src_w = static_cast<int>(source.size(2));

  const auto scaled = rescale(annotation, src_h, src_w, gc.height, gc.width);
  const auto map = rasterize(scaled, gc.height, gc.width, default_stroke(gc.height, gc.width));
  const auto image = resize_bilinear(source, gc.height, gc.width);

  torch::NoGradGuard no_grad;
  const auto out = generator
                       ->generate_with_rolling(image.unsqueeze(0), map.to_tensor().unsqueeze(0),
                                               torch::tensor({request.category}, torch::kInt64),
                                               request.rolling)
                       .final_output();

  TranslateResult result;
  result.image_png = encode_png(resize_bilinear(out.composite[0], src_h, src_w).clamp(-1.0, 1.0));
  if (request.return_mask) {
    result.mask_png = encode_mask_png(resize_bilinear(out.mask[0], src_h, src_w).clamp(0.0, 1.0));
  }
  result.inference_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::string TranslationService::categories_json() const {
  std::shared_lock lock(mutex_);
  auto list = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < category_names_.size(); ++i) {
    list.push_back({{"index", i}, {"name", category_names_[i]}});
  }
  return list.dump();
}

std::string TranslationService::health_json() const {
  std::shared_lock lock(mutex_);
  nlohmann::ordered_json j;
  j["status"] = generator_ ? "ready" : "loading";
  j["checkpoint_id"] = generator_ ? nlohmann::ordered_json(checkpoint_id_) : nullptr;
  return j.dump();
}

void TranslationService::install_routes(httplib::Server& server) {
  server.set_payload_max_length(config_.max_image_bytes + (1u << 20));

  server.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    res.status = ready() ? 200 : 503;
    res.set_content(health_json(), "application/json");
  });

  server.Get("/categories", [this](const httplib::Request&, httplib::Response& res) {
    if (!ready()) return send_error(res, 503, "model not loaded");
    res.set_content(categories_json(), "application/json");
  });

  server.Post("/translate", [this](const httplib::Request& req, httplib::Response& res) {
    if (!ready()) return send_error(res, 503, "model not loaded");
    if (!req.is_multipart_form_data()) {
      return send_error(res, 400, "expected multipart/form-data");
    }
    for (const char* field : {"image", "annotation", "category"}) {
      if (!req.has_file(field)) return send_error(res, 400, std::string("missing field ") + field);
    }
    const auto& image = req.get_file_value("image").content;
    if (image.size() > config_.max_image_bytes) {
      return send_error(res, 413, "image exceeds " + std::to_string(config_.max_image_bytes) +
                                      " bytes");
    }
    try {
      TranslateRequest request;
      request.image.assign(image.begin(), image.end());
      request.annotation = req.get_file_value("annotation").content;
      const auto category = req.get_file_value("category").content;
      std::size_t used = 0;
      try {
        request.category = std::stoll(category, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != category.size()) {
        return send_error(res, 400, "category must be an integer");
      }
      if (req.has_file("return_mask")) {
        request.return_mask = parse_flag(req.get_file_value("return_mask").content);
      }
      if (req.has_file("rolling")) {
        request.rolling = parse_flag(req.get_file_value("rolling").content);
      }
      const auto result = translate(request);
      res.set_header("X-Inference-Time-Ms", std::to_string(result.inference_ms));
      if (result.mask_png) {
        res.set_content(mixed_body(result),
                        std::string("multipart/mixed; boundary=") + kMixedBoundary);
      } else {
        res.set_content(std::string(result.image_png.begin(), result.image_png.end()),
                        "image/png");
      }
    } catch (const Error& e) {
      send_error(res, http_status(e.kind()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  });
}

int serve(TranslationService& service, const std::string& host, int port) {
  httplib::Server server;
  service.install_routes(server);
  return server.listen(host, port) ? 0 : 1;
}

}  // namespace deltagan
