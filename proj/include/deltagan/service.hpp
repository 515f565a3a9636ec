#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "deltagan/error.hpp"

#include "deltagan/checkpoint.hpp"
#include "deltagan/generator.hpp"

namespace httplib {
class Server;
}

namespace deltagan {

struct ServiceConfig {
  std::size_t max_image_bytes = 8u << 20;
};

struct TranslateRequest {
  std::vector<unsigned char> image;  // PNG or JPEG
  std::string annotation;            // condmap annotation fragment JSON
  std::int64_t category = 0;
  bool return_mask = false;
  bool rolling = true;
};

struct TranslateResult {
  std::vector<unsigned char> image_png;
  std::optional<std::vector<unsigned char>> mask_png;
  double inference_ms = 0.0;
};

/// Translation backend shared by the HTTP routes and offline inference.
/// The model is read-only once loaded; requests may run concurrently.
class TranslationService {
 public:
  explicit TranslationService(ServiceConfig config = {});

  void load(const Archive& archive, std::string checkpoint_id);
  void load_file(const std::filesystem::path& checkpoint);
  bool ready() const;

  /// Annotation coordinates are in the source image's pixel frame.
  TranslateResult translate(const TranslateRequest& request) const;

  std::string categories_json() const;
  std::string health_json() const;

  const ServiceConfig& config() const noexcept { return config_; }

  /// Registers POST /translate, GET /categories and GET /health.
  void install_routes(httplib::Server& server);

 private:
  ServiceConfig config_;
  mutable std::shared_mutex mutex_;
  std::optional<Generator> generator_;
  std::vector<std::string> category_names_;
  std::string checkpoint_id_;
};

/// HTTP status for a failed translation.
int http_status(ErrorKind kind);

/// Blocks serving on `port` until the process is stopped.
int serve(TranslationService& service, const std::string& host, int port);

}  // namespace deltagan
