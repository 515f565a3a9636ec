#pragma once

#include <array>
#include <cstdint>

#include <torch/torch.h>

namespace deltagan {

/// Six stride-2 4x4 convolutions (64..2048) with leaky ReLU, followed by a
/// category head whose kernel spans the whole final grid and a PatchGAN
/// head. `height`/`width` record the training resolution that the category
/// head is tied to.
struct DiscriminatorConfig {
  int height = 256;
  int width = 256;
  int category_count = 10;
  int map_channels = 1;
  std::array<int, 6> widths{64, 128, 256, 512, 1024, 2048};
  double leaky_slope = 0.01;

  int backbone_height() const { return height / 64; }
  int backbone_width() const { return width / 64; }

  /// Padding of the 4x4 patch head: 1, or 2 when the backbone grid is a
  /// single cell and padding 1 would leave an empty output.
  int patch_padding() const;

  void validate() const;

  friend bool operator==(const DiscriminatorConfig&, const DiscriminatorConfig&) = default;
};

struct DiscriminatorOutput {
  torch::Tensor patch_logits;     // [B,1,h',w'], unbounded
  torch::Tensor category_logits;  // [B,n_c]
};

class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const DiscriminatorConfig& config);

  const DiscriminatorConfig& config() const noexcept { return config_; }

  /// image [B,3,H,W] in [-1,1]; maps [B,1,H,W].
  DiscriminatorOutput forward(const torch::Tensor& image, const torch::Tensor& maps);

  /// Backbone features [B,2048,H/64,W/64].
  torch::Tensor features(const torch::Tensor& image, const torch::Tensor& maps);

  std::int64_t parameter_count() const;

 private:
  DiscriminatorConfig config_;
  torch::nn::Sequential backbone_{nullptr};
  torch::nn::Conv2d category_head_{nullptr};
  torch::nn::Conv2d patch_head_{nullptr};
};
TORCH_MODULE(Discriminator);

}  // namespace deltagan
