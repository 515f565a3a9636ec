#include "deltagan/discriminator.hpp"

#include <string>

#include "deltagan/error.hpp"

namespace deltagan {

namespace nn = torch::nn;

int DiscriminatorConfig::patch_padding() const {
  return (backbone_height() == 1 || backbone_width() == 1) ? 2 : 1;
}

void DiscriminatorConfig::validate() const {
  if (height <= 0 || width <= 0 || height % 64 != 0 || width % 64 != 0) {
    throw Error(ErrorKind::InvalidShape,
                "discriminator resolution must be a positive multiple of 64");
  }
  if (category_count <= 0 || map_channels <= 0) {
    throw Error(ErrorKind::InvalidShape, "invalid discriminator channel configuration");
  }
  for (int w : widths) {
    if (w <= 0) throw Error(ErrorKind::InvalidShape, "layer widths must be positive");
  }
}

DiscriminatorImpl::DiscriminatorImpl(const DiscriminatorConfig& config) : config_(config) {
  config_.validate();
  backbone_ = nn::Sequential();
  int in = 3 + config_.map_channels;
  for (int out : config_.widths) {
    backbone_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
    backbone_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(config_.leaky_slope)));
    in = out;
  }
  category_head_ = nn::Conv2d(
      nn::Conv2dOptions(in, config_.category_count,
                        {config_.backbone_height(), config_.backbone_width()})
          .bias(false));
  patch_head_ =
      nn::Conv2d(nn::Conv2dOptions(in, 1, 4).stride(1).padding(config_.patch_padding()).bias(false));
  register_module("backbone", backbone_);
  register_module("category_head", category_head_);
  register_module("patch_head", patch_head_);
}

torch::Tensor DiscriminatorImpl::features(const torch::Tensor& image, const torch::Tensor& maps) {
  if (image.dim() != 4 || image.size(1) != 3) {
    throw Error(ErrorKind::ShapeMismatch, "discriminator image must be [B,3,H,W]");
  }
  if (maps.dim() != 4 || maps.size(1) != config_.map_channels || maps.size(0) != image.size(0) ||
      maps.size(2) != image.size(2) || maps.size(3) != image.size(3)) {
    throw Error(ErrorKind::ShapeMismatch, "conditional map does not match the image");
  }
  const auto h = image.size(2);
  const auto w = image.size(3);
  if (h % 64 != 0 || w % 64 != 0) {
    throw Error(ErrorKind::ShapeMismatch, "discriminator input " + std::to_string(h) + "x" +
                                              std::to_string(w) + " is not divisible by 64");
  }
  if (h != config_.height || w != config_.width) {
    throw Error(ErrorKind::ShapeMismatch,
                "discriminator was built for " + std::to_string(config_.height) + "x" +
                    std::to_string(config_.width));
  }
  return backbone_->forward(torch::cat({image, maps.to(image.scalar_type())}, 1));
}

DiscriminatorOutput DiscriminatorImpl::forward(const torch::Tensor& image,
                                               const torch::Tensor& maps) {
  auto h = features(image, maps);
  DiscriminatorOutput out;
  out.patch_logits = patch_head_->forward(h);
  out.category_logits = category_head_->forward(h).flatten(1);
  return out;
}

std::int64_t DiscriminatorImpl::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

}  // namespace deltagan
