#include "deltagan/generator.hpp"

#include <string>

#include "deltagan/condmap.hpp"
#include "deltagan/error.hpp"

namespace deltagan {

namespace nn = torch::nn;

namespace {

// conv -> IN -> ReLU; convs feeding instance norm carry no bias.
void add_conv_block(nn::Sequential& seq, int in, int out, int kernel, int stride, int padding) {
  seq->push_back(
      nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(false)));
  seq->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)));
  seq->push_back(nn::ReLU());
}

void add_deconv_block(nn::Sequential& seq, int in, int out) {
  seq->push_back(
      nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1).bias(false)));
  seq->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)));
  seq->push_back(nn::ReLU());
}

nn::Sequential encoder(int in, const std::array<int, 3>& widths) {
  nn::Sequential seq;
  add_conv_block(seq, in, widths[0], 7, 1, 3);
  add_conv_block(seq, widths[0], widths[1], 3, 2, 1);
  add_conv_block(seq, widths[1], widths[2], 3, 2, 1);
  return seq;
}

nn::Sequential conv_block(int in, int out) {
  nn::Sequential seq;
  add_conv_block(seq, in, out, 3, 1, 1);
  return seq;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (height <= 0 || width <= 0 || height % 4 != 0 || width % 4 != 0) {
    throw Error(ErrorKind::InvalidShape, "generator resolution must be a positive multiple of 4");
  }
  if (category_count <= 0) throw Error(ErrorKind::InvalidShape, "category count must be positive");
  auto positive = [](int v) { return v > 0; };
  for (int w : source_widths) {
    if (!positive(w)) throw Error(ErrorKind::InvalidShape, "layer widths must be positive");
  }
  for (int w : condition_widths) {
    if (!positive(w)) throw Error(ErrorKind::InvalidShape, "layer widths must be positive");
  }
  for (int w : decoder_widths) {
    if (!positive(w)) throw Error(ErrorKind::InvalidShape, "layer widths must be positive");
  }
  if (!positive(trunk_width) || residual_blocks < 0) {
    throw Error(ErrorKind::InvalidShape, "invalid trunk configuration");
  }
}

torch::Tensor composite(const torch::Tensor& mask, const torch::Tensor& source,
                        const torch::Tensor& proposal) {
  return mask * source + (1 - mask) * proposal;
}

ResidualBlockImpl::ResidualBlockImpl(int channels) {
  body_ = register_module(
      "body",
      nn::Sequential(
          nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1).bias(false)),
          nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels).affine(true)), nn::ReLU(),
          nn::Conv2d(nn::Conv2dOptions(channels, channels, 3).padding(1).bias(false)),
          nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels).affine(true))));
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) { return x + body_->forward(x); }

GeneratorImpl::GeneratorImpl(const GeneratorConfig& config) : config_(config) {
  config_.validate();
  const auto& sw = config_.source_widths;
  const auto& cw = config_.condition_widths;

  source_encoder_ = encoder(3, sw);
  condition_encoder_ = encoder(config_.condition_channels(true), cw);
  fuse_in_ = conv_block(sw[2] + cw[2], config_.trunk_width);
  trunk_ = nn::Sequential();
  for (int i = 0; i < config_.residual_blocks; ++i) {
    trunk_->push_back(ResidualBlock(config_.trunk_width));
  }
  fuse_out_ = conv_block(config_.trunk_width + cw[2], config_.trunk_width);
  decoder_ = nn::Sequential();
  add_deconv_block(decoder_, config_.trunk_width, config_.decoder_widths[0]);
  add_deconv_block(decoder_, config_.decoder_widths[0], config_.decoder_widths[1]);
  color_head_ = nn::Conv2d(nn::Conv2dOptions(config_.decoder_widths[1], 3, 7).padding(3));
  attention_head_ = nn::Conv2d(nn::Conv2dOptions(config_.decoder_widths[1], 1, 7).padding(3));

  register_module("source_encoder", source_encoder_);
  register_module("condition_encoder", condition_encoder_);
  register_module("fuse_in", fuse_in_);
  register_module("trunk", trunk_);
  register_module("fuse_out", fuse_out_);
  register_module("decoder", decoder_);
  register_module("color_head", color_head_);
  register_module("attention_head", attention_head_);
}

void GeneratorImpl::check_image(const torch::Tensor& image) const {
  if (image.dim() != 4 || image.size(1) != 3) {
    throw Error(ErrorKind::ShapeMismatch, "source image must be [B,3,H,W]");
  }
  if (image.size(2) % 4 != 0 || image.size(3) % 4 != 0 || image.size(2) == 0 ||
      image.size(3) == 0) {
    throw Error(ErrorKind::ShapeMismatch, "image size " + std::to_string(image.size(2)) + "x" +
                                              std::to_string(image.size(3)) +
                                              " is not divisible by 4");
  }
}

torch::Tensor GeneratorImpl::encode_source(const torch::Tensor& image) {
  check_image(image);
  return source_encoder_->forward(image);
}

torch::Tensor GeneratorImpl::encode_condition(const torch::Tensor& condition) {
  if (condition.dim() != 4) throw Error(ErrorKind::ShapeMismatch, "condition must be [B,C,H,W]");
  if (condition.size(2) % 4 != 0 || condition.size(3) % 4 != 0) {
    throw Error(ErrorKind::ShapeMismatch, "condition size is not divisible by 4");
  }
  const auto channels = condition.size(1);
  torch::Tensor input = condition;
  if (channels == config_.condition_channels(false)) {
    auto zeros = torch::zeros({condition.size(0), 3, condition.size(2), condition.size(3)},
                              condition.options());
    input = torch::cat({condition, zeros}, 1);
  } else if (channels != config_.condition_channels(true)) {
    throw Error(ErrorKind::ShapeMismatch,
                "condition has " + std::to_string(channels) + " channels, expected " +
                    std::to_string(config_.condition_channels(false)) + " or " +
                    std::to_string(config_.condition_channels(true)));
  }
  return condition_encoder_->forward(input);
}

GeneratorOutput GeneratorImpl::forward(const torch::Tensor& image, const torch::Tensor& condition) {
  check_image(image);
  if (condition.dim() != 4 || condition.size(0) != image.size(0) ||
      condition.size(2) != image.size(2) || condition.size(3) != image.size(3)) {
    throw Error(ErrorKind::ShapeMismatch, "condition and image disagree in batch or spatial size");
  }
  auto source_features = encode_source(image);
  auto condition_features = encode_condition(condition);
  auto x = fuse_in_->forward(torch::cat({source_features, condition_features}, 1));
  x = trunk_->forward(x);
  x = fuse_out_->forward(torch::cat({x, condition_features}, 1));
  x = decoder_->forward(x);
  GeneratorOutput out;
  out.proposal = torch::tanh(color_head_->forward(x));
  out.mask = torch::sigmoid(attention_head_->forward(x));
  out.composite = composite(out.mask, image, out.proposal);
  return out;
}

GeneratorOutput GeneratorImpl::generate(const torch::Tensor& image, const torch::Tensor& maps,
                                        const torch::Tensor& categories) {
  check_image(image);
  return forward(image, assemble_condition(maps, categories, config_.category_count));
}

RollingOutput GeneratorImpl::generate_with_rolling(const torch::Tensor& image,
                                                   const torch::Tensor& maps,
                                                   const torch::Tensor& categories, bool rolling) {
  RollingOutput out;
  out.stage1 = generate(image, maps, categories);
  if (rolling) {
    auto condition = assemble_condition(maps, categories, config_.category_count,
                                        out.stage1.composite.detach());
    out.stage2 = forward(image, condition);
  }
  return out;
}

std::int64_t GeneratorImpl::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

}  // namespace deltagan
