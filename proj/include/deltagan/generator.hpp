#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include <torch/torch.h>

namespace deltagan {

/// Layer widths default to the reference architecture: source encoder
/// 64/128/256, condition encoder 64/64/64, a 256-wide trunk of six
/// residual blocks and a 128/64 transposed-conv decoder.
struct GeneratorConfig {
  int height = 256;
  int width = 256;
  int category_count = 10;
  std::array<int, 3> source_widths{64, 128, 256};
  std::array<int, 3> condition_widths{64, 64, 64};
  int trunk_width = 256;
  int residual_blocks = 6;
  std::array<int, 2> decoder_widths{128, 64};

  /// Channel count of the condition tensor: map + one-hot (+ rolled RGB).
  int condition_channels(bool with_rolled) const {
    return 1 + category_count + (with_rolled ? 3 : 0);
  }

  /// Throws InvalidShape when the configuration cannot be built.
  void validate() const;

  friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

struct GeneratorOutput {
  torch::Tensor proposal;   // [B,3,H,W], tanh range
  torch::Tensor mask;       // [B,1,H,W], sigmoid range
  torch::Tensor composite;  // [B,3,H,W]
};

struct RollingOutput {
  GeneratorOutput stage1;
  std::optional<GeneratorOutput> stage2;

  const GeneratorOutput& final_output() const { return stage2 ? *stage2 : stage1; }
};

/// mask * source + (1 - mask) * proposal.
torch::Tensor composite(const torch::Tensor& mask, const torch::Tensor& source,
                        const torch::Tensor& proposal);

class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential body_{nullptr};
};
TORCH_MODULE(ResidualBlock);

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const GeneratorConfig& config);

  const GeneratorConfig& config() const noexcept { return config_; }

  /// [B,3,H,W] -> [B,source_widths[2],H/4,W/4].
  torch::Tensor encode_source(const torch::Tensor& image);

  /// Accepts the stage-one (n_c+1) or stage-two (n_c+4) condition. The
  /// stage-one tensor is zero-extended over the rolled-image channels so a
  /// single encoder serves both stages.
  torch::Tensor encode_condition(const torch::Tensor& condition);

  /// Full forward pass with attention compositing.
  GeneratorOutput forward(const torch::Tensor& image, const torch::Tensor& condition);

  /// Builds the condition from maps [B,1,H,W] and categories [B] and runs
  /// a single stage.
  GeneratorOutput generate(const torch::Tensor& image, const torch::Tensor& maps,
                           const torch::Tensor& categories);

  /// Two-stage generation: the stage-one composite, detached, is appended to
  /// the condition of the second stage. With `rolling == false` only the
  /// first stage runs.
  RollingOutput generate_with_rolling(const torch::Tensor& image, const torch::Tensor& maps,
                                      const torch::Tensor& categories, bool rolling = true);

  std::int64_t parameter_count() const;

 private:
  void check_image(const torch::Tensor& image) const;

  GeneratorConfig config_;
  torch::nn::Sequential source_encoder_{nullptr};
  torch::nn::Sequential condition_encoder_{nullptr};
  torch::nn::Sequential fuse_in_{nullptr};
  torch::nn::Sequential trunk_{nullptr};
  torch::nn::Sequential fuse_out_{nullptr};
  torch::nn::Sequential decoder_{nullptr};
  torch::nn::Conv2d color_head_{nullptr};
  torch::nn::Conv2d attention_head_{nullptr};
};
TORCH_MODULE(Generator);

}  // namespace deltagan
