#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "deltagan/checkpoint.hpp"
#include "deltagan/datapipe.hpp"
#include "deltagan/discriminator.hpp"
#include "deltagan/generator.hpp"
#include "deltagan/losses.hpp"
#include "deltagan/rng.hpp"

namespace deltagan {

enum class AdversarialMode { Bce, WganGp };

struct TrainConfig {
  int batch_size = 4;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int epochs = 20;
  int decay_epochs = 10;  // linear decay to zero over the final epochs
  bool rolling = true;
  bool augment = true;
  LossWeights weights;
  AdversarialMode adversarial = AdversarialMode::Bce;
  std::uint64_t seed = 0;
  std::size_t buffer_capacity = 50;
  double validation_fraction = 0.05;
  MapType map_type = MapType::Triangle;
  std::optional<std::size_t> max_steps_per_epoch;

  void validate() const;
};

/// Learning rate at the start of `epoch`: constant, then a linear ramp that
/// hits zero at epoch == epochs. InvalidEpoch outside [0, epochs].
double lr_at(const TrainConfig& config, int epoch);

nlohmann::ordered_json to_json(const TrainConfig& config);
/// Reads TrainConfig fields from a JSON object; absent keys keep defaults.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Reference layer widths divided by `width_divisor` (at least 1 channel).
GeneratorConfig scaled_generator_config(int height, int width, int category_count,
                                        int width_divisor = 1);
DiscriminatorConfig scaled_discriminator_config(int height, int width, int category_count,
                                                int width_divisor = 1);

struct FitResult {
  std::vector<std::filesystem::path> epoch_checkpoints;
  std::filesystem::path best_checkpoint;
  double best_validation_psnr = 0.0;
  int last_epoch = -1;
  std::size_t steps = 0;
};

/// Owns both networks, their optimisers and the replay buffer.
class Trainer {
 public:
  Trainer(const TrainConfig& config, const GeneratorConfig& generator,
          const DiscriminatorConfig& discriminator);

  /// One discriminator update followed by one generator update.
  LossReport train_step(const Batch& batch);

  void set_learning_rate(double lr);
  double learning_rate() const noexcept { return current_lr_; }

  /// Generator forward calls made by the last train_step.
  int last_generator_forwards() const noexcept { return last_generator_forwards_; }

  Generator& generator() noexcept { return generator_; }
  Discriminator& discriminator() noexcept { return discriminator_; }
  const TrainConfig& config() const noexcept { return config_; }
  Rng& rng() noexcept { return rng_; }
  const ImageBuffer& buffer() const noexcept { return buffer_; }

  /// Next epoch fit() will run; advanced by resume().
  int start_epoch() const noexcept { return start_epoch_; }

  void set_category_names(std::vector<std::string> names) { category_names_ = std::move(names); }

  /// Weights, optimiser moments and configuration after finishing `epoch`.
  Archive to_archive(int epoch) const;
  /// Restores state saved by to_archive; training resumes at epoch + 1.
  void resume(const Archive& archive);

  /// Runs the epoch loop over `train_pairs`, holding out a validation slice,
  /// writing epoch_<n>.ckpt and best.ckpt under `out_dir` and one JSON line
  /// per step to `out_dir/losses.jsonl`.
  FitResult fit(const DatasetIndex& index, const std::vector<SamplePair>& train_pairs,
                const std::filesystem::path& out_dir);

 private:
  GeneratorOutput run_generator(const torch::Tensor& image, const torch::Tensor& condition);
  torch::Tensor gradient_norms(const torch::Tensor& real, const torch::Tensor& fake,
                               const torch::Tensor& maps);

  TrainConfig config_;
  Rng rng_;
  Generator generator_;
  Discriminator discriminator_;
  std::unique_ptr<torch::optim::Adam> generator_optimizer_;
  std::unique_ptr<torch::optim::Adam> discriminator_optimizer_;
  ImageBuffer buffer_;
  double current_lr_;
  int generator_forwards_ = 0;
  int last_generator_forwards_ = 0;
  int start_epoch_ = 0;
  std::vector<std::string> category_names_;
};

/// Mean per-pair PSNR of target generation over `pairs`.
double validation_psnr(Generator& generator, SampleLoader& loader,
                       const std::vector<SamplePair>& pairs, bool rolling);

}  // namespace deltagan
