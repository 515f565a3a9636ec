#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "deltagan/checkpoint.hpp"
#include "deltagan/metrics.hpp"

namespace deltagan {

/// Small convolutional gesture recogniser used for the F1 and IS metrics.
class GestureNetImpl : public torch::nn::Module {
 public:
  GestureNetImpl(int category_count, int input_size);

  torch::Tensor features(const torch::Tensor& images);
  torch::Tensor forward(const torch::Tensor& images);

  int category_count() const noexcept { return category_count_; }
  int input_size() const noexcept { return input_size_; }

 private:
  int category_count_;
  int input_size_;
  torch::nn::Sequential backbone_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(GestureNet);

struct ClassifierOptions {
  int epochs = 30;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int batch_size = 64;
  int input_size = 64;
  double max_rotation_degrees = 40.0;
  double augment_probability = 0.5;
  double validation_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
};

/// Wraps a trained GestureNet. Inputs are colour images in [-1, 1].
class GestureClassifier final : public FeatureExtractor {
 public:
  explicit GestureClassifier(GestureNet net);

  torch::Tensor probabilities(const torch::Tensor& images);
  std::vector<std::int64_t> predict(const torch::Tensor& images);

  torch::Tensor extract(const torch::Tensor& images) override;
  std::string name() const override { return "gesture-classifier"; }

  GestureNet& net() { return net_; }

  Archive to_archive() const;
  static GestureClassifier from_archive(const Archive& archive);

 private:
  torch::Tensor prepare(const torch::Tensor& images) const;
  GestureNet net_;
};

struct ClassifierTraining {
  GestureClassifier classifier;
  double validation_f1 = 0.0;
  double test_f1 = 0.0;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> validation_indices;
  std::vector<std::size_t> test_indices;
};

/// SGD with momentum on a seeded train/validation/test partition, with
/// random rotation and horizontal flip augmentation. The epoch with the best
/// validation F1 is kept. images: [N,3,H,W] in [-1,1].
ClassifierTraining train_gesture_classifier(const torch::Tensor& images,
                                            const std::vector<std::int64_t>& labels,
                                            int category_count, const ClassifierOptions& options);

}  // namespace deltagan
