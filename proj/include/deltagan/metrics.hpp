#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace deltagan {

inline constexpr double kMaxIntensity = 255.0;
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// Mean squared difference of two same-shaped tensors of 8-bit intensities.
double mse(const torch::Tensor& x, const torch::Tensor& y);

/// 20 log10(255 / sqrt(mse)); +inf for mse == 0.
double psnr_from_mse(double mse_value);
double psnr(const torch::Tensor& x, const torch::Tensor& y);

struct PsnrSummary {
  double mean_db = 0.0;  // over finite values only
  std::size_t finite = 0;
  std::size_t infinite = 0;
};

PsnrSummary summarize_psnr(std::span<const double> values);

enum class FidMode { Correct, Legacy };

std::string to_string(FidMode mode);
FidMode parse_fid_mode(const std::string& name);

/// Input normalisation applied before feature extraction. Images are
/// [B,3,H,W] in [0,1]. Correct maps x -> 2x - 1; legacy applies the old
/// per-channel affine x * (std/0.5) + (mean - 0.5)/0.5 with ImageNet
/// statistics.
torch::Tensor normalize_for_fid(const torch::Tensor& images01, FidMode mode);

/// Frechet distance between Gaussians fitted to two feature sets
/// ([N,D] and [M,D], N, M >= 2).
double fid(const torch::Tensor& features_x, const torch::Tensor& features_y);

/// exp(E_x KL(p(y|x) || p(y))) over rows of [N,K] class probabilities.
double inception_score(const torch::Tensor& probabilities);

/// Per-class F1 averaged with weights equal to the true-label frequency.
double weighted_f1(std::span<const std::int64_t> predicted, std::span<const std::int64_t> truth);

/// Maps image batches to fixed-length feature vectors.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  /// `images` are already normalised for the extractor; returns [B,D].
  virtual torch::Tensor extract(const torch::Tensor& images) = 0;
  virtual std::string name() const = 0;
};

/// Desk-scale stand-in for the reference Inception network: a fixed,
/// seeded random convolutional feature map with global average pooling.
class SmallConvExtractor final : public FeatureExtractor {
 public:
  explicit SmallConvExtractor(std::uint64_t seed = 2019, int input_size = 64);

  torch::Tensor extract(const torch::Tensor& images) override;
  std::string name() const override { return "small-conv"; }
  std::int64_t dimension() const { return 64; }

 private:
  int input_size_;
  torch::nn::Sequential net_{nullptr};
};

struct PairScore {
  std::string source;
  std::string target;
  double mse = 0.0;
  double psnr = 0.0;
};

struct EvalReport {
  double mse = 0.0;
  double psnr = 0.0;
  std::size_t psnr_infinite = 0;
  double is_mean = 0.0;
  double fid = 0.0;
  double f1 = 0.0;
  FidMode fid_mode = FidMode::Correct;
  std::size_t pairs = 0;
  std::vector<PairScore> per_pair;

  std::string to_json() const;
  /// Human-readable table: PSNR, FID, F1, MSE, IS.
  std::string table() const;
};

}  // namespace deltagan
