#include "deltagan/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include <ATen/CPUGeneratorImpl.h>
#include <Eigen/Dense>

#include "json.hpp"

#include "deltagan/error.hpp"

namespace deltagan {

namespace {

Eigen::MatrixXd to_eigen(const torch::Tensor& t) {
  auto d = t.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  if (d.dim() != 2) throw Error(ErrorKind::ShapeMismatch, "feature sets must be [N,D]");
  Eigen::MatrixXd m(d.size(0), d.size(1));
  const double* p = d.data_ptr<double>();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = p[i * m.cols() + j];
  }
  return m;
}

// Eigen-decomposition based square root of a symmetric PSD matrix;
// eigenvalues within round-off of zero are clipped.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, Eigen::VectorXd* eigenvalues = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::NumericalFailure, "eigendecomposition did not converge");
  }
  Eigen::VectorXd ev = solver.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (!std::isfinite(ev(i))) throw Error(ErrorKind::NumericalFailure, "non-finite eigenvalue");
    if (ev(i) < 0.0) {
      if (ev(i) < -1e-6 * scale) {
        throw Error(ErrorKind::NumericalFailure, "matrix is not positive semi-definite");
      }
      ev(i) = 0.0;
    }
  }
  if (eigenvalues) *eigenvalues = ev;
  return solver.eigenvectors() * ev.cwiseSqrt().asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace

double mse(const torch::Tensor& x, const torch::Tensor& y) {
  if (x.sizes() != y.sizes()) throw Error(ErrorKind::ShapeMismatch, "MSE operands differ in shape");
  if (x.numel() == 0) throw Error(ErrorKind::ShapeMismatch, "MSE of empty tensors");
  return (x.to(torch::kFloat64) - y.to(torch::kFloat64)).pow(2).mean().item<double>();
}

double psnr_from_mse(double mse_value) {
  if (mse_value <= 0.0) return kPsnrIdentical;
  return 20.0 * std::log10(kMaxIntensity / std::sqrt(mse_value));
}

double psnr(const torch::Tensor& x, const torch::Tensor& y) { return psnr_from_mse(mse(x, y)); }

PsnrSummary summarize_psnr(std::span<const double> values) {
  PsnrSummary s;
  double sum = 0.0;
  for (double v : values) {
    if (std::isinf(v)) {
      ++s.infinite;
    } else {
      sum += v;
      ++s.finite;
    }
  }
  s.mean_db = s.finite > 0 ? sum / static_cast<double>(s.finite) : kPsnrIdentical;
  return s;
}

std::string to_string(FidMode mode) { return mode == FidMode::Correct ? "correct" : "legacy"; }

FidMode parse_fid_mode(const std::string& name) {
  if (name == "correct") return FidMode::Correct;
  if (name == "legacy") return FidMode::Legacy;
  throw Error(ErrorKind::InvalidShape, "unknown FID mode '" + name + "'");
}

torch::Tensor normalize_for_fid(const torch::Tensor& images01, FidMode mode) {
  if (images01.dim() != 4 || images01.size(1) != 3) {
    throw Error(ErrorKind::ShapeMismatch, "FID input must be [B,3,H,W]");
  }
  if (mode == FidMode::Correct) return 2.0 * images01 - 1.0;
  const auto opts = images01.options();
  auto mean = torch::tensor({0.485, 0.456, 0.406}, opts).view({1, 3, 1, 1});
  auto std = torch::tensor({0.229, 0.224, 0.225}, opts).view({1, 3, 1, 1});
  return images01 * (std / 0.5) + (mean - 0.5) / 0.5;
}

double fid(const torch::Tensor& features_x, const torch::Tensor& features_y) {
  const auto x = to_eigen(features_x);
  const auto y = to_eigen(features_y);
  if (x.rows() < 2 || y.rows() < 2) {
    throw Error(ErrorKind::InsufficientSamples, "FID needs at least two samples per side");
  }
  if (x.cols() != y.cols()) throw Error(ErrorKind::ShapeMismatch, "feature dimensions differ");

  const Eigen::RowVectorXd mu_x = x.colwise().mean();
  const Eigen::RowVectorXd mu_y = y.colwise().mean();
  const Eigen::MatrixXd cx = x.rowwise() - mu_x;
  const Eigen::MatrixXd cy = y.rowwise() - mu_y;
  const Eigen::MatrixXd sigma_x = (cx.transpose() * cx) / static_cast<double>(x.rows() - 1);
  const Eigen::MatrixXd sigma_y = (cy.transpose() * cy) / static_cast<double>(y.rows() - 1);

  // Tr((Sx Sy)^1/2) = Tr((Sx^1/2 Sy Sx^1/2)^1/2), the inner product being
  // symmetric PSD.
  const Eigen::MatrixXd root_x = psd_sqrt(sigma_x);
  Eigen::MatrixXd inner = root_x * sigma_y * root_x;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::VectorXd ev;
  psd_sqrt(inner, &ev);
  const double trace_sqrt = ev.cwiseSqrt().sum();

  const double value =
      (mu_x - mu_y).squaredNorm() + sigma_x.trace() + sigma_y.trace() - 2.0 * trace_sqrt;
  if (!std::isfinite(value)) throw Error(ErrorKind::NumericalFailure, "FID is not finite");
  return value;
}

double inception_score(const torch::Tensor& probabilities) {
  auto p = probabilities.detach().to(torch::kFloat64);
  if (p.dim() != 2 || p.size(0) == 0) {
    throw Error(ErrorKind::InvalidDistribution, "probabilities must be a non-empty [N,K] matrix");
  }
  if ((p < 0).any().item<bool>() || ((p.sum(1) - 1.0).abs() > 1e-4).any().item<bool>()) {
    throw Error(ErrorKind::InvalidDistribution, "rows must be distributions summing to 1");
  }
  auto marginal = p.mean(0, true);
  // 0 log 0 contributes nothing.
  auto ratio = torch::where(p > 0, p / marginal, torch::ones_like(p));
  auto kl = (p * torch::log(ratio)).sum(1);
  return std::exp(kl.mean().item<double>());
}

double weighted_f1(std::span<const std::int64_t> predicted, std::span<const std::int64_t> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorKind::ShapeMismatch, "prediction and label counts differ");
  }
  if (truth.empty()) throw Error(ErrorKind::EmptyDataset, "no labels to score");
  struct Counts {
    long long tp = 0, fp = 0, fn = 0, support = 0;
  };
  std::map<std::int64_t, Counts> per_class;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& t = per_class[truth[i]];
    ++t.support;
    if (predicted[i] == truth[i]) {
      ++t.tp;
    } else {
      ++t.fn;
      ++per_class[predicted[i]].fp;
    }
  }
  long double weighted = 0.0L;
  for (const auto& [_, c] : per_class) {
    if (c.support == 0) continue;
    const long long denom = 2 * c.tp + c.fp + c.fn;
    // 2pr/(p+r) == 2tp/(2tp+fp+fn); zero when precision and recall vanish.
    const long double f1 = denom > 0 ? 2.0L * c.tp / denom : 0.0L;
    weighted += f1 * c.support;
  }
  return static_cast<double>(weighted / static_cast<long double>(truth.size()));
}

SmallConvExtractor::SmallConvExtractor(std::uint64_t seed, int input_size)
    : input_size_(input_size) {
  namespace nn = torch::nn;
  // Weights come from a private generator so the extractor never disturbs
  // (or depends on) the global torch stream.
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  net_ = nn::Sequential(nn::Conv2d(nn::Conv2dOptions(3, 32, 5).stride(2).padding(2)), nn::ReLU(),
                        nn::Conv2d(nn::Conv2dOptions(32, 64, 3).stride(2).padding(1)), nn::ReLU(),
                        nn::Conv2d(nn::Conv2dOptions(64, 64, 3).stride(2).padding(1)), nn::ReLU(),
                        nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)), nn::Flatten());
  torch::NoGradGuard no_grad;
  for (auto& p : net_->parameters()) {
    const double fan_in = p.dim() > 1 ? static_cast<double>(p[0].numel()) : 1.0;
    p.copy_(torch::randn(p.sizes(), gen) * std::sqrt(2.0 / fan_in));
  }
  net_->eval();
}

torch::Tensor SmallConvExtractor::extract(const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  auto x = images.to(torch::kFloat32);
  if (x.size(2) != input_size_ || x.size(3) != input_size_) {
    x = torch::nn::functional::interpolate(
        x, torch::nn::functional::InterpolateFuncOptions()
               .size(std::vector<int64_t>{input_size_, input_size_})
               .mode(torch::kBilinear)
               .align_corners(false));
  }
  return net_->forward(x).to(torch::kFloat64);
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  auto num = [](double v) {
    if (std::isnan(v)) return nlohmann::ordered_json(nullptr);
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json("inf");
  };
  j["pairs"] = pairs;
  j["mse"] = num(mse);
  j["psnr"] = num(psnr);
  j["psnr_infinite"] = psnr_infinite;
  j["is"] = num(is_mean);
  j["fid"] = num(fid);
  j["fid_mode"] = to_string(fid_mode);
  j["f1"] = num(f1);
  if (!per_pair.empty()) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& p : per_pair) {
      arr.push_back({{"source", p.source}, {"target", p.target}, {"mse", num(p.mse)},
                     {"psnr", num(p.psnr)}});
    }
    j["per_pair"] = arr;
  }
  return j.dump(2) + "\n";
}

std::string EvalReport::table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << std::left << std::setw(12) << "PSNR" << std::setw(12) << "FID" << std::setw(12) << "F1"
     << std::setw(14) << "MSE" << std::setw(12) << "IS" << "\n";
  os << std::setw(12) << psnr << std::setw(12) << fid << std::setw(12) << f1 << std::setw(14)
     << mse << std::setw(12) << is_mean << "\n";
  return os.str();
}

}  // namespace deltagan
