#pragma once

#include <optional>
#include <string>
#include <utility>

#include <torch/torch.h>

namespace deltagan {

struct LossWeights {
  double d = 1.0;
  double g = 2.0;
  double cls = 1.0;
  double rec = 100.0;
  double idt = 10.0;
  double cyc = 10.0;
  double tv = 1e-5;
  double gp = 10.0;  // only used by the WGAN-GP objective

  void validate() const;
};

/// Individual loss terms of one optimisation step. Terms stay empty until
/// computed; totals refuse to combine an incomplete set.
struct LossTerms {
  std::optional<double> gan_d;
  std::optional<double> gan_g;
  std::optional<double> cls_real;
  std::optional<double> cls_fake;
  std::optional<double> rec;
  std::optional<double> idt;
  std::optional<double> cyc;
  std::optional<double> tv;

  friend bool operator==(const LossTerms&, const LossTerms&) = default;
};

struct LossReport {
  LossTerms terms;
  double total_d = 0.0;
  double total_g = 0.0;
  std::optional<double> gp;

  /// Flat JSON object, one key per term.
  std::string to_json() const;
  friend bool operator==(const LossReport&, const LossReport&) = default;
};

enum class GanSide { Discriminator, Generator };

/// Binary cross-entropy on patch logits in log-sigmoid form.
/// Discriminator side: mean softplus(-real) + mean softplus(fake).
/// Generator side (non-saturating): mean softplus(-fake); `real` unused.
torch::Tensor gan_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits,
                       GanSide side);

torch::Tensor l1_reconstruction(const torch::Tensor& x, const torch::Tensor& y);

/// Batch-mean cross-entropy; logits [B,n_c], labels [B].
torch::Tensor category_ce(const torch::Tensor& logits, const torch::Tensor& labels);

/// Sum over channels and the (H-1)x(W-1) grid of squared forward
/// differences, averaged over the batch. Accepts [H,W], [C,H,W], [B,C,H,W].
torch::Tensor tv_regularizer(const torch::Tensor& image);

struct WganTerms {
  torch::Tensor wgan;  // E[D(real)] - E[D(fake)]
  torch::Tensor gp;    // E[(||grad|| - 1)^2]
};

WganTerms wgan_gp(const torch::Tensor& real_logits, const torch::Tensor& fake_logits,
                  const torch::Tensor& interpolate_grad_norms);

/// total_d = d*gan_d + cls*cls_real;
/// total_g = g*gan_g + rec*rec + idt*idt + cyc*cyc + cls*cls_fake + tv*tv.
std::pair<double, double> total_losses(const LossTerms& terms, const LossWeights& w);

}  // namespace deltagan
