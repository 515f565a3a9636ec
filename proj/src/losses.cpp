#include "deltagan/losses.hpp"

#include "json.hpp"

#include "deltagan/error.hpp"

namespace deltagan {

namespace F = torch::nn::functional;

void LossWeights::validate() const {
  for (double v : {d, g, cls, rec, idt, cyc, tv, gp}) {
    if (!(v >= 0.0)) throw Error(ErrorKind::InvalidShape, "loss weights must be non-negative");
  }
}

std::string LossReport::to_json() const {
  nlohmann::ordered_json j;
  auto put = [&](const char* key, const std::optional<double>& v) {
    j[key] = v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  put("gan_d", terms.gan_d);
  put("gan_g", terms.gan_g);
  put("cls_real", terms.cls_real);
  put("cls_fake", terms.cls_fake);
  put("rec", terms.rec);
  put("idt", terms.idt);
  put("cyc", terms.cyc);
  put("tv", terms.tv);
  j["total_d"] = total_d;
  j["total_g"] = total_g;
  if (gp) j["gp"] = *gp;
  return j.dump();
}

torch::Tensor gan_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits,
                       GanSide side) {
  if (!fake_logits.defined() || fake_logits.numel() == 0) {
    throw Error(ErrorKind::ShapeMismatch, "fake logits are empty");
  }
  if (side == GanSide::Generator) {
    return F::softplus(-fake_logits).mean();
  }
  if (!real_logits.defined() || real_logits.numel() == 0) {
    throw Error(ErrorKind::ShapeMismatch, "real logits are empty");
  }
  return F::softplus(-real_logits).mean() + F::softplus(fake_logits).mean();
}

torch::Tensor l1_reconstruction(const torch::Tensor& x, const torch::Tensor& y) {
  if (x.sizes() != y.sizes()) throw Error(ErrorKind::ShapeMismatch, "L1 operands differ in shape");
  return (x - y).abs().mean();
}

torch::Tensor category_ce(const torch::Tensor& logits, const torch::Tensor& labels) {
  if (logits.dim() != 2 || labels.dim() != 1 || labels.size(0) != logits.size(0)) {
    throw Error(ErrorKind::ShapeMismatch, "category logits must be [B,n_c] with labels [B]");
  }
  auto l = labels.to(torch::kInt64);
  if (l.numel() > 0 && (l.min().item<int64_t>() < 0 || l.max().item<int64_t>() >= logits.size(1))) {
    throw Error(ErrorKind::InvalidCategory, "label outside the logit range");
  }
  return F::cross_entropy(logits, l);
}

torch::Tensor tv_regularizer(const torch::Tensor& image) {
  torch::Tensor x = image;
  if (x.dim() == 2) x = x.unsqueeze(0).unsqueeze(0);
  if (x.dim() == 3) x = x.unsqueeze(0);
  if (x.dim() != 4) throw Error(ErrorKind::InvalidShape, "TV expects a 2-, 3- or 4-D image");
  const auto h = x.size(2);
  const auto w = x.size(3);
  if (h < 2 || w < 2) throw Error(ErrorKind::InvalidShape, "TV needs an image of at least 2x2");
  using torch::indexing::Slice;
  auto base = x.index({Slice(), Slice(), Slice(0, h - 1), Slice(0, w - 1)});
  auto down = x.index({Slice(), Slice(), Slice(1, h), Slice(0, w - 1)});
  auto right = x.index({Slice(), Slice(), Slice(0, h - 1), Slice(1, w)});
  auto per_sample = ((down - base).pow(2) + (right - base).pow(2)).sum({1, 2, 3});
  return per_sample.mean();
}

WganTerms wgan_gp(const torch::Tensor& real_logits, const torch::Tensor& fake_logits,
                  const torch::Tensor& interpolate_grad_norms) {
  WganTerms out;
  out.wgan = real_logits.mean() - fake_logits.mean();
  out.gp = (interpolate_grad_norms - 1.0).pow(2).mean();
  return out;
}

std::pair<double, double> total_losses(const LossTerms& t, const LossWeights& w) {
  auto need = [](const std::optional<double>& v, const char* name) {
    if (!v) throw Error(ErrorKind::IncompleteReport, std::string("missing loss term ") + name);
    return *v;
  };
  const double total_d = w.d * need(t.gan_d, "gan_d") + w.cls * need(t.cls_real, "cls_real");
  const double total_g = w.g * need(t.gan_g, "gan_g") + w.rec * need(t.rec, "rec") +
                         w.idt * need(t.idt, "idt") + w.cyc * need(t.cyc, "cyc") +
                         w.cls * need(t.cls_fake, "cls_fake") + w.tv * need(t.tv, "tv");
  return {total_d, total_g};
}

}  // namespace deltagan
