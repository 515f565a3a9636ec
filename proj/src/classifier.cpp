#include "deltagan/classifier.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "deltagan/error.hpp"
#include "deltagan/rng.hpp"

namespace deltagan {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace {

torch::Tensor resize_to(const torch::Tensor& images, int size) {
  if (images.size(2) == size && images.size(3) == size) return images;
  return F::interpolate(images, F::InterpolateFuncOptions()
                                    .size(std::vector<int64_t>{size, size})
                                    .mode(torch::kBilinear)
                                    .align_corners(false));
}

// Per-sample rotation within +-max_degrees and horizontal flip, each applied
// with probability p. Border pixels are replicated.
torch::Tensor augment_batch(const torch::Tensor& images, double max_degrees, double p, Rng& rng) {
  const auto batch = images.size(0);
  std::vector<float> theta;
  theta.reserve(static_cast<std::size_t>(batch) * 6);
  for (int64_t i = 0; i < batch; ++i) {
    double angle = 0.0;
    if (rng.bernoulli(p)) angle = (2.0 * rng.uniform() - 1.0) * max_degrees * std::numbers::pi / 180.0;
    const double flip = rng.bernoulli(p) ? -1.0 : 1.0;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    theta.insert(theta.end(), {static_cast<float>(c * flip), static_cast<float>(-s), 0.0f,
                               static_cast<float>(s * flip), static_cast<float>(c), 0.0f});
  }
  auto t = torch::tensor(theta).view({batch, 2, 3});
  auto grid = F::affine_grid(t, images.sizes().vec(), false);
  return F::grid_sample(images, grid,
                        F::GridSampleFuncOptions()
                            .mode(torch::kBilinear)
                            .padding_mode(torch::kBorder)
                            .align_corners(false));
}

torch::Tensor gather(const torch::Tensor& t, const std::vector<std::size_t>& idx) {
  std::vector<int64_t> i(idx.begin(), idx.end());
  return t.index_select(0, torch::tensor(i, torch::kInt64));
}

double f1_on(GestureClassifier& clf, const torch::Tensor& images,
             const std::vector<std::int64_t>& labels, const std::vector<std::size_t>& idx) {
  if (idx.empty()) return 0.0;
  std::vector<std::int64_t> truth;
  for (auto i : idx) truth.push_back(labels[i]);
  const auto pred = clf.predict(gather(images, idx));
  return weighted_f1(pred, truth);
}

}  // namespace

GestureNetImpl::GestureNetImpl(int category_count, int input_size)
    : category_count_(category_count), input_size_(input_size) {
  if (category_count <= 0 || input_size < 8) {
    throw Error(ErrorKind::InvalidShape, "invalid classifier configuration");
  }
  backbone_ = nn::Sequential(
      nn::Conv2d(nn::Conv2dOptions(3, 16, 5).stride(2).padding(2)), nn::ReLU(),
      nn::Conv2d(nn::Conv2dOptions(16, 32, 3).stride(2).padding(1)), nn::ReLU(),
      nn::Conv2d(nn::Conv2dOptions(32, 64, 3).stride(2).padding(1)), nn::ReLU(),
      nn::AdaptiveAvgPool2d(nn::AdaptiveAvgPool2dOptions(1)), nn::Flatten());
  head_ = nn::Linear(64, category_count);
  register_module("backbone", backbone_);
  register_module("head", head_);
}

torch::Tensor GestureNetImpl::features(const torch::Tensor& images) {
  return backbone_->forward(images);
}

torch::Tensor GestureNetImpl::forward(const torch::Tensor& images) {
  return head_->forward(features(images));
}

GestureClassifier::GestureClassifier(GestureNet net) : net_(std::move(net)) { net_->eval(); }

torch::Tensor GestureClassifier::prepare(const torch::Tensor& images) const {
  if (images.dim() != 4 || images.size(1) != 3) {
    throw Error(ErrorKind::ShapeMismatch, "classifier input must be [B,3,H,W]");
  }
  return resize_to(images.to(torch::kFloat32), net_->input_size());
}

torch::Tensor GestureClassifier::probabilities(const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  net_->eval();
  return torch::softmax(net_->forward(prepare(images)), 1).to(torch::kFloat64);
}

std::vector<std::int64_t> GestureClassifier::predict(const torch::Tensor& images) {
  auto idx = probabilities(images).argmax(1).contiguous();
  return {idx.data_ptr<int64_t>(), idx.data_ptr<int64_t>() + idx.numel()};
}

torch::Tensor GestureClassifier::extract(const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  net_->eval();
  return net_->features(prepare(images)).to(torch::kFloat64);
}

Archive GestureClassifier::to_archive() const {
  Archive a;
  a.meta["classifier"] = {{"category_count", net_->category_count()},
                          {"input_size", net_->input_size()}};
  store_module(a, "classifier", *net_);
  return a;
}

GestureClassifier GestureClassifier::from_archive(const Archive& archive) {
  if (!archive.meta.contains("classifier")) {
    throw Error(ErrorKind::InvalidCheckpoint, "archive holds no classifier");
  }
  const auto& m = archive.meta.at("classifier");
  GestureNet net(m.at("category_count").get<int>(), m.at("input_size").get<int>());
  restore_module(archive, "classifier", *net);
  return GestureClassifier(net);
}

ClassifierTraining train_gesture_classifier(const torch::Tensor& images,
                                            const std::vector<std::int64_t>& labels,
                                            int category_count, const ClassifierOptions& options) {
  if (images.dim() != 4 || images.size(0) != static_cast<int64_t>(labels.size())) {
    throw Error(ErrorKind::ShapeMismatch, "images and labels disagree");
  }
  if (labels.empty()) throw Error(ErrorKind::EmptyDataset, "no labelled images");
  const std::set<std::int64_t> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    throw Error(ErrorKind::DegenerateLabels, "classifier needs at least two categories");
  }
  for (auto l : labels) {
    if (l < 0 || l >= category_count) {
      throw Error(ErrorKind::InvalidCategory, "label outside [0, n_c)");
    }
  }

  Rng rng(options.seed);
  rng.seed_torch();

  std::vector<std::size_t> order(labels.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  const auto n = order.size();
  const auto n_val = static_cast<std::size_t>(std::llround(options.validation_fraction * n));
  const auto n_test = static_cast<std::size_t>(std::llround(options.test_fraction * n));
  if (n_val + n_test >= n) throw Error(ErrorKind::EmptyDataset, "too few images to partition");

  ClassifierTraining out{GestureClassifier(GestureNet(category_count, options.input_size)), 0.0,
                         0.0, {}, {}, {}};
  out.validation_indices.assign(order.begin(), order.begin() + static_cast<long>(n_val));
  out.test_indices.assign(order.begin() + static_cast<long>(n_val),
                          order.begin() + static_cast<long>(n_val + n_test));
  out.train_indices.assign(order.begin() + static_cast<long>(n_val + n_test), order.end());

  auto prepared = resize_to(images.to(torch::kFloat32), options.input_size);
  auto label_tensor = torch::tensor(labels, torch::kInt64);

  auto& net = out.classifier.net();
  torch::optim::SGD optimizer(
      net->parameters(),
      torch::optim::SGDOptions(options.learning_rate).momentum(options.momentum));

  Archive best = out.classifier.to_archive();
  double best_f1 = -1.0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    auto train = out.train_indices;
    for (std::size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[rng.index(i)]);
    net->train();
    for (std::size_t start = 0; start < train.size();
         start += static_cast<std::size_t>(options.batch_size)) {
      const auto end = std::min(train.size(), start + static_cast<std::size_t>(options.batch_size));
      std::vector<std::size_t> idx(train.begin() + static_cast<long>(start),
                                   train.begin() + static_cast<long>(end));
      auto x = augment_batch(gather(prepared, idx), options.max_rotation_degrees,
                             options.augment_probability, rng);
      auto y = gather(label_tensor, idx);
      optimizer.zero_grad();
      auto loss = F::cross_entropy(net->forward(x), y);
      loss.backward();
      optimizer.step();
    }
    const auto& score_set = out.validation_indices.empty() ? out.train_indices : out.validation_indices;
    const double f1 = f1_on(out.classifier, prepared, labels, score_set);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = out.classifier.to_archive();
    }
  }
  restore_module(best, "classifier", *net);
  net->eval();
  out.validation_f1 = f1_on(out.classifier, prepared, labels, out.validation_indices);
  out.test_f1 = f1_on(out.classifier, prepared, labels, out.test_indices);
  return out;
}

}  // namespace deltagan
