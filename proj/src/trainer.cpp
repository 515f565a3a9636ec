#include "deltagan/trainer.hpp"

#include <cmath>
#include <fstream>

#include "deltagan/error.hpp"
#include "deltagan/image_io.hpp"
#include "deltagan/metrics.hpp"

namespace deltagan {

namespace fs = std::filesystem;

namespace {

Generator seeded_generator(Rng& rng, const GeneratorConfig& config) {
  rng.seed_torch();
  return Generator(config);
}

torch::optim::AdamOptions adam_options(const TrainConfig& c) {
  return torch::optim::AdamOptions(c.learning_rate).betas({c.beta1, c.beta2});
}

void set_lr(torch::optim::Optimizer& opt, double lr) {
  for (auto& group : opt.param_groups()) {
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  }
}

double scalar(const torch::Tensor& t) { return t.detach().to(torch::kFloat64).item<double>(); }

void store_optimizer(Archive& a, const std::string& prefix, const torch::nn::Module& module,
                     const torch::optim::Adam& opt) {
  const auto& state = opt.state();
  for (const auto& item : module.named_parameters(true)) {
    auto it = state.find(item.value().unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
    const auto base = prefix + "/" + item.key();
    a.arrays[base + "/exp_avg"] = s.exp_avg().detach().clone();
    a.arrays[base + "/exp_avg_sq"] = s.exp_avg_sq().detach().clone();
    a.arrays[base + "/step"] = torch::tensor({s.step()}, torch::kInt64);
  }
}

void restore_optimizer(const Archive& a, const std::string& prefix,
                       const torch::nn::Module& module, torch::optim::Adam& opt) {
  auto& state = opt.state();
  for (const auto& item : module.named_parameters(true)) {
    const auto base = prefix + "/" + item.key();
    auto m = a.arrays.find(base + "/exp_avg");
    auto v = a.arrays.find(base + "/exp_avg_sq");
    auto step = a.arrays.find(base + "/step");
    if (m == a.arrays.end() || v == a.arrays.end() || step == a.arrays.end()) continue;
    auto s = std::make_unique<torch::optim::AdamParamState>();
    s->exp_avg(m->second.clone());
    s->exp_avg_sq(v->second.clone());
    s->step(step->second.item<int64_t>());
    state[item.value().unsafeGetTensorImpl()] = std::move(s);
  }
}

std::string adversarial_name(AdversarialMode m) { return m == AdversarialMode::Bce ? "bce" : "wgan-gp"; }

}  // namespace

void TrainConfig::validate() const {
  if (batch_size <= 0) throw Error(ErrorKind::InvalidShape, "batch size must be positive");
  if (epochs <= 0) throw Error(ErrorKind::InvalidEpoch, "epoch count must be positive");
  if (decay_epochs < 0 || decay_epochs > epochs) {
    throw Error(ErrorKind::InvalidEpoch, "decay span must lie within the total epoch count");
  }
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidShape, "learning rate must be > 0");
  weights.validate();
}

double lr_at(const TrainConfig& c, int epoch) {
  if (epoch < 0 || epoch > c.epochs) {
    throw Error(ErrorKind::InvalidEpoch,
                "epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(c.epochs) + "]");
  }
  if (epoch == c.epochs) return 0.0;
  const int constant = c.epochs - c.decay_epochs;
  if (epoch < constant) return c.learning_rate;
  return c.learning_rate * static_cast<double>(c.epochs - epoch) / c.decay_epochs;
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["epochs"] = c.epochs;
  j["decay_epochs"] = c.decay_epochs;
  j["rolling"] = c.rolling;
  j["augment"] = c.augment;
  j["weights"] = {{"d", c.weights.d},     {"g", c.weights.g},     {"cls", c.weights.cls},
                  {"rec", c.weights.rec}, {"idt", c.weights.idt}, {"cyc", c.weights.cyc},
                  {"tv", c.weights.tv},   {"gp", c.weights.gp}};
  j["adversarial"] = adversarial_name(c.adversarial);
  j["seed"] = c.seed;
  j["buffer_capacity"] = c.buffer_capacity;
  j["validation_fraction"] = c.validation_fraction;
  j["map_type"] = to_string(c.map_type);
  if (c.max_steps_per_epoch) j["max_steps_per_epoch"] = *c.max_steps_per_epoch;
  return j;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epochs = j.value("epochs", c.epochs);
    c.decay_epochs = j.value("decay_epochs", c.decay_epochs);
    c.rolling = j.value("rolling", c.rolling);
    c.augment = j.value("augment", c.augment);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      c.weights.d = w.value("d", c.weights.d);
      c.weights.g = w.value("g", c.weights.g);
      c.weights.cls = w.value("cls", c.weights.cls);
      c.weights.rec = w.value("rec", c.weights.rec);
      c.weights.idt = w.value("idt", c.weights.idt);
      c.weights.cyc = w.value("cyc", c.weights.cyc);
      c.weights.tv = w.value("tv", c.weights.tv);
      c.weights.gp = w.value("gp", c.weights.gp);
    }
    if (j.contains("adversarial")) {
      const auto name = j.at("adversarial").get<std::string>();
      if (name == "bce") {
        c.adversarial = AdversarialMode::Bce;
      } else if (name == "wgan-gp") {
        c.adversarial = AdversarialMode::WganGp;
      } else {
        throw Error(ErrorKind::InvalidShape, "unknown adversarial mode '" + name + "'");
      }
    }
    c.seed = j.value("seed", c.seed);
    c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    if (j.contains("map_type")) c.map_type = parse_map_type(j.at("map_type").get<std::string>());
    if (j.contains("max_steps_per_epoch")) {
      c.max_steps_per_epoch = j.at("max_steps_per_epoch").get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidShape, std::string("train config: ") + e.what());
  }
  return c;
}

GeneratorConfig scaled_generator_config(int height, int width, int category_count,
                                        int width_divisor) {
  if (width_divisor < 1) throw Error(ErrorKind::InvalidShape, "width divisor must be >= 1");
  auto scale = [&](int w) { return std::max(1, w / width_divisor); };
  GeneratorConfig c;
  c.height = height;
  c.width = width;
  c.category_count = category_count;
  for (auto& w : c.source_widths) w = scale(w);
  for (auto& w : c.condition_widths) w = scale(w);
  c.trunk_width = scale(c.trunk_width);
  for (auto& w : c.decoder_widths) w = scale(w);
  return c;
}

DiscriminatorConfig scaled_discriminator_config(int height, int width, int category_count,
                                                int width_divisor) {
  if (width_divisor < 1) throw Error(ErrorKind::InvalidShape, "width divisor must be >= 1");
  DiscriminatorConfig c;
  c.height = height;
  c.width = width;
  c.category_count = category_count;
  for (auto& w : c.widths) w = std::max(1, w / width_divisor);
  return c;
}

Trainer::Trainer(const TrainConfig& config, const GeneratorConfig& generator,
                 const DiscriminatorConfig& discriminator)
    : config_(config),
      rng_(config.seed),
      generator_(seeded_generator(rng_, generator)),
      discriminator_(discriminator),
      buffer_(config.buffer_capacity),
      current_lr_(config.learning_rate) {
  config_.validate();
  if (generator.category_count != discriminator.category_count) {
    throw Error(ErrorKind::ShapeMismatch, "generator and discriminator disagree on n_c");
  }
  if (generator.height != discriminator.height || generator.width != discriminator.width) {
    throw Error(ErrorKind::ShapeMismatch, "generator and discriminator resolutions differ");
  }
  generator_optimizer_ =
      std::make_unique<torch::optim::Adam>(generator_->parameters(), adam_options(config_));
  discriminator_optimizer_ =
      std::make_unique<torch::optim::Adam>(discriminator_->parameters(), adam_options(config_));
}

void Trainer::set_learning_rate(double lr) {
  current_lr_ = lr;
  set_lr(*generator_optimizer_, lr);
  set_lr(*discriminator_optimizer_, lr);
}

GeneratorOutput Trainer::run_generator(const torch::Tensor& image, const torch::Tensor& condition) {
  ++generator_forwards_;
  return generator_->forward(image, condition);
}

torch::Tensor Trainer::gradient_norms(const torch::Tensor& real, const torch::Tensor& fake,
                                      const torch::Tensor& maps) {
  auto alpha = torch::rand({real.size(0), 1, 1, 1}, real.options());
  auto mixed = (alpha * real + (1 - alpha) * fake).detach().requires_grad_(true);
  auto logits = discriminator_->forward(mixed, maps).patch_logits;
  auto grads = torch::autograd::grad({logits.sum()}, {mixed}, {}, true, true)[0];
  return grads.flatten(1).norm(2, 1);
}

LossReport Trainer::train_step(const Batch& batch) {
  const auto& w = config_.weights;
  const int n_c = generator_->config().category_count;
  const auto b = batch.size();
  generator_->train();
  discriminator_->train();
  generator_forwards_ = 0;

  // Forward translation and identity share one batched call; instance
  // normalisation keeps the two halves independent.
  auto first = run_generator(
      torch::cat({batch.source, batch.source}),
      assemble_condition(torch::cat({batch.target_map, batch.source_map}),
                         torch::cat({batch.target_category, batch.source_category}), n_c));
  GeneratorOutput forward{first.proposal.slice(0, 0, b), first.mask.slice(0, 0, b),
                          first.composite.slice(0, 0, b)};
  GeneratorOutput identity{first.proposal.slice(0, b), first.mask.slice(0, b),
                           first.composite.slice(0, b)};
  if (config_.rolling) {
    forward = run_generator(batch.source,
                            assemble_condition(batch.target_map, batch.target_category, n_c,
                                               forward.composite.detach()));
  }
  const auto fake = forward.composite;

  LossReport report;
  auto& terms = report.terms;

  // Discriminator update on real targets and replayed fakes.
  discriminator_optimizer_->zero_grad();
  auto real_out = discriminator_->forward(batch.target, batch.target_map);
  auto replay = buffer_.query(torch::cat({fake.detach(), batch.target_map}, 1), rng_);
  auto replay_out =
      discriminator_->forward(replay.slice(1, 0, 3).contiguous(), replay.slice(1, 3).contiguous());
  auto cls_real = category_ce(real_out.category_logits, batch.target_category);
  torch::Tensor loss_d;
  if (config_.adversarial == AdversarialMode::Bce) {
    auto gan_d = gan_loss(real_out.patch_logits, replay_out.patch_logits, GanSide::Discriminator);
    loss_d = w.d * gan_d + w.cls * cls_real;
    terms.gan_d = scalar(gan_d);
  } else {
    auto norms = gradient_norms(batch.target, fake.detach(), batch.target_map);
    auto critic = wgan_gp(real_out.patch_logits, replay_out.patch_logits, norms);
    auto gan_d = -critic.wgan;
    loss_d = w.d * gan_d + w.cls * cls_real + w.gp * critic.gp;
    terms.gan_d = scalar(gan_d);
    report.gp = scalar(critic.gp);
  }
  terms.cls_real = scalar(cls_real);
  loss_d.backward();
  discriminator_optimizer_->step();

  // Generator update.
  generator_optimizer_->zero_grad();
  auto fake_out = discriminator_->forward(fake, batch.target_map);
  auto gan_g = config_.adversarial == AdversarialMode::Bce
                   ? gan_loss({}, fake_out.patch_logits, GanSide::Generator)
                   : -fake_out.patch_logits.mean();
  auto cls_fake = category_ce(fake_out.category_logits, batch.target_category);
  auto rec = l1_reconstruction(fake, batch.target);
  auto idt = l1_reconstruction(identity.composite, batch.source);
  auto cycle = run_generator(fake, assemble_condition(batch.source_map, batch.source_category, n_c));
  auto cyc = l1_reconstruction(cycle.composite, batch.source);
  auto tv = tv_regularizer(forward.proposal) + tv_regularizer(identity.proposal);
  auto loss_g = w.g * gan_g + w.rec * rec + w.idt * idt + w.cyc * cyc + w.cls * cls_fake + w.tv * tv;
  loss_g.backward();
  generator_optimizer_->step();
  // Gradients the generator loss left on D are discarded before D's next step.
  discriminator_optimizer_->zero_grad();

  terms.gan_g = scalar(gan_g);
  terms.cls_fake = scalar(cls_fake);
  terms.rec = scalar(rec);
  terms.idt = scalar(idt);
  terms.cyc = scalar(cyc);
  terms.tv = scalar(tv);
  std::tie(report.total_d, report.total_g) = total_losses(terms, w);
  if (report.gp) report.total_d += w.gp * *report.gp;
  last_generator_forwards_ = generator_forwards_;
  return report;
}

Archive Trainer::to_archive(int epoch) const {
  Archive a;
  a.meta["format"] = "deltagan-checkpoint";
  a.meta["epoch"] = epoch;
  a.meta["generator"] = to_json(generator_->config());
  a.meta["discriminator"] = to_json(discriminator_->config());
  a.meta["train"] = to_json(config_);
  auto names = nlohmann::ordered_json::array();
  for (const auto& n : category_names_) names.push_back(n);
  a.meta["category_names"] = names;
  store_module(a, "generator", *generator_);
  store_module(a, "discriminator", *discriminator_);
  store_optimizer(a, "optim/generator", *generator_, *generator_optimizer_);
  store_optimizer(a, "optim/discriminator", *discriminator_, *discriminator_optimizer_);
  return a;
}

void Trainer::resume(const Archive& archive) {
  if (!archive.meta.contains("epoch")) throw Error(ErrorKind::InvalidCheckpoint, "no epoch stored");
  if (generator_config_from_json(archive.meta.at("generator")) != generator_->config() ||
      discriminator_config_from_json(archive.meta.at("discriminator")) !=
          discriminator_->config()) {
    throw Error(ErrorKind::InvalidCheckpoint, "checkpoint was trained with another architecture");
  }
  restore_module(archive, "generator", *generator_);
  restore_module(archive, "discriminator", *discriminator_);
  restore_optimizer(archive, "optim/generator", *generator_, *generator_optimizer_);
  restore_optimizer(archive, "optim/discriminator", *discriminator_, *discriminator_optimizer_);
  if (archive.meta.contains("category_names")) {
    category_names_.clear();
    for (const auto& n : archive.meta.at("category_names")) {
      category_names_.push_back(n.get<std::string>());
    }
  }
  start_epoch_ = archive.meta.at("epoch").get<int>() + 1;
  set_learning_rate(lr_at(config_, std::min(start_epoch_, config_.epochs)));
}

double validation_psnr(Generator& generator, SampleLoader& loader,
                       const std::vector<SamplePair>& pairs, bool rolling) {
  torch::NoGradGuard no_grad;
  generator->eval();
  std::vector<double> scores;
  for (const auto& p : pairs) {
    auto s = loader.load(p);
    auto out = generator->generate_with_rolling(
        s.source.unsqueeze(0), s.target_map.unsqueeze(0),
        torch::tensor({s.target_category}, torch::kInt64), rolling);
    scores.push_back(psnr(to_intensity(out.final_output().composite[0]), to_intensity(s.target)));
  }
  generator->train();
  return summarize_psnr(scores).mean_db;
}

FitResult Trainer::fit(const DatasetIndex& index, const std::vector<SamplePair>& train_pairs,
                       const fs::path& out_dir) {
  if (train_pairs.empty()) throw Error(ErrorKind::EmptyDataset, "no training pairs");
  const auto& gc = generator_->config();
  SampleLoader loader(index, config_.map_type, gc.height, gc.width);

  // Validation slice drawn from a stream derived from the run seed so it is
  // stable across resumes.
  std::vector<SamplePair> train = train_pairs;
  std::vector<SamplePair> validation;
  {
    Rng holdout(config_.seed ^ 0x9e3779b97f4a7c15ULL);
    for (std::size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[holdout.index(i)]);
    std::size_t n_val = 0;
    if (train.size() >= 2) {
      n_val = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(config_.validation_fraction * train.size())));
      n_val = std::min(n_val, train.size() - 1);
    }
    validation.assign(train.end() - static_cast<long>(n_val), train.end());
    train.resize(train.size() - n_val);
    if (validation.empty()) validation = train;
  }

  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "losses.jsonl", std::ios::app);
  FitResult result;
  result.best_validation_psnr = -std::numeric_limits<double>::infinity();
  const auto best_path = out_dir / "best.ckpt";
  if (fs::exists(best_path)) {
    const auto prior = load_archive(best_path);
    if (prior.meta.contains("validation_psnr")) {
      result.best_validation_psnr = prior.meta.at("validation_psnr").get<double>();
    }
  }

  for (int epoch = start_epoch_; epoch < config_.epochs; ++epoch) {
    set_learning_rate(lr_at(config_, epoch));
    for (std::size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[rng_.index(i)]);
    std::size_t step_in_epoch = 0;
    for (std::size_t start = 0; start < train.size();
         start += static_cast<std::size_t>(config_.batch_size)) {
      if (config_.max_steps_per_epoch && step_in_epoch >= *config_.max_steps_per_epoch) break;
      const auto end = std::min(train.size(), start + static_cast<std::size_t>(config_.batch_size));
      std::vector<Sample> samples;
      for (auto i = start; i < end; ++i) {
        auto s = loader.load(train[i]);
        samples.push_back(config_.augment ? augment(s, rng_) : s);
      }
      const auto report = train_step(collate(samples));
      auto line = nlohmann::ordered_json::parse(report.to_json());
      line["epoch"] = epoch;
      line["step"] = result.steps;
      line["lr"] = current_lr_;
      log << line.dump() << "\n";
      ++result.steps;
      ++step_in_epoch;
    }
    log.flush();

    const double score = validation_psnr(generator_, loader, validation, config_.rolling);
    auto archive = to_archive(epoch);
    archive.meta["validation_psnr"] = std::isfinite(score) ? score : 1e9;
    char name[32];
    std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch + 1);
    const auto bytes = encode_archive(archive);
    write_file(out_dir / name, bytes);
    result.epoch_checkpoints.push_back(out_dir / name);
    if (score > result.best_validation_psnr || !fs::exists(best_path)) {
      result.best_validation_psnr = score;
      write_file(best_path, bytes);
    }
    result.last_epoch = epoch;
    start_epoch_ = epoch + 1;
  }
  result.best_checkpoint = best_path;
  return result;
}

}  // namespace deltagan
