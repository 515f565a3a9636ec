#include "doctest_torch.hpp"
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "deltagan/checkpoint.hpp"
#include "deltagan/error.hpp"
#include "deltagan/trainer.hpp"
#include "synthetic.hpp"

using namespace deltagan;

namespace {

constexpr int kSize = 64;
constexpr int kCategories = 3;

Trainer tiny_trainer(TrainConfig tc) {
  return Trainer(tc, scaled_generator_config(kSize, kSize, kCategories, 16),
                 scaled_discriminator_config(kSize, kSize, kCategories, 16));
}

Batch tiny_batch(std::uint64_t seed = 1) {
  return collate(testing::synthetic_samples(2, kCategories, kSize, kSize, seed));
}

std::vector<torch::Tensor> snapshot(torch::nn::Module& m) {
  std::vector<torch::Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p.detach().clone());
  return out;
}

bool unchanged(torch::nn::Module& m, const std::vector<torch::Tensor>& before) {
  std::size_t i = 0;
  for (const auto& p : m.parameters()) {
    if (!torch::equal(p, before[i++])) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("learning-rate schedule") {
    TrainConfig tc;
    CHECK(lr_at(tc, 0) == 2e-4);
    CHECK(lr_at(tc, 5) == 2e-4);
    CHECK(lr_at(tc, 10) == 2e-4);
    CHECK(lr_at(tc, 15) == doctest::Approx(1e-4).epsilon(1e-12));
    CHECK(lr_at(tc, 19) == doctest::Approx(2e-5).epsilon(1e-12));
    CHECK(lr_at(tc, 20) == 0.0);
    for (int bad : {-1, 21}) {
      try {
        lr_at(tc, bad);
        FAIL("expected InvalidEpoch");
      } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidEpoch);
      }
    }
  }

  TEST_CASE("learning rate never increases") {
    for (auto [total, decay] : {std::pair{20, 10}, std::pair{30, 10}, std::pair{7, 7}, std::pair{5, 0}}) {
      TrainConfig tc;
      tc.epochs = total;
      tc.decay_epochs = decay;
      for (int e = 1; e <= total; ++e) CHECK(lr_at(tc, e) <= lr_at(tc, e - 1));
      CHECK(lr_at(tc, total) == 0.0);
    }
  }

  TEST_CASE("decay span must fit in the schedule") {
    TrainConfig tc;
    tc.decay_epochs = 21;
    CHECK_THROWS_AS(tc.validate(), Error);
  }

  TEST_CASE("config JSON round trip") {
    TrainConfig tc;
    tc.epochs = 30;
    tc.rolling = false;
    tc.adversarial = AdversarialMode::WganGp;
    tc.weights.rec = 50;
    tc.map_type = MapType::Skeleton;
    tc.max_steps_per_epoch = 3;
    const auto back = train_config_from_json(nlohmann::json::parse(to_json(tc).dump()));
    CHECK(to_json(back) == to_json(tc));
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"adversarial", "hinge"}}), Error);
  }

  TEST_CASE("generator forward count follows rolling") {
    for (bool rolling : {false, true}) {
      TrainConfig tc;
      tc.rolling = rolling;
      auto t = tiny_trainer(tc);
      t.train_step(tiny_batch());
      CHECK(t.last_generator_forwards() == (rolling ? 3 : 2));
    }
  }

  TEST_CASE("identical seeds give identical reports") {
    TrainConfig tc;
    tc.seed = 42;
    auto a = tiny_trainer(tc);
    auto b = tiny_trainer(tc);
    const auto batch = tiny_batch();
    for (int i = 0; i < 2; ++i) {
      const auto ra = a.train_step(batch);
      const auto rb = b.train_step(batch);
      CHECK(ra == rb);
    }
  }

  TEST_CASE("reports carry every term and consistent totals") {
    auto t = tiny_trainer(TrainConfig{});
    const auto r = t.train_step(tiny_batch());
    const auto [d, g] = total_losses(r.terms, t.config().weights);
    CHECK(r.total_d == doctest::Approx(d).epsilon(1e-9));
    CHECK(r.total_g == doctest::Approx(g).epsilon(1e-9));
  }

  TEST_CASE("generator total reduces to the adversarial term") {
    TrainConfig tc;
    tc.weights.rec = tc.weights.idt = tc.weights.cyc = tc.weights.cls = tc.weights.tv = 0;
    auto t = tiny_trainer(tc);
    const auto r = t.train_step(tiny_batch());
    CHECK(r.total_g == tc.weights.g * *r.terms.gan_g);
  }

  TEST_CASE("zero generator weights leave the generator untouched") {
    TrainConfig tc;
    tc.weights.g = tc.weights.rec = tc.weights.idt = tc.weights.cyc = tc.weights.cls = 0;
    tc.weights.tv = 0;
    auto t = tiny_trainer(tc);
    const auto before = snapshot(*t.generator());
    t.train_step(tiny_batch());
    CHECK(unchanged(*t.generator(), before));
  }

  TEST_CASE("zero discriminator weights leave the discriminator untouched") {
    TrainConfig tc;
    tc.weights.d = tc.weights.cls = 0;
    auto t = tiny_trainer(tc);
    const auto before = snapshot(*t.discriminator());
    t.train_step(tiny_batch());
    CHECK(unchanged(*t.discriminator(), before));
  }

  TEST_CASE("WGAN-GP mode reports a gradient penalty") {
    TrainConfig tc;
    tc.adversarial = AdversarialMode::WganGp;
    auto t = tiny_trainer(tc);
    const auto r = t.train_step(tiny_batch());
    REQUIRE(r.gp);
    CHECK(*r.gp >= 0.0);
    CHECK(std::isfinite(r.total_d));
  }

  TEST_CASE("replay buffer fills from generated batches") {
    TrainConfig tc;
    tc.buffer_capacity = 3;
    auto t = tiny_trainer(tc);
    t.train_step(tiny_batch());
    t.train_step(tiny_batch(2));
    CHECK(t.buffer().size() == 3);
  }

  TEST_CASE("checkpoint restores weights, optimiser state and epoch") {
    TrainConfig tc;
    tc.seed = 3;
    auto a = tiny_trainer(tc);
    a.train_step(tiny_batch());
    const auto archive = decode_archive(encode_archive(a.to_archive(14)));

    TrainConfig other = tc;
    other.seed = 99;
    auto b = tiny_trainer(other);
    b.resume(archive);
    CHECK(b.start_epoch() == 15);
    CHECK(b.learning_rate() == lr_at(tc, 15));
    const auto ga = a.generator()->named_parameters();
    const auto gb = b.generator()->named_parameters();
    for (const auto& item : ga) CHECK(torch::equal(item.value(), gb[item.key()]));
    const auto da = a.discriminator()->named_parameters();
    const auto db = b.discriminator()->named_parameters();
    for (const auto& item : da) CHECK(torch::equal(item.value(), db[item.key()]));
    // Moments come back too.
    const auto ra = a.to_archive(14);
    const auto rb = b.to_archive(14);
    REQUIRE(ra.arrays.size() == rb.arrays.size());
    std::size_t moments = 0;
    for (const auto& [name, t] : ra.arrays) {
      CHECK(torch::equal(t, rb.arrays.at(name)));
      moments += name.rfind("optim/", 0) == 0;
    }
    CHECK(moments > 0);
  }

  TEST_CASE("resume rejects another architecture") {
    auto a = tiny_trainer(TrainConfig{});
    Trainer b(TrainConfig{}, scaled_generator_config(kSize, kSize, kCategories, 8),
              scaled_discriminator_config(kSize, kSize, kCategories, 8));
    CHECK_THROWS_AS(b.resume(a.to_archive(0)), Error);
  }

  TEST_CASE("one epoch on eight pairs writes an epoch checkpoint and the best one") {
    testing::TempDir dir("fit");
    testing::SyntheticSpec spec;
    spec.subjects = 2;
    spec.images_per_group = 4;
    const auto index = testing::write_synthetic_dataset(dir.path() / "data", spec);
    auto pairs = build_pairs(index);
    pairs.resize(8);

    TrainConfig tc;
    tc.epochs = 1;
    tc.decay_epochs = 1;
    auto t = tiny_trainer(tc);
    const auto out = dir.path() / "run";
    const auto result = t.fit(index, pairs, out);
    CHECK(result.epoch_checkpoints.size() == 1);
    std::size_t ckpts = 0;
    for (const auto& e : std::filesystem::directory_iterator(out)) {
      ckpts += e.path().extension() == ".ckpt";
    }
    CHECK(ckpts == 2);
    CHECK(std::filesystem::exists(result.best_checkpoint));
    CHECK(result.steps == 2);  // 7 training pairs after the validation hold-out, batch 4

    std::ifstream log(out / "losses.jsonl");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(log, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j.contains("rec"));
      CHECK(j.contains("lr"));
      ++lines;
    }
    CHECK(lines == result.steps);

    const auto best = load_archive(result.best_checkpoint);
    CHECK(best.meta.at("epoch") == 0);
    auto g = load_generator(best);
    CHECK(g->config() == t.generator()->config());
  }

  TEST_CASE("fit refuses an empty pair list") {
    testing::TempDir dir("empty");
    DatasetIndex index;
    auto t = tiny_trainer(TrainConfig{});
    try {
      t.fit(index, {}, dir.path());
      FAIL("expected EmptyDataset");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::EmptyDataset);
    }
  }
}
