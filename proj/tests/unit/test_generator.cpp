#include "doctest_torch.hpp"

#include "deltagan/condmap.hpp"
#include "deltagan/error.hpp"
#include "deltagan/generator.hpp"
#include "deltagan/trainer.hpp"

using namespace deltagan;

namespace {

GeneratorConfig small(int size = 32, int n_c = 4) { return scaled_generator_config(size, size, n_c, 8); }

torch::Tensor cats(std::initializer_list<std::int64_t> v) { return torch::tensor(std::vector<std::int64_t>(v), torch::kInt64); }

}  // namespace

TEST_SUITE("generator") {
  TEST_CASE("config validation") {
    GeneratorConfig c;
    c.height = 30;
    CHECK_THROWS_AS(c.validate(), Error);
    c.height = 32;
    c.category_count = 0;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK(GeneratorConfig{}.condition_channels(false) == 11);
    CHECK(GeneratorConfig{}.condition_channels(true) == 14);
  }

  TEST_CASE("output ranges and shapes on random inputs") {
    torch::manual_seed(1);
    Generator g(small());
    const auto image = torch::rand({2, 3, 32, 32}) * 2 - 1;
    const auto out = g->generate(image, torch::rand({2, 1, 32, 32}), cats({0, 3}));
    CHECK((out.proposal.sizes().vec() == std::vector<std::int64_t>{2, 3, 32, 32}));
    CHECK((out.mask.sizes().vec() == std::vector<std::int64_t>{2, 1, 32, 32}));
    CHECK(out.mask.min().item<float>() >= 0.0f);
    CHECK(out.mask.max().item<float>() <= 1.0f);
    CHECK(out.proposal.abs().max().item<float>() <= 1.0f);
    CHECK(torch::equal(out.composite, composite(out.mask, image, out.proposal)));
  }

  TEST_CASE("spatial size is preserved for any multiple of four") {
    Generator g(small());
    torch::NoGradGuard no_grad;
    for (auto [h, w] : {std::pair{16, 16}, std::pair{24, 40}, std::pair{44, 20}}) {
      const auto out = g->generate(torch::zeros({1, 3, h, w}), torch::zeros({1, 1, h, w}), cats({1}));
      CHECK(out.composite.size(2) == h);
      CHECK(out.composite.size(3) == w);
    }
    CHECK_THROWS_AS(g->generate(torch::zeros({1, 3, 18, 16}), torch::zeros({1, 1, 18, 16}), cats({1})),
                    Error);
  }

  TEST_CASE("parameter count does not depend on resolution") {
    Generator a(small(32)), b(small(64));
    CHECK(a->parameter_count() == b->parameter_count());
    GeneratorConfig full;
    Generator ref(full);
    GeneratorConfig full64 = full;
    full64.height = full64.width = 64;
    Generator ref64(full64);
    CHECK(ref->parameter_count() == ref64->parameter_count());
  }

  TEST_CASE("evaluation mode inference is deterministic") {
    Generator g(small());
    g->eval();
    torch::NoGradGuard no_grad;
    const auto image = torch::rand({1, 3, 32, 32});
    const auto maps = torch::rand({1, 1, 32, 32});
    const auto a = g->generate_with_rolling(image, maps, cats({2})).final_output();
    const auto b = g->generate_with_rolling(image, maps, cats({2})).final_output();
    CHECK(torch::equal(a.composite, b.composite));
    CHECK(torch::equal(a.mask, b.mask));
  }

  TEST_CASE("rolling produces a distinct second stage; disabled rolling only the first") {
    torch::manual_seed(4);
    Generator g(small());
    const auto image = torch::rand({1, 3, 32, 32}) * 2 - 1;
    const auto maps = torch::rand({1, 1, 32, 32});
    const auto on = g->generate_with_rolling(image, maps, cats({1}), true);
    REQUIRE(on.stage2);
    CHECK(on.stage2->composite.sizes() == on.stage1.composite.sizes());
    CHECK((on.stage2->composite - on.stage1.composite).abs().max().item<float>() > 0.0f);
    const auto off = g->generate_with_rolling(image, maps, cats({1}), false);
    CHECK_FALSE(off.stage2);
    CHECK(torch::equal(off.final_output().composite, off.stage1.composite));
  }

  TEST_CASE("stage-two loss sends no gradient into stage-one parameters via the rolled image") {
    torch::manual_seed(6);
    Generator g(small());
    const auto image = torch::rand({1, 3, 32, 32}) * 2 - 1;
    const auto maps = torch::rand({1, 1, 32, 32});
    const auto category = cats({3});

    // Gradient of the stage-two loss with the feedback computed in-graph...
    auto out = g->generate_with_rolling(image, maps, category, true);
    g->zero_grad();
    out.stage2->composite.sum().backward();
    std::vector<torch::Tensor> through;
    for (const auto& p : g->parameters()) through.push_back(p.grad().clone());

    // ...equals the gradient with a constant copy fed back explicitly.
    torch::Tensor rolled;
    {
      torch::NoGradGuard no_grad;
      rolled = g->generate(image, maps, category).composite.clone();
    }
    g->zero_grad();
    g->forward(image, assemble_condition(maps, category, 4, rolled)).composite.sum().backward();
    std::size_t i = 0;
    for (const auto& p : g->parameters()) CHECK(torch::allclose(p.grad(), through[i++], 1e-5, 1e-6));
  }

  TEST_CASE("condition encoder rejects wrong channel counts") {
    Generator g(small(32, 10));
    CHECK((g->encode_condition(torch::zeros({1, 11, 32, 32})).size(1) == 8));
    CHECK((g->encode_condition(torch::zeros({1, 14, 32, 32})).size(1) == 8));
    try {
      g->encode_condition(torch::zeros({1, 9, 32, 32}));
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ShapeMismatch);
    }
  }
}
