// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 1).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "deltagan/condmap.hpp"
#include "deltagan/datapipe.hpp"
#include "deltagan/discriminator.hpp"
#include "deltagan/error.hpp"
#include "deltagan/generator.hpp"
#include "deltagan/image_io.hpp"
#include "deltagan/losses.hpp"
#include "deltagan/metrics.hpp"
#include "deltagan/trainer.hpp"
#include "synthetic.hpp"

using namespace deltagan;

namespace {

// Tolerances and budgets.
constexpr double kRasterBudgetS = 5.0;
constexpr double kTvBudgetS = 10.0;
constexpr double kOverfitBudgetS = 600.0;
constexpr double kLossTol = 1e-9;
constexpr double kTvGradRelTol = 1e-4;
constexpr double kTvStep = 1e-3;
constexpr double kPsnrTol = 1e-3;
constexpr double kFidTol = 1e-6;
constexpr double kIsTol = 1e-6;
constexpr double kOverfitRecDrop = 5.0;
constexpr double kOverfitPsnrDb = 20.0;

// Overfit run: 8 pairs, 64x64, batch 4, 300 steps, default loss weights.
// Layer widths are divided by this factor to fit the CPU budget.
constexpr int kOverfitWidthDivisor = 2;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void criterion(const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_s > 0 && s > budget_s) {
    o.pass = false;
    o.detail += " [over budget " + std::to_string(budget_s) + " s]";
  }
  if (!o.pass) ++g_failures;
  std::printf("%s  %-28s %8.2fs  %s\n", o.pass ? "PASS" : "FAIL", name, s, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Rasterizer oracle in exact integer arithmetic on a quarter-pixel grid.

using i64 = std::int64_t;

struct QPoint {
  i64 x, y;  // coordinates times 4
};

i64 cross(QPoint a, QPoint b, QPoint p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x); }

bool near_segment(QPoint p, QPoint a, QPoint b, i64 r) {
  const i64 dx = b.x - a.x, dy = b.y - a.y;
  const i64 px = p.x - a.x, py = p.y - a.y;
  const i64 len2 = dx * dx + dy * dy;
  const i64 dot = px * dx + py * dy;
  if (dot <= 0) return px * px + py * py <= r * r;
  if (dot >= len2) {
    const i64 qx = p.x - b.x, qy = p.y - b.y;
    return qx * qx + qy * qy <= r * r;
  }
  const i64 c = px * dy - py * dx;
  return c * c <= r * r * len2;
}

std::vector<float> oracle_triangle(const std::array<QPoint, 3>& v, int base, int h, int w) {
  std::vector<float> out(static_cast<std::size_t>(h * w), 0.0f);
  const i64 r = 4 * static_cast<i64>(std::ceil(0.01 * std::max(h, w)));
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const QPoint p{4 * j, 4 * i};
      const i64 c0 = cross(v[0], v[1], p), c1 = cross(v[1], v[2], p), c2 = cross(v[2], v[0], p);
      const bool in = (c0 >= 0 && c1 >= 0 && c2 >= 0) || (c0 <= 0 && c1 <= 0 && c2 <= 0);
      if (!in) continue;
      const bool stripe = near_segment(p, v[static_cast<std::size_t>(base)],
                                       v[static_cast<std::size_t>((base + 1) % 3)], r);
      out[static_cast<std::size_t>(i * w + j)] = stripe ? 0.5f : 1.0f;
    }
  }
  return out;
}

Point to_point(QPoint q) { return {static_cast<double>(q.x) / 4.0, static_cast<double>(q.y) / 4.0}; }

Outcome rasterizer_oracle() {
  constexpr int H = 64, W = 64;
  Rng rng(20240601);
  auto coord = [&] { return static_cast<i64>(rng.index(4 * 80)) - 32; };  // [-8, 72) in quarter px
  int checked = 0, mismatched = 0, flip_failures = 0;
  while (checked < 100) {
    std::array<QPoint, 3> q{};
    for (auto& p : q) p = {coord(), coord()};
    if (cross(q[0], q[1], q[2]) == 0) continue;
    TriangleAnnotation t;
    for (int k = 0; k < 3; ++k) t.vertices[static_cast<std::size_t>(k)] = to_point(q[static_cast<std::size_t>(k)]);
    t.base_edge = static_cast<int>(rng.index(3));
    const auto map = rasterize_triangle(t, H, W);
    if (map.values() != oracle_triangle(q, t.base_edge, H, W)) ++mismatched;
    if (!(rasterize(flip_x(Annotation{t}, W), H, W) == map.flipped_x())) ++flip_failures;
    ++checked;
  }
  // Flip equivariance of the stroke rasterisers on the same grid.
  for (int n = 0; n < 20; ++n) {
    BoundaryAnnotation b;
    for (int k = 0; k < 5; ++k) b.polyline.push_back(to_point({coord(), coord()}));
    SkeletonAnnotation s;
    for (int k = 0; k < 4; ++k) s.keypoints.emplace_back(to_point({coord(), coord()}));
    s.edges = {{0, 1}, {1, 2}, {1, 3}};
    for (const Annotation& a : {Annotation{b}, Annotation{s}}) {
      for (double stroke : {1.0, 2.0, 3.0}) {
        if (!(rasterize(flip_x(a, W), H, W, stroke) == rasterize(a, H, W, stroke).flipped_x())) {
          ++flip_failures;
        }
      }
    }
  }
  return {mismatched == 0 && flip_failures == 0,
          std::to_string(checked) + " triangles, " + std::to_string(mismatched) +
              " oracle mismatches, " + std::to_string(flip_failures) + " flip failures"};
}

// ---------------------------------------------------------------------------

Outcome compositing() {
  torch::manual_seed(11);
  const auto source = torch::rand({2, 3, 16, 16}) * 2 - 1;
  const auto proposal = torch::rand({2, 3, 16, 16}) * 2 - 1;
  const auto mask = torch::rand({2, 1, 16, 16});
  bool ok = torch::equal(composite(torch::ones_like(mask), source, proposal), source) &&
            torch::equal(composite(torch::zeros_like(mask), source, proposal), proposal);

  // Independent elementwise recomposition.
  const auto out = composite(mask, source, proposal).contiguous();
  auto o = out.accessor<float, 4>();
  auto s = source.accessor<float, 4>();
  auto p = proposal.accessor<float, 4>();
  auto m = mask.accessor<float, 4>();
  std::int64_t diff = 0;
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
          const float a = m[b][0][i][j];
          const float expect = a * s[b][c][i][j] + (1.0f - a) * p[b][c][i][j];
          if (expect != o[b][c][i][j]) ++diff;
        }
  ok = ok && diff == 0;

  // The same identities through a generator whose attention head is pinned.
  GeneratorConfig gc = scaled_generator_config(32, 32, 3, 8);
  Generator g(gc);
  g->eval();
  torch::NoGradGuard no_grad;
  auto params = g->named_parameters();
  const auto image = torch::rand({1, 3, 32, 32}) * 2 - 1;
  const auto maps = torch::zeros({1, 1, 32, 32});
  const auto cats = torch::tensor({1}, torch::kInt64);
  params["attention_head.weight"].zero_();
  params["attention_head.bias"].fill_(100.0);
  const auto keep = g->generate(image, maps, cats);
  const bool keep_ok = torch::equal(keep.composite, image);
  params["attention_head.bias"].fill_(-200.0);
  const auto replace = g->generate(image, maps, cats);
  const bool replace_ok = torch::equal(replace.composite, replace.proposal);
  ok = ok && keep_ok && replace_ok;
  return {ok, "elementwise mismatches " + std::to_string(diff) + ", A=1 generator " +
                  (keep_ok ? "exact" : "differs") + ", A=0 generator " +
                  (replace_ok ? "exact" : "differs")};
}

// ---------------------------------------------------------------------------

bool sizes_are(const torch::Tensor& t, std::vector<std::int64_t> expected) {
  return t.sizes().vec() == expected;
}

Outcome shape_suite() {
  torch::NoGradGuard no_grad;
  std::vector<std::string> bad;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };

  for (int size : {256, 64}) {
    GeneratorConfig gc;
    gc.height = gc.width = size;
    gc.category_count = 10;
    Generator g(gc);
    g->eval();
    const int q = size / 4;
    const auto image = torch::zeros({1, 3, size, size});
    expect(sizes_are(g->encode_source(image), {1, 256, q, q}), "E1 " + std::to_string(size));
    expect(sizes_are(g->encode_condition(torch::zeros({1, 11, size, size})), {1, 64, q, q}),
           "E2 stage1 " + std::to_string(size));
    expect(sizes_are(g->encode_condition(torch::zeros({1, 14, size, size})), {1, 64, q, q}),
           "E2 stage2 " + std::to_string(size));
    bool threw = false;
    try {
      g->encode_condition(torch::zeros({1, 9, size, size}));
    } catch (const Error& e) {
      threw = e.kind() == ErrorKind::ShapeMismatch;
    }
    expect(threw, "E2 rejects 9 channels");
    const auto out = g->generate(image, torch::zeros({1, 1, size, size}), torch::tensor({3}, torch::kInt64));
    expect(sizes_are(out.proposal, {1, 3, size, size}), "G_C " + std::to_string(size));
    expect(sizes_are(out.mask, {1, 1, size, size}), "G_A " + std::to_string(size));
    expect(sizes_are(out.composite, {1, 3, size, size}), "composite " + std::to_string(size));
  }
  {
    GeneratorConfig gc;
    gc.height = gc.width = 64;
    Generator g(gc);
    bool threw = false;
    try {
      g->encode_source(torch::zeros({1, 3, 65, 65}));
    } catch (const Error& e) {
      threw = e.kind() == ErrorKind::ShapeMismatch;
    }
    expect(threw, "E1 rejects 65x65");
  }

  struct DCase {
    int size;
    std::int64_t grid;
    std::int64_t patch;
  };
  // Patch grid: 4x4 map through k4 s1 p1 -> 3x3 at 256; 2x2 -> 1x1 at 128.
  for (const DCase c : {DCase{256, 4, 3}, DCase{128, 2, 1}, DCase{64, 1, 2}}) {
    DiscriminatorConfig dc;
    dc.height = dc.width = c.size;
    dc.category_count = 10;
    Discriminator d(dc);
    d->eval();
    const auto image = torch::zeros({1, 3, c.size, c.size});
    const auto maps = torch::zeros({1, 1, c.size, c.size});
    const auto tag = "D " + std::to_string(c.size);
    expect(sizes_are(d->features(image, maps), {1, 2048, c.grid, c.grid}), tag + " backbone");
    const auto out = d->forward(image, maps);
    expect(sizes_are(out.category_logits, {1, 10}), tag + " category head");
    expect(sizes_are(out.patch_logits, {1, 1, c.patch, c.patch}), tag + " patch head");
  }
  {
    bool threw = false;
    try {
      DiscriminatorConfig dc;
      dc.height = dc.width = 96;
      Discriminator d(dc);
    } catch (const Error& e) {
      threw = e.kind() == ErrorKind::ShapeMismatch || e.kind() == ErrorKind::InvalidShape;
    }
    expect(threw, "D rejects 96x96");
  }
  std::string detail = bad.empty() ? "G at 256/64, D at 256/128/64 match" : "mismatch:";
  for (const auto& b : bad) detail += " [" + b + "]";
  return {bad.empty(), detail};
}

// ---------------------------------------------------------------------------

Outcome loss_fixtures() {
  const auto zeros = torch::zeros({2, 1, 3, 3}, torch::kFloat64);
  const double d = gan_loss(zeros, zeros, GanSide::Discriminator).item<double>();
  const double g = gan_loss(zeros, zeros, GanSide::Generator).item<double>();
  const auto img = torch::tensor({0.0, 1.0, 0.0, 1.0}, torch::kFloat64).reshape({2, 2});
  const double tv = tv_regularizer(img).item<double>();
  LossTerms unit;
  unit.gan_d = unit.gan_g = unit.cls_real = unit.cls_fake = 1.0;
  unit.rec = unit.idt = unit.cyc = unit.tv = 1.0;
  const auto [total_d, total_g] = total_losses(unit, LossWeights{});
  const double expect_d = 2.0 * std::log(2.0);
  const double expect_g = std::log(2.0);
  const bool ok = std::abs(d - expect_d) <= kLossTol && std::abs(g - expect_g) <= kLossTol &&
                  tv == 1.0 && std::abs(total_g - 123.00001) <= kLossTol && total_d == 2.0;
  return {ok, fmt("D %.12f", d) + fmt(" G %.12f", g) + fmt(" TV %.17g", tv) +
                  fmt(" total_g %.10f", total_g)};
}

Outcome tv_gradient() {
  torch::manual_seed(5);
  auto x = torch::rand({8, 8}, torch::kFloat64).requires_grad_(true);
  auto loss = tv_regularizer(x);
  const auto grad = torch::autograd::grad({loss}, {x})[0];
  auto base = x.detach().clone();
  auto acc = base.accessor<double, 2>();
  double worst = 0.0;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      const double orig = acc[i][j];
      acc[i][j] = orig + kTvStep;
      const double up = tv_regularizer(base).item<double>();
      acc[i][j] = orig - kTvStep;
      const double down = tv_regularizer(base).item<double>();
      acc[i][j] = orig;
      const double numeric = (up - down) / (2 * kTvStep);
      const double analytic = grad[i][j].item<double>();
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return {worst < kTvGradRelTol, fmt("max relative error %.3e", worst)};
}

// ---------------------------------------------------------------------------

double f1_oracle(const std::vector<std::int64_t>& pred, const std::vector<std::int64_t>& truth) {
  std::map<std::int64_t, int> tp, fp, fn, support;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++support[truth[i]];
    if (pred[i] == truth[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[pred[i]];
      ++fn[truth[i]];
    }
  }
  double total = 0.0;
  for (const auto& [c, n] : support) {
    const double f = 2.0 * tp[c] / (2.0 * tp[c] + fp[c] + fn[c]);
    total += f * n / static_cast<double>(truth.size());
  }
  return total;
}

Outcome metric_oracles() {
  std::vector<std::string> notes;
  bool ok = true;

  const double p = psnr_from_mse(1.0);
  const double p_oracle = 20.0 * std::log10(255.0);
  ok = ok && std::abs(p - 48.1308) <= kPsnrTol && std::abs(p - p_oracle) <= 1e-12;
  notes.push_back(fmt("PSNR(1)=%.4f", p));

  const auto fx = torch::tensor({-1.0, 1.0}, torch::kFloat64).reshape({2, 1});
  const auto fy = torch::tensor({0.0, 2.0}, torch::kFloat64).reshape({2, 1});
  const double f1d = fid(fx, fy);
  ok = ok && std::abs(f1d - 1.0) <= kFidTol;
  notes.push_back(fmt("FID1d=%.9f", f1d));

  torch::manual_seed(3);
  const auto a = torch::randn({40, 6}, torch::kFloat64);
  const auto b = torch::randn({50, 6}, torch::kFloat64) * 1.5 + 0.3;
  const double ab = fid(a, b), ba = fid(b, a), aa = fid(a, a);
  ok = ok && std::abs(ab - ba) <= 1e-8 && aa <= kFidTol;
  notes.push_back(fmt("|sym|=%.1e", std::abs(ab - ba)) + fmt(" self=%.1e", aa));

  const std::vector<std::int64_t> truth{0, 0, 0, 0, 1, 1, 2, 2};
  const std::vector<std::int64_t> pred{0, 0, 0, 0, 1, 2, 2, 1};
  const double f1 = weighted_f1(pred, truth);
  ok = ok && f1 == 0.75 && f1_oracle(pred, truth) == 0.75;
  notes.push_back(fmt("F1=%.17g", f1));

  const auto probs = torch::tensor({1.0, 0.0, 0.0, 1.0}, torch::kFloat64).reshape({2, 2});
  const double is = inception_score(probs);
  ok = ok && std::abs(is - 2.0) <= kIsTol;
  notes.push_back(fmt("IS=%.9f", is));

  std::string detail;
  for (const auto& n : notes) detail += n + " ";
  return {ok, detail};
}

Outcome fid_modes() {
  // 16 fixed images: 8 "real" and 8 "generated" synthetic gestures.
  Rng rng(16);
  std::vector<torch::Tensor> real, fake;
  for (int i = 0; i < 16; ++i) {
    const auto t = testing::random_triangle(rng, 64, 64);
    const auto img = testing::render_gesture(t, i % 5, i % 3, 64, 64);
    (i < 8 ? real : fake).push_back((img + 1.0) / 2.0);
  }
  const auto r = torch::stack(real), f = torch::stack(fake);
  SmallConvExtractor extractor;
  auto score = [&](FidMode mode) {
    return fid(extractor.extract(normalize_for_fid(r, mode)),
               extractor.extract(normalize_for_fid(f, mode)));
  };
  const double correct = score(FidMode::Correct);
  const double legacy = score(FidMode::Legacy);
  return {correct != legacy && std::isfinite(correct) && std::isfinite(legacy),
          fmt("correct %.6f", correct) + fmt(" legacy %.6f", legacy)};
}

// ---------------------------------------------------------------------------

Outcome challenging_split() {
  DatasetIndex index;
  for (int s = 0; s < 10; ++s) {
    for (int k = 0; k < 10; ++k) {
      ImageRecord rec;
      rec.stem = "s" + std::to_string(s) + "_" + std::to_string(k);
      AnnotationRecord a;
      a.image = rec.stem + ".png";
      a.subject = "subject" + std::to_string(s);
      a.category = k % 4;
      TriangleAnnotation t;
      t.vertices = {Point{1, 1}, Point{10, 1}, Point{1, 10}};
      a.triangle = t;
      rec.annotation = a;
      index.records.push_back(rec);
    }
  }
  const auto pairs = build_pairs(index);
  int violations = 0;
  std::size_t min_test = pairs.size(), max_test = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SplitSpec spec;
    spec.mode = SplitMode::Challenging;
    spec.seed = seed;
    spec.test_ratio = 0.2;
    const auto sp = split(pairs, spec);
    std::set<std::size_t> train_targets, test_targets;
    for (const auto& p : sp.train) train_targets.insert(p.target);
    for (const auto& p : sp.test) test_targets.insert(p.target);
    for (auto t : test_targets) violations += static_cast<int>(train_targets.count(t));
    if (sp.train.size() + sp.test.size() != pairs.size()) ++violations;
    min_test = std::min(min_test, sp.test.size());
    max_test = std::max(max_test, sp.test.size());
  }
  return {violations == 0 && min_test > 0,
          std::to_string(pairs.size()) + " pairs, 20 seeds, " + std::to_string(violations) +
              " spanning targets, test sizes " + std::to_string(min_test) + ".." +
              std::to_string(max_test)};
}

// ---------------------------------------------------------------------------

Outcome overfit_smoke() {
  constexpr int kSize = 64, kPairs = 8, kSteps = 300, kCategories = 3;
  const auto samples = testing::synthetic_samples(kPairs, kCategories, kSize, kSize, 77);
  TrainConfig tc;
  tc.batch_size = 4;
  tc.augment = false;
  tc.seed = 77;
  Trainer trainer(tc, scaled_generator_config(kSize, kSize, kCategories, kOverfitWidthDivisor),
                  scaled_discriminator_config(kSize, kSize, kCategories, kOverfitWidthDivisor));
  const std::vector<Batch> batches{
      collate({samples.begin(), samples.begin() + 4}),
      collate({samples.begin() + 4, samples.end()})};
  double first_rec = 0.0, last_rec = 0.0;
  for (int step = 0; step < kSteps; ++step) {
    const auto report = trainer.train_step(batches[static_cast<std::size_t>(step) % 2]);
    if (step == 0) first_rec = *report.terms.rec;
    last_rec = *report.terms.rec;
  }
  // Score the final generator on every training pair.
  auto& g = trainer.generator();
  g->eval();
  torch::NoGradGuard no_grad;
  std::vector<double> scores;
  for (const auto& s : samples) {
    const auto out = g->generate_with_rolling(s.source.unsqueeze(0), s.target_map.unsqueeze(0),
                                              torch::tensor({s.target_category}, torch::kInt64),
                                              true);
    scores.push_back(psnr(to_intensity(out.final_output().composite[0]), to_intensity(s.target)));
  }
  const auto summary = summarize_psnr(scores);
  const double mean_db = summary.finite ? summary.mean_db : std::numeric_limits<double>::infinity();
  const double drop = first_rec / last_rec;
  return {drop >= kOverfitRecDrop && mean_db > kOverfitPsnrDb,
          fmt("rec %.4f", first_rec) + fmt(" -> %.4f", last_rec) + fmt(" (%.1fx),", drop) +
              fmt(" train PSNR %.2f dB", mean_db)};
}

Outcome rolling_ablation() {
  constexpr int kSize = 64;
  const auto samples = testing::synthetic_samples(2, 3, kSize, kSize, 5);
  const auto batch = collate(samples);
  int forwards[2] = {0, 0};
  for (int rolling = 0; rolling < 2; ++rolling) {
    TrainConfig tc;
    tc.rolling = rolling == 1;
    tc.augment = false;
    Trainer trainer(tc, scaled_generator_config(kSize, kSize, 3, 8),
                    scaled_discriminator_config(kSize, kSize, 3, 8));
    trainer.train_step(batch);
    forwards[rolling] = trainer.last_generator_forwards();
  }

  torch::manual_seed(9);
  Generator g(scaled_generator_config(kSize, kSize, 3, 4));
  const auto out = g->generate_with_rolling(batch.source, batch.target_map, batch.target_category);
  const double diff =
      (out.stage1.composite - out.stage2->composite).abs().max().item<double>();
  const auto unused = torch::autograd::grad({out.stage2->composite.sum()}, {out.stage1.composite},
                                            {}, std::nullopt, false, true)[0];
  const bool detached = !unused.defined() || unused.abs().max().item<double>() == 0.0;
  return {forwards[0] == 2 && forwards[1] == 3 && diff > 0.0 && detached,
          "forwards off/on " + std::to_string(forwards[0]) + "/" + std::to_string(forwards[1]) +
              fmt(", stage diff %.3e,", diff) +
              (detached ? " no gradient into rolled image" : " gradient leaks into rolled image")};
}

Outcome lr_schedule() {
  TrainConfig tc;  // 20 epochs, decay over the last 10
  const double at5 = lr_at(tc, 5), at15 = lr_at(tc, 15), at20 = lr_at(tc, 20);
  return {at5 == 2e-4 && std::abs(at15 - 1e-4) <= 1e-18 && at20 == 0.0,
          fmt("lr(5)=%.3g", at5) + fmt(" lr(15)=%.3g", at15) + fmt(" lr(20)=%.3g", at20)};
}

}  // namespace

int main() {
  torch::set_num_threads(1);
  std::printf("acceptance suite\n");
  criterion("rasterizer-oracle", kRasterBudgetS, rasterizer_oracle);
  criterion("compositing", 0, compositing);
  criterion("shape-suite", 0, shape_suite);
  criterion("loss-fixtures", 0, loss_fixtures);
  criterion("tv-gradient", kTvBudgetS, tv_gradient);
  criterion("metric-oracles", 0, metric_oracles);
  criterion("fid-normalization-modes", 0, fid_modes);
  criterion("challenging-split", 0, challenging_split);
  criterion("overfit-smoke", kOverfitBudgetS, overfit_smoke);
  criterion("rolling-ablation", 0, rolling_ablation);
  criterion("lr-schedule", 0, lr_schedule);
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
