#include "deltagan/evaluation.hpp"

#include <cmath>
#include <limits>

#include "deltagan/error.hpp"
#include "deltagan/image_io.hpp"

namespace deltagan {

EvalReport evaluate(Generator& generator, const DatasetIndex& index, SampleLoader& loader,
                    const std::vector<SamplePair>& pairs, FeatureExtractor& fid_features, GestureClassifier* classifier,
                    const EvalOptions& options) {
  if (pairs.empty()) throw Error(ErrorKind::EmptyDataset, "no pairs to evaluate");
  torch::NoGradGuard no_grad;
  generator->eval();

  EvalReport report;
  report.fid_mode = options.fid_mode;
  report.pairs = pairs.size();
  std::vector<torch::Tensor> generated;
  std::vector<torch::Tensor> real;
  std::vector<std::int64_t> truth;
  std::vector<double> psnrs;
  double mse_sum = 0.0;
  for (const auto& p : pairs) {
    const auto s = loader.load(p);
    const auto out = generator
                         ->generate_with_rolling(s.source.unsqueeze(0), s.target_map.unsqueeze(0),
                                                 torch::tensor({s.target_category}, torch::kInt64),
                                                 options.rolling)
                         .final_output();
    const auto fake = out.composite[0];
    const double m = mse(to_intensity(fake), to_intensity(s.target));
    const double db = psnr_from_mse(m);
    mse_sum += m;
    psnrs.push_back(db);
    generated.push_back(fake);
    real.push_back(s.target);
    truth.push_back(s.target_category);
    if (options.per_pair) {
      report.per_pair.push_back({index.records[p.source].stem, index.records[p.target].stem, m, db});
    }
  }
  report.mse = mse_sum / static_cast<double>(pairs.size());
  const auto summary = summarize_psnr(psnrs);
  report.psnr = summary.finite > 0 ? summary.mean_db : std::numeric_limits<double>::infinity();
  report.psnr_infinite = summary.infinite;

  const auto fakes = torch::stack(generated);
  const auto reals = torch::stack(real);
  if (pairs.size() >= 2) {
    auto features = [&](const torch::Tensor& images) {
      return fid_features.extract(normalize_for_fid((images + 1.0) / 2.0, options.fid_mode));
    };
    report.fid = fid(features(fakes), features(reals));
  } else {
    report.fid = std::numeric_limits<double>::quiet_NaN();
  }

  if (classifier != nullptr) {
    report.is_mean = inception_score(classifier->probabilities(fakes));
    const auto predicted = classifier->predict(fakes);
    report.f1 = weighted_f1(predicted, truth);
  } else {
    report.is_mean = std::numeric_limits<double>::quiet_NaN();
    report.f1 = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

}  // namespace deltagan
