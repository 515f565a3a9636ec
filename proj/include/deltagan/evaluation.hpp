#pragma once

#include <vector>

#include "deltagan/classifier.hpp"
#include "deltagan/datapipe.hpp"
#include "deltagan/generator.hpp"
#include "deltagan/metrics.hpp"

namespace deltagan {

struct EvalOptions {
  bool rolling = true;
  FidMode fid_mode = FidMode::Correct;
  bool per_pair = true;
};

/// Generates every pair's target and scores it. FID compares features of
/// generated and real targets; IS and F1 need `classifier` and are NaN
/// without one.
EvalReport evaluate(Generator& generator, const DatasetIndex& index, SampleLoader& loader,
                    const std::vector<SamplePair>& pairs, FeatureExtractor& fid_features, GestureClassifier* classifier,
                    const EvalOptions& options);

}  // namespace deltagan
