#include <torch/torch.h>

#include "deltagan/error.hpp"
#include "deltagan/rng.hpp"

namespace deltagan {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateAnnotation: return "DegenerateAnnotation";
    case ErrorKind::InvalidAnnotation: return "InvalidAnnotation";
    case ErrorKind::InvalidCategory: return "InvalidCategory";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidShape: return "InvalidShape";
    case ErrorKind::IncompleteReport: return "IncompleteReport";
    case ErrorKind::MissingAnnotation: return "MissingAnnotation";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::InvalidEpoch: return "InvalidEpoch";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::InvalidDistribution: return "InvalidDistribution";
    case ErrorKind::DegenerateLabels: return "DegenerateLabels";
    case ErrorKind::InvalidCheckpoint: return "InvalidCheckpoint";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

void Rng::seed_torch() { torch::manual_seed(next()); }

}  // namespace deltagan
