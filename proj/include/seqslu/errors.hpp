#pragma once

#include <stdexcept>
#include <string>

namespace seqslu {

// Malformed or missing input data (manifests, WAV files, checkpoints).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf in a forward or backward pass, or a diverged optimizer step.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace seqslu
