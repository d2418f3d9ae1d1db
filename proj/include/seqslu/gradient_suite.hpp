#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "seqslu/grad_check.hpp"
#include "seqslu/models.hpp"

namespace seqslu {

// Small enough for finite differences over every stage kind.
ModelConfig tiny_model_config();

struct GradientCase {
  std::string name;
  uint64_t seed = 0;
  GradReport report;
};

// Every layer, the window sums, CTC, and all stage kinds in both feedback
// modes.
std::vector<std::string> gradient_case_names();
GradientCase run_gradient_case(const std::string& name, uint64_t seed);
std::vector<GradientCase> run_gradient_suite(int n_seeds, uint64_t base_seed,
                                             const std::function<void(const GradientCase&)>& on_case = {});

}  // namespace seqslu
