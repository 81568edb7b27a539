#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowcast/trajectory.hpp"

namespace flowcast {

// Generator for paired source/target logs with a plantable failure
// signal. At signal_strength 1 every failing task walks a distinct tool
// and argument motif; at 0 failing tasks are statistically identical to
// successful ones except for which answer their runs converge on, which
// generalizes to nothing.
struct SynthConfig {
  int tasks = 100;
  int runs = 10;         // r
  int budget = 10;       // n
  std::uint64_t seed = 1;
  double signal_strength = 1.0;   // in [0, 1]
  double failure_rate = 0.4;      // fraction of tasks failing on the source
  double rescue_rate = 0.7;       // fraction of failing tasks the target solves
  std::string source_model = "scout-9b";
  std::string target_model = "atlas-70b";
};

struct SynthResult {
  std::vector<TaskRecord> source;
  std::vector<TaskRecord> target;
};

SynthResult synthesize(const SynthConfig& config);

// Pricing JSON covering the two generated model ids.
std::string synth_pricing_json(const SynthConfig& config);

}  // namespace flowcast
