#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cala/config.hpp"
#include "cala/gradcheck.hpp"
#include "cala/metrics.hpp"
#include "cala/trainer.hpp"

namespace cala {

struct SynthSummary {
  std::size_t n_train = 0;
  std::size_t n_val = 0;
};

/// Writes <data_dir>/train.jsonl and <data_dir>/val.jsonl.
SynthSummary cmd_synth(const RunConfig& cfg);

/// Trains on <data_dir>/train.jsonl, appends one JSON line per epoch to
/// cfg.train_log and writes cfg.checkpoint.
std::vector<EpochLog> cmd_train(const RunConfig& cfg);

/// Loads cfg.checkpoint, ranks <data_dir>/val.jsonl and writes
/// <report>.json and <report>.txt. Returned values are percentages.
MetricReport cmd_eval(const RunConfig& cfg);

/// Gradient check at d=8, B=3 with at most two compositor layers.
GradcheckReport cmd_gradcheck(const RunConfig& cfg, const GradcheckOptions& opts = {});

/// Configuration cmd_gradcheck actually runs with.
RunConfig gradcheck_config(const RunConfig& cfg);

}  // namespace cala
