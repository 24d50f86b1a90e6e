#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cala/data.hpp"
#include "cala/metrics.hpp"
#include "cala/model.hpp"

namespace cala {

/// Mean batch losses over one epoch. Absent terms were not part of the objective.
struct EpochLog {
  std::size_t epoch = 0;  // 0 = before any update
  double qtm = 0.0;
  std::optional<double> tbia;
  std::optional<double> ctr;
  double total = 0.0;

  std::string to_json_line() const;
};

/// Raised when a loss or intermediate turns non-finite during training.
class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

/// Mean losses over the given batches without recording a graph.
EpochLog evaluate_losses(const CalaModel& model, const std::vector<TripletRecord>& records,
                         const std::vector<std::vector<std::size_t>>& batches);

/// Adam on the joint loss for cfg.epochs epochs. Entry 0 of the returned log
/// holds the losses of the first epoch's batches before any update.
std::vector<EpochLog> train(CalaModel& model, const std::vector<TripletRecord>& records,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

/// Retrieval over the records' target images. Every record is one query; the
/// gallery is the set of all targets, identified by record id. Values are
/// fractions in [0, 1].
struct EvalResult {
  std::vector<RankingResult> rankings;
  MetricReport metrics;
};

EvalResult evaluate_retrieval(const CalaModel& model, const std::vector<TripletRecord>& records);

}  // namespace cala
