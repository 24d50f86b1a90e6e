#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cala/data.hpp"
#include "cala/model.hpp"

namespace cala {

struct GradcheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  double denominator_floor = 1e-8;
  /// Test hook: perturb the analytic gradient of this parameter group.
  std::optional<std::string> corrupt_group;
};

struct GroupCheck {
  std::string name;
  bool frozen = false;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<GroupCheck> groups;
  bool passed = true;
  double seconds = 0.0;

  std::string format() const;
};

/// Relative error used by the check: |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor);

/// Compares every trainable parameter's gradient of the joint loss on `batch`
/// against central finite differences. Frozen groups are skipped.
GradcheckReport check_gradients(CalaModel& model, const std::vector<TripletRecord>& batch,
                                const GradcheckOptions& opts = {});

}  // namespace cala
