#pragma once

#include "mecsched/env.hpp"

namespace mecsched {

/// Shortest Job First over the jobs that can be placed right now.
/// Ties go to the smallest slack (T - w), then to the lowest buffer index.
/// Returns the void action when nothing is schedulable.
Action sjf_select(const SystemState& state, const EnvParams& params);

}  // namespace mecsched
