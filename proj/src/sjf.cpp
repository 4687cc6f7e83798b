#include "mecsched/sjf.hpp"

#include <tuple>

namespace mecsched {

Action sjf_select(const SystemState& state, const EnvParams& params) {
    Action best = Action::none();
    std::tuple<int, int> best_key{};
    for (int i = 0; i < static_cast<int>(state.buffer.size()); ++i) {
        const auto& job = state.buffer[static_cast<std::size_t>(i)];
        if (!job || !is_valid(state, Action::slot(i), params)) continue;
        const std::tuple<int, int> key{job->exec_time, job->deadline - job->waited};
        if (best.is_void() || key < best_key) {
            best = Action::slot(i);
            best_key = key;
        }
    }
    return best;
}

}  // namespace mecsched
