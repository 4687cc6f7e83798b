#include "mecsched/env.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace mecsched {

void EnvParams::validate() const {
    if (capacity < 1) throw std::invalid_argument("capacity must be >= 1");
    if (buffer_size < 1) throw std::invalid_argument("buffer_size must be >= 1");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    if (expiry_weight < 0.0) throw std::invalid_argument("sigma must be non-negative");
    if (training_demand < 1 || training_demand > capacity) {
        throw std::invalid_argument("training_demand must lie in [1, capacity]");
    }
}

int SystemState::occupied() const {
    return static_cast<int>(std::count_if(buffer.begin(), buffer.end(),
                                          [](const auto& slot) { return slot.has_value(); }));
}

double delay_penalty(int waited, int deadline) {
    const double w = waited;
    const double t = deadline;
    if (w < t / 2.0) return 1.0;
    if (w < t) return 2.0 * (1.0 - w / t);
    return 0.0;
}

int deadline_count(const SystemState& state, Action action) {
    int count = 0;
    for (std::size_t j = 0; j < state.buffer.size(); ++j) {
        const auto& job = state.buffer[j];
        if (!job || job->demand <= 0) continue;
        if (!action.is_void() && static_cast<std::size_t>(action.index()) == j) continue;
        if (job->waited + 1 > job->deadline) ++count;
    }
    return count;
}

std::optional<int> earliest_fit(std::span<const int> grid, int duration, int demand, int capacity) {
    const int horizon = static_cast<int>(grid.size());
    if (duration < 1 || duration > horizon || demand > capacity) return std::nullopt;
    // run = number of consecutive slots ending at m with room for `demand`
    int run = 0;
    for (int m = 0; m < horizon; ++m) {
        run = (grid[static_cast<std::size_t>(m)] + demand <= capacity) ? run + 1 : 0;
        if (run == duration) return m - duration + 1;
    }
    return std::nullopt;
}

std::optional<int> placement(const SystemState& state, Action action, const EnvParams& params) {
    if (action.is_void()) return std::nullopt;
    const int index = action.index();
    if (index < 0 || index >= static_cast<int>(state.buffer.size())) {
        throw std::out_of_range("action index " + std::to_string(index) + " outside buffer");
    }
    const auto& job = state.buffer[static_cast<std::size_t>(index)];
    if (!job) return std::nullopt;
    return earliest_fit(state.grid, job->exec_time, job->demand, params.capacity);
}

double reward(const SystemState& state, Action action, const EnvParams& params) {
    const double penalty = params.expiry_weight * deadline_count(state, action);
    if (!is_valid(state, action, params)) return -penalty;
    const Job& job = *state.buffer[static_cast<std::size_t>(action.index())];
    const double weight = params.scale_reward ? static_cast<double>(job.exec_time) / params.capacity
                                              : static_cast<double>(job.exec_time);
    return weight * delay_penalty(job.waited, job.deadline) - penalty;
}

SystemState schedule_job(const SystemState& state, int index, const EnvParams& params) {
    const auto start = placement(state, Action::slot(index), params);
    if (!start) throw std::logic_error("schedule_job called with an invalid action");
    SystemState next = state;
    auto& slot = next.buffer[static_cast<std::size_t>(index)];
    for (int m = *start; m < *start + slot->exec_time; ++m) {
        next.grid[static_cast<std::size_t>(m)] += slot->demand;
    }
    slot.reset();
    return next;
}

std::optional<SystemState> insert_training_job(const SystemState& state, int demand,
                                               const EnvParams& params) {
    const auto slot = earliest_fit(state.grid, 1, demand, params.capacity);
    if (!slot) return std::nullopt;
    SystemState next = state;
    next.grid[static_cast<std::size_t>(*slot)] += demand;
    return next;
}

AdvanceResult advance(const SystemState& state, std::span<const Job> arrivals,
                      const EnvParams& params) {
    (void)params;
    AdvanceResult result{state, 0, 0};
    auto& grid = result.state.grid;
    std::shift_left(grid.begin(), grid.end(), 1);
    grid.back() = 0;

    for (auto& slot : result.state.buffer) {
        if (!slot) continue;
        ++slot->waited;
        if (slot->waited > slot->deadline) {
            slot.reset();
            ++result.discarded;
        }
    }

    auto free_slot = result.state.buffer.begin();
    for (const Job& job : arrivals) {
        free_slot = std::find_if(free_slot, result.state.buffer.end(),
                                 [](const auto& slot) { return !slot.has_value(); });
        if (free_slot == result.state.buffer.end()) {
            ++result.rejected;
            continue;
        }
        *free_slot = job;
        (*free_slot)->waited = 0;
    }
    return result;
}

StepResult step(const SystemState& state, Action action, std::span<const Job> arrivals,
                const EnvParams& params) {
    StepResult result;
    result.reward = reward(state, action, params);
    result.info.valid = is_valid(state, action, params);

    const SystemState* current = &state;
    SystemState scheduled;
    if (result.info.valid) {
        const Job& job = *state.buffer[static_cast<std::size_t>(action.index())];
        result.info.served = true;
        result.info.satisfaction = delay_penalty(job.waited, job.deadline);
        scheduled = schedule_job(state, action.index(), params);
        current = &scheduled;
    }

    AdvanceResult advanced = advance(*current, arrivals, params);
    result.next = std::move(advanced.state);
    result.info.discarded = advanced.discarded;
    result.info.rejected = advanced.rejected;
    result.info.admitted = static_cast<int>(arrivals.size()) - advanced.rejected;
    return result;
}

MecEnvironment::MecEnvironment(EnvParams params) : params_(params), state_(params_) {
    params_.validate();
}

void MecEnvironment::reset() {
    state_ = SystemState(params_);
    generated_ = served_ = discarded_ = rejected_ = 0;
}

void MecEnvironment::apply_training_state(SystemState training_state) {
    state_ = std::move(training_state);
}

StepResult MecEnvironment::step(Action action, std::span<const Job> arrivals) {
    StepResult result = mecsched::step(state_, action, arrivals, params_);
    state_ = result.next;
    generated_ += static_cast<long>(arrivals.size());
    served_ += result.info.served ? 1 : 0;
    discarded_ += result.info.discarded;
    rejected_ += result.info.rejected;
    return result;
}

}  // namespace mecsched
