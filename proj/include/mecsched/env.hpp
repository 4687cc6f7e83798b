#pragma once

#include <optional>
#include <span>
#include <vector>

namespace mecsched {

/// One computational request waiting in the server buffer.
struct Job {
    int exec_time = 1;  ///< slots of service once started
    int demand = 1;     ///< resource units held while running
    int waited = 0;     ///< slots already spent in the buffer
    int deadline = 1;   ///< maximum tolerated wait

    friend bool operator==(const Job&, const Job&) = default;
};

struct EnvParams {
    int capacity = 20;          ///< C
    int buffer_size = 10;       ///< L
    int horizon = 20;           ///< M
    double expiry_weight = 0.1; ///< sigma
    int training_demand = 20;   ///< c_tr
    bool scale_reward = true;   ///< divide e_a by C in the job term

    int num_actions() const { return buffer_size + 1; }

    /// Throws std::invalid_argument on an inconsistent parameter set.
    void validate() const;
};

/// Either "schedule buffer slot i" or the void action.
class Action {
public:
    static Action none() { return Action{}; }
    static Action slot(int index) { return Action{index}; }

    /// Maps the agent's output index onto an action; index L is void.
    static Action from_output(int output, int buffer_size) {
        return output == buffer_size ? none() : slot(output);
    }

    bool is_void() const { return !slot_.has_value(); }
    int index() const { return slot_.value(); }
    int output_index(int buffer_size) const { return slot_.value_or(buffer_size); }

    friend bool operator==(const Action&, const Action&) = default;

private:
    Action() = default;
    explicit Action(int index) : slot_(index) {}
    std::optional<int> slot_;
};

/// Buffer B (L optional jobs) plus the reservation grid g over the horizon.
struct SystemState {
    std::vector<std::optional<Job>> buffer;
    std::vector<int> grid;

    SystemState() = default;
    explicit SystemState(const EnvParams& params)
        : buffer(static_cast<std::size_t>(params.buffer_size)),
          grid(static_cast<std::size_t>(params.horizon), 0) {}

    int occupied() const;
    friend bool operator==(const SystemState&, const SystemState&) = default;
};

/// Satisfaction of a job that enters service after waiting `waited` slots.
double delay_penalty(int waited, int deadline);

/// Number of buffered jobs whose deadline passes at the end of this slot,
/// excluding the job the action schedules.
int deadline_count(const SystemState& state, Action action);

/// Earliest start offset m such that `demand` fits for `duration` slots,
/// or nullopt if no window in the horizon can host it.
std::optional<int> earliest_fit(std::span<const int> grid, int duration, int demand, int capacity);

/// Start slot for scheduling `action`, or nullopt if the action is invalid.
/// Throws std::out_of_range for an index outside [0, L).
std::optional<int> placement(const SystemState& state, Action action, const EnvParams& params);

inline bool is_valid(const SystemState& state, Action action, const EnvParams& params) {
    return placement(state, action, params).has_value();
}

double reward(const SystemState& state, Action action, const EnvParams& params);

/// Reserves the job at `index` on the grid and empties its buffer slot.
/// Throws std::logic_error if the action is not valid.
SystemState schedule_job(const SystemState& state, int index, const EnvParams& params);

/// Training state s*: `demand` units held for one slot at the earliest slot
/// that can host them. nullopt when no slot in the horizon has room.
std::optional<SystemState> insert_training_job(const SystemState& state, int demand,
                                               const EnvParams& params);

struct AdvanceResult {
    SystemState state;
    int discarded = 0;
    int rejected = 0;
};

/// Ends the slot: shifts the grid, ages buffered jobs, drops expired ones and
/// admits arrivals into the lowest free slots.
AdvanceResult advance(const SystemState& state, std::span<const Job> arrivals,
                      const EnvParams& params);

struct StepInfo {
    bool valid = false;
    bool served = false;
    double satisfaction = 0.0;  ///< delay penalty of the served job
    int discarded = 0;
    int rejected = 0;
    int admitted = 0;
};

struct StepResult {
    SystemState next;
    double reward = 0.0;
    StepInfo info;
};

/// One slot of the MDP. Invalid actions act as the void action.
StepResult step(const SystemState& state, Action action, std::span<const Job> arrivals,
                const EnvParams& params);

/// Environment with running job counters, used by the experiment loop.
class MecEnvironment {
public:
    explicit MecEnvironment(EnvParams params);

    const EnvParams& params() const { return params_; }
    const SystemState& state() const { return state_; }

    void reset();

    /// Replaces the state with a training state produced by insert_training_job.
    void apply_training_state(SystemState training_state);

    StepResult step(Action action, std::span<const Job> arrivals);

    long generated() const { return generated_; }
    long served() const { return served_; }
    long discarded() const { return discarded_; }
    long rejected() const { return rejected_; }

private:
    EnvParams params_;
    SystemState state_;
    long generated_ = 0;
    long served_ = 0;
    long discarded_ = 0;
    long rejected_ = 0;
};

}  // namespace mecsched
