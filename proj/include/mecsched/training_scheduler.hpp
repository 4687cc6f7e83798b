#pragma once

#include <Eigen/Dense>

#include <deque>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mecsched/agent.hpp"
#include "mecsched/env.hpp"

namespace mecsched {

enum class TrainingReason { periodic, percentile, gate_fallback, no_capacity_skip };

std::string to_string(TrainingReason reason);

/// Outcome of the per-slot meta-scheduling query.
struct TrainingDecision {
    bool train = false;
    /// State with the training job reserved; absent for zero-cost training.
    std::optional<SystemState> training_state;
    TrainingReason reason = TrainingReason::periodic;
    /// Policy Q-values of training_state when the scheduler already computed them.
    std::optional<Eigen::VectorXd> training_state_q;
};

/// Everything a training scheduler may look at in one slot.
struct SlotContext {
    const SystemState& state;
    const EnvParams& env;
    long slot = 0;                    ///< run-wide slot counter
    const DdqnAgent* agent = nullptr;
    const Eigen::VectorXd* state_q = nullptr;  ///< policy Q(s, .), if available
    double last_td_error = std::numeric_limits<double>::infinity();
    int max_deadline = 8;
};

class TrainingScheduler {
public:
    virtual ~TrainingScheduler() = default;
    virtual TrainingDecision decide(const SlotContext& ctx) = 0;
    virtual std::string name() const = 0;
};

/// True on the first slot of every training period.
inline bool pts_fires(int period, long slot) { return slot % period == 0; }

/// Periodic rule with the training job inserted into the grid.
TrainingDecision pts_decide(int period, long slot, const SystemState& state, const EnvParams& env);

/// Zero-cost periodic training: fires like PTS but never touches the grid.
TrainingDecision ideal_decide(long slot, int period);

double psi_score(double max_q_training, double max_q_state, double beta);
double phi_score(double max_q_training, double mean_q_state);

/// psi(s) from the agent's policy network; nullopt when s* cannot be built.
std::optional<double> ats_psi(const DdqnAgent& agent, const SystemState& state, const EnvParams& env,
                              int max_deadline, double beta);

/// Reliability measure max_a Q(s*, a) - mean_a Q(s, a); nullopt when s* cannot be built.
std::optional<double> phi_measure(const DdqnAgent& agent, const SystemState& state,
                                  const EnvParams& env, int max_deadline);

/// Linear-interpolation percentile, q in [0, 1]. Throws on an empty input.
double percentile(std::vector<double> values, double q);

class NoTraining final : public TrainingScheduler {
public:
    TrainingDecision decide(const SlotContext&) override {
        return {false, std::nullopt, TrainingReason::periodic, std::nullopt};
    }
    std::string name() const override { return "none"; }
};

class PeriodicTraining final : public TrainingScheduler {
public:
    explicit PeriodicTraining(int period);
    TrainingDecision decide(const SlotContext& ctx) override;
    std::string name() const override { return "pts"; }
    int period() const { return period_; }

private:
    int period_;
};

class IdealTraining final : public TrainingScheduler {
public:
    explicit IdealTraining(int period);
    TrainingDecision decide(const SlotContext& ctx) override { return ideal_decide(ctx.slot, period_); }
    std::string name() const override { return "ideal"; }

private:
    int period_;
};

struct AtsParams {
    double beta = 0.4;
    std::size_t window = 1000;
    double percentile = 0.99;
    int fallback_period = 50;
};

struct AtsStats {
    long gate_passed = 0;
    long gate_failed = 0;
    long warmup = 0;
    long percentile_triggers = 0;
    long fallback_triggers = 0;
    long no_capacity = 0;
};

/// Adaptive rule: trains when psi of the current state beats the configured
/// percentile of recent scores, provided the TD error is within the
/// reliability measure; otherwise falls back to the periodic rule.
class AdaptiveTraining final : public TrainingScheduler {
public:
    explicit AdaptiveTraining(AtsParams params);

    TrainingDecision decide(const SlotContext& ctx) override;

    /// Same rule on precomputed scores; exposed for testing the trigger logic.
    TrainingDecision decide_scores(double psi, double phi, double last_td_error, long slot);

    std::string name() const override { return "ats"; }
    const std::deque<double>& history() const { return history_; }
    const AtsStats& stats() const { return stats_; }
    const AtsParams& params() const { return params_; }

private:
    AtsParams params_;
    std::deque<double> history_;
    AtsStats stats_;
};

}  // namespace mecsched
