#include "mecsched/training_scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mecsched {

std::string to_string(TrainingReason reason) {
    switch (reason) {
        case TrainingReason::periodic: return "periodic";
        case TrainingReason::percentile: return "percentile";
        case TrainingReason::gate_fallback: return "gate-fallback";
        case TrainingReason::no_capacity_skip: return "no-capacity-skip";
    }
    return "unknown";
}

TrainingDecision pts_decide(int period, long slot, const SystemState& state, const EnvParams& env) {
    TrainingDecision decision;
    decision.reason = TrainingReason::periodic;
    if (!pts_fires(period, slot)) return decision;
    decision.training_state = insert_training_job(state, env.training_demand, env);
    if (!decision.training_state) {
        decision.reason = TrainingReason::no_capacity_skip;
        return decision;
    }
    decision.train = true;
    return decision;
}

TrainingDecision ideal_decide(long slot, int period) {
    return {pts_fires(period, slot), std::nullopt, TrainingReason::periodic, std::nullopt};
}

double psi_score(double max_q_training, double max_q_state, double beta) {
    return max_q_training + beta * (max_q_training - max_q_state);
}

double phi_score(double max_q_training, double mean_q_state) { return max_q_training - mean_q_state; }

namespace {

struct TrainingQ {
    Eigen::VectorXd state_q;
    Eigen::VectorXd training_q;
};

std::optional<TrainingQ> training_q_values(const DdqnAgent& agent, const SystemState& state,
                                           const EnvParams& env, int max_deadline) {
    const auto training = insert_training_job(state, env.training_demand, env);
    if (!training) return std::nullopt;
    return TrainingQ{agent.q_values(encode_state(state, env, max_deadline)),
                     agent.q_values(encode_state(*training, env, max_deadline))};
}

}  // namespace

std::optional<double> ats_psi(const DdqnAgent& agent, const SystemState& state, const EnvParams& env,
                              int max_deadline, double beta) {
    const auto q = training_q_values(agent, state, env, max_deadline);
    if (!q) return std::nullopt;
    return psi_score(q->training_q.maxCoeff(), q->state_q.maxCoeff(), beta);
}

std::optional<double> phi_measure(const DdqnAgent& agent, const SystemState& state,
                                  const EnvParams& env, int max_deadline) {
    const auto q = training_q_values(agent, state, env, max_deadline);
    if (!q) return std::nullopt;
    return phi_score(q->training_q.maxCoeff(), q->state_q.mean());
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("percentile of an empty set");
    if (q < 0.0 || q > 1.0) throw std::invalid_argument("percentile rank must lie in [0, 1]");
    const double rank = q * static_cast<double>(values.size() - 1);
    const auto lower = static_cast<std::size_t>(std::floor(rank));
    const double frac = rank - static_cast<double>(lower);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lower), values.end());
    const double low = values[lower];
    if (frac == 0.0 || lower + 1 >= values.size()) return low;
    const double high = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lower) + 1,
                                          values.end());
    return low + frac * (high - low);
}

PeriodicTraining::PeriodicTraining(int period) : period_(period) {
    if (period < 1) throw std::invalid_argument("training period must be >= 1");
}

TrainingDecision PeriodicTraining::decide(const SlotContext& ctx) {
    return pts_decide(period_, ctx.slot, ctx.state, ctx.env);
}

IdealTraining::IdealTraining(int period) : period_(period) {
    if (period < 1) throw std::invalid_argument("ideal training period must be >= 1");
}

AdaptiveTraining::AdaptiveTraining(AtsParams params) : params_(params) {
    if (params_.window == 0) throw std::invalid_argument("psi window must be positive");
    if (!(params_.percentile > 0.0 && params_.percentile < 1.0)) {
        throw std::invalid_argument("percentile threshold must lie in (0, 1)");
    }
    if (params_.fallback_period < 1) throw std::invalid_argument("fallback period must be >= 1");
    if (params_.beta < 0.0) throw std::invalid_argument("beta must be non-negative");
}

TrainingDecision AdaptiveTraining::decide_scores(double psi, double phi, double last_td_error,
                                                 long slot) {
    const bool full = history_.size() >= params_.window;
    const double threshold =
        full ? percentile({history_.begin(), history_.end()}, params_.percentile) : 0.0;
    history_.push_back(psi);
    while (history_.size() > params_.window) history_.pop_front();

    TrainingDecision decision;
    if (!full) {
        ++stats_.warmup;
        decision.reason = TrainingReason::periodic;
        decision.train = pts_fires(params_.fallback_period, slot);
        return decision;
    }
    // the magnitude is gated: a negative TD error would otherwise always pass
    if (std::abs(last_td_error) <= phi) {
        ++stats_.gate_passed;
        decision.reason = TrainingReason::percentile;
        decision.train = psi > threshold;
        if (decision.train) ++stats_.percentile_triggers;
    } else {
        ++stats_.gate_failed;
        decision.reason = TrainingReason::gate_fallback;
        decision.train = pts_fires(params_.fallback_period, slot);
        if (decision.train) ++stats_.fallback_triggers;
    }
    return decision;
}

TrainingDecision AdaptiveTraining::decide(const SlotContext& ctx) {
    if (ctx.agent == nullptr) throw std::logic_error("adaptive training needs an agent");
    auto training = insert_training_job(ctx.state, ctx.env.training_demand, ctx.env);
    if (!training) {
        ++stats_.no_capacity;
        return {false, std::nullopt, TrainingReason::no_capacity_skip, std::nullopt};
    }
    const Eigen::VectorXd state_q =
        ctx.state_q ? *ctx.state_q
                    : ctx.agent->q_values(encode_state(ctx.state, ctx.env, ctx.max_deadline));
    Eigen::VectorXd training_q = ctx.agent->q_values(encode_state(*training, ctx.env, ctx.max_deadline));

    const double max_training = training_q.maxCoeff();
    const double psi = psi_score(max_training, state_q.maxCoeff(), params_.beta);
    const double phi = phi_score(max_training, state_q.mean());

    TrainingDecision decision = decide_scores(psi, phi, ctx.last_td_error, ctx.slot);
    if (decision.train) {
        decision.training_state = std::move(training);
        decision.training_state_q = std::move(training_q);
    }
    return decision;
}

}  // namespace mecsched
