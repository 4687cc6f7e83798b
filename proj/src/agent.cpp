#include "mecsched/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mecsched {

std::vector<double> encode_state(const SystemState& state, const EnvParams& params, int max_deadline) {
    std::vector<double> features(static_cast<std::size_t>(feature_size(params)), 0.0);
    const double horizon = params.horizon;
    const double capacity = params.capacity;
    const double t_max = max_deadline;
    for (std::size_t i = 0; i < state.buffer.size(); ++i) {
        const auto& job = state.buffer[i];
        if (!job) continue;
        features[4 * i + 0] = job->exec_time / horizon;
        features[4 * i + 1] = job->demand / capacity;
        features[4 * i + 2] = std::min(job->waited / t_max, 1.0);
        features[4 * i + 3] = std::min(job->deadline / t_max, 1.0);
    }
    const std::size_t offset = 4 * state.buffer.size();
    for (std::size_t m = 0; m < state.grid.size(); ++m) {
        features[offset + m] = state.grid[m] / capacity;
    }
    return features;
}

double EpsilonSchedule::steepness() const {
    const double mid = midpoint();
    return mid > 0.0 ? std::log(1000.0) / mid : 0.0;
}

double epsilon_at(const EpsilonSchedule& schedule, int episode) {
    using Kind = EpsilonSchedule::Kind;
    if (schedule.kind == Kind::constant) return schedule.tail;
    if (episode >= schedule.decay_episodes) return schedule.tail;
    const double t = std::max(episode, 0);
    const double span = schedule.eps_max - schedule.eps_min;
    if (schedule.kind == Kind::exponential) {
        const double ratio = schedule.eps_min / schedule.eps_max;
        return schedule.eps_max * std::pow(ratio, t / schedule.decay_episodes);
    }
    const double k = schedule.steepness();
    return schedule.eps_min + span / (1.0 + std::exp(k * (t - schedule.midpoint())));
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, int feature_size)
    : capacity_(capacity), features_(feature_size) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    const auto cells = capacity * static_cast<std::size_t>(feature_size);
    states_.resize(cells);
    next_states_.resize(cells);
    actions_.resize(capacity);
    rewards_.resize(capacity);
    terminal_.resize(capacity);
    while (tree_leaves_ < capacity) tree_leaves_ *= 2;
    tree_.assign(2 * tree_leaves_, 0.0);
}

void ReplayBuffer::push(std::span<const double> state, int action, double reward,
                        std::span<const double> next_state, bool terminal) {
    const auto dim = static_cast<std::size_t>(features_);
    if (state.size() != dim || next_state.size() != dim) {
        throw std::invalid_argument("transition feature size mismatch");
    }
    if (!std::isfinite(reward)) throw std::invalid_argument("non-finite reward");
    const std::size_t slot = next_;
    std::copy(state.begin(), state.end(), states_.begin() + static_cast<std::ptrdiff_t>(slot * dim));
    std::copy(next_state.begin(), next_state.end(),
              next_states_.begin() + static_cast<std::ptrdiff_t>(slot * dim));
    actions_[slot] = action;
    rewards_[slot] = reward;
    terminal_[slot] = terminal ? 1 : 0;
    next_ = (next_ + 1) % capacity_;
    size_ = std::min(size_ + 1, capacity_);

    if (!anchored_ || reward > anchor_) {
        anchor_ = reward;
        anchored_ = true;
        rebuild_priorities();
    } else {
        set_priority(slot, std::exp(reward - anchor_));
    }
}

std::size_t ReplayBuffer::slot_of(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("replay index out of range");
    const std::size_t oldest = size_ < capacity_ ? 0 : next_;
    return (oldest + i) % capacity_;
}

std::span<const double> ReplayBuffer::state_of(std::size_t slot) const {
    const auto dim = static_cast<std::size_t>(features_);
    return {states_.data() + slot * dim, dim};
}

std::span<const double> ReplayBuffer::next_state_of(std::size_t slot) const {
    const auto dim = static_cast<std::size_t>(features_);
    return {next_states_.data() + slot * dim, dim};
}

Transition ReplayBuffer::at(std::size_t i) const {
    const std::size_t slot = slot_of(i);
    const auto s = state_of(slot);
    const auto n = next_state_of(slot);
    return {{s.begin(), s.end()}, actions_[slot], rewards_[slot], {n.begin(), n.end()},
            terminal_[slot] != 0};
}

std::vector<double> ReplayBuffer::per_weights() const {
    if (size_ == 0) throw std::logic_error("per_weights on an empty replay buffer");
    double max_reward = rewards_[slot_of(0)];
    for (std::size_t i = 1; i < size_; ++i) max_reward = std::max(max_reward, rewards_[slot_of(i)]);
    std::vector<double> weights(size_);
    for (std::size_t i = 0; i < size_; ++i) weights[i] = std::exp(rewards_[slot_of(i)] - max_reward);
    return weights;
}

void ReplayBuffer::set_priority(std::size_t slot, double priority) {
    std::size_t node = tree_leaves_ + slot;
    tree_[node] = priority;
    for (node /= 2; node >= 1; node /= 2) tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
}

void ReplayBuffer::rebuild_priorities() {
    std::fill(tree_.begin(), tree_.end(), 0.0);
    for (std::size_t i = 0; i < size_; ++i) {
        const std::size_t slot = slot_of(i);
        tree_[tree_leaves_ + slot] = std::exp(rewards_[slot] - anchor_);
    }
    for (std::size_t node = tree_leaves_ - 1; node >= 1; --node) {
        tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
    }
}

std::vector<std::size_t> ReplayBuffer::sample(Rng& rng, std::size_t count) const {
    if (size_ == 0) throw std::logic_error("sampling from an empty replay buffer");
    std::vector<std::size_t> picks;
    picks.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        double u = rng.uniform() * tree_[1];
        std::size_t node = 1;
        while (node < tree_leaves_) {
            const double left = tree_[2 * node];
            if (u < left) {
                node = 2 * node;
            } else {
                u -= left;
                node = 2 * node + 1;
            }
        }
        std::size_t slot = node - tree_leaves_;
        // rounding can walk past the last live leaf
        if (slot >= size_ || tree_[node] == 0.0) slot = slot_of(size_ - 1);
        picks.push_back(slot);
    }
    return picks;
}

int argmax(const Eigen::Ref<const Eigen::VectorXd>& values) {
    int best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = static_cast<int>(i);
    }
    return best;
}

double double_q_target(const Eigen::Ref<const Eigen::VectorXd>& policy_next,
                       const Eigen::Ref<const Eigen::VectorXd>& target_next, double reward,
                       double gamma, bool terminal) {
    if (terminal) return reward;
    return reward + gamma * target_next[argmax(policy_next)];
}

DdqnAgent::DdqnAgent(int input_size, int num_actions, AgentParams params, Rng& init_rng)
    : params_(std::move(params)),
      policy_([&] {
          std::vector<int> sizes{input_size};
          sizes.insert(sizes.end(), params_.hidden.begin(), params_.hidden.end());
          sizes.push_back(num_actions);
          return Mlp::random(sizes, params_.activation, init_rng);
      }()),
      target_(policy_),
      adam_(policy_, AdamConfig{params_.learning_rate}),
      gradients_(policy_) {
    if (params_.gamma < 0.0 || params_.gamma >= 1.0) {
        throw std::invalid_argument("gamma must lie in [0, 1)");
    }
    if (params_.batch_size < 1 || params_.batches_per_training < 1) {
        throw std::invalid_argument("batch size and batches per training job must be >= 1");
    }
}

void DdqnAgent::load_weights(const Mlp& weights) {
    if (!weights.same_architecture(policy_)) {
        throw std::invalid_argument("loaded weights do not match the agent architecture");
    }
    policy_ = weights;
    target_ = weights;
    adam_ = Adam(policy_, AdamConfig{params_.learning_rate});
}

int DdqnAgent::select_action(const Eigen::Ref<const Eigen::VectorXd>& q, double epsilon, Rng& rng,
                             bool* explored) const {
    const bool explore = rng.uniform() < epsilon;
    if (explored) *explored = explore;
    if (explore) return static_cast<int>(rng.uniform_int(0, q.size() - 1));
    return argmax(q);
}

TrainStats DdqnAgent::train_once(const ReplayBuffer& replay, Rng& rng) {
    TrainStats stats;
    const auto b = static_cast<std::size_t>(params_.batch_size);
    if (replay.size() < b) {
        stats.skipped = true;
        return stats;
    }
    const int dim = replay.feature_size();
    QBatch batch;
    batch.inputs.resize(dim, static_cast<Eigen::Index>(b));
    batch.actions.resize(b);
    batch.targets.resize(b);
    batch.weights.assign(b, 1.0);
    Eigen::MatrixXd next(dim, static_cast<Eigen::Index>(b));

    double loss_sum = 0.0;
    for (int k = 0; k < params_.batches_per_training; ++k) {
        const auto picks = replay.sample(rng, b);
        for (std::size_t i = 0; i < b; ++i) {
            const auto col = static_cast<Eigen::Index>(i);
            const auto s = replay.state_of(picks[i]);
            const auto n = replay.next_state_of(picks[i]);
            batch.inputs.col(col) = Eigen::Map<const Eigen::VectorXd>(s.data(), dim);
            next.col(col) = Eigen::Map<const Eigen::VectorXd>(n.data(), dim);
            batch.actions[i] = replay.action_of(picks[i]);
        }
        const Eigen::MatrixXd policy_next = policy_.forward_batch(next);
        const Eigen::MatrixXd target_next = target_.forward_batch(next);
        for (std::size_t i = 0; i < b; ++i) {
            const auto col = static_cast<Eigen::Index>(i);
            batch.targets[i] = double_q_target(policy_next.col(col), target_next.col(col),
                                               replay.reward_of(picks[i]), params_.gamma,
                                               replay.terminal_of(picks[i]));
        }
        loss_sum += backward_and_step(policy_, adam_, batch, gradients_);
        if (params_.soft_update_per_batch) soft_update(target_, policy_, params_.tau);
        ++stats.batches;
    }
    if (!params_.soft_update_per_batch) soft_update(target_, policy_, params_.tau);
    stats.mean_loss = loss_sum / stats.batches;
    return stats;
}

double DdqnAgent::td_error(std::span<const double> state, int action, double reward,
                           std::span<const double> next_state, bool terminal) const {
    const Eigen::VectorXd q = policy_.forward(state);
    const Eigen::VectorXd policy_next = policy_.forward(next_state);
    return td_error(q[action], policy_next, next_state, reward, terminal);
}

double DdqnAgent::td_error(double q_taken, const Eigen::Ref<const Eigen::VectorXd>& policy_next,
                           std::span<const double> next_state, double reward, bool terminal) const {
    if (terminal) return reward - q_taken;
    const Eigen::VectorXd target_next = target_.forward(next_state);
    return double_q_target(policy_next, target_next, reward, params_.gamma, terminal) - q_taken;
}

}  // namespace mecsched
