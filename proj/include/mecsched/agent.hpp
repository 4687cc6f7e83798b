#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "mecsched/env.hpp"
#include "mecsched/mlp.hpp"
#include "mecsched/random.hpp"

namespace mecsched {

/// Layout: per buffer slot (e/M, c/C, w/T_max, T/T_max), zeros when empty,
/// followed by g(m)/C for every horizon slot. Length 4L + M.
std::vector<double> encode_state(const SystemState& state, const EnvParams& params, int max_deadline);

inline int feature_size(const EnvParams& params) { return 4 * params.buffer_size + params.horizon; }

struct EpsilonSchedule {
    enum class Kind { reverse_sigmoid, exponential, constant };
    Kind kind = Kind::reverse_sigmoid;
    double eps_max = 1.0;
    double eps_min = 0.1;
    int decay_episodes = 350;  ///< episodes before the constant tail
    double tail = 0.1;

    static EpsilonSchedule constant(double eps) {
        return {Kind::constant, eps, eps, 0, eps};
    }

    double midpoint() const { return 0.5 * decay_episodes; }

    /// Logistic steepness putting the curve within 0.1% of the span of each
    /// end at episode 0 and at the decay end.
    double steepness() const;
};

double epsilon_at(const EpsilonSchedule& schedule, int episode);

struct Transition {
    std::vector<double> state;
    int action = 0;
    double reward = 0.0;
    std::vector<double> next_state;
    bool terminal = false;
};

/// FIFO experience store sampled with reward-based priorities
/// exp(r_i - max_j r_j).
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int feature_size);

    void push(std::span<const double> state, int action, double reward,
              std::span<const double> next_state, bool terminal);

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    int feature_size() const { return features_; }

    /// Transition in insertion order, 0 being the oldest retained.
    Transition at(std::size_t i) const;

    /// Priority weights in (0, 1], oldest first; the largest is exactly 1.
    std::vector<double> per_weights() const;

    /// Draws `count` storage slots with probability proportional to the weights.
    std::vector<std::size_t> sample(Rng& rng, std::size_t count) const;

    std::span<const double> state_of(std::size_t slot) const;
    std::span<const double> next_state_of(std::size_t slot) const;
    int action_of(std::size_t slot) const { return actions_[slot]; }
    double reward_of(std::size_t slot) const { return rewards_[slot]; }
    bool terminal_of(std::size_t slot) const { return terminal_[slot] != 0; }

    /// Storage slot of the i-th oldest transition.
    std::size_t slot_of(std::size_t i) const;

private:
    void set_priority(std::size_t slot, double priority);
    void rebuild_priorities();

    std::size_t capacity_;
    int features_;
    std::size_t size_ = 0;
    std::size_t next_ = 0;
    std::vector<double> states_;
    std::vector<double> next_states_;
    std::vector<int> actions_;
    std::vector<double> rewards_;
    std::vector<char> terminal_;

    // Sum tree over exp(r - anchor_); leaves start at tree_leaves_.
    std::size_t tree_leaves_ = 1;
    std::vector<double> tree_;
    double anchor_ = 0.0;
    bool anchored_ = false;
};

struct AgentParams {
    double gamma = 0.95;
    int batch_size = 16;            ///< b
    int batches_per_training = 10;  ///< B
    double tau = 0.005;
    double learning_rate = 1e-3;
    std::size_t replay_capacity = 100000;
    std::vector<int> hidden = {128, 128};
    Activation activation = Activation::relu;
    bool soft_update_per_batch = true;
};

struct TrainStats {
    int batches = 0;
    double mean_loss = 0.0;
    bool skipped = false;  ///< replay held fewer than b transitions
};

/// Double-Q bootstrap target r + gamma * Qhat(s', argmax_a Q(s', a)).
double double_q_target(const Eigen::Ref<const Eigen::VectorXd>& policy_next,
                       const Eigen::Ref<const Eigen::VectorXd>& target_next, double reward,
                       double gamma, bool terminal);

/// Lowest index among the maxima.
int argmax(const Eigen::Ref<const Eigen::VectorXd>& values);

class DdqnAgent {
public:
    DdqnAgent(int input_size, int num_actions, AgentParams params, Rng& init_rng);

    const AgentParams& params() const { return params_; }
    int num_actions() const { return policy_.output_size(); }

    const Mlp& policy() const { return policy_; }
    const Mlp& target() const { return target_; }
    Mlp& policy() { return policy_; }
    Mlp& target() { return target_; }

    /// Installs pre-trained weights in both networks and resets the optimiser.
    void load_weights(const Mlp& weights);

    Eigen::VectorXd q_values(std::span<const double> features) const { return policy_.forward(features); }
    Eigen::VectorXd target_q_values(std::span<const double> features) const {
        return target_.forward(features);
    }

    /// Epsilon-greedy over precomputed Q-values; returns an output index in [0, L].
    int select_action(const Eigen::Ref<const Eigen::VectorXd>& q, double epsilon, Rng& rng,
                      bool* explored = nullptr) const;

    /// B mini-batch updates sampled by priority, each followed by a soft update.
    TrainStats train_once(const ReplayBuffer& replay, Rng& rng);

    /// TD error of one transition under the current networks.
    double td_error(std::span<const double> state, int action, double reward,
                    std::span<const double> next_state, bool terminal = false) const;

    /// Same as td_error, reusing Q(s, .) and Q(s', .) already computed by the caller.
    double td_error(double q_taken, const Eigen::Ref<const Eigen::VectorXd>& policy_next,
                    std::span<const double> next_state, double reward, bool terminal) const;

    long updates() const { return adam_.steps(); }

private:
    AgentParams params_;
    Mlp policy_;
    Mlp target_;
    Adam adam_;
    MlpGradients gradients_;
};

}  // namespace mecsched
