#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mecsched/agent.hpp"
#include "mecsched/config.hpp"
#include "mecsched/env.hpp"
#include "mecsched/metrics.hpp"
#include "mecsched/random.hpp"
#include "mecsched/training_scheduler.hpp"

namespace mecsched {

enum class Mode { train, eval };

/// What happened in one slot; handed to an optional observer.
struct SlotRecord {
    int episode;
    long slot;  ///< run-wide counter
    Mode mode;
    const SystemState& before;    ///< state at the start of the slot
    const SystemState& observed;  ///< state the policy acted on
    const TrainingDecision& decision;
    Action action;
    std::span<const Job> arrivals;
    const StepResult& result;
};

using SlotObserver = std::function<void(const SlotRecord&)>;

/// One seeded run: environment, workload stream, policy and training scheduler.
class ExperimentRun {
public:
    ExperimentRun(const ExperimentConfig& config, std::uint64_t seed);

    EpisodeMetrics run_episode(int episode, double rho, Mode mode);

    void set_observer(SlotObserver observer) { observer_ = std::move(observer); }

    const ExperimentConfig& config() const { return config_; }
    const DdqnAgent* agent() const { return agent_ ? &*agent_ : nullptr; }
    DdqnAgent* agent() { return agent_ ? &*agent_ : nullptr; }
    const ReplayBuffer* replay() const { return replay_ ? &*replay_ : nullptr; }
    const TrainingScheduler& scheduler() const { return *scheduler_; }
    const MecEnvironment& environment() const { return env_; }

    long slots_run() const { return slot_; }
    long training_rounds() const { return training_rounds_; }
    /// Whether the policy is updated during training episodes.
    bool learns() const;

private:
    ExperimentConfig config_;
    MecEnvironment env_;
    int max_deadline_;
    Rng workload_rng_;
    Rng explore_rng_;
    Rng replay_rng_;
    std::optional<DdqnAgent> agent_;
    std::optional<ReplayBuffer> replay_;
    std::unique_ptr<TrainingScheduler> scheduler_;
    SlotObserver observer_;
    long slot_ = 0;
    long training_rounds_ = 0;
    double last_td_error_;
};

struct SeedResult {
    std::uint64_t seed = 0;
    std::vector<EpisodeMetrics> train;
    std::vector<EpisodeMetrics> eval;
    /// Policy parameter checksum after every training episode (empty for SJF).
    std::vector<std::uint64_t> train_checksums;
    std::uint64_t checksum_before_eval = 0;
    std::uint64_t checksum_after_eval = 0;
};

/// Output file names inside the run directory.
std::filesystem::path train_csv_path(const ExperimentConfig& config, std::uint64_t seed);
std::filesystem::path eval_csv_path(const ExperimentConfig& config, std::uint64_t seed);
std::filesystem::path weights_output_path(const ExperimentConfig& config, std::uint64_t seed);

/// Training phase followed by greedy evaluation at the final load. When
/// `write_files` is set, CSVs are flushed to config.out_dir after every episode.
SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed, bool write_files,
                    std::ostream* log = nullptr);

/// All seeds of a configuration plus seed-aggregated summaries.
std::vector<SeedResult> run_experiment(const ExperimentConfig& config, int jobs = 1,
                                       std::ostream* log = nullptr);

/// Mean per-slot reward over all evaluation episodes of all seeds, with the
/// standard error over those episodes.
MeanStderr eval_reward(const std::vector<SeedResult>& results);

}  // namespace mecsched
