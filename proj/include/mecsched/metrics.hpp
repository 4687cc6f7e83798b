#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mecsched {

struct EpisodeMetrics {
    int episode = 0;
    double rho = 0.0;
    double epsilon = 0.0;
    double mean_reward = 0.0;          ///< per-slot mean over the episode
    double running_mean_reward = 0.0;  ///< mean of mean_reward over episodes so far
    double running_sum_reward = 0.0;   ///< sum of mean_reward over episodes so far
    long served = 0;
    long discarded = 0;
    long rejected = 0;
    long training_jobs = 0;
    double mean_abs_td = 0.0;

    friend bool operator==(const EpisodeMetrics&, const EpisodeMetrics&) = default;
};

inline constexpr std::array<std::string_view, 11> kMetricColumns = {
    "episode", "rho", "epsilon", "mean_reward", "running_mean_reward", "running_sum_reward",
    "served", "discarded", "rejected", "training_jobs", "mean_abs_td"};

/// Shortest decimal form that parses back to the same double.
std::string format_exact(double value);

/// Header plus one row per episode. Throws std::runtime_error on I/O failure.
void write_csv(const std::vector<EpisodeMetrics>& rows, const std::filesystem::path& path);

/// Appends rows to an open file written by write_csv (used for per-episode flushing).
class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path);
    void append(const EpisodeMetrics& row);

private:
    std::filesystem::path path_;
};

/// Reads a file produced by write_csv. Throws std::runtime_error on a schema mismatch.
std::vector<EpisodeMetrics> read_csv(const std::filesystem::path& path);

/// Fills running_mean_reward and running_sum_reward from mean_reward.
void accumulate_running(std::vector<EpisodeMetrics>& rows);

struct MeanStderr {
    double mean = 0.0;
    double stderr_ = 0.0;  ///< sample standard deviation / sqrt(n); 0 for n < 2
};

MeanStderr mean_stderr(const std::vector<double>& values);

/// Per-episode mean and standard error of every metric column across seeds.
/// All inputs must have the same episode sequence.
void write_seed_summary(const std::vector<std::vector<EpisodeMetrics>>& per_seed,
                        const std::filesystem::path& path);

}  // namespace mecsched
