#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mecsched/agent.hpp"
#include "mecsched/env.hpp"
#include "mecsched/training_scheduler.hpp"
#include "mecsched/workload.hpp"

namespace mecsched {

enum class Scenario { stationary, dynamic };
enum class PolicyKind { sjf, pts, ats, ideal, fixed };

std::string to_string(Scenario scenario);
std::string to_string(PolicyKind policy);

struct ExperimentConfig {
    Scenario scenario = Scenario::stationary;
    PolicyKind policy = PolicyKind::pts;
    std::string label;

    EnvParams env;
    WorkloadParams workload;
    AgentParams agent;
    EpsilonSchedule epsilon;

    int training_period = 50;  ///< T_ell
    AtsParams ats;
    int ideal_period = 10;

    LoadSchedule load;
    int n_train = 1000;
    int n_test = 100;
    int n_slot = 1000;

    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string out_dir = "out";
    /// Pre-trained policy weights; "{seed}" is replaced by the run seed.
    std::string init_weights;
    bool save_weights = false;

    bool uses_agent() const { return policy != PolicyKind::sjf; }
    std::string weights_path_for(std::uint64_t seed) const;

    /// Resolved key/value form, one "key = value" line per key in sorted order.
    std::string canonical_text() const;
};

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines; `#` starts a comment. Throws ConfigError on
/// malformed lines or duplicate keys.
KeyValues parse_key_values(const std::string& text);

/// Builds a config from user keys on top of the scenario defaults.
/// Throws ConfigError on unknown keys or invalid values.
ExperimentConfig build_config(const KeyValues& values);

/// Reads a config file and applies `key=value` overrides.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

/// Names of every accepted configuration key.
std::vector<std::string> config_keys();

}  // namespace mecsched
