#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mecsched/env.hpp"
#include "mecsched/random.hpp"

namespace mecsched {

struct JobClassSpec {
    std::string name;
    int exec_min = 1;
    int exec_max = 1;
    int demand_min = 1;
    int demand_max = 1;
    int deadline = 1;

    double mean_exec() const { return 0.5 * (exec_min + exec_max); }
    double mean_demand() const { return 0.5 * (demand_min + demand_max); }
};

struct WorkloadParams {
    int num_users = 1000;
    double p_short = 0.2;
    JobClassSpec short_jobs{"short", 1, 3, 5, 10, 4};
    JobClassSpec long_jobs{"long", 8, 12, 5, 10, 8};
    int capacity = 20;
    int horizon = 20;

    /// Class ranges expressed as fractions of the capacity: short jobs run
    /// C/20..3C/20 slots, long jobs 2C/5..3C/5, both demand C/4..C/2.
    static WorkloadParams for_capacity(int capacity, int horizon);

    double mean_exec() const;
    double mean_demand() const;
    int max_deadline() const;

    /// Throws std::invalid_argument if ranges or probabilities are out of bounds.
    void validate() const;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Per-user Bernoulli probability giving average load rho, where load is the
/// requested resource-time per slot over C*M. Throws ConfigError if the
/// load cannot be reached with the configured user count (p >= 1).
double arrival_probability(double rho, const WorkloadParams& params);

/// One slot of arrivals, in user order.
std::vector<Job> sample_arrivals(Rng& rng, double p, const WorkloadParams& params);

struct LoadSchedule {
    enum class Kind { constant, linear_ramp };
    Kind kind = Kind::constant;
    double rho_start = 0.3;
    double rho_end = 0.3;
    int total_episodes = 1;

    static LoadSchedule constant(double rho) { return {Kind::constant, rho, rho, 1}; }
    static LoadSchedule ramp(double from, double to, int episodes) {
        return {Kind::linear_ramp, from, to, episodes};
    }

    /// Load of the final episode (also used for evaluation).
    double final_load() const { return kind == Kind::constant ? rho_start : rho_end; }
};

double load_at(const LoadSchedule& schedule, int episode);

}  // namespace mecsched
