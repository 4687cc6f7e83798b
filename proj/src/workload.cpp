#include "mecsched/workload.hpp"

#include <algorithm>
#include <stdexcept>

namespace mecsched {

WorkloadParams WorkloadParams::for_capacity(int capacity, int horizon) {
    WorkloadParams params;
    params.capacity = capacity;
    params.horizon = horizon;
    params.short_jobs = {"short", capacity / 20, 3 * capacity / 20, capacity / 4, capacity / 2, 4};
    params.long_jobs = {"long", 2 * capacity / 5, 3 * capacity / 5, capacity / 4, capacity / 2, 8};
    return params;
}

double WorkloadParams::mean_exec() const {
    return p_short * short_jobs.mean_exec() + (1.0 - p_short) * long_jobs.mean_exec();
}

double WorkloadParams::mean_demand() const {
    return p_short * short_jobs.mean_demand() + (1.0 - p_short) * long_jobs.mean_demand();
}

int WorkloadParams::max_deadline() const { return std::max(short_jobs.deadline, long_jobs.deadline); }

void WorkloadParams::validate() const {
    if (num_users < 1) throw std::invalid_argument("num_users must be >= 1");
    if (p_short < 0.0 || p_short > 1.0) throw std::invalid_argument("p_short must lie in [0, 1]");
    for (const JobClassSpec* spec : {&short_jobs, &long_jobs}) {
        if (spec->exec_min < 1 || spec->exec_max < spec->exec_min || spec->exec_max > horizon) {
            throw std::invalid_argument(spec->name + " exec range must lie in [1, horizon]");
        }
        if (spec->demand_min < 1 || spec->demand_max < spec->demand_min ||
            spec->demand_max > capacity) {
            throw std::invalid_argument(spec->name + " demand range must lie in [1, capacity]");
        }
        if (spec->deadline < 1) throw std::invalid_argument(spec->name + " deadline must be >= 1");
    }
}

double arrival_probability(double rho, const WorkloadParams& params) {
    if (rho < 0.0) throw ConfigError("load must be non-negative");
    if (rho == 0.0) return 0.0;
    const double per_user_load = params.num_users * params.mean_demand() * params.mean_exec() /
                                 (static_cast<double>(params.capacity) * params.horizon);
    const double p = rho / per_user_load;
    if (p >= 1.0) {
        throw ConfigError("load " + std::to_string(rho) + " needs per-user probability " +
                          std::to_string(p) + " >= 1");
    }
    return p;
}

namespace {

Job draw_job(Rng& rng, const JobClassSpec& spec) {
    Job job;
    job.exec_time = static_cast<int>(rng.uniform_int(spec.exec_min, spec.exec_max));
    job.demand = static_cast<int>(rng.uniform_int(spec.demand_min, spec.demand_max));
    job.waited = 0;
    job.deadline = spec.deadline;
    return job;
}

}  // namespace

std::vector<Job> sample_arrivals(Rng& rng, double p, const WorkloadParams& params) {
    std::vector<Job> jobs;
    if (p <= 0.0) return jobs;
    for (int user = 0; user < params.num_users; ++user) {
        if (!rng.bernoulli(p)) continue;
        const bool is_short = rng.bernoulli(params.p_short);
        jobs.push_back(draw_job(rng, is_short ? params.short_jobs : params.long_jobs));
    }
    return jobs;
}

double load_at(const LoadSchedule& schedule, int episode) {
    if (schedule.kind == LoadSchedule::Kind::constant) return schedule.rho_start;
    if (schedule.total_episodes <= 1) return schedule.rho_end;
    const int clamped = std::clamp(episode, 0, schedule.total_episodes - 1);
    return schedule.rho_start + (schedule.rho_end - schedule.rho_start) * clamped /
                                    static_cast<double>(schedule.total_episodes - 1);
}

}  // namespace mecsched
