#include "mecsched/experiment.hpp"

#include <cmath>
#include <fstream>
#include <future>
#include <ostream>

#if defined(__SSE2__)
#include <pmmintrin.h>
#include <xmmintrin.h>
#endif

#include "mecsched/sjf.hpp"
#include "mecsched/workload.hpp"

namespace mecsched {

namespace {

// Adam moments of dead units decay into subnormals, which run ~100x slower.
// The MXCSR flags are per thread, so every run sets them for its own thread.
void flush_subnormals() {
#if defined(__SSE2__)
    _MM_SET_FLUSH_ZERO_MODE(_MM_FLUSH_ZERO_ON);
    _MM_SET_DENORMALS_ZERO_MODE(_MM_DENORMALS_ZERO_ON);
#endif
}

std::unique_ptr<TrainingScheduler> make_scheduler(const ExperimentConfig& config) {
    switch (config.policy) {
        case PolicyKind::pts: return std::make_unique<PeriodicTraining>(config.training_period);
        case PolicyKind::ats: return std::make_unique<AdaptiveTraining>(config.ats);
        case PolicyKind::ideal: return std::make_unique<IdealTraining>(config.ideal_period);
        case PolicyKind::sjf:
        case PolicyKind::fixed: return std::make_unique<NoTraining>();
    }
    return std::make_unique<NoTraining>();
}

}  // namespace

ExperimentRun::ExperimentRun(const ExperimentConfig& config, std::uint64_t seed)
    : config_(config),
      env_(config.env),
      max_deadline_(config.workload.max_deadline()),
      workload_rng_(make_stream(seed, RngStream::workload)),
      explore_rng_(make_stream(seed, RngStream::exploration)),
      replay_rng_(make_stream(seed, RngStream::replay)),
      scheduler_(make_scheduler(config)),
      last_td_error_(std::numeric_limits<double>::infinity()) {
    flush_subnormals();
    if (config_.uses_agent()) {
        Rng init = make_stream(seed, RngStream::init);
        agent_.emplace(feature_size(config_.env), config_.env.num_actions(), config_.agent, init);
        if (!config_.init_weights.empty()) {
            agent_->load_weights(Mlp::load(config_.weights_path_for(seed)));
        }
        if (learns()) replay_.emplace(config_.agent.replay_capacity, feature_size(config_.env));
    }
}

bool ExperimentRun::learns() const {
    return config_.policy == PolicyKind::pts || config_.policy == PolicyKind::ats ||
           config_.policy == PolicyKind::ideal;
}

EpisodeMetrics ExperimentRun::run_episode(int episode, double rho, Mode mode) {
    env_.reset();
    const double p = arrival_probability(rho, config_.workload);
    const bool training = mode == Mode::train && learns();
    const double epsilon = training ? epsilon_at(config_.epsilon, episode) : 0.0;
    const EnvParams& params = config_.env;

    EpisodeMetrics metrics;
    metrics.episode = episode;
    metrics.rho = rho;
    metrics.epsilon = epsilon;
    double reward_sum = 0.0;
    double abs_td_sum = 0.0;

    // Q(s, .) of the current state, kept while neither state nor network changed
    std::optional<Eigen::VectorXd> cached_q;
    const TrainingDecision no_training{};

    for (int t = 0; t < config_.n_slot; ++t, ++slot_) {
        const SystemState before = env_.state();
        std::vector<double> features;
        Eigen::VectorXd q;
        if (agent_) {
            features = encode_state(before, params, max_deadline_);
            q = cached_q ? *cached_q : agent_->q_values(features);
        }

        TrainingDecision decision = no_training;
        if (training) {
            SlotContext ctx{before, params, slot_, &*agent_, &q, last_td_error_, max_deadline_};
            decision = scheduler_->decide(ctx);
        }
        if (decision.train && decision.training_state) {
            env_.apply_training_state(*decision.training_state);
            ++metrics.training_jobs;
            features = encode_state(env_.state(), params, max_deadline_);
            q = decision.training_state_q ? *decision.training_state_q : agent_->q_values(features);
        }

        Action action = Action::none();
        bool explored = false;
        if (agent_) {
            action = Action::from_output(agent_->select_action(q, epsilon, explore_rng_, &explored),
                                         params.buffer_size);
        } else {
            action = sjf_select(env_.state(), params);
        }

        const std::vector<Job> arrivals = sample_arrivals(workload_rng_, p, config_.workload);
        const SystemState observed = env_.state();
        const StepResult result = env_.step(action, arrivals);
        reward_sum += result.reward;
        metrics.served += result.info.served ? 1 : 0;
        metrics.discarded += result.info.discarded;
        metrics.rejected += result.info.rejected;

        if (agent_) {
            const bool terminal = t == config_.n_slot - 1;
            const int a = action.output_index(params.buffer_size);
            std::vector<double> next_features = encode_state(result.next, params, max_deadline_);
            Eigen::VectorXd q_next = agent_->q_values(next_features);
            const double td = agent_->td_error(q[a], q_next, next_features, result.reward, terminal);
            abs_td_sum += std::abs(td);
            if (!explored) last_td_error_ = td;
            if (training) replay_->push(features, a, result.reward, next_features, terminal);
            if (decision.train) {
                agent_->train_once(*replay_, replay_rng_);
                ++training_rounds_;
                cached_q.reset();
            } else {
                cached_q = std::move(q_next);
            }
        }

        if (observer_) {
            observer_(SlotRecord{episode, slot_, mode, before, observed, decision, action, arrivals, result});
        }
    }

    metrics.mean_reward = reward_sum / config_.n_slot;
    metrics.mean_abs_td = agent_ ? abs_td_sum / config_.n_slot : 0.0;
    return metrics;
}

std::filesystem::path train_csv_path(const ExperimentConfig& config, std::uint64_t seed) {
    return std::filesystem::path(config.out_dir) /
           (config.label + "_seed" + std::to_string(seed) + "_train.csv");
}

std::filesystem::path eval_csv_path(const ExperimentConfig& config, std::uint64_t seed) {
    return std::filesystem::path(config.out_dir) /
           (config.label + "_seed" + std::to_string(seed) + "_eval.csv");
}

std::filesystem::path weights_output_path(const ExperimentConfig& config, std::uint64_t seed) {
    return std::filesystem::path(config.out_dir) /
           (config.label + "_seed" + std::to_string(seed) + "_weights.bin");
}

SeedResult run_seed(const ExperimentConfig& config, std::uint64_t seed, bool write_files,
                    std::ostream* log) {
    ExperimentRun run(config, seed);
    SeedResult result;
    result.seed = seed;

    std::optional<CsvWriter> train_out;
    std::optional<CsvWriter> eval_out;
    if (write_files) {
        std::filesystem::create_directories(config.out_dir);
        train_out.emplace(train_csv_path(config, seed));
        eval_out.emplace(eval_csv_path(config, seed));
    }

    auto record = [](std::vector<EpisodeMetrics>& rows, EpisodeMetrics m) {
        const double previous = rows.empty() ? 0.0 : rows.back().running_sum_reward;
        m.running_sum_reward = previous + m.mean_reward;
        m.running_mean_reward = m.running_sum_reward / static_cast<double>(rows.size() + 1);
        rows.push_back(m);
        return m;
    };

    for (int episode = 0; episode < config.n_train; ++episode) {
        const auto m = record(result.train, run.run_episode(episode, load_at(config.load, episode), Mode::train));
        if (train_out) train_out->append(m);
        if (run.agent()) result.train_checksums.push_back(run.agent()->policy().checksum());
        if (log && (episode % 50 == 0 || episode + 1 == config.n_train)) {
            *log << config.label << " seed " << seed << " train " << episode << "/" << config.n_train
                 << " rho=" << m.rho << " eps=" << m.epsilon << " reward=" << m.mean_reward
                 << " running=" << m.running_mean_reward << " training_jobs=" << m.training_jobs
                 << std::endl;
        }
    }

    if (run.agent() && write_files && config.save_weights) {
        run.agent()->policy().save(weights_output_path(config, seed));
    }

    if (run.agent()) result.checksum_before_eval = run.agent()->policy().checksum();
    const double eval_rho = config.load.final_load();
    for (int episode = 0; episode < config.n_test; ++episode) {
        const auto m = record(result.eval, run.run_episode(episode, eval_rho, Mode::eval));
        if (eval_out) eval_out->append(m);
    }
    if (run.agent()) result.checksum_after_eval = run.agent()->policy().checksum();
    if (log) {
        double sum = 0.0;
        for (const auto& m : result.eval) sum += m.mean_reward;
        *log << config.label << " seed " << seed << " eval mean reward "
             << (result.eval.empty() ? 0.0 : sum / static_cast<double>(result.eval.size())) << std::endl;
    }
    return result;
}

MeanStderr eval_reward(const std::vector<SeedResult>& results) {
    std::vector<double> values;
    for (const auto& r : results) {
        for (const auto& m : r.eval) values.push_back(m.mean_reward);
    }
    return mean_stderr(values);
}

std::vector<SeedResult> run_experiment(const ExperimentConfig& config, int jobs, std::ostream* log) {
    std::filesystem::create_directories(config.out_dir);
    {
        std::ofstream out(std::filesystem::path(config.out_dir) / "config.txt");
        out << config.canonical_text();
    }

    std::vector<SeedResult> results(config.seeds.size());
    if (jobs <= 1 || config.seeds.size() == 1) {
        for (std::size_t i = 0; i < config.seeds.size(); ++i) {
            results[i] = run_seed(config, config.seeds[i], true, log);
        }
    } else {
        // runs share nothing but the read-only config
        std::size_t next = 0;
        while (next < config.seeds.size()) {
            std::vector<std::future<SeedResult>> batch;
            const std::size_t begin = next;
            for (; next < config.seeds.size() && batch.size() < static_cast<std::size_t>(jobs); ++next) {
                batch.push_back(std::async(std::launch::async, run_seed, std::cref(config),
                                           config.seeds[next], true, nullptr));
            }
            for (std::size_t k = 0; k < batch.size(); ++k) results[begin + k] = batch[k].get();
        }
    }

    std::vector<std::vector<EpisodeMetrics>> train;
    std::vector<std::vector<EpisodeMetrics>> eval;
    for (const auto& r : results) {
        train.push_back(r.train);
        eval.push_back(r.eval);
    }
    const std::filesystem::path dir(config.out_dir);
    write_seed_summary(train, dir / "summary_train.csv");
    write_seed_summary(eval, dir / "summary_eval.csv");

    std::ofstream scores(dir / "eval_scores.csv");
    scores << "seed,eval_mean_reward,eval_stderr\n";
    for (const auto& r : results) {
        std::vector<double> values;
        for (const auto& m : r.eval) values.push_back(m.mean_reward);
        const auto stats = mean_stderr(values);
        scores << r.seed << ',' << format_exact(stats.mean) << ',' << format_exact(stats.stderr_) << '\n';
    }
    const auto overall = eval_reward(results);
    scores << "all," << format_exact(overall.mean) << ',' << format_exact(overall.stderr_) << '\n';
    if (!scores) throw std::runtime_error("failed writing eval_scores.csv in " + dir.string());
    return results;
}

}  // namespace mecsched
