#include "mecsched/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace mecsched {

std::string to_string(Scenario scenario) {
    return scenario == Scenario::stationary ? "stationary" : "dynamic";
}

std::string to_string(PolicyKind policy) {
    switch (policy) {
        case PolicyKind::sjf: return "sjf";
        case PolicyKind::pts: return "pts";
        case PolicyKind::ats: return "ats";
        case PolicyKind::ideal: return "ideal";
        case PolicyKind::fixed: return "fixed";
    }
    return "unknown";
}

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string format_double(double value) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, end);
}

// Keys whose default depends on the scenario or the capacity.
const std::vector<std::string> kKeys = {
    "scenario", "policy", "label",
    "capacity", "buffer_size", "horizon", "sigma", "training_demand", "scale_reward",
    "num_users", "p_short", "short_exec_min", "short_exec_max", "long_exec_min", "long_exec_max",
    "demand_min", "demand_max", "short_deadline", "long_deadline",
    "gamma", "batch_size", "batches_per_training", "tau", "learning_rate", "replay_capacity",
    "hidden_layers", "activation", "soft_update",
    "epsilon_kind", "epsilon_max", "epsilon_min", "epsilon_decay_episodes", "epsilon_tail",
    "T_ell", "ats_beta", "ats_window", "ats_percentile", "ats_fallback_period", "ideal_period",
    "load_kind", "rho", "rho_start", "rho_end",
    "n_train", "n_test", "n_slot",
    "seeds", "out_dir", "init_weights", "save_weights",
};

class Reader {
public:
    explicit Reader(const KeyValues& values) : values_(values) {}

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string text(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    long integer(const std::string& key, long fallback) const {
        if (!has(key)) return fallback;
        const std::string& raw = values_.at(key);
        long value = 0;
        const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
        if (ec != std::errc{} || ptr != raw.data() + raw.size()) fail(key, raw, "an integer");
        return value;
    }

    double real(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        const std::string& raw = values_.at(key);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
        if (ec != std::errc{} || ptr != raw.data() + raw.size()) fail(key, raw, "a number");
        return value;
    }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string& raw = values_.at(key);
        if (raw == "true" || raw == "1" || raw == "yes" || raw == "on") return true;
        if (raw == "false" || raw == "0" || raw == "no" || raw == "off") return false;
        fail(key, raw, "a boolean");
    }

    std::vector<long> integers(const std::string& key, std::vector<long> fallback) const {
        if (!has(key)) return fallback;
        std::vector<long> out;
        std::stringstream ss(values_.at(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            long value = 0;
            const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
            if (ec != std::errc{} || ptr != item.data() + item.size()) {
                fail(key, values_.at(key), "a comma-separated integer list");
            }
            out.push_back(value);
        }
        return out;
    }

    [[noreturn]] static void fail(const std::string& key, const std::string& raw, const char* what) {
        throw ConfigError("config key '" + key + "': '" + raw + "' is not " + what);
    }

private:
    const KeyValues& values_;
};

template <typename T>
std::string join(const std::vector<T>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(items[i]);
    }
    return out;
}

}  // namespace

std::vector<std::string> config_keys() { return kKeys; }

std::string ExperimentConfig::weights_path_for(std::uint64_t seed) const {
    std::string path = init_weights;
    const std::string token = "{seed}";
    for (auto pos = path.find(token); pos != std::string::npos; pos = path.find(token)) {
        path.replace(pos, token.size(), std::to_string(seed));
    }
    return path;
}

KeyValues parse_key_values(const std::string& text) {
    KeyValues values;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
        if (!values.emplace(key, value).second) {
            throw ConfigError("line " + std::to_string(number) + ": duplicate key '" + key + "'");
        }
    }
    return values;
}

ExperimentConfig build_config(const KeyValues& values) {
    const std::set<std::string> known(kKeys.begin(), kKeys.end());
    for (const auto& [key, value] : values) {
        if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    const Reader in(values);
    ExperimentConfig cfg;

    const std::string scenario = in.text("scenario", "stationary");
    if (scenario == "stationary") cfg.scenario = Scenario::stationary;
    else if (scenario == "dynamic") cfg.scenario = Scenario::dynamic;
    else throw ConfigError("unknown scenario '" + scenario + "'");
    const bool dynamic = cfg.scenario == Scenario::dynamic;

    const std::string policy = in.text("policy", "pts");
    if (policy == "sjf") cfg.policy = PolicyKind::sjf;
    else if (policy == "pts") cfg.policy = PolicyKind::pts;
    else if (policy == "ats") cfg.policy = PolicyKind::ats;
    else if (policy == "ideal") cfg.policy = PolicyKind::ideal;
    else if (policy == "fixed") cfg.policy = PolicyKind::fixed;
    else throw ConfigError("unknown policy '" + policy + "'");
    cfg.label = in.text("label", to_string(cfg.policy));

    auto& env = cfg.env;
    env.capacity = static_cast<int>(in.integer("capacity", 20));
    env.buffer_size = static_cast<int>(in.integer("buffer_size", 10));
    env.horizon = static_cast<int>(in.integer("horizon", 20));
    env.expiry_weight = in.real("sigma", 0.1);
    env.training_demand = static_cast<int>(in.integer("training_demand", env.capacity));
    env.scale_reward = in.boolean("scale_reward", true);

    auto& wl = cfg.workload;
    wl = WorkloadParams::for_capacity(env.capacity, env.horizon);
    wl.num_users = static_cast<int>(in.integer("num_users", 1000));
    wl.p_short = in.real("p_short", 0.2);
    wl.short_jobs.exec_min = static_cast<int>(in.integer("short_exec_min", wl.short_jobs.exec_min));
    wl.short_jobs.exec_max = static_cast<int>(in.integer("short_exec_max", wl.short_jobs.exec_max));
    wl.long_jobs.exec_min = static_cast<int>(in.integer("long_exec_min", wl.long_jobs.exec_min));
    wl.long_jobs.exec_max = static_cast<int>(in.integer("long_exec_max", wl.long_jobs.exec_max));
    const int demand_min = static_cast<int>(in.integer("demand_min", wl.short_jobs.demand_min));
    const int demand_max = static_cast<int>(in.integer("demand_max", wl.short_jobs.demand_max));
    wl.short_jobs.demand_min = wl.long_jobs.demand_min = demand_min;
    wl.short_jobs.demand_max = wl.long_jobs.demand_max = demand_max;
    wl.short_jobs.deadline = static_cast<int>(in.integer("short_deadline", 4));
    wl.long_jobs.deadline = static_cast<int>(in.integer("long_deadline", 8));

    auto& agent = cfg.agent;
    agent.gamma = in.real("gamma", 0.95);
    agent.batch_size = static_cast<int>(in.integer("batch_size", 16));
    agent.batches_per_training = static_cast<int>(in.integer("batches_per_training", 10));
    agent.tau = in.real("tau", 0.005);
    agent.learning_rate = in.real("learning_rate", 1e-3);
    agent.replay_capacity = static_cast<std::size_t>(in.integer("replay_capacity", 100000));
    agent.hidden.clear();
    for (long h : in.integers("hidden_layers", {128, 128})) agent.hidden.push_back(static_cast<int>(h));
    try {
        agent.activation = parse_activation(in.text("activation", "relu"));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const std::string soft = in.text("soft_update", "per_batch");
    if (soft != "per_batch" && soft != "per_job") {
        throw ConfigError("soft_update must be per_batch or per_job");
    }
    agent.soft_update_per_batch = soft == "per_batch";

    auto& eps = cfg.epsilon;
    const std::string eps_kind = in.text("epsilon_kind", dynamic ? "constant" : "reverse_sigmoid");
    if (eps_kind == "reverse_sigmoid") eps.kind = EpsilonSchedule::Kind::reverse_sigmoid;
    else if (eps_kind == "exponential") eps.kind = EpsilonSchedule::Kind::exponential;
    else if (eps_kind == "constant") eps.kind = EpsilonSchedule::Kind::constant;
    else throw ConfigError("unknown epsilon_kind '" + eps_kind + "'");
    eps.eps_max = in.real("epsilon_max", 1.0);
    eps.eps_min = in.real("epsilon_min", 0.1);
    eps.decay_episodes = static_cast<int>(in.integer("epsilon_decay_episodes", 350));
    eps.tail = in.real("epsilon_tail", 0.1);

    cfg.training_period = static_cast<int>(in.integer("T_ell", 50));
    cfg.ats.beta = in.real("ats_beta", 0.4);
    cfg.ats.window = static_cast<std::size_t>(in.integer("ats_window", 1000));
    cfg.ats.percentile = in.real("ats_percentile", 0.99);
    cfg.ats.fallback_period = static_cast<int>(in.integer("ats_fallback_period", cfg.training_period));
    cfg.ideal_period = static_cast<int>(in.integer("ideal_period", 10));

    cfg.n_train = static_cast<int>(in.integer("n_train", dynamic ? 1500 : 1000));
    cfg.n_test = static_cast<int>(in.integer("n_test", 100));
    cfg.n_slot = static_cast<int>(in.integer("n_slot", 1000));

    const std::string load_kind = in.text("load_kind", dynamic ? "ramp" : "constant");
    if (load_kind == "constant") {
        cfg.load = LoadSchedule::constant(in.real("rho", 0.3));
    } else if (load_kind == "ramp") {
        cfg.load = LoadSchedule::ramp(in.real("rho_start", 0.1), in.real("rho_end", 0.3), cfg.n_train);
    } else {
        throw ConfigError("unknown load_kind '" + load_kind + "'");
    }

    cfg.seeds.clear();
    for (long s : in.integers("seeds", {1, 2, 3})) {
        if (s < 0) throw ConfigError("seeds must be non-negative");
        cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    cfg.out_dir = in.text("out_dir", "out");
    cfg.init_weights = in.text("init_weights", "");
    cfg.save_weights = in.boolean("save_weights", false);

    // semantic checks
    try {
        env.validate();
        wl.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
    if (cfg.n_train < 0 || cfg.n_test < 0 || cfg.n_slot < 1) {
        throw ConfigError("episode counts must be non-negative and n_slot >= 1");
    }
    if (cfg.training_period < 1 || cfg.ideal_period < 1 || cfg.ats.fallback_period < 1) {
        throw ConfigError("training periods must be >= 1");
    }
    if (cfg.ats.window < 1 || !(cfg.ats.percentile > 0.0 && cfg.ats.percentile < 1.0)) {
        throw ConfigError("ats_window must be >= 1 and ats_percentile in (0, 1)");
    }
    if (agent.gamma < 0.0 || agent.gamma >= 1.0) throw ConfigError("gamma must lie in [0, 1)");
    if (agent.batch_size < 1 || agent.batches_per_training < 1 || agent.replay_capacity < 1) {
        throw ConfigError("batch_size, batches_per_training and replay_capacity must be >= 1");
    }
    if (agent.tau < 0.0 || agent.tau > 1.0) throw ConfigError("tau must lie in [0, 1]");
    for (double rho : {cfg.load.rho_start, cfg.load.rho_end}) {
        if (rho < 0.0 || rho > 1.0) throw ConfigError("load must lie in [0, 1]");
        arrival_probability(rho, wl);
    }
    if (cfg.policy == PolicyKind::fixed && cfg.init_weights.empty()) {
        throw ConfigError("policy 'fixed' requires init_weights");
    }
    return cfg;
}

std::string ExperimentConfig::canonical_text() const {
    KeyValues kv;
    kv["scenario"] = to_string(scenario);
    kv["policy"] = to_string(policy);
    kv["label"] = label;
    kv["capacity"] = std::to_string(env.capacity);
    kv["buffer_size"] = std::to_string(env.buffer_size);
    kv["horizon"] = std::to_string(env.horizon);
    kv["sigma"] = format_double(env.expiry_weight);
    kv["training_demand"] = std::to_string(env.training_demand);
    kv["scale_reward"] = env.scale_reward ? "true" : "false";
    kv["num_users"] = std::to_string(workload.num_users);
    kv["p_short"] = format_double(workload.p_short);
    kv["short_exec_min"] = std::to_string(workload.short_jobs.exec_min);
    kv["short_exec_max"] = std::to_string(workload.short_jobs.exec_max);
    kv["long_exec_min"] = std::to_string(workload.long_jobs.exec_min);
    kv["long_exec_max"] = std::to_string(workload.long_jobs.exec_max);
    kv["demand_min"] = std::to_string(workload.short_jobs.demand_min);
    kv["demand_max"] = std::to_string(workload.short_jobs.demand_max);
    kv["short_deadline"] = std::to_string(workload.short_jobs.deadline);
    kv["long_deadline"] = std::to_string(workload.long_jobs.deadline);
    kv["gamma"] = format_double(agent.gamma);
    kv["batch_size"] = std::to_string(agent.batch_size);
    kv["batches_per_training"] = std::to_string(agent.batches_per_training);
    kv["tau"] = format_double(agent.tau);
    kv["learning_rate"] = format_double(agent.learning_rate);
    kv["replay_capacity"] = std::to_string(agent.replay_capacity);
    kv["hidden_layers"] = join(agent.hidden);
    kv["activation"] = to_string(agent.activation);
    kv["soft_update"] = agent.soft_update_per_batch ? "per_batch" : "per_job";
    switch (epsilon.kind) {
        case EpsilonSchedule::Kind::reverse_sigmoid: kv["epsilon_kind"] = "reverse_sigmoid"; break;
        case EpsilonSchedule::Kind::exponential: kv["epsilon_kind"] = "exponential"; break;
        case EpsilonSchedule::Kind::constant: kv["epsilon_kind"] = "constant"; break;
    }
    kv["epsilon_max"] = format_double(epsilon.eps_max);
    kv["epsilon_min"] = format_double(epsilon.eps_min);
    kv["epsilon_decay_episodes"] = std::to_string(epsilon.decay_episodes);
    kv["epsilon_tail"] = format_double(epsilon.tail);
    kv["T_ell"] = std::to_string(training_period);
    kv["ats_beta"] = format_double(ats.beta);
    kv["ats_window"] = std::to_string(ats.window);
    kv["ats_percentile"] = format_double(ats.percentile);
    kv["ats_fallback_period"] = std::to_string(ats.fallback_period);
    kv["ideal_period"] = std::to_string(ideal_period);
    if (load.kind == LoadSchedule::Kind::constant) {
        kv["load_kind"] = "constant";
        kv["rho"] = format_double(load.rho_start);
    } else {
        kv["load_kind"] = "ramp";
        kv["rho_start"] = format_double(load.rho_start);
        kv["rho_end"] = format_double(load.rho_end);
    }
    kv["n_train"] = std::to_string(n_train);
    kv["n_test"] = std::to_string(n_test);
    kv["n_slot"] = std::to_string(n_slot);
    std::vector<long> seed_list(seeds.begin(), seeds.end());
    kv["seeds"] = join(seed_list);
    kv["out_dir"] = out_dir;
    kv["init_weights"] = init_weights;
    kv["save_weights"] = save_weights ? "true" : "false";

    std::string out;
    for (const auto& [key, value] : kv) out += key + " = " + value + "\n";
    return out;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    KeyValues values = parse_key_values(buffer.str());
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + item + "' is not key=value");
        values[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
    }
    return build_config(values);
}

}  // namespace mecsched
