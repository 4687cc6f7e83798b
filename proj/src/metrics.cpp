#include "mecsched/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mecsched {

std::string format_exact(double value) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw std::runtime_error("failed to format a double");
    return std::string(buf, end);
}

namespace {

std::string header_line() {
    std::string line;
    for (std::size_t i = 0; i < kMetricColumns.size(); ++i) {
        if (i) line += ',';
        line += kMetricColumns[i];
    }
    return line;
}

std::string row_line(const EpisodeMetrics& m) {
    std::ostringstream out;
    out << m.episode << ',' << format_exact(m.rho) << ',' << format_exact(m.epsilon) << ','
        << format_exact(m.mean_reward) << ',' << format_exact(m.running_mean_reward) << ','
        << format_exact(m.running_sum_reward) << ',' << m.served << ',' << m.discarded << ','
        << m.rejected << ',' << m.training_jobs << ',' << format_exact(m.mean_abs_td);
    return out.str();
}

template <typename T>
T parse_field(const std::string& text, const std::filesystem::path& path, int line) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": bad field '" + text + "'");
    }
    return value;
}

}  // namespace

void write_csv(const std::vector<EpisodeMetrics>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << header_line() << '\n';
    for (const auto& row : rows) out << row_line(row) << '\n';
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : path_(path) { write_csv({}, path_); }

void CsvWriter::append(const EpisodeMetrics& row) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to " + path_.string());
    out << row_line(row) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + path_.string());
}

std::vector<EpisodeMetrics> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != header_line()) {
        throw std::runtime_error(path.string() + ": unexpected header");
    }
    std::vector<EpisodeMetrics> rows;
    int number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != kMetricColumns.size()) {
            throw std::runtime_error(path.string() + ":" + std::to_string(number) + ": wrong field count");
        }
        EpisodeMetrics m;
        m.episode = parse_field<int>(fields[0], path, number);
        m.rho = parse_field<double>(fields[1], path, number);
        m.epsilon = parse_field<double>(fields[2], path, number);
        m.mean_reward = parse_field<double>(fields[3], path, number);
        m.running_mean_reward = parse_field<double>(fields[4], path, number);
        m.running_sum_reward = parse_field<double>(fields[5], path, number);
        m.served = parse_field<long>(fields[6], path, number);
        m.discarded = parse_field<long>(fields[7], path, number);
        m.rejected = parse_field<long>(fields[8], path, number);
        m.training_jobs = parse_field<long>(fields[9], path, number);
        m.mean_abs_td = parse_field<double>(fields[10], path, number);
        rows.push_back(m);
    }
    return rows;
}

void accumulate_running(std::vector<EpisodeMetrics>& rows) {
    double sum = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        sum += rows[i].mean_reward;
        rows[i].running_sum_reward = sum;
        rows[i].running_mean_reward = sum / static_cast<double>(i + 1);
    }
}

MeanStderr mean_stderr(const std::vector<double>& values) {
    MeanStderr out;
    if (values.empty()) return out;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(values.size());
    if (values.size() < 2) return out;
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    const double n = static_cast<double>(values.size());
    out.stderr_ = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    return out;
}

void write_seed_summary(const std::vector<std::vector<EpisodeMetrics>>& per_seed,
                        const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "episode,seeds";
    for (std::size_t c = 1; c < kMetricColumns.size(); ++c) {
        out << ',' << kMetricColumns[c] << "_mean," << kMetricColumns[c] << "_stderr";
    }
    out << '\n';
    if (per_seed.empty()) return;
    const std::size_t episodes = per_seed.front().size();
    for (const auto& rows : per_seed) {
        if (rows.size() != episodes) throw std::runtime_error("seed runs have different lengths");
    }
    using Getter = double (*)(const EpisodeMetrics&);
    const Getter getters[] = {
        [](const EpisodeMetrics& m) { return m.rho; },
        [](const EpisodeMetrics& m) { return m.epsilon; },
        [](const EpisodeMetrics& m) { return m.mean_reward; },
        [](const EpisodeMetrics& m) { return m.running_mean_reward; },
        [](const EpisodeMetrics& m) { return m.running_sum_reward; },
        [](const EpisodeMetrics& m) { return static_cast<double>(m.served); },
        [](const EpisodeMetrics& m) { return static_cast<double>(m.discarded); },
        [](const EpisodeMetrics& m) { return static_cast<double>(m.rejected); },
        [](const EpisodeMetrics& m) { return static_cast<double>(m.training_jobs); },
        [](const EpisodeMetrics& m) { return m.mean_abs_td; },
    };
    for (std::size_t e = 0; e < episodes; ++e) {
        out << per_seed.front()[e].episode << ',' << per_seed.size();
        for (const Getter get : getters) {
            std::vector<double> values;
            for (const auto& rows : per_seed) values.push_back(get(rows[e]));
            const auto stats = mean_stderr(values);
            out << ',' << format_exact(stats.mean) << ',' << format_exact(stats.stderr_);
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace mecsched
