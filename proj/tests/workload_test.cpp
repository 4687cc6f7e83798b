#include <doctest.h>

#include <cmath>

#include "mecsched/workload.hpp"

using namespace mecsched;

TEST_CASE("default classes at C = 20") {
    const auto wl = WorkloadParams::for_capacity(20, 20);
    CHECK(wl.short_jobs.exec_min == 1);
    CHECK(wl.short_jobs.exec_max == 3);
    CHECK(wl.long_jobs.exec_min == 8);
    CHECK(wl.long_jobs.exec_max == 12);
    CHECK(wl.short_jobs.demand_min == 5);
    CHECK(wl.short_jobs.demand_max == 10);
    CHECK(wl.short_jobs.deadline == 4);
    CHECK(wl.long_jobs.deadline == 8);
    CHECK(wl.mean_exec() == doctest::Approx(8.4));
    CHECK(wl.mean_demand() == doctest::Approx(7.5));
}

TEST_CASE("arrival probability inverts the load equation") {
    const auto wl = WorkloadParams::for_capacity(20, 20);
    // rho = (3/8) N p (1/2 - 2 p_short / 5), solved for p
    auto closed_form = [](double rho, double n, double p_short) {
        return rho / (3.0 / 8.0 * n * (0.5 - 2.0 * p_short / 5.0));
    };
    CHECK(arrival_probability(0.3, wl) == doctest::Approx(closed_form(0.3, 1000, 0.2)).epsilon(1e-12));
    CHECK(arrival_probability(0.3, wl) == doctest::Approx(1.9048e-3).epsilon(1e-4));
    CHECK(arrival_probability(0.1, wl) == doctest::Approx(6.349e-4).epsilon(1e-4));
    CHECK(arrival_probability(0.0, wl) == 0.0);

    WorkloadParams few = wl;
    few.num_users = 1;
    CHECK_THROWS_AS(arrival_probability(0.3, few), ConfigError);
}

TEST_CASE("load inversion matches Monte-Carlo resource-time demand within 1%") {
    const auto wl = WorkloadParams::for_capacity(20, 20);
    const double p = arrival_probability(0.3, wl);
    Rng rng(7);
    double resource_time = 0.0;
    const int slots = 1'000'000;
    for (int t = 0; t < slots; ++t) {
        for (const Job& j : sample_arrivals(rng, p, wl)) resource_time += j.demand * j.exec_time;
    }
    const double load = resource_time / slots / (wl.capacity * wl.horizon);
    CHECK(std::abs(load - 0.3) / 0.3 < 0.01);
}

TEST_CASE("arrival sampling edge cases") {
    auto wl = WorkloadParams::for_capacity(20, 20);
    Rng rng(3);
    CHECK(sample_arrivals(rng, 0.0, wl).empty());
    wl.num_users = 3;
    const auto jobs = sample_arrivals(rng, 1.0, wl);
    CHECK(jobs.size() == 3);
    for (const auto& j : jobs) CHECK(j.waited == 0);
}

TEST_CASE("arrival statistics") {
    const auto wl = WorkloadParams::for_capacity(20, 20);
    const double p = arrival_probability(0.3, wl);
    Rng rng(11);
    long arrivals = 0;
    long short_jobs = 0;
    double exec_sum = 0.0;
    double demand_sum = 0.0;
    const int slots = 100'000;
    for (int t = 0; t < slots; ++t) {
        for (const Job& j : sample_arrivals(rng, p, wl)) {
            ++arrivals;
            exec_sum += j.exec_time;
            demand_sum += j.demand;
            if (j.deadline == wl.short_jobs.deadline) {
                ++short_jobs;
                CHECK((j.exec_time >= 1 && j.exec_time <= 3));
            } else {
                CHECK((j.exec_time >= 8 && j.exec_time <= 12));
            }
            CHECK((j.demand >= 5 && j.demand <= 10));
        }
    }
    const double mean_per_slot = static_cast<double>(arrivals) / slots;
    CHECK(mean_per_slot == doctest::Approx(wl.num_users * p).epsilon(0.01));

    const double n = static_cast<double>(arrivals);
    const double sigma = std::sqrt(n * 0.2 * 0.8);
    CHECK(std::abs(short_jobs - 0.2 * n) < 3.0 * sigma);
    CHECK(exec_sum / n == doctest::Approx(0.2 * 2 + 0.8 * 10).epsilon(0.01));
    CHECK(demand_sum / n == doctest::Approx(7.5).epsilon(0.01));
}

TEST_CASE("same seed gives the same arrival sequence") {
    const auto wl = WorkloadParams::for_capacity(20, 20);
    Rng a(99);
    Rng b(99);
    for (int t = 0; t < 2000; ++t) REQUIRE(sample_arrivals(a, 0.002, wl) == sample_arrivals(b, 0.002, wl));
}

TEST_CASE("load schedule") {
    CHECK(load_at(LoadSchedule::constant(0.3), 500) == 0.3);
    const auto ramp = LoadSchedule::ramp(0.1, 0.3, 1500);
    CHECK(load_at(ramp, 0) == 0.1);
    CHECK(load_at(ramp, 1499) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(load_at(ramp, 5000) == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(load_at(ramp, 750) == doctest::Approx(0.1 + 0.2 * 750.0 / 1499.0));
}

TEST_CASE("workload validation") {
    auto wl = WorkloadParams::for_capacity(20, 20);
    CHECK_NOTHROW(wl.validate());
    wl.long_jobs.exec_max = 21;
    CHECK_THROWS_AS(wl.validate(), std::invalid_argument);
}
