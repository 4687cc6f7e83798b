#include <doctest.h>

#include <vector>

#include "mecsched/env.hpp"
#include "mecsched/random.hpp"
#include "mecsched/workload.hpp"

using namespace mecsched;

namespace {

EnvParams small_env(int capacity = 20, int buffer = 10, int horizon = 20) {
    EnvParams p;
    p.capacity = capacity;
    p.buffer_size = buffer;
    p.horizon = horizon;
    p.training_demand = capacity;
    return p;
}

Job job(int e, int c, int w, int t) { return Job{e, c, w, t}; }

// Independent placement oracle: try every start offset and check every slot.
std::optional<int> brute_force_start(const std::vector<int>& grid, int e, int c, int capacity) {
    const int horizon = static_cast<int>(grid.size());
    for (int start = 0; start + e <= horizon; ++start) {
        bool fits = true;
        for (int m = start; m < start + e; ++m) fits = fits && grid[m] + c <= capacity;
        if (fits) return start;
    }
    return std::nullopt;
}

}  // namespace

TEST_CASE("delay penalty branches") {
    CHECK(delay_penalty(1, 4) == 1.0);
    CHECK(delay_penalty(3, 4) == 0.5);
    CHECK(delay_penalty(4, 4) == 0.0);
    CHECK(delay_penalty(2, 4) == 1.0);  // w = T/2 enters the linear branch at exactly 1
    CHECK(delay_penalty(9, 8) == 0.0);
}

TEST_CASE("delay penalty is non-increasing and equals 1 exactly below T/2") {
    for (int t = 1; t <= 12; ++t) {
        double previous = 1.0;
        for (int w = 0; w <= 2 * t; ++w) {
            const double value = delay_penalty(w, t);
            CHECK(value <= previous);
            CHECK(value >= 0.0);
            CHECK((value == 1.0) == (2 * w < t || (2 * w == t)));
            previous = value;
        }
    }
}

TEST_CASE("deadline count") {
    const auto params = small_env();
    SystemState state(params);
    CHECK(deadline_count(state, Action::none()) == 0);
    CHECK(deadline_count(state, Action::slot(3)) == 0);

    // w = T is the last slot in the buffer; w = T - 1 survives one more advance
    state.buffer[0] = job(2, 5, 4, 4);
    state.buffer[1] = job(2, 5, 1, 8);
    CHECK(deadline_count(state, Action::none()) == 1);
    CHECK(deadline_count(state, Action::slot(0)) == 0);
    CHECK(deadline_count(state, Action::slot(1)) == 1);

    state.buffer[0] = job(2, 5, 3, 4);
    CHECK(deadline_count(state, Action::none()) == 0);
    // counted jobs are exactly the ones the next advance discards
    const auto next = advance(state, {}, params);
    CHECK(next.discarded == 0);
    state.buffer[0] = job(2, 5, 4, 4);
    CHECK(advance(state, {}, params).discarded == deadline_count(state, Action::none()));
}

TEST_CASE("placement examples") {
    const auto params = small_env();
    SystemState state(params);
    state.buffer[0] = job(3, 5, 0, 4);
    CHECK(placement(state, Action::slot(0), params) == 0);

    state.grid[0] = 20;
    state.grid[1] = 20;
    state.buffer[1] = job(2, 1, 0, 4);
    CHECK(placement(state, Action::slot(1), params) == 2);

    std::fill(state.grid.begin(), state.grid.end(), 16);
    state.buffer[2] = job(2, 5, 0, 4);
    CHECK_FALSE(is_valid(state, Action::slot(2), params));

    CHECK_FALSE(is_valid(state, Action::slot(5), params));  // empty slot
    CHECK_FALSE(is_valid(state, Action::none(), params));
    CHECK_THROWS_AS(placement(state, Action::slot(10), params), std::out_of_range);
    CHECK_THROWS_AS(placement(state, Action::slot(-1), params), std::out_of_range);
}

TEST_CASE("placement and scheduling agree with exhaustive enumeration on small systems") {
    long checked = 0;
    for (int capacity = 1; capacity <= 4; ++capacity) {
        for (int horizon = 1; horizon <= 4; ++horizon) {
            std::vector<int> grid(horizon, 0);
            // odometer over {0..C}^M
            while (true) {
                for (int buffer = 1; buffer <= 3; ++buffer) {
                    EnvParams params = small_env(capacity, buffer, horizon);
                    for (int e = 1; e <= horizon; ++e) {
                        for (int c = 1; c <= capacity; ++c) {
                            for (int index = 0; index < buffer; ++index) {
                                SystemState state(params);
                                state.grid = grid;
                                for (int other = 0; other < buffer; ++other) {
                                    state.buffer[other] = job(1, 1, 0, 2);
                                }
                                state.buffer[index] = job(e, c, 0, 4);
                                const auto expected = brute_force_start(grid, e, c, capacity);
                                const auto got = placement(state, Action::slot(index), params);
                                REQUIRE(got == expected);
                                if (expected) {
                                    const auto next = schedule_job(state, index, params);
                                    auto oracle = grid;
                                    for (int m = *expected; m < *expected + e; ++m) oracle[m] += c;
                                    REQUIRE(next.grid == oracle);
                                    REQUIRE_FALSE(next.buffer[index].has_value());
                                    for (int m = 0; m < horizon; ++m) REQUIRE(next.grid[m] <= capacity);
                                } else {
                                    REQUIRE_THROWS_AS(schedule_job(state, index, params), std::logic_error);
                                }
                                ++checked;
                            }
                        }
                    }
                }
                int pos = 0;
                while (pos < horizon && grid[pos] == capacity) grid[pos++] = 0;
                if (pos == horizon) break;
                ++grid[pos];
            }
        }
    }
    CHECK(checked > 10000);
}

TEST_CASE("reward") {
    const auto params = small_env();
    SystemState state(params);
    state.buffer[0] = job(10, 5, 1, 8);
    CHECK(reward(state, Action::slot(0), params) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(reward(state, Action::slot(4), params) == 0.0);  // invalid, nothing expiring

    SUBCASE("literal job term without scaling") {
        EnvParams literal = params;
        literal.scale_reward = false;
        CHECK(reward(state, Action::slot(0), literal) == 10.0);
    }
    SUBCASE("scheduling at the deadline earns nothing but avoids the penalty") {
        state.buffer[0] = job(10, 5, 8, 8);
        CHECK(reward(state, Action::slot(0), params) == 0.0);
        CHECK(reward(state, Action::none(), params) == doctest::Approx(-0.1));
    }
    SUBCASE("penalty on a valid action counts the other expiring jobs") {
        state.buffer[1] = job(2, 5, 4, 4);
        state.buffer[2] = job(2, 5, 8, 8);
        CHECK(reward(state, Action::slot(0), params) == doctest::Approx(0.5 - 0.2));
    }
}

TEST_CASE("schedule_job examples") {
    const auto params = small_env();
    SystemState state(params);
    state.buffer[0] = job(2, 7, 0, 4);
    auto next = schedule_job(state, 0, params);
    CHECK(next.grid[0] == 7);
    CHECK(next.grid[1] == 7);
    CHECK(next.grid[2] == 0);
    CHECK(next.occupied() == 0);

    state = SystemState(params);
    state.grid[0] = 20;
    state.buffer[3] = job(1, 20, 0, 4);
    next = schedule_job(state, 3, params);
    CHECK(next.grid[0] == 20);
    CHECK(next.grid[1] == 20);
    CHECK(next.grid[2] == 0);
}

TEST_CASE("training job insertion") {
    const auto params = small_env();
    SystemState state(params);
    auto star = insert_training_job(state, 20, params);
    REQUIRE(star);
    CHECK(star->grid[0] == 20);
    CHECK(std::count(star->grid.begin(), star->grid.end(), 0) == 19);

    state.grid[0] = 20;
    state.grid[1] = 20;
    state.grid[2] = 5;
    const SystemState original = state;
    star = insert_training_job(state, 20, params);
    REQUIRE(star);
    CHECK(star->grid[3] == 20);
    CHECK(state == original);  // input untouched

    std::fill(state.grid.begin(), state.grid.end(), 1);
    CHECK_FALSE(insert_training_job(state, 20, params).has_value());
}

TEST_CASE("advance") {
    SUBCASE("grid shift") {
        const auto params = small_env(20, 10, 3);
        SystemState state(params);
        state.grid = {5, 3, 2};
        const auto result = advance(state, {}, params);
        CHECK(result.state.grid == std::vector<int>{3, 2, 0});
    }
    SUBCASE("deadline discard") {
        const auto params = small_env();
        SystemState state(params);
        state.buffer[4] = job(3, 5, 8, 8);
        const auto result = advance(state, {}, params);
        CHECK(result.discarded == 1);
        CHECK(result.state.occupied() == 0);
    }
    SUBCASE("waiting time increments and survivors stay in place") {
        const auto params = small_env();
        SystemState state(params);
        state.buffer[2] = job(3, 5, 7, 8);
        const auto result = advance(state, {}, params);
        CHECK(result.discarded == 0);
        REQUIRE(result.state.buffer[2]);
        CHECK(result.state.buffer[2]->waited == 8);
    }
    SUBCASE("overflow rejects") {
        const auto params = small_env();
        SystemState state(params);
        for (auto& slot : state.buffer) slot = job(3, 5, 0, 8);
        const std::vector<Job> arrivals{job(1, 5, 0, 4), job(2, 5, 0, 4)};
        const auto result = advance(state, arrivals, params);
        CHECK(result.rejected == 2);
    }
    SUBCASE("arrivals fill the lowest free slots in order") {
        const auto params = small_env(20, 4, 20);
        SystemState state(params);
        state.buffer[0] = job(3, 5, 0, 8);
        state.buffer[2] = job(3, 5, 0, 8);
        const std::vector<Job> arrivals{job(1, 6, 3, 4), job(2, 7, 0, 4), job(3, 8, 0, 4)};
        const auto result = advance(state, arrivals, params);
        REQUIRE(result.state.buffer[1]);
        REQUIRE(result.state.buffer[3]);
        CHECK(result.state.buffer[1]->demand == 6);
        CHECK(result.state.buffer[1]->waited == 0);
        CHECK(result.state.buffer[3]->demand == 7);
        CHECK(result.rejected == 1);
    }
}

TEST_CASE("step") {
    const auto params = small_env();
    SUBCASE("void on an empty system") {
        const SystemState state(params);
        const auto result = step(state, Action::none(), {}, params);
        CHECK(result.reward == 0.0);
        CHECK(result.next == state);
        CHECK_FALSE(result.info.valid);
    }
    SUBCASE("valid schedule then advance") {
        SystemState state(params);
        state.grid[0] = 3;
        state.buffer[0] = job(2, 7, 0, 4);
        const auto result = step(state, Action::slot(0), {}, params);
        // placement at 0..1 gives [10, 7, 0, ...], then the shift drops slot 0
        CHECK(result.next.grid[0] == 7);
        CHECK(result.next.grid[1] == 0);
        CHECK(result.info.served);
        CHECK(result.info.satisfaction == 1.0);
        CHECK(result.reward == doctest::Approx(0.1));
    }
    SUBCASE("invalid index acts as void") {
        SystemState state(params);
        state.buffer[0] = job(2, 7, 4, 4);
        const auto result = step(state, Action::slot(6), {}, params);
        CHECK(result.reward == doctest::Approx(-0.1));
        CHECK(result.info.discarded == 1);
        CHECK_FALSE(result.info.served);
        CHECK(result.next.occupied() == 0);
    }
}

TEST_CASE("random trajectories keep grid bounds, shift identity and job conservation") {
    EnvParams params = small_env();
    WorkloadParams wl = WorkloadParams::for_capacity(params.capacity, params.horizon);
    Rng rng(42);
    MecEnvironment env(params);
    const double p = arrival_probability(0.3, wl);
    for (int t = 0; t < 5000; ++t) {
        const SystemState before = env.state();
        if (t % 7 == 0) {
            if (auto star = insert_training_job(before, params.training_demand, params)) {
                env.apply_training_state(*star);
            }
        }
        const int pick = static_cast<int>(rng.uniform_int(0, params.buffer_size));
        const Action action = Action::from_output(pick, params.buffer_size);
        const auto arrivals = sample_arrivals(rng, p, wl);
        const SystemState acted = env.state();
        const auto scheduled = is_valid(acted, action, params)
                                   ? schedule_job(acted, action.index(), params)
                                   : acted;
        const auto result = env.step(action, arrivals);

        for (int m = 0; m < params.horizon; ++m) {
            REQUIRE(result.next.grid[m] >= 0);
            REQUIRE(result.next.grid[m] <= params.capacity);
        }
        for (int m = 0; m + 1 < params.horizon; ++m) REQUIRE(result.next.grid[m] == scheduled.grid[m + 1]);
        REQUIRE(result.next.grid.back() == 0);
        if (!result.info.valid && deadline_count(acted, action) == 0) REQUIRE(result.reward == 0.0);
        if (result.reward > 0.0) REQUIRE(result.info.valid);
        for (const auto& slot : result.next.buffer) {
            if (slot) REQUIRE(slot->waited <= slot->deadline);
        }
        REQUIRE(env.generated() ==
                env.served() + env.discarded() + env.rejected() + env.state().occupied());
    }
}
