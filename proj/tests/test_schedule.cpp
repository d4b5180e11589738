#include <doctest.h>

#include "ctca/common.hpp"
#include "ctca/schedule.hpp"

using namespace ctca;

TEST_CASE("base preset hits documented exact values") {
    const WarmupSchedule s = WarmupSchedule::base_preset();
    CHECK(s.lr_at(0) == 0.0);
    CHECK(s.lr_at(10000) == 3e-4);
    CHECK(s.lr_at(5000) == 3e-4 * 0.125);
    CHECK(s.lr_at(210000) == 0.7e-4);
    CHECK(s.lr_at(410000) == 0.175e-4);
}

TEST_CASE("between windows the last maximum is held") {
    const WarmupSchedule s = WarmupSchedule::base_preset();
    CHECK(s.lr_at(10001) == 3e-4);
    CHECK(s.lr_at(199999) == 3e-4);
    CHECK(s.lr_at(200000) == 0.0);
    CHECK(s.lr_at(205000) == 0.7e-4 * 0.125);
    CHECK(s.lr_at(399999) == 0.7e-4);
    CHECK(s.lr_at(500000) == 0.175e-4);
    CHECK(s.lr_at(10000000) == 0.175e-4);
}

TEST_CASE("lr is non-decreasing within each warmup window") {
    const WarmupSchedule s = WarmupSchedule::base_preset();
    for (const WarmupSegment& seg : s.segments()) {
        double prev = -1.0;
        for (int64_t it = seg.start; it <= seg.start + seg.duration; it += 250) {
            const double lr = s.lr_at(it);
            CHECK(lr >= prev);
            prev = lr;
        }
        CHECK(s.lr_at(seg.start) == 0.0);
        CHECK(s.lr_at(seg.start + seg.duration) == seg.lr_max);
    }
}

TEST_CASE("constant schedule is flat from iteration 0") {
    const WarmupSchedule s = WarmupSchedule::constant(3e-4);
    CHECK(s.lr_at(0) == 3e-4);
    CHECK(s.lr_at(1) == 3e-4);
    CHECK(s.lr_at(123456) == 3e-4);
    CHECK(s.is_constant());
}

TEST_CASE("scaled_to keeps the three-phase shape") {
    const WarmupSchedule s = WarmupSchedule::base_preset().scaled_to(10000, 500000);
    REQUIRE(s.segments().size() == 3);
    CHECK(s.segments()[0].start == 0);
    CHECK(s.segments()[0].duration == 200);
    CHECK(s.segments()[1].start == 4000);
    CHECK(s.segments()[2].start == 8000);
    CHECK(s.lr_at(200) == 3e-4);
    CHECK(s.lr_at(3000) == 3e-4);
    CHECK(s.lr_at(4200) == 0.7e-4);
}

TEST_CASE("invalid schedules are rejected") {
    CHECK_THROWS_AS(WarmupSchedule(std::vector<WarmupSegment>{}), ConfigError);
    CHECK_THROWS_AS(WarmupSchedule({{0, 0, 1e-4}}), ConfigError);
    CHECK_THROWS_AS(WarmupSchedule({{-5, 10, 1e-4}}), ConfigError);
    CHECK_THROWS_AS(WarmupSchedule({{0, 100, 1e-4}, {50, 100, 1e-4}}), ConfigError);
    CHECK_THROWS_AS(WarmupSchedule::base_preset().lr_at(-1), ConfigError);
}
