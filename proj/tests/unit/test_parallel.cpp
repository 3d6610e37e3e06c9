#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <numeric>
#include <vector>

#include "sarloc/errors.hpp"
#include "sarloc/parallel.hpp"

using namespace sarloc;

TEST_CASE("every index runs exactly once") {
    for (int workers : {1, 2, 5}) {
        std::vector<std::atomic<int>> hits(100);
        for (auto& h : hits) h.store(0);
        parallel_for(100, workers, [&](int i) { hits[std::size_t(i)].fetch_add(1); });
        for (const auto& h : hits) REQUIRE(h.load() == 1);
    }
}

TEST_CASE("zero and negative counts are no-ops") {
    int calls = 0;
    parallel_for(0, 4, [&](int) { ++calls; });
    parallel_for(-3, 4, [&](int) { ++calls; });
    CHECK(calls == 0);
}

TEST_CASE("worker count must be positive") {
    CHECK_THROWS_AS(parallel_for(3, 0, [](int) {}), UsageError);
    CHECK_THROWS_AS(parallel_for(3, -1, [](int) {}), UsageError);
}

TEST_CASE("worker exceptions surface on the caller") {
    for (int workers : {1, 3}) {
        CHECK_THROWS_AS(parallel_for(50, workers,
                                     [](int i) {
                                         if (i == 17) throw ValidationError("boom");
                                     }),
                        ValidationError);
    }
}

TEST_CASE("an exception stops the sweep short") {
    std::atomic<int> done{0};
    try {
        parallel_for(10000, 4, [&](int i) {
            if (i == 0) throw UsageError("halt");
            done.fetch_add(1);
        });
        FAIL("expected a throw");
    } catch (const UsageError&) {
    }
    CHECK(done.load() < 10000);
}

TEST_CASE("results land at their own indices") {
    std::vector<long> out(257, -1);
    parallel_for(int(out.size()), 8, [&](int i) { out[std::size_t(i)] = long(i) * i; });
    for (std::size_t i = 0; i < out.size(); ++i) REQUIRE(out[i] == long(i) * long(i));
}
