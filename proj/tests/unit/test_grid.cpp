#include <catch2/catch_amalgamated.hpp>

#include "sarloc/grid.hpp"

using namespace sarloc;

TEST_CASE("grid construction and access") {
    Grid<float> g(3, 4, 1.5f);
    CHECK(g.height == 3);
    CHECK(g.width == 4);
    CHECK(g.size() == 12);
    CHECK(g.at(2, 3) == 1.5f);
    g.at(1, 2) = -2.f;
    CHECK(g.at(1, 2) == -2.f);
    CHECK(g.data[1 * 4 + 2] == -2.f); // row-major layout

    CHECK_THROWS_AS(Grid<float>(0, 4), SizingError);
    CHECK_THROWS_AS(Grid<float>(4, 0), SizingError);
    CHECK_THROWS_AS(Grid<float>(-1, 4), SizingError);
}

TEST_CASE("grid equality and shape") {
    Grid<int> a(2, 2, 7), b(2, 2, 7), c(2, 3, 7);
    CHECK(a == b);
    CHECK(a.same_shape(b));
    CHECK_FALSE(a.same_shape(c));
    b.at(0, 1) = 8;
    CHECK_FALSE(a == b);
}

TEST_CASE("reflect indexing mirrors without repeating the edge") {
    CHECK(reflect_index(0, 5) == 0);
    CHECK(reflect_index(4, 5) == 4);
    CHECK(reflect_index(-1, 5) == 0);
    CHECK(reflect_index(-2, 5) == 1);
    CHECK(reflect_index(5, 5) == 4);
    CHECK(reflect_index(6, 5) == 3);
    CHECK(reflect_index(-1, 1) == 0);
    CHECK(reflect_index(3, 1) == 0);
    // deep out-of-range folds back into range
    CHECK(reflect_index(17, 5) == reflect_index(17 - 2 * 5, 5));
}

TEST_CASE("crop and paste round trip") {
    Grid<float> g(6, 8);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 8; ++c) g.at(r, c) = float(r * 8 + c);

    Grid<float> sub = crop(g, 2, 3, 3, 4);
    CHECK(sub.height == 3);
    CHECK(sub.width == 4);
    CHECK(sub.at(0, 0) == g.at(2, 3));
    CHECK(sub.at(2, 3) == g.at(4, 6));

    Grid<float> dst(6, 8, 0.f);
    paste(dst, sub, 2, 3);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 8; ++c) {
            const bool inside = r >= 2 && r < 5 && c >= 3 && c < 7;
            CHECK(dst.at(r, c) == (inside ? g.at(r, c) : 0.f));
        }
}

TEST_CASE("crop and paste reject out-of-bounds regions") {
    Grid<float> g(4, 4, 0.f);
    CHECK_THROWS_AS(crop(g, 0, 0, 5, 1), SizingError);
    CHECK_THROWS_AS(crop(g, 3, 3, 2, 2), SizingError);
    CHECK_THROWS_AS(crop(g, -1, 0, 2, 2), SizingError);
    Grid<float> small(2, 2, 1.f);
    CHECK_THROWS_AS(paste(g, small, 3, 0), SizingError);
    CHECK_THROWS_AS(paste(g, small, 0, -1), SizingError);
}
