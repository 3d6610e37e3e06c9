#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sarloc/interp.hpp"
#include "sarloc/rng.hpp"
#include "../support/oracles.hpp"

using namespace sarloc;

namespace {

Grid<float> random_grid(int h, int w, std::uint64_t seed) {
    Rng rng(seed);
    Grid<float> g(h, w);
    for (auto& v : g.data) v = float(rng.uniform(0.0, 100.0));
    return g;
}

Grid<float> smooth_grid(int h, int w) {
    Grid<float> g(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            g.at(r, c) = float(std::sin(r / 7.0) + std::cos(c / 5.0));
    return g;
}

} // namespace

TEST_CASE("kernel names round trip and reject unknowns") {
    for (Kernel k : {Kernel::nearest, Kernel::bilinear, Kernel::bicubic})
        CHECK(kernel_from_name(kernel_name(k)) == k);
    CHECK_THROWS_AS(kernel_from_name("lanczos"), DispatchError);
}

TEST_CASE("resize output dimensions round half away from zero") {
    const Grid<float> g = random_grid(10, 10, 1);
    CHECK(resize(g, 1.5, Kernel::bilinear).height == 15);
    CHECK(resize(g, 0.34, Kernel::bilinear).height == 3); // round(3.4)
    CHECK(resize(g, 0.35, Kernel::bilinear).width == 4);  // round(3.5)
    const auto up = resize(random_grid(7, 11, 2), 2.0, Kernel::nearest);
    CHECK(up.height == 14);
    CHECK(up.width == 22);
    CHECK_THROWS_AS(resize(g, 0.0, Kernel::bilinear), ValidationError);
    CHECK_THROWS_AS(resize(g, -1.5, Kernel::bilinear), ValidationError);
    CHECK_THROWS_AS(resize(g, 0.01, Kernel::bilinear), SizingError);
}

TEST_CASE("unit-factor resize is the identity for every kernel") {
    const Grid<float> g = random_grid(13, 9, 3);
    for (Kernel k : {Kernel::nearest, Kernel::bilinear, Kernel::bicubic}) {
        const auto out = resize(g, 1.0, k);
        REQUIRE(out.same_shape(g));
        for (std::size_t i = 0; i < g.data.size(); ++i) REQUIRE(out.data[i] == g.data[i]);
    }
}

TEST_CASE("constant grids stay constant under resize") {
    const Grid<float> g(11, 17, 4.25f);
    for (Kernel k : {Kernel::nearest, Kernel::bilinear, Kernel::bicubic}) {
        for (double f : {0.5, 1.3, 2.0}) {
            const auto out = resize(g, f, k);
            for (float v : out.data) CHECK(std::abs(v - 4.25f) < 1e-5f);
        }
    }
}

TEST_CASE("bilinear upsampling reproduces an affine ramp away from borders") {
    Grid<float> g(16, 16);
    for (int r = 0; r < 16; ++r)
        for (int c = 0; c < 16; ++c) g.at(r, c) = float(2.0 * r + 3.0 * c + 1.0);
    const auto out = resize(g, 2.0, Kernel::bilinear);
    // linear interpolation is exact for affine inputs; the mapping is
    // y = (r + 0.5) / 2 - 0.5, so expected = 2 y + 3 x + 1
    for (int r = 4; r < 28; ++r)
        for (int c = 4; c < 28; ++c) {
            const double y = (r + 0.5) / 2.0 - 0.5;
            const double x = (c + 0.5) / 2.0 - 0.5;
            REQUIRE(std::abs(out.at(r, c) - (2.0 * y + 3.0 * x + 1.0)) < 1e-4);
        }
}

TEST_CASE("zero-degree rotation is the identity") {
    const Grid<float> g = random_grid(21, 33, 4);
    const auto out = rotate(g, 0.0);
    REQUIRE(out.same_shape(g));
    for (std::size_t i = 0; i < g.data.size(); ++i) REQUIRE(out.data[i] == g.data[i]);
}

TEST_CASE("rotation matches the per-pixel reference map") {
    const Grid<float> g = random_grid(64, 64, 5);
    for (double angle : {30.0, -17.5, 101.0}) {
        const auto lib = rotate(g, angle);
        const auto ref = oracles::rotate_reference(g, angle);
        REQUIRE(lib.same_shape(ref));
        double max_abs = 0.0;
        for (std::size_t i = 0; i < lib.data.size(); ++i)
            max_abs = std::max(max_abs, std::abs(double(lib.data[i]) - double(ref.data[i])));
        CAPTURE(angle, max_abs);
        CHECK(max_abs < 1e-3);
    }
}

TEST_CASE("rotating back nearly restores the center of a smooth image") {
    const Grid<float> g = smooth_grid(64, 64);
    const auto back = rotate(rotate(g, 23.0), -23.0);
    double sum_abs = 0.0;
    int count = 0;
    for (int r = 16; r < 48; ++r)
        for (int c = 16; c < 48; ++c) {
            sum_abs += std::abs(double(back.at(r, c)) - double(g.at(r, c)));
            ++count;
        }
    CHECK(sum_abs / count < 2e-2);
}

TEST_CASE("downsampling a sinusoid keeps values in range") {
    const Grid<float> g = smooth_grid(40, 40);
    const auto out = resize(g, 0.5, Kernel::bilinear);
    for (float v : out.data) {
        CHECK(v <= 2.0f);
        CHECK(v >= -2.0f);
    }
}
