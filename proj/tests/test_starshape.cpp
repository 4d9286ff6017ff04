#include "doctest.h"

#include "patternforge/starshape.hpp"

#include <cmath>
#include <random>

using namespace patternforge;

namespace {

std::vector<double> random_even(const StarBasis& b, int kband, unsigned seed, double amp) {
    std::vector<double> c(b.dim(), 0.0);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (std::size_t i = 0; i < b.dim(); ++i) {
        int k = b.degree_of(i);
        if (k % 2 == 0 && k <= kband) c[i] = amp * nd(rng) / (1.0 + k * k);
    }
    return c;
}

} // namespace

TEST_CASE("circle basis round trip and orthonormality") {
    StarBasis b(2, 128);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    std::vector<double> c(b.dim(), 0.0);
    for (int k = 0; k <= 16; ++k) {
        c[b.index(k, 0)] = nd(rng);
        if (k > 0) c[b.index(k, 1)] = nd(rng);
    }
    auto g = b.synth(c);
    auto c2 = b.analyze(g);
    for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(c2[i] == doctest::Approx(c[i]).epsilon(1e-12).scale(1.0));
    // Parseval
    double cs = 0.0, gi = 0.0;
    for (double x : c) cs += x * x;
    for (std::size_t i = 0; i < b.grid_size(); ++i) gi += b.weight(i) * g[i] * g[i];
    CHECK(gi == doctest::Approx(cs).epsilon(1e-12));
}

TEST_CASE("sphere basis round trip, Laplacian, gradient") {
    StarBasis b(3, 24, 48);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    std::vector<double> c(b.dim(), 0.0);
    for (std::size_t i = 0; i < b.dim(); ++i)
        if (b.degree_of(i) <= 10) c[i] = nd(rng) / (1.0 + b.degree_of(i));
    auto g = b.synth(c);
    auto c2 = b.analyze(g);
    double err = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) err = std::max(err, std::abs(c[i] - c2[i]));
    CHECK(err < 1e-11);

    // Laplace-Beltrami eigenvalue on a single harmonic
    std::vector<double> e(b.dim(), 0.0);
    e[b.index(4, 2)] = 1.0;
    auto lap = b.synth(b.laplacian(e));
    auto base = b.synth(e);
    for (std::size_t i = 0; i < b.grid_size(); i += 37)
        CHECK(lap[i] == doctest::Approx(-20.0 * base[i]).epsilon(1e-11).scale(1.0));

    // gradient by finite differences along latitude for a zonal harmonic
    std::vector<double> z(b.dim(), 0.0);
    z[b.index(3, 0)] = 1.0;
    std::vector<double> g1, g2;
    b.gradient(z, g1, g2);
    // compare with eval-based finite difference at a grid direction
    auto d = b.dir(5 * 48 + 7);
    double th = std::acos(d[2]);
    double ph = std::atan2(d[1], d[0]);
    auto at = [&](double t) {
        return b.eval(z, {std::sin(t) * std::cos(ph), std::sin(t) * std::sin(ph),
                          std::cos(t)});
    };
    double h = 1e-6;
    double fd = (at(th + h) - at(th - h)) / (2 * h);
    CHECK(g1[5 * 48 + 7] == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("point evaluation agrees with grid synthesis") {
    StarBasis b(3, 24, 48);
    auto c = random_even(b, 12, 17, 0.4);
    auto g = b.synth(c);
    for (std::size_t i : {std::size_t(3), std::size_t(200), std::size_t(1000)}) {
        auto d = b.dir(i);
        CHECK(b.eval(c, d) == doctest::Approx(g[i]).epsilon(1e-11).scale(1.0));
    }
}

TEST_CASE("evenness bookkeeping") {
    StarBasis b(2, 64);
    std::vector<double> c(b.dim(), 0.0);
    c[b.index(2, 0)] = 1.0;
    CHECK(b.odd_mass(c) == 0.0);
    c[b.index(3, 1)] = 0.5;
    CHECK(b.odd_mass(c) == doctest::Approx(0.5));
    b.project_even(c);
    CHECK(b.odd_mass(c) == 0.0);
    // even phi(-x) = phi(x) on the grid for even-only coefficients
    auto g = b.synth(c);
    const std::size_t n = b.grid_size();
    for (std::size_t i = 0; i < n; ++i)
        CHECK(g[i] == doctest::Approx(g[(i + n / 2) % n]).epsilon(1e-12).scale(1.0));
}

TEST_CASE("round shape and min radius") {
    StarBasis b2(2, 64);
    StarShape r2 = round_shape(b2, 8, 1.5);
    auto g = b2.synth(r2.coeff);
    for (std::size_t i = 0; i < b2.grid_size(); i += 11)
        CHECK(g[i] == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(r2.min_radius(b2) == doctest::Approx(1.5).epsilon(1e-14));
    StarBasis b3(3, 16, 32);
    StarShape r3 = round_shape(b3, 8, 0.7);
    CHECK(r3.min_radius(b3) == doctest::Approx(0.7).epsilon(1e-13));
}
