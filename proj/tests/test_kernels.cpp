#include "doctest.h"

#include "patternforge/kernels.hpp"

#include <stdexcept>
#include "patternforge/quadrature.hpp"

#include <cmath>
#include <random>

using namespace patternforge;

namespace {

// Independent oracle: K_nu(x) = int_0^inf e^{-x cosh t} cosh(nu t) dt,
// truncated where the integrand underflows. Uniform panels resolve the
// order-one variation scale of x cosh(t) in log coordinates.
double k_oracle(int nu, double x) {
    double tmax = std::acosh(745.0 / x + 1.0);
    const int npan = 48;
    double acc = 0.0;
    for (int p = 0; p < npan; ++p) {
        Rule1D r = gauss_legendre_on(16, tmax * p / npan, tmax * (p + 1) / npan);
        for (std::size_t i = 0; i < r.size(); ++i)
            acc += r.w[i] * std::exp(-x * std::cosh(r.x[i])) * std::cosh(nu * r.x[i]);
    }
    return acc;
}

} // namespace

TEST_CASE("yukawa basics") {
    CHECK(yukawa(1.0, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(yukawa(0.5, 2.0) == doctest::Approx(std::exp(-1.0) / 2.0).epsilon(1e-15));
    // monotone decreasing in r
    double prev = yukawa(2.0, 0.5);
    for (double r = 1.0; r < 40.0; r *= 1.7) {
        double v = yukawa(2.0, r);
        CHECK(v < prev);
        prev = v;
    }
    CHECK(yukawa(2.0, 500.0) < 1e-300);
    CHECK_THROWS_AS(yukawa(1.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(yukawa(1.0, -1.0), std::domain_error);
}

TEST_CASE("K0/K1 against the integral-representation oracle") {
    CHECK(bessel_k0(1.0) == doctest::Approx(0.4210244382407084).epsilon(1e-12));
    CHECK(bessel_k1(1.0) == doctest::Approx(0.6019072301972346).epsilon(1e-12));
    for (double x : {1e-6, 0.01, 0.3, 1.0, 1.9, 2.0, 2.1, 5.0, 17.0, 80.0, 300.0, 650.0}) {
        double o0 = k_oracle(0, x), o1 = k_oracle(1, x);
        CHECK(std::abs(bessel_k0(x) / o0 - 1.0) < 1e-12);
        CHECK(std::abs(bessel_k1(x) / o1 - 1.0) < 1e-12);
    }
}

TEST_CASE("K0/K1 against the standard library evaluation") {
    for (double x : {0.05, 0.7, 1.3, 2.5, 9.0, 60.0}) {
        CHECK(bessel_k0(x) == doctest::Approx(std::cyl_bessel_k(0.0, x)).epsilon(1e-12));
        CHECK(bessel_k1(x) == doctest::Approx(std::cyl_bessel_k(1.0, x)).epsilon(1e-12));
    }
}

TEST_CASE("derivative recurrences") {
    // K0' = -K1 by central differences
    for (double x : {0.1, 0.5, 2.0, 7.0, 30.0, 50.0}) {
        double h = 1e-5 * std::max(1.0, x);
        double d = (bessel_k0(x + h) - bessel_k0(x - h)) / (2.0 * h);
        CHECK(std::abs(d + bessel_k1(x)) < 1e-8 * std::max(1.0, std::abs(d)));
    }
    // (r K1)' + r K0 = 0
    for (double r = 0.1; r <= 50.0; r *= 2.3) {
        double h = 1e-5 * std::max(1.0, r);
        double d = ((r + h) * bessel_k1(r + h) - (r - h) * bessel_k1(r - h)) / (2.0 * h);
        double scale = std::max(1.0, r * bessel_k0(r));
        CHECK(std::abs(d + r * bessel_k0(r)) < 1e-7 * scale);
    }
}

TEST_CASE("asymptotics") {
    // K_nu(r) sqrt(r) e^r -> sqrt(pi/2); the deviation at finite r is the
    // first asymptotic correction (4 nu^2 - 1)/(8r), so check against that
    // envelope (the raw ratio sits slightly above 1e-3 even at r = 100).
    const double target = std::sqrt(M_PI / 2.0);
    for (double r : {50.0, 100.0, 200.0}) {
        double d0 = std::abs(bessel_k0(r) * std::sqrt(r) * std::exp(r) / target - 1.0);
        double d1 = std::abs(bessel_k1(r) * std::sqrt(r) * std::exp(r) / target - 1.0);
        CHECK(d0 < 1.1 / (8.0 * r));
        CHECK(d0 > 0.9 / (8.0 * r));
        CHECK(d1 < 1.1 * 3.0 / (8.0 * r));
        CHECK(std::max(d0, d1) < 1e-2);
    }
    // K0(r) ~ -log r as r -> 0: K0 + log(x/2) + gamma_E = O(x^2 log x)
    const double euler = 0.5772156649015329;
    for (double x : {1e-6, 1e-4, 1e-3}) {
        CHECK(std::abs(bessel_k0(x) + std::log(0.5 * x) + euler) <
              std::max(1e-12, x * x * (std::abs(std::log(x)) + 2.0)));
    }
    // underflow policy
    auto r = bessel_k(0, 710.0);
    CHECK(r.value == 0.0);
    CHECK(r.underflowed);
    CHECK_FALSE(bessel_k(1, 10.0).underflowed);
    CHECK_THROWS_AS(bessel_k(2, 1.0), std::domain_error);
}

TEST_CASE("g_kn dispatch") {
    CHECK(g_kn(3, 1.0, 1.0) == yukawa(1.0, 1.0)); // bit-identical
    CHECK(g_kn(2, 1.0, 1.0) == doctest::Approx(0.8420488764814164).epsilon(1e-12));
    CHECK_THROWS_AS(g_kn(4, 1.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(g_kn(2, 1.0, 0.0), std::domain_error);
    // 2 K0(kappa r) ~ -2 log(kappa r) + const as r -> 0
    double k = 0.7;
    double c = 2.0 * (std::log(2.0) - 0.5772156649015329);
    for (double r : {1e-5, 1e-7}) {
        CHECK(std::abs(g_kn(2, k, r) - (-2.0 * std::log(k * r) + c)) < 1e-8);
    }
    // bit-for-bit property on a sample of arguments
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uk(0.2, 4.0), ur(0.05, 20.0);
    for (int i = 0; i < 50; ++i) {
        double kk = uk(rng), rr = ur(rng);
        CHECK(g_kn(3, kk, rr) == yukawa(kk, rr));
    }
}

TEST_CASE("identity suite: sample points") {
    auto rep = identity_suite(2.0, 1.0, 0.5, 0.7);
    REQUIRE(rep.size() == 5);
    for (const auto& r : rep) {
        CAPTURE(r.id);
        CHECK(r.converged);
        CHECK(r.residual < 1e-10);
    }
    // kappa = 2: plane integral of the kernel equals pi
    CHECK(rep[2].rhs == doctest::Approx(M_PI).epsilon(1e-15));
    CHECK(rep[2].lhs == doctest::Approx(M_PI).epsilon(1e-10));
}

TEST_CASE("identity suite: delta = 0 reduction and K0 cross-check") {
    auto rep = identity_suite(1.0, 1.0, 0.0, 0.0);
    // offset-plane identity at delta=0 reduces to the plain plane integral
    CHECK(rep[4].rhs == doctest::Approx(rep[2].rhs).epsilon(1e-14));
    CHECK(rep[4].residual < 1e-10);
    // cosine-line identity at beta=0, alpha=1: lhs = 2 K0(1)
    CHECK(rep[0].lhs == doctest::Approx(2.0 * bessel_k0(1.0)).epsilon(1e-10));
}

TEST_CASE("identity suite: randomized parameter sweep") {
    std::mt19937_64 rng(2026);
    std::uniform_real_distribution<double> uk(0.2, 4.0), up(0.05, 2.5);
    for (int s = 0; s < 20; ++s) {
        double k = uk(rng), a = up(rng), b = up(rng), d = up(rng);
        auto rep = identity_suite(k, a, b, d);
        for (const auto& r : rep) {
            CAPTURE(r.id);
            CAPTURE(k);
            CAPTURE(a);
            CAPTURE(b);
            CAPTURE(d);
            CHECK(r.residual < 1e-8);
        }
    }
}
