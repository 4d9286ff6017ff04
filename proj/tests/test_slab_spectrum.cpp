#include "doctest.h"

#include "patternforge/slab_spectrum.hpp"

#include <cmath>
#include <stdexcept>

using namespace patternforge;

namespace {
const SlabParams kRef{0.5, 0.18};

// independent bisection on sigma(., 1), no derivative use
double lambda_star_bisect(const SlabParams& p) {
    double lo = 1e-8, hi = 1.0;
    while (sigma_value(p, hi, 1.0) > 0) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (sigma_value(p, mid, 1.0) > 0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}
} // namespace

TEST_CASE("sigma closed form values") {
    // gamma = 0: sigma = ell^2
    SlabParams p0{0.7, 0.0};
    for (int ell : {0, 1, 2, 5})
        CHECK(sigma_closed(p0, 2.0, ell) == doctest::Approx(double(ell) * ell).epsilon(1e-15));
    // reference point
    CHECK(sigma_closed(kRef, 1.0, 1) == doctest::Approx(0.689865160765387).epsilon(1e-10));
    CHECK_THROWS_AS(sigma_value(kRef, 0.0, 1.0), std::domain_error);
}

TEST_CASE("monotonicity in lambda") {
    for (double l = 0.25; l <= 10.0; l *= 1.7) {
        CHECK(dsigma_dlambda(kRef, l, 1.0) < 0.0);
        // matches finite differences
        double h = 1e-6;
        double fd = (sigma_value(kRef, l + h, 1.0) - sigma_value(kRef, l - h, 1.0)) / (2 * h);
        CHECK(fd == doctest::Approx(dsigma_dlambda(kRef, l, 1.0)).epsilon(1e-7));
    }
    // strict decrease for a grid of (lambda, ell)
    for (int ell : {0, 1, 3, 8})
        for (double l = 0.3; l < 8.0; l *= 2.0)
            CHECK(sigma_closed(kRef, l * 1.01, ell) < sigma_closed(kRef, l, ell));
}

TEST_CASE("sigma oracle agrees with the closed form") {
    const double lambda = 1.0;
    for (auto [k1, k2] : {std::pair{0, 0}, {1, 0}, {2, 0}, {5, 0}, {3, 4}}) {
        double oc = sigma_oracle(kRef, lambda, k1, k2);
        double cl = sigma_value(kRef, lambda, std::hypot(double(k1), double(k2)));
        CAPTURE(k1);
        CAPTURE(k2);
        CHECK(std::abs(oc - cl) / std::max(1.0, std::abs(cl)) < 1e-6);
    }
    // |k| dependence only
    double a = sigma_oracle(kRef, lambda, 3, 4);
    double b = sigma_oracle(kRef, lambda, 5, 0);
    CHECK(std::abs(a - b) < 1e-6);
    // gamma = 0, k = 0
    CHECK(sigma_oracle({1.0, 0.0}, 1.0, 0, 0) == doctest::Approx(0.0));
}

TEST_CASE("gamma window") {
    auto w = gamma_window(0.5);
    CHECK(w.lower == doctest::Approx(0.14395699839600815).epsilon(1e-12));
    CHECK(w.upper == doctest::Approx(0.22242579481786784).epsilon(1e-12));
    CHECK(w.nonempty);
    auto w1 = gamma_window(1.0);
    CHECK(w1.lower == doctest::Approx(0.5433889652230671).epsilon(1e-12));
    CHECK(w1.upper == doctest::Approx(0.4501581580785531).epsilon(1e-12));
    CHECK_FALSE(w1.nonempty);
    // crossing kappa: root of kappa^4 + kappa^2 = 1
    double lo = 0.5, hi = 1.0;
    for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (lo + hi);
        (gamma_window(mid).nonempty ? lo : hi) = mid;
    }
    CHECK(0.5 * (lo + hi) == doctest::Approx(0.7861513777574233).epsilon(1e-9));
    // nonempty iff kappa^4 + kappa^2 < 1 on a kappa grid
    for (double k = 0.1; k < 2.0; k += 0.07) {
        bool pred = k * k * k * k + k * k < 1.0;
        CHECK(gamma_window(k).nonempty == pred);
    }
}

TEST_CASE("lambda_star") {
    double ls = lambda_star(kRef);
    CHECK(std::abs(sigma_value(kRef, ls, 1.0)) < 1e-12);
    CHECK(ls == doctest::Approx(2.2290696688139712).epsilon(1e-10));
    CHECK(std::abs(ls - lambda_star_bisect(kRef)) < 1e-10);
    // sigma(0) closed expression
    double s0 = sigma_closed(kRef, ls, 0);
    double closed = 4.0 * M_PI * kRef.gamma * std::exp(-2.0 * ls * kRef.kappa) / kRef.kappa;
    CHECK(std::abs(s0 - closed) < 1e-12);
    CHECK(s0 == doctest::Approx(0.4868999252203556).epsilon(1e-9));
    // below the window: no bifurcation, carries the limit value
    SlabParams low{0.5, 0.10};
    CHECK_THROWS_AS(lambda_star(low), NoBifurcation);
    try {
        lambda_star(low);
    } catch (const NoBifurcation& e) {
        double lim = 1.0 - 2.0 * M_PI * 0.10 * (1.0 / 0.5 - 1.0 / std::sqrt(1.25));
        CHECK(e.limit_value == doctest::Approx(lim).epsilon(1e-14));
        CHECK(e.limit_value > 0.0);
    }
}

TEST_CASE("spectral certificate") {
    auto rep = spectral_certificate(kRef, 16);
    CHECK(rep.kernel_simple);
    CHECK(rep.range_coercive);
    CHECK(rep.transversal);
    CHECK(rep.sigma_at.at(0) > 0.0);
    CHECK(std::abs(rep.sigma_at.at(1)) < 1e-10);
    CHECK(rep.sigma_at.at(2) > 0.0);
    for (int ell = 1; ell < 16; ++ell)
        CHECK(rep.sigma_at.at(ell + 1) > rep.sigma_at.at(ell));
    // rejected outside the window
    CHECK_THROWS_AS(spectral_certificate({0.5, 0.0}, 16), std::domain_error);
    CHECK_THROWS_AS(spectral_certificate({1.0, 0.5}, 16), std::domain_error);
}
