#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ampere2d/polar_calculus.hpp"
#include "ampere2d/radial_profile.hpp"

using namespace ampere2d;

namespace {

double rational_ftilde(double r) { return 1.0 + 0.1 * std::pow(1.0 + r * r, -2.0); }

// independently derived golden value for the expansion constant of the
// eps = 0.1 rational family (high-precision quadrature of the closed-form
// integrand -2 d^2 s^3 / ((1+s^2)^2 (U'+s)^2), d = 0.05)
constexpr double kGoldenCd = -0.00060999378720046345;

}  // namespace

TEST_CASE("radial solution for the unit source") {
    auto g = PolarGrid::make_global(96, 64, 64.0);
    auto p = build_radial_solution([](double) { return 1.0; }, g->r);
    for (int i = 0; i < g->n_r(); ++i) {
        double r = g->r[i];
        CHECK(p.U[i] == Catch::Approx(0.5 * r * r).margin(1e-12));
        CHECK(p.Uprime[i] == Catch::Approx(r).margin(1e-12));
        CHECK(p.Usecond[i] == Catch::Approx(1.0).margin(1e-12));
        CHECK(std::abs(p.F2[i]) < 1e-12);
    }
    CHECK(p.d == Catch::Approx(0.0).margin(1e-13));
    CHECK(p.c_d == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("radial solution for the scaled source") {
    auto g = PolarGrid::make_global(64, 64, 64.0);
    auto p = build_radial_solution([](double) { return 4.0; },  g->r,
                                   no_expansion_constants());
    for (int i = 0; i < g->n_r(); ++i) {
        double r = g->r[i];
        CHECK(p.U[i] == Catch::Approx(r * r).margin(1e-11));
        // det(D^2 U) = U'' U'/r
        CHECK(p.Usecond[i] * p.uprime_over_r(i) == Catch::Approx(4.0).margin(1e-11));
    }
}

TEST_CASE("radial solution for the rational family") {
    auto g = PolarGrid::make_global(128, 64, 64.0);
    auto p = build_radial_solution(rational_ftilde, g->r);

    SECTION("closed-form U' at r = 1") {
        // inner integral: int_0^1 2t*0.1(1+t^2)^{-2} dt = 0.1/2 => U'(1) = sqrt(1.05)
        CubicSpline up(p.r, p.Uprime);
        CHECK(up(1.0) == Catch::Approx(std::sqrt(1.05)).margin(1e-9));
    }

    SECTION("strict convexity and the quadrature identity") {
        for (int i = 1; i < g->n_r(); ++i) {
            CHECK(p.Uprime[i] > 0.0);
            CHECK(p.Usecond[i] > 0.0);
            CHECK(p.Usecond[i] * p.Uprime[i] / p.r[i] ==
                  Catch::Approx(p.ftilde[i]).margin(1e-12));
        }
    }

    SECTION("mass and expansion constants against frozen oracles") {
        auto d = compute_d(rational_ftilde, 4000.0, 1.0, 4.0);
        CHECK(d.value == Catch::Approx(0.05).margin(d.tail_error + 1e-10));
        CHECK(std::abs(d.value - 0.05) < 2e-8);
        auto cd = compute_cd(rational_ftilde, 0.05, 4000.0);
        CHECK_FALSE(cd.domain_warning);
        CHECK(cd.value == Catch::Approx(kGoldenCd).margin(1e-7));
    }

    SECTION("consistency of c_d with the direct limit") {
        // U(r) - r^2/2 - d log r approaches c_d; residual ~ (d + d^2/2)/(2 r^2)
        int ih = -1;
        for (int i = 0; i < g->n_r(); ++i)
            if (std::abs(g->r[i] - 32.0) < 0.8) ih = i;
        REQUIRE(ih >= 0);
        double lim = p.U_minus_quad[ih] - p.d * std::log(g->r[ih]);
        CHECK(lim == Catch::Approx(p.c_d).margin(1e-4));
    }

    SECTION("far-field decay of the expansion residual") {
        // log-log slope of |U - r^2/2 - d log r - c_d| should be about -2
        std::vector<double> lx, ly;
        for (int i = 0; i < g->n_r(); ++i) {
            double r = g->r[i];
            if (r < 4.0 || r > 48.0) continue;
            double resid = std::abs(p.U_minus_quad[i] - p.d * std::log(r) - p.c_d);
            if (resid > 1e-14) {
                lx.push_back(std::log(r));
                ly.push_back(std::log(resid));
            }
        }
        double slope = ls_slope(lx, ly);
        CHECK(slope <= -2.0 + 0.3);
    }
}

TEST_CASE("expansion constants for other sources") {
    SECTION("gaussian mass") {
        auto d = compute_d([](double r) { return 1.0 + 0.1 * std::exp(-r * r); }, 40.0, 1.0, 6.0);
        // int_0^inf r e^{-r^2} dr = 1/2
        CHECK(d.value == Catch::Approx(0.05).margin(1e-12));
    }
    SECTION("negative mass flags the c_d formula domain") {
        auto ft = [](double r) { return 1.0 - 0.3 * std::pow(1.0 + r * r, -2.0); };
        auto d = compute_d(ft, 4000.0, 1.0, 4.0);
        CHECK(d.value == Catch::Approx(-0.15).margin(2e-7));
        auto cd = compute_cd(ft, d.value, 4000.0);
        CHECK(cd.domain_warning);
        // the regularized value still matches the direct limit
        auto g = PolarGrid::make_global(128, 64, 64.0);
        auto p = build_radial_solution(ft, g->r, no_expansion_constants());
        int ih = g->n_r() - 1;
        double lim = p.U_minus_quad[ih] - d.value * std::log(g->r[ih]);
        CHECK(lim == Catch::Approx(cd.value).margin(1e-3));
    }
}

TEST_CASE("degenerate sources are rejected") {
    auto g = PolarGrid::make_global(64, 64, 64.0);
    CHECK_THROWS_AS(
        build_radial_solution([](double r) { return r < 1.0 ? 1.0 : -0.5; }, g->r),
        DegenerateSourceError);
}

TEST_CASE("coefficient field") {
    auto g = PolarGrid::make_global(128, 64, 64.0);

    SECTION("unit source gives the identity coefficients") {
        auto p = build_radial_solution([](double) { return 1.0; }, g->r,
                                       no_expansion_constants());
        auto cf = build_coefficients(p, g);
        CHECK(cf.lambda_min == Catch::Approx(1.0).margin(1e-11));
        CHECK(cf.lambda_max == Catch::Approx(1.0).margin(1e-11));
        CHECK(cf.a12.sup_abs() < 1e-11);
        REQUIRE(cf.separable.has_value());
    }

    SECTION("adjugate identity det(a*) = ftilde and ellipticity") {
        auto p = build_radial_solution(rational_ftilde, g->r, no_expansion_constants());
        auto cf = build_coefficients(p, g);
        double err = 0;
        for (int i = 0; i < g->n_r(); ++i)
            for (int j = 0; j < g->n_theta; j += 3)
                err = std::max(err, std::abs(cf.matrix(i, j).det() - p.ftilde[i]));
        CHECK(err < 1e-8);
        CHECK(cf.lambda_min >= 0.9);
    }

    SECTION("coefficients approach the identity like r^-2") {
        auto p = build_radial_solution(rational_ftilde, g->r, no_expansion_constants());
        auto cf = build_coefficients(p, g);
        auto metric = [](const CoefficientField& c, const PolarGrid& gg) {
            double m = 0;
            for (int i = 0; i < gg.n_r(); ++i) {
                double w = sq(1.0 + gg.r[i]);
                for (int j = 0; j < gg.n_theta; j += 5) {
                    SymMat2 a = c.matrix(i, j);
                    m = std::max({m, w * std::abs(a.xx - 1.0), w * std::abs(a.xy),
                                  w * std::abs(a.yy - 1.0)});
                }
            }
            return m;
        };
        double m1 = metric(cf, *g);
        auto g2 = PolarGrid::make_global(256, 64, 64.0);
        auto p2 = build_radial_solution(rational_ftilde, g2->r, no_expansion_constants());
        auto cf2 = build_coefficients(p2, g2);
        double m2 = metric(cf2, *g2);
        CHECK(m1 < 1.0);  // finite, order eps
        CHECK(std::abs(m1 - m2) < 0.1 * std::max(m1, m2));  // stable under refinement
    }

    SECTION("row divergence of a* vanishes under refinement") {
        auto metric = [](int nr) {
            auto gg = PolarGrid::make_global(nr, 64, 64.0);
            auto pp = build_radial_solution(rational_ftilde, gg->r, no_expansion_constants());
            auto cc = build_coefficients(pp, gg);
            PolarField div1 = divergence(cc.a11, cc.a12);
            PolarField div2 = divergence(cc.a12, cc.a22);
            return std::max(div1.sup_abs(), div2.sup_abs());
        };
        double m1 = metric(64), m2 = metric(128);
        CHECK(m2 < 0.5 * m1);
    }
}

TEST_CASE("discrete determinant of the radial solution") {
    // det via cartesian_hessian of tabulated U converges to ftilde
    auto residual = [](int nr) {
        auto g = PolarGrid::make_global(nr, 64, 64.0);
        auto p = build_radial_solution(rational_ftilde, g->r, no_expansion_constants());
        PolarField u(g);
        for (int i = 0; i < g->n_r(); ++i)
            for (int j = 0; j < g->n_theta; ++j) u.at(i, j) = p.U[i];
        PolarField det = det_hessian(cartesian_hessian(u));
        double err = 0;
        for (int i = 0; i < g->n_r(); ++i)
            for (int j = 0; j < g->n_theta; ++j)
                err = std::max(err, std::abs(det.at(i, j) - p.ftilde[i]));
        return err;
    };
    double e1 = residual(128), e2 = residual(256);
    CHECK(e2 < 5e-6);
    double order = std::log2(e1 / e2);
    CHECK(order >= 2.0);
}

TEST_CASE("off-grid coefficient evaluator matches the grid field") {
    auto g = PolarGrid::make_global(128, 64, 64.0);
    auto p = build_radial_solution(rational_ftilde, g->r, no_expansion_constants());
    auto cf = build_coefficients(p, g);
    RadialCoefficientEvaluator ev(p, rational_ftilde);
    double err = 0;
    for (int i = 1; i < g->n_r(); i += 9)
        for (int j = 0; j < g->n_theta; j += 7) {
            Vec2 x{g->r[i] * g->cos_theta[j], g->r[i] * g->sin_theta[j]};
            SymMat2 a = ev(x), b = cf.matrix(i, j);
            err = std::max({err, std::abs(a.xx - b.xx), std::abs(a.xy - b.xy),
                            std::abs(a.yy - b.yy)});
        }
    CHECK(err < 1e-9);
    // far beyond the table the evaluator tends to the identity
    SymMat2 far = ev({1000.0, 0.0});
    CHECK(far.xx == Catch::Approx(1.0).margin(1e-4));
    CHECK(far.yy == Catch::Approx(1.0).margin(1e-4));
}
