#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "lyap/fields.hpp"
#include "lyap/regularity.hpp"

using namespace lyap;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

CompositePotential ellipsoid() { return gallery_composite("ellipsoid"); }
CompositePotential gutter() { return gallery_composite("gutter"); }
CompositePotential circle() { return gallery_composite("circle"); }

// Independent central difference with its own step choice.
Vector central_difference(const std::function<double(const Vector&)>& fn, const Vector& x, double h) {
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector a = x, b = x;
        a[i] += h;
        b[i] -= h;
        g[i] = (fn(a) - fn(b)) / (2 * h);
    }
    return g;
}

}  // namespace

TEST(EvalPotential, EllipsoidOnSurfaceIsZero) { EXPECT_EQ(eval_potential(ellipsoid(), vec({1, 0, 0})), 0.0); }

TEST(EvalPotential, EllipsoidAtOriginIsOne) { EXPECT_DOUBLE_EQ(eval_potential(ellipsoid(), vec({0, 0, 0})), 1.0); }

TEST(EvalPotential, GutterQuartic) { EXPECT_DOUBLE_EQ(eval_potential(gutter(), vec({0.5, 7.3})), 0.0625); }

TEST(EvalPotential, DimensionMismatchThrows) {
    EXPECT_THROW(eval_potential(ellipsoid(), vec({1, 0})), DimensionError);
    EXPECT_THROW(grad_potential(gutter(), vec({1, 0, 0})), DimensionError);
}

TEST(GradPotential, VanishesOnEllipsoid) {
    EXPECT_LE(grad_potential(ellipsoid(), vec({1, 0, 0})).norm(), 0.0);
}

TEST(GradPotential, GutterAxis) {
    const Vector g = grad_potential(gutter(), vec({0.5, 0}));
    EXPECT_DOUBLE_EQ(g[0], 0.5);
    EXPECT_DOUBLE_EQ(g[1], 0.0);
}

TEST(GradPotential, CircleQuadraticProfile) {
    const Vector g = grad_potential(circle(), vec({2, 0}));
    EXPECT_DOUBLE_EQ(g[0], 24.0);
    EXPECT_DOUBLE_EQ(g[1], 0.0);
}

TEST(GradPotential, ChainRuleIsExact) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (const auto& P : {ellipsoid(), circle()}) {
        for (int i = 0; i < 100; ++i) {
            Vector x(P.dimension());
            for (auto& c : x) c = u(rng);
            const Vector direct = P.profile().derivative(P.field().value(x)) * P.field().gradient(x);
            EXPECT_EQ((grad_potential(P, x) - direct).norm(), 0.0);
        }
    }
}

TEST(FdGradientCheck, EllipsoidMatchesCentralDifferences) {
    EXPECT_LE(fd_gradient_check(ellipsoid(), vec({1.1, 0.2, -0.3}), 1e-5), 1e-6);
}

TEST(FdGradientCheck, GutterOriginIsExact) { EXPECT_LE(fd_gradient_check(gutter(), vec({0, 0}), 1e-5), 1e-12); }

TEST(FdGradientCheck, PainleveNearSingularity) {
    EXPECT_LE(fd_gradient_check(painleve_potential(), vec({0.2}), 1e-7), 1e-5);
}

TEST(FdGradientCheck, RejectsNonPositiveStep) {
    EXPECT_THROW(fd_gradient_check(gutter(), vec({0, 0}), 0.0), InvalidArgument);
}

TEST(FdGradientCheck, RandomPointsAllGalleryEntries) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.2, 1.2);
    for (const char* name : {"gutter", "ellipsoid", "circle"}) {
        const auto P = gallery_composite(name);
        for (int i = 0; i < 200; ++i) {
            Vector x(P.dimension());
            for (auto& c : x) c = u(rng);
            EXPECT_LE(fd_gradient_check(P, x), 1e-6) << name;
        }
    }
    const auto laloy = std::get<PlainPotential>(gallery_lookup("laloy"));
    for (int i = 0; i < 200; ++i) {
        const Vector x = vec({0.1 + 0.3 * std::abs(u(rng)), u(rng)});
        EXPECT_LE(fd_gradient_check(laloy, x), 1e-6);
    }
}

TEST(FdGradientCheck, AgreesWithIndependentDifference) {
    const auto P = ellipsoid();
    const Vector x = vec({0.7, -0.4, 0.25});
    const Vector fd = central_difference([&](const Vector& z) { return P.value(z); }, x, 1e-6);
    EXPECT_LE((fd - P.gradient(x)).norm() / (1 + P.gradient(x).norm()), 1e-7);
}

TEST(ScalarField, FiniteDifferenceHessianFallback) {
    ScalarField F(
        2, [](const Vector& x) { return x[0] * x[0] * x[1]; },
        [](const Vector& x) { return vec({2 * x[0] * x[1], x[0] * x[0]}); });
    const Matrix H = F.hessian(vec({1.0, 2.0}));
    EXPECT_NEAR(H(0, 0), 4.0, 1e-6);
    EXPECT_NEAR(H(0, 1), 2.0, 1e-6);
    EXPECT_NEAR(H(1, 1), 0.0, 1e-6);
}

TEST(Profile, VanishesOnlyAtZero) {
    for (int k : {2, 4, 6}) {
        const auto g = Profile::power(k);
        EXPECT_EQ(g.value(0.0), 0.0);
        for (double s : {-1.0, -1e-3, 1e-3, 0.5, 2.0}) EXPECT_GT(g.value(s), 0.0);
        EXPECT_NEAR(g.inverse(g.value(0.3)), 0.3, 1e-15);
    }
    EXPECT_THROW(Profile::power(3), InvalidArgument);
    EXPECT_THROW(Profile::power(0), InvalidArgument);
    EXPECT_THROW(Profile::power(-2), InvalidArgument);
}

TEST(Gallery, EllipsoidDefaults) {
    const auto P = ellipsoid();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const Vector x = vec({u(rng), u(rng), u(rng)});
        const double f = x[0] * x[0] + 2 * x[1] * x[1] + 3 * x[2] * x[2] - 1;
        EXPECT_NEAR(P.value(x), std::pow(f, 4), 1e-14 * std::pow(f, 4));
    }
}

TEST(Gallery, GutterDefaults) {
    const auto P = gutter();
    EXPECT_EQ(P.dimension(), 2);
    EXPECT_DOUBLE_EQ(P.value(vec({0.3, -4.0})), std::pow(0.3, 4));
}

TEST(Gallery, PainleveIsPlainWithZeroAtOrigin) {
    const auto G = gallery_lookup("painleve");
    ASSERT_TRUE(std::holds_alternative<PlainPotential>(G));
    const auto& P = std::get<PlainPotential>(G);
    EXPECT_EQ(P.value(vec({0.0})), 0.0);
    EXPECT_EQ(P.value(vec({1e-13})), 0.0);
    for (double x : {0.2, -0.3, 0.45})
        EXPECT_NEAR(P.value(vec({x})), std::exp(-1 / std::abs(x)) * std::sin(1 / std::abs(x)), 1e-16);
}

TEST(Gallery, LaloyIsPlain) {
    const auto G = gallery_lookup("laloy");
    ASSERT_TRUE(std::holds_alternative<PlainPotential>(G));
    EXPECT_EQ(std::get<PlainPotential>(G).value(vec({0, 0})), 0.0);
    EXPECT_THROW(gallery_composite("laloy"), InvalidArgument);
}

TEST(Gallery, CustomPolynomial) {
    const auto P = gallery_composite("custom-polynomial", {{"quadratic", {1, 1}}, {"linear", {0, 2}}, {"constant", -3}});
    EXPECT_DOUBLE_EQ(P.field().value(vec({1, 1})), 1.0);
    EXPECT_DOUBLE_EQ(P.value(vec({1, 1})), 1.0);
}

TEST(Gallery, Errors) {
    EXPECT_THROW(gallery_lookup("banana"), InvalidArgument);
    EXPECT_THROW(gallery_lookup("gutter", {{"exponent", -2}}), InvalidArgument);
    EXPECT_THROW(gallery_lookup("gutter", {{"exponent", 3}}), InvalidArgument);
    EXPECT_THROW(gallery_lookup("ellipsoid", {{"coefficients", {1, -2, 3}}}), InvalidArgument);
    EXPECT_THROW(gallery_lookup("circle", {{"radius", 0}}), InvalidArgument);
}

TEST(Positivity, RandomPointsPerGalleryEntry) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (const char* name : {"gutter", "ellipsoid", "circle"}) {
        const auto P = gallery_composite(name);
        for (int i = 0; i < 10000; ++i) {
            Vector x(P.dimension());
            for (auto& c : x) c = u(rng);
            ASSERT_GE(eval_potential(P, x), 0.0) << name;
        }
    }
}

TEST(ZeroLocus, SmallFieldGivesSmallPotential) {
    for (const char* name : {"gutter", "ellipsoid", "circle"}) {
        const auto P = gallery_composite(name);
        Vector x = Vector::Zero(P.dimension());
        x[0] = name == std::string("gutter") ? 1e-9 : std::sqrt(1.0 + 1e-9);
        const double f = P.field().value(x);
        EXPECT_LE(std::abs(f), 1.01e-9);
        EXPECT_LE(P.value(x), P.profile().value(1e-9) * 1.05) << name;
    }
}

// Oracle: minimize |(2x, 4y, 6z)| over the ellipsoid by an angular grid and local refinement.
double ellipsoid_min_gradient_oracle() {
    auto gnorm = [](double th, double ph) {
        const double x = std::sin(th) * std::cos(ph), y = std::sin(th) * std::sin(ph) / std::sqrt(2.0),
                     z = std::cos(th) / std::sqrt(3.0);
        return std::sqrt(4 * x * x + 16 * y * y + 36 * z * z);
    };
    double best = 1e300, bt = 0, bp = 0;
    for (int i = 0; i <= 200; ++i)
        for (int j = 0; j < 400; ++j) {
            const double th = M_PI * i / 200, ph = 2 * M_PI * j / 400;
            if (gnorm(th, ph) < best) best = gnorm(th, ph), bt = th, bp = ph;
        }
    for (double h = 0.01; h > 1e-10; h *= 0.5)
        for (int it = 0; it < 20; ++it)
            for (double dt : {-h, 0.0, h})
                for (double dp : {-h, 0.0, h})
                    if (gnorm(bt + dt, bp + dp) < best) best = gnorm(bt + dt, bp + dp), bt += dt, bp += dp;
    return best;
}

TEST(RegularValue, EllipsoidMinimumGradient) {
    const double oracle = ellipsoid_min_gradient_oracle();
    EXPECT_NEAR(oracle, 2.0, 1e-9);
    std::vector<Vector> seeds;
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 8; ++j) {
            const double th = M_PI * (j + 0.5) / 8, ph = 2 * M_PI * i / 16;
            seeds.push_back(1.05 * vec({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph) / std::sqrt(2.0),
                                        std::cos(th) / std::sqrt(3.0)}));
        }
    seeds.push_back(vec({1.02, 0, 0}));
    seeds.push_back(vec({-0.97, 0, 0}));
    const auto rep = check_regular_value(ellipsoid().field(), seeds, 1e-3);
    EXPECT_TRUE(rep.pass);
    EXPECT_NEAR(rep.min_gradient_norm, oracle, 1e-9);
    EXPECT_NEAR(std::abs(rep.argmin[0]), 1.0, 1e-9);
    for (const auto& q : rep.projected) EXPECT_LE(std::abs(ellipsoid().field().value(q)), 1e-12);
}

TEST(RegularValue, GutterUnitGradient) {
    const std::vector<Vector> seeds{vec({0.3, 1}), vec({-2, 5}), vec({1e-3, -7})};
    const auto rep = check_regular_value(gutter().field(), seeds, 1e-3);
    EXPECT_TRUE(rep.pass);
    EXPECT_DOUBLE_EQ(rep.min_gradient_norm, 1.0);
}

TEST(RegularValue, SquareFieldFails) {
    ScalarField F(
        2, [](const Vector& x) { return x[0] * x[0]; }, [](const Vector& x) { return vec({2 * x[0], 0.0}); });
    const std::vector<Vector> seeds{vec({0.1, 0}), vec({-0.2, 1})};
    const auto rep = check_regular_value(F, seeds, 1e-3);
    EXPECT_FALSE(rep.pass);
    EXPECT_LE(rep.min_gradient_norm, 1e-3);
}
