#include "knobtune/error.hpp"
#include "knobtune/gp.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace knobtune;

namespace {

using Points = std::vector<std::vector<double>>;

double matern52(const std::vector<double>& a, const std::vector<double>& b, double ls)
{
    double r2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) r2 += (a[i] - b[i]) * (a[i] - b[i]);
    const double r = std::sqrt(r2) / ls;
    const double s = std::sqrt(5.0) * r;
    return (1.0 + s + 5.0 * r * r / 3.0) * std::exp(-s);
}

// Gaussian elimination with partial pivoting; solves A x = b.
std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t p = c;
        for (std::size_t r = c + 1; r < n; ++r) {
            if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
        }
        std::swap(a[c], a[p]);
        std::swap(b[c], b[p]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
        x[i] = s / a[i][i];
    }
    return x;
}

// Posterior of a zero-mean unit-variance GP on standardized targets.
Prediction oracle_predict(const Points& xs, const std::vector<double>& ys, double ls, double noise,
                          double jitter, const std::vector<double>& q)
{
    const std::size_t n = xs.size();
    double m = 0.0;
    for (double y : ys) m += y;
    m /= n;
    double v = 0.0;
    for (double y : ys) v += (y - m) * (y - m);
    double sd = std::sqrt(v / n);
    if (sd < 1e-12) sd = 1.0;
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) z[i] = (ys[i] - m) / sd;

    std::vector<std::vector<double>> k(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) k[i][j] = matern52(xs[i], xs[j], ls);
        k[i][i] += noise + jitter;
    }
    std::vector<double> kq(n);
    for (std::size_t i = 0; i < n; ++i) kq[i] = matern52(xs[i], q, ls);
    const auto alpha = solve(k, z);
    const auto w = solve(k, kq);
    double mu = 0.0, red = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mu += kq[i] * alpha[i];
        red += kq[i] * w[i];
    }
    return {m + sd * mu, std::max(0.0, 1.0 - red) * sd * sd};
}

Points random_points(std::mt19937_64& rng, int n, int d)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Points xs(n, std::vector<double>(d));
    for (auto& x : xs) {
        for (auto& v : x) v = u(rng);
    }
    return xs;
}

}  // namespace

TEST_CASE("kernel values")
{
    for (auto kind : {KernelKind::Matern52, KernelKind::RBF}) {
        KernelConfig k{kind, {0.3}, 2.5, 0.0};
        const std::vector<double> o{0.0, 0.0};
        CHECK(k.covariance(o, o) == doctest::Approx(2.5));
        double prev = k.covariance(o, o);
        for (int i = 1; i <= 30; ++i) {
            const std::vector<double> x{0.05 * i, 0.0};
            const double c = k.covariance(o, x);
            CHECK(c < prev);
            prev = c;
        }
    }
    KernelConfig k{KernelKind::Matern52, {0.3}, 1.0, 0.0};
    const std::vector<double> a{0.1, 0.7}, b{0.4, 0.2};
    CHECK(k.covariance(a, b) == doctest::Approx(matern52(a, b, 0.3)).epsilon(1e-12));

    CHECK_THROWS_AS((KernelConfig{KernelKind::RBF, {0.0}, 1.0, 0.0}.validate()), ContractViolation);
    CHECK_THROWS_AS((KernelConfig{KernelKind::RBF, {0.1}, 0.0, 0.0}.validate()), ContractViolation);
    CHECK_THROWS_AS((KernelConfig{KernelKind::RBF, {0.1}, 1.0, -1.0}.validate()), ContractViolation);
}

TEST_CASE("fit preconditions")
{
    CHECK_THROWS_AS(GPModel::fit({}, {}, {}), ContractViolation);
    CHECK_THROWS_AS(GPModel::fit({{0.1}, {0.2, 0.3}}, {1, 2}, {}), ContractViolation);
    CHECK_THROWS_AS(GPModel::fit({{0.1}}, {1, 2}, {}), ContractViolation);
    CHECK_THROWS_AS(GPModel::fit({{0.1}}, {NAN}, {}), ContractViolation);
    const auto m = GPModel::fit({{0.1}}, {1.0}, {});
    const std::vector<double> bad{0.1, 0.2};
    CHECK_THROWS_AS(m.predict(bad), ContractViolation);
}

TEST_CASE("single point interpolation")
{
    KernelConfig k{KernelKind::Matern52, {0.2}, 1.0, 1e-4};
    const auto m = GPModel::fit({{0.3, 0.6}}, {7.5}, k);
    const std::vector<double> x{0.3, 0.6};
    const auto p = m.predict(x);
    CHECK(p.mean == doctest::Approx(7.5));
    CHECK(p.variance == doctest::Approx(1e-4).epsilon(0.01));
}

TEST_CASE("duplicate inputs fit through jitter")
{
    KernelConfig k{KernelKind::Matern52, {0.2}, 1.0, 0.0};
    const auto m = GPModel::fit({{0.5}, {0.5}, {0.1}}, {2.0, 2.0, 1.0}, k);
    CHECK(m.jitter() >= 1e-8);
    const std::vector<double> x{0.5};
    CHECK(m.predict(x).mean == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("posterior matches a direct linear-solve oracle")
{
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int t = 0; t < 30; ++t) {
        const int d = 1 + t % 3;
        const auto xs = random_points(rng, 5, d);
        std::vector<double> ys(5);
        for (auto& y : ys) y = u(rng);
        KernelConfig k{KernelKind::Matern52, {0.4}, 1.0, 0.0};
        const auto m = GPModel::fit(xs, ys, k);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            CHECK(m.predict(xs[i]).mean == doctest::Approx(ys[i]).epsilon(1e-6));
        }
        const auto qs = random_points(rng, 5, d);
        for (const auto& q : qs) {
            const auto got = m.predict(q);
            const auto want = oracle_predict(xs, ys, 0.4, 0.0, m.jitter(), q);
            CHECK(got.mean == doctest::Approx(want.mean).epsilon(1e-6));
            CHECK(got.variance == doctest::Approx(want.variance).epsilon(1e-6).scale(1.0));
        }
    }
}

TEST_CASE("prior reversion far from data")
{
    KernelConfig k{KernelKind::Matern52, {0.05}, 1.0, 0.0};
    const auto m = GPModel::fit({{0.0}, {0.02}, {0.04}}, {1.0, 3.0, 2.0}, k);
    const std::vector<double> far{1.0};
    const auto p = m.predict(far);
    CHECK(p.mean == doctest::Approx(m.target_mean()).epsilon(0.01));
    const double prior = m.target_std() * m.target_std();
    CHECK(p.variance == doctest::Approx(prior).epsilon(0.01));
}

TEST_CASE("two-point midpoint")
{
    KernelConfig k{KernelKind::Matern52, {0.5}, 1.0, 0.0};
    const auto m = GPModel::fit({{0.0}, {1.0}}, {0.0, 1.0}, k);
    const std::vector<double> mid{0.5};
    const double mu = m.predict(mid).mean;
    CHECK(mu > 0.0);
    CHECK(mu < 1.0);
    // Symmetric 2x2 system: mean at the midpoint is exactly halfway.
    CHECK(mu == doctest::Approx(0.5));
}

TEST_CASE("log marginal likelihood")
{
    SUBCASE("one point closed form")
    {
        KernelConfig k{KernelKind::RBF, {1.0}, 1.0, 0.0};
        const auto m = GPModel::fit({{0.2}}, {4.0}, k);
        // Standardized target is 0; jitter enters log det.
        const double expect = -0.5 * std::log(1.0 + m.jitter()) - 0.5 * std::log(2.0 * std::numbers::pi);
        CHECK(m.log_marginal_likelihood() == doctest::Approx(expect));
    }
    SUBCASE("noise above the optimum lowers the likelihood on a noiseless line")
    {
        Points xs;
        std::vector<double> ys;
        for (int i = 0; i < 8; ++i) {
            xs.push_back({i / 7.0});
            ys.push_back(2.0 * i / 7.0 + 1.0);
        }
        double prev = INFINITY;
        for (double noise : {1e-4, 1e-2, 1e-1, 1.0}) {
            const double l = GPModel::fit(xs, ys, {KernelKind::Matern52, {1.0}, 1.0, noise}).log_marginal_likelihood();
            CHECK(l < prev);
            prev = l;
        }
    }
    SUBCASE("deterministic")
    {
        const Points xs{{0.1}, {0.5}, {0.9}};
        const std::vector<double> ys{1, 3, 2};
        CHECK(GPModel::fit(xs, ys, {}).log_marginal_likelihood() ==
              GPModel::fit(xs, ys, {}).log_marginal_likelihood());
    }
}

TEST_CASE("hyperparameter grid search")
{
    SUBCASE("needs two points")
    {
        CHECK_THROWS_AS(optimize_hyperparams({{0.1}}, {1.0}, KernelKind::Matern52), ContractViolation);
    }
    SUBCASE("pure noise picks the largest noise")
    {
        int hits = 0;
        for (int t = 0; t < 50; ++t) {
            std::mt19937_64 rng(1000 + t);
            std::normal_distribution<double> n(0.0, 1.0);
            const Points xs = random_points(rng, 12, 1);
            std::vector<double> ys;
            for (int i = 0; i < 12; ++i) ys.push_back(n(rng));
            std::shuffle(ys.begin(), ys.end(), rng);
            if (optimize_hyperparams(xs, ys, KernelKind::Matern52).noise_variance == 1e-1) ++hits;
        }
        MESSAGE("largest noise chosen on " << hits << "/50");
        CHECK(hits >= 40);
    }
    SUBCASE("sinusoid held-out midpoints")
    {
        Points xs;
        std::vector<double> ys;
        const auto f = [](double x) { return std::sin(2.0 * std::numbers::pi * x) + 2.0; };
        for (int i = 0; i < 8; ++i) {
            xs.push_back({i / 7.0});
            ys.push_back(f(i / 7.0));
        }
        const auto cfg = optimize_hyperparams(xs, ys, KernelKind::Matern52);
        const auto m = GPModel::fit(xs, ys, cfg);
        for (int i = 0; i < 7; ++i) {
            const double x = (i + 0.5) / 7.0;
            const std::vector<double> q{x};
            CHECK(std::abs(m.predict(q).mean - f(x)) / std::abs(f(x)) < 0.10);
        }
    }
    SUBCASE("deterministic")
    {
        const Points xs{{0.1}, {0.4}, {0.8}, {0.9}};
        const std::vector<double> ys{1, 3, 2, 5};
        CHECK(optimize_hyperparams(xs, ys, KernelKind::RBF) == optimize_hyperparams(xs, ys, KernelKind::RBF));
    }
}

TEST_CASE("posterior properties")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int t = 0; t < 40; ++t) {
        const int d = 1 + t % 2;
        const int n = 3 + t % 6;
        auto xs = random_points(rng, n, d);
        std::vector<double> ys(n);
        for (auto& y : ys) y = u(rng);
        KernelConfig k{t % 2 ? KernelKind::RBF : KernelKind::Matern52, {0.3}, 1.0, 0.0};
        const auto m = GPModel::fit(xs, ys, k);
        const auto qs = random_points(rng, 10, d);

        // Permutation invariance.
        std::vector<std::size_t> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        Points xp;
        std::vector<double> yp;
        for (auto i : perm) {
            xp.push_back(xs[i]);
            yp.push_back(ys[i]);
        }
        const auto mp = GPModel::fit(xp, yp, k);

        // One extra point, same standardization so variances are comparable.
        auto xa = xs;
        auto ya = ys;
        xa.push_back(random_points(rng, 1, d).front());
        ya.push_back(m.predict(xa.back()).mean);

        for (const auto& q : qs) {
            const auto p = m.predict(q);
            CHECK(p.variance >= 0.0);
            CHECK(p.variance <= m.target_std() * m.target_std() * (1.0 + 1e-12));
            const auto pp = mp.predict(q);
            CHECK(pp.mean == doctest::Approx(p.mean).epsilon(1e-9));
            CHECK(pp.variance == doctest::Approx(p.variance).epsilon(1e-9).scale(1.0));
        }
        // Compare latent (standardized) variances before and after adding the point.
        const auto ma = GPModel::fit(xa, ya, k);
        for (const auto& q : qs) {
            const double before = m.predict(q).variance / (m.target_std() * m.target_std());
            const double after = ma.predict(q).variance / (ma.target_std() * ma.target_std());
            CHECK(after <= before + 1e-7);
        }
    }
}
