#include "knobtune/acquisition.hpp"
#include "knobtune/error.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace knobtune;

namespace {

double mc_ei(double mean, double sd, double incumbent, bool maximize, int draws, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(mean, sd);
    double s = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double y = n(rng);
        s += std::max(maximize ? y - incumbent : incumbent - y, 0.0);
    }
    return s / draws;
}

GPModel fit_1d(const std::vector<double>& xs, const std::vector<double>& ys, double ls = 0.3)
{
    std::vector<std::vector<double>> in;
    for (double x : xs) in.push_back({x});
    return GPModel::fit(in, ys, {KernelKind::Matern52, {ls}, 1.0, 1e-6});
}

KnobSpace line_space(int n)
{
    KnobDimension d{"x", {}};
    for (int i = 0; i < n; ++i) d.values.push_back(i);
    return KnobSpace({d});
}

}  // namespace

TEST_CASE("normal pdf and cdf")
{
    CHECK(normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
    CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(normal_cdf(2.0) == doctest::Approx(0.9772498680518208).epsilon(1e-10));
    CHECK(normal_cdf(-2.0) == doctest::Approx(0.0227501319481792).epsilon(1e-9));
    CHECK(normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-10));
    CHECK(normal_cdf(-40.0) >= 0.0);
}

TEST_CASE("expected improvement")
{
    CHECK(expected_improvement(3.0, 0.0, 3.0, true) == 0.0);
    CHECK(expected_improvement(3.0, 1.0, 3.0, true) == doctest::Approx(0.398942).epsilon(1e-6));
    CHECK(expected_improvement(4.0, 0.0, 3.0, true) == doctest::Approx(1.0));
    CHECK(expected_improvement(2.0, 0.0, 3.0, true) == 0.0);
    CHECK(expected_improvement(2.0, 0.0, 3.0, false) == doctest::Approx(1.0));

    SUBCASE("Monte Carlo oracle")
    {
        CHECK(std::abs(expected_improvement(1.0, 0.25, 0.0, true) - mc_ei(1.0, 0.5, 0.0, true, 1'000'000, 1)) < 1e-3);
        CHECK(std::abs(expected_improvement(1.0, 0.25, 2.0, false) - mc_ei(1.0, 0.5, 2.0, false, 1'000'000, 2)) <
              1e-3);
    }
    SUBCASE("non-negative, increasing in sigma at the incumbent")
    {
        double prev = 0.0;
        for (int i = 1; i <= 20; ++i) {
            const double s = 0.1 * i;
            const double ei = expected_improvement(5.0, s * s, 5.0, true);
            CHECK(ei > prev);
            prev = ei;
        }
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(-5, 5);
        for (int i = 0; i < 1000; ++i) {
            CHECK(expected_improvement(u(rng), std::abs(u(rng)), u(rng), i % 2) >= 0.0);
        }
    }
}

TEST_CASE("probability of feasibility")
{
    CHECK(prob_feasible(5.0, 1.0, 5.0, Bound::Below) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(prob_feasible(3.0, 1.0, 5.0, Bound::Below) == doctest::Approx(0.97725).epsilon(1e-5));
    CHECK(prob_feasible(7.0, 1.0, 5.0, Bound::Above) == doctest::Approx(0.97725).epsilon(1e-5));
    CHECK(prob_feasible(6.0, 0.0, 5.0, Bound::Below) == 0.0);
    CHECK(prob_feasible(4.0, 0.0, 5.0, Bound::Below) == 1.0);
    CHECK(prob_feasible(6.0, 0.0, 5.0, Bound::Above) == 1.0);
    double prev = 1.0;
    for (int i = 0; i < 50; ++i) {
        const double p = prob_feasible(i * 0.2, 0.5, 5.0, Bound::Below);
        CHECK(p >= 0.0);
        CHECK(p <= prev);
        prev = p;
    }
}

TEST_CASE("constrained acquisition")
{
    const auto obj = fit_1d({0.0, 0.5, 1.0}, {1.0, 3.0, 2.0});
    const std::vector<double> x{0.25};
    const auto pred = obj.predict(x);

    SUBCASE("no constraints is plain EI")
    {
        AcquisitionContext ctx{obj, {}, 3.0, true};
        CHECK(constrained_acquisition(ctx, x) == doctest::Approx(expected_improvement(pred.mean, pred.variance, 3.0, true)));
    }
    SUBCASE("certain infeasibility annihilates")
    {
        // Noiseless constraint model queried at a training input: the
        // posterior is a point mass far above the set point.
        const auto con = GPModel::fit({{0.0}, {0.25}, {1.0}}, {9.0, 9.5, 9.0}, {KernelKind::Matern52, {0.3}, 1.0, 0.0});
        AcquisitionContext ctx{obj, {{con, 5.0, Bound::Below}}, 3.0, true};
        CHECK(expected_improvement(pred.mean, pred.variance, 3.0, true) > 0.0);
        CHECK(constrained_acquisition(ctx, x) == 0.0);
    }
    SUBCASE("product never exceeds EI")
    {
        const auto con = fit_1d({0.0, 0.5, 1.0}, {4.0, 6.0, 5.0});
        AcquisitionContext ctx{obj, {{con, 5.0, Bound::Below}}, 3.0, true};
        for (int i = 0; i <= 20; ++i) {
            const std::vector<double> q{i / 20.0};
            const auto p = obj.predict(q);
            CHECK(constrained_acquisition(ctx, q) <= expected_improvement(p.mean, p.variance, 3.0, true) + 1e-15);
        }
    }
    SUBCASE("no incumbent searches feasibility only")
    {
        // Constraint trained on infeasible values only.
        const auto con = fit_1d({0.0, 0.3, 0.6}, {8.0, 7.0, 6.5});
        AcquisitionContext ctx{obj, {{con, 5.0, Bound::Below}}, std::nullopt, true};
        const auto space = line_space(21);
        const auto got = argmax_acquisition(ctx, space, {});
        int best = -1;
        double best_pf = -1.0;
        for (int i = 0; i < 21; ++i) {
            const std::vector<double> q{i / 20.0};
            const auto p = con.predict(q);
            const double pf = prob_feasible(p.mean, p.variance, 5.0, Bound::Below);
            if (pf > best_pf) {
                best_pf = pf;
                best = i;
            }
        }
        CHECK(got.indices[0] == best);
    }
}

TEST_CASE("argmax over the grid")
{
    SUBCASE("forced choice")
    {
        const auto obj = fit_1d({0.0, 1.0}, {1.0, 2.0});
        AcquisitionContext ctx{obj, {}, 2.0, true};
        const auto space = line_space(3);
        CHECK(argmax_acquisition(ctx, space, {KnobSetting{{0}}, KnobSetting{{2}}}) == KnobSetting{{1}});
        CHECK_THROWS_AS(argmax_acquisition(ctx, space, {KnobSetting{{0}}, KnobSetting{{1}}, KnobSetting{{2}}}),
                        ExhaustionError);
    }
    SUBCASE("constant acquisition picks the smallest unsampled setting")
    {
        // No incumbent, no constraints: the product is empty and constant.
        const auto obj = fit_1d({0.0, 1.0}, {1.0, 2.0});
        AcquisitionContext ctx{obj, {}, std::nullopt, true};
        KnobSpace space({KnobDimension{"a", {1, 2, 3}}, KnobDimension{"b", {1, 2}}});
        CHECK(argmax_acquisition(ctx, space, {KnobSetting{{0, 0}}}) == KnobSetting{{0, 1}});
    }
    SUBCASE("random 2-D instances match an exhaustive scan")
    {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        KnobSpace space({KnobDimension{"a", {0, 1, 2, 3, 4, 5, 6, 7}}, KnobDimension{"b", {0, 1, 2, 3, 4, 5}}});
        for (int t = 0; t < 25; ++t) {
            std::vector<std::vector<double>> xs;
            std::vector<double> yo, yc;
            std::set<KnobSetting> sampled;
            for (int i = 0; i < 6; ++i) {
                const auto k = space.setting_at(rng() % space.size());
                if (!sampled.insert(k).second) continue;
                xs.push_back(normalize(space, k));
                yo.push_back(u(rng) * 10);
                yc.push_back(u(rng) * 4);
            }
            const auto om = GPModel::fit(xs, yo, {KernelKind::Matern52, {0.35}, 1.0, 1e-4});
            const auto cm = GPModel::fit(xs, yc, {KernelKind::Matern52, {0.35}, 1.0, 1e-4});
            AcquisitionContext ctx{om, {{cm, 2.0, Bound::Below}}, 5.0, true};
            std::optional<KnobSetting> best;
            double best_v = -1.0;
            for (std::uint64_t i = 0; i < space.size(); ++i) {
                const auto k = space.setting_at(i);
                if (sampled.count(k)) continue;
                const auto x = normalize(space, k);
                const auto po = om.predict(x);
                const auto pc = cm.predict(x);
                const double v = expected_improvement(po.mean, po.variance, 5.0, true) *
                                 prob_feasible(pc.mean, pc.variance, 2.0, Bound::Below);
                if (v > best_v) {
                    best_v = v;
                    best = k;
                }
            }
            const auto got = argmax_acquisition(ctx, space, sampled);
            CHECK(got == *best);
            CHECK(sampled.count(got) == 0);
        }
    }
}
