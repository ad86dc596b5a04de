#include <gtest/gtest.h>

#include <iterint/integrals.hpp>
#include <iterint/fft_sums.hpp>

#include <cmath>

using namespace iterint;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

IntegralSet random_set(int q, std::uint64_t stream, int p = 12) {
    return integral_set(sample_tableau(q, p, 99, stream));
}

/// Exact signature of one linear segment with increment dw over time h.
IntegralSet linear_step(const std::vector<double>& dw, double h) {
    const int q = static_cast<int>(dw.size());
    IntegralSet s = IntegralSet::zeros(q, h);
    s.dw = dw;
    for (int j = 0; j < q; ++j) {
        s.iw[j] = 0.5 * h * dw[j];
        for (int k = 0; k < q; ++k) {
            s.I2(j, k) = 0.5 * dw[j] * dw[k];
            for (int l = 0; l < q; ++l) s.I3(j, k, l) = dw[j] * dw[k] * dw[l] / 6.0;
        }
    }
    return s;
}

}  // namespace

TEST(DoubleIntegral, DiagonalAndShuffle) {
    for (int p : {1, 7, 64, 257}) {
        const auto t = sample_tableau(3, p, 3, static_cast<std::uint64_t>(p));
        const auto s = partial_sums(t);
        const auto i2 = double_integral(t.w1, s);
        for (int j = 0; j < 3; ++j) {
            EXPECT_EQ(i2[j * 3 + j], 0.5 * t.w1[j] * t.w1[j]);
            for (int k = 0; k < 3; ++k) {
                const double ww = t.w1[j] * t.w1[k];
                EXPECT_LE(std::abs(i2[j * 3 + k] + i2[k * 3 + j] - ww), 1e-12 * (1 + std::abs(ww)));
            }
        }
    }
}

TEST(DoubleIntegral, MatchesQuadratureAtP256) {
    // Simpson's endpoint error at 4096 steps is ~1e-6 for p = 256 (the drift
    // term t*W1 makes the integrand non-periodic), so use 8192 here.
    for (int i = 0; i < 100; ++i) {
        const auto t = sample_tableau(2, 256, 21, static_cast<std::uint64_t>(i));
        const auto Q = quadrature_oracle(t, 8192);
        const auto i2 = double_integral(t.w1, partial_sums(t));
        EXPECT_LE(max_abs_diff(i2, Q.i2), 1e-6);
    }
}

TEST(TripleIntegral, ZeroTableauLeavesCubicTerm) {
    auto t = Tableau::zeros(3, 6);
    t.w1 = {0.7, -1.3, 2.1};
    const auto i3 = triple_integral(t.w1, partial_sums(t, true));
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 3; ++l)
                EXPECT_DOUBLE_EQ(i3[(j * 3 + k) * 3 + l], t.w1[j] * t.w1[k] * t.w1[l] / 6.0);
}

TEST(TripleIntegral, MatchesQuadratureOfTruncatedPath) {
    // The representation is exact for the p-mode path, so the only gap is
    // Simpson error, which shrinks ~16x per doubling of nsteps.
    for (int p : {3, 17, 64}) {
        const auto t = sample_tableau(3, p, 5, static_cast<std::uint64_t>(p));
        const auto S = integral_set(t);
        const double e1 = max_abs_diff(S.i3, quadrature_oracle(t, 64 * p).i3);
        const double e2 = max_abs_diff(S.i3, quadrature_oracle(t, 128 * p).i3);
        EXPECT_LE(e1, 1e-6);
        EXPECT_GT(e1 / e2, 10.0);
        EXPECT_LT(e1 / e2, 24.0);
    }
}

TEST(TripleIntegral, ChainRuleAndShuffleHoldExactly) {
    for (int p : {1, 16, 128, 512}) {
        const auto t = sample_tableau(3, p, 8, static_cast<std::uint64_t>(p));
        const auto S = integral_set(t);
        for (int j = 0; j < 3; ++j) {
            const double w = t.w1[j];
            EXPECT_NEAR(S.I3(j, j, j), w * w * w / 6, 1e-10 * (1 + std::abs(w * w * w)));
        }
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l) {
                    const double lhs = S.I2(j, k) * t.w1[l];
                    const double rhs = S.I3(j, k, l) + S.I3(j, l, k) + S.I3(l, j, k);
                    EXPECT_NEAR(lhs, rhs, 1e-10 * (1 + std::abs(lhs)));
                }
    }
}

TEST(TripleIntegral, NuReconstructionInvariant) {
    const auto t = sample_tableau(3, 40, 2, 2);
    auto a = partial_sums(t, true);
    auto b = shell_sums(t, 0, t.p, true, true);
    const auto ia = triple_integral(t.w1, a), ib = triple_integral(t.w1, b);
    for (std::size_t i = 0; i < ia.size(); ++i) EXPECT_LE(std::abs(ia[i] - ib[i]), 1e-9 * (1 + std::abs(ib[i])));
}

TEST(Quadrature, ZeroTableauClosedForms) {
    auto t = Tableau::zeros(2, 3);
    t.w1 = {1.5, -0.5};
    const auto Q = quadrature_oracle(t, 64);
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
            EXPECT_NEAR(Q.I2(j, k), t.w1[j] * t.w1[k] / 2, 1e-13);
            for (int l = 0; l < 2; ++l) EXPECT_NEAR(Q.I3(j, k, l), t.w1[j] * t.w1[k] * t.w1[l] / 6, 1e-13);
        }
    EXPECT_THROW(quadrature_oracle(t, 5), std::domain_error);
}

TEST(Quadrature, FourthOrderSelfConvergence) {
    for (int i = 0; i < 5; ++i) {
        const auto t = sample_tableau(2, 32, 7, static_cast<std::uint64_t>(i));
        const auto a = quadrature_oracle(t, 512), b = quadrature_oracle(t, 1024), c = quadrature_oracle(t, 2048);
        const double r = max_abs_diff(a.i2, b.i2) / max_abs_diff(b.i2, c.i2);
        EXPECT_GT(r, 12.0);
        EXPECT_LT(r, 20.0);
    }
}

TEST(Ito, ConversionBasics) {
    const auto s = random_set(3, 1);
    const auto i = stratonovich_to_ito(s);
    EXPECT_EQ(i.I2(0, 1), s.I2(0, 1));
    EXPECT_NEAR(i.I2(1, 1), 0.5 * s.dw[1] * s.dw[1] - 0.5, 1e-15);
    for (int j = 0; j < 3; ++j) {
        const double w = s.dw[j];
        EXPECT_NEAR(i.I3(j, j, j), (w * w * w - 3 * w) / 6, 1e-10);
    }
    const auto back = ito_to_stratonovich(i);
    EXPECT_LE(max_abs_diff(back.i2, s.i2), 1e-12);
    EXPECT_LE(max_abs_diff(back.i3, s.i3), 1e-12);
    EXPECT_THROW(stratonovich_to_ito(i), std::domain_error);
    EXPECT_THROW(ito_to_stratonovich(s), std::domain_error);
}

TEST(Ito, ConversionAgainstLeftPointSums) {
    // Fine random walk: Stratonovich signature by Chen products of linear
    // pieces, Ito integrals by left-point sums on the same increments.
    // The two must agree after conversion up to the discretisation error.
    const int q = 2;
    auto rms_gap = [&](int n) {
        double acc = 0;
        const int paths = 200;
        for (int path = 0; path < paths; ++path) {
            NormalStream g(17, static_cast<std::uint64_t>(path));
            const double dt = 1.0 / n;
            IntegralSet strat = IntegralSet::zeros(q, 0.0);
            std::vector<double> W(q, 0.0), I2(q * q, 0.0), I3(q * q * q, 0.0);
            for (int i = 0; i < n; ++i) {
                const auto [a, b] = g.pair(0, static_cast<std::uint32_t>(i), tag::aux);
                const std::vector<double> dw{a * std::sqrt(dt), b * std::sqrt(dt)};
                for (int j = 0; j < q; ++j)
                    for (int k = 0; k < q; ++k)
                        for (int l = 0; l < q; ++l) I3[(j * q + k) * q + l] += I2[j * q + k] * dw[l];
                for (int j = 0; j < q; ++j)
                    for (int k = 0; k < q; ++k) I2[j * q + k] += W[j] * dw[k];
                for (int j = 0; j < q; ++j) W[j] += dw[j];
                strat = chen_concat(strat, linear_step(dw, dt));
            }
            const auto ito = stratonovich_to_ito(strat);
            for (int e = 0; e < q * q * q; ++e) acc += (ito.i3[e] - I3[e]) * (ito.i3[e] - I3[e]);
            for (int e = 0; e < q * q; ++e) acc += (ito.i2[e] - I2[e]) * (ito.i2[e] - I2[e]);
        }
        return std::sqrt(acc / paths);
    };
    const double g1 = rms_gap(1024), g2 = rms_gap(4096);
    EXPECT_LT(g2, 0.05);
    EXPECT_GT(g1 / g2, 1.5);  // gap shrinks like dt^{1/2}
}

TEST(Scaling, IdentityShuffleAndVariance) {
    const auto s = random_set(2, 3);
    const auto same = scale_to_interval(s, 1.0);
    EXPECT_EQ(same.i3, s.i3);
    const auto h = scale_to_interval(s, 0.3);
    for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k)
            EXPECT_NEAR(h.I2(j, k) + h.I2(k, j), h.dw[j] * h.dw[k], 1e-14);
    EXPECT_THROW(scale_to_interval(s, 0.0), std::domain_error);

    const int n = 100000;
    double v1 = 0, v4 = 0;
    for (int i = 0; i < n; ++i) {
        const auto t = sample_tableau(2, 16, 31, static_cast<std::uint64_t>(i));
        const auto set = integral_set(t.w1, partial_sums(t, true));
        const auto h4 = scale_to_interval(set, 0.25);
        v1 += set.I2(0, 1) * set.I2(0, 1);
        v4 += h4.I2(0, 1) * h4.I2(0, 1);
    }
    // ratio of second moments must be h^2 = 1/16 (the same draws, so exactly up to rounding)
    EXPECT_NEAR(v4 / v1, 1.0 / 16, 1e-12);
}

TEST(Chen, IdentityAssociativityShuffle) {
    const auto a = random_set(3, 4), b = random_set(3, 5), c = random_set(3, 6);
    const auto e = IntegralSet::zeros(3, 0.0);
    const auto ae = chen_concat(a, e), ea = chen_concat(e, a);
    EXPECT_EQ(ae.i3, a.i3);
    EXPECT_EQ(ea.i3, a.i3);
    const auto l = chen_concat(chen_concat(a, b), c), r = chen_concat(a, chen_concat(b, c));
    EXPECT_LE(max_abs_diff(l.i2, r.i2), 1e-10);
    EXPECT_LE(max_abs_diff(l.i3, r.i3), 1e-10);
    EXPECT_LE(max_abs_diff(l.iw, r.iw), 1e-10);
    const auto ab = chen_concat(scale_to_interval(a, 0.5), scale_to_interval(b, 0.5));
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
            EXPECT_NEAR(ab.I2(j, k) + ab.I2(k, j), ab.dw[j] * ab.dw[k], 1e-12);
            for (int l2 = 0; l2 < 3; ++l2)
                EXPECT_NEAR(ab.I2(j, k) * ab.dw[l2], ab.I3(j, k, l2) + ab.I3(j, l2, k) + ab.I3(l2, j, k), 1e-10);
        }
    auto ito = stratonovich_to_ito(a);
    EXPECT_THROW(chen_concat(ito, b), std::domain_error);
}

TEST(Chen, RefinedMomentsMatchDirectGenerator) {
    // Reduced-size run of the refinement invariant (k = 4 halvings).
    const int paths = 20000, p = 64, k = 4, pieces = 1 << k;
    const int q = 2;
    auto moments = [&](bool refined) {
        std::vector<double> m(4, 0.0), m2(4, 0.0);
        for (int i = 0; i < paths; ++i) {
            IntegralSet s;
            if (!refined) {
                s = integral_set(sample_tableau(q, p, 55, stream_id(1, static_cast<std::uint64_t>(i))));
            } else {
                s = IntegralSet::zeros(q, 0.0);
                for (int c = 0; c < pieces; ++c) {
                    const auto t = sample_tableau(q, p, 56, stream_id(2, static_cast<std::uint64_t>(i * pieces + c)));
                    s = chen_concat(s, scale_to_interval(integral_set(t), 1.0 / pieces));
                }
            }
            const double f[4] = {s.I2(0, 1) * s.I2(0, 1), s.I3(0, 0, 1) * s.I3(0, 0, 1), s.I3(0, 1, 1) * s.I3(0, 1, 1),
                                 s.I3(0, 1, 0) * s.I3(0, 1, 0)};
            for (int e = 0; e < 4; ++e) {
                m[e] += f[e];
                m2[e] += f[e] * f[e];
            }
        }
        std::vector<std::pair<double, double>> out;
        for (int e = 0; e < 4; ++e) {
            const double mean = m[e] / paths;
            out.push_back({mean, std::sqrt((m2[e] / paths - mean * mean) / paths)});
        }
        return out;
    };
    const auto d = moments(false), r = moments(true);
    for (int e = 0; e < 4; ++e) {
        const double se = std::hypot(d[e].second, r[e].second);
        EXPECT_LT(std::abs(d[e].first - r[e].first), 4 * se) << "moment " << e;
    }
}
