#include <gtest/gtest.h>

#include <iterint/phase.hpp>

#include <cmath>

using namespace iterint;

namespace {

std::vector<double> random_vector(int n, std::uint64_t seed, std::uint64_t stream, double scale = 1.0) {
    NormalStream g(seed, stream);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[i] = scale * g.normal(0, static_cast<std::uint32_t>(i), tag::aux);
    return v;
}

Omega random_omega(int q, std::uint64_t stream) {
    const auto L = layout(q);
    return Omega::from_flat(random_vector(L.d, 41, stream), L);
}

}  // namespace

TEST(Omega, ExtensionRulesAndRoundTrip) {
    const auto L = layout(3);
    const auto flat = random_vector(L.d, 1, 1);
    const auto w = Omega::from_flat(flat, L);
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
            EXPECT_EQ(w.alpha[j * 3 + k], -w.alpha[k * 3 + j]);
            EXPECT_EQ(w.beta1[j * 3 + k], w.beta1[k * 3 + j]);
            if (j >= k) {
                EXPECT_EQ(w.gamma[j * 3 + k], 0.0);
            }
            for (int l = 0; l < 3; ++l) {
                if (!is_lyndon3({j + 1, k + 1, l + 1}, 3)) {
                    EXPECT_EQ(w.rho[(j * 3 + k) * 3 + l], 0.0);
                }
            }
        }
    EXPECT_EQ(w.flat(L), flat);
}

TEST(Phase, ValueBasics) {
    const int q = 2, p = 5;
    const auto L = layout(q);
    const auto w = random_omega(q, 3);
    EXPECT_EQ(phase_value(std::vector<double>(2 * q * p, 0.0), w, p), 0.0);
    const auto t = sample_tableau(q, p, 2, 2);
    const auto v = point_from_tableau(t);
    for (int j = 0; j < q; ++j) {
        Omega e = Omega::zeros(q);
        e.a[j] = 1;
        EXPECT_NEAR(phase_value(v, e, p), partial_sums(t).z[j], 1e-14);
    }
    (void)L;
}

TEST(Phase, EqualsInnerProductWithPartialSums) {
    for (int q : {1, 2, 3})
        for (int i = 0; i < 100 / 3 + 1; ++i) {
            const int p = 1 + i % 9;
            const auto L = layout(q);
            const auto w = random_omega(q, static_cast<std::uint64_t>(100 * q + i));
            const auto t = sample_tableau(q, p, 5, static_cast<std::uint64_t>(100 * q + i));
            const auto V = flatten(partial_sums(t), L);
            const auto wf = w.flat(L);
            double ip = 0, mag = 0;
            for (int c = 0; c < L.d; ++c) {
                ip += wf[c] * V[c];
                mag += std::abs(wf[c] * V[c]);
            }
            EXPECT_LE(std::abs(phase_value(point_from_tableau(t), w, p) - ip), 1e-10 * (1 + mag));
        }
}

TEST(Phase, GradientAtOrigin) {
    const int q = 2, p = 6;
    const auto w = random_omega(q, 9);
    const auto g = phase_gradient(std::vector<double>(2 * q * p, 0.0), w, p);
    for (int j = 0; j < q; ++j)
        for (int r = 1; r <= p; ++r) {
            EXPECT_DOUBLE_EQ(g[j * p + r - 1], w.a[j] / r);
            EXPECT_DOUBLE_EQ(g[q * p + j * p + r - 1], w.b[j] / (r * r));
        }
}

TEST(Phase, GradientAndHessianMatchFiniteDifferences) {
    for (auto [q, p] : {std::pair{1, 4}, std::pair{2, 8}, std::pair{3, 6}})
        for (int i = 0; i < 20; ++i) {
            const auto w = random_omega(q, static_cast<std::uint64_t>(1000 + 50 * q + i));
            const PhaseFunction f(q, p, w);
            const auto v = random_vector(2 * q * p, 8, static_cast<std::uint64_t>(50 * q + i));
            const auto g = f.gradient(v);
            const auto H = f.hessian(v);
            const double hstep = 1e-4;
            double gmax = 0;
            for (double e : g) gmax = std::max(gmax, std::abs(e));
            for (int c = 0; c < f.dim(); ++c) {
                auto vp = v, vm = v;
                vp[c] += hstep;
                vm[c] -= hstep;
                const double fd = (f.value(vp) - f.value(vm)) / (2 * hstep);
                EXPECT_LE(std::abs(fd - g[c]), 1e-5 * std::max(1.0, gmax)) << "q=" << q << " c=" << c;
                const auto gp = f.gradient(vp), gm = f.gradient(vm);
                for (int c2 = 0; c2 < f.dim(); ++c2)
                    EXPECT_LE(std::abs((gp[c2] - gm[c2]) / (2 * hstep) - H(c2, c)), 1e-4);
            }
            EXPECT_LE((H - H.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        }
}

TEST(Phase, LinearityProperties) {
    const int q = 2, p = 7;
    auto w = random_omega(q, 77);
    const auto v = random_vector(2 * q * p, 3, 3);
    auto v2 = v;
    for (auto& e : v2) e *= 2;
    const std::vector<double> zero(v.size(), 0.0);

    // rho = gamma = 0: gradient affine in v
    Omega w0 = w;
    std::fill(w0.rho.begin(), w0.rho.end(), 0.0);
    std::fill(w0.gamma.begin(), w0.gamma.end(), 0.0);
    const PhaseFunction f0(q, p, w0);
    const auto g0 = f0.gradient(zero), g1 = f0.gradient(v), g2 = f0.gradient(v2);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(g2[i] - g0[i], 2 * (g1[i] - g0[i]), 1e-10);

    // rho = 0: Hessian constant
    Omega wr = w;
    std::fill(wr.rho.begin(), wr.rho.end(), 0.0);
    const PhaseFunction fr(q, p, wr);
    EXPECT_LE((fr.hessian(v) - fr.hessian(zero)).cwiseAbs().maxCoeff(), 1e-14);

    // pure rho: Hessian linear in v
    Omega wp = Omega::zeros(q);
    wp.rho = w.rho;
    const PhaseFunction fp(q, p, wp);
    EXPECT_LE((fp.hessian(v2) - 2 * fp.hessian(v)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Thorn, SkewMatrixEntries) {
    const auto S2 = skew_matrix(2);
    EXPECT_EQ(S2[0][1], cpp_rational(1, 3));
    EXPECT_EQ(S2[1][0], -cpp_rational(1, 3));
    EXPECT_EQ(S2[0][0], 0);
    EXPECT_EQ(skew_matrix(1)[0][0], 0);
    EXPECT_EQ(skew_matrix(3)[0][2], cpp_rational(1, 8));
    EXPECT_THROW(skew_matrix(0), std::domain_error);
}

TEST(Thorn, SmallValues) {
    EXPECT_EQ(thorn(2), cpp_rational(1, 9));
    // Pfaffian a12 a34 - a13 a24 + a14 a23 with a_rs = 1/(s^2 - r^2)
    const cpp_rational pf4 = cpp_rational(1, 3) * cpp_rational(1, 7) - cpp_rational(1, 8) * cpp_rational(1, 12) +
                             cpp_rational(1, 15) * cpp_rational(1, 5);
    EXPECT_EQ(pf4, cpp_rational(283, 5600));
    EXPECT_EQ(thorn(4), cpp_rational(80089, 31360000));
    EXPECT_EQ(thorn_bareiss(4), cpp_rational(80089, 31360000));
    EXPECT_EQ(thorn_bareiss(2), cpp_rational(1, 9));
}

TEST(Thorn, OddIsZeroAndMethodsAgree) {
    for (int n = 1; n <= 41; n += 2) {
        EXPECT_EQ(thorn(n), 0);
        EXPECT_EQ(thorn_bareiss(n), 0) << n;
    }
    for (int n = 2; n <= 24; n += 2) EXPECT_EQ(thorn_pfaffian(n), thorn_bareiss(n)) << n;
}

TEST(Thorn, DecaysOnPrimeList) {
    const int list[] = {2, 4, 6, 10, 12, 16, 18, 22, 28, 30, 36, 40};
    std::vector<double> lg;
    for (int n : list) {
        const auto t = thorn(n);
        ASSERT_NE(t, 0) << n;
        lg.push_back(log_abs(t));
    }
    for (std::size_t i = 1; i < lg.size(); ++i) EXPECT_LT(lg[i], lg[i - 1]);
    EXPECT_NEAR(log_abs(cpp_rational(1, 9)), -std::log(9.0), 1e-14);
}

TEST(Charfn, ZeroFrequencyAndModulusBound) {
    const auto L = layout(2);
    const auto at0 = charfn_estimate(2, 8, std::vector<double>(L.d, 0.0), 1000, 1);
    EXPECT_EQ(at0.value, std::complex<double>(1.0, 0.0));
    auto xi = random_direction(L.d, 4, 0);
    for (auto& e : xi) e *= 3;
    const auto est = charfn_estimate(2, 8, xi, 4000, 1);
    EXPECT_LE(est.modulus, 1 + 3 * est.se);
    EXPECT_GT(est.se, 0.0);
    EXPECT_THROW(charfn_estimate(2, 8, xi, 999, 1), std::domain_error);
}

TEST(Charfn, GaussianComponentMatchesClosedForm) {
    // xi on z_1 only: <xi, V_p> = c z_1 is Gaussian with variance c^2 sum r^-2
    const int p = 8;
    const auto L = layout(2);
    std::vector<double> xi(L.d, 0.0);
    xi[L.z] = 1.5;
    double v = 0;
    for (int r = 1; r <= p; ++r) v += 1.0 / (r * r);
    const auto est = charfn_estimate(2, p, xi, 20000, 3);
    EXPECT_NEAR(est.value.real(), std::exp(-0.5 * 2.25 * v), 4 * est.se);
    EXPECT_NEAR(est.value.imag(), 0.0, 4 * est.se);
}
