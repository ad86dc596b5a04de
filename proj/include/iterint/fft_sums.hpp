#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "sums.hpp"

namespace iterint {

namespace detail {

/// FFTW's planner is not reentrant; every plan creation goes through this.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

/// Smallest 2^a 3^b >= n.
inline int smooth_size(int n) {
    int best = 1 << 30;
    for (long p2 = 1; p2 < 2L * n; p2 *= 2)
        for (long v = p2; v < 2L * n; v *= 3)
            if (v >= n && v < best) best = static_cast<int>(v);
    return best;
}

/// FFTW plans and the two nu kernels for one transform size.
struct FftPlan {
    int N = 0, M = 0;
    fftw_plan fwd = nullptr, inv = nullptr;
    std::vector<std::complex<double>> kt, kh;  // transformed Toeplitz / Hankel kernels

    FftPlan(int N_, int M_) : N(N_), M(M_) {
        std::lock_guard<std::mutex> g(fftw_planner_mutex());
        auto* a = fftw_alloc_complex(static_cast<std::size_t>(M));
        auto* b = fftw_alloc_complex(static_cast<std::size_t>(M));
        fwd = fftw_plan_dft_1d(M, a, b, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        inv = fftw_plan_dft_1d(M, a, b, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(a);
        fftw_free(b);
        init_kernels();
    }

    void init_kernels() {
        std::vector<std::complex<double>> k(static_cast<std::size_t>(M));
        for (int m = 1; m < N; ++m) {
            k[m] = 1.0 / m;
            k[M - m] = -1.0 / m;
        }
        kt = forward(k);
        std::fill(k.begin(), k.end(), 0.0);
        for (int m = 2; m <= 2 * N; ++m) k[m] = 1.0 / m;
        kh = forward(k);
    }
    FftPlan(const FftPlan&) = delete;
    FftPlan& operator=(const FftPlan&) = delete;
    ~FftPlan() {
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
    }

    std::vector<std::complex<double>> forward(const std::vector<std::complex<double>>& in) const {
        std::vector<std::complex<double>> out(in.size());
        fftw_execute_dft(fwd, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data())),
                         reinterpret_cast<fftw_complex*>(out.data()));
        return out;
    }
    /// Unnormalised inverse.
    std::vector<std::complex<double>> backward(const std::vector<std::complex<double>>& in) const {
        std::vector<std::complex<double>> out(in.size());
        fftw_execute_dft(inv, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in.data())),
                         reinterpret_cast<fftw_complex*>(out.data()));
        return out;
    }
};

inline const FftPlan& fft_plan(int N) {
    static std::mutex m;
    static std::map<int, std::unique_ptr<FftPlan>> cache;
    std::lock_guard<std::mutex> g(m);
    auto& slot = cache[N];
    if (!slot) slot = std::make_unique<FftPlan>(N, smooth_size(2 * N + 1));
    return *slot;
}

}  // namespace detail

/// V_N by fast convolutions, N = t.p. Same values as partial_sums up to
/// rounding; nu uses r/(s(r^2-s^2)) = (1/(r-s) + 1/(r+s))/(2s) and
/// 1/(r^2-s^2) = (1/(r-s) - 1/(r+s))/(2s), delta three convolutions per word.
inline PartialSums partial_sums_fast(const Tableau& t, bool full_delta = false) {
    using cd = std::complex<double>;
    const int q = t.q, N = t.p;
    const auto& P = detail::fft_plan(N);
    const int M = P.M;
    PartialSums S = basic_sums(t, 0, N);

    // nu: one forward and one inverse transform per second letter k.
    for (int k = 1; k < q; ++k) {
        std::vector<cd> f(static_cast<std::size_t>(M));
        for (int s = 1; s <= N; ++s) f[s] = cd(t.X(k, s), t.Y(k, s)) / static_cast<double>(s);
        const auto F = P.forward(f);
        std::vector<cd> G(static_cast<std::size_t>(M));
        for (int w = 0; w < M; ++w) G[w] = F[w] * P.kt[w] + std::conj(F[w]) * P.kh[w];
        const auto g = P.backward(G);
        for (int j = 0; j < k; ++j) {
            double acc = 0;
            for (int r = 1; r <= N; ++r) {
                const double r2 = 2.0 * r * r;
                acc += t.X(j, r) * (g[r].real() / M - t.X(k, r) / r2) + t.Y(j, r) * (g[r].imag() / M + t.Y(k, r) / r2);
            }
            S.nu[j * q + k] = 0.5 * acc;
        }
    }

    // delta
    std::vector<std::vector<cd>> A(q), B(q);  // transforms of zeta and zeta/r
    for (int a = 0; a < q; ++a) {
        std::vector<cd> f(static_cast<std::size_t>(M)), g(static_cast<std::size_t>(M));
        for (int r = 1; r <= N; ++r) {
            f[r] = cd(t.X(a, r), t.Y(a, r));
            g[r] = f[r] / static_cast<double>(r);
        }
        A[a] = P.forward(f);
        B[a] = P.forward(g);
    }
    std::map<std::pair<int, int>, std::vector<cd>> c1, c2;
    auto conv1 = [&](int a, int b) -> const std::vector<cd>& {  // sum (zeta_a/r) zeta_b
        auto& v = c1[{a, b}];
        if (v.empty()) {
            std::vector<cd> h(static_cast<std::size_t>(M));
            for (int w = 0; w < M; ++w) h[w] = B[a][w] * A[b][w];
            v = P.backward(h);
            for (auto& e : v) e /= static_cast<double>(M);
        }
        return v;
    };
    auto conv2 = [&](int a, int b) -> const std::vector<cd>& {  // sum (zeta_a/r)(zeta_b/s)
        auto& v = c2[{std::min(a, b), std::max(a, b)}];
        if (v.empty()) {
            std::vector<cd> h(static_cast<std::size_t>(M));
            for (int w = 0; w < M; ++w) h[w] = B[a][w] * B[b][w];
            v = P.backward(h);
            for (auto& e : v) e /= static_cast<double>(M);
        }
        return v;
    };
    auto zeta = [&](int a, int m) { return cd(t.X(a, m), t.Y(a, m)); };
    auto do_delta = [&](int j, int k, int l) {
        const auto& t1 = conv1(j, k);
        const auto& t2 = conv2(j, l);
        const auto& t3 = conv1(l, k);
        double acc = 0;
        for (int m = 2; m <= N; ++m) {
            acc += -std::imag(t1[m] * std::conj(zeta(l, m))) / m + std::imag(t2[m] * std::conj(zeta(k, m))) -
                   std::imag(t3[m] * std::conj(zeta(j, m))) / m;
        }
        S.D(j, k, l) = acc;
    };
    if (full_delta) {
        for (int j = 0; j < q; ++j)
            for (int k = 0; k < q; ++k)
                for (int l = 0; l < q; ++l) do_delta(j, k, l);
    } else {
        for (const auto& w : enumerate_lyndon3(q)) do_delta(w.j - 1, w.k - 1, w.l - 1);
    }
    S.delta_full = full_delta;
    S.fill_nu_lower();
    return S;
}

/// Picks the direct double sums for small p and the transforms otherwise.
inline PartialSums compute_sums(const Tableau& t, bool full_delta = false) {
    return t.p <= 24 ? partial_sums(t, full_delta) : partial_sums_fast(t, full_delta);
}

}  // namespace iterint
