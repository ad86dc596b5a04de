#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "integrals.hpp"
#include "parallel.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "tableau.hpp"

namespace iterint {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// dX = b(X) dt + sigma(X) dW in Ito form, X in R^dx, W in R^q.
///
/// Derivative callbacks: db(x)(i,m) = d_m b_i, d2b(x)[i](m,n),
/// dsigma(x)[l](i,m) = d_m sigma_il, d2sigma(x)[l][i](m,n). Empty second
/// derivative callbacks mean the field is affine.
struct SdeProblem {
    std::string name;
    int dx = 1;
    int q = 1;
    std::function<Vec(const Vec&)> b;
    std::function<Mat(const Vec&)> sigma;
    std::function<Mat(const Vec&)> db;
    std::function<std::vector<Mat>(const Vec&)> d2b;
    std::function<std::vector<Mat>(const Vec&)> dsigma;
    std::function<std::vector<std::vector<Mat>>(const Vec&)> d2sigma;
    /// x_t from (x0, t, W_t) when the solution is a function of W_t alone.
    std::function<Vec(const Vec&, double, const Vec&)> exact;
    Vec x0;
};

/// dX = A X dt + sum_l B_l X dW^l.
inline SdeProblem bilinear_problem(std::string name, const Mat& A, const std::vector<Mat>& B, const Vec& x0) {
    const int dx = static_cast<int>(A.rows());
    const int q = static_cast<int>(B.size());
    SdeProblem P;
    P.name = std::move(name);
    P.dx = dx;
    P.q = q;
    P.x0 = x0;
    P.b = [A](const Vec& x) -> Vec { return A * x; };
    P.db = [A](const Vec&) -> Mat { return A; };
    P.sigma = [B, dx, q](const Vec& x) {
        Mat S(dx, q);
        for (int l = 0; l < q; ++l) S.col(l) = B[l] * x;
        return S;
    };
    P.dsigma = [B](const Vec&) { return B; };
    return P;
}

/// Geometric Brownian motion dX = mu X dt + s X dW.
inline SdeProblem gbm_problem(double mu = 2.0, double s = 1.0, double x0 = 1.0) {
    auto P = bilinear_problem("gbm", Mat::Constant(1, 1, mu), {Mat::Constant(1, 1, s)}, Vec::Constant(1, x0));
    P.exact = [mu, s](const Vec& x, double t, const Vec& w) -> Vec {
        return x * std::exp((mu - 0.5 * s * s) * t + s * w[0]);
    };
    return P;
}

/// Scalar linear SDE with affine noise dX = a X dt + (b X + c) dW. The
/// constant part of the noise makes L^1 a and L^0 sigma differ, so the two
/// mixed time integrals enter separately.
inline SdeProblem linear1d_problem(double a = -1.0, double b = 0.5, double c = 0.5, double x0 = 1.0) {
    SdeProblem P;
    P.name = "linear1d";
    P.dx = 1;
    P.q = 1;
    P.x0 = Vec::Constant(1, x0);
    P.b = [a](const Vec& x) -> Vec { return a * x; };
    P.db = [a](const Vec&) -> Mat { return Mat::Constant(1, 1, a); };
    P.sigma = [b, c](const Vec& x) -> Mat { return Mat::Constant(1, 1, b * x[0] + c); };
    P.dsigma = [b](const Vec&) { return std::vector<Mat>{Mat::Constant(1, 1, b)}; };
    return P;
}

/// Two-dimensional bilinear problem with non-commuting noise matrices.
inline SdeProblem bilinear2d_problem() {
    Mat A(2, 2), B1(2, 2), B2(2, 2);
    A << -0.5, 0.3, -0.3, -0.5;
    B1 << 0.4, 0.2, 0.0, 0.3;
    B2 << 0.2, 0.0, -0.3, 0.4;
    Vec x0(2);
    x0 << 1.0, 0.5;
    return bilinear_problem("bilinear2d", A, {B1, B2}, x0);
}

inline SdeProblem problem_by_name(const std::string& name) {
    if (name == "gbm") return gbm_problem();
    if (name == "linear1d") return linear1d_problem();
    if (name == "bilinear2d") return bilinear2d_problem();
    throw std::invalid_argument("unknown problem: " + name);
}

enum class Scheme { euler, milstein, taylor15 };

inline std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::euler: return "euler";
        case Scheme::milstein: return "milstein";
        default: return "taylor15";
    }
}

inline Scheme parse_scheme(const std::string& s) {
    if (s == "euler") return Scheme::euler;
    if (s == "milstein") return Scheme::milstein;
    if (s == "taylor15") return Scheme::taylor15;
    throw std::invalid_argument("unknown scheme: " + s);
}

struct SchemeRun {
    Scheme scheme = Scheme::euler;
    double h = 0;
    int steps = 0;
    std::vector<Vec> states;
    std::vector<IntegralSet> driver;
    std::uint64_t seed = 0;
};

namespace detail {

inline int step_count(double T, double h) {
    if (!(h > 0) || !(T > 0)) throw std::domain_error("T and h must be positive");
    const double n = std::round(T / h);
    if (n < 1 || std::abs(n * h - T) > 1e-12 * T) throw std::domain_error("h must divide T");
    return static_cast<int>(n);
}

inline void require_levels(const IntegralSet& s, int q, Scheme scheme) {
    if (s.q != q || static_cast<int>(s.dw.size()) != q) throw std::invalid_argument("driver dimension mismatch");
    const std::size_t q2 = static_cast<std::size_t>(q) * q;
    if (scheme != Scheme::euler && s.i2.size() != q2)
        throw std::invalid_argument("driver lacks level-2 integrals");
    if (scheme == Scheme::taylor15 && (s.i3.size() != q2 * q || static_cast<int>(s.iw.size()) != q))
        throw std::invalid_argument("driver lacks level-3 or time integrals");
}

/// One step from x with an Ito integral set over the step.
inline Vec advance(const SdeProblem& P, Scheme scheme, const Vec& x, const IntegralSet& s) {
    const int q = P.q;
    const double h = s.h;
    const Vec a = P.b(x);
    const Mat B = P.sigma(x);
    const Eigen::Map<const Vec> dw(s.dw.data(), q);
    Vec out = x + a * h + B * dw;
    if (scheme == Scheme::euler) return out;

    const std::vector<Mat> G = P.dsigma(x);
    // L^j sigma_l = G[l] sigma_j
    for (int j = 0; j < q; ++j)
        for (int l = 0; l < q; ++l) out += (G[l] * B.col(j)) * s.I2(j, l);
    if (scheme == Scheme::milstein) return out;

    const Mat J = P.db(x);
    const int dx = P.dx;
    const std::vector<Mat> H = P.d2b ? P.d2b(x) : std::vector<Mat>{};
    const std::vector<std::vector<Mat>> K = P.d2sigma ? P.d2sigma(x) : std::vector<std::vector<Mat>>{};

    // L^j b I_(j,0) and L^0 sigma_j I_(0,j)
    for (int j = 0; j < q; ++j) {
        out += (J * B.col(j)) * s.Ij0(j);
        Vec l0s = G[j] * a;
        if (!K.empty())
            for (int k = 0; k < dx; ++k)
                for (int i = 0; i < q; ++i) l0s[k] += 0.5 * B.col(i).dot(K[j][k] * B.col(i));
        out += l0s * s.I0j(j);
    }
    // L^0 b h^2/2
    Vec l0a = J * a;
    if (!H.empty())
        for (int k = 0; k < dx; ++k)
            for (int i = 0; i < q; ++i) l0a[k] += 0.5 * B.col(i).dot(H[k] * B.col(i));
    out += l0a * (0.5 * h * h);
    // L^{j1} L^{j2} sigma_{j3} I_(j1,j2,j3)
    for (int j1 = 0; j1 < q; ++j1)
        for (int j2 = 0; j2 < q; ++j2) {
            const Vec inner = G[j2] * B.col(j1);
            for (int j3 = 0; j3 < q; ++j3) {
                Vec c = G[j3] * inner;
                if (!K.empty())
                    for (int k = 0; k < dx; ++k) c[k] += B.col(j2).dot(K[j3][k] * B.col(j1));
                out += c * s.I3(j1, j2, j3);
            }
        }
    return out;
}

inline IntegralSet as_ito(const IntegralSet& s, Scheme scheme) {
    if (scheme == Scheme::euler || s.convention == Convention::ito) return s;
    return stratonovich_to_ito(s);
}

}  // namespace detail

/// Runs a scheme over [0,T] with one integral set per step (either
/// convention; Stratonovich sets are converted).
inline SchemeRun run_scheme(Scheme scheme, const SdeProblem& P, const Vec& x0, double T, double h,
                            const std::vector<IntegralSet>& driver) {
    const int n = detail::step_count(T, h);
    if (static_cast<int>(driver.size()) != n) throw std::domain_error("driver length does not match T/h");
    if (x0.size() != P.dx) throw std::domain_error("initial state has the wrong dimension");
    SchemeRun run;
    run.scheme = scheme;
    run.h = h;
    run.steps = n;
    run.driver = driver;
    run.states.reserve(n + 1);
    run.states.push_back(x0);
    for (int k = 0; k < n; ++k) {
        detail::require_levels(driver[k], P.q, scheme);
        if (std::abs(driver[k].h - h) > 1e-12 * h) throw std::domain_error("driver step differs from h");
        run.states.push_back(detail::advance(P, scheme, run.states.back(), detail::as_ito(driver[k], scheme)));
    }
    return run;
}

inline SchemeRun euler(const SdeProblem& P, const Vec& x0, double T, double h, const std::vector<IntegralSet>& d) {
    return run_scheme(Scheme::euler, P, x0, T, h, d);
}
inline SchemeRun milstein(const SdeProblem& P, const Vec& x0, double T, double h,
                          const std::vector<IntegralSet>& d) {
    return run_scheme(Scheme::milstein, P, x0, T, h, d);
}
inline SchemeRun taylor15(const SdeProblem& P, const Vec& x0, double T, double h,
                          const std::vector<IntegralSet>& d) {
    return run_scheme(Scheme::taylor15, P, x0, T, h, d);
}

// ---------------------------------------------------------------------------
// Drivers

/// Stratonovich sets for n steps of size h; step k of path `path` comes from
/// its own tableau with p modes.
inline std::vector<IntegralSet> brownian_driver(int q, int n, double h, int p, std::uint64_t seed,
                                                std::uint64_t path) {
    std::vector<IntegralSet> out;
    out.reserve(n);
    for (int k = 0; k < n; ++k) {
        const auto t = sample_tableau(q, p, seed, stream_id(role::sde, path * static_cast<std::uint64_t>(n) + k));
        out.push_back(scale_to_interval(integral_set(t), h));
    }
    return out;
}

/// Chen-combines consecutive groups of `factor` steps.
inline std::vector<IntegralSet> coarsen(const std::vector<IntegralSet>& fine, int factor) {
    if (factor < 1 || fine.size() % factor != 0) throw std::domain_error("factor must divide the step count");
    std::vector<IntegralSet> out;
    out.reserve(fine.size() / factor);
    for (std::size_t k = 0; k < fine.size(); k += factor) {
        IntegralSet s = fine[k];
        for (int m = 1; m < factor; ++m) s = chen_concat(s, fine[k + m]);
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Strong error scan

struct StrongScanOptions {
    double T = 1.0;
    int refine = 6;           // reference step = min(h) / 2^refine
    int p_step = 16;          // Fourier modes per finest step
    bool use_exact = true;    // exact reference when the problem has one
};

/// sqrt(E max_k |X_h(t_k) - X_ref(t_k)|^2) for each h, where the coarse
/// drivers are Chen products of the reference steps.
inline RateReport strong_error_scan(const SdeProblem& P, Scheme scheme, std::vector<double> h_grid, int paths,
                                    std::uint64_t seed, const StrongScanOptions& opt = {}) {
    if (h_grid.empty()) throw std::domain_error("empty step grid");
    if (paths < 2) throw std::domain_error("strong error scan needs at least two paths");
    std::sort(h_grid.begin(), h_grid.end());
    const bool exact = opt.use_exact && static_cast<bool>(P.exact);
    const int refine = exact ? 0 : opt.refine;
    if (refine < 0) throw std::domain_error("refine must be non-negative");
    const double hf = h_grid.front() / std::ldexp(1.0, refine);
    const int nf = detail::step_count(opt.T, hf);
    std::vector<int> factor;
    for (double h : h_grid) {
        detail::step_count(opt.T, h);
        const double r = h / hf;
        const int f = static_cast<int>(std::lround(r));
        if (std::abs(r - f) > 1e-9 || (f & (f - 1)) != 0)
            throw std::domain_error("step sizes must be power-of-two multiples of the reference step");
        factor.push_back(f);
    }
    const std::size_t G = h_grid.size();
    std::vector<double> err2(static_cast<std::size_t>(paths) * G, 0.0);

    parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
        const auto fine = brownian_driver(P.q, nf, hf, opt.p_step, seed, i);
        // reference states on the fine grid
        std::vector<Vec> ref;
        ref.reserve(nf + 1);
        if (exact) {
            Vec w = Vec::Zero(P.q);
            ref.push_back(P.x0);
            for (int k = 0; k < nf; ++k) {
                for (int j = 0; j < P.q; ++j) w[j] += fine[k].dw[j];
                ref.push_back(P.exact(P.x0, (k + 1) * hf, w));
            }
        } else {
            ref = run_scheme(Scheme::taylor15, P, P.x0, opt.T, hf, fine).states;
        }
        // coarse levels by repeated pairwise Chen products
        std::vector<IntegralSet> level = fine;
        int f = 1;
        for (std::size_t g = 0; g < G; ++g) {
            while (f < factor[g]) {
                level = coarsen(level, 2);
                f *= 2;
            }
            const auto run = run_scheme(scheme, P, P.x0, opt.T, h_grid[g], level);
            double worst = 0;
            for (int k = 0; k <= run.steps; ++k) worst = std::max(worst, (run.states[k] - ref[k * f]).squaredNorm());
            err2[i * G + g] = worst;
        }
    });

    RateReport r;
    r.metric = "strong_error";
    r.estimator = "max-grid-rms";
    r.seed = seed;
    r.samples = paths;
    for (std::size_t g = 0; g < G; ++g) {
        double s = 0, s2 = 0;
        for (int i = 0; i < paths; ++i) {
            const double e = err2[static_cast<std::size_t>(i) * G + g];
            s += e;
            s2 += e * e;
        }
        const double m = s / paths;
        const double var = std::max(0.0, (s2 - paths * m * m) / (paths - 1.0));
        const double v = std::sqrt(m);
        r.grid.push_back(h_grid[g]);
        r.values.push_back(v);
        r.se.push_back(v > 0 ? std::sqrt(var / paths) / (2 * v) : 0.0);
    }
    r.config = {{"problem", P.name},
                {"scheme", to_string(scheme)},
                {"T", opt.T},
                {"paths", paths},
                {"reference", exact ? "exact solution" : "taylor15 on the finest grid"},
                {"reference_step", hf},
                {"p_step", opt.p_step}};
    r.fit();
    return r;
}

}  // namespace iterint
