#pragma once

#include <fftw3.h>

#include <cmath>
#include <iomanip>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fft_sums.hpp"
#include "sums.hpp"
#include "tableau.hpp"

namespace iterint {

enum class Convention { stratonovich, ito };

/// Level-3 signature of the driving path on an interval of length h, plus
/// the time integral iw_j = int (W_j(s) - W_j(a)) ds needed by order-1.5 schemes.
struct IntegralSet {
    int q = 0;
    double h = 0.0;
    std::vector<double> dw, iw;
    std::vector<double> i2;  // q*q, i2[j*q+k] = I_{jk}
    std::vector<double> i3;  // q^3, i3[(j*q+k)*q+l] = I_{jkl}
    Convention convention = Convention::stratonovich;

    static IntegralSet zeros(int q, double h = 0.0) {
        IntegralSet s;
        s.q = q;
        s.h = h;
        s.dw.assign(q, 0.0);
        s.iw.assign(q, 0.0);
        s.i2.assign(static_cast<std::size_t>(q) * q, 0.0);
        s.i3.assign(static_cast<std::size_t>(q) * q * q, 0.0);
        return s;
    }
    double I2(int j, int k) const { return i2[static_cast<std::size_t>(j) * q + k]; }
    double& I2(int j, int k) { return i2[static_cast<std::size_t>(j) * q + k]; }
    double I3(int j, int k, int l) const { return i3[(static_cast<std::size_t>(j) * q + k) * q + l]; }
    double& I3(int j, int k, int l) { return i3[(static_cast<std::size_t>(j) * q + k) * q + l]; }
    /// int_0^h s dW_j
    double I0j(int j) const { return h * dw[j] - iw[j]; }
    /// int_0^h W_j ds
    double Ij0(int j) const { return iw[j]; }
};

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSqrt2 = std::numbers::sqrt2;

/// I_{jk} = W^j W^k / 2 + (W^j z_k - W^k z_j)/(sqrt2 pi) + lambda_{jk}/(2 pi)
inline std::vector<double> double_integral(const std::vector<double>& w, const PartialSums& s) {
    const int q = s.q;
    if (static_cast<int>(w.size()) != q) throw std::domain_error("dimension mismatch");
    std::vector<double> out(static_cast<std::size_t>(q) * q);
    const double c = 1.0 / (kSqrt2 * kPi);
    for (int j = 0; j < q; ++j)
        for (int k = 0; k < q; ++k)
            out[static_cast<std::size_t>(j) * q + k] =
                j == k ? 0.5 * w[j] * w[j] : 0.5 * w[j] * w[k] + c * (w[j] * s.z[k] - w[k] * s.z[j]) + s.L(j, k) / (2 * kPi);
    return out;
}

/// Triple Stratonovich integrals of the truncated path; exact at every p.
inline std::vector<double> triple_integral(const std::vector<double>& w, const PartialSums& s) {
    const int q = s.q;
    if (static_cast<int>(w.size()) != q) throw std::domain_error("dimension mismatch");
    if (!s.delta_full) throw std::domain_error("triple integrals need delta for every index triple");
    if (!s.nu_lower) throw std::domain_error("triple integrals need the full nu matrix");
    const double pi2 = kPi * kPi;
    const double c1 = 1.0 / (2 * kSqrt2 * kPi), c2 = 1.0 / (kSqrt2 * pi2);
    const double c3 = 1.0 / (2 * kSqrt2 * pi2), c4 = 1.0 / (4 * kSqrt2 * pi2);
    auto inner = [&](int a, int b, double nu) {
        return s.L(a, b) / (4 * kPi) - nu / (2 * pi2) + s.z[a] * s.z[b] / (2 * pi2) -
               (s.M1(a, b) - s.M2(a, b)) / (8 * pi2);
    };
    std::vector<double> out(static_cast<std::size_t>(q) * q * q);
    for (int j = 0; j < q; ++j)
        for (int k = 0; k < q; ++k)
            for (int l = 0; l < q; ++l) {
                double v = w[j] * w[k] * w[l] / 6.0;
                v += c1 * w[j] * w[k] * (s.z[l] + s.u[l] / kPi);
                v -= c1 * w[k] * w[l] * (s.z[j] - s.u[j] / kPi);
                v -= c2 * w[j] * w[l] * s.u[k];
                v += w[l] * inner(j, k, s.N(k, j));
                v += w[j] * inner(k, l, s.N(k, l));
                v -= w[k] * ((s.M1(j, l) + s.M2(j, l)) / (4 * pi2) + s.z[j] * s.z[l] / (2 * pi2));
                v += c3 * (s.z[l] * s.L(j, k) - s.z[j] * s.L(k, l));
                v += c4 * s.D(j, k, l);
                out[(static_cast<std::size_t>(j) * q + k) * q + l] = v;
            }
    return out;
}

/// int_0^1 W_j ds = W^j/2 - z_j/(sqrt2 pi) for the truncated path.
inline std::vector<double> time_integral(const std::vector<double>& w, const PartialSums& s) {
    std::vector<double> out(s.q);
    for (int j = 0; j < s.q; ++j) out[j] = 0.5 * w[j] - s.z[j] / (kSqrt2 * kPi);
    return out;
}

/// Unit-interval signature from the Fourier data.
inline IntegralSet integral_set(const std::vector<double>& w, const PartialSums& s) {
    IntegralSet out = IntegralSet::zeros(s.q, 1.0);
    out.dw = w;
    out.iw = time_integral(w, s);
    out.i2 = double_integral(w, s);
    out.i3 = triple_integral(w, s);
    return out;
}

inline IntegralSet integral_set(const Tableau& t) { return integral_set(t.w1, compute_sums(t, true)); }

namespace detail {

/// Cumulative composite Simpson on a uniform grid with n (even) intervals.
/// Odd nodes use the three-point rule on the first half of each panel.
inline std::vector<double> cumulative_simpson(const std::vector<double>& f, double dt) {
    const std::size_t n = f.size() - 1;
    std::vector<double> F(f.size(), 0.0);
    for (std::size_t i = 0; i + 2 <= n; i += 2) {
        F[i + 1] = F[i] + dt / 12.0 * (5 * f[i] + 8 * f[i + 1] - f[i + 2]);
        F[i + 2] = F[i] + dt / 3.0 * (f[i] + 4 * f[i + 1] + f[i + 2]);
    }
    return F;
}

inline double simpson(const std::vector<double>& f, double dt) {
    const std::size_t n = f.size() - 1;
    double acc = f[0] + f[n];
    for (std::size_t i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f[i];
    return acc * dt / 3.0;
}
}  // namespace detail

/// Path values W_j(t_i) and derivatives at t_i = i/n, i = 0..n.
inline void sample_path(const Tableau& t, int n, std::vector<std::vector<double>>& W,
                        std::vector<std::vector<double>>& dW) {
    if (n < 4 || n % 2 != 0) throw std::domain_error("nsteps must be even and >= 4");
    if (2 * t.p >= n) throw std::domain_error("nsteps too small for the truncation level");
    const int q = t.q;
    const double c0 = 1.0 / (kSqrt2 * kPi);
    W.assign(q, std::vector<double>(n + 1));
    dW.assign(q, std::vector<double>(n + 1));
    std::vector<double> out(n);
    fftw_complex* in = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> g(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_c2r_1d(n, in, out.data(), FFTW_ESTIMATE);
    }
    for (int j = 0; j < q; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (int k = 0; k <= n / 2; ++k) in[k][0] = in[k][1] = 0.0;
            double A = 0;
            for (int r = 1; r <= t.p; ++r) {
                // Z_r = c0 (x_r - i y_r) / r ; value: Re(Z e^{i th}), derivative: Re(2 pi i r Z e^{i th})
                const double zr = c0 * t.X(j, r) / r, zi = -c0 * t.Y(j, r) / r;
                A += zr;
                if (pass == 0) {
                    in[r][0] = 0.5 * zr;
                    in[r][1] = 0.5 * zi;
                } else {
                    const double f = 2 * kPi * r;
                    in[r][0] = -0.5 * f * zi;
                    in[r][1] = 0.5 * f * zr;
                }
            }
            fftw_execute(plan);
            for (int i = 0; i <= n; ++i) {
                const double per = out[i % n];
                const double s = static_cast<double>(i) / n;
                if (pass == 0) W[j][i] = s * t.w1[j] + per - A;
                else dW[j][i] = t.w1[j] + per;
            }
        }
        W[j][0] = 0.0;
        W[j][n] = t.w1[j];
    }
    {
        std::lock_guard<std::mutex> g(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
}

/// Signature of the smooth truncated path by composite Simpson quadrature.
inline IntegralSet quadrature_oracle(const Tableau& t, int nsteps) {
    std::vector<std::vector<double>> W, dW;
    sample_path(t, nsteps, W, dW);
    const int q = t.q;
    const double dt = 1.0 / nsteps;
    IntegralSet out = IntegralSet::zeros(q, 1.0);
    std::vector<double> f(static_cast<std::size_t>(nsteps) + 1);
    for (int j = 0; j < q; ++j) {
        out.dw[j] = t.w1[j];
        out.iw[j] = detail::simpson(W[j], dt);
    }
    for (int j = 0; j < q; ++j)
        for (int k = 0; k < q; ++k) {
            for (int i = 0; i <= nsteps; ++i) f[i] = W[j][i] * dW[k][i];
            const auto F = detail::cumulative_simpson(f, dt);
            out.I2(j, k) = F[nsteps];
            for (int l = 0; l < q; ++l) {
                for (int i = 0; i <= nsteps; ++i) f[i] = F[i] * dW[l][i];
                out.I3(j, k, l) = detail::simpson(f, dt);
            }
        }
    return out;
}

/// Stratonovich -> Ito:
///   I_{jk}  = J_{jk} - h/2 [j=k]
///   I_{jkl} = J_{jkl} - [j=k] J_{(0,l)}/2 - [k=l] J_{(j,0)}/2
/// Levels that are not present (empty vectors) are left alone.
inline IntegralSet stratonovich_to_ito(const IntegralSet& s) {
    if (s.convention != Convention::stratonovich) throw std::domain_error("expected Stratonovich input");
    IntegralSet o = s;
    const int q = s.q;
    const auto q2 = static_cast<std::size_t>(q) * q;
    if (s.i2.size() == q2)
        for (int j = 0; j < q; ++j) o.I2(j, j) -= 0.5 * s.h;
    if (s.i3.size() == q2 * q && static_cast<int>(s.iw.size()) == q) {
        for (int j = 0; j < q; ++j)
            for (int k = 0; k < q; ++k)
                for (int l = 0; l < q; ++l) {
                    double c = 0;
                    if (j == k) c += 0.5 * s.I0j(l);
                    if (k == l) c += 0.5 * s.Ij0(j);
                    o.I3(j, k, l) -= c;
                }
    }
    o.convention = Convention::ito;
    return o;
}

inline IntegralSet ito_to_stratonovich(const IntegralSet& s) {
    if (s.convention != Convention::ito) throw std::domain_error("expected Ito input");
    IntegralSet o = s;
    const int q = s.q;
    const auto q2 = static_cast<std::size_t>(q) * q;
    if (s.i2.size() == q2)
        for (int j = 0; j < q; ++j) o.I2(j, j) += 0.5 * s.h;
    if (s.i3.size() == q2 * q && static_cast<int>(s.iw.size()) == q) {
        for (int j = 0; j < q; ++j)
            for (int k = 0; k < q; ++k)
                for (int l = 0; l < q; ++l) {
                    double c = 0;
                    if (j == k) c += 0.5 * s.I0j(l);
                    if (k == l) c += 0.5 * s.Ij0(j);
                    o.I3(j, k, l) += c;
                }
    }
    o.convention = Convention::stratonovich;
    return o;
}

/// Brownian scaling of a unit-interval set to [0,h].
inline IntegralSet scale_to_interval(const IntegralSet& s, double h) {
    if (!(h > 0)) throw std::domain_error("h must be positive");
    if (s.h != 1.0) throw std::domain_error("expected a unit-interval set");
    IntegralSet o = s;
    const double a = std::sqrt(h), b = h * a;
    for (auto& v : o.dw) v *= a;
    for (auto& v : o.iw) v *= b;
    for (auto& v : o.i2) v *= h;
    for (auto& v : o.i3) v *= b;
    o.h = h;
    return o;
}

/// Chen relation: signature of the concatenated path a then b.
inline IntegralSet chen_concat(const IntegralSet& a, const IntegralSet& b) {
    if (a.q != b.q) throw std::domain_error("dimension mismatch");
    if (a.convention != Convention::stratonovich || b.convention != Convention::stratonovich)
        throw std::domain_error("Chen concatenation needs Stratonovich sets");
    const int q = a.q;
    IntegralSet o = IntegralSet::zeros(q, a.h + b.h);
    for (int j = 0; j < q; ++j) {
        o.dw[j] = a.dw[j] + b.dw[j];
        o.iw[j] = a.iw[j] + b.iw[j] + a.dw[j] * b.h;
    }
    for (int j = 0; j < q; ++j)
        for (int k = 0; k < q; ++k) {
            o.I2(j, k) = a.I2(j, k) + b.I2(j, k) + a.dw[j] * b.dw[k];
            for (int l = 0; l < q; ++l)
                o.I3(j, k, l) = a.I3(j, k, l) + b.I3(j, k, l) + a.dw[j] * b.I2(k, l) + a.I2(j, k) * b.dw[l];
        }
    return o;
}

/// Rows "path_id,h,entity,indices,value".
inline void write_integral_csv(std::ostream& os, long path_id, const IntegralSet& s) {
    os << std::setprecision(17);
    const int q = s.q;
    for (int j = 0; j < q; ++j) os << path_id << ',' << s.h << ",dw," << j + 1 << ',' << s.dw[j] << '\n';
    for (int j = 0; j < q; ++j)
        for (int k = 0; k < q; ++k)
            os << path_id << ',' << s.h << ",i2," << j + 1 << ' ' << k + 1 << ',' << s.I2(j, k) << '\n';
    for (int j = 0; j < q; ++j)
        for (int k = 0; k < q; ++k)
            for (int l = 0; l < q; ++l)
                os << path_id << ',' << s.h << ",i3," << j + 1 << ' ' << k + 1 << ' ' << l + 1 << ','
                   << s.I3(j, k, l) << '\n';
}

}  // namespace iterint
