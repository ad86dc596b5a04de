#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lyndon.hpp"
#include "tableau.hpp"

namespace iterint {

/// Fourier coefficient sums (z, u, lambda, mu1, mu2, nu, delta).
///
/// Holds either the partial sums V_p (modes 1..p) or a tail V_N - V_p
/// (lo = p, hi = N). Matrices are full q-by-q row-major and delta is the
/// full q^3 tensor; only the entries listed in the flags are meaningful.
///
/// nu_{jk} = sum_{r != s} (r/s x_jr x_ks + y_jr y_ks) / (r^2 - s^2)
/// delta_{jkl} = sum_{r,s} [ -b1/(r(r+s)) + b2/(rs) + b3/(s(r+s)) ] with
///   b1 = Im(zeta_jr zeta_ks conj zeta_l,r+s)
///   b2 = Im(zeta_jr zeta_ls conj zeta_k,r+s)
///   b3 = -Im(conj zeta_j,r+s zeta_kr zeta_ls),   zeta = x + i y.
struct PartialSums {
    int q = 0;
    int lo = 0, hi = 0;
    std::vector<double> z, u, lambda, mu1, mu2, nu, delta;
    bool nu_lower = false;    // nu filled for j >= k as well
    bool delta_full = false;  // all q^3 delta entries, not only Lyndon words

    static PartialSums zeros(int q, int lo, int hi) {
        PartialSums s;
        s.q = q;
        s.lo = lo;
        s.hi = hi;
        s.z.assign(q, 0.0);
        s.u.assign(q, 0.0);
        s.lambda.assign(static_cast<std::size_t>(q) * q, 0.0);
        s.mu1 = s.mu2 = s.nu = s.lambda;
        s.delta.assign(static_cast<std::size_t>(q) * q * q, 0.0);
        return s;
    }

    int p() const { return hi; }
    double& L(int j, int k) { return lambda[static_cast<std::size_t>(j) * q + k]; }
    double L(int j, int k) const { return lambda[static_cast<std::size_t>(j) * q + k]; }
    double M1(int j, int k) const { return mu1[static_cast<std::size_t>(j) * q + k]; }
    double M2(int j, int k) const { return mu2[static_cast<std::size_t>(j) * q + k]; }
    double N(int j, int k) const { return nu[static_cast<std::size_t>(j) * q + k]; }
    double D(int j, int k, int l) const { return delta[(static_cast<std::size_t>(j) * q + k) * q + l]; }
    double& D(int j, int k, int l) { return delta[(static_cast<std::size_t>(j) * q + k) * q + l]; }

    /// Fills nu_{kj} (k>j) and nu_{jj} from nu_{jk} + nu_{kj} = z_j z_k - mu1_{jk}.
    /// Only valid for partial sums starting at mode 1.
    void fill_nu_lower() {
        if (lo != 0) throw std::logic_error("nu identity needs sums from the first mode");
        for (int j = 0; j < q; ++j) {
            nu[static_cast<std::size_t>(j) * q + j] = 0.5 * (z[j] * z[j] - M1(j, j));
            for (int k = j + 1; k < q; ++k)
                nu[static_cast<std::size_t>(k) * q + j] = z[j] * z[k] - M1(j, k) - N(j, k);
        }
        nu_lower = true;
    }
};

namespace detail {

inline double nu_term(const Tableau& t, int j, int k, int r, int s) {
    return (static_cast<double>(r) / s * t.X(j, r) * t.X(k, s) + t.Y(j, r) * t.Y(k, s)) /
           (static_cast<double>(r) * r - static_cast<double>(s) * s);
}

/// Summand of delta_{jkl} for the pair (r, s), t = r + s.
inline double delta_term(const Tableau& t, int j, int k, int l, int r, int s) {
    const int m = r + s;
    const double xjr = t.X(j, r), yjr = t.Y(j, r), xks = t.X(k, s), yks = t.Y(k, s);
    const double xlm = t.X(l, m), ylm = t.Y(l, m);
    const double b1 = (xjr * yks + yjr * xks) * xlm + (-xjr * xks + yjr * yks) * ylm;
    const double xls = t.X(l, s), yls = t.Y(l, s), xkm = t.X(k, m), ykm = t.Y(k, m);
    const double b2 = (xjr * yls + yjr * xls) * xkm + (-xjr * xls + yjr * yls) * ykm;
    const double xkr = t.X(k, r), ykr = t.Y(k, r), xjm = t.X(j, m), yjm = t.Y(j, m);
    const double b3 = -(xkr * yls + ykr * xls) * xjm + (xkr * xls - ykr * yls) * yjm;
    return -b1 / (static_cast<double>(r) * m) + b2 / (static_cast<double>(r) * s) +
           b3 / (static_cast<double>(s) * m);
}

}  // namespace detail

/// z, u, lambda, mu1, mu2 over modes lo < r <= hi; nu and delta left at zero.
inline PartialSums basic_sums(const Tableau& t, int lo, int hi) {
    if (lo < 0 || hi <= lo || hi > t.p) throw std::domain_error("bad summation shell");
    const int q = t.q;
    PartialSums S = PartialSums::zeros(q, lo, hi);
    for (int r = lo + 1; r <= hi; ++r) {
        const double ir = 1.0 / r, ir2 = ir * ir;
        for (int j = 0; j < q; ++j) {
            S.z[j] += t.X(j, r) * ir;
            S.u[j] += t.Y(j, r) * ir2;
        }
    }
    for (int j = 0; j < q; ++j)
        for (int k = j; k < q; ++k) {
            double lam = 0, m1 = 0, m2 = 0;
            for (int r = lo + 1; r <= hi; ++r) {
                const double ir2 = 1.0 / (static_cast<double>(r) * r);
                lam += (t.X(j, r) * t.Y(k, r) - t.Y(j, r) * t.X(k, r)) / r;
                m1 += t.X(j, r) * t.X(k, r) * ir2;
                m2 += t.Y(j, r) * t.Y(k, r) * ir2;
            }
            S.lambda[static_cast<std::size_t>(j) * q + k] = lam;
            S.lambda[static_cast<std::size_t>(k) * q + j] = -lam;
            S.mu1[static_cast<std::size_t>(j) * q + k] = S.mu1[static_cast<std::size_t>(k) * q + j] = m1;
            S.mu2[static_cast<std::size_t>(j) * q + k] = S.mu2[static_cast<std::size_t>(k) * q + j] = m2;
        }
    return S;
}

/// Direct summation over the shell lo < index <= hi.
///
/// "index" is r for z, u, lambda, mu; max(r,s) for nu, swept in increasing
/// order; r+s for delta, swept in increasing order.
inline PartialSums shell_sums(const Tableau& t, int lo, int hi, bool full_delta = false, bool full_nu = false) {
    const int q = t.q;
    PartialSums S = basic_sums(t, lo, hi);
    for (int j = 0; j < q; ++j)
        for (int k = 0; k < q; ++k) {
            if (!full_nu && j >= k) continue;
            double acc = 0;
            for (int m = lo + 1; m <= hi; ++m)
                for (int s = 1; s < m; ++s) acc += detail::nu_term(t, j, k, m, s) + detail::nu_term(t, j, k, s, m);
            S.nu[static_cast<std::size_t>(j) * q + k] = acc;
        }
    S.nu_lower = full_nu;
    auto do_delta = [&](int j, int k, int l) {
        double acc = 0;
        for (int m = std::max(lo + 1, 2); m <= hi; ++m)
            for (int r = 1; r < m; ++r) acc += detail::delta_term(t, j, k, l, r, m - r);
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
    return S;
}

/// V_p by direct summation. nu below the diagonal comes from the nu identity.
inline PartialSums partial_sums(const Tableau& t, bool full_delta = false) {
    PartialSums S = shell_sums(t, 0, t.p, full_delta, false);
    S.fill_nu_lower();
    return S;
}

/// Blockwise a + b (tails over adjacent shells add up).
inline PartialSums add_sums(const PartialSums& a, const PartialSums& b) {
    if (a.q != b.q) throw std::domain_error("dimension mismatch");
    PartialSums s = a;
    auto add = [](std::vector<double>& x, const std::vector<double>& y) {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
    };
    add(s.z, b.z);
    add(s.u, b.u);
    add(s.lambda, b.lambda);
    add(s.mu1, b.mu1);
    add(s.mu2, b.mu2);
    add(s.nu, b.nu);
    add(s.delta, b.delta);
    s.lo = std::min(a.lo, b.lo);
    s.hi = std::max(a.hi, b.hi);
    s.nu_lower = a.nu_lower && b.nu_lower;
    s.delta_full = a.delta_full && b.delta_full;
    return s;
}

/// Blockwise a - b.
inline PartialSums sub_sums(const PartialSums& a, const PartialSums& b) {
    PartialSums nb = b;
    for (auto* v : {&nb.z, &nb.u, &nb.lambda, &nb.mu1, &nb.mu2, &nb.nu, &nb.delta})
        for (auto& e : *v) e = -e;
    PartialSums s = add_sums(a, nb);
    s.lo = b.hi;
    s.hi = a.hi;
    s.nu_lower = false;
    return s;
}

inline std::vector<double> flatten(const PartialSums& s, const IndexLayout& L) {
    if (s.q != L.q) throw std::domain_error("layout mismatch");
    const int q = s.q;
    std::vector<double> v(static_cast<std::size_t>(L.d), 0.0);
    for (int j = 0; j < q; ++j) {
        v[L.z + j] = s.z[j];
        v[L.u + j] = s.u[j];
        for (int k = j; k < q; ++k) {
            v[L.mu1 + L.upper_index(j, k)] = s.M1(j, k);
            v[L.mu2 + L.upper_index(j, k)] = s.M2(j, k);
            if (k > j) {
                v[L.lambda + L.strict_index(j, k)] = s.L(j, k);
                v[L.nu + L.strict_index(j, k)] = s.N(j, k);
            }
        }
    }
    for (std::size_t i = 0; i < L.words.size(); ++i) {
        const auto& w = L.words[i];
        v[L.delta + i] = s.D(w.j - 1, w.k - 1, w.l - 1);
    }
    return v;
}

inline std::vector<double> flatten(const PartialSums& s) { return flatten(s, layout(s.q)); }

/// Inverse of flatten; lambda, mu are extended by (anti)symmetry and nu
/// below the diagonal by the nu identity (sums from mode 1 assumed).
inline PartialSums unflatten(const std::vector<double>& v, const IndexLayout& L, int p) {
    if (static_cast<int>(v.size()) != L.d) throw std::domain_error("length mismatch");
    const int q = L.q;
    PartialSums s = PartialSums::zeros(q, 0, p);
    for (int j = 0; j < q; ++j) {
        s.z[j] = v[L.z + j];
        s.u[j] = v[L.u + j];
    }
    for (int j = 0; j < q; ++j)
        for (int k = j; k < q; ++k) {
            const double m1 = v[L.mu1 + L.upper_index(j, k)], m2 = v[L.mu2 + L.upper_index(j, k)];
            s.mu1[j * q + k] = s.mu1[k * q + j] = m1;
            s.mu2[j * q + k] = s.mu2[k * q + j] = m2;
            if (k > j) {
                const double lam = v[L.lambda + L.strict_index(j, k)];
                s.lambda[j * q + k] = lam;
                s.lambda[k * q + j] = -lam;
                s.nu[j * q + k] = v[L.nu + L.strict_index(j, k)];
            }
        }
    for (std::size_t i = 0; i < L.words.size(); ++i) {
        const auto& w = L.words[i];
        s.D(w.j - 1, w.k - 1, w.l - 1) = v[L.delta + i];
    }
    s.fill_nu_lower();
    return s;
}

}  // namespace iterint
