#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "fft_sums.hpp"
#include "lyndon.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sums.hpp"
#include "tail.hpp"

namespace iterint {

/// Frequency vector omega = (alpha, beta1, beta2, gamma, a, b, rho).
///
/// Stored extended to full q-by-q (q^3 for rho) with the usual rules:
/// alpha antisymmetric, beta symmetric, gamma zero for j >= k, rho zero off
/// the Lyndon words. The flat form uses the layout of V_p, so that
/// Phi_p(v; omega) = <flat(omega), flatten(V_p(v))>.
struct Omega {
    int q = 0;
    std::vector<double> alpha, beta1, beta2, gamma, a, b, rho;

    static Omega zeros(int q) {
        Omega w;
        w.q = q;
        w.alpha.assign(static_cast<std::size_t>(q) * q, 0.0);
        w.beta1 = w.beta2 = w.gamma = w.alpha;
        w.a.assign(q, 0.0);
        w.b.assign(q, 0.0);
        w.rho.assign(static_cast<std::size_t>(q) * q * q, 0.0);
        return w;
    }

    static Omega from_flat(const std::vector<double>& v, const IndexLayout& L) {
        if (static_cast<int>(v.size()) != L.d) throw std::domain_error("omega length mismatch");
        const int q = L.q;
        Omega w = zeros(q);
        for (int j = 0; j < q; ++j) {
            w.a[j] = v[L.z + j];
            w.b[j] = v[L.u + j];
            for (int k = j; k < q; ++k) {
                w.beta1[j * q + k] = w.beta1[k * q + j] = v[L.mu1 + L.upper_index(j, k)];
                w.beta2[j * q + k] = w.beta2[k * q + j] = v[L.mu2 + L.upper_index(j, k)];
                if (k > j) {
                    const double al = v[L.lambda + L.strict_index(j, k)];
                    w.alpha[j * q + k] = al;
                    w.alpha[k * q + j] = -al;
                    w.gamma[j * q + k] = v[L.nu + L.strict_index(j, k)];
                }
            }
        }
        for (std::size_t i = 0; i < L.words.size(); ++i) {
            const auto& u = L.words[i];
            w.rho[((u.j - 1) * q + (u.k - 1)) * q + (u.l - 1)] = v[L.delta + i];
        }
        return w;
    }

    std::vector<double> flat(const IndexLayout& L) const {
        std::vector<double> v(static_cast<std::size_t>(L.d), 0.0);
        for (int j = 0; j < q; ++j) {
            v[L.z + j] = a[j];
            v[L.u + j] = b[j];
            for (int k = j; k < q; ++k) {
                v[L.mu1 + L.upper_index(j, k)] = beta1[j * q + k];
                v[L.mu2 + L.upper_index(j, k)] = beta2[j * q + k];
                if (k > j) {
                    v[L.lambda + L.strict_index(j, k)] = alpha[j * q + k];
                    v[L.nu + L.strict_index(j, k)] = gamma[j * q + k];
                }
            }
        }
        for (std::size_t i = 0; i < L.words.size(); ++i) {
            const auto& u = L.words[i];
            v[L.delta + i] = rho[((u.j - 1) * q + (u.k - 1)) * q + (u.l - 1)];
        }
        return v;
    }
};

/// Point v in R^{2qp}: x_{j,1..p} for j = 1..q, then y in the same order.
/// This is the row/column order of the Hessian blocks.
inline std::vector<double> point_from_tableau(const Tableau& t) {
    std::vector<double> v(t.x);
    v.insert(v.end(), t.y.begin(), t.y.end());
    return v;
}

inline Tableau tableau_from_point(const std::vector<double>& v, int q, int p) {
    if (v.size() != static_cast<std::size_t>(2 * q * p)) throw std::domain_error("point length mismatch");
    Tableau t = Tableau::zeros(q, p);
    std::copy(v.begin(), v.begin() + q * p, t.x.begin());
    std::copy(v.begin() + q * p, v.end(), t.y.begin());
    return t;
}

/// Phi_p(.; omega) as an explicit list of monomials of degree 1..3.
class PhaseFunction {
public:
    struct Monomial {
        double c;
        int n;
        int v[3];
    };

    PhaseFunction(int q, int p, const Omega& w) : q_(q), p_(p) {
        if (w.q != q) throw std::domain_error("omega dimension mismatch");
        auto X = [&](int j, int r) { return j * p + r - 1; };
        auto Y = [&](int j, int r) { return q * p + j * p + r - 1; };
        auto add1 = [&](double c, int a) {
            if (c != 0.0) terms_.push_back({c, 1, {a, 0, 0}});
        };
        auto add2 = [&](double c, int a, int b) {
            if (c != 0.0) terms_.push_back({c, 2, {a, b, 0}});
        };
        for (int j = 0; j < q; ++j)
            for (int r = 1; r <= p; ++r) {
                add1(w.a[j] / r, X(j, r));
                add1(w.b[j] / (static_cast<double>(r) * r), Y(j, r));
            }
        for (int j = 0; j < q; ++j)
            for (int k = j; k < q; ++k) {
                const double al = w.alpha[j * q + k], b1 = w.beta1[j * q + k], b2 = w.beta2[j * q + k];
                const double ga = w.gamma[j * q + k];
                for (int r = 1; r <= p; ++r) {
                    const double r2 = static_cast<double>(r) * r;
                    add2(b1 / r2, X(j, r), X(k, r));
                    add2(b2 / r2, Y(j, r), Y(k, r));
                    if (k == j) continue;
                    add2(al / r, X(j, r), Y(k, r));
                    add2(-al / r, Y(j, r), X(k, r));
                    for (int s = 1; s <= p; ++s) {
                        if (s == r) continue;
                        const double den = r2 - static_cast<double>(s) * s;
                        add2(ga * r / (s * den), X(j, r), X(k, s));
                        add2(ga / den, Y(j, r), Y(k, s));
                    }
                }
            }
        for (int j = 0; j < q; ++j)
            for (int k = 0; k < q; ++k)
                for (int l = 0; l < q; ++l) {
                    const double rho = w.rho[(j * q + k) * q + l];
                    if (rho == 0.0) continue;
                    for (int r = 1; r < p; ++r)
                        for (int s = 1; r + s <= p; ++s)
                            detail::delta_monomials(j, k, l, r, s, [&](double c, int ta, int tb, int te) {
                                auto var = [&](int type, int idx) { return (type & 1) ? Y(type >> 1, idx) : X(type >> 1, idx); };
                                terms_.push_back({rho * c, 3, {var(ta, r), var(tb, s), var(te, r + s)}});
                            });
                }
    }

    int dim() const { return 2 * q_ * p_; }
    const std::vector<Monomial>& terms() const { return terms_; }

    double value(const std::vector<double>& v) const {
        check(v);
        double acc = 0;
        for (const auto& m : terms_) {
            double t = m.c;
            for (int i = 0; i < m.n; ++i) t *= v[m.v[i]];
            acc += t;
        }
        return acc;
    }

    std::vector<double> gradient(const std::vector<double>& v) const {
        check(v);
        std::vector<double> g(v.size(), 0.0);
        for (const auto& m : terms_)
            for (int i = 0; i < m.n; ++i) {
                double t = m.c;
                for (int k = 0; k < m.n; ++k)
                    if (k != i) t *= v[m.v[k]];
                g[m.v[i]] += t;
            }
        return g;
    }

    Eigen::MatrixXd hessian(const std::vector<double>& v) const {
        check(v);
        const int n = dim();
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
        for (const auto& m : terms_)
            for (int i = 0; i < m.n; ++i)
                for (int k = 0; k < m.n; ++k) {
                    if (k == i) continue;
                    double t = m.c;
                    for (int o = 0; o < m.n; ++o)
                        if (o != i && o != k) t *= v[m.v[o]];
                    H(m.v[i], m.v[k]) += t;
                }
        return H;
    }

private:
    void check(const std::vector<double>& v) const {
        if (static_cast<int>(v.size()) != dim()) throw std::domain_error("point length mismatch");
    }

    int q_, p_;
    std::vector<Monomial> terms_;
};

inline double phase_value(const std::vector<double>& v, const Omega& w, int p) {
    return PhaseFunction(w.q, p, w).value(v);
}

inline std::vector<double> phase_gradient(const std::vector<double>& v, const Omega& w, int p) {
    return PhaseFunction(w.q, p, w).gradient(v);
}

inline Eigen::MatrixXd phase_hessian(const std::vector<double>& v, const Omega& w, int p) {
    return PhaseFunction(w.q, p, w).hessian(v);
}

// ---------------------------------------------------------------------------
// The skew matrix S_n with entries 1/(s^2 - r^2) and thorn_n = det S_n.

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

inline std::vector<std::vector<cpp_rational>> skew_matrix(int n) {
    if (n < 1) throw std::domain_error("n must be positive");
    std::vector<std::vector<cpp_rational>> S(n, std::vector<cpp_rational>(n, cpp_rational(0)));
    for (int r = 1; r <= n; ++r)
        for (int s = 1; s <= n; ++s)
            if (r != s) S[r - 1][s - 1] = cpp_rational(1) / (s * s - r * r);
    return S;
}

/// Pfaffian of a skew-symmetric rational matrix by skew Gaussian elimination.
inline cpp_rational pfaffian(std::vector<std::vector<cpp_rational>> A) {
    const int n = static_cast<int>(A.size());
    if (n % 2) return 0;
    cpp_rational pf = 1;
    for (int k = 0; k < n; k += 2) {
        int piv = -1;
        for (int i = k + 1; i < n; ++i)
            if (A[k][i] != 0) {
                piv = i;
                break;
            }
        if (piv < 0) return 0;
        if (piv != k + 1) {
            // swap rows and columns k+1 and piv; flips the sign
            std::swap(A[k + 1], A[piv]);
            for (auto& row : A) std::swap(row[k + 1], row[piv]);
            pf = -pf;
        }
        const cpp_rational a = A[k][k + 1];
        pf *= a;
        // congruence that clears rows/cols k, k+1 beyond k+1:
        // A_im += a (f_m g_i - g_m f_i), f_i = A_ki / a, g_i = A_{k+1,i} / a
        for (int i = k + 2; i < n; ++i) {
            const cpp_rational f = A[k][i] / a;
            const cpp_rational g = A[k + 1][i] / a;
            if (f == 0 && g == 0) continue;
            for (int m = i + 1; m < n; ++m) A[i][m] += -f * A[k + 1][m] + g * A[k][m];
        }
        for (int i = k + 2; i < n; ++i)
            for (int m = i + 1; m < n; ++m) A[m][i] = -A[i][m];
    }
    return pf;
}

/// Determinant by Bareiss fraction-free elimination on an integer matrix.
inline cpp_int bareiss_determinant(std::vector<std::vector<cpp_int>> M) {
    const int n = static_cast<int>(M.size());
    cpp_int prev = 1;
    int sign = 1;
    for (int k = 0; k < n - 1; ++k) {
        if (M[k][k] == 0) {
            int sw = -1;
            for (int i = k + 1; i < n; ++i)
                if (M[i][k] != 0) {
                    sw = i;
                    break;
                }
            if (sw < 0) return 0;
            std::swap(M[k], M[sw]);
            sign = -sign;
        }
        for (int i = k + 1; i < n; ++i) {
            for (int j = k + 1; j < n; ++j) M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) / prev;
            M[i][k] = 0;
        }
        prev = M[k][k];
    }
    return sign * M[n - 1][n - 1];
}

/// det S_n by clearing denominators (row r times lcm of its denominators)
/// and running Bareiss on the integer matrix.
inline cpp_rational thorn_bareiss(int n) {
    const auto S = skew_matrix(n);
    std::vector<std::vector<cpp_int>> M(n, std::vector<cpp_int>(n));
    cpp_int scale = 1;
    for (int r = 0; r < n; ++r) {
        cpp_int l = 1;
        for (int s = 0; s < n; ++s)
            if (s != r) {
                const cpp_int d = boost::multiprecision::denominator(S[r][s]);
                l = l / boost::multiprecision::gcd(l, d) * d;
            }
        for (int s = 0; s < n; ++s) M[r][s] = boost::multiprecision::numerator(S[r][s]) * (l / boost::multiprecision::denominator(S[r][s]));
        scale *= l;
    }
    return cpp_rational(bareiss_determinant(std::move(M)), scale);
}

inline cpp_rational thorn_pfaffian(int n) {
    if (n % 2) return 0;
    const auto pf = pfaffian(skew_matrix(n));
    return pf * pf;
}

/// thorn_n = det S_n; Pfaffian squared up to n = 24, Bareiss above.
inline cpp_rational thorn(int n) {
    if (n < 1) throw std::domain_error("n must be positive");
    if (n % 2) return 0;
    return n <= 24 ? thorn_pfaffian(n) : thorn_bareiss(n);
}

/// log|x| for a nonzero rational without converting the parts to double.
inline double log_abs(const cpp_rational& x) {
    auto log_int = [](cpp_int v) {
        if (v < 0) v = -v;
        const unsigned bits = boost::multiprecision::msb(v) + 1;
        const unsigned shift = bits > 60 ? bits - 60 : 0;
        const double lead = static_cast<double>(static_cast<std::uint64_t>(v >> shift));
        return std::log(lead) + shift * std::log(2.0);
    };
    if (x == 0) throw std::domain_error("log of zero");
    return log_int(boost::multiprecision::numerator(x)) - log_int(boost::multiprecision::denominator(x));
}

// ---------------------------------------------------------------------------
// Monte Carlo characteristic function of V_p.

struct CharfnEstimate {
    std::complex<double> value;
    double se = 0;          // standard error of the complex mean (|.| of the error)
    double modulus = 0;
    double modulus_se = 0;  // jackknife over blocks
};

/// psi_p(xi) = E exp(i <xi, V_p>) for several frequencies sharing one sample.
inline std::vector<CharfnEstimate> charfn_estimate(int q, int p, const std::vector<std::vector<double>>& xis,
                                                   int samples, std::uint64_t seed, int blocks = 100) {
    if (samples < 1000) throw std::domain_error("need at least 1000 samples");
    const auto L = layout(q);
    for (const auto& xi : xis)
        if (static_cast<int>(xi.size()) != L.d) throw std::domain_error("frequency length mismatch");
    const std::size_t nx = xis.size();
    blocks = std::min(blocks, samples);
    // per block sums of cos and sin
    std::vector<double> re(nx * blocks, 0.0), im(nx * blocks, 0.0);
    std::vector<int> count(blocks, 0);
    parallel_for(static_cast<std::size_t>(blocks), [&](std::size_t b) {
        const int lo = static_cast<int>(static_cast<long long>(samples) * b / blocks);
        const int hi = static_cast<int>(static_cast<long long>(samples) * (b + 1) / blocks);
        count[b] = hi - lo;
        for (int i = lo; i < hi; ++i) {
            const auto t = sample_tableau(q, p, seed, stream_id(role::charfn, static_cast<std::uint64_t>(i)));
            const auto v = flatten(compute_sums(t), L);
            for (std::size_t x = 0; x < nx; ++x) {
                double ph = 0;
                for (int c = 0; c < L.d; ++c) ph += xis[x][c] * v[c];
                re[x * blocks + b] += std::cos(ph);
                im[x * blocks + b] += std::sin(ph);
            }
        }
    });
    std::vector<CharfnEstimate> out(nx);
    for (std::size_t x = 0; x < nx; ++x) {
        double sr = 0, si = 0;
        for (int b = 0; b < blocks; ++b) {
            sr += re[x * blocks + b];
            si += im[x * blocks + b];
        }
        auto& o = out[x];
        o.value = {sr / samples, si / samples};
        o.modulus = std::abs(o.value);
        // delete-one-block jackknife for the mean and its modulus
        double vr = 0, vi = 0, vm = 0, mm = 0;
        std::vector<std::complex<double>> loo(blocks);
        for (int b = 0; b < blocks; ++b) {
            const double n = samples - count[b];
            loo[b] = {(sr - re[x * blocks + b]) / n, (si - im[x * blocks + b]) / n};
            mm += std::abs(loo[b]);
        }
        mm /= blocks;
        for (int b = 0; b < blocks; ++b) {
            vr += std::pow(loo[b].real() - o.value.real(), 2);
            vi += std::pow(loo[b].imag() - o.value.imag(), 2);
            vm += std::pow(std::abs(loo[b]) - mm, 2);
        }
        const double f = (blocks - 1.0) / blocks;
        o.se = std::sqrt(f * (vr + vi));
        o.modulus_se = std::sqrt(f * vm);
    }
    return out;
}

inline CharfnEstimate charfn_estimate(int q, int p, const std::vector<double>& xi, int samples, std::uint64_t seed) {
    bool zero = std::all_of(xi.begin(), xi.end(), [](double v) { return v == 0.0; });
    if (zero) {
        if (samples < 1000) throw std::domain_error("need at least 1000 samples");
        return {{1.0, 0.0}, 0.0, 1.0, 0.0};
    }
    return charfn_estimate(q, p, std::vector<std::vector<double>>{xi}, samples, seed).front();
}

}  // namespace iterint
