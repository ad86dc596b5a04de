#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "fft_sums.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "sums.hpp"

namespace iterint {

/// Tail V_N - V_p; same blocks as PartialSums with lo = p, hi = N.
using TailSums = PartialSums;

/// Tail over modes p < index <= N by direct summation in shell order.
/// The extension modes come from the tableau's own stream.
inline TailSums tail_sample(const Tableau& t, int N) {
    if (N <= t.p) throw std::domain_error("tail needs N > p");
    return shell_sums(extend_tableau(t, N), t.p, N);
}

/// Flattened V_b - V_a for a tableau holding at least b modes.
inline std::vector<double> tail_flat(const Tableau& t, int a, int b) {
    const auto L = layout(t.q);
    auto vb = flatten(compute_sums(b == t.p ? t : t.truncated(b)), L);
    const auto va = flatten(compute_sums(t.truncated(a)), L);
    for (std::size_t i = 0; i < vb.size(); ++i) vb[i] -= va[i];
    return vb;
}

/// Sum of r^-2 over p < r <= N; N <= 0 means the infinite series.
inline double inverse_square_tail(int p, int N) {
    if (N <= 0) {
        double head = 0;
        for (int r = p; r >= 1; --r) head += 1.0 / (static_cast<double>(r) * r);
        return std::numbers::pi * std::numbers::pi / 6.0 - head;
    }
    double acc = 0;
    for (int r = N; r > p; --r) acc += 1.0 / (static_cast<double>(r) * r);
    return acc;
}

/// E[V_N - V_p | v_p]: zero except the mu1/mu2 diagonals. N <= 0 is the
/// N -> infinity limit.
inline std::vector<double> conditional_tail_mean(int q, int p, int N = 0) {
    const auto L = layout(q);
    std::vector<double> m(static_cast<std::size_t>(L.d), 0.0);
    const double s = inverse_square_tail(p, N);
    for (int j = 0; j < q; ++j) {
        m[L.mu1 + L.upper_index(j, j)] = s;
        m[L.mu2 + L.upper_index(j, j)] = s;
    }
    return m;
}

inline std::vector<double> conditional_tail_mean(const Tableau& t, int N = 0) {
    return conditional_tail_mean(t.q, t.p, N);
}

namespace detail {

/// Real monomials of the delta summand for (j,k,l) at (r,s), m = r+s.
/// emit(c, a, b, e): c * v(a@r) v(b@s) v(e@m), variable type = 2*letter + part
/// with part 0 for x and 1 for y.
template <class F>
void delta_monomials(int j, int k, int l, int r, int s, F&& emit) {
    const int m = r + s;
    const double w[3] = {-1.0 / (static_cast<double>(r) * m), 1.0 / (static_cast<double>(r) * s),
                         -1.0 / (static_cast<double>(s) * m)};
    const int A[3] = {j, j, k}, B[3] = {k, l, l}, C[3] = {l, k, j};
    for (int b = 0; b < 3; ++b) {
        // Im(za zb conj zc) = xa yb xc + ya xb xc - xa xb yc + ya yb yc
        const int xa = 2 * A[b], xb = 2 * B[b], xc = 2 * C[b];
        emit(w[b], xa, xb + 1, xc);
        emit(w[b], xa + 1, xb, xc);
        emit(-w[b], xa, xb, xc + 1);
        emit(w[b], xa + 1, xb + 1, xc + 1);
    }
}

inline double var_value(const Tableau& t, int type, int r) {
    return (type & 1) ? t.Y(type >> 1, r) : t.X(type >> 1, r);
}

}  // namespace detail

/// Conditional covariance Cov(V_N - V_p | v_p) in closed form.
///
/// Given the retained modes (index <= p) the tail is a polynomial of degree
/// <= 3 in the fresh modes, so its covariance splits over Wiener chaos:
///   chaos 1: z, u (constant), nu with one retained mode, delta with two;
///   chaos 2: lambda, mu, nu with both modes fresh (constant), delta with
///            one retained mode (quadratic form in the retained values);
///   chaos 3: delta with all modes fresh (constant).
/// Everything that does not depend on v_p is precomputed here.
class TailCovariance {
public:
    TailCovariance(int q, int p, int N) : q_(q), p_(p), N_(N), L_(layout(q)) {
        if (N <= p) throw std::domain_error("tail covariance needs N > p");
        T_ = 2 * q;
        nf_ = T_ * (N - p);
        for (const auto& w : L_.words) words_.push_back({w.j - 1, w.k - 1, w.l - 1});
        nd_ = static_cast<int>(words_.size());
        nn_ = IndexLayout::strict(q);
        // chaos-1 columns: z (q), u (q), nu (nn), delta (nd)
        ncol_ = 2 * q + nn_ + nd_;
        const1_ = Eigen::MatrixXd::Zero(nf_, ncol_);
        diag2_ = Eigen::VectorXd::Zero(L_.d);
        chaos3_ = Eigen::MatrixXd::Zero(nd_, nd_);
        build_linear();
        build_quadratic();
        build_cubic();
    }

    int q() const { return q_; }
    int p() const { return p_; }
    int N() const { return N_; }
    int d() const { return L_.d; }

    Eigen::VectorXd mean() const {
        const auto m = conditional_tail_mean(q_, p_, N_);
        return Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    }

    Eigen::MatrixXd covariance(const Tableau& t) const {
        if (t.q != q_ || t.p < p_) throw std::domain_error("tableau does not match the tail setup");
        const int q = q_, p = p_, N = N_;
        Eigen::MatrixXd lin = const1_;

        // nu with exactly one retained mode
        for (int j = 0; j < q; ++j)
            for (int k = j + 1; k < q; ++k) {
                const int col = 2 * q + L_.strict_index(j, k);
                for (int a = 1; a <= p; ++a) {
                    const double xj = t.X(j, a), yj = t.Y(j, a), xk = t.X(k, a), yk = t.Y(k, a);
                    for (int b = p + 1; b <= N; ++b) {
                        const double den = 1.0 / (static_cast<double>(a) * a - static_cast<double>(b) * b);
                        // r = a retained, s = b fresh
                        lin(fresh(2 * k, b), col) += static_cast<double>(a) / b * xj * den;
                        lin(fresh(2 * k + 1, b), col) += yj * den;
                        // r = b fresh, s = a retained
                        lin(fresh(2 * j, b), col) -= static_cast<double>(b) / a * xk * den;
                        lin(fresh(2 * j + 1, b), col) -= yk * den;
                    }
                }
            }
        // delta with both r, s retained and r+s fresh
        for (int c = 0; c < nd_; ++c) {
            const auto [j, k, l] = words_[c];
            const int col = 2 * q + nn_ + c;
            for (int r = 1; r <= p; ++r)
                for (int s = std::max(1, p + 1 - r); s <= p && r + s <= N; ++s)
                    detail::delta_monomials(j, k, l, r, s, [&](double w, int a, int b, int e) {
                        lin(fresh(e, r + s), col) +=
                            w * detail::var_value(t, a, r) * detail::var_value(t, b, s);
                    });
        }

        const Eigen::MatrixXd g1 = lin.transpose() * lin;
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(L_.d, L_.d);
        std::vector<int> pos(static_cast<std::size_t>(ncol_));
        for (int j = 0; j < q; ++j) {
            pos[j] = L_.z + j;
            pos[q + j] = L_.u + j;
        }
        for (int i = 0; i < nn_; ++i) pos[2 * q + i] = L_.nu + i;
        for (int c = 0; c < nd_; ++c) pos[2 * q + nn_ + c] = L_.delta + c;
        for (int a = 0; a < ncol_; ++a)
            for (int b = 0; b < ncol_; ++b) C(pos[a], pos[b]) += g1(a, b);

        C.diagonal() += diag2_;
        C.block(L_.delta, L_.delta, nd_, nd_) += chaos3_;

        // delta with one retained mode: quadratic form per retained index
        for (int r0 = 1; r0 <= p; ++r0) {
            if (gram_[r0 - 1].size() == 0) continue;
            Eigen::VectorXd vals(T_);
            for (int a = 0; a < T_; ++a) vals[a] = detail::var_value(t, a, r0);
            const Eigen::MatrixXd& G = gram_[r0 - 1];
            for (int c = 0; c < nd_; ++c)
                for (int c2 = 0; c2 < nd_; ++c2)
                    C(L_.delta + c, L_.delta + c2) +=
                        vals.dot(G.block(c * T_, c2 * T_, T_, T_) * vals);
            const Eigen::MatrixXd& X = cross_[r0 - 1];
            for (int n = 0; n < nn_; ++n)
                for (int c = 0; c < nd_; ++c) {
                    const double e = (X.block(n, c * T_, 1, T_) * vals)(0);
                    C(L_.nu + n, L_.delta + c) += e;
                    C(L_.delta + c, L_.nu + n) += e;
                }
        }
        return C;
    }

private:
    int fresh(int type, int r) const { return (r - p_ - 1) * T_ + type; }

    void build_linear() {
        for (int r = p_ + 1; r <= N_; ++r) {
            const double ir = 1.0 / r;
            for (int j = 0; j < q_; ++j) {
                const1_(fresh(2 * j, r), j) = ir;
                const1_(fresh(2 * j + 1, r), q_ + j) = ir * ir;
            }
        }
    }

    void build_quadratic() {
        const int q = q_, p = p_, N = N_;
        double s2 = 0, s4 = 0;
        for (int r = N; r > p; --r) {
            const double r2 = static_cast<double>(r) * r;
            s2 += 1 / r2;
            s4 += 1 / (r2 * r2);
        }
        for (int j = 0; j < q; ++j)
            for (int k = j; k < q; ++k) {
                const double m = (j == k ? 2.0 : 1.0) * s4;
                diag2_[L_.mu1 + L_.upper_index(j, k)] = m;
                diag2_[L_.mu2 + L_.upper_index(j, k)] = m;
                if (k > j) diag2_[L_.lambda + L_.strict_index(j, k)] = 2 * s2;
            }
        double vnu = 0;
        for (int r = p + 1; r <= N; ++r)
            for (int s = p + 1; s <= N; ++s) {
                if (r == s) continue;
                const double den = static_cast<double>(r) * r - static_cast<double>(s) * s;
                const double ratio = static_cast<double>(r) / s;
                vnu += (ratio * ratio + 1) / (den * den);
            }
        for (int i = 0; i < nn_; ++i) diag2_[L_.nu + i] = vnu;

        // Delta with one retained index r0 pairs fresh modes (i, i + r0).
        gram_.assign(static_cast<std::size_t>(p), Eigen::MatrixXd());
        cross_.assign(static_cast<std::size_t>(p), Eigen::MatrixXd());
        if (nd_ == 0) return;
        const int T = T_, rows = T * T, cols = nd_ * T;
        std::vector<int> r0s;
        for (int r0 = 1; r0 <= p && p + 1 + r0 <= N; ++r0) r0s.push_back(r0);
        parallel_for(r0s.size(), [&](std::size_t idx) {
            const int r0 = r0s[idx];
            Eigen::MatrixXd G = Eigen::MatrixXd::Zero(cols, cols);
            Eigen::MatrixXd X = Eigen::MatrixXd::Zero(nn_, cols);
            Eigen::MatrixXd K(rows, cols), Kn(rows, std::max(nn_, 1));
            for (int i = p + 1; i + r0 <= N; ++i) {
                K.setZero();
                // row = a * T + b: a fresh at i, b fresh at i + r0; col = c * T + v, v retained at r0
                for (int c = 0; c < nd_; ++c) {
                    const auto [j, k, l] = words_[c];
                    detail::delta_monomials(j, k, l, r0, i, [&](double w, int ra, int fb, int fe) {
                        K(fb * T + fe, c * T + ra) += w;
                    });
                    detail::delta_monomials(j, k, l, i, r0, [&](double w, int fa, int rb, int fe) {
                        K(fa * T + fe, c * T + rb) += w;
                    });
                }
                G.noalias() += K.transpose() * K;
                if (nn_ > 0) {
                    Kn.setZero();
                    const int s = i + r0;
                    const double den1 = static_cast<double>(i) * i - static_cast<double>(s) * s;
                    for (int j = 0; j < q; ++j)
                        for (int k = j + 1; k < q; ++k) {
                            const int n = L_.strict_index(j, k);
                            // (r, s) = (i, i + r0)
                            Kn((2 * j) * T + 2 * k, n) += static_cast<double>(i) / s / den1;
                            Kn((2 * j + 1) * T + 2 * k + 1, n) += 1.0 / den1;
                            // (r, s) = (i + r0, i)
                            Kn((2 * k) * T + 2 * j, n) += static_cast<double>(s) / i / (-den1);
                            Kn((2 * k + 1) * T + 2 * j + 1, n) += 1.0 / (-den1);
                        }
                    X.noalias() += Kn.transpose() * K;
                }
            }
            gram_[r0 - 1] = std::move(G);
            cross_[r0 - 1] = std::move(X);
        });
    }

    void build_cubic() {
        if (nd_ == 0) return;
        const int T = T_, p = p_, N = N_;
        const int rows = T * T * T;
        std::vector<int> rs;
        for (int r = p + 1; 2 * r <= N; ++r) rs.push_back(r);
        std::vector<Eigen::MatrixXd> part(rs.size());
        struct Entry {
            int row, col;
            double value;
        };
        std::vector<std::vector<Entry>> ones(rs.size());
        parallel_for(rs.size(), [&](std::size_t idx) {
            const int r = rs[idx];
            Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(nd_, nd_);
            Eigen::MatrixXd Tm(rows, nd_);
            for (int s = r; r + s <= N; ++s) {
                Tm.setZero();
                // row = (a * T + b) * T + e: a at r, b at s, e at r + s
                for (int c = 0; c < nd_; ++c) {
                    const auto [j, k, l] = words_[c];
                    detail::delta_monomials(j, k, l, r, s, [&](double w, int a, int b, int e) {
                        Tm((a * T + b) * T + e, c) += w;
                    });
                    if (s != r)
                        detail::delta_monomials(j, k, l, s, r, [&](double w, int a, int b, int e) {
                            Tm((b * T + a) * T + e, c) += w;
                        });
                }
                if (s != r) {
                    acc.noalias() += Tm.transpose() * Tm;
                    continue;
                }
                // both first factors at mode r: fold the unordered pair, a^2 e
                // splits into H2(a) e (norm 2) plus e (first chaos)
                for (int a = 0; a < T; ++a)
                    for (int b = a; b < T; ++b)
                        for (int e = 0; e < T; ++e) {
                            Eigen::RowVectorXd u = Tm.row((a * T + b) * T + e);
                            if (b != a) {
                                u += Tm.row((b * T + a) * T + e);
                                acc.noalias() += u.transpose() * u;
                            } else {
                                acc.noalias() += 2.0 * u.transpose() * u;
                                for (int c = 0; c < nd_; ++c)
                                    if (u[c] != 0.0)
                                        ones[idx].push_back({fresh(e, 2 * r), 2 * q_ + nn_ + c, u[c]});
                            }
                        }
            }
            part[idx] = std::move(acc);
        });
        for (std::size_t i = 0; i < rs.size(); ++i) {
            chaos3_ += part[i];
            for (const auto& o : ones[i]) const1_(o.row, o.col) += o.value;
        }
    }

    int q_, p_, N_;
    IndexLayout L_;
    int T_ = 0, nf_ = 0, nd_ = 0, nn_ = 0, ncol_ = 0;
    std::vector<std::array<int, 3>> words_;
    Eigen::MatrixXd const1_;
    Eigen::VectorXd diag2_;
    Eigen::MatrixXd chaos3_;
    std::vector<Eigen::MatrixXd> gram_, cross_;
};

/// Covariance estimate and per-entry standard error.
struct CovarianceEstimate {
    Eigen::MatrixXd cov;
    Eigen::MatrixXd se;
};

/// Cov(V_N - V_p | v_p) by resampling the modes p+1..N with the retained
/// modes of t held fixed.
inline CovarianceEstimate conditional_tail_covariance_mc(const Tableau& t, int N, int samples, std::uint64_t seed) {
    if (N <= t.p) throw std::domain_error("inner Monte Carlo needs N > p");
    if (samples < 2) throw std::domain_error("need at least two inner samples");
    const auto L = layout(t.q);
    const int d = L.d, q = t.q, p = t.p;
    Eigen::MatrixXd V(samples, d);
    parallel_for(static_cast<std::size_t>(samples), [&](std::size_t i) {
        Tableau e = Tableau::zeros(q, N);
        e.w1 = t.w1;
        NormalStream g(seed, stream_id(role::inner, i));
        for (int j = 0; j < q; ++j) {
            for (int r = 1; r <= p; ++r) {
                e.x[static_cast<std::size_t>(j) * N + r - 1] = t.X(j, r);
                e.y[static_cast<std::size_t>(j) * N + r - 1] = t.Y(j, r);
            }
            for (int r = p + 1; r <= N; ++r) {
                const auto [a, b] = g.pair(static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(r), tag::coeff);
                e.x[static_cast<std::size_t>(j) * N + r - 1] = a;
                e.y[static_cast<std::size_t>(j) * N + r - 1] = b;
            }
        }
        const auto v = flatten(compute_sums(e), L);
        for (int c = 0; c < d; ++c) V(static_cast<Eigen::Index>(i), c) = v[c];
    });
    const Eigen::RowVectorXd mean = V.colwise().mean();
    V.rowwise() -= mean;
    CovarianceEstimate out;
    out.cov = (V.transpose() * V) / (samples - 1.0);
    out.se = Eigen::MatrixXd::Zero(d, d);
    for (int a = 0; a < d; ++a)
        for (int b = a; b < d; ++b) {
            const Eigen::ArrayXd prod = V.col(a).array() * V.col(b).array();
            const double m = prod.mean();
            const double var = (prod - m).square().sum() / (samples - 1.0);
            out.se(a, b) = out.se(b, a) = std::sqrt(var / samples);
        }
    return out;
}

}  // namespace iterint
