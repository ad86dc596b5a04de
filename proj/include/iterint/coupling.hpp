#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fft_sums.hpp"
#include "parallel.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "tail.hpp"

namespace iterint {

enum class CandidateKind { independent_tail, gaussian_matched };

inline std::string to_string(CandidateKind k) {
    return k == CandidateKind::independent_tail ? "independent-tail" : "gaussian-matched";
}

inline CandidateKind parse_candidate_kind(const std::string& s) {
    if (s == "independent-tail") return CandidateKind::independent_tail;
    if (s == "gaussian-matched") return CandidateKind::gaussian_matched;
    throw std::invalid_argument("unknown candidate kind: " + s);
}

/// How V-bar_p is generated. The independent tail matches conditional moments
/// through order 1 (m = 2), the Gaussian one through order 2 (m = 3).
struct CandidateSpec {
    CandidateKind kind = CandidateKind::independent_tail;
    int n_multiplier = 8;

    int order() const { return kind == CandidateKind::independent_tail ? 2 : 3; }

    void validate() const {
        if (kind == CandidateKind::independent_tail && n_multiplier < 2)
            throw std::domain_error("independent tail needs N-multiplier >= 2");
    }
};

struct Candidate {
    std::vector<double> v;
    bool clipped = false;  // covariance factor came from eigenvalue clipping
};

namespace detail {

/// Square-root factor of a covariance; eigenvalue clipping at 0 if the
/// Cholesky factorization fails.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& C, bool& clipped) {
    Eigen::LLT<Eigen::MatrixXd> llt(C);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
        clipped = false;
        return llt.matrixL();
    }
    clipped = true;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace detail

/// Draws candidates for a fixed (q, p). The tail runs over p < r <= N; N = 0
/// picks n_multiplier * p.
class CandidateSampler {
public:
    CandidateSampler(int q, int p, CandidateSpec spec, int N = 0) : q_(q), p_(p), spec_(spec) {
        spec_.validate();
        N_ = N > 0 ? N : spec_.n_multiplier * p;
        if (N_ <= p) throw std::domain_error("candidate tail needs N > p");
        if (spec_.kind == CandidateKind::gaussian_matched) cov_ = std::make_shared<TailCovariance>(q, p, N_);
    }

    int N() const { return N_; }

    Candidate draw(const Tableau& t, std::uint64_t seed, std::uint64_t index) const {
        if (t.q != q_ || t.p < p_) throw std::domain_error("tableau does not match the candidate setup");
        Candidate c;
        if (spec_.kind == CandidateKind::independent_tail) {
            const auto u = sample_tableau(q_, N_, seed, stream_id(role::fresh_tail, index));
            c.v = tail_flat(u, p_, N_);
            return c;
        }
        const Tableau head = t.p == p_ ? t : t.truncated(p_);
        const Eigen::MatrixXd F = detail::covariance_factor(cov_->covariance(head), c.clipped);
        const Eigen::Index d = F.rows();
        const NormalStream g(seed, stream_id(role::gaussian, index));
        Eigen::VectorXd z(d);
        for (Eigen::Index i = 0; i < d; ++i) z[i] = g.normal(0, static_cast<std::uint32_t>(i), tag::aux);
        const Eigen::VectorXd v = cov_->mean() + F * z;
        c.v.assign(v.data(), v.data() + d);
        return c;
    }

private:
    int q_, p_, N_;
    CandidateSpec spec_;
    std::shared_ptr<const TailCovariance> cov_;
};

inline Candidate sample_candidate(const Tableau& t, const CandidateSpec& spec, std::uint64_t seed,
                                  std::uint64_t index) {
    return CandidateSampler(t.q, t.p, spec).draw(t, seed, index);
}

// ---------------------------------------------------------------------------
// Wasserstein-2 between empirical samples (rows of n x d matrices)

inline constexpr int kExactW2MaxSamples = 2048;

/// Exact W2 by optimal assignment (Hungarian method with potentials, O(n^3)).
inline double wasserstein2_exact(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols()) throw std::domain_error("sample shapes differ");
    const int n = static_cast<int>(A.rows());
    if (n == 0) return 0.0;
    if (n > kExactW2MaxSamples) throw std::domain_error("exact W2 is limited to 2048 samples");

    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) cost[static_cast<std::size_t>(i) * n + j] = (A.row(i) - B.row(j)).squaredNorm();
    auto a = [&](int i, int j) { return cost[static_cast<std::size_t>(i - 1) * n + (j - 1)]; };

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a(i0, j) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0;
    for (int j = 1; j <= n; ++j) total += a(match[j], j);
    return std::sqrt(std::max(0.0, total / n));
}

struct SlicedEstimate {
    double value = 0;
    double se = 0;             // combined
    double se_projection = 0;  // spread over directions
    double se_sample = 0;      // delete-a-block jackknife over sample rows
};

/// Sliced W2: root mean over random unit directions of the squared 1-D W2 of
/// the projected samples. Directions depend only on (d, seed, k), so calls
/// with the same seed use the same directions.
inline SlicedEstimate sliced_w2(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int projections,
                                std::uint64_t seed, int blocks = 16) {
    if (A.rows() != B.rows() || A.cols() != B.cols()) throw std::domain_error("sample shapes differ");
    if (projections < 16) throw std::domain_error("sliced W2 needs at least 16 projections");
    const Eigen::Index n = A.rows();
    const int d = static_cast<int>(A.cols());
    SlicedEstimate out;
    if (n == 0) return out;
    const int nb = static_cast<int>(std::min<Eigen::Index>(blocks, n));
    std::vector<int> block(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) block[i] = static_cast<int>(i * nb / n);
    std::vector<double> bsize(nb, 0.0);
    for (int b : block) bsize[b] += 1;

    // s[k*(nb+1)]: full squared distance, then one entry per deleted block
    std::vector<double> s(static_cast<std::size_t>(projections) * (nb + 1));
    parallel_for(static_cast<std::size_t>(projections), [&](std::size_t k) {
        const auto dir = random_direction(d, seed, k);
        const Eigen::Map<const Eigen::VectorXd> th(dir.data(), d);
        const Eigen::VectorXd pa = A * th, pb = B * th;
        std::vector<Eigen::Index> ia(n), ib(n);
        std::iota(ia.begin(), ia.end(), 0);
        std::iota(ib.begin(), ib.end(), 0);
        std::sort(ia.begin(), ia.end(), [&](auto x, auto y) { return pa[x] < pa[y]; });
        std::sort(ib.begin(), ib.end(), [&](auto x, auto y) { return pb[x] < pb[y]; });
        double* row = &s[k * (nb + 1)];
        double full = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = pa[ia[i]] - pb[ib[i]];
            full += e * e;
        }
        row[0] = full / n;
        for (int b = 0; b < nb; ++b) {
            double acc = 0;
            Eigen::Index x = 0, y = 0;
            while (true) {
                while (x < n && block[ia[x]] == b) ++x;
                while (y < n && block[ib[y]] == b) ++y;
                if (x >= n || y >= n) break;
                const double e = pa[ia[x]] - pb[ib[y]];
                acc += e * e;
                ++x;
                ++y;
            }
            row[b + 1] = acc / (n - bsize[b]);
        }
    });

    double mean2 = 0;
    for (int k = 0; k < projections; ++k) mean2 += s[static_cast<std::size_t>(k) * (nb + 1)];
    mean2 /= projections;
    out.value = std::sqrt(mean2);
    if (out.value == 0) return out;

    double var2 = 0;
    for (int k = 0; k < projections; ++k) {
        const double e = s[static_cast<std::size_t>(k) * (nb + 1)] - mean2;
        var2 += e * e;
    }
    var2 /= (projections - 1.0);
    out.se_projection = std::sqrt(var2 / projections) / (2 * out.value);

    if (nb > 1) {
        std::vector<double> wb(nb, 0.0);
        for (int b = 0; b < nb; ++b) {
            double m = 0;
            for (int k = 0; k < projections; ++k) m += s[static_cast<std::size_t>(k) * (nb + 1) + b + 1];
            wb[b] = std::sqrt(m / projections);
        }
        const double wm = std::accumulate(wb.begin(), wb.end(), 0.0) / nb;
        double jv = 0;
        for (double w : wb) jv += (w - wm) * (w - wm);
        out.se_sample = std::sqrt(jv * (nb - 1.0) / nb);
    }
    out.se = std::hypot(out.se_projection, out.se_sample);
    return out;
}

// ---------------------------------------------------------------------------
// Tail moment scan

/// Per-path tail norms |V_{Np} - V_p|^2 and the first lambda entry, shared
/// across the grid (all levels come from one tableau per path).
struct TailMomentData {
    int q = 0;
    std::vector<int> grid;
    int n_multiplier = 0;
    int paths = 0;
    std::uint64_t seed = 0;
    std::vector<double> norm2;   // paths x grid, row-major
    std::vector<double> lambda;  // same shape; empty when q = 1
};

inline TailMomentData tail_moment_data(int q, const std::vector<int>& grid, int n_multiplier, int paths,
                                       std::uint64_t seed) {
    if (grid.size() < 4) throw std::domain_error("moment scan needs at least four grid points");
    if (n_multiplier < 2) throw std::domain_error("N-multiplier must be >= 2");
    if (paths < 2) throw std::domain_error("moment scan needs at least two paths");
    TailMomentData D;
    D.q = q;
    D.grid = grid;
    D.n_multiplier = n_multiplier;
    D.paths = paths;
    D.seed = seed;
    const std::size_t G = grid.size();
    const int top = n_multiplier * *std::max_element(grid.begin(), grid.end());
    const auto L = layout(q);
    D.norm2.assign(static_cast<std::size_t>(paths) * G, 0.0);
    if (q > 1) D.lambda.assign(D.norm2.size(), 0.0);
    parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
        const auto t = sample_tableau(q, top, seed, stream_id(role::moments, i));
        for (std::size_t g = 0; g < G; ++g) {
            const auto v = tail_flat(t, grid[g], n_multiplier * grid[g]);
            double n2 = 0;
            for (double e : v) n2 += e * e;
            D.norm2[i * G + g] = n2;
            if (q > 1) D.lambda[i * G + g] = v[L.lambda];
        }
    });
    return D;
}

/// E|V_{Np} - V_p|^m per grid point with its slope.
inline RateReport tail_moment_report(const TailMomentData& D, int m) {
    if (m < 1) throw std::domain_error("moment order must be positive");
    const std::size_t G = D.grid.size();
    RateReport r;
    r.metric = "tail_moment_" + std::to_string(m);
    r.estimator = "monte-carlo";
    r.seed = D.seed;
    r.samples = D.paths;
    for (std::size_t g = 0; g < G; ++g) {
        double s = 0, s2 = 0;
        for (int i = 0; i < D.paths; ++i) {
            const double x = std::pow(D.norm2[static_cast<std::size_t>(i) * G + g], 0.5 * m);
            s += x;
            s2 += x * x;
        }
        const double mean = s / D.paths;
        const double var = std::max(0.0, (s2 - D.paths * mean * mean) / (D.paths - 1.0));
        r.grid.push_back(D.grid[g]);
        r.values.push_back(mean);
        r.se.push_back(std::sqrt(var / D.paths));
    }
    r.config = {{"q", D.q}, {"m", m}, {"n_multiplier", D.n_multiplier}, {"paths", D.paths}, {"seed", D.seed}};
    r.fit();
    return r;
}

/// Var of the first lambda tail entry per grid point next to 2 sum r^-2.
struct LambdaCheck {
    std::vector<double> variance, se, analytic;
};

inline LambdaCheck tail_lambda_check(const TailMomentData& D) {
    if (D.lambda.empty()) throw std::domain_error("lambda is empty for q = 1");
    const std::size_t G = D.grid.size();
    LambdaCheck c;
    for (std::size_t g = 0; g < G; ++g) {
        // the lambda tail has mean zero, so E[x^2] is the variance
        double s2 = 0, s4 = 0;
        for (int i = 0; i < D.paths; ++i) {
            const double x = D.lambda[static_cast<std::size_t>(i) * G + g];
            s2 += x * x;
            s4 += x * x * x * x;
        }
        const double v = s2 / D.paths;
        c.variance.push_back(v);
        c.se.push_back(std::sqrt(std::max(0.0, s4 / D.paths - v * v) / D.paths));
        c.analytic.push_back(2 * inverse_square_tail(D.grid[g], D.n_multiplier * D.grid[g]));
    }
    return c;
}

inline RateReport tail_moment_scan(int q, int m, const std::vector<int>& grid, int n_multiplier, int paths,
                                   std::uint64_t seed) {
    return tail_moment_report(tail_moment_data(q, grid, n_multiplier, paths, seed), m);
}

// ---------------------------------------------------------------------------
// Coupling rate scan

/// W2 between V (truncated at p_ref) and V_p + V-bar_p for p on the grid.
///
/// Path i draws one tableau at p_ref; the reference is V_{p_ref} of that
/// tableau and every candidate reuses its first p modes. The candidate tail
/// runs up to p_ref so both sides stop at the same truncation.
inline RateReport coupling_rate_scan(int q, const std::vector<int>& grid, const CandidateSpec& spec, int p_ref,
                                     int paths, const std::string& estimator, std::uint64_t seed,
                                     int projections = 256) {
    spec.validate();
    if (grid.empty()) throw std::domain_error("empty grid");
    const int pmax = *std::max_element(grid.begin(), grid.end());
    if (p_ref < 8 * pmax) throw std::domain_error("p_ref must be at least 8 * max(grid)");
    if (estimator != "sliced" && estimator != "exact") throw std::domain_error("estimator must be sliced or exact");
    if (paths < 2) throw std::domain_error("coupling scan needs at least two paths");

    const auto L = layout(q);
    const int d = L.d;
    const std::size_t G = grid.size();
    std::vector<CandidateSampler> samplers;
    for (int p : grid) samplers.emplace_back(q, p, spec, p_ref);

    Eigen::MatrixXd ref(paths, d);
    std::vector<Eigen::MatrixXd> cand(G, Eigen::MatrixXd(paths, d));
    std::vector<char> clipped(static_cast<std::size_t>(paths) * G, 0);
    parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
        const auto t = sample_tableau(q, p_ref, seed, stream_id(role::reference, i));
        const auto vr = flatten(compute_sums(t), L);
        for (int c = 0; c < d; ++c) ref(static_cast<Eigen::Index>(i), c) = vr[c];
        // the fresh tableau is shared across levels: its V_{p_ref} - V_p is
        // an independent tail for every p
        Tableau fresh;
        std::vector<double> vf;
        if (spec.kind == CandidateKind::independent_tail) {
            fresh = sample_tableau(q, p_ref, seed, stream_id(role::fresh_tail, i));
            vf = flatten(compute_sums(fresh), L);
        }
        for (std::size_t g = 0; g < G; ++g) {
            const int p = grid[g];
            const auto head = t.truncated(p);
            auto v = flatten(compute_sums(head), L);
            if (spec.kind == CandidateKind::independent_tail) {
                const auto low = flatten(compute_sums(fresh.truncated(p)), L);
                for (int c = 0; c < d; ++c) v[c] += vf[c] - low[c];
            } else {
                const auto cd = samplers[g].draw(head, seed, i);
                clipped[i * G + g] = cd.clipped;
                for (int c = 0; c < d; ++c) v[c] += cd.v[c];
            }
            for (int c = 0; c < d; ++c) cand[g](static_cast<Eigen::Index>(i), c) = v[c];
        }
    });

    RateReport r;
    r.estimator = estimator;
    r.seed = seed;
    r.samples = paths;
    int used = paths;
    if (estimator == "sliced") {
        r.metric = "sliced_w2";
        for (std::size_t g = 0; g < G; ++g) {
            const auto e = sliced_w2(ref, cand[g], projections, seed);
            r.grid.push_back(grid[g]);
            r.values.push_back(e.value);
            r.se.push_back(e.se);
        }
    } else {
        // exact assignment on the first min(paths, 2048) rows; the standard
        // error comes from the spread over four disjoint quarters
        r.metric = "w2_exact";
        used = std::min(paths, kExactW2MaxSamples);
        const int quarter = used / 4;
        for (std::size_t g = 0; g < G; ++g) {
            const double w = wasserstein2_exact(ref.topRows(used), cand[g].topRows(used));
            double sd = 0;
            if (quarter >= 2) {
                std::vector<double> wq(4);
                parallel_for(4, [&](std::size_t k) {
                    const auto lo = static_cast<Eigen::Index>(k) * quarter;
                    wq[k] = wasserstein2_exact(ref.middleRows(lo, quarter), cand[g].middleRows(lo, quarter));
                });
                const double m = (wq[0] + wq[1] + wq[2] + wq[3]) / 4;
                for (double x : wq) sd += (x - m) * (x - m);
                sd = std::sqrt(sd / 3.0) / 2.0;
            }
            r.grid.push_back(grid[g]);
            r.values.push_back(w);
            r.se.push_back(sd);
        }
    }
    const long nclip = std::count(clipped.begin(), clipped.end(), 1);
    r.config = {{"q", q},
                {"kind", to_string(spec.kind)},
                {"matching_order", spec.order()},
                {"p_ref", p_ref},
                {"reference", "V truncated at p_ref"},
                {"candidate_tail_end", p_ref},
                {"paths", paths},
                {"samples_used", used},
                {"projections", estimator == "sliced" ? projections : 0},
                {"covariance", spec.kind == CandidateKind::gaussian_matched ? "analytic" : "none"},
                {"clipped_factorizations", nclip}};
    r.fit();
    return r;
}

}  // namespace iterint
