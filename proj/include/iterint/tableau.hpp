#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace iterint {

/// Gaussian Fourier coefficients of one Brownian path on [0,1].
///
/// x and y are q-by-p, row-major: x[j*p + r-1] is x_{j+1,r}.
struct Tableau {
    int q = 0;
    int p = 0;
    std::vector<double> w1;
    std::vector<double> x, y;
    std::uint64_t seed = 0, stream = 0;

    double X(int j, int r) const { return x[static_cast<std::size_t>(j) * p + (r - 1)]; }
    double Y(int j, int r) const { return y[static_cast<std::size_t>(j) * p + (r - 1)]; }

    static Tableau zeros(int q, int p) {
        Tableau t;
        t.q = q;
        t.p = p;
        t.w1.assign(q, 0.0);
        t.x.assign(static_cast<std::size_t>(q) * p, 0.0);
        t.y.assign(static_cast<std::size_t>(q) * p, 0.0);
        return t;
    }

    /// Same coefficients restricted to the first p' <= p modes.
    Tableau truncated(int pp) const {
        if (pp < 1 || pp > p) throw std::domain_error("truncation level out of range");
        Tableau t = zeros(q, pp);
        t.w1 = w1;
        t.seed = seed;
        t.stream = stream;
        for (int j = 0; j < q; ++j)
            for (int r = 1; r <= pp; ++r) {
                t.x[static_cast<std::size_t>(j) * pp + r - 1] = X(j, r);
                t.y[static_cast<std::size_t>(j) * pp + r - 1] = Y(j, r);
            }
        return t;
    }
};

/// Draws the tableau for (q, p, seed, stream). Mode r of letter j always
/// comes from the same counter, so a larger p only appends new modes.
inline Tableau sample_tableau(int q, int p, std::uint64_t seed, std::uint64_t stream) {
    if (q < 1 || p < 1) throw std::domain_error("q and p must be positive");
    NormalStream g(seed, stream);
    Tableau t = Tableau::zeros(q, p);
    t.seed = seed;
    t.stream = stream;
    for (int j = 0; j < q; ++j) {
        t.w1[j] = g.normal(static_cast<std::uint32_t>(j), 0, tag::w1);
        for (int r = 1; r <= p; ++r) {
            const auto [a, b] = g.pair(static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(r), tag::coeff);
            t.x[static_cast<std::size_t>(j) * p + r - 1] = a;
            t.y[static_cast<std::size_t>(j) * p + r - 1] = b;
        }
    }
    return t;
}

/// Extends a sampled tableau to N modes using the same stream.
inline Tableau extend_tableau(const Tableau& t, int N) {
    if (N <= t.p) throw std::domain_error("extension level must exceed p");
    Tableau e = Tableau::zeros(t.q, N);
    e.w1 = t.w1;
    e.seed = t.seed;
    e.stream = t.stream;
    NormalStream g(t.seed, t.stream);
    for (int j = 0; j < t.q; ++j) {
        for (int r = 1; r <= t.p; ++r) {
            e.x[static_cast<std::size_t>(j) * N + r - 1] = t.X(j, r);
            e.y[static_cast<std::size_t>(j) * N + r - 1] = t.Y(j, r);
        }
        for (int r = t.p + 1; r <= N; ++r) {
            const auto [a, b] = g.pair(static_cast<std::uint32_t>(j), static_cast<std::uint32_t>(r), tag::coeff);
            e.x[static_cast<std::size_t>(j) * N + r - 1] = a;
            e.y[static_cast<std::size_t>(j) * N + r - 1] = b;
        }
    }
    return e;
}

/// Truncated Brownian bridge at time s:
///   B_j(s) = sum_r [x_jr (cos 2 pi r s - 1) + y_jr sin 2 pi r s] / (sqrt2 pi r).
/// The -1 is the constant mode fixed so that B(0) = B(1) = 0.
inline std::vector<double> bridge_eval(const Tableau& t, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw std::domain_error("time outside [0,1]");
    const double c0 = 1.0 / (std::numbers::sqrt2 * std::numbers::pi);
    std::vector<double> out(t.q, 0.0);
    for (int r = 1; r <= t.p; ++r) {
        const double th = 2.0 * std::numbers::pi * r * s;
        const double cr = std::cos(th) - 1.0, sr = std::sin(th);
        for (int j = 0; j < t.q; ++j) out[j] += (t.X(j, r) * cr + t.Y(j, r) * sr) / r;
    }
    for (auto& v : out) v *= c0;
    return out;
}

// ---------------------------------------------------------------------------
// Tableau containers

inline constexpr char kTableauMagic[8] = {'I', 'T', 'R', 'T', 'A', 'B', '0', '1'};
inline constexpr std::uint32_t kTableauVersion = 1;

inline void save_tableau_binary(const Tableau& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    os.write(kTableauMagic, 8);
    const std::uint32_t ver = kTableauVersion;
    const std::int32_t q = t.q, p = t.p;
    os.write(reinterpret_cast<const char*>(&ver), sizeof ver);
    os.write(reinterpret_cast<const char*>(&q), sizeof q);
    os.write(reinterpret_cast<const char*>(&p), sizeof p);
    os.write(reinterpret_cast<const char*>(&t.seed), sizeof t.seed);
    os.write(reinterpret_cast<const char*>(&t.stream), sizeof t.stream);
    auto put = [&](const std::vector<double>& v) {
        os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    put(t.w1);
    put(t.x);
    put(t.y);
}

inline Tableau load_tableau_binary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (std::memcmp(magic, kTableauMagic, 8) != 0) throw std::runtime_error("not a tableau file");
    std::uint32_t ver = 0;
    std::int32_t q = 0, p = 0;
    is.read(reinterpret_cast<char*>(&ver), sizeof ver);
    if (ver != kTableauVersion) throw std::runtime_error("unsupported tableau version");
    is.read(reinterpret_cast<char*>(&q), sizeof q);
    is.read(reinterpret_cast<char*>(&p), sizeof p);
    if (q < 1 || p < 1) throw std::runtime_error("corrupt tableau header");
    Tableau t = Tableau::zeros(q, p);
    is.read(reinterpret_cast<char*>(&t.seed), sizeof t.seed);
    is.read(reinterpret_cast<char*>(&t.stream), sizeof t.stream);
    auto get = [&](std::vector<double>& v) {
        is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    get(t.w1);
    get(t.x);
    get(t.y);
    if (!is) throw std::runtime_error("truncated tableau file");
    return t;
}

/// CSV form: a header comment, then rows "entity,j,r,value" (1-based).
inline std::string tableau_csv(const Tableau& t) {
    std::ostringstream os;
    os << "# format=iterint-tableau/1 q=" << t.q << " p=" << t.p << " seed=" << t.seed << " stream=" << t.stream
       << "\n";
    os << "entity,j,r,value\n" << std::setprecision(17);
    for (int j = 0; j < t.q; ++j) os << "w1," << j + 1 << ",0," << t.w1[j] << "\n";
    for (int j = 0; j < t.q; ++j)
        for (int r = 1; r <= t.p; ++r) os << "x," << j + 1 << "," << r << "," << t.X(j, r) << "\n";
    for (int j = 0; j < t.q; ++j)
        for (int r = 1; r <= t.p; ++r) os << "y," << j + 1 << "," << r << "," << t.Y(j, r) << "\n";
    return os.str();
}

inline Tableau parse_tableau_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    int q = 0, p = 0;
    unsigned long long seed = 0, stream = 0;
    if (std::sscanf(line.c_str(), "# format=iterint-tableau/1 q=%d p=%d seed=%llu stream=%llu", &q, &p, &seed,
                    &stream) != 4 ||
        q < 1 || p < 1)
        throw std::runtime_error("bad tableau csv header");
    Tableau t = Tableau::zeros(q, p);
    t.seed = seed;
    t.stream = stream;
    std::getline(is, line);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string ent, sj, sr, sv;
        std::getline(ls, ent, ',');
        std::getline(ls, sj, ',');
        std::getline(ls, sr, ',');
        std::getline(ls, sv, ',');
        const int j = std::stoi(sj) - 1, r = std::stoi(sr);
        const double v = std::strtod(sv.c_str(), nullptr);
        if (j < 0 || j >= q) throw std::runtime_error("bad row");
        if (ent == "w1") t.w1[j] = v;
        else if (r < 1 || r > p) throw std::runtime_error("bad row");
        else if (ent == "x") t.x[static_cast<std::size_t>(j) * p + r - 1] = v;
        else if (ent == "y") t.y[static_cast<std::size_t>(j) * p + r - 1] = v;
        else throw std::runtime_error("bad entity " + ent);
    }
    return t;
}

}  // namespace iterint
