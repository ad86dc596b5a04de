// Batch front end: one subcommand per experiment, each writing a versioned
// JSON (or CSV) report. Exit codes: 0 ok, 1 a gate failed, 2 usage error.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <iterint/coupling.hpp>
#include <iterint/integrals.hpp>
#include <iterint/lyndon.hpp>
#include <iterint/phase.hpp>
#include <iterint/report.hpp>
#include <iterint/sde.hpp>

using namespace iterint;
using nlohmann::json;

namespace {

struct Common {
    std::uint64_t seed = 1;
    int threads = 0;
    std::string out;
    std::string format = "json";
    bool to_stdout = false;
};

struct Row {
    std::string metric;
    double grid_value;
    double estimate;
    double se;
};

std::string rows_csv(const std::vector<Row>& rows, const std::vector<Gate>& gates) {
    std::ostringstream os;
    os.precision(17);
    os << "metric,grid_value,estimate,stderr,gate,pass\n";
    for (const auto& r : rows) os << r.metric << ',' << r.grid_value << ',' << r.estimate << ',' << r.se << ",,\n";
    for (const auto& g : gates)
        os << g.name << ",," << g.value << ",,[" << g.lo << ";" << g.hi << "]," << (g.pass ? 1 : 0) << '\n';
    return os.str();
}

void emit(const Common& c, const std::string& command, const std::string& json_text, const std::string& csv_text) {
    const std::string& text = c.format == "csv" ? csv_text : json_text;
    if (c.to_stdout) {
        std::cout << text;
        std::cout.flush();
        return;
    }
    const std::string path = c.out.empty() ? command + "." + c.format : c.out;
    write_text(path, text);
    std::cerr << "report written to " << path << "\n";
}

int finish(const Common& c, const std::string& command, json report, const std::string& csv_text) {
    const auto& gates = report["gates"];
    bool ok = true;
    for (const auto& g : gates) {
        const bool pass = g["pass"].get<bool>();
        ok = ok && pass;
        std::cerr << (pass ? "PASS " : "FAIL ") << g["name"].get<std::string>() << " value=" << g["value"].dump()
                  << " window=[" << g["lo"].dump() << ", " << g["hi"].dump() << "]\n";
    }
    emit(c, command, report.dump(2) + "\n", csv_text);
    return ok ? 0 : 1;
}

json common_config(const Common& c) {
    return {{"seed", c.seed}, {"format", c.format}, {"out", c.out}};
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "Philox key");
    sub->add_option("--threads", c.threads, "worker threads (default ITERINT_THREADS or hardware)");
    sub->add_option("--out", c.out, "report path (default <command>.<format>)");
    sub->add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_flag("--stdout", c.to_stdout, "write the report to stdout instead of a file");
}

/// Optional slope window attached to a rate report.
struct SlopeGate {
    double expect = std::nan("");
    double tol = 0;
    void add(CLI::App* sub) {
        sub->add_option("--expect-slope", expect, "add a gate on the fitted slope");
        sub->add_option("--slope-tol", tol, "half-width of the slope gate");
    }
    void apply(RateReport& r) const {
        if (!std::isnan(expect)) r.gates.push_back(make_gate("slope", r.slope, expect - tol, expect + tol));
    }
};

std::vector<double> random_normals(int n, double scale, std::uint64_t seed, std::uint64_t stream) {
    NormalStream g(seed, stream);
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = scale * g.normal(0, static_cast<std::uint32_t>(i), tag::aux);
    return v;
}

// ---------------------------------------------------------------------------

int cmd_lyndon(const Common& c, int q) {
    const auto L = layout(q);
    for (const auto& w : L.words) std::cerr << w.j << w.k << w.l << "\n";
    json words = json::array();
    for (const auto& w : L.words) words.push_back(std::to_string(w.j) + std::to_string(w.k) + std::to_string(w.l));
    const double count = static_cast<double>(L.words.size());
    const double expected = (q * q * q - q) / 3.0;
    std::vector<Gate> gates{make_gate("count", count, expected, expected),
                            make_gate("dimension", L.d, expected_dimension(q), expected_dimension(q))};
    auto cfg = common_config(c);
    cfg["q"] = q;
    auto r = report_envelope("lyndon", cfg, gates);
    r["words"] = words;
    r["count"] = L.words.size();
    r["dimension"] = L.d;
    const std::vector<Row> rows{{"count", double(q), count, 0}, {"dimension", double(q), double(L.d), 0}};
    return finish(c, "lyndon", r, rows_csv(rows, gates));
}

int cmd_sample(const Common& c, int q, int p, int paths, double h, const std::string& convention) {
    if (q < 1 || p < 1 || paths < 1) throw std::domain_error("q, p and paths must be positive");
    if (convention != "stratonovich" && convention != "ito") throw std::domain_error("unknown convention");
    std::vector<IntegralSet> sets(paths);
    parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
        auto s = integral_set(sample_tableau(q, p, c.seed, i));
        if (h != 1.0) s = scale_to_interval(s, h);
        if (convention == "ito") s = stratonovich_to_ito(s);
        sets[i] = std::move(s);
    });
    auto cfg = common_config(c);
    cfg.update({{"q", q}, {"p", p}, {"paths", paths}, {"h", h}, {"convention", convention}});
    auto r = report_envelope("sample", cfg, {});
    json arr = json::array();
    std::ostringstream csv;
    csv << "path_id,h,entity,indices,value\n";
    for (int i = 0; i < paths; ++i) {
        const auto& s = sets[i];
        arr.push_back({{"dw", s.dw}, {"iw", s.iw}, {"i2", s.i2}, {"i3", s.i3}, {"h", s.h}});
        write_integral_csv(csv, i, s);
    }
    r["paths"] = arr;
    std::cerr << "sampled " << paths << " integral sets (q=" << q << ", p=" << p << ")\n";
    return finish(c, "sample", r, csv.str());
}

int cmd_identities(const Common& c, int q, int p, int paths) {
    if (q < 1 || p < 1 || paths < 1) throw std::domain_error("q, p and paths must be positive");
    std::vector<double> nu_res(paths), sh2(paths), sh3(paths);
    parallel_for(static_cast<std::size_t>(paths), [&](std::size_t i) {
        const auto t = sample_tableau(q, p, c.seed, i);
        // nu summed independently in both orders, not reconstructed
        const auto s = shell_sums(t, 0, p, true, true);
        double a = 0;
        for (int j = 0; j < q; ++j)
            for (int k = 0; k < q; ++k) {
                const double lhs = s.N(j, k) + s.N(k, j), rhs = s.z[j] * s.z[k] - s.M1(j, k);
                a = std::max(a, std::abs(lhs - rhs) / (1 + std::abs(s.z[j] * s.z[k])));
            }
        nu_res[i] = a;
        const auto I = integral_set(t.w1, s);
        double b = 0, e = 0;
        for (int j = 0; j < q; ++j)
            for (int k = 0; k < q; ++k) {
                const double w = t.w1[j] * t.w1[k];
                b = std::max(b, std::abs(I.I2(j, k) + I.I2(k, j) - w) / (1 + std::abs(w)));
                for (int l = 0; l < q; ++l) {
                    // I_j I_kl = I_jkl + I_kjl + I_klj
                    const double lhs = t.w1[j] * I.I2(k, l);
                    const double rhs = I.I3(j, k, l) + I.I3(k, j, l) + I.I3(k, l, j);
                    e = std::max(e, std::abs(lhs - rhs) / (1 + std::abs(lhs)));
                }
            }
        sh2[i] = b;
        sh3[i] = e;
    });
    auto mx = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
    std::vector<Gate> gates{make_gate("nu_identity", mx(nu_res), 0, 1e-10),
                            make_gate("shuffle_level2", mx(sh2), 0, 1e-10),
                            make_gate("shuffle_level3", mx(sh3), 0, 1e-10)};
    auto cfg = common_config(c);
    cfg.update({{"q", q}, {"p", p}, {"paths", paths}});
    auto r = report_envelope("identities", cfg, gates);
    r["max_residual"] = {{"nu_identity", mx(nu_res)}, {"shuffle_level2", mx(sh2)}, {"shuffle_level3", mx(sh3)}};
    const std::vector<Row> rows{{"nu_identity", double(p), mx(nu_res), 0},
                                {"shuffle_level2", double(p), mx(sh2), 0},
                                {"shuffle_level3", double(p), mx(sh3), 0}};
    return finish(c, "identities", r, rows_csv(rows, gates));
}

int cmd_moments(const Common& c, int q, int m, const std::vector<int>& grid, int nmult, int paths,
                bool check_lambda, const SlopeGate& sg) {
    const auto D = tail_moment_data(q, grid, nmult, paths, c.seed);
    auto rep = tail_moment_report(D, m);
    rep.config.update(common_config(c));
    sg.apply(rep);
    auto j = to_json(rep, "moments");
    if (check_lambda) {
        const auto lc = tail_lambda_check(D);
        json lam = json::array();
        for (std::size_t g = 0; g < grid.size(); ++g) {
            lam.push_back({{"p", grid[g]}, {"variance", lc.variance[g]}, {"stderr", lc.se[g]}, {"analytic", lc.analytic[g]}});
            const Gate gt = make_gate("lambda_variance_p" + std::to_string(grid[g]),
                                      std::abs(lc.variance[g] - lc.analytic[g]) / lc.se[g], 0, 3);
            rep.gates.push_back(gt);
            j["gates"].push_back(gate_json(gt));
        }
        j["lambda_check"] = lam;
    }
    std::cerr << "slope " << rep.slope << " +- " << rep.slope_se << "\n";
    return finish(c, "moments", j, to_csv(rep));
}

int cmd_phase(const Common& c, int q, int p, int points) {
    if (points < 1) throw std::domain_error("points must be positive");
    const auto L = layout(q);
    double gerr = 0, herr = 0, ierr = 0;
    for (int i = 0; i < points; ++i) {
        const auto w = Omega::from_flat(random_normals(L.d, 1.0, c.seed, stream_id(1, i)), L);
        const PhaseFunction f(q, p, w);
        const auto v = random_normals(f.dim(), 1.0, c.seed, stream_id(2, i));
        const auto g = f.gradient(v);
        const auto H = f.hessian(v);
        const double hs = 1e-4;
        double gmax = 1;
        for (double e : g) gmax = std::max(gmax, std::abs(e));
        for (int k = 0; k < f.dim(); ++k) {
            auto vp = v, vm = v;
            vp[k] += hs;
            vm[k] -= hs;
            gerr = std::max(gerr, std::abs((f.value(vp) - f.value(vm)) / (2 * hs) - g[k]) / gmax);
            const auto gp = f.gradient(vp), gm = f.gradient(vm);
            for (int k2 = 0; k2 < f.dim(); ++k2) herr = std::max(herr, std::abs((gp[k2] - gm[k2]) / (2 * hs) - H(k2, k)));
        }
        const auto V = flatten(partial_sums(tableau_from_point(v, q, p)), L);
        const auto wf = w.flat(L);
        double ip = 0, mag = 0;
        for (int k = 0; k < L.d; ++k) {
            ip += wf[k] * V[k];
            mag += std::abs(wf[k] * V[k]);
        }
        ierr = std::max(ierr, std::abs(f.value(v) - ip) / (1 + mag));
    }
    std::vector<Gate> gates{make_gate("gradient_fd", gerr, 0, 1e-5), make_gate("hessian_fd", herr, 0, 1e-4),
                            make_gate("inner_product", ierr, 0, 1e-10)};
    auto cfg = common_config(c);
    cfg.update({{"q", q}, {"p", p}, {"points", points}, {"fd_step", 1e-4}});
    auto r = report_envelope("phase", cfg, gates);
    r["max_error"] = {{"gradient_fd", gerr}, {"hessian_fd", herr}, {"inner_product", ierr}};
    const std::vector<Row> rows{{"gradient_fd", double(p), gerr, 0}, {"hessian_fd", double(p), herr, 0},
                                {"inner_product", double(p), ierr, 0}};
    return finish(c, "phase", r, rows_csv(rows, gates));
}

int cmd_thorn(const Common& c, int nmax, const std::string& method) {
    if (nmax < 1 || nmax > 60) throw std::domain_error("n-max must be in 1..60");
    if (method != "pfaffian" && method != "bareiss") throw std::domain_error("method must be pfaffian or bareiss");
    json vals = json::array();
    std::vector<Row> rows;
    double odd_max = 0;
    for (int n = 1; n <= nmax; ++n) {
        const auto v = method == "pfaffian" ? thorn_pfaffian(n) : thorn_bareiss(n);
        const std::string s = v.str();
        std::cerr << "n=" << n << " " << s << "\n";
        const bool zero = v == 0;
        if (n % 2 == 1) odd_max = std::max(odd_max, zero ? 0.0 : 1.0);
        vals.push_back({{"n", n}, {"value", s}, {"log_abs", zero ? json(nullptr) : json(log_abs(v))}});
        rows.push_back({"thorn", double(n), static_cast<double>(v), 0});
    }
    std::vector<Gate> gates{make_gate("odd_n_zero", odd_max, 0, 0)};
    auto cfg = common_config(c);
    cfg.update({{"n_max", nmax}, {"method", method}});
    auto r = report_envelope("thorn", cfg, gates);
    r["values"] = vals;
    return finish(c, "thorn", r, rows_csv(rows, gates));
}

int cmd_charfn(const Common& c, int q, int p, int samples, const std::vector<double>& radii, int directions,
               double decay_sigma) {
    if (radii.empty() || directions < 1) throw std::domain_error("need radii and at least one direction");
    const int d = layout(q).d;
    std::vector<std::vector<double>> xis;
    for (int k = 0; k < directions; ++k) {
        const auto u = random_direction(d, c.seed, k);
        for (double rad : radii) {
            std::vector<double> xi(u);
            for (auto& e : xi) e *= rad;
            xis.push_back(std::move(xi));
        }
    }
    const auto est = charfn_estimate(q, p, xis, samples, c.seed);
    std::vector<Row> rows;
    std::vector<Gate> gates;
    json arr = json::array();
    const std::size_t R = radii.size();
    for (int k = 0; k < directions; ++k) {
        for (std::size_t i = 0; i < R; ++i) {
            const auto& e = est[k * R + i];
            arr.push_back({{"direction", k}, {"radius", radii[i]}, {"re", e.value.real()}, {"im", e.value.imag()},
                           {"modulus", e.modulus}, {"modulus_se", e.modulus_se}, {"se", e.se}});
            rows.push_back({"abs_psi_dir" + std::to_string(k), radii[i], e.modulus, e.modulus_se});
            std::cerr << "dir " << k << " r=" << radii[i] << " |psi|=" << e.modulus << " +- " << e.modulus_se << "\n";
        }
        if (!std::isnan(decay_sigma) && R >= 2) {
            const auto &a = est[k * R], &b = est[k * R + R - 1];
            const double z = (a.modulus - b.modulus) / std::hypot(a.modulus_se, b.modulus_se);
            gates.push_back(make_gate("decay_dir" + std::to_string(k), z, decay_sigma,
                                      std::numeric_limits<double>::infinity()));
        }
    }
    auto cfg = common_config(c);
    cfg.update({{"q", q}, {"p", p}, {"samples", samples}, {"radii", radii}, {"directions", directions}});
    auto r = report_envelope("charfn", cfg, gates);
    r["estimates"] = arr;
    return finish(c, "charfn", r, rows_csv(rows, gates));
}

int cmd_couple(const Common& c, int q, const std::vector<int>& grid, const std::string& kind, int nmult,
               const std::string& estimator, int paths, int p_ref, int projections, const SlopeGate& sg) {
    CandidateSpec spec{parse_candidate_kind(kind), nmult};
    if (grid.empty()) throw std::domain_error("empty grid");
    if (p_ref <= 0) p_ref = 8 * *std::max_element(grid.begin(), grid.end());
    auto rep = coupling_rate_scan(q, grid, spec, p_ref, paths, estimator, c.seed, projections);
    rep.config.update(common_config(c));
    sg.apply(rep);
    for (std::size_t g = 0; g < rep.grid.size(); ++g)
        std::cerr << "p=" << rep.grid[g] << " " << rep.values[g] << " +- " << rep.se[g] << "\n";
    std::cerr << "slope " << rep.slope << " +- " << rep.slope_se << "\n";
    return finish(c, "couple", to_json(rep, "couple"), to_csv(rep));
}

int cmd_sde(const Common& c, const std::string& problem, const std::string& scheme, const std::vector<double>& hs,
            int paths, int refine, int p_step, const SlopeGate& sg) {
    StrongScanOptions o;
    o.refine = refine;
    o.p_step = p_step;
    auto rep = strong_error_scan(problem_by_name(problem), parse_scheme(scheme), hs, paths, c.seed, o);
    rep.config.update(common_config(c));
    rep.config["refine"] = refine;
    sg.apply(rep);
    for (std::size_t g = 0; g < rep.grid.size(); ++g)
        std::cerr << "h=" << rep.grid[g] << " " << rep.values[g] << " +- " << rep.se[g] << "\n";
    std::cerr << "slope " << rep.slope << " +- " << rep.slope_se << "\n";
    return finish(c, "sde", to_json(rep, "sde"), to_csv(rep));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"iterated Ito/Stratonovich integrals from Fourier coefficients"};
    app.require_subcommand(1);
    Common c;

    int q = 2, p = 64, paths = 1000, m = 2, nmult = 8, points = 20, nmax = 12, samples = 100000, directions = 5;
    int p_ref = 0, projections = 256, refine = 6, p_step = 16;
    double h = 1.0, decay_sigma = std::nan("");
    bool check_lambda = false;
    std::string convention = "stratonovich", method = "pfaffian", kind = "independent-tail", estimator = "sliced";
    std::string problem = "gbm", scheme = "euler";
    std::vector<int> grid{16, 32, 64, 128};
    std::vector<double> radii{2, 20}, hs;
    SlopeGate sg;

    auto* lyn = app.add_subcommand("lyndon", "list Lyndon words of length three");
    lyn->add_option("--q", q)->check(CLI::Range(1, 64));

    auto* smp = app.add_subcommand("sample", "sample integral sets");
    smp->add_option("--q", q);
    smp->add_option("--p", p);
    smp->add_option("--paths", paths);
    smp->add_option("--interval", h, "interval length h");
    smp->add_option("--convention", convention)->check(CLI::IsMember({"stratonovich", "ito"}));

    auto* idn = app.add_subcommand("identities", "check the exact nu and shuffle identities");
    idn->add_option("--q", q);
    idn->add_option("--p", p);
    idn->add_option("--paths", paths);

    auto* mom = app.add_subcommand("moments", "tail moment decay scan");
    mom->add_option("--q", q);
    mom->add_option("--m", m);
    mom->add_option("--grid", grid)->delimiter(',');
    mom->add_option("--n-mult", nmult);
    mom->add_option("--paths", paths);
    mom->add_flag("--check-lambda", check_lambda, "gate the lambda tail variance against its series");
    sg.add(mom);

    auto* phs = app.add_subcommand("phase", "finite-difference and inner-product checks of the phase function");
    phs->add_option("--q", q);
    phs->add_option("--p", p);
    phs->add_option("--points", points);

    auto* thr = app.add_subcommand("thorn", "exact values of the skew determinant constant");
    thr->add_option("--n-max", nmax);
    thr->add_option("--method", method)->check(CLI::IsMember({"pfaffian", "bareiss"}));

    auto* chf = app.add_subcommand("charfn", "characteristic function modulus along random directions");
    chf->add_option("--q", q);
    chf->add_option("--p", p);
    chf->add_option("--samples", samples);
    chf->add_option("--radii", radii)->delimiter(',');
    chf->add_option("--directions", directions);
    chf->add_option("--decay-sigma", decay_sigma, "gate: first radius exceeds last by this many SE");

    auto* cpl = app.add_subcommand("couple", "coupling rate scan");
    cpl->add_option("--q", q);
    cpl->add_option("--grid", grid)->delimiter(',');
    cpl->add_option("--kind", kind)->check(CLI::IsMember({"independent-tail", "gaussian-matched"}));
    cpl->add_option("--n-mult", nmult);
    cpl->add_option("--estimator", estimator)->check(CLI::IsMember({"sliced", "exact"}));
    cpl->add_option("--paths", paths);
    cpl->add_option("--p-ref", p_ref, "reference truncation (default 8 * max grid)");
    cpl->add_option("--projections", projections);
    sg.add(cpl);

    auto* sde = app.add_subcommand("sde", "strong error scan");
    sde->add_option("--problem", problem)->check(CLI::IsMember({"gbm", "linear1d", "bilinear2d"}));
    sde->add_option("--scheme", scheme)->check(CLI::IsMember({"euler", "milstein", "taylor15"}));
    sde->add_option("--h-grid", hs)->delimiter(',')->required();
    sde->add_option("--paths", paths);
    sde->add_option("--refine", refine, "reference step = min h / 2^refine");
    sde->add_option("--p-step", p_step, "Fourier modes per reference step");
    sg.add(sde);

    for (auto* s : {lyn, smp, idn, mom, phs, thr, chf, cpl, sde}) add_common(s, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cerr << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        auto* used = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << used->help();
        return 2;
    }

    if (c.threads > 0) set_threads(c.threads);
    try {
        if (*lyn) return cmd_lyndon(c, q);
        if (*smp) return cmd_sample(c, q, p, paths, h, convention);
        if (*idn) return cmd_identities(c, q, p, paths);
        if (*mom) return cmd_moments(c, q, m, grid, nmult, paths, check_lambda, sg);
        if (*phs) return cmd_phase(c, q, p, points);
        if (*thr) return cmd_thorn(c, nmax, method);
        if (*chf) return cmd_charfn(c, q, p, samples, radii, directions, decay_sigma);
        if (*cpl) return cmd_couple(c, q, grid, kind, nmult, estimator, paths, p_ref, projections, sg);
        if (*sde) return cmd_sde(c, problem, scheme, hs, paths, refine, p_step, sg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
