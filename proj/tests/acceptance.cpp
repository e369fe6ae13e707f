// Acceptance runner: one PASS/FAIL line per criterion, with the measured
// numbers and wall time. Exits nonzero when any criterion fails.

#include "cpw/bands.hpp"
#include "cpw/circuit.hpp"
#include "cpw/cli.hpp"
#include "cpw/errors.hpp"
#include "cpw/modes.hpp"
#include "cpw/tight_binding.hpp"
#include "cpw/transmon.hpp"
#include "cpw/wave_mixing.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

using namespace cpw;
using namespace cpw::test;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int failures = 0;

void criterion(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
    auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool in_time = budget_s <= 0 || secs <= budget_s;
    bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s  [%2d] %s | %s | %.2f s%s\n", pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs,
                in_time ? "" : fmt(" (budget %.0f s)", budget_s).c_str());
    std::fflush(stdout);
}

DeviceSpec example() { return load_device(device_path("quasi1d_lattice.json")); }

DeviceSpec lattice_at(double t_mhz, int cutoff) {
    HoppingTarget tg{units::mhz_to_rad(t_mhz), 2e-9, units::ghz_to_rad(10), 2};
    return with_cutoff(device_for_hopping(example(), tg), cutoff);
}

double span(const BandStructure& b) { return b.bands.maxCoeff() - b.bands.minCoeff(); }

std::vector<double> geomspace(double a, double b, int n) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(a * std::pow(b / a, static_cast<double>(i) / (n - 1)));
    return out;
}

std::string cli(const std::vector<std::string>& args, int* code = nullptr) {
    std::ostringstream out, err;
    int c = run_cli(args, out, err);
    if (code) *code = c;
    if (c != 0 && !code) throw std::runtime_error("cli failed: " + err.str());
    return out.str();
}

std::vector<double> csv_column(const std::string& csv, const std::string& name) {
    std::istringstream in(csv);
    std::vector<std::string> header;
    std::vector<double> out;
    size_t col = 0;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
        if (header.empty()) {
            header = f;
            col = std::find(header.begin(), header.end(), name) - header.begin();
            if (col == header.size()) throw std::runtime_error("missing column " + name);
        } else {
            out.push_back(std::stod(f.at(col)));
        }
    }
    return out;
}

FwmProblem unit_problem(double g, double alpha = 0.2) {
    FwmProblem p;
    p.omega_q = 10.0;
    p.omega_w = 11.0;
    p.omega_m = 12.3;
    p.omega_p = resonant_pump(p.omega_q, p.omega_m, p.omega_w);
    p.g_qw = p.g_qm = g;
    p.alpha = alpha;
    p.ep = 1e-3;
    return p;
}

}  // namespace

int main() {
    criterion(1, "analytic spectra", 1, [] {
        const double c0 = 400e-15, l0 = 2e-9, cc = 7e-15, w0 = 1 / std::sqrt(l0 * c0);
        double worst = 0;
        for (int m : {1, 10, 50, 100}) {
            Eigen::VectorXd f = solve_modes(build_matrices(single(c0, l0, m))).freqs;
            for (int j = 1; j <= m; ++j) worst = std::max(worst, rel(f[j - 1], j * w0));
        }
        Eigen::VectorXd d = solve_modes(build_matrices(dimer(c0, l0, cc, 1))).freqs;
        double dimer_err = std::max(rel(d[0], 1 / std::sqrt(l0 * (c0 + 2 * cc))), rel(d[1], w0));
        return Outcome{worst <= 1e-12 && dimer_err <= 1e-12,
                       fmt("uncoupled max rel %.1e, dimer max rel %.1e (tol 1e-12)", worst, dimer_err)};
    });

    criterion(2, "tight-binding equivalence", 30, [] {
        // C_c / C_0 = 1e-4 and half of it; FW family, M = 20.
        auto report = [](double t_mhz) { return tb_deviation(lattice_at(t_mhz, 20), 2, uniform_k_grid(16)); };
        TbDeviationReport a = report(0.125), b = report(0.25);
        const double ratio = b.max_abs / a.max_abs;
        const double coeff = b.max_relative / std::pow(b.t / b.omega0_tilde, 2);
        bool ok = b.bound_applies && b.within_bound && a.within_bound && ratio >= 3 && ratio <= 5;
        return Outcome{ok, fmt("max rel dev %.3e vs bound %.3e (= %.1f (t/w0)^2, allowed 5), doubling ratio %.3f",
                               b.max_relative, b.bound, coeff, ratio)};
    });

    criterion(3, "hopping closed form and 10 GHz window", 0, [] {
        const double c0 = 400e-15, cc = 5e-15, ccp = 2.5e-15, l0 = 2e-9, ct = c0 + 4 * cc + ccp;
        Hopping h = hopping_from_circuit(c0, cc, ccp, l0);
        double formula = rel(h.t, cc / (2 * std::pow(ct, 1.5) * std::sqrt(l0)));
        double trip = 0;
        for (double t_mhz : {2.5, 25.0, 250.0}) {
            HoppingTarget tg{units::mhz_to_rad(t_mhz), 2e-9, units::ghz_to_rad(10), 2};
            CircuitElements e = invert_hopping(tg);
            Hopping back = hopping_from_circuit(e.c0, e.cc, e.cc_prime, e.l0);
            trip = std::max({trip, rel(back.t, tg.t), rel(2 * back.omega0_tilde, tg.onsite)});
        }
        DosOptions o;
        o.k_points = 64;
        o.energy_points = 100;
        DosGrid g = dos(with_cutoff(example(), 20), {units::mhz_to_rad(2.5)}, o);
        double off_mhz = std::abs(units::rad_to_ghz(g.centers[0]) - 10.0) * 1e3;
        bool ok = formula <= 1e-14 && trip <= 1e-12 && off_mhz <= 1;
        return Outcome{ok, fmt("formula rel %.1e, round trip rel %.1e, window centre off by %.3f MHz", formula, trip,
                               off_mhz)};
    });

    criterion(4, "flat bands in the TB limit", 10, [] {
        DeviceSpec d = lattice_at(2.5, 6);
        std::vector<double> k = uniform_k_grid(64);
        TbModel m = tb_model(d);
        BandStructure tb = tb_bands(m, k, 2);
        const double t = 2 * m.t;
        auto w = [&](int c) { return tb.bands.col(c).maxCoeff() - tb.bands.col(c).minCoeff(); };
        double flat_w = std::max({w(0), w(1), w(3)});
        bool structure = flat_w < 1e-9 * t && std::abs(tb.bands(0, 0) - tb.bands(0, 1)) < 1e-9 * t &&
                         w(2) > 0.1 * t && w(4) > 0.1 * t && tb.bands.col(5).minCoeff() - tb.bands.col(4).maxCoeff() > 0.1 * t &&
                         tb.bands.col(3).minCoeff() > tb.bands.col(2).minCoeff();
        // Parity from the full circuit near the same limit.
        BandStructure full = bloch_bands(d, k, 2);
        bool lower_even = full.parity[0] == 1 || full.parity[1] == 1;
        bool upper_odd = full.parity[3] == -1;
        return Outcome{structure && lower_even && upper_odd,
                       fmt("TB flat widths %.1e t, bottom pair split %.1e t; full-circuit parity bands 0,1,3 = %d,%d,%d",
                           flat_w / t, std::abs(tb.bands(0, 0) - tb.bands(0, 1)) / t, full.parity[0], full.parity[1],
                           full.parity[3])};
    });

    criterion(5, "beyond-TB features at 250 MHz, M = 100", 600, [] {
        DeviceSpec d = lattice_at(250, 100);
        std::vector<double> k = uniform_k_grid(512);
        BandOptions opt{BandSolver::inertia, 1, false};
        BandStructure fw = bloch_bands(d, k, 2, opt), hw = bloch_bands(d, k, 1, opt);
        const double ratio = span(fw) / span(hw);
        TbModel m = tb_model(d);
        auto gaps = compare_gaps(fw, tb_bands(m, k, 2), 1e-9 * m.t, 1e-3 * m.t);
        int opened = 0;
        double biggest = 0;
        for (const auto& g : gaps)
            if (g.opened) {
                ++opened;
                biggest = std::max(biggest, g.full_gap);
            }
        // Full (E, t) grid: 60 log-spaced t, 512 k.
        auto ts = geomspace(units::mhz_to_rad(2.5), units::mhz_to_rad(250), 60);
        auto start = std::chrono::steady_clock::now();
        DosGrid g = dos(with_cutoff(example(), 100), ts, DosOptions{});
        double grid_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        bool ok = ratio > 2 && opened > 0 && g.dos.rows() == 60;
        return Outcome{ok, fmt("width FW/HW %.3f, %d gap(s) opened (largest %.2f MHz), 60x512 DoS grid %.0f s", ratio,
                               opened, units::rad_to_ghz(biggest) * 1e3, grid_s)};
    });

    criterion(6, "cutoff convergence at 250 MHz", 0, [] {
        ConvergenceTable c = convergence_study(example(), {40, 60, 80, 100}, uniform_k_grid(32), 2,
                                               units::mhz_to_rad(250), units::ghz_to_rad(10));
        const double mean_mhz = units::rad_to_ghz(c.mean_abs.back()) * 1e3;
        bool ok = mean_mhz >= 4 && mean_mhz <= 40 && c.residual_ok;
        return Outcome{ok, fmt("mean |E(100) - E_inf| = %.2f MHz (window [4, 40]), fit rms %.3f MHz, residual_ok %d",
                               mean_mhz, units::rad_to_ghz(c.fit_rms) * 1e3, c.residual_ok)};
    });

    criterion(7, "transmon anharmonicity and coupling normalization", 0, [] {
        // Quartic formula against the 40-level quartic oscillator at the example qubits.
        double worst = 0, worst_ratio = 0;
        for (const auto& q : example().transmons) {
            TransmonParams p = transmon_params(q);
            double oracle = -quartic_oscillator_anharmonicity(p.omega_h, p.alpha / 12, 40);
            double err = std::abs(oracle / p.alpha - 1);
            if (err > worst) {
                worst = err;
                worst_ratio = p.ej / p.alpha;
            }
        }
        const double c0 = 400e-15, l0 = 2e-9, cs = 80e-15, ccp = 2e-15;
        const double omega = 1 / std::sqrt(l0 * (c0 + ccp));
        Eigen::Vector2d w = two_node_frequencies(c0, l0, ccp, cs, 1 / (omega * omega * (cs + ccp)));
        double g = coupling_strength(ccp, omega, omega, cs + ccp, std::sqrt(l0));
        double split = std::abs((w[1] - w[0]) / (2 * g) - 1);
        return Outcome{worst <= 0.02 && split <= 0.01,
                       fmt("quartic vs oracle off by %.1f%% at E_J/E_C = %.0f (tol 2%%); splitting/2g off by %.2f%%",
                           100 * worst, worst_ratio, 100 * split)};
    });

    criterion(8, "FWM resonance arithmetic", 0, [] {
        const double p = units::rad_to_ghz(
            resonant_pump(units::ghz_to_rad(9.15), units::ghz_to_rad(9.697), units::ghz_to_rad(9.758)));
        std::vector<std::string> common{"--alpha", "0.125", "--g-qm-MHz", "5", "--g-qw-MHz", "5", "--ep-MHz", "10"};
        auto with = [&](std::vector<std::string> a) {
            a.insert(a.end(), common.begin(), common.end());
            return a;
        };
        std::string m = cli(with({"sweep", "--axis", "omega_m", "--inner", "fwm", "--grid", "9.60,9.65,9.70,9.72",
                                  "--omega-q", "9.15", "--omega-w", "9.758"}));
        std::string q = cli(with({"sweep", "--axis", "omega_q", "--inner", "fwm", "--grid", "9.0,9.1,9.2,9.3",
                                  "--omega-m", "9.697", "--omega-w", "9.758"}));
        auto worst_slope = [](const std::vector<double>& x, const std::vector<double>& y, double s) {
            double e = 0;
            for (size_t i = 1; i < x.size(); ++i) e = std::max(e, std::abs((y[i] - y[i - 1]) / (x[i] - x[i - 1]) - s));
            return e;
        };
        double sm = worst_slope(csv_column(m, "value"), csv_column(m, "omega_p_star_GHz"), -1);
        double sq = worst_slope(csv_column(q, "value"), csv_column(q, "omega_p_star_GHz"), 1);
        bool ok = std::abs(p - 9.211) <= 1e-12 && sm <= 1e-12 && sq <= 1e-12;
        return Outcome{ok, fmt("w_p* = %.12f GHz; slope errors %.1e (w_m), %.1e (w_q)", p, sm, sq)};
    });

    criterion(9, "FWM amplitude correctness", 5, [] {
        double ident = 0;
        for (double a : {0.01, 0.2, 3.0, -0.4}) {
            FwmProblem p = unit_problem(1e-3, a);
            Detunings d = detunings(p);
            double r = (fwm_amplitude_transmon(p).value / fwm_amplitude_tls(p).value).real();
            ident = std::max(ident, rel(r, -a / (d.qw - a)));
        }
        double lin = std::abs(fwm_amplitude_transmon(unit_problem(1e-3, 2e-5)).value) /
                     std::abs(fwm_amplitude_transmon(unit_problem(1e-3, 1e-5)).value);
        FwmProblem p = unit_problem(1e-3);
        double oracle1 = std::abs(fwm_oracle_exact(p).overlap - fwm_amplitude_transmon(p).value) /
                         std::abs(fwm_amplitude_transmon(p).value);
        double first = 0, second = 0;
        for (double g : {1e-3, 3e-3, 1e-2}) {
            FwmProblem q = unit_problem(g);
            Detunings d = detunings(q);
            FwmOracleResult o = fwm_oracle_exact(q);
            std::complex<double> a = fwm_amplitude_transmon(q).value;
            double ratio = std::max(std::abs(g / d.qw), std::abs(g / d.qm));
            first = std::max(first, std::abs(o.overlap - a) / std::abs(a) / ratio);
            double expect = -std::sqrt(2.0) * q.g_qw / (d.qw - q.alpha);
            second = std::max(second, std::abs(o.coeff_200 / expect - 1) / (ratio * ratio));
        }
        bool ok = ident <= 1e-14 && std::abs(lin - 2) < 1e-3 && oracle1 <= 0.01 && first < 10 && second < 10;
        return Outcome{ok, fmt("identity %.1e, alpha doubling x%.4f, oracle %.2e at g/D=1e-3, first-order C %.2f, "
                               "coeff_200 second-order C %.2f",
                               ident, lin, oracle1, first, second)};
    });

    criterion(10, "saturation", 10, [] {
        const double gamma = 1.0;
        std::vector<double> e = geomspace(1e-3, 1.0, 31), p;
        for (double x : e) p.push_back(lindblad_steady_state(x, 0, 1e5, gamma, gamma).p_ee);
        SaturationFit fit = fit_saturation(e, p);
        std::vector<double> lo = geomspace(1e-5, 1e-4, 10), power, pee, pff;
        for (double x : lo) {
            power.push_back(x * x);
            pee.push_back(lindblad_steady_state(x, 0, 1.0, 0.01, 0.01).p_ee);
            pff.push_back(lindblad_steady_state(x, -0.5, 1.0, 0.01, 0.01).p_ff);
        }
        double s1 = loglog_slope(power, pee), s2 = loglog_slope(power, pff);
        bool ok = std::abs(fit.a - 0.5) <= 0.005 && std::abs(s1 - 1) <= 0.05 && std::abs(s2 - 2) <= 0.1;
        return Outcome{ok, fmt("A = %.5f, P_ee slope %.4f, P_ff slope %.4f", fit.a, s1, s2)};
    });

    criterion(11, "determinism across runs and parallelism", 0, [] {
        const std::string dev = device_path("quasi1d_lattice.json");
        std::vector<std::vector<std::string>> runs{
            {"modes", "--device", dev, "--cutoff", "2"},
            {"bands", "--device", dev, "--cutoff", "4", "--kpoints", "64", "--harmonic", "2"},
            {"dos", "--device", dev, "--cutoff", "4", "--k-points", "64", "--tsteps", "6", "--tmin-MHz", "2.5",
             "--tmax-MHz", "250", "--energy-points", "100", "--window", "fw"},
            {"tb-compare", "--device", dev, "--cutoff", "4", "--kpoints", "16"},
            {"converge", "--device", dev, "--kpoints", "8", "--M", "10,15,20"},
            {"couplings", "--device", dev, "--cutoff", "2"},
            {"fwm", "--omega-q", "9.15", "--omega-m", "9.697", "--omega-w", "9.758", "--alpha", "0.125", "--g-qm-MHz",
             "5", "--g-qw-MHz", "5", "--ep-MHz", "10", "--oracle"},
            {"saturation", "--gamma-e-MHz", "1", "--gamma-f-MHz", "1", "--alpha-MHz", "100", "--points", "20"},
            {"sweep", "--axis", "t", "--inner", "bands", "--device", dev, "--cutoff", "3", "--kpoints", "16", "--grid",
             "2.5,25,250"},
        };
        int same = 0;
        std::string bad;
        for (const auto& r : runs) {
            std::string a = cli(r), b = cli(r);
            std::vector<std::string> par{"--parallel", "4"};
            par.insert(par.end(), r.begin(), r.end());
            std::string c = cli(par);
            if (a == b && a == c) ++same;
            else bad += " " + r[0];
        }
        return Outcome{same == static_cast<int>(runs.size()),
                       fmt("%d/%zu subcommands byte-identical%s", same, runs.size(), bad.c_str())};
    });

    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
