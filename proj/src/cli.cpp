#include "cpw/cli.hpp"

#include "cpw/bands.hpp"
#include "cpw/circuit.hpp"
#include "cpw/device.hpp"
#include "cpw/errors.hpp"
#include "cpw/modes.hpp"
#include "cpw/parallel.hpp"
#include "cpw/tight_binding.hpp"
#include "cpw/transmon.hpp"
#include "cpw/units.hpp"
#include "cpw/wave_mixing.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <variant>

namespace cpw {

using ojson = nlohmann::ordered_json;

unsigned long long fnv1a64(const std::string& text) {
    unsigned long long h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

std::string num(double x) {
    if (std::isnan(x)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

// JSON numbers carry the same 12 significant digits as the CSV output.
double r12(double x) {
    if (!std::isfinite(x)) return x;
    return std::strtod(num(x).c_str(), nullptr);
}

std::string ghz(double w) { return num(units::rad_to_ghz(w)); }
std::string mhz(double w) { return num(units::rad_to_mhz(w)); }

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> notes;  // extra header comment lines
};

using Result = std::variant<Table, ojson>;

struct Options {
    std::string subcommand;
    std::string device;
    std::string out = "-";
    int parallel = 1;
    bool lenient = false;
    bool fail_fast = false;
    bool gnuplot = false;

    int cutoff = 0;
    int harmonic = 2;
    int k_points = 0;  // 0 = subcommand default
    std::string solver = "inertia";
    double t_mhz = 0;
    double onsite_ghz = 10.0;
    double l0_nh = 2.0;
    std::string matrices;

    double t_min_mhz = 2.5, t_max_mhz = 250;
    int t_steps = 60;
    bool t_log = true;
    std::string window_mode = "scaled";
    std::string family;  // hw or fw, overrides --harmonic
    int energy_points = 400;
    double e_min_ghz = 0, e_max_ghz = 0;

    std::vector<int> cutoffs{20, 40, 60, 80, 100};
    std::string flux;
    std::vector<std::string> qubits;

    double omega_q = 9.15, omega_m = 9.697, omega_w = 9.758, alpha = 0.125;  // GHz
    double omega_p = 0;                                                     // GHz, 0 = resonant
    double g_qm_mhz = 1, g_qw_mhz = 1, ep_mhz = 1;
    bool oracle = false;
    std::vector<int> oracle_cutoffs{3, 3, 3};

    double gamma_e_mhz = 1, gamma_f_mhz = 1, alpha_mhz = 125;
    std::string drive = "resonant";  // resonant | two-photon
    double ep_min_mhz = 0.01, ep_max_mhz = 10;
    int points = 31;

    std::string axis, inner, qubit;
    std::vector<double> grid;
    double from = 0, to = 0;
    int steps = 0;
    bool log_grid = false;
};

ojson options_json(const Options& o) {
    // Everything that changes the numbers; output path and parallelism do not.
    ojson j;
    j["subcommand"] = o.subcommand;
    j["cutoff"] = o.cutoff;
    j["harmonic"] = o.harmonic;
    j["k_points"] = o.k_points;
    j["solver"] = o.solver;
    j["t_MHz"] = o.t_mhz;
    j["onsite_GHz"] = o.onsite_ghz;
    j["l0_nH"] = o.l0_nh;
    j["t_range"] = {o.t_min_mhz, o.t_max_mhz, o.t_steps, o.t_log};
    j["window_mode"] = o.window_mode;
    j["family"] = o.family;
    j["energy"] = {o.energy_points, o.e_min_ghz, o.e_max_ghz};
    j["cutoffs"] = o.cutoffs;
    j["flux"] = o.flux;
    j["qubits"] = o.qubits;
    j["fwm"] = {o.omega_q, o.omega_m, o.omega_w, o.alpha, o.omega_p, o.g_qm_mhz, o.g_qw_mhz, o.ep_mhz, o.oracle};
    j["oracle_cutoffs"] = o.oracle_cutoffs;
    j["saturation"] = {o.gamma_e_mhz, o.gamma_f_mhz, o.alpha_mhz, o.drive, o.ep_min_mhz, o.ep_max_mhz, o.points};
    j["sweep"] = {o.axis, o.inner, o.qubit, o.grid, o.from, o.to, o.steps, o.log_grid};
    j["lenient"] = o.lenient;
    return j;
}

const char* units_line(const std::string& sub) {
    static const std::map<std::string, const char*> u = {
        {"modes", "frequencies GHz (non-angular)"},
        {"bands", "k in rad per cell; frequencies GHz (non-angular)"},
        {"dos", "t MHz; energy GHz; dos states per GHz per cell"},
        {"tb-compare", "t and frequencies GHz; deviations relative"},
        {"converge", "deviations MHz (non-angular)"},
        {"couplings", "frequencies GHz; couplings MHz (non-angular)"},
        {"fwm", "frequencies GHz; couplings, drives and amplitudes MHz (non-angular)"},
        {"saturation", "drive MHz (non-angular); populations dimensionless"},
        {"sweep", "as the inner subcommand"},
    };
    auto it = u.find(sub);
    return it == u.end() ? "" : it->second;
}

// ---------------------------------------------------------------------------
// Device handling

struct Context {
    Options opt;
    std::optional<DeviceSpec> device;
    std::vector<std::string> warnings;
};

DeviceSpec require_device(const Context& ctx) {
    if (!ctx.device) throw ValidationError("--device is required for '" + ctx.opt.subcommand + "'");
    return *ctx.device;
}

void apply_flux_list(DeviceSpec& dev, const std::string& spec) {
    if (spec.empty()) return;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw ParseError("--flux entries look like name=value, got '" + item + "'");
        std::string name = item.substr(0, eq);
        char* end = nullptr;
        double v = std::strtod(item.c_str() + eq + 1, &end);
        if (end == item.c_str() + eq + 1 || *end != '\0') throw ParseError("bad flux value in '" + item + "'");
        dev = with_flux(dev, name, v);
    }
}

// Device after the cutoff, hopping and flux overrides.
DeviceSpec prepared_device(const Context& ctx) {
    DeviceSpec dev = require_device(ctx);
    const Options& o = ctx.opt;
    if (o.cutoff > 0) dev = with_cutoff(dev, o.cutoff);
    if (o.t_mhz > 0) {
        HoppingTarget target{units::mhz_to_rad(o.t_mhz), o.l0_nh * units::nH, units::ghz_to_rad(o.onsite_ghz),
                             o.harmonic, 0.5};
        dev = device_for_hopping(dev, target);
    }
    apply_flux_list(dev, o.flux);
    return dev;
}

BandSolver solver_of(const Options& o) {
    if (o.solver == "dense") return BandSolver::dense;
    if (o.solver == "inertia") return BandSolver::inertia;
    throw ValidationError("--solver must be dense or inertia");
}

std::string parity_name(int p) { return p > 0 ? "even" : (p < 0 ? "odd" : "mixed"); }

// ---------------------------------------------------------------------------
// Subcommands

Result cmd_modes(const Context& ctx) {
    DeviceSpec dev = prepared_device(ctx);
    CircuitMatrices mats = build_matrices(dev);
    if (!ctx.opt.matrices.empty()) {
        std::ofstream cap(ctx.opt.matrices + "_cap.csv"), ind(ctx.opt.matrices + "_ind_inv.csv");
        if (!cap || !ind) throw ValidationError("cannot write matrices with prefix '" + ctx.opt.matrices + "'");
        write_matrix_csv(cap, mats.cap);
        Eigen::MatrixXd li = mats.ind_inv.asDiagonal();
        write_matrix_csv(ind, li);
    }
    NormalModeSet modes = solve_modes(mats);
    bool has_refl = reflection_of(dev).has_value();
    Table t;
    t.columns = {"mode_index", "freq_GHz", "d", "participation_top5_sites", "parity"};
    const IndexMap& map = modes.index_map;
    for (Eigen::Index m = 0; m < modes.freqs.size(); ++m) {
        // Weight of the mode on each (cell, site), largest five first.
        std::vector<std::pair<double, int>> w;
        for (int c = 0; c < map.n_cells(); ++c)
            for (int s = 0; s < map.n_sites(); ++s) {
                int r0 = map.row(c, s, 1);
                w.push_back({-modes.vecs.row(m).segment(r0, map.cutoff(s)).squaredNorm(), c * map.n_sites() + s});
            }
        std::sort(w.begin(), w.end());
        std::string top;
        for (size_t i = 0; i < std::min<size_t>(5, w.size()); ++i) {
            top += (i ? " " : "") + std::to_string(w[i].second / map.n_sites()) + ":" +
                   std::to_string(w[i].second % map.n_sites()) + ":" + num(-w[i].first);
        }
        t.rows.push_back({std::to_string(m), ghz(modes.freqs[m]), num(modes.d[m]), top,
                          has_refl ? parity_name(modes.parity[m]) : "unknown"});
    }
    return t;
}

Result cmd_bands(const Context& ctx) {
    const Options& o = ctx.opt;
    DeviceSpec dev = prepared_device(ctx);
    std::vector<double> k = uniform_k_grid(o.k_points > 0 ? o.k_points : 64);
    BandStructure bs = bloch_bands(dev, k, o.harmonic, {solver_of(o), o.parallel, true});
    std::vector<bool> flat(bs.bands.cols(), false);
    Table t;
    if (k.size() >= 64) {
        for (const auto& f : detect_flat_bands(bs)) {
            flat[f.band] = true;
            t.notes.push_back("flat band " + std::to_string(f.band) + ": center_GHz=" + ghz(f.center) +
                              " width_MHz=" + mhz(f.bandwidth) + " degeneracy=" + std::to_string(f.degeneracy) +
                              " parity=" + f.parity);
        }
    }
    t.columns = {"k_index", "k", "band", "freq_GHz", "parity", "participation", "flat"};
    for (Eigen::Index i = 0; i < bs.bands.rows(); ++i)
        for (Eigen::Index b = 0; b < bs.bands.cols(); ++b)
            t.rows.push_back({std::to_string(i), num(k[i]), std::to_string(b), ghz(bs.bands(i, b)),
                              bs.parity.size() ? parity_name(bs.parity[b]) : "unknown",
                              bs.localization.size() ? num(bs.localization[b]) : "nan", flat[b] ? "1" : "0"});
    return t;
}

std::vector<double> t_grid(const Options& o) {
    if (o.t_steps < 1) throw ValidationError("t grid is empty");
    if (!(o.t_min_mhz > 0) || !(o.t_max_mhz >= o.t_min_mhz)) throw ValidationError("t range must be positive and ordered");
    std::vector<double> t(o.t_steps);
    for (int i = 0; i < o.t_steps; ++i) {
        double f = o.t_steps == 1 ? 0.0 : static_cast<double>(i) / (o.t_steps - 1);
        double v = o.t_log ? o.t_min_mhz * std::pow(o.t_max_mhz / o.t_min_mhz, f)
                           : o.t_min_mhz + f * (o.t_max_mhz - o.t_min_mhz);
        t[i] = units::mhz_to_rad(v);
    }
    return t;
}

Result cmd_dos(const Context& ctx) {
    const Options& o = ctx.opt;
    DeviceSpec dev = require_device(ctx);
    if (o.cutoff > 0) dev = with_cutoff(dev, o.cutoff);
    DosOptions d;
    if (o.window_mode == "scaled" || o.window_mode == "t-scaled") d.mode = WindowMode::t_scaled;
    else if (o.window_mode == "fixed") d.mode = WindowMode::fixed;
    else throw ValidationError("--window-mode must be scaled or fixed");
    d.harmonic = o.harmonic;
    d.k_points = o.k_points > 0 ? o.k_points : 512;
    d.energy_points = o.energy_points;
    d.l0 = o.l0_nh * units::nH;
    d.onsite = units::ghz_to_rad(o.onsite_ghz);
    d.e_min = units::ghz_to_rad(o.e_min_ghz);
    d.e_max = units::ghz_to_rad(o.e_max_ghz);
    d.solver = solver_of(o);
    d.parallel = o.parallel;
    DosGrid g = dos(dev, t_grid(o), d);
    Table t;
    t.columns = {"t_index", "t_MHz", "energy_GHz", "offset_over_t", "dos_per_GHz", "flat_marker"};
    for (size_t it = 0; it < g.t_values.size(); ++it) {
        const Eigen::Index ne = g.energies.cols();
        std::vector<bool> marker(ne, false);
        for (const auto& f : g.flat[it]) {
            Eigen::Index best;
            (g.energies.row(it).array() - f.center).abs().minCoeff(&best);
            if (f.center >= g.energies(it, 0) && f.center <= g.energies(it, ne - 1)) marker[best] = true;
        }
        for (Eigen::Index e = 0; e < ne; ++e) {
            double en = g.energies(it, e);
            t.rows.push_back({std::to_string(it), mhz(g.t_values[it]), ghz(en),
                              num((en - g.centers[it]) / g.t_values[it]),
                              num(g.dos(it, e) * units::two_pi * 1e9), marker[e] ? "1" : "0"});
        }
    }
    t.notes.push_back(std::string("window_mode=") + o.window_mode + " harmonic=" + std::to_string(o.harmonic));
    return t;
}

Result cmd_tb_compare(const Context& ctx) {
    const Options& o = ctx.opt;
    DeviceSpec dev = prepared_device(ctx);
    std::vector<double> k = uniform_k_grid(o.k_points > 0 ? o.k_points : 64);
    TbDeviationReport r = tb_deviation(dev, o.harmonic, k, {solver_of(o), o.parallel, false});
    ojson j;
    j["harmonic"] = r.harmonic;
    j["t_GHz"] = r12(units::rad_to_ghz(r.t));
    j["omega0_tilde_GHz"] = r12(units::rad_to_ghz(r.omega0_tilde));
    j["max_abs_deviation_GHz"] = r12(units::rad_to_ghz(r.max_abs));
    j["max_relative_deviation"] = r12(r.max_relative);
    j["bound"] = r12(r.bound);
    j["bound_applies"] = r.bound_applies;
    j["within_bound"] = r.within_bound;
    ojson bands = ojson::array();
    for (const auto& b : r.bands)
        bands.push_back({{"band", b.band},
                         {"max_abs_deviation_GHz", r12(units::rad_to_ghz(b.max_abs))},
                         {"full_width_GHz", r12(units::rad_to_ghz(b.full_width))},
                         {"tb_width_GHz", r12(units::rad_to_ghz(b.tb_width))},
                         {"width_ratio", std::isnan(b.width_ratio) ? ojson(nullptr) : ojson(r12(b.width_ratio))}});
    j["bands"] = bands;
    return j;
}

Result cmd_converge(const Context& ctx) {
    const Options& o = ctx.opt;
    DeviceSpec dev = require_device(ctx);
    std::vector<double> k = uniform_k_grid(o.k_points > 0 ? o.k_points : 64);
    std::optional<double> t;
    if (o.t_mhz > 0) t = units::mhz_to_rad(o.t_mhz);
    ConvergenceTable c = convergence_study(dev, o.cutoffs, k, o.harmonic, t, units::ghz_to_rad(o.onsite_ghz),
                                           {solver_of(o), o.parallel, false});
    Table tab;
    tab.columns = {"M", "mean_abs_MHz", "std_abs_MHz"};
    for (size_t i = 0; i < c.cutoffs.size(); ++i)
        tab.rows.push_back({std::to_string(c.cutoffs[i]), mhz(c.mean_abs[i]), mhz(c.std_abs[i])});
    tab.notes.push_back("fit_rms_MHz=" + mhz(c.fit_rms) + " residual_ok=" + (c.residual_ok ? "true" : "false") +
                        " ratio_ok=" + (c.ratio_ok ? "true" : "false"));
    return tab;
}

Result cmd_couplings(const Context& ctx) {
    const Options& o = ctx.opt;
    DeviceSpec dev = prepared_device(ctx);
    NormalModeSet modes = solve_modes(build_matrices(dev));
    CouplingTable ct = coupling_table(dev, modes, o.qubits, {o.parallel, true});
    bool has_refl = reflection_of(dev).has_value();
    Table t;
    t.columns = {"qubit", "mode_index", "mode_freq_GHz", "g_MHz", "flatband", "parity"};
    for (size_t q = 0; q < ct.qubits.size(); ++q) {
        t.notes.push_back("qubit " + ct.qubits[q] + ": omega_q_GHz=" + ghz(ct.params[q].omega_q) +
                          " alpha_MHz=" + mhz(ct.params[q].alpha) + " E_J_GHz=" + ghz(ct.params[q].ej));
        for (Eigen::Index m = 0; m < ct.mode_freqs.size(); ++m)
            t.rows.push_back({ct.qubits[q], std::to_string(m), ghz(ct.mode_freqs[m]), mhz(ct.g(q, m)),
                              ct.flat[m] ? "1" : "0", has_refl ? parity_name(ct.parity[m]) : "unknown"});
    }
    return t;
}

FwmProblem fwm_problem(const Options& o) {
    FwmProblem p;
    p.omega_q = units::ghz_to_rad(o.omega_q);
    p.omega_m = units::ghz_to_rad(o.omega_m);
    p.omega_w = units::ghz_to_rad(o.omega_w);
    p.omega_p = o.omega_p > 0 ? units::ghz_to_rad(o.omega_p) : resonant_pump(p.omega_q, p.omega_m, p.omega_w);
    p.alpha = units::ghz_to_rad(o.alpha);
    p.g_qm = units::mhz_to_rad(o.g_qm_mhz);
    p.g_qw = units::mhz_to_rad(o.g_qw_mhz);
    p.ep = units::mhz_to_rad(o.ep_mhz);
    return p;
}

ojson fwm_json(const Options& o, const FwmProblem& p) {
    ojson j;
    const double star = resonant_pump(p.omega_q, p.omega_m, p.omega_w);
    j["omega_q_GHz"] = r12(units::rad_to_ghz(p.omega_q));
    j["omega_m_GHz"] = r12(units::rad_to_ghz(p.omega_m));
    j["omega_p_star_GHz"] = r12(units::rad_to_ghz(star));
    j["omega_w_inferred_GHz"] = r12(units::rad_to_ghz(star + p.omega_m - p.omega_q));
    FwmAmplitude tls = fwm_amplitude_tls(p);
    FwmAmplitude tr = fwm_amplitude_transmon(p);
    FwmAmplitude sa = fwm_amplitude_small_alpha(p);
    j["amp_tls"] = r12(units::rad_to_mhz(tls.value.real()));
    j["amp_transmon"] = r12(units::rad_to_mhz(tr.value.real()));
    j["amp_small_alpha"] = r12(units::rad_to_mhz(sa.value.real()));
    j["transmon_over_tls"] = r12(tr.value.real() / tls.value.real());
    if (o.oracle) {
        if (o.oracle_cutoffs.size() != 3) throw ValidationError("--oracle-cutoffs needs three values");
        FwmOracleResult r = fwm_oracle_exact(p, {o.oracle_cutoffs[0], o.oracle_cutoffs[1], o.oracle_cutoffs[2]});
        j["oracle"] = {{"overlap", r12(units::rad_to_mhz(r.overlap.real()))},
                       {"relative_to_transmon", r12(r.overlap.real() / tr.value.real() - 1.0)},
                       {"overlap_001", r12(r.overlap_001)},
                       {"overlap_110", r12(r.overlap_110)},
                       {"coeff_200", r12(r.coeff_200)},
                       {"cutoffs", o.oracle_cutoffs}};
    } else {
        j["oracle"] = nullptr;
    }
    const FwmValidity& v = tr.validity;
    j["validity_flags"] = {{"ratio_qw", r12(v.ratio_qw)},
                           {"ratio_qm", r12(v.ratio_qm)},
                           {"perturbative", v.perturbative},
                           {"near_two_photon", v.near_two_photon},
                           {"weak_drive", v.weak_drive},
                           {"small_alpha", v.small_alpha}};
    return j;
}

Result cmd_fwm(const Context& ctx) { return fwm_json(ctx.opt, fwm_problem(ctx.opt)); }

Result cmd_saturation(const Context& ctx) {
    const Options& o = ctx.opt;
    if (o.points < 2) throw ValidationError("saturation sweep needs at least 2 points");
    if (!(o.ep_min_mhz > 0) || !(o.ep_max_mhz > o.ep_min_mhz)) throw ValidationError("drive range must be positive and increasing");
    const double ge = units::mhz_to_rad(o.gamma_e_mhz), gf = units::mhz_to_rad(o.gamma_f_mhz);
    const double alpha = units::mhz_to_rad(o.alpha_mhz);
    double detuning;
    if (o.drive == "resonant") detuning = 0;
    else if (o.drive == "two-photon") detuning = -alpha / 2;
    else throw ValidationError("--drive must be resonant or two-photon");
    std::vector<double> ep(o.points), pee(o.points), pff(o.points);
    for (int i = 0; i < o.points; ++i)
        ep[i] = units::mhz_to_rad(o.ep_min_mhz * std::pow(o.ep_max_mhz / o.ep_min_mhz, double(i) / (o.points - 1)));
    std::vector<LindbladResult> res(o.points);
    parallel_for(o.points, o.parallel, [&](int i) { res[i] = lindblad_steady_state(ep[i], detuning, alpha, ge, gf); });
    for (int i = 0; i < o.points; ++i) {
        pee[i] = res[i].p_ee;
        pff[i] = res[i].p_ff;
    }
    Table t;
    t.columns = {"ep_MHz", "p_ee", "p_ff", "p_ee_fit", "p_ff_fit"};
    std::vector<double> fit_e(o.points, NAN), fit_f(o.points, NAN);
    try {
        SaturationFit f = fit_saturation(ep, pee);
        for (int i = 0; i < o.points; ++i) fit_e[i] = f.a * f.b * ep[i] * ep[i] / (1 + f.b * ep[i] * ep[i]);
        t.notes.push_back("p_ee fit: A=" + num(f.a) + " B_per_MHz2=" + num(f.b * std::pow(units::mhz_to_rad(1), 2)) +
                          " rms_relative=" + num(f.rms_relative));
    } catch (const FitError& e) {
        t.notes.push_back(std::string("p_ee fit unavailable: ") + e.what());
    }
    try {
        std::vector<double> er(o.points);
        for (int i = 0; i < o.points; ++i) er[i] = raman_rate(ep[i], alpha);
        SaturationFit f = fit_saturation(er, pff);
        for (int i = 0; i < o.points; ++i) fit_f[i] = f.a * f.b * er[i] * er[i] / (1 + f.b * er[i] * er[i]);
        t.notes.push_back("p_ff fit in Raman rate: A=" + num(f.a) +
                          " B_per_MHz2=" + num(f.b * std::pow(units::mhz_to_rad(1), 2)) +
                          " rms_relative=" + num(f.rms_relative));
    } catch (const Error& e) {
        t.notes.push_back(std::string("p_ff fit unavailable: ") + e.what());
    }
    for (int i = 0; i < o.points; ++i)
        t.rows.push_back({mhz(ep[i]), num(pee[i]), num(pff[i]), num(fit_e[i]), num(fit_f[i])});
    return t;
}

Result dispatch(const Context& ctx);

// Scalar leaves of a JSON bundle as dotted columns.
void flatten(const ojson& j, const std::string& prefix, std::vector<std::string>& cols, std::vector<std::string>& vals) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it)
            flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), cols, vals);
        return;
    }
    cols.push_back(prefix);
    if (j.is_number_float()) vals.push_back(num(j.get<double>()));
    else if (j.is_string()) vals.push_back(j.get<std::string>());
    else if (j.is_null()) vals.push_back("");
    else vals.push_back(j.dump());
}

Table as_table(const Result& r) {
    if (std::holds_alternative<Table>(r)) return std::get<Table>(r);
    Table t;
    std::vector<std::string> vals;
    flatten(std::get<ojson>(r), "", t.columns, vals);
    t.rows.push_back(vals);
    return t;
}

std::vector<double> sweep_grid(const Options& o) {
    std::vector<double> g = o.grid;
    if (g.empty() && o.steps > 0) {
        if (o.log_grid && !(o.from > 0 && o.to > 0)) throw ValidationError("log sweep needs positive bounds");
        for (int i = 0; i < o.steps; ++i) {
            double f = o.steps == 1 ? 0.0 : double(i) / (o.steps - 1);
            g.push_back(o.log_grid ? o.from * std::pow(o.to / o.from, f) : o.from + f * (o.to - o.from));
        }
    }
    if (g.empty()) throw ValidationError("sweep grid is empty");
    bool up = true, down = true;
    for (size_t i = 1; i < g.size(); ++i) {
        up = up && g[i] > g[i - 1];
        down = down && g[i] < g[i - 1];
    }
    if (!up && !down) throw ValidationError("sweep grid must be strictly monotone");
    return g;
}

Result cmd_sweep(const Context& ctx) {
    const Options& o = ctx.opt;
    static const std::map<std::string, std::vector<std::string>> allowed = {
        {"t", {"modes", "bands", "tb-compare", "couplings", "converge"}},
        {"flux", {"modes", "couplings", "fwm"}},
        {"omega_m", {"fwm"}},
        {"omega_q", {"fwm"}},
        {"M", {"modes", "bands", "tb-compare", "couplings", "converge", "dos"}},
    };
    auto it = allowed.find(o.axis);
    if (it == allowed.end()) throw ValidationError("--axis must be one of t, flux, omega_m, omega_q, M");
    if (std::find(it->second.begin(), it->second.end(), o.inner) == it->second.end())
        throw ValidationError("axis '" + o.axis + "' does not apply to inner '" + o.inner + "'");
    const std::vector<double> grid = sweep_grid(o);
    if (o.axis == "flux" && o.qubit.empty()) throw ValidationError("flux sweeps need --qubit");
    if (o.axis == "M")
        for (double m : grid)
            if (m != std::floor(m) || m < 1) throw ValidationError("M sweep values must be positive integers");

    // A cutoff sweep of the convergence study is one study over the grid.
    if (o.axis == "M" && o.inner == "converge") {
        Context c = ctx;
        c.opt.subcommand = "converge";
        c.opt.cutoffs.assign(grid.begin(), grid.end());
        return dispatch(c);
    }

    const int n = static_cast<int>(grid.size());
    std::vector<std::optional<Table>> parts(n);
    std::vector<std::string> errors(n);
    const int outer = std::min(o.parallel, n);
    parallel_for(n, outer, [&](int i) {
        Context c = ctx;
        c.opt.subcommand = o.inner;
        c.opt.parallel = std::max(1, o.parallel / std::max(1, outer));
        const double v = grid[i];
        try {
            if (o.axis == "t") c.opt.t_mhz = v;
            else if (o.axis == "M") c.opt.cutoff = static_cast<int>(v);
            else if (o.axis == "omega_m") c.opt.omega_m = v;
            else if (o.axis == "omega_q") c.opt.omega_q = v;
            else if (o.axis == "flux") {
                if (o.inner == "fwm") {
                    DeviceSpec dev = with_flux(require_device(c), o.qubit, v);
                    for (const auto& q : dev.transmons)
                        if (q.name == o.qubit) c.opt.omega_q = units::rad_to_ghz(transmon_params(q).omega_q);
                } else {
                    c.opt.flux = (c.opt.flux.empty() ? "" : c.opt.flux + ",") + o.qubit + "=" + num(v);
                }
            }
            parts[i] = as_table(dispatch(c));
        } catch (const Error& e) {
            if (o.fail_fast) throw;
            errors[i] = e.kind() + ": " + e.what();
        }
    });

    Table t;
    std::vector<std::string> inner_cols;
    std::vector<std::string> notes;
    for (const auto& p : parts)
        if (p) {
            inner_cols = p->columns;
            break;
        }
    t.columns = {"axis", "value"};
    t.columns.insert(t.columns.end(), inner_cols.begin(), inner_cols.end());
    t.columns.push_back("errors");
    for (int i = 0; i < n; ++i) {
        auto prefix = std::vector<std::string>{o.axis, num(grid[i])};
        if (parts[i]) {
            for (const auto& note : parts[i]->notes) t.notes.push_back(o.axis + "=" + num(grid[i]) + ": " + note);
            for (const auto& row : parts[i]->rows) {
                auto r = prefix;
                r.insert(r.end(), row.begin(), row.end());
                r.push_back("");
                t.rows.push_back(r);
            }
        } else {
            auto r = prefix;
            r.resize(2 + inner_cols.size());
            r.push_back(errors[i]);
            t.rows.push_back(r);
        }
    }
    return t;
}

Result dispatch(const Context& ctx) {
    const std::string& s = ctx.opt.subcommand;
    if (s == "modes") return cmd_modes(ctx);
    if (s == "bands") return cmd_bands(ctx);
    if (s == "dos") return cmd_dos(ctx);
    if (s == "tb-compare") return cmd_tb_compare(ctx);
    if (s == "converge") return cmd_converge(ctx);
    if (s == "couplings") return cmd_couplings(ctx);
    if (s == "fwm") return cmd_fwm(ctx);
    if (s == "saturation") return cmd_saturation(ctx);
    if (s == "sweep") return cmd_sweep(ctx);
    throw ValidationError("unknown subcommand '" + s + "'");
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

std::string render(const Result& r, const std::string& header_version, const std::string& hash, const char* units,
                   const std::vector<std::string>& warnings) {
    std::ostringstream os;
    if (std::holds_alternative<Table>(r)) {
        const Table& t = std::get<Table>(r);
        os << "# " << header_version << "\n# config_hash " << hash << "\n# units: " << units << "\n";
        for (const auto& w : warnings) os << "# warning: " << w << "\n";
        for (const auto& n : t.notes) os << "# " << n << "\n";
        for (size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << csv_field(t.columns[i]);
        os << "\n";
        for (const auto& row : t.rows) {
            for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_field(row[i]);
            os << "\n";
        }
    } else {
        ojson j;
        j["header"] = {{"tool", header_version}, {"config_hash", hash}, {"units", units}};
        if (!warnings.empty()) j["header"]["warnings"] = warnings;
        for (auto& [k, v] : std::get<ojson>(r).items()) j[k] = v;
        os << j.dump(2) << "\n";
    }
    return os.str();
}

std::string gnuplot_script(const std::string& sub, const std::string& csv) {
    std::ostringstream g;
    g << "# companion plot for " << csv << "\nset datafile separator ','\nset key autotitle columnhead\n";
    if (sub == "dos") {
        g << "set xlabel 't (MHz)'\nset ylabel 'energy (GHz)'\nset logscale x\nset view map\n"
          << "splot '" << csv << "' using 2:3:5 with points pointtype 5 pointsize 0.3 palette\n";
    } else if (sub == "bands") {
        g << "set xlabel 'k'\nset ylabel 'frequency (GHz)'\nplot '" << csv << "' using 2:4 with points pointtype 7\n";
    } else if (sub == "couplings") {
        g << "set xlabel 'mode frequency (GHz)'\nset ylabel 'g (MHz)'\nplot '" << csv << "' using 3:4 with impulses\n";
    } else if (sub == "converge") {
        g << "set xlabel 'M'\nset ylabel 'mean |E - E_inf| (MHz)'\nset logscale xy\nplot '" << csv
          << "' using 1:2 with linespoints\n";
    } else if (sub == "saturation") {
        g << "set xlabel 'E_p (MHz)'\nset ylabel 'population'\nset logscale xy\nplot '" << csv
          << "' using 1:2 with points, '' using 1:3 with points\n";
    } else {
        g << "plot '" << csv << "' using 1:2 with linespoints\n";
    }
    return g.str();
}

int error_exit(std::ostream& err, const std::string& kind, ErrorClass cls, const std::string& msg) {
    int code = cls == ErrorClass::config ? 2 : 3;
    ojson j;
    j["error"] = {{"kind", kind}, {"class", cls == ErrorClass::config ? "config" : "numeric"}, {"message", msg}};
    j["exit_code"] = code;
    err << j.dump() << "\n";
    return code;
}

template <class T>
void add_list(CLI::App* app, const std::string& name, std::vector<T>& v, const std::string& help) {
    app->add_option(name, v, help)->delimiter(',');
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Capacitively coupled CPW resonator lattices with transmons", tool_name};
    app.set_version_flag("--version", std::string(tool_name) + " " + tool_version);
    app.require_subcommand(1);
    app.add_option("--device", o.device, "device JSON file");
    app.add_option("--out", o.out, "output file, - for stdout");
    app.add_option("--parallel", o.parallel, "worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--lenient", o.lenient, "warn on unknown device keys instead of failing");
    app.add_flag("--fail-fast", o.fail_fast, "abort a sweep at the first failing point");
    app.add_flag("--gnuplot", o.gnuplot, "write a companion gnuplot script next to --out");

    auto lattice = [&](CLI::App* s) {
        s->add_option("--cutoff", o.cutoff, "override every resonator's mode cutoff M");
        s->add_option("--t-MHz", o.t_mhz, "rewrite elements for this hopping (0 keeps the file)");
        s->add_option("--onsite-GHz", o.onsite_ghz, "renormalized on-site frequency of the harmonic, with --t-MHz");
        s->add_option("--l0-nH", o.l0_nh, "inductance used with --t-MHz");
        s->add_option("--harmonic", o.harmonic, "harmonic family j (1 = HW, 2 = FW)");
        s->add_option("--window", o.family, "hw or fw, same as --harmonic 1 or 2");
        s->add_option("--flux", o.flux, "name=flux list, e.g. Q1=0.21,Q2=0.3");
    };
    auto kopts = [&](CLI::App* s) {
        s->add_option("--kpoints,--k-points", o.k_points, "uniform k grid size");
        s->add_option("--solver", o.solver, "dense or inertia");
    };
    auto dosopts = [&](CLI::App* s) {
        s->add_option("--tmin-MHz,--t-min-MHz", o.t_min_mhz);
        s->add_option("--tmax-MHz,--t-max-MHz", o.t_max_mhz);
        s->add_option("--tsteps,--t-steps", o.t_steps);
        s->add_flag("--log,!--linear", o.t_log, "log or linear t grid");
        s->add_option("--window-mode", o.window_mode, "scaled or fixed");
        s->add_option("--energy-points", o.energy_points);
        s->add_option("--e-min-GHz", o.e_min_ghz);
        s->add_option("--e-max-GHz", o.e_max_ghz);
    };
    auto fwmopts = [&](CLI::App* s) {
        s->add_option("--omega-q", o.omega_q, "GHz");
        s->add_option("--omega-m", o.omega_m, "GHz");
        s->add_option("--omega-w", o.omega_w, "GHz");
        s->add_option("--omega-p", o.omega_p, "GHz, 0 = resonant pump");
        s->add_option("--alpha", o.alpha, "anharmonicity, GHz");
        s->add_option("--g-qm-MHz", o.g_qm_mhz);
        s->add_option("--g-qw-MHz", o.g_qw_mhz);
        s->add_option("--ep-MHz", o.ep_mhz);
        s->add_flag("--oracle", o.oracle, "add the exact-diagonalization overlap");
        add_list(s, "--oracle-cutoffs", o.oracle_cutoffs, "n_q,n_w,n_m");
    };
    auto all_inner = [&](CLI::App* s) {
        lattice(s);
        kopts(s);
        dosopts(s);
        fwmopts(s);
        add_list(s, "--M,--cutoffs", o.cutoffs, "cutoff list");
        add_list(s, "--qubits", o.qubits, "qubit names");
        s->add_option("--matrices", o.matrices, "prefix for capacitance and inverse-inductance CSVs");
    };

    std::map<CLI::App*, std::string> names;
    auto sub = [&](const std::string& name, const std::string& help) {
        CLI::App* s = app.add_subcommand(name, help);
        s->fallthrough();
        names[s] = name;
        return s;
    };
    CLI::App* s;
    s = sub("modes", "normal modes of the finite lattice");
    lattice(s);
    s->add_option("--matrices", o.matrices, "prefix for capacitance and inverse-inductance CSVs");
    s = sub("bands", "Bloch bands of one harmonic family");
    lattice(s);
    kopts(s);
    s = sub("dos", "density of states over a hopping sweep");
    s->add_option("--cutoff", o.cutoff);
    s->add_option("--harmonic", o.harmonic);
    s->add_option("--window", o.family, "hw or fw, same as --harmonic 1 or 2");
    s->add_option("--onsite-GHz", o.onsite_ghz);
    s->add_option("--l0-nH", o.l0_nh);
    kopts(s);
    dosopts(s);
    s = sub("tb-compare", "full circuit against the tight-binding model");
    lattice(s);
    kopts(s);
    s = sub("converge", "band convergence in the mode cutoff");
    lattice(s);
    kopts(s);
    add_list(s, "--M,--cutoffs", o.cutoffs, "cutoff list");
    s = sub("couplings", "qubit to normal-mode coupling table");
    lattice(s);
    add_list(s, "--qubits", o.qubits, "qubit names");
    s = sub("fwm", "four-wave-mixing amplitudes");
    fwmopts(s);
    s = sub("saturation", "steady-state populations over a drive sweep");
    s->add_option("--gamma-e-MHz", o.gamma_e_mhz);
    s->add_option("--gamma-f-MHz", o.gamma_f_mhz);
    s->add_option("--alpha-MHz", o.alpha_mhz);
    s->add_option("--drive", o.drive, "resonant or two-photon");
    s->add_option("--ep-min-MHz", o.ep_min_mhz);
    s->add_option("--ep-max-MHz", o.ep_max_mhz);
    s->add_option("--points", o.points);
    s = sub("sweep", "stack an inner subcommand over a parameter grid");
    s->add_option("--axis", o.axis, "t, flux, omega_m, omega_q or M")->required();
    s->add_option("--inner", o.inner, "inner subcommand")->required();
    s->add_option("--qubit", o.qubit, "qubit for flux sweeps");
    add_list(s, "--grid", o.grid, "explicit grid values");
    s->add_option("--from", o.from);
    s->add_option("--to", o.to);
    s->add_option("--steps", o.steps);
    s->add_flag("--log-grid", o.log_grid);
    all_inner(s);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << tool_name << " " << tool_version << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        return error_exit(err, "ParseError", ErrorClass::config, e.what());
    }
    for (auto* sc : app.get_subcommands()) o.subcommand = names[sc];
    if (!o.family.empty()) {
        if (o.family == "hw") o.harmonic = 1;
        else if (o.family == "fw") o.harmonic = 2;
        else return error_exit(err, "ValidationError", ErrorClass::config, "--window must be hw or fw");
    }

    try {
        Context ctx;
        ctx.opt = o;
        std::string device_text;
        if (!o.device.empty()) {
            ctx.device = load_device(o.device, {o.lenient}, &ctx.warnings);
            device_text = serialize_text(*ctx.device);
        }
        Result r = dispatch(ctx);
        char hash[32];
        std::snprintf(hash, sizeof hash, "fnv1a64:%016llx", fnv1a64(options_json(o).dump() + "\n" + device_text));
        std::string text = render(r, std::string(tool_name) + " " + tool_version, hash, units_line(o.subcommand),
                                  ctx.warnings);
        if (o.out == "-") {
            if (o.gnuplot) throw ValidationError("--gnuplot needs --out pointing at a file");
            out << text;
        } else {
            std::ofstream f(o.out, std::ios::binary);
            if (!f) throw ValidationError("cannot write output file '" + o.out + "'");
            f << text;
            if (!f) throw ValidationError("failed writing '" + o.out + "'");
            if (o.gnuplot) {
                std::ofstream g(o.out + ".gp", std::ios::binary);
                if (!g) throw ValidationError("cannot write gnuplot script '" + o.out + ".gp'");
                g << gnuplot_script(o.subcommand, o.out);
            }
        }
        return 0;
    } catch (const Error& e) {
        return error_exit(err, e.kind(), e.error_class(), e.what());
    } catch (const std::exception& e) {
        return error_exit(err, "InternalError", ErrorClass::numeric, e.what());
    }
}

}  // namespace cpw
