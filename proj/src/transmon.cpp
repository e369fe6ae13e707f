#include "cpw/transmon.hpp"

#include "cpw/bands.hpp"
#include "cpw/errors.hpp"
#include "cpw/parallel.hpp"
#include "cpw/units.hpp"

#include <cmath>

namespace cpw {

TransmonParams transmon_params(const TransmonSpec& spec) {
    if (!(spec.ej0 > 0) || !(spec.cq > 0) || !(spec.cc_prime >= 0))
        throw DomainError("transmon '" + spec.name + "' needs E_J0 > 0, C_q > 0, C_c' >= 0");
    if (!std::isfinite(spec.flux)) throw DomainError("transmon '" + spec.name + "' has a non-finite flux");
    // Reduce to [-1, 1] first so flux -> flux + 2 and flux -> -flux give the
    // same cosine argument.
    const double reduced = std::abs(std::remainder(spec.flux, 2.0));
    const double c = std::cos(units::pi * reduced);
    // cos(pi / 2) evaluates to ~6e-17, not zero; treat that as the node.
    if (!(c > 1e-12))
        throw FluxSweetSpotError("transmon '" + spec.name + "': cos(pi flux) <= 0 leaves no positive E_J");

    TransmonParams p;
    p.ej = 2.0 * spec.ej0 * c;
    const double two_e = 2.0 * units::e_charge;
    const double ej_joule = units::hbar * p.ej;
    // (1/2e)^2 / E_J with the flux quantum restored: hbar^2 / (4 e^2 E_J).
    p.lq = units::hbar * units::hbar / (two_e * two_e * ej_joule);
    p.alpha_tilde = std::pow(two_e / units::hbar, 4) * ej_joule / 24.0;
    p.c_sigma = spec.cq + spec.cc_prime;
    p.omega_h = 1.0 / std::sqrt(p.c_sigma * p.lq);
    p.chi_zpf = std::sqrt(0.5 * units::hbar * std::sqrt(p.lq / p.c_sigma));
    p.alpha = 12.0 * p.alpha_tilde * std::pow(p.chi_zpf, 4) / units::hbar;
    p.omega_q = p.omega_h - p.alpha;
    return p;
}

double coupling_strength(double cc_prime, double omega_mode, double omega_q, double c_sigma, double weight) {
    return 0.5 * cc_prime * std::sqrt(omega_mode * omega_mode * omega_mode * omega_q / c_sigma) * weight;
}

namespace {

std::vector<bool> flat_membership(const DeviceSpec& dev, const NormalModeSet& modes, int parallel) {
    std::vector<bool> flat(modes.freqs.size(), false);
    if (dev.boundary != Boundary::periodic) return flat;
    int families = dev.sites.front().mode_cutoff;
    for (const auto& s : dev.sites) families = std::min(families, s.mode_cutoff);
    const std::vector<double> k = uniform_k_grid(64);
    for (int j = 1; j <= families; ++j) {
        BandStructure bs;
        try {
            bs = bloch_bands(dev, k, j, {BandSolver::inertia, parallel, false});
        } catch (const TrackingError&) {
            continue;  // overlapping families have no index-based band to mark
        }
        for (const auto& f : detect_flat_bands(bs)) {
            const double window = f.bandwidth + std::max(1e-9 * f.center, 1e-3 * bs.hopping);
            for (Eigen::Index m = 0; m < modes.freqs.size(); ++m)
                if (std::abs(modes.freqs[m] - f.center) <= window) flat[m] = true;
        }
    }
    return flat;
}

}  // namespace

CouplingTable coupling_table(const DeviceSpec& dev, const NormalModeSet& modes, const std::vector<std::string>& qubits,
                             const CouplingOptions& opts) {
    const IndexMap& map = modes.index_map;
    if (map.n_sites() != dev.n_sites() || map.n_cells() != dev.n_cells)
        throw IndexError("normal modes were solved for a different device");

    std::vector<const TransmonSpec*> chosen;
    if (qubits.empty()) {
        for (const auto& q : dev.transmons) chosen.push_back(&q);
    } else {
        for (const auto& name : qubits) {
            const TransmonSpec* hit = nullptr;
            for (const auto& q : dev.transmons)
                if (q.name == name) hit = &q;
            if (!hit) throw IndexError("no transmon named '" + name + "'");
            chosen.push_back(hit);
        }
    }

    CouplingTable t;
    const int nq = static_cast<int>(chosen.size());
    const Eigen::Index nm = modes.freqs.size();
    t.mode_freqs = modes.freqs;
    t.parity = modes.parity;
    t.g.resize(nq, nm);
    t.params.resize(nq);
    for (const auto* q : chosen) {
        if (q->site < 0 || q->site >= map.n_sites() || q->cell < 0 || q->cell >= map.n_cells())
            throw IndexError("transmon '" + q->name + "' sits outside the lattice");
        t.qubits.push_back(q->name);
    }
    parallel_for(nq, opts.parallel, [&](int i) {
        const TransmonSpec& q = *chosen[i];
        TransmonParams p = transmon_params(q);
        t.params[i] = p;
        for (Eigen::Index m = 0; m < nm; ++m) {
            // Bare flux at the coupled end, summed over the host harmonics.
            double w = end_flux(modes, static_cast<int>(m), q.cell, q.site, q.end);
            t.g(i, m) = coupling_strength(q.cc_prime, modes.freqs[m], p.omega_q, p.c_sigma, w);
        }
    });
    t.flat = opts.flat_markers ? flat_membership(dev, modes, opts.parallel) : std::vector<bool>(nm, false);
    return t;
}

DispersiveShift dispersive_shift(double g, double delta) {
    if (delta == 0) throw DivisionByZero("dispersive shift at zero detuning");
    return {g * g / delta, std::abs(g / delta) > 0.1};
}

}  // namespace cpw
