#include "cpw/tight_binding.hpp"

#include "cpw/circuit.hpp"
#include "cpw/errors.hpp"
#include "cpw/modes.hpp"

#include <cmath>
#include <complex>
#include <limits>

namespace cpw {

Hopping hopping_from_circuit(double c0, double cc, double cc_prime, double l0, int degree) {
    if (!(c0 > 0) || !(l0 > 0) || !(cc >= 0) || !(cc_prime >= 0) || degree < 0)
        throw DomainError("hopping needs c0, l0 > 0 and cc, cc' >= 0");
    const double ct = c0 + degree * cc + cc_prime;
    Hopping h;
    h.c0_tilde = ct;
    h.omega0_tilde = 1.0 / std::sqrt(ct * l0);
    h.t = cc / (2.0 * std::pow(ct, 1.5) * std::sqrt(l0));
    return h;
}

CircuitElements invert_hopping(const HoppingTarget& target) {
    if (!(target.t >= 0) || !(target.l0 > 0) || !(target.onsite > 0) || target.harmonic < 1 ||
        !(target.cc_prime_ratio >= 0) || target.degree < 0)
        throw DomainError("invert_hopping needs t >= 0, l0 > 0, onsite > 0, harmonic >= 1");
    const double w0 = target.onsite / target.harmonic;
    if (target.t >= w0 / 2)
        throw NoSolutionError("hopping must stay below half the renormalized fundamental");
    // Both constraints are explicit in C~0 and Cc, so no iteration is needed.
    const double ct = 1.0 / (target.l0 * w0 * w0);
    const double cc = 2.0 * target.t * ct / w0;
    const double c0 = ct - (target.degree + target.cc_prime_ratio) * cc;
    if (!(c0 > 0))
        throw NoSolutionError("hopping too large: bare capacitance would be non-positive");
    CircuitElements e{c0, cc, target.cc_prime_ratio * cc, target.l0};
    Hopping check = hopping_from_circuit(e.c0, e.cc, e.cc_prime, e.l0, target.degree);
    if (std::abs(check.omega0_tilde - w0) > 1e-12 * w0 || std::abs(check.t - target.t) > 1e-12 * w0)
        throw NoSolutionError("inverted elements miss the target beyond 1e-12");
    return e;
}

DeviceSpec device_for_hopping(const DeviceSpec& dev, const HoppingTarget& target) {
    HoppingTarget t = target;
    t.degree = site_degree(dev, 0);
    for (int s = 1; s < dev.n_sites(); ++s)
        if (site_degree(dev, s) != t.degree)
            throw DomainError("device sites have different coupler degrees; no single hopping exists");
    CircuitElements e = invert_hopping(t);
    return with_elements(dev, e.c0, e.l0, e.cc, e.cc_prime);
}

namespace {

// First-order hopping between two renormalized oscillators: divided
// difference of d^{-1/2} applied to the off-diagonal entry of K.
double bond_hopping(double cta, double la, double ctb, double lb, double cc, int j) {
    const double j2 = static_cast<double>(j) * j;
    const double da = cta * la / j2, db = ctb * lb / j2;
    const double delta = -cc * std::sqrt(la * lb) / j2;
    const double sa = std::sqrt(da), sb = std::sqrt(db);
    return -delta / (sa * sb * (sa + sb));
}

}  // namespace

TbModel tb_model(const DeviceSpec& dev) {
    TbModel m;
    m.n_cells = dev.n_cells;
    m.boundary = dev.boundary;
    const int s = dev.n_sites();
    std::vector<double> ct(s);
    for (int i = 0; i < s; ++i) {
        double sum = dev.sites[i].c0 + site_loading(dev, i);
        for (const auto* list : {&dev.couplers, &dev.inter_cell})
            for (const auto& c : *list) sum += c.cc * ((c.a.site == i) + (c.b.site == i));
        ct[i] = sum;
        m.c0.push_back(dev.sites[i].c0);
        m.l0.push_back(dev.sites[i].l0);
        m.load.push_back(site_loading(dev, i));
        m.onsite.push_back(1.0 / std::sqrt(sum * dev.sites[i].l0));
    }
    double tsum = 0;
    for (const auto* list : {&dev.couplers, &dev.inter_cell})
        for (const auto& c : *list) {
            double h = bond_hopping(ct[c.a.site], dev.sites[c.a.site].l0, ct[c.b.site], dev.sites[c.b.site].l0, c.cc, 1);
            m.bonds.push_back({c.a.site, c.b.site, c.cell_offset, h, c.a.parity, c.b.parity, c.cc});
            tsum += h;
        }
    double wsum = 0;
    for (double w : m.onsite) wsum += w;
    m.omega0_tilde = wsum / s;
    m.t = m.bonds.empty() ? 0.0 : tsum / static_cast<double>(m.bonds.size());
    return m;
}

static Eigen::MatrixXcd bloch_matrix(const TbModel& model, int j, double k, bool with_onsite) {
    const int s = static_cast<int>(model.onsite.size());
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(s, s);
    if (with_onsite)
        for (int i = 0; i < s; ++i) h(i, i) = j * model.onsite[i];
    for (const auto& b : model.bonds) {
        // Both d and the K entry scale as 1/j^2, so the hopping scales as j.
        double amp = (with_onsite ? j * b.t_unit : 1.0) * end_sign(j, b.pa) * end_sign(j, b.pb);
        std::complex<double> v = amp * std::polar(1.0, k * b.offset);
        h(b.a, b.b) += v;
        h(b.b, b.a) += std::conj(v);
    }
    return h;
}

Eigen::MatrixXcd tb_sigma(const TbModel& model, int harmonic, double k) {
    return bloch_matrix(model, harmonic, k, false);
}

Eigen::MatrixXcd tb_bloch_hamiltonian(const TbModel& model, int harmonic, double k) {
    return bloch_matrix(model, harmonic, k, true);
}

// Edge resonators of an open lattice touch fewer couplers, so the
// renormalized capacitance is counted per resonator instance.
Eigen::MatrixXd tb_hamiltonian(const TbModel& model, int harmonic) {
    const int s = static_cast<int>(model.onsite.size());
    const int n = model.n_cells;
    auto partner = [&](int c, const TbModel::Bond& b) {
        int other = c + b.offset;
        if (model.boundary == Boundary::open) return (other < 0 || other >= n) ? -1 : other;
        return ((other % n) + n) % n;
    };
    std::vector<double> ct(static_cast<size_t>(s * n));
    for (int c = 0; c < n; ++c)
        for (int i = 0; i < s; ++i) ct[c * s + i] = model.c0[i] + model.load[i];
    for (int c = 0; c < n; ++c)
        for (const auto& b : model.bonds) {
            int other = partner(c, b);
            if (other < 0) continue;
            ct[c * s + b.a] += b.cc;
            ct[other * s + b.b] += b.cc;
        }
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(s * n, s * n);
    for (int c = 0; c < n; ++c)
        for (int i = 0; i < s; ++i) h(c * s + i, c * s + i) = harmonic / std::sqrt(ct[c * s + i] * model.l0[i]);
    for (int c = 0; c < n; ++c)
        for (const auto& b : model.bonds) {
            int other = partner(c, b);
            if (other < 0) continue;
            int ra = c * s + b.a, rb = other * s + b.b;
            double v = harmonic * bond_hopping(ct[ra], model.l0[b.a], ct[rb], model.l0[b.b], b.cc, 1) *
                       end_sign(harmonic, b.pa) * end_sign(harmonic, b.pb);
            h(ra, rb) += v;
            h(rb, ra) += v;
        }
    return h;
}

Eigen::VectorXd tb_spectrum(const TbModel& model, int harmonic) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tb_hamiltonian(model, harmonic), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

BandStructure tb_bands(const TbModel& model, const std::vector<double>& k_grid, int harmonic) {
    BandStructure bs;
    bs.k_grid = k_grid;
    bs.harmonic = harmonic;
    bs.hopping = model.t;
    const int s = static_cast<int>(model.onsite.size());
    bs.bands.resize(static_cast<Eigen::Index>(k_grid.size()), s);
    for (size_t i = 0; i < k_grid.size(); ++i) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(tb_bloch_hamiltonian(model, harmonic, k_grid[i]),
                                                           Eigen::EigenvaluesOnly);
        bs.bands.row(static_cast<Eigen::Index>(i)) = es.eigenvalues().transpose();
    }
    return bs;
}

TbDeviationReport tb_deviation(const DeviceSpec& dev, int harmonic, const std::vector<double>& k_grid,
                               const BandOptions& opts) {
    TbModel model = tb_model(dev);
    TbDeviationReport r;
    r.harmonic = harmonic;
    r.t = model.t;
    r.omega0_tilde = model.omega0_tilde;

    Eigen::MatrixXd full, tb;
    if (dev.boundary == Boundary::periodic) {
        BandOptions o = opts;
        o.classify = false;
        full = bloch_bands(dev, k_grid, harmonic, o).bands;
        tb = tb_bands(model, k_grid, harmonic).bands;
    } else {
        NormalModeSet modes = solve_modes(build_matrices(dev));
        const int count = dev.n_sites() * dev.n_cells;
        for (const auto& s : dev.sites)
            if (s.mode_cutoff < harmonic) throw TrackingError("harmonic exceeds a resonator's mode cutoff");
        full = modes.freqs.segment((harmonic - 1) * count, count).transpose();
        tb = tb_spectrum(model, harmonic).transpose();
    }
    r.max_abs = 0;
    for (Eigen::Index b = 0; b < full.cols(); ++b) {
        BandDeviation d;
        d.band = static_cast<int>(b);
        d.max_abs = (full.col(b) - tb.col(b)).cwiseAbs().maxCoeff();
        d.full_width = full.col(b).maxCoeff() - full.col(b).minCoeff();
        d.tb_width = tb.col(b).maxCoeff() - tb.col(b).minCoeff();
        d.width_ratio = d.tb_width > 0 ? d.full_width / d.tb_width : std::numeric_limits<double>::quiet_NaN();
        r.max_abs = std::max(r.max_abs, d.max_abs);
        r.bands.push_back(d);
    }
    r.max_relative = r.max_abs / (harmonic * model.omega0_tilde);
    const double x = model.t / model.omega0_tilde;
    r.bound = 5.0 * x * x + 1e-9;
    r.bound_applies = true;
    for (const auto* list : {&dev.couplers, &dev.inter_cell})
        for (const auto& c : *list)
            if (c.cc / dev.sites[c.a.site].c0 > 1e-4 || c.cc / dev.sites[c.b.site].c0 > 1e-4) r.bound_applies = false;
    r.within_bound = r.max_relative <= r.bound;
    return r;
}

}  // namespace cpw
