#include "cpw/circuit.hpp"

#include "cpw/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <vector>

namespace cpw {

namespace {

// Collects every capacitance contribution per end pair and sums them in
// ascending order, so the result does not depend on the order couplers were
// visited. This is what makes the tiled Bloch blocks match the full build bit
// for bit.
class EndAccumulator {
public:
    void add(int e, int f, double v) { terms_[{e, f}].push_back(v); }

    void couple(int e, int f, double cc) {
        add(e, e, cc);
        add(f, f, cc);
        add(e, f, -cc);
        add(f, e, -cc);
    }

    std::map<std::pair<int, int>, double> sums() const {
        std::map<std::pair<int, int>, double> out;
        for (auto [key, vals] : terms_) {
            std::sort(vals.begin(), vals.end());
            double s = 0.0;
            for (double v : vals) s += v;
            out[key] = s;
        }
        return out;
    }

private:
    std::map<std::pair<int, int>, std::vector<double>> terms_;
};

int end_index(int global_site, Parity p) { return 2 * global_site + (p == Parity::minus ? 1 : 0); }

// Signed end sum for one harmonic pair. Grouping (++ + --) + (+- + -+) is
// invariant under transposition, so mirrored blocks stay exact.
double mode_entry(double gpp, double gpm, double gmp, double gmm, int j1, int j2) {
    double spp = 1.0, spm = end_sign(j2, Parity::minus), smp = end_sign(j1, Parity::minus);
    double smm = smp * spm;
    return (spp * gpp + smm * gmm) + (spm * gpm + smp * gmp);
}

struct EndLookup {
    const std::map<std::pair<int, int>, double>& g;
    double operator()(int e, int f) const {
        auto it = g.find({e, f});
        return it == g.end() ? 0.0 : it->second;
    }
};

// Fills the block between resonators with global indices (ga, gb) whose rows
// start at ra and rb. Only called with ga <= gb; the caller mirrors.
void fill_block(Eigen::MatrixXd& cap, const EndLookup& g, int ga, int gb, int ra, int rb, int ma,
                int mb, double c0_diag) {
    double gpp = g(2 * ga, 2 * gb), gpm = g(2 * ga, 2 * gb + 1);
    double gmp = g(2 * ga + 1, 2 * gb), gmm = g(2 * ga + 1, 2 * gb + 1);
    for (int j1 = 1; j1 <= ma; ++j1) {
        for (int j2 = (ga == gb ? j1 : 1); j2 <= mb; ++j2) {
            double v = mode_entry(gpp, gpm, gmp, gmm, j1, j2);
            if (ga == gb && j1 == j2) v = c0_diag + v;
            cap(ra + j1 - 1, rb + j2 - 1) = v;
            cap(rb + j2 - 1, ra + j1 - 1) = v;
        }
    }
}

void check_positive_definite(const Eigen::MatrixXd& cap) {
    Eigen::LLT<Eigen::MatrixXd> llt(cap);
    if (llt.info() != Eigen::Success)
        throw PositiveDefinitenessError("capacitance matrix is not positive definite");
    Eigen::VectorXd pivots = llt.matrixL().toDenseMatrix().diagonal().array().square();
    if (pivots.size() > 0 && pivots.minCoeff() <= 1e-18)
        throw PositiveDefinitenessError("capacitance matrix has a pivot below 1e-18 F");
}

}  // namespace

CircuitMatrices build_matrices(const DeviceSpec& dev) {
    const int s = dev.n_sites();
    const int n = dev.n_cells;
    IndexMap map = make_index_map(dev);
    EndAccumulator acc;

    for (int cell = 0; cell < n; ++cell) {
        for (const auto& c : dev.couplers)
            acc.couple(end_index(cell * s + c.a.site, c.a.parity), end_index(cell * s + c.b.site, c.b.parity), c.cc);
        for (const auto& c : dev.inter_cell) {
            int other = cell + c.cell_offset;
            if (dev.boundary == Boundary::open) {
                if (other < 0 || other >= n) continue;
            } else {
                other = ((other % n) + n) % n;
            }
            acc.couple(end_index(cell * s + c.a.site, c.a.parity), end_index(other * s + c.b.site, c.b.parity), c.cc);
        }
        for (int site = 0; site < s; ++site) {
            double load = site_loading(dev, site);
            if (load > 0) acc.add(end_index(cell * s + site, Parity::plus), end_index(cell * s + site, Parity::plus), load);
        }
    }
    auto g = acc.sums();
    EndLookup lookup{g};

    CircuitMatrices out;
    out.index_map = map;
    out.cap = Eigen::MatrixXd::Zero(map.size(), map.size());
    out.ind_inv.resize(map.size());

    // Resonator pairs that share any end capacitance, plus every diagonal.
    std::map<std::pair<int, int>, bool> pairs;
    for (const auto& [key, v] : g) {
        int ga = key.first / 2, gb = key.second / 2;
        if (ga <= gb) pairs[{ga, gb}] = true;
    }
    for (int gsite = 0; gsite < n * s; ++gsite) pairs[{gsite, gsite}] = true;

    for (const auto& [pair, unused] : pairs) {
        auto [ga, gb] = pair;
        int sa = ga % s, sb = gb % s;
        int ra = map.row(ga / s, sa, 1), rb = map.row(gb / s, sb, 1);
        fill_block(out.cap, lookup, ga, gb, ra, rb, dev.sites[sa].mode_cutoff, dev.sites[sb].mode_cutoff,
                   dev.sites[sa].c0);
    }
    for (int r = 0; r < map.size(); ++r) {
        auto t = map.triple(r);
        out.ind_inv[r] = static_cast<double>(t.harmonic) * t.harmonic / dev.sites[t.site].l0;
    }
    check_positive_definite(out.cap);
    out.meta = std::make_shared<const DeviceSpec>(dev);
    return out;
}

EndCapacitance end_capacitance(const DeviceSpec& dev) {
    const int s = dev.n_sites();
    EndAccumulator on, hop;
    for (const auto& c : dev.couplers)
        on.couple(end_index(c.a.site, c.a.parity), end_index(c.b.site, c.b.parity), c.cc);
    for (const auto& c : dev.inter_cell) {
        if (c.cell_offset != 1 && c.cell_offset != -1)
            throw TopologyError("inter-cell coupler spans " + std::to_string(c.cell_offset) +
                                " cells; Bloch reduction needs nearest cells");
        const EndRef& from = c.cell_offset == 1 ? c.a : c.b;  // end in cell n
        const EndRef& to = c.cell_offset == 1 ? c.b : c.a;    // end in cell n+1
        int e = end_index(from.site, from.parity), f = end_index(to.site, to.parity);
        on.add(e, e, c.cc);
        on.add(f, f, c.cc);
        hop.add(e, f, -c.cc);
    }
    for (int site = 0; site < s; ++site) {
        double load = site_loading(dev, site);
        if (load > 0) on.add(end_index(site, Parity::plus), end_index(site, Parity::plus), load);
    }
    EndCapacitance out;
    out.onsite = Eigen::MatrixXd::Zero(2 * s, 2 * s);
    out.hop = Eigen::MatrixXd::Zero(2 * s, 2 * s);
    for (const auto& [key, v] : on.sums()) out.onsite(key.first, key.second) = v;
    for (const auto& [key, v] : hop.sums()) out.hop(key.first, key.second) = v;
    return out;
}

BlochBlocks bloch_blocks(const DeviceSpec& dev) {
    if (dev.boundary != Boundary::periodic)
        throw TopologyError("Bloch reduction needs a periodic boundary");
    const int s = dev.n_sites();
    EndCapacitance ends = end_capacitance(dev);
    IndexMap map = make_cell_index_map(dev);

    std::map<std::pair<int, int>, double> gon, ghop;
    for (int e = 0; e < 2 * s; ++e)
        for (int f = 0; f < 2 * s; ++f) {
            if (ends.onsite(e, f) != 0.0) gon[{e, f}] = ends.onsite(e, f);
            if (ends.hop(e, f) != 0.0) ghop[{e, f}] = ends.hop(e, f);
        }
    EndLookup lon{gon}, lhop{ghop};

    BlochBlocks out;
    out.index_map = map;
    out.onsite = Eigen::MatrixXd::Zero(map.size(), map.size());
    out.hop = Eigen::MatrixXd::Zero(map.size(), map.size());
    out.ind_inv.resize(map.size());
    for (int a = 0; a < s; ++a) {
        for (int b = a; b < s; ++b)
            fill_block(out.onsite, lon, a, b, map.row(0, a, 1), map.row(0, b, 1), dev.sites[a].mode_cutoff,
                       dev.sites[b].mode_cutoff, dev.sites[a].c0);
        for (int b = 0; b < s; ++b) {
            double gpp = lhop(2 * a, 2 * b), gpm = lhop(2 * a, 2 * b + 1);
            double gmp = lhop(2 * a + 1, 2 * b), gmm = lhop(2 * a + 1, 2 * b + 1);
            int ra = map.row(0, a, 1), rb = map.row(0, b, 1);
            for (int j1 = 1; j1 <= dev.sites[a].mode_cutoff; ++j1)
                for (int j2 = 1; j2 <= dev.sites[b].mode_cutoff; ++j2)
                    out.hop(ra + j1 - 1, rb + j2 - 1) = mode_entry(gpp, gpm, gmp, gmm, j1, j2);
        }
    }
    for (int r = 0; r < map.size(); ++r) {
        auto t = map.triple(r);
        out.ind_inv[r] = static_cast<double>(t.harmonic) * t.harmonic / dev.sites[t.site].l0;
    }
    return out;
}

Eigen::MatrixXd assemble_from_blocks(const BlochBlocks& blocks, int n_cells, Boundary boundary) {
    const int m = static_cast<int>(blocks.onsite.rows());
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(m * n_cells, m * n_cells);
    for (int n = 0; n < n_cells; ++n) full.block(n * m, n * m, m, m) = blocks.onsite;
    for (int n = 0; n < n_cells; ++n) {
        int next = n + 1;
        if (next == n_cells) {
            if (boundary == Boundary::open) continue;
            next = 0;
        }
        full.block(n * m, next * m, m, m) += blocks.hop;
        full.block(next * m, n * m, m, m) += blocks.hop.transpose();
    }
    return full;
}

Eigen::MatrixXcd bloch_cap(const BlochBlocks& blocks, double k) {
    const int m = static_cast<int>(blocks.onsite.rows());
    const std::complex<double> ph = std::polar(1.0, k);
    Eigen::MatrixXcd c(m, m);
    for (int i = 0; i < m; ++i) {
        c(i, i) = blocks.onsite(i, i) + 2.0 * blocks.hop(i, i) * ph.real();
        for (int j = i + 1; j < m; ++j) {
            std::complex<double> v = blocks.onsite(i, j) + blocks.hop(i, j) * ph + blocks.hop(j, i) * std::conj(ph);
            c(i, j) = v;
            c(j, i) = std::conj(v);
        }
    }
    return c;
}

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m) {
    out << "row,col,value\n";
    char buf[64];
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            if (m(i, j) != 0.0) {
                std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
                out << i << ',' << j << ',' << buf << '\n';
            }
}

}  // namespace cpw
