#include "cpw/bands.hpp"

#include "cpw/circuit.hpp"
#include "cpw/errors.hpp"
#include "cpw/modes.hpp"
#include "cpw/parallel.hpp"
#include "cpw/tight_binding.hpp"
#include "cpw/units.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace cpw {

std::vector<double> uniform_k_grid(int count) {
    if (count < 1) throw ValidationError("k grid needs at least one point");
    std::vector<double> k(count);
    for (int n = 0; n < count; ++n) k[n] = -units::pi + 2.0 * units::pi * n / count;
    return k;
}

namespace {

double family_guess(const DeviceSpec& dev, int harmonic) {
    TbModel m = tb_model(dev);
    return harmonic * m.omega0_tilde;
}

// Participation ratio of a unit-cell vector over its sites.
double participation(const Eigen::VectorXcd& v, const IndexMap& map) {
    double sum = 0, sum2 = 0;
    for (int s = 0; s < map.n_sites(); ++s) {
        double p = v.segment(map.site_offset(s), map.cutoff(s)).squaredNorm();
        sum += p;
        sum2 += p * p;
    }
    return sum2 > 0 ? sum * sum / sum2 : 0.0;
}

}  // namespace

BandStructure bloch_bands(const DeviceSpec& dev, const std::vector<double>& k_grid, int harmonic,
                          const BandOptions& opts) {
    if (dev.boundary != Boundary::periodic) throw TopologyError("band structure needs a periodic device");
    for (double k : k_grid)
        if (!(k >= -units::pi && k < units::pi)) throw ValidationError("k values must lie in [-pi, pi)");
    const int s = dev.n_sites();
    for (const auto& r : dev.sites)
        if (r.mode_cutoff < harmonic) throw TrackingError("harmonic " + std::to_string(harmonic) +
                                                          " exceeds a resonator's mode cutoff");
    const int first = (harmonic - 1) * s;
    const int total = make_cell_index_map(dev).size();
    // Index-based families follow the decoupled ordering as long as the
    // neighbouring families stay separated; check one extra eigenvalue on
    // each side.
    const int lo_pad = first > 0 ? 1 : 0;
    const int hi_pad = first + s < total ? 1 : 0;

    BandStructure bs;
    bs.k_grid = k_grid;
    bs.harmonic = harmonic;
    bs.hopping = tb_model(dev).t;
    const int nk = static_cast<int>(k_grid.size());
    Eigen::MatrixXd all(nk, s + lo_pad + hi_pad);

    BlochBlocks blocks;
    std::optional<InertiaSolver> inertia;
    if (opts.solver == BandSolver::dense) blocks = bloch_blocks(dev);
    else inertia.emplace(dev);
    const double guess = family_guess(dev, harmonic);

    parallel_for(nk, opts.parallel, [&](int i) {
        if (opts.solver == BandSolver::dense) {
            BlochSolution sol = solve_bloch(blocks, k_grid[i], false);
            all.row(i) = sol.freqs.segment(first - lo_pad, s + lo_pad + hi_pad).transpose();
        } else {
            all.row(i) = inertia->frequencies(k_grid[i], first - lo_pad, s + lo_pad + hi_pad, guess).transpose();
        }
    });
    bs.bands = all.middleCols(lo_pad, s);
    if (lo_pad && all.col(0).maxCoeff() >= bs.bands.col(0).minCoeff() * (1 - 1e-12))
        throw TrackingError("family " + std::to_string(harmonic) + " overlaps the family below");
    if (hi_pad && all.col(s + lo_pad).minCoeff() <= bs.bands.col(s - 1).maxCoeff() * (1 + 1e-12))
        throw TrackingError("family " + std::to_string(harmonic) + " overlaps the family above");

    std::optional<Reflection> refl = reflection_of(dev);
    if (opts.classify && nk > 0) {
        if (opts.solver != BandSolver::dense) blocks = bloch_blocks(dev);
        IndexMap map = make_cell_index_map(dev);
        Eigen::MatrixXd r;
        if (refl) r = reflection_matrix(dev, *refl, 1);
        // Each band is classified where it is best separated from its neighbours.
        std::vector<int> kstar(s);
        for (int b = 0; b < s; ++b) {
            double best = -1;
            for (int i = 0; i < nk; ++i) {
                double gap = std::numeric_limits<double>::infinity();
                if (b > 0) gap = std::min(gap, bs.bands(i, b) - bs.bands(i, b - 1));
                if (b + 1 < s) gap = std::min(gap, bs.bands(i, b + 1) - bs.bands(i, b));
                if (gap > best * (1 + 1e-9)) {
                    best = gap;
                    kstar[b] = i;
                }
            }
        }
        std::vector<int> distinct = kstar;
        std::sort(distinct.begin(), distinct.end());
        distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
        std::vector<BlochSolution> sols(distinct.size());
        std::vector<Eigen::VectorXi> labels(distinct.size());
        parallel_for(static_cast<int>(distinct.size()), opts.parallel, [&](int i) {
            sols[i] = solve_bloch(blocks, k_grid[distinct[i]], true);
            labels[i] = canonicalize_clusters(sols[i].freqs, sols[i].vecs, refl ? &r : nullptr, 1e-9);
        });
        if (refl) bs.parity.resize(s);
        bs.localization.resize(s);
        for (int b = 0; b < s; ++b) {
            size_t idx = std::lower_bound(distinct.begin(), distinct.end(), kstar[b]) - distinct.begin();
            if (refl) bs.parity[b] = labels[idx][first + b];
            bs.localization[b] = participation(sols[idx].vecs.col(first + b), map);
        }
    }
    return bs;
}

Eigen::VectorXd broadened_dos(const Eigen::MatrixXd& bands, const Eigen::VectorXd& energies, double sigma) {
    const double norm = 1.0 / (sigma * std::sqrt(2.0 * units::pi) * static_cast<double>(bands.rows()));
    Eigen::VectorXd out = Eigen::VectorXd::Zero(energies.size());
    for (Eigen::Index e = 0; e < energies.size(); ++e) {
        double acc = 0;
        for (Eigen::Index i = 0; i < bands.rows(); ++i)
            for (Eigen::Index b = 0; b < bands.cols(); ++b) {
                double x = (energies[e] - bands(i, b)) / sigma;
                if (std::abs(x) < 40) acc += std::exp(-0.5 * x * x);
            }
        out[e] = acc * norm;
    }
    return out;
}

DosGrid dos(const DeviceSpec& dev, const std::vector<double>& t_values, const DosOptions& opts) {
    if (t_values.empty()) throw ValidationError("hopping sweep is empty");
    for (size_t i = 1; i < t_values.size(); ++i)
        if (!(t_values[i] > t_values[i - 1])) throw ValidationError("hopping sweep must be strictly increasing");
    if (opts.k_points < 2 || opts.energy_points < 2) throw ValidationError("k and energy grids need >= 2 points");
    const double onsite = opts.onsite > 0 ? opts.onsite : units::ghz_to_rad(10.0);
    const int nt = static_cast<int>(t_values.size());
    const std::vector<double> kgrid = uniform_k_grid(opts.k_points);

    // Bands at k and -k coincide, so only the non-negative half of the grid
    // (plus k = -pi) is solved.
    std::vector<int> solved, mirror(kgrid.size());
    for (size_t i = 0; i < kgrid.size(); ++i) {
        size_t j = (kgrid.size() - i) % kgrid.size();
        if (kgrid[i] < 0 && i != 0) {
            mirror[i] = -static_cast<int>(j) - 1;
        } else {
            mirror[i] = static_cast<int>(solved.size());
            solved.push_back(static_cast<int>(i));
        }
    }
    std::vector<double> half;
    for (int i : solved) half.push_back(kgrid[i]);

    std::vector<Eigen::MatrixXd> bands(nt);
    std::vector<double> hop(nt);
    for (int it = 0; it < nt; ++it) {
        HoppingTarget target{t_values[it], opts.l0, onsite, opts.harmonic, opts.cc_prime_ratio};
        DeviceSpec d = device_for_hopping(dev, target);
        BandOptions bo{opts.solver, opts.parallel, false};
        BandStructure b = bloch_bands(d, half, opts.harmonic, bo);
        Eigen::MatrixXd full(kgrid.size(), b.bands.cols());
        for (size_t i = 0; i < kgrid.size(); ++i) {
            int m = mirror[i];
            int src = m >= 0 ? m : mirror[-m - 1];
            full.row(static_cast<Eigen::Index>(i)) = b.bands.row(src);
        }
        bands[it] = full;
        hop[it] = t_values[it];
    }

    DosGrid g;
    g.t_values = t_values;
    g.window_mode = opts.mode;
    g.energies.resize(nt, opts.energy_points);
    g.dos.resize(nt, opts.energy_points);
    g.flat.resize(nt);
    double fixed_lo = opts.e_min, fixed_hi = opts.e_max;
    if (opts.mode == WindowMode::fixed && fixed_lo == 0 && fixed_hi == 0) {
        fixed_lo = std::numeric_limits<double>::infinity();
        fixed_hi = -fixed_lo;
        for (const auto& b : bands) {
            fixed_lo = std::min(fixed_lo, b.minCoeff());
            fixed_hi = std::max(fixed_hi, b.maxCoeff());
        }
        double margin = 0.05 * (fixed_hi - fixed_lo) + 5 * t_values.front();
        fixed_lo -= margin;
        fixed_hi += margin;
    }
    if (opts.mode == WindowMode::fixed && !(fixed_hi > fixed_lo)) throw ValidationError("fixed energy window is empty");

    parallel_for(nt, opts.parallel, [&](int it) {
        const double center = bands[it].mean();
        double lo, hi, sigma;
        if (opts.mode == WindowMode::t_scaled) {
            lo = center + opts.x_min * hop[it];
            hi = center + opts.x_max * hop[it];
            sigma = opts.sigma_over_t * hop[it];
        } else {
            lo = fixed_lo;
            hi = fixed_hi;
            sigma = opts.sigma > 0 ? opts.sigma : (hi - lo) / 500.0;
        }
        Eigen::VectorXd e = Eigen::VectorXd::LinSpaced(opts.energy_points, lo, hi);
        g.energies.row(it) = e.transpose();
        g.dos.row(it) = broadened_dos(bands[it], e, sigma).transpose();
        BandStructure bs;
        bs.k_grid = kgrid;
        bs.bands = bands[it];
        bs.harmonic = opts.harmonic;
        bs.hopping = hop[it];
        // Flat markers need a k grid fine enough for the detector.
        if (static_cast<int>(kgrid.size()) >= 64) g.flat[it] = detect_flat_bands(bs);
    });
    for (int it = 0; it < nt; ++it) {
        g.centers.push_back(bands[it].mean());
        g.sigmas.push_back(opts.mode == WindowMode::t_scaled
                               ? opts.sigma_over_t * hop[it]
                               : (opts.sigma > 0 ? opts.sigma : (fixed_hi - fixed_lo) / 500.0));
    }
    return g;
}

std::vector<FlatBandReport> detect_flat_bands(const BandStructure& bs, double tol) {
    if (bs.bands.rows() < 64) throw ValidationError("flat-band detection needs at least 64 k points");
    const Eigen::Index nb = bs.bands.cols();
    if (tol <= 0) {
        double center = bs.bands.mean();
        tol = std::max(1e-9 * center, 1e-3 * bs.hopping);
    }
    std::vector<FlatBandReport> out;
    for (Eigen::Index b = 0; b < nb; ++b) {
        double lo = bs.bands.col(b).minCoeff(), hi = bs.bands.col(b).maxCoeff();
        double width = hi - lo;
        if (width >= 10 * tol) continue;
        FlatBandReport r;
        r.band = static_cast<int>(b);
        r.center = 0.5 * (lo + hi);
        r.bandwidth = width;
        r.nearly_flat = width >= tol;
        r.degeneracy = 1;
        r.localization = bs.localization.size() == nb ? bs.localization[b] : std::numeric_limits<double>::quiet_NaN();
        if (bs.parity.size() != nb) r.parity = "unknown";
        else r.parity = bs.parity[b] > 0 ? "even" : (bs.parity[b] < 0 ? "odd" : "mixed");
        out.push_back(r);
    }
    for (auto& r : out) {
        int n = 0;
        for (const auto& o : out)
            if (std::abs(o.center - r.center) < tol) ++n;
        r.degeneracy = n;
    }
    return out;
}

std::vector<GapReport> compare_gaps(const BandStructure& full, const BandStructure& tb, double degenerate_tol,
                                    double open_tol) {
    if (full.bands.rows() != tb.bands.rows() || full.bands.cols() != tb.bands.cols())
        throw ValidationError("band structures must share the k grid and band count");
    std::vector<GapReport> out;
    for (Eigen::Index b = 0; b + 1 < full.bands.cols(); ++b) {
        GapReport g;
        g.lower_band = static_cast<int>(b);
        g.full_gap = (full.bands.col(b + 1) - full.bands.col(b)).minCoeff();
        g.tb_gap = (tb.bands.col(b + 1) - tb.bands.col(b)).minCoeff();
        g.opened = g.tb_gap < degenerate_tol && g.full_gap > open_tol;
        out.push_back(g);
    }
    return out;
}

ConvergenceTable convergence_study(const DeviceSpec& dev, const std::vector<int>& cutoffs,
                                   const std::vector<double>& k_grid, int harmonic, std::optional<double> t,
                                   double onsite, const BandOptions& opts) {
    if (cutoffs.size() < 3) throw FitError("convergence fit needs at least 3 cutoffs");
    for (size_t i = 1; i < cutoffs.size(); ++i)
        if (cutoffs[i] <= cutoffs[i - 1]) throw ValidationError("cutoffs must be strictly increasing");
    DeviceSpec base = dev;
    if (t) {
        HoppingTarget target{*t, dev.sites[0].l0, onsite > 0 ? onsite : units::ghz_to_rad(10.0), harmonic, 0.5};
        base = device_for_hopping(dev, target);
    }
    BandOptions bo = opts;
    bo.classify = false;
    std::vector<Eigen::MatrixXd> e;
    for (int m : cutoffs) e.push_back(bloch_bands(with_cutoff(base, m), k_grid, harmonic, bo).bands);

    const Eigen::Index nk = e[0].rows(), nb = e[0].cols();
    const size_t nm = cutoffs.size();
    ConvergenceTable out;
    out.cutoffs = cutoffs;
    out.e_inf.resize(nk, nb);
    out.slope.resize(nk, nb);
    // Least squares of E = E_inf + a x with x = 1/M, shared design matrix.
    double sx = 0, sxx = 0;
    for (int m : cutoffs) {
        sx += 1.0 / m;
        sxx += 1.0 / (static_cast<double>(m) * m);
    }
    const double det = nm * sxx - sx * sx;
    double rss = 0;
    for (Eigen::Index i = 0; i < nk; ++i)
        for (Eigen::Index b = 0; b < nb; ++b) {
            // Fit deviations from the largest cutoff to keep the sums well scaled.
            const double ref = e.back()(i, b);
            double sy = 0, sxy = 0;
            for (size_t c = 0; c < nm; ++c) {
                double y = e[c](i, b) - ref, x = 1.0 / cutoffs[c];
                sy += y;
                sxy += x * y;
            }
            double a = (nm * sxy - sx * sy) / det;
            double e0 = (sy - a * sx) / nm;
            out.e_inf(i, b) = ref + e0;
            out.slope(i, b) = a;
            for (size_t c = 0; c < nm; ++c) {
                double r = e[c](i, b) - ref - (e0 + a / cutoffs[c]);
                rss += r * r;
            }
        }
    out.fit_rms = std::sqrt(rss / static_cast<double>(nk * nb * nm));
    for (size_t c = 0; c < nm; ++c) {
        Eigen::ArrayXXd d = (e[c] - out.e_inf).array().abs();
        double mean = d.mean();
        double var = (d - mean).square().mean();
        out.mean_abs.push_back(mean);
        out.std_abs.push_back(std::sqrt(var));
    }
    out.residual_ok = out.fit_rms < 0.1 * out.mean_abs.front();
    out.ratio_ok = true;
    for (size_t c = 0; c + 1 < nm; ++c) {
        double observed = out.mean_abs[c] / out.mean_abs[c + 1];
        double expected = static_cast<double>(cutoffs[c + 1]) / cutoffs[c];
        double q = observed / expected;
        if (!(q >= 0.5 && q <= 2.0)) out.ratio_ok = false;
    }
    return out;
}

}  // namespace cpw
