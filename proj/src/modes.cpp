#include "cpw/modes.hpp"

#include "cpw/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

namespace cpw {

namespace {

template <class Scalar>
double abs2(Scalar x) {
    return std::norm(std::complex<double>(x));
}

double to_real(double x) { return x; }
double to_real(std::complex<double> x) { return x.real(); }

// Picks basis vectors of span(q) in the order of the unit vectors that they
// resemble best, always taking the earliest unit vector within a factor two
// of the best remaining residual.
template <class Matrix>
Matrix lexicographic_basis(const Matrix& q) {
    using Scalar = typename Matrix::Scalar;
    const Eigen::Index n = q.rows(), m = q.cols();
    Matrix out(n, m);
    std::vector<bool> used(n, false);
    for (Eigen::Index c = 0; c < m; ++c) {
        std::vector<double> res(n, 0.0);
        std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> cand(n);
        double best = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (used[i]) continue;
            Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v = q * q.row(i).adjoint();
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index p = 0; p < c; ++p) v -= out.col(p) * (out.col(p).adjoint() * v)(0);
            res[i] = v.norm();
            cand[i] = std::move(v);
            best = std::max(best, res[i]);
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!used[i] && res[i] >= 0.5 * best) {
                out.col(c) = cand[i] / res[i];
                used[i] = true;
                break;
            }
        }
    }
    return out;
}

template <class Vector>
void fix_sign(Vector&& v) {
    double mx = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) mx = std::max(mx, std::sqrt(abs2(v(i))));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        double a = std::sqrt(abs2(v(i)));
        if (a > 1e-6 * mx) {
            using Scalar = typename std::decay_t<Vector>::Scalar;
            Scalar phase = v(i) / a;
            v /= phase;
            return;
        }
    }
}

}  // namespace

template <class Matrix>
Eigen::VectorXi canonicalize_clusters(const Eigen::VectorXd& values, Matrix& vecs,
                                      const Eigen::MatrixXd* reflection, double rel_gap) {
    using Scalar = typename Matrix::Scalar;
    const Eigen::Index n = values.size();
    Eigen::VectorXi parity = Eigen::VectorXi::Zero(n);
    Eigen::Index begin = 0;
    while (begin < n) {
        Eigen::Index end = begin + 1;
        while (end < n && std::abs(values[end] - values[end - 1]) < rel_gap * 0.5 * (values[end] + values[end - 1]))
            ++end;
        const Eigen::Index m = end - begin;
        Matrix q = vecs.middleCols(begin, m);
        std::vector<Matrix> groups;
        if (reflection) {
            Matrix rq = reflection->template cast<Scalar>() * q;
            Matrix b = q.adjoint() * rq;
            b = (0.5 * (b + b.adjoint())).eval();
            Eigen::SelfAdjointEigenSolver<Matrix> es(b);
            Eigen::Index n_odd = 0;
            while (n_odd < m && es.eigenvalues()[n_odd] < 0) ++n_odd;
            Matrix y = es.eigenvectors();
            if (m - n_odd > 0) groups.push_back(q * y.rightCols(m - n_odd));
            if (n_odd > 0) groups.push_back(q * y.leftCols(n_odd));
        } else {
            groups.push_back(q);
        }
        Eigen::Index col = begin;
        for (const auto& g : groups) {
            Matrix basis = m > 1 ? lexicographic_basis(g) : g;
            for (Eigen::Index c = 0; c < basis.cols(); ++c, ++col) {
                vecs.col(col) = basis.col(c);
                fix_sign(vecs.col(col));
                if (reflection) {
                    auto v = vecs.col(col);
                    double p = to_real((v.adjoint() * (reflection->template cast<Scalar>() * v))(0));
                    parity[col] = p > 0.99 ? 1 : (p < -0.99 ? -1 : 0);
                }
            }
        }
        begin = end;
    }
    return parity;
}

template Eigen::VectorXi canonicalize_clusters<Eigen::MatrixXd>(const Eigen::VectorXd&, Eigen::MatrixXd&,
                                                                const Eigen::MatrixXd*, double);
template Eigen::VectorXi canonicalize_clusters<Eigen::MatrixXcd>(const Eigen::VectorXd&, Eigen::MatrixXcd&,
                                                                 const Eigen::MatrixXd*, double);

Eigen::MatrixXd reflection_matrix(const DeviceSpec& dev, const Reflection& r, int cells) {
    std::vector<int> cut;
    for (const auto& s : dev.sites) cut.push_back(s.mode_cutoff);
    IndexMap map(cut, cells);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(map.size(), map.size());
    for (int row = 0; row < map.size(); ++row) {
        auto t = map.triple(row);
        int target = map.row(t.cell, r.perm[t.site], t.harmonic);
        out(target, row) = r.flip[t.site] ? end_sign(t.harmonic, Parity::minus) : 1.0;
    }
    return out;
}

NormalModeSet solve_modes(const CircuitMatrices& mats) {
    const Eigen::Index n = mats.cap.rows();
    Eigen::VectorXd scale = mats.ind_inv.cwiseSqrt().cwiseInverse();  // L^{-1/2}
    Eigen::MatrixXd k = scale.asDiagonal() * mats.cap * scale.asDiagonal();
    k = (0.5 * (k + k.transpose())).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    if (es.info() != Eigen::Success)
        throw ConvergenceError("symmetric eigensolver failed on K");
    // Eigen returns d ascending, frequencies descend; reverse to ascending frequency.
    Eigen::VectorXd d = es.eigenvalues().reverse();
    Eigen::MatrixXd cols = es.eigenvectors().rowwise().reverse();
    const double dmax = d.maxCoeff();
    if (d.minCoeff() <= 0)
        throw ConvergenceError("K has a non-positive eigenvalue; condition estimate " +
                               std::to_string(dmax / std::abs(d.minCoeff())));
    for (Eigen::Index m = 0; m < n; ++m) {
        double res = (k * cols.col(m) - d[m] * cols.col(m)).norm();
        if (res > 1e-9 * dmax)
            throw ConvergenceError("eigen residual " + std::to_string(res / dmax) +
                                   " exceeds 1e-9; condition estimate " + std::to_string(dmax / d.minCoeff()));
    }

    NormalModeSet out;
    out.d = d;
    out.freqs = d.cwiseSqrt().cwiseInverse();
    std::optional<Reflection> refl = mats.meta ? reflection_of(*mats.meta) : std::nullopt;
    Eigen::MatrixXd r;
    if (refl) r = reflection_matrix(*mats.meta, *refl, mats.meta->n_cells);
    out.parity = canonicalize_clusters(out.freqs, cols, refl ? &r : nullptr, 1e-9);
    out.vecs = cols.transpose();
    out.end_weights = scale.asDiagonal() * cols;
    out.index_map = mats.index_map;
    out.meta = mats.meta;
    return out;
}

double end_flux(const NormalModeSet& modes, int mode_index, int cell, int site, Parity parity) {
    if (mode_index < 0 || mode_index >= modes.freqs.size())
        throw IndexError("mode index " + std::to_string(mode_index) + " out of range");
    if (site < 0 || site >= modes.index_map.n_sites())
        throw IndexError("site " + std::to_string(site) + " out of range");
    double sum = 0.0;
    for (int j = 1; j <= modes.index_map.cutoff(site); ++j)
        sum += end_sign(j, parity) * modes.end_weights(modes.index_map.row(cell, site, j), mode_index);
    return sum;
}

BlochSolution solve_bloch(const BlochBlocks& blocks, double k, bool want_vectors) {
    Eigen::VectorXd scale = blocks.ind_inv.cwiseSqrt().cwiseInverse();
    Eigen::MatrixXcd kk = scale.asDiagonal() * bloch_cap(blocks, k) * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(kk, want_vectors ? Eigen::ComputeEigenvectors
                                                                       : Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw ConvergenceError("Hermitian eigensolver failed on K(k)");
    BlochSolution out;
    Eigen::VectorXd d = es.eigenvalues().reverse();
    if (d.minCoeff() <= 0) throw ConvergenceError("K(k) has a non-positive eigenvalue");
    out.freqs = d.cwiseSqrt().cwiseInverse();
    if (want_vectors) out.vecs = es.eigenvectors().rowwise().reverse();
    return out;
}

InertiaSolver::InertiaSolver(const DeviceSpec& dev) {
    if (dev.boundary != Boundary::periodic) throw TopologyError("Bloch reduction needs a periodic boundary");
    EndCapacitance ends = end_capacitance(dev);
    g_onsite_ = ends.onsite;
    g_hop_ = ends.hop;
    for (const auto& s : dev.sites) {
        sites_.push_back({s.c0, s.l0, s.mode_cutoff});
        total_ += s.mode_cutoff;
    }
}

namespace {

// Square-root factor of the end-capacitance symbol G(k) = R R^H.
Eigen::MatrixXcd end_factor(const Eigen::MatrixXd& on, const Eigen::MatrixXd& hop, double k) {
    const std::complex<double> ph = std::polar(1.0, k);
    Eigen::MatrixXcd g = on.cast<std::complex<double>>() + hop.cast<std::complex<double>>() * ph +
                         hop.transpose().cast<std::complex<double>>() * std::conj(ph);
    g = (0.5 * (g + g.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        if (es.eigenvalues()[i] > 1e-13 * top) keep.push_back(i);
    Eigen::MatrixXcd r(g.rows(), static_cast<Eigen::Index>(keep.size()));
    for (size_t c = 0; c < keep.size(); ++c)
        r.col(c) = es.eigenvectors().col(keep[c]) * std::sqrt(es.eigenvalues()[keep[c]]);
    return r;
}

}  // namespace

// neg(L - w^2 C) = neg(D) + neg(I - w^2 R^H F R) with D = L - w^2 C0 and
// F = U^H D^{-1} U, a 2x2 block per resonator built from oscillator sums.
static int inertia_count(const std::vector<double>& c0, const std::vector<double>& l0,
                         const std::vector<int>& cutoff, const Eigen::MatrixXcd& r, double omega) {
    const double lam = omega * omega;
    const int s = static_cast<int>(c0.size());
    int neg = 0;
    Eigen::VectorXd fa(s), fb(s);
    for (int i = 0; i < s; ++i) {
        double a = 0.0, b = 0.0;
        for (int j = 1; j <= cutoff[i]; ++j) {
            double dj = static_cast<double>(j) * j / l0[i] - lam * c0[i];
            if (dj < 0) ++neg;
            double inv = 1.0 / dj;
            a += inv;
            b += (j % 2 == 0) ? inv : -inv;
        }
        fa[i] = a;
        fb[i] = b;
    }
    const Eigen::Index rank = r.cols();
    if (rank == 0) return neg;  // no end capacitance at all
    Eigen::MatrixXcd fr(r.rows(), rank);
    for (int i = 0; i < s; ++i) {
        fr.row(2 * i) = fa[i] * r.row(2 * i) + fb[i] * r.row(2 * i + 1);
        fr.row(2 * i + 1) = fb[i] * r.row(2 * i) + fa[i] * r.row(2 * i + 1);
    }
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(rank, rank) - lam * (r.adjoint() * fr);
    m = (0.5 * (m + m.adjoint())).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    for (Eigen::Index i = 0; i < rank; ++i)
        if (es.eigenvalues()[i] < 0) ++neg;
    return neg;
}

namespace {

struct CountContext {
    std::vector<double> c0, l0;
    std::vector<int> cutoff;
    Eigen::MatrixXcd r;

    int operator()(double omega) const {
        // Exactly hitting an uncoupled resonance makes D singular; step off it.
        for (size_t i = 0; i < c0.size(); ++i)
            for (int j = 1; j <= cutoff[i]; ++j)
                if (static_cast<double>(j) * j / l0[i] == omega * omega * c0[i]) omega = std::nextafter(omega, HUGE_VAL);
        return inertia_count(c0, l0, cutoff, r, omega);
    }
};

}  // namespace

int InertiaSolver::count_below(double omega, double k) const {
    CountContext ctx;
    for (const auto& s : sites_) {
        ctx.c0.push_back(s.c0);
        ctx.l0.push_back(s.l0);
        ctx.cutoff.push_back(s.cutoff);
    }
    ctx.r = end_factor(g_onsite_, g_hop_, k);
    return ctx(omega);
}

Eigen::VectorXd InertiaSolver::frequencies(double k, int first, int count, double guess) const {
    if (first < 0 || count < 0 || first + count > total_) throw IndexError("eigenvalue index range out of bounds");
    CountContext ctx;
    for (const auto& s : sites_) {
        ctx.c0.push_back(s.c0);
        ctx.l0.push_back(s.l0);
        ctx.cutoff.push_back(s.cutoff);
    }
    ctx.r = end_factor(g_onsite_, g_hop_, k);

    double lo = guess, hi = guess;
    while (ctx(lo) > first) lo *= 0.9;
    while (ctx(hi) < first + count) hi *= 1.1;
    std::vector<double> los(count, lo), his(count, hi);
    for (int i = 0; i < count; ++i) {
        while (true) {
            double a = los[i], b = his[i];
            double mid = 0.5 * (a + b);
            if (mid <= a || mid >= b || b - a <= 2e-16 * b) break;
            int c = ctx(mid);
            // Every count tightens all brackets it speaks about.
            for (int p = i; p < count; ++p) {
                if (first + p < c) his[p] = std::min(his[p], mid);
                else los[p] = std::max(los[p], mid);
            }
        }
    }
    Eigen::VectorXd out(count);
    for (int i = 0; i < count; ++i) out[i] = 0.5 * (los[i] + his[i]);
    return out;
}

}  // namespace cpw
