#pragma once

#include "cpw/device.hpp"
#include "cpw/units.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

namespace cpw::test {

inline std::string device_path(const std::string& name) { return std::string(CPW_DEVICE_DIR) + "/" + name; }

inline ResonatorSpec resonator(const std::string& id, double c0, double l0, int m) {
    ResonatorSpec r;
    r.id = id;
    r.c0 = c0;
    r.l0 = l0;
    r.mode_cutoff = m;
    return r;
}

inline CouplerSpec coupler(int a, Parity pa, int b, Parity pb, double cc, int offset = 0) {
    return CouplerSpec{{a, pa}, {b, pb}, cc, offset};
}

inline DeviceSpec single(double c0, double l0, int m) {
    DeviceSpec d;
    d.sites.push_back(resonator("r0", c0, l0, m));
    return d;
}

inline DeviceSpec dimer(double c0, double l0, double cc, int m, Parity pa = Parity::plus, Parity pb = Parity::plus) {
    DeviceSpec d;
    d.sites.push_back(resonator("a", c0, l0, m));
    d.sites.push_back(resonator("b", c0, l0, m));
    d.couplers.push_back(coupler(0, pa, 1, pb, cc));
    return d;
}

// One site per cell; the + end of cell n couples to the - end of cell n+1.
inline DeviceSpec chain(double c0, double l0, double cc, int m, int cells, Boundary b,
                        Parity pa = Parity::minus, Parity pb = Parity::plus) {
    DeviceSpec d;
    d.sites.push_back(resonator("r", c0, l0, m));
    d.inter_cell.push_back(coupler(0, pa, 0, pb, cc, 1));
    d.n_cells = cells;
    d.boundary = b;
    return d;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Quartic oscillator H = n^2/(2 C) + chi^2/(2 L) - a chi^4 on `levels` Fock
// states of the harmonic part, in units where hbar = 1 and the harmonic
// frequency is `omega_h`. Returns E_12 - E_01 with states picked by overlap.
inline double quartic_oscillator_anharmonicity(double omega_h, double quartic_over_12, int levels = 40) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(levels, levels);
    for (int n = 1; n < levels; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    Eigen::MatrixXd x = a + a.transpose();
    Eigen::MatrixXd x2 = x * x;
    Eigen::MatrixXd h = omega_h * a.transpose() * a - quartic_over_12 * x2 * x2;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    double e[3];
    for (int n = 0; n < 3; ++n) {
        Eigen::Index col;
        es.eigenvectors().row(n).cwiseAbs().maxCoeff(&col);
        e[n] = es.eigenvalues()[col];
    }
    return (e[2] - e[1]) - (e[1] - e[0]);
}

// Normal-mode frequencies of a resonator (C0, L0) coupled through Cc' to a
// linearized transmon (Cq, Lq): the full two-node circuit, no approximations.
inline Eigen::Vector2d two_node_frequencies(double c0, double l0, double ccp, double cq, double lq) {
    Eigen::Matrix2d c;
    c << c0 + ccp, -ccp, -ccp, cq + ccp;
    Eigen::Vector2d s(std::sqrt(l0), std::sqrt(lq));
    Eigen::Matrix2d k = s.asDiagonal() * c * s.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(k);
    Eigen::Vector2d w = es.eigenvalues().cwiseSqrt().cwiseInverse();
    if (w[0] > w[1]) std::swap(w[0], w[1]);
    return w;
}

// Exact single-excitation Jaynes-Cummings shift of the mode at omega_r when
// the qubit sits at omega_r + delta.
inline double jc_exact_shift(double g, double delta) {
    return std::copysign(std::sqrt(0.25 * delta * delta + g * g) - 0.5 * std::abs(delta), delta);
}

}  // namespace cpw::test
