#include "doctest.h"

#include "cpw/circuit.hpp"
#include "cpw/errors.hpp"
#include "cpw/modes.hpp"
#include "cpw/transmon.hpp"
#include "support.hpp"

using namespace cpw;
using namespace cpw::test;

namespace {

TransmonSpec qubit(double flux, double ej0_ghz = 20, double cq = 80e-15, double ccp = 2e-15) {
    return TransmonSpec{"q", 0, 0, Parity::plus, cq, units::ghz_to_rad(ej0_ghz), flux, ccp};
}

// A transmon with the given E_J / E_C, where E_C = e^2 / (2 C_sigma hbar).
TransmonSpec with_ratio(double ratio) {
    const double cs = 80e-15;
    const double ec = units::e_charge * units::e_charge / (2 * cs * units::hbar);
    return TransmonSpec{"q", 0, 0, Parity::plus, cs, 0.5 * ratio * ec, 0.0, 0.0};
}

}  // namespace

TEST_SUITE("transmon") {

TEST_CASE("Josephson energy follows the SQUID cosine") {
    CHECK(transmon_params(qubit(0)).ej == doctest::Approx(2 * units::ghz_to_rad(20)).epsilon(1e-15));
    CHECK(transmon_params(qubit(1.0 / 3)).ej == doctest::Approx(units::ghz_to_rad(20)).epsilon(1e-14));
    CHECK(transmon_params(qubit(0)).omega_q > transmon_params(qubit(0.2)).omega_q);
    CHECK_THROWS_AS(transmon_params(qubit(0.5)), FluxSweetSpotError);
    CHECK_THROWS_AS(transmon_params(qubit(0.7)), FluxSweetSpotError);
    CHECK_THROWS_AS(transmon_params(qubit(-1.5)), FluxSweetSpotError);
}

TEST_CASE("parameters are periodic and even in flux") {
    for (double f : {0.0, 0.13, 0.21, 0.37, 0.49}) {
        TransmonParams a = transmon_params(qubit(f));
        for (double g : {f + 2, -f, 4 - f, f - 6}) {
            TransmonParams b = transmon_params(qubit(g));
            CHECK(rel(b.ej, a.ej) < 1e-13);
            CHECK(rel(b.omega_q, a.omega_q) < 1e-13);
            CHECK(rel(b.alpha, a.alpha) < 1e-13);
        }
    }
}

TEST_CASE("inductance, quartic coefficient and zero-point flux") {
    TransmonParams p = transmon_params(qubit(0.1));
    const double two_e = 2 * units::e_charge, hbar = units::hbar;
    const double ej = hbar * p.ej;  // joules
    CHECK(rel(p.lq, hbar * hbar / (two_e * two_e * ej)) < 1e-14);
    CHECK(rel(p.alpha_tilde, std::pow(two_e / hbar, 4) * ej / 24) < 1e-14);
    CHECK(rel(p.c_sigma, 82e-15) < 1e-15);
    CHECK(rel(p.omega_h, 1 / std::sqrt(p.lq * p.c_sigma)) < 1e-14);
    CHECK(rel(p.chi_zpf, std::pow(hbar * hbar * p.lq / (4 * p.c_sigma), 0.25)) < 1e-14);
    CHECK(rel(p.alpha, 12 * p.alpha_tilde * std::pow(p.chi_zpf, 4) / hbar) < 1e-14);
    // The quartic formula reduces to alpha = E_C.
    CHECK(rel(p.alpha, units::e_charge * units::e_charge / (2 * p.c_sigma * hbar)) < 1e-12);
    CHECK(p.alpha > 0);
    CHECK(p.omega_q == doctest::Approx(p.omega_h - p.alpha).epsilon(1e-15));
    CHECK_THROWS_AS(transmon_params(TransmonSpec{"q", 0, 0, Parity::plus, -1e-15, 1e11, 0, 0}), DomainError);
}

TEST_CASE("quartic anharmonicity approaches the truncated-oscillator oracle as E_J / E_C grows") {
    double prev = INFINITY;
    for (double ratio : {100.0, 1e3, 1e4, 1e5}) {
        TransmonParams p = transmon_params(with_ratio(ratio));
        CHECK(rel(p.alpha * ratio, p.ej) < 1e-12);
        double oracle = quartic_oscillator_anharmonicity(p.omega_h, p.alpha / 12, 40);
        double err = std::abs(-oracle / p.alpha - 1);
        CHECK(err < prev);
        prev = err;
        // The leftover is the second-order quartic term, about 5 alpha / omega_h.
        CHECK(err < 6 * p.alpha / p.omega_h);
    }
    CHECK(prev < 0.02);
}

TEST_CASE("coupling normalization: avoided crossing splits by 2 g") {
    const double c0 = 400e-15, l0 = 2e-9, cs = 80e-15;
    for (double ccp : {0.5e-15, 1e-15, 2e-15}) {
        // Linearized transmon tuned onto the loaded resonator.
        const double omega = 1 / std::sqrt(l0 * (c0 + ccp));
        const double lq = 1 / (omega * omega * (cs + ccp));
        Eigen::Vector2d w = two_node_frequencies(c0, l0, ccp, cs, lq);
        double g = coupling_strength(ccp, omega, omega, cs + ccp, std::sqrt(l0));
        CHECK((w[1] - w[0]) / (2 * g) == doctest::Approx(1.0).epsilon(0.01));
    }
}

TEST_CASE("single resonator table reduces to the closed form at M = 1") {
    DeviceSpec d = single(400e-15, 2e-9, 1);
    d.transmons.push_back(qubit(0.1, 20, 80e-15, 2e-15));
    NormalModeSet m = solve_modes(build_matrices(d));
    CouplingTable t = coupling_table(d, m);
    TransmonParams p = transmon_params(d.transmons[0]);
    const double omega = m.freqs[0];
    double expect = 0.5 * 2e-15 * std::sqrt(omega * omega * omega * p.omega_q / p.c_sigma) * std::sqrt(2e-9);
    CHECK(rel(std::abs(t.g(0, 0)), expect) < 1e-12);
    CHECK(t.qubits == std::vector<std::string>{"q"});
    CHECK_THROWS_AS(coupling_table(d, m, {"nope"}), IndexError);
}

TEST_CASE("coupling vanishes linearly with C_c'") {
    DeviceSpec base = with_cutoff(load_device(device_path("quasi1d_lattice.json")), 2);
    auto g_at = [&](double ccp) {
        DeviceSpec d = with_elements(base, 484e-15, 2e-9, 5e-15, ccp);
        return coupling_table(d, solve_modes(build_matrices(d)), {}, {1, false}).g;
    };
    CHECK(g_at(0).cwiseAbs().maxCoeff() == 0.0);
    Eigen::MatrixXd a = g_at(1e-19), b = g_at(2e-19);
    CHECK(b.cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff() == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("on-axis qubit does not couple to odd modes of a mirror-symmetric device") {
    for (int cutoff : {1, 2, 4}) {
        DeviceSpec d = with_cutoff(load_device(device_path("quasi1d_lattice_symmetric.json")), cutoff);
        NormalModeSet m = solve_modes(build_matrices(d));
        CouplingTable t = coupling_table(d, m, {"Q2"}, {1, false});
        const double gmax = t.g.cwiseAbs().maxCoeff();
        int odd = 0;
        for (Eigen::Index i = 0; i < t.g.cols(); ++i)
            if (t.parity[i] == -1) {
                ++odd;
                CHECK(std::abs(t.g(0, i)) <= 1e-9 * gmax);
            }
        CHECK(odd > 0);
    }
}

// The paddle on the vertical rung breaks the mirror at order C_c', so odd
// modes are only approximately dark on the example lattice.
TEST_CASE("flat-band modes are marked and odd flat modes are nearly dark for Q2") {
    DeviceSpec d = with_cutoff(load_device(device_path("quasi1d_lattice.json")), 2);
    NormalModeSet m = solve_modes(build_matrices(d));
    CouplingTable t = coupling_table(d, m);
    REQUIRE(t.qubits.size() == 2);
    int flat = 0;
    for (bool f : t.flat) flat += f;
    CHECK(flat >= 2 * 2 * d.n_cells);  // the bottom flat pair in both families
    const double gmax = t.g.row(1).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < t.g.cols(); ++i)
        if (t.flat[i] && t.parity[i] == -1) CHECK(std::abs(t.g(1, i)) < 1e-2 * gmax);
}

TEST_CASE("sum rule: squared end weights add up to the bare-mode value") {
    DeviceSpec d = with_cutoff(load_device(device_path("quasi1d_lattice.json")), 5);
    NormalModeSet m = solve_modes(build_matrices(d));
    CouplingTable t = coupling_table(d, m, {}, {1, false});
    for (size_t q = 0; q < t.qubits.size(); ++q) {
        const TransmonParams& p = t.params[q];
        const double ccp = d.transmons[q].cc_prime;
        double sum = 0;
        for (Eigen::Index i = 0; i < t.g.cols(); ++i) {
            double w = t.g(static_cast<Eigen::Index>(q), i) / coupling_strength(ccp, m.freqs[i], p.omega_q, p.c_sigma, 1);
            sum += w * w;
        }
        double bare = 0;
        for (int j = 1; j <= 5; ++j) bare += 2e-9 / (j * j);
        CHECK(rel(sum, bare) < 1e-9);
    }
}

TEST_CASE("flux changes only the qubit factor of the table") {
    DeviceSpec d = with_cutoff(load_device(device_path("quasi1d_lattice.json")), 2);
    NormalModeSet m = solve_modes(build_matrices(d));
    CouplingTable a = coupling_table(d, m, {}, {1, false});
    CouplingTable b = coupling_table(with_flux(d, "Q1", 2.0), m, {}, {1, false});
    CHECK((a.g - b.g).cwiseAbs().maxCoeff() <= 1e-13 * a.g.cwiseAbs().maxCoeff());
    CouplingTable c = coupling_table(d, m, {}, {3, false});
    CHECK(a.g == c.g);
}

TEST_CASE("dispersive shift") {
    CHECK(dispersive_shift(0, 1).shift == 0);
    DispersiveShift s = dispersive_shift(units::mhz_to_rad(100), units::ghz_to_rad(1));
    CHECK(rel(s.shift, units::mhz_to_rad(10)) < 1e-14);
    CHECK_FALSE(s.warn);
    CHECK(dispersive_shift(0.2, 1).warn);
    CHECK(dispersive_shift(1, -10).shift == doctest::Approx(-0.1));
    CHECK_THROWS_AS(dispersive_shift(1, 0), DivisionByZero);
    const double g = 0.05, delta = 1.0;
    CHECK(rel(dispersive_shift(g, delta).shift, jc_exact_shift(g, delta)) <= 2 * g * g);
    CHECK(rel(dispersive_shift(g, -delta).shift, jc_exact_shift(g, -delta)) <= 2 * g * g);
}

}  // TEST_SUITE
