#include "doctest.h"

#include "cpw/bands.hpp"
#include "cpw/circuit.hpp"
#include "cpw/errors.hpp"
#include "cpw/modes.hpp"
#include "cpw/tight_binding.hpp"
#include "support.hpp"

#include <random>

using namespace cpw;
using namespace cpw::test;

namespace {

DeviceSpec lattice_at(double t_mhz, int cutoff) {
    HoppingTarget tg{units::mhz_to_rad(t_mhz), 2e-9, units::ghz_to_rad(10), 2};
    return with_cutoff(device_for_hopping(load_device(device_path("quasi1d_lattice.json")), tg), cutoff);
}

DeviceSpec triangle(double cc) {
    DeviceSpec d;
    for (const char* id : {"a", "b", "c"}) d.sites.push_back(resonator(id, 400e-15, 2e-9, 2));
    d.couplers.push_back(coupler(0, Parity::plus, 1, Parity::plus, cc));
    d.couplers.push_back(coupler(1, Parity::plus, 2, Parity::plus, cc));
    d.couplers.push_back(coupler(2, Parity::plus, 0, Parity::plus, cc));
    return d;
}

}  // namespace

TEST_SUITE("tight_binding") {

TEST_CASE("hopping closed form") {
    const double c0 = 400e-15, cc = 5e-15, ccp = 2.5e-15, l0 = 2e-9;
    Hopping h = hopping_from_circuit(c0, cc, ccp, l0);
    const double ct = c0 + 4 * cc + ccp;
    CHECK(h.c0_tilde == ct);
    CHECK(rel(h.omega0_tilde, 1 / std::sqrt(ct * l0)) < 1e-15);
    CHECK(rel(h.t, cc / (2 * std::pow(ct, 1.5) * std::sqrt(l0))) < 1e-14);
    CHECK(rel(h.t, cc / (2 * ct) * h.omega0_tilde) < 1e-14);
    CHECK(hopping_from_circuit(c0, 0, ccp, l0).t == 0.0);
    CHECK_THROWS_AS(hopping_from_circuit(-1, cc, ccp, l0), DomainError);
    CHECK_THROWS_AS(hopping_from_circuit(c0, cc, ccp, 0), DomainError);
}

TEST_CASE("5 GHz fundamental with 250 MHz hopping needs Cc / C~0 = 0.1") {
    HoppingTarget tg{units::mhz_to_rad(250), 2e-9, units::ghz_to_rad(5), 1};
    CircuitElements e = invert_hopping(tg);
    Hopping h = hopping_from_circuit(e.c0, e.cc, e.cc_prime, e.l0);
    CHECK(rel(e.cc / h.c0_tilde, 0.1) < 1e-12);
}

TEST_CASE("invert_hopping round-trips and has the decoupled limit") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> frac(1e-5, 0.1), onsite(4, 12), ratio(0, 1);
    for (int i = 0; i < 200; ++i) {
        const int j = 1 + i % 3;
        const double w = units::ghz_to_rad(onsite(rng));
        HoppingTarget tg{frac(rng) * w / j, 1.7e-9, w, j, ratio(rng)};
        CircuitElements e = invert_hopping(tg);
        Hopping h = hopping_from_circuit(e.c0, e.cc, e.cc_prime, e.l0);
        const double w0 = tg.onsite / tg.harmonic;
        CHECK(std::abs(h.t - tg.t) <= 1e-12 * tg.t);
        CHECK(rel(h.omega0_tilde, w0) <= 1e-12);
        CHECK(rel(e.cc_prime, tg.cc_prime_ratio * e.cc) < 1e-15);
    }
    HoppingTarget zero{0, 2e-9, units::ghz_to_rad(10), 2};
    CircuitElements e = invert_hopping(zero);
    CHECK(e.cc == 0);
    CHECK(rel(e.c0, 1 / (2e-9 * std::pow(units::ghz_to_rad(5), 2))) < 1e-14);
}

TEST_CASE("invert_hopping refuses unphysical targets") {
    HoppingTarget tg{units::ghz_to_rad(2.6), 2e-9, units::ghz_to_rad(10), 2};
    CHECK_THROWS_AS(invert_hopping(tg), NoSolutionError);
    tg.t = units::ghz_to_rad(1.2);  // below w0 / 2 but C0 would go negative
    CHECK_THROWS_AS(invert_hopping(tg), NoSolutionError);
    tg.t = -1;
    CHECK_THROWS_AS(invert_hopping(tg), DomainError);
}

TEST_CASE("full solve at 250 MHz puts the full-wave band centre on the 10 GHz target") {
    DeviceSpec d = lattice_at(250, 40);
    BandStructure b = bloch_bands(d, uniform_k_grid(32), 2, {BandSolver::inertia, 1, false});
    // Beyond-TB shifts are second order: (t / w~0)^2 ~ 2.5e-3 of 10 GHz.
    CHECK(std::abs(units::rad_to_ghz(b.bands.mean()) - 10.0) < 0.1);
    DeviceSpec small = lattice_at(2.5, 4);
    BandStructure s = bloch_bands(small, uniform_k_grid(32), 2, {BandSolver::inertia, 1, false});
    CHECK(std::abs(units::rad_to_ghz(s.bands.mean()) - 10.0) < 1e-4);
}

TEST_CASE("triangle has adjacency spectrum {2, -1, -1} times t") {
    TbModel m = tb_model(triangle(1e-15));
    Eigen::VectorXd e = tb_spectrum(m, 1);
    const double w = m.omega0_tilde, t = m.t;
    CHECK(rel(e[0], w - t) < 1e-14);
    CHECK(rel(e[1], w - t) < 1e-14);
    CHECK(rel(e[2], w + 2 * t) < 1e-14);
    Eigen::VectorXd e2 = tb_spectrum(m, 2);
    CHECK(rel(e2[2], 2 * w + 4 * t) < 1e-14);
}

TEST_CASE("two-site sign flip keeps the spectrum and swaps the eigenvectors") {
    DeviceSpec pp = dimer(400e-15, 2e-9, 5e-15, 1), pm = dimer(400e-15, 2e-9, 5e-15, 1, Parity::plus, Parity::minus);
    TbModel a = tb_model(pp), b = tb_model(pm);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(tb_hamiltonian(a, 1)), eb(tb_hamiltonian(b, 1));
    CHECK((ea.eigenvalues() - eb.eigenvalues()).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(rel(ea.eigenvalues()[1] - ea.eigenvalues()[0], 2 * a.t) < 1e-12);
    // Lowest state: antisymmetric for sigma = +1, symmetric for sigma = -1.
    CHECK(ea.eigenvectors()(0, 0) * ea.eigenvectors()(1, 0) < 0);
    CHECK(eb.eigenvectors()(0, 0) * eb.eigenvectors()(1, 0) > 0);
    // Even harmonics see no sign from a minus end.
    CHECK(tb_sigma(b, 2, 0).real()(0, 1) == 1.0);
    CHECK(tb_sigma(b, 1, 0).real()(0, 1) == -1.0);
}

TEST_CASE("spectrum is invariant under a parity gauge transform") {
    DeviceSpec d = load_device(device_path("quasi1d_lattice.json"));
    TbModel m = tb_model(d);
    std::mt19937 rng(3);
    for (int j : {1, 2, 3}) {
        Eigen::MatrixXd h = tb_hamiltonian(m, j);
        Eigen::VectorXd ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h, Eigen::EigenvaluesOnly).eigenvalues();
        for (int trial = 0; trial < 5; ++trial) {
            Eigen::VectorXd s(h.rows());
            for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = (rng() & 1) ? 1.0 : -1.0;
            Eigen::MatrixXd g = s.asDiagonal() * h * s.asDiagonal();
            Eigen::VectorXd e = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g, Eigen::EigenvaluesOnly).eigenvalues();
            CHECK((e - ref).cwiseAbs().maxCoeff() <= 1e-12 * ref.cwiseAbs().maxCoeff());
        }
    }
}

TEST_CASE("sigma is symmetric with entries in {-1, 0, +1} on the finite lattice") {
    DeviceSpec d = load_device(device_path("quasi1d_lattice.json"));
    d.boundary = Boundary::open;
    TbModel m = tb_model(d);
    for (int j : {1, 2}) {
        Eigen::MatrixXd h = tb_hamiltonian(m, j);
        CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
        Eigen::MatrixXd off = h;
        off.diagonal().setZero();
        for (Eigen::Index r = 0; r < off.rows(); ++r)
            for (Eigen::Index c = 0; c < off.cols(); ++c)
                if (off(r, c) != 0) CHECK(std::abs(std::abs(off(r, c)) / (j * m.t) - 1) < 0.05);
    }
}

TEST_CASE("TB bands of the example lattice: flat pair at the bottom, flat middle band, isolated top") {
    TbModel m = tb_model(lattice_at(25, 2));
    BandStructure b = tb_bands(m, uniform_k_grid(64), 2);
    auto width = [&](int c) { return b.bands.col(c).maxCoeff() - b.bands.col(c).minCoeff(); };
    const double t = 2 * m.t;
    CHECK(width(0) < 1e-9 * t);
    CHECK(width(1) < 1e-9 * t);
    CHECK(std::abs(b.bands(0, 0) - b.bands(0, 1)) < 1e-9 * t);
    CHECK(width(3) < 1e-9 * t);
    CHECK(width(2) > 0.1 * t);
    CHECK(width(4) > 0.1 * t);
    CHECK(width(5) > 0.1 * t);
    CHECK(b.bands.col(5).minCoeff() - b.bands.col(4).maxCoeff() > 0.1 * t);
}

TEST_CASE("deviation vanishes without hopping and scales quadratically at small t") {
    DeviceSpec d = with_cutoff(load_device(device_path("quasi1d_lattice.json")), 6);
    // Grounded loading on the + end mixes harmonics by itself, so drop it too.
    DeviceSpec none = with_elements(d, 484e-15, 2e-9, 5e-15, 0);
    for (auto* list : {&none.couplers, &none.inter_cell}) list->clear();
    TbDeviationReport zero = tb_deviation(none, 2, uniform_k_grid(8));
    CHECK(zero.max_abs <= 1e-12 * zero.omega0_tilde);

    TbDeviationReport a = tb_deviation(lattice_at(0.2, 20), 2, uniform_k_grid(16));
    TbDeviationReport b = tb_deviation(lattice_at(0.4, 20), 2, uniform_k_grid(16));
    CHECK(a.bound_applies);
    double ratio = b.max_abs / a.max_abs;
    CHECK(ratio >= 3);
    CHECK(ratio <= 5);
}

TEST_CASE("full-circuit family width follows j t near the TB limit") {
    DeviceSpec d = lattice_at(2.5, 12);
    std::vector<double> k = uniform_k_grid(64);
    TbModel m = tb_model(d);
    for (int j : {1, 2}) {
        BandStructure full = bloch_bands(d, k, j, {BandSolver::inertia, 1, false});
        BandStructure tb = tb_bands(m, k, j);
        double ratio = (full.bands.maxCoeff() - full.bands.minCoeff()) / (tb.bands.maxCoeff() - tb.bands.minCoeff());
        CHECK(std::abs(ratio - 1) < 0.02);
    }
}

TEST_CASE("open finite lattices compare spectra with per-resonator renormalization") {
    DeviceSpec d = lattice_at(2.5, 4);
    d.boundary = Boundary::open;
    d.n_cells = 3;
    for (auto& q : d.transmons) q.cell = 1;
    TbDeviationReport r = tb_deviation(d, 2, {});
    CHECK(r.bands.size() == 18);
    CHECK(r.max_relative < 1e-4);
}

TEST_CASE("hopping for non-uniform degree is refused") {
    DeviceSpec d = dimer(400e-15, 2e-9, 5e-15, 1);
    d.sites.push_back(resonator("c", 400e-15, 2e-9, 1));
    d.couplers.push_back(coupler(1, Parity::minus, 2, Parity::plus, 5e-15));
    HoppingTarget tg{units::mhz_to_rad(10), 2e-9, units::ghz_to_rad(10), 2};
    CHECK_THROWS_AS(device_for_hopping(d, tg), DomainError);
}

}  // TEST_SUITE
