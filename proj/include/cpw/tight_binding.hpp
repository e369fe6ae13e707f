#pragma once

#include "cpw/bands.hpp"
#include "cpw/device.hpp"

#include <Eigen/Dense>

#include <vector>

namespace cpw {

struct Hopping {
    double t;             // rad/s
    double omega0_tilde;  // renormalized fundamental, rad/s
    double c0_tilde;      // renormalized capacitance, F
};

// t = Cc / (2 C~0^{3/2} L0^{1/2}) with C~0 = C0 + degree Cc + Cc'.
Hopping hopping_from_circuit(double c0, double cc, double cc_prime, double l0, int degree = 4);

struct CircuitElements {
    double c0, cc, cc_prime, l0;
};

struct HoppingTarget {
    double t;            // rad/s
    double l0;           // H
    double onsite;       // renormalized on-site frequency of `harmonic`, rad/s
    int harmonic = 2;
    double cc_prime_ratio = 0.5;
    int degree = 4;
};

// Elements giving the requested hopping and renormalized on-site frequency.
CircuitElements invert_hopping(const HoppingTarget& target);

// Device with every resonator and coupler rewritten to hit the target.
DeviceSpec device_for_hopping(const DeviceSpec& dev, const HoppingTarget& target);

// Nearest-neighbour model of one harmonic family. Site-resolved on-site
// frequencies and bond hoppings reduce to j w~0 and j t sigma for uniform
// devices.
struct TbModel {
    struct Bond {
        int a, b;        // unit-cell sites
        int offset;      // cell of b relative to a
        double t_unit;   // bulk hopping for j = 1 without end signs, rad/s
        Parity pa, pb;
        double cc;       // F
    };
    std::vector<double> onsite;  // bulk w~0 per site, rad/s
    std::vector<double> c0, l0, load;
    std::vector<Bond> bonds;
    double omega0_tilde = 0;     // mean over sites
    double t = 0;                // mean |t_unit| over bonds
    int n_cells = 1;
    Boundary boundary = Boundary::open;
};

TbModel tb_model(const DeviceSpec& dev);

// sigma^(j) entries s_a(j) s_b(j) for a single cell at momentum k.
Eigen::MatrixXcd tb_sigma(const TbModel& model, int harmonic, double k);

// Hamiltonian of harmonic j at momentum k, and of the finite lattice.
Eigen::MatrixXcd tb_bloch_hamiltonian(const TbModel& model, int harmonic, double k);
Eigen::MatrixXd tb_hamiltonian(const TbModel& model, int harmonic);

// Eigenfrequencies of j w~0 + j t sigma^(j) on the finite lattice, ascending.
Eigen::VectorXd tb_spectrum(const TbModel& model, int harmonic);

BandStructure tb_bands(const TbModel& model, const std::vector<double>& k_grid, int harmonic);

struct BandDeviation {
    int band;
    double max_abs;        // rad/s
    double full_width;     // rad/s
    double tb_width;       // rad/s
    double width_ratio;    // full / tb, NaN when tb is flat
};

struct TbDeviationReport {
    int harmonic;
    double t;
    double omega0_tilde;
    std::vector<BandDeviation> bands;
    double max_abs;
    double max_relative;      // max |delta| / (j w~0)
    double bound;             // 5 (t / w~0)^2 + 1e-9
    bool bound_applies;       // Cc / C0 <= 1e-4
    bool within_bound;
};

// Full circuit against the TB model. Periodic devices compare Bloch bands on
// k_grid; open devices compare finite spectra.
TbDeviationReport tb_deviation(const DeviceSpec& dev, int harmonic, const std::vector<double>& k_grid,
                               const BandOptions& opts = {});

}  // namespace cpw
