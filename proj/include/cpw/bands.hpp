#pragma once

#include "cpw/device.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace cpw {

struct BandStructure {
    std::vector<double> k_grid;
    Eigen::MatrixXd bands;     // [n_k x n_bands], rad/s, ascending per row
    int harmonic = 1;
    double hopping = 0;        // t of the device when known, rad/s (0 if unknown)
    Eigen::VectorXi parity;    // per band: +1 even, -1 odd, 0 mixed; empty without reflection data
    Eigen::VectorXd localization;  // participation ratio over unit-cell sites; empty if not computed
};

enum class BandSolver { dense, inertia };

struct BandOptions {
    BandSolver solver = BandSolver::inertia;
    int parallel = 1;
    bool classify = true;  // parity and localization from one dense solve per band
};

// k_n = -pi + 2 pi n / count, n = 0 .. count-1.
std::vector<double> uniform_k_grid(int count);

BandStructure bloch_bands(const DeviceSpec& dev, const std::vector<double>& k_grid, int harmonic,
                          const BandOptions& opts = {});

enum class WindowMode { fixed, t_scaled };

struct DosOptions {
    WindowMode mode = WindowMode::t_scaled;
    int harmonic = 2;
    int k_points = 512;
    int energy_points = 400;
    double l0 = 2e-9;              // H
    double onsite = 0;             // target renormalized on-site frequency of `harmonic`; 0 = 2 pi x 10 GHz
    double cc_prime_ratio = 0.5;
    double x_min = -8, x_max = 14; // t-scaled window, units of t around the band centroid
    double e_min = 0, e_max = 0;   // fixed window, rad/s; both 0 selects the band range plus margin
    double sigma_over_t = 1.0 / 50;       // t-scaled broadening
    double sigma = 0;                     // fixed broadening, rad/s; 0 = window / 500
    BandSolver solver = BandSolver::inertia;
    int parallel = 1;
};

struct FlatBandReport {
    int band;
    double center;        // rad/s
    double bandwidth;     // rad/s
    int degeneracy;       // flat bands sharing this center
    std::string parity;   // even, odd, mixed, unknown
    double localization;  // participation ratio, NaN when unknown
    bool nearly_flat;     // bandwidth within [tol, 10 tol]
};

struct DosGrid {
    std::vector<double> t_values;
    Eigen::MatrixXd energies;  // [n_t x n_E], rad/s
    Eigen::MatrixXd dos;       // states per (rad/s) per cell
    WindowMode window_mode = WindowMode::t_scaled;
    std::vector<double> centers;
    std::vector<double> sigmas;
    std::vector<std::vector<FlatBandReport>> flat;  // markers per t
};

DosGrid dos(const DeviceSpec& dev, const std::vector<double>& t_values, const DosOptions& opts = {});

// Broadened density of states of a band set on an energy grid.
Eigen::VectorXd broadened_dos(const Eigen::MatrixXd& bands, const Eigen::VectorXd& energies, double sigma);

// tol <= 0 selects max(1e-9 w_center, 1e-3 t).
std::vector<FlatBandReport> detect_flat_bands(const BandStructure& bs, double tol = 0);

struct GapReport {
    int lower_band;
    double full_gap;  // min over k of band b+1 - band b, rad/s
    double tb_gap;
    bool opened;      // degenerate in TB, gapped in the full circuit
};

std::vector<GapReport> compare_gaps(const BandStructure& full, const BandStructure& tb, double degenerate_tol,
                                    double open_tol);

struct ConvergenceTable {
    std::vector<int> cutoffs;
    std::vector<double> mean_abs;  // rad/s, per cutoff
    std::vector<double> std_abs;   // rad/s, per cutoff
    Eigen::MatrixXd e_inf;         // [n_k x n_bands]
    Eigen::MatrixXd slope;         // a in E(M) = E_inf + a / M
    double fit_rms = 0;            // rad/s, RMS residual of the 1/M fit
    bool residual_ok = false;      // fit_rms < 10% of mean_abs at the smallest cutoff
    bool ratio_ok = false;         // consecutive mean ratios within a factor 2 of 1/M scaling
};

// t > 0 rewrites the elements through invert_hopping with the given on-site target.
ConvergenceTable convergence_study(const DeviceSpec& dev, const std::vector<int>& cutoffs,
                                   const std::vector<double>& k_grid, int harmonic,
                                   std::optional<double> t = std::nullopt, double onsite = 0,
                                   const BandOptions& opts = {});

}  // namespace cpw
