#pragma once

#include "cpw/device.hpp"
#include "cpw/modes.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace cpw {

// Quartic-expanded transmon. Energies are angular frequencies; the quartic
// coefficient and zero-point flux stay in SI units.
struct TransmonParams {
    double ej;           // 2 E_J0 cos(pi flux), rad/s
    double lq;           // H
    double alpha_tilde;  // J / Wb^4
    double c_sigma;      // C_q + C_c', F
    double omega_h;      // 1 / sqrt(C_sigma L_q), rad/s
    double chi_zpf;      // Wb
    double alpha;        // rad/s, >= 0
    double omega_q;      // omega_h - alpha, rad/s
};

TransmonParams transmon_params(const TransmonSpec& spec);

// One coupling entry: (C_c'/2) sqrt(omega^3 Omega / C_sigma) w, where w is the
// mode's bare-flux weight summed over the host harmonics at the coupled end.
double coupling_strength(double cc_prime, double omega_mode, double omega_q, double c_sigma, double weight);

struct CouplingOptions {
    int parallel = 1;
    bool flat_markers = true;  // flat-band membership from Bloch bands (periodic devices)
};

struct CouplingTable {
    std::vector<std::string> qubits;
    std::vector<TransmonParams> params;
    Eigen::MatrixXd g;               // [n_qubits x n_modes], rad/s
    Eigen::VectorXd mode_freqs;      // rad/s
    std::vector<bool> flat;          // mode sits on a flat band
    Eigen::VectorXi parity;          // +1 even, -1 odd, 0 mixed/unknown
};

// Empty `qubits` selects every transmon of the device, in file order.
CouplingTable coupling_table(const DeviceSpec& dev, const NormalModeSet& modes,
                             const std::vector<std::string>& qubits = {}, const CouplingOptions& opts = {});

struct DispersiveShift {
    double shift;  // g^2 / delta
    bool warn;     // |g / delta| > 0.1
};

DispersiveShift dispersive_shift(double g, double delta);

}  // namespace cpw
