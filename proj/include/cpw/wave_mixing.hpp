#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <string>
#include <vector>

namespace cpw {

// All frequencies, couplings and the pump amplitude are angular (rad/s or any
// consistent angular unit).
struct FwmProblem {
    double omega_q = 0, omega_m = 0, omega_w = 0, omega_p = 0;
    double g_qm = 0, g_qw = 0;
    double alpha = 0;
    double ep = 0;
};

// Delta_x = omega_p - omega_x and Delta_xy = omega_x - omega_y.
struct Detunings {
    double q, m, w;
    double qm, qw, wm;
};

Detunings detunings(const FwmProblem& p);

enum class FwmRegime { tls, transmon, small_alpha };
const char* regime_str(FwmRegime r);

struct FwmValidity {
    double ratio_qw = 0;  // |g_qw / (Delta_q - Delta_w)|
    double ratio_qm = 0;  // |g_qm / (Delta_q - Delta_m)|
    bool perturbative = true;      // both ratios <= 0.1
    bool near_two_photon = false;  // |Delta_qw - alpha| within 10 couplings or drives
    bool weak_drive = true;        // |E_p / Delta_q| <= 0.1
    bool small_alpha = true;       // |alpha / Delta_qw| <= 0.1
};

struct FwmAmplitude {
    std::complex<double> value;
    FwmRegime regime;
    FwmValidity validity;
};

// Pump frequency satisfying omega_m + omega_p = omega_q + omega_w.
double resonant_pump(double omega_q, double omega_m, double omega_w);

FwmAmplitude fwm_amplitude_tls(const FwmProblem& p);
FwmAmplitude fwm_amplitude_transmon(const FwmProblem& p);
FwmAmplitude fwm_amplitude_small_alpha(const FwmProblem& p);

struct FwmOracleResult {
    std::complex<double> overlap;  // <1,1,0|_n E_p (q + q^dag) |0,0,1>_n
    double overlap_001;            // |<0,0,1|0,0,1>_n|
    double overlap_110;
    double coeff_200;              // <2,0,0|1,1,0>_n after the phase convention
    std::array<int, 3> cutoffs;    // (n_q, n_w, n_m)
};

// Exact diagonalization of the rotating-frame Hamiltonian on the truncated
// Fock space (transmon, wave-mixing mode, monitor mode).
FwmOracleResult fwm_oracle_exact(const FwmProblem& p, std::array<int, 3> cutoffs = {3, 3, 3});

struct SaturationCurve {
    std::vector<double> drive;  // E_p
    std::vector<double> p_ee;
    std::vector<double> p_ff;
    double a = 0, b = 0;        // fit or model constants of the curve
};

// P = A B E^2 / (1 + B E^2).
SaturationCurve saturation_pee(const std::vector<double>& ep_grid, double a, double b);
// Same law in the Raman rate E_R = sqrt(2) E_p^2 / (2 |alpha / 2|).
SaturationCurve saturation_pff(const std::vector<double>& ep_grid, double a, double b, double alpha);
double raman_rate(double ep, double alpha);

struct LindbladResult {
    double p_gg, p_ee, p_ff;
    double trace;
};

// Driven, damped three-level ladder in the frame of the pump. `detuning` is
// omega_p - omega_q; the f level sits at 2 omega_q - alpha. Drive matrix
// elements are E_p (g-e) and sqrt(2) E_p (e-f), so the g-e Rabi rate is 2 E_p.
LindbladResult lindblad_steady_state(double ep, double detuning, double alpha, double gamma_e, double gamma_f);

struct SaturationFit {
    double a, b;
    double rms_relative;  // RMS of (model - data) / data
};

// Least squares of 1/P = 1/A + 1/(A B x^2) weighted to relative error.
SaturationFit fit_saturation(const std::vector<double>& x, const std::vector<double>& p);

// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace cpw
