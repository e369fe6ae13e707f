#pragma once

#include <numbers>

namespace cpw::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// CODATA 2018 exact/defining values, 12 significant digits.
inline constexpr double e_charge = 1.602176634e-19;    // C
inline constexpr double hbar = 1.05457181765e-34;      // J s
inline constexpr double phi0 = 2.06783384846e-15;      // Wb, h/(2e)

inline constexpr double fF = 1e-15;
inline constexpr double nH = 1e-9;

// File-level frequencies are GHz (non-angular); internal values are rad/s.
inline constexpr double ghz_to_rad(double f_ghz) { return two_pi * f_ghz * 1e9; }
inline constexpr double rad_to_ghz(double w) { return w / (two_pi * 1e9); }
inline constexpr double mhz_to_rad(double f_mhz) { return two_pi * f_mhz * 1e6; }
inline constexpr double rad_to_mhz(double w) { return w / (two_pi * 1e6); }

}  // namespace cpw::units
