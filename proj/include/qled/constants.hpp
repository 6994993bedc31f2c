#pragma once

namespace qled {

// hbar in eV*s (CODATA 2018).
inline constexpr double kHbarEvS = 6.582119569e-16;

// Relative HH/VV phase accumulated per (splitting in ueV) x (delay in ps):
// chi = splitting_uev * delay_ps * kPhaseRadPerUevPs.
inline constexpr double kPhaseRadPerUevPs = 1e-18 / kHbarEvS;

// Gaussian FWHM -> sigma.
inline constexpr double kFwhmToSigma = 0.42466090014400953;  // 1 / (2 sqrt(2 ln 2))

}  // namespace qled
