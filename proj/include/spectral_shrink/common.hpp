#pragma once

namespace spectral_shrink {

// Absolute tolerance for closed-form identities (round trips, residuals).
inline constexpr double kClosedFormTol = 1e-12;

// Orthonormality tolerance accepted when validating external eigensystems.
inline constexpr double kOrthonormalTol = 1e-8;

// Maximum absolute asymmetry accepted in a "symmetric" matrix input.
inline constexpr double kSymmetryTol = 1e-8;

// Default tolerance for scalar minimization of 2x2 losses.
inline constexpr double kMinimizeTol = 1e-10;

// Default tolerance for bracketed root finding.
inline constexpr double kRootTol = 1e-12;

}  // namespace spectral_shrink
