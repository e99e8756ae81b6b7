#pragma once

#include "mcsp/matrix.hpp"

namespace mcsp {

// One-sided magnitude spectrum |X_k|, k = 0..floor(L/2), of a real signal.
// Bins are raw DFT magnitudes (no normalization).
Vector dft_magnitude_onesided(const Vector& x);

// Amplitude envelope |analytic(x)| via the Fourier construction of the
// analytic signal (positive frequencies doubled, negative zeroed).
Vector hilbert_envelope(const Vector& x);

} // namespace mcsp
