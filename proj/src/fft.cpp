#include "mcsp/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

namespace mcsp {

namespace {

// FFTW planning is not thread-safe; execution on private buffers is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

} // namespace

Vector dft_magnitude_onesided(const Vector& x) {
    const int n = static_cast<int>(x.size());
    require(n >= 2, "dft_magnitude_onesided: length must be >= 2");
    const int n_bins = n / 2 + 1;

    std::vector<double> in(x.data(), x.data() + n);
    std::vector<fftw_complex> out(static_cast<std::size_t>(n_bins));

    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(plan);
    }

    Vector mag(n_bins);
    for (int k = 0; k < n_bins; ++k) {
        mag[k] = std::hypot(out[static_cast<std::size_t>(k)][0],
                            out[static_cast<std::size_t>(k)][1]);
    }
    return mag;
}

Vector hilbert_envelope(const Vector& x) {
    const int n = static_cast<int>(x.size());
    require(n >= 2, "hilbert_envelope: length must be >= 2");

    std::vector<fftw_complex> buf(static_cast<std::size_t>(n));
    std::vector<fftw_complex> spec(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        buf[static_cast<std::size_t>(i)][0] = x[i];
        buf[static_cast<std::size_t>(i)][1] = 0.0;
    }

    fftw_plan fwd, inv;
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fwd = fftw_plan_dft_1d(n, buf.data(), spec.data(), FFTW_FORWARD, FFTW_ESTIMATE);
        inv = fftw_plan_dft_1d(n, spec.data(), buf.data(), FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(fwd);

    // Analytic-signal mask: keep DC (and Nyquist for even n), double the
    // positive band, zero the negative band.
    const int half = n / 2;
    for (int k = 1; k < (n + 1) / 2; ++k) {
        spec[static_cast<std::size_t>(k)][0] *= 2.0;
        spec[static_cast<std::size_t>(k)][1] *= 2.0;
    }
    for (int k = half + 1; k < n; ++k) {
        spec[static_cast<std::size_t>(k)][0] = 0.0;
        spec[static_cast<std::size_t>(k)][1] = 0.0;
    }

    fftw_execute(inv);
    {
        std::lock_guard<std::mutex> lock(plan_mutex());
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
    }

    Vector env(n);
    const double scale = 1.0 / n;
    for (int i = 0; i < n; ++i) {
        env[i] = std::hypot(buf[static_cast<std::size_t>(i)][0] * scale,
                            buf[static_cast<std::size_t>(i)][1] * scale);
    }
    return env;
}

} // namespace mcsp
