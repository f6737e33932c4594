#pragma once

// Thin FFTW wrapper. Only fftw_execute is thread safe, so planning and
// destruction go through one mutex.

#include <complex>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "gbar/core.hpp"

namespace gbar::detail {

inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

enum class FftDirection { forward = FFTW_FORWARD, backward = FFTW_BACKWARD };

/// Unnormalised in-place DFT: forward uses exp(-2 pi i jk/N).
inline void fft_in_place(std::vector<std::complex<double>>& data, FftDirection dir) {
    if (data.empty()) return;
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(data.size()), ptr, ptr, static_cast<int>(dir),
                                FFTW_ESTIMATE);
    }
    if (!plan) throw NumericalError("FFTW failed to create a plan");
    fftw_execute(plan);
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
}

/// Signed frequency index of bin j for an N-point transform.
inline long fft_frequency_index(std::size_t j, std::size_t n) {
    return j < (n + 1) / 2 ? static_cast<long>(j) : static_cast<long>(j) - static_cast<long>(n);
}

}  // namespace gbar::detail
