#pragma once

#include <complex>
#include <cstring>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

namespace fedus::signal {

namespace detail {

// FFTW planning mutates global state; execution does not.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct PlanDeleter {
    void operator()(fftw_plan p) const {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(p);
    }
};

} // namespace detail

/// Forward real FFT, returns the n/2+1 non-negative frequency bins.
inline std::vector<std::complex<double>> rfft(std::span<const double> x) {
    const int n = static_cast<int>(x.size());
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(x.size() / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                    FFTW_ESTIMATE);
    }
    std::unique_ptr<std::remove_pointer_t<fftw_plan>, detail::PlanDeleter> guard(plan);
    fftw_execute(plan);
    return out;
}

/// Complex FFT in place. Inverse is unnormalized (caller divides by n).
inline void fft_inplace(std::vector<std::complex<double>>& x, bool inverse) {
    const int n = static_cast<int>(x.size());
    auto* data = reinterpret_cast<fftw_complex*>(x.data());
    fftw_plan plan;
    {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_1d(n, data, data, inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    std::unique_ptr<std::remove_pointer_t<fftw_plan>, detail::PlanDeleter> guard(plan);
    fftw_execute(plan);
}

/// Reusable plan for many same-length real transforms (Welch segments).
class RealFftPlan {
public:
    explicit RealFftPlan(std::size_t n)
        : n_(n), in_(n), out_(n / 2 + 1) {
        std::lock_guard lock(detail::fftw_planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.data(),
                                     reinterpret_cast<fftw_complex*>(out_.data()), FFTW_ESTIMATE);
    }
    ~RealFftPlan() { detail::PlanDeleter{}(plan_); }
    RealFftPlan(const RealFftPlan&) = delete;
    RealFftPlan& operator=(const RealFftPlan&) = delete;

    std::span<double> input() { return in_; }
    std::span<const std::complex<double>> execute() {
        fftw_execute(plan_);
        return out_;
    }
    std::size_t size() const noexcept { return n_; }

private:
    std::size_t n_;
    std::vector<double> in_;
    std::vector<std::complex<double>> out_;
    fftw_plan plan_;
};

} // namespace fedus::signal
