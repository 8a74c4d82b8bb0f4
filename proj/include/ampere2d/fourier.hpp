#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

namespace ampere2d {

/// Real <-> half-complex transform of one angular ring. FFTW planning and
/// execution share internal buffers, so calls are serialized; ring transforms
/// are cheap relative to the radial solves they feed.
class AngularTransform {
  public:
    explicit AngularTransform(int n) : n_(n) {
        std::lock_guard<std::mutex> lock(mutex());
        in_ = fftw_alloc_real(n);
        out_ = fftw_alloc_complex(n / 2 + 1);
        fwd_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_1d(n, out_, in_, FFTW_ESTIMATE);
    }

    ~AngularTransform() {
        std::lock_guard<std::mutex> lock(mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(in_);
        fftw_free(out_);
    }

    AngularTransform(const AngularTransform&) = delete;
    AngularTransform& operator=(const AngularTransform&) = delete;

    int size() const { return n_; }
    int n_modes() const { return n_ / 2 + 1; }

    /// values (n reals) -> normalized coefficients c_m, m = 0..n/2, such that
    /// f(theta_j) = Re(sum_m c_m e^{i m theta_j}) with c_0, c_{n/2} real and
    /// c_m carrying the factor 2 for 0 < m < n/2.
    void forward(const double* values, std::complex<double>* coeff) {
        std::lock_guard<std::mutex> lock(mutex());
        for (int j = 0; j < n_; ++j) in_[j] = values[j];
        fftw_execute(fwd_);
        const double s = 1.0 / n_;
        coeff[0] = {out_[0][0] * s, 0.0};
        for (int m = 1; m < n_ / 2; ++m)
            coeff[m] = {2.0 * out_[m][0] * s, 2.0 * out_[m][1] * s};
        coeff[n_ / 2] = {out_[n_ / 2][0] * s, 0.0};
    }

    void inverse(const std::complex<double>* coeff, double* values) {
        std::lock_guard<std::mutex> lock(mutex());
        out_[0][0] = coeff[0].real();
        out_[0][1] = 0.0;
        for (int m = 1; m < n_ / 2; ++m) {
            out_[m][0] = 0.5 * coeff[m].real();
            out_[m][1] = 0.5 * coeff[m].imag();
        }
        out_[n_ / 2][0] = coeff[n_ / 2].real();
        out_[n_ / 2][1] = 0.0;
        fftw_execute(bwd_);
        for (int j = 0; j < n_; ++j) values[j] = in_[j];
    }

  private:
    static std::mutex& mutex() {
        static std::mutex m;
        return m;
    }

    int n_;
    double* in_;
    fftw_complex* out_;
    fftw_plan fwd_, bwd_;
};

}  // namespace ampere2d
