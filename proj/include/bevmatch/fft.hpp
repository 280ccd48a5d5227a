#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

namespace bevmatch {

/// Iterative radix-2 FFT for power-of-two sizes. Twiddles and the
/// bit-reversal permutation are precomputed per plan; plans are immutable
/// after construction and safe to share across threads.
class FftPlan {
public:
    explicit FftPlan(int n) : n_(n) {
        if (n < 2 || (n & (n - 1)) != 0)
            throw std::invalid_argument("FFT size must be a power of two >= 2");
        log2n_ = 0;
        while ((1 << log2n_) < n) ++log2n_;
        bitrev_.resize(n);
        for (int i = 0; i < n; ++i) {
            int rev = 0;
            for (int b = 0; b < log2n_; ++b)
                if (i & (1 << b)) rev |= 1 << (log2n_ - 1 - b);
            bitrev_[i] = rev;
        }
        twiddle_.resize(n / 2);
        for (int k = 0; k < n / 2; ++k) {
            const double a = -2.0 * 3.14159265358979323846 * k / n;
            twiddle_[k] = {std::cos(a), std::sin(a)};
        }
    }

    int size() const { return n_; }

    /// In-place forward transform of n complex values.
    void forward(std::complex<double>* x) const {
        for (int i = 0; i < n_; ++i) {
            const int j = bitrev_[i];
            if (j > i) std::swap(x[i], x[j]);
        }
        for (int len = 2; len <= n_; len <<= 1) {
            const int half = len >> 1;
            const int stride = n_ / len;
            for (int blk = 0; blk < n_; blk += len) {
                for (int j = 0; j < half; ++j) {
                    const std::complex<double> w = twiddle_[j * stride];
                    const std::complex<double> u = x[blk + j];
                    const std::complex<double> t = w * x[blk + j + half];
                    x[blk + j] = u + t;
                    x[blk + j + half] = u - t;
                }
            }
        }
    }

private:
    int n_ = 0;
    int log2n_ = 0;
    std::vector<int> bitrev_;
    std::vector<std::complex<double>> twiddle_;
};

/// In-place 2D forward FFT of an n x n row-major complex plane.
inline void fft2d(std::vector<std::complex<double>>& plane, const FftPlan& plan) {
    const int n = plan.size();
    for (int r = 0; r < n; ++r) plan.forward(plane.data() + static_cast<std::size_t>(r) * n);
    std::vector<std::complex<double>> col(n);
    for (int c = 0; c < n; ++c) {
        for (int r = 0; r < n; ++r) col[r] = plane[static_cast<std::size_t>(r) * n + c];
        plan.forward(col.data());
        for (int r = 0; r < n; ++r) plane[static_cast<std::size_t>(r) * n + c] = col[r];
    }
}

}  // namespace bevmatch
