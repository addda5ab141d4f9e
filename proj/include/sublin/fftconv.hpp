#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

#include "sublin/core.hpp"

namespace sublin::fft {

// In-place complex DFT on a row-major array (last axis fastest, matching
// BoxGrid flat order). FFTW_ESTIMATE keeps planning deterministic run-to-run.
inline void dft_inplace(std::vector<std::complex<double>>& data, const std::array<int, 3>& shape, int dim, int sign) {
  std::size_t expect = 1;
  for (int d = 0; d < dim; ++d) expect *= static_cast<std::size_t>(shape[d]);
  if (data.size() != expect) throw std::invalid_argument("dft_inplace: size does not match shape");
  fftw_complex* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan = nullptr;
  if (dim == 1) {
    plan = fftw_plan_dft_1d(shape[0], p, p, sign, FFTW_ESTIMATE);
  } else if (dim == 2) {
    plan = fftw_plan_dft_2d(shape[0], shape[1], p, p, sign, FFTW_ESTIMATE);
  } else {
    plan = fftw_plan_dft_3d(shape[0], shape[1], shape[2], p, p, sign, FFTW_ESTIMATE);
  }
  if (!plan) throw std::runtime_error("dft_inplace: FFTW planning failed");
  fftw_execute(plan);
  fftw_destroy_plan(plan);
}

// Free-space convolution by zero padding to twice the extent per axis
// (Hockney). The kernel spectrum is computed once at construction so repeated
// applications (solver iterations) pay only two transforms each.
class ConvolutionPlan {
 public:
  template <typename KernelAt>
  ConvolutionPlan(const std::array<int, 3>& shape, int dim, KernelAt&& kernel_at) : shape_(shape), dim_(dim) {
    pad_ = {1, 1, 1};
    pad_count_ = 1;
    count_ = 1;
    for (int d = 0; d < dim; ++d) {
      pad_[d] = 2 * shape[d];
      pad_count_ *= static_cast<std::size_t>(pad_[d]);
      count_ *= static_cast<std::size_t>(shape[d]);
    }
    // Kernel slice in wrap-around order: padded index j maps to offset j or
    // j - 2N; the single slot at offset -N is never multiplied by nonzero data.
    kernel_hat_.assign(pad_count_, 0.0);
    std::array<int, 3> idx{0, 0, 0};
    for (std::size_t flat = 0; flat < pad_count_; ++flat) {
      std::size_t rem = flat;
      bool dead = false;
      std::array<int, 3> off{0, 0, 0};
      for (int d = dim - 1; d >= 0; --d) {
        idx[d] = static_cast<int>(rem % static_cast<std::size_t>(pad_[d]));
        rem /= static_cast<std::size_t>(pad_[d]);
        if (idx[d] == shape[d]) dead = true;
        off[d] = idx[d] < shape[d] ? idx[d] : idx[d] - pad_[d];
      }
      kernel_hat_[flat] = dead ? 0.0 : kernel_at(off);
    }
    dft_inplace(kernel_hat_, pad_, dim_, FFTW_FORWARD);
  }

  std::vector<double> apply(const std::vector<double>& density) const {
    if (density.size() != count_) throw std::invalid_argument("ConvolutionPlan: density size mismatch");
    std::vector<std::complex<double>> dens(pad_count_, 0.0);
    std::array<int, 3> idx{0, 0, 0};
    for (std::size_t flat = 0; flat < count_; ++flat) {
      std::size_t rem = flat;
      for (int d = dim_ - 1; d >= 0; --d) {
        idx[d] = static_cast<int>(rem % static_cast<std::size_t>(shape_[d]));
        rem /= static_cast<std::size_t>(shape_[d]);
      }
      dens[pad_flat(idx)] = density[flat];
    }

    dft_inplace(dens, pad_, dim_, FFTW_FORWARD);
    for (std::size_t i = 0; i < pad_count_; ++i) dens[i] *= kernel_hat_[i];
    dft_inplace(dens, pad_, dim_, FFTW_BACKWARD);

    const double scale = 1.0 / static_cast<double>(pad_count_);
    std::vector<double> out(count_);
    for (std::size_t flat = 0; flat < count_; ++flat) {
      std::size_t rem = flat;
      for (int d = dim_ - 1; d >= 0; --d) {
        idx[d] = static_cast<int>(rem % static_cast<std::size_t>(shape_[d]));
        rem /= static_cast<std::size_t>(shape_[d]);
      }
      out[flat] = dens[pad_flat(idx)].real() * scale;
    }
    return out;
  }

 private:
  std::size_t pad_flat(const std::array<int, 3>& idx) const {
    std::size_t f = 0;
    for (int d = 0; d < dim_; ++d) f = f * static_cast<std::size_t>(pad_[d]) + static_cast<std::size_t>(idx[d]);
    return f;
  }

  std::array<int, 3> shape_{1, 1, 1}, pad_{1, 1, 1};
  int dim_ = 2;
  std::size_t pad_count_ = 1, count_ = 1;
  std::vector<std::complex<double>> kernel_hat_;
};

template <typename KernelAt>
std::vector<double> convolve_free(const std::vector<double>& density, const std::array<int, 3>& shape, int dim,
                                  KernelAt&& kernel_at) {
  return ConvolutionPlan(shape, dim, kernel_at).apply(density);
}

}  // namespace sublin::fft
