#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include <fftw3.h>

#include "skmfc/grid.hpp"

namespace skmfc {

/// Fourier coefficient table, same row-major layout as the node values.
/// Bin (k1,k2) holds the coefficient of exp(2*pi*i*(n1*x1+n2*x2)) with
/// n_i = frequency(k_i).
using Spectrum = std::vector<std::complex<double>>;

namespace detail {

// FFTW plans are cached per (dim, M, sign). Plans are created with
// FFTW_UNALIGNED so they can execute on any buffer; creation is serialized,
// execution is thread-safe per FFTW's contract.
class FftPlans {
public:
    static FftPlans& instance() {
        static FftPlans p;
        return p;
    }

    fftw_plan get(int dim, int m, int sign) {
        std::lock_guard<std::mutex> lock(mu_);
        auto key = std::make_tuple(dim, m, sign);
        auto it = plans_.find(key);
        if (it != plans_.end()) return it->second;
        std::size_t n = dim == 1 ? m : static_cast<std::size_t>(m) * m;
        std::vector<std::complex<double>> scratch_in(n), scratch_out(n);
        auto* in = reinterpret_cast<fftw_complex*>(scratch_in.data());
        auto* out = reinterpret_cast<fftw_complex*>(scratch_out.data());
        unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fftw_plan plan = dim == 1 ? fftw_plan_dft_1d(m, in, out, sign, flags)
                                  : fftw_plan_dft_2d(m, m, in, out, sign, flags);
        plans_.emplace(key, plan);
        return plan;
    }

private:
    FftPlans() = default;
    std::mutex mu_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

}  // namespace detail

/// Forward transform of real node values: hat(f)_n = M^-d * sum_m f_m exp(-2*pi*i*n.m/M).
/// Bin 0 therefore carries the grid mean, which equals the integral over the unit torus.
inline Spectrum dft_forward(const TorusGrid& grid, const std::vector<double>& values) {
    const std::size_t n = grid.size();
    if (values.size() != n) throw std::invalid_argument("dft_forward: size mismatch");
    Spectrum in(n), out(n);
    for (std::size_t i = 0; i < n; ++i) in[i] = values[i];
    fftw_plan plan = detail::FftPlans::instance().get(grid.dim(), grid.nodes_per_axis(), FFTW_FORWARD);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    const double scale = grid.cell_volume();
    for (auto& c : out) c *= scale;
    return out;
}

/// Inverse transform; throws if the coefficient table is not Hermitian
/// (real-valued synthesis is required everywhere in this library).
inline std::vector<double> dft_inverse(const TorusGrid& grid, const Spectrum& coeff) {
    const std::size_t n = grid.size();
    if (coeff.size() != n) throw std::invalid_argument("dft_inverse: size mismatch");
    Spectrum in = coeff, out(n);
    fftw_plan plan = detail::FftPlans::instance().get(grid.dim(), grid.nodes_per_axis(), FFTW_BACKWARD);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
    std::vector<double> values(n);
    double max_imag = 0.0, max_abs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        values[i] = out[i].real();
        max_imag = std::max(max_imag, std::abs(out[i].imag()));
        max_abs = std::max(max_abs, std::abs(out[i].real()));
    }
    if (max_imag > 1e-8 * (1.0 + max_abs))
        throw std::invalid_argument("dft_inverse: coefficient table is not Hermitian");
    return values;
}

}  // namespace skmfc
