#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

#include "skmfc/fft.hpp"
#include "skmfc/grid.hpp"

namespace skmfc {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Real scalar field on a TorusGrid. Immutable: node values and Fourier
/// coefficients are both materialized at construction and never change,
/// so instances can be shared freely. All operations are pure and return
/// new fields.
///
/// Spectral conventions: basis exp(2*pi*i*n.x); differential operators act
/// on the symmetric band |n_i| < M/2 and treat the Nyquist bin as zero, so
/// divergence(gradient(f)) == laplacian(f) holds as an exact operator
/// identity. heat_propagate damps every stored bin (Nyquist included).
class ScalarField {
public:
    ScalarField(TorusGrid grid, std::vector<double> values)
        : grid_(grid), values_(std::move(values)), coeff_(dft_forward(grid_, values_)) {
        if (values_.size() != grid_.size())
            throw std::invalid_argument("ScalarField: values size mismatch");
    }

    static ScalarField constant(const TorusGrid& grid, double c) {
        return ScalarField(grid, std::vector<double>(grid.size(), c));
    }

    static ScalarField from_spectrum(const TorusGrid& grid, Spectrum coeff) {
        auto values = dft_inverse(grid, coeff);
        return ScalarField(grid, std::move(values), std::move(coeff));
    }

    template <class F>
    static ScalarField sample(const TorusGrid& grid, F&& f) {
        std::vector<double> v(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid.node(i));
        return ScalarField(grid, std::move(v));
    }

    const TorusGrid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    const Spectrum& spectrum() const { return coeff_; }

    double min() const { return *std::min_element(values_.begin(), values_.end()); }
    double max() const { return *std::max_element(values_.begin(), values_.end()); }
    double sup_norm() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }
    /// Integral over the torus == grid mean (unit volume).
    double integral() const { return coeff_[0].real(); }

private:
    ScalarField(TorusGrid grid, std::vector<double> values, Spectrum coeff)
        : grid_(std::move(grid)), values_(std::move(values)), coeff_(std::move(coeff)) {}

    TorusGrid grid_;
    std::vector<double> values_;
    Spectrum coeff_;
};

inline const Spectrum& to_spectrum(const ScalarField& f) { return f.spectrum(); }

inline ScalarField from_spectrum(const TorusGrid& grid, Spectrum coeff) {
    return ScalarField::from_spectrum(grid, std::move(coeff));
}

/// d/dx_axis via the multiplier 2*pi*i*n_axis (Nyquist bin zeroed).
inline ScalarField gradient_component(const ScalarField& f, int axis) {
    const TorusGrid& g = f.grid();
    if (axis < 0 || axis >= g.dim()) throw std::invalid_argument("gradient_component: bad axis");
    Spectrum c = f.spectrum();
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!g.in_band(i)) {
            c[i] = 0.0;
            continue;
        }
        auto n = g.frequencies(i);
        c[i] *= std::complex<double>(0.0, two_pi * n[axis]);
    }
    return from_spectrum(g, std::move(c));
}

inline std::vector<ScalarField> gradient(const ScalarField& f) {
    std::vector<ScalarField> out;
    out.reserve(f.grid().dim());
    for (int axis = 0; axis < f.grid().dim(); ++axis) out.push_back(gradient_component(f, axis));
    return out;
}

/// Multiplier -(2*pi)^2 |n|^2 on the resolved band (Nyquist zeroed, matching
/// the gradient so the operator identity with divergence is exact).
inline ScalarField laplacian(const ScalarField& f) {
    const TorusGrid& g = f.grid();
    Spectrum c = f.spectrum();
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!g.in_band(i)) {
            c[i] = 0.0;
            continue;
        }
        auto n = g.frequencies(i);
        double n2 = static_cast<double>(n[0]) * n[0] + static_cast<double>(n[1]) * n[1];
        c[i] *= -two_pi * two_pi * n2;
    }
    return from_spectrum(g, std::move(c));
}

inline ScalarField divergence(const std::vector<ScalarField>& v) {
    if (v.empty()) throw std::invalid_argument("divergence: empty input");
    const TorusGrid& g = v[0].grid();
    if (static_cast<int>(v.size()) != g.dim()) throw std::invalid_argument("divergence: wrong arity");
    Spectrum c(g.size(), 0.0);
    for (int axis = 0; axis < g.dim(); ++axis) {
        require_same_grid(g, v[axis].grid(), "divergence");
        const Spectrum& s = v[axis].spectrum();
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (!g.in_band(i)) continue;
            auto n = g.frequencies(i);
            c[i] += s[i] * std::complex<double>(0.0, two_pi * n[axis]);
        }
    }
    return from_spectrum(g, std::move(c));
}

/// Heat semigroup exp(t/2 * Laplacian): damps bin n by exp(-t/2 (2 pi)^2 |n|^2).
/// Exact semigroup property, mass preserving; t < 0 is rejected.
inline ScalarField heat_propagate(const ScalarField& f, double t) {
    if (t < 0.0) throw std::invalid_argument("heat_propagate: negative time");
    const TorusGrid& g = f.grid();
    Spectrum c = f.spectrum();
    for (std::size_t i = 0; i < c.size(); ++i) {
        auto n = g.frequencies(i);
        double n2 = static_cast<double>(n[0]) * n[0] + static_cast<double>(n[1]) * n[1];
        c[i] *= std::exp(-0.5 * t * two_pi * two_pi * n2);
    }
    return from_spectrum(g, std::move(c));
}

/// <f; mu> for a density mu: grid quadrature h^d sum f*mu, exact for the
/// trigonometric interpolants.
inline double pair_with_density(const ScalarField& f, const ScalarField& mu) {
    require_same_grid(f.grid(), mu.grid(), "pair_with_density");
    const auto& a = f.values();
    const auto& b = mu.values();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * f.grid().cell_volume();
}

namespace detail {

// Trigonometric point evaluation of a coefficient table at x in [0,1)^d.
// The Nyquist frequency M/2 contributes through cos(pi M x), the symmetric
// real interpolant, which coincides with the DFT basis at every node; the
// result is therefore exact at grid nodes for any field. O(M) in d=1,
// O(M^2) in d=2.
inline double evaluate_spectrum(const TorusGrid& g, const Spectrum& c, std::array<double, 2> x) {
    const int m = g.nodes_per_axis();
    const int half = m / 2;
    if (g.dim() == 1) {
        const std::complex<double> w(std::cos(two_pi * x[0]), std::sin(two_pi * x[0]));
        std::complex<double> pw = w;
        double acc = c[0].real();
        for (int n = 1; n < half; ++n) {
            acc += 2.0 * (c[n] * pw).real();   // +n and -n pair of a Hermitian table
            pw *= w;
        }
        acc += c[half].real() * std::cos(two_pi * half * x[0]);
        return acc;
    }
    const std::complex<double> w1(std::cos(two_pi * x[0]), std::sin(two_pi * x[0]));
    const std::complex<double> w2(std::cos(two_pi * x[1]), std::sin(two_pi * x[1]));
    std::vector<std::complex<double>> pw1(half + 1), pw2(half + 1);
    pw1[0] = pw2[0] = 1.0;
    for (int k = 1; k <= half; ++k) {
        pw1[k] = pw1[k - 1] * w1;
        pw2[k] = pw2[k - 1] * w2;
    }
    const double cos1 = std::cos(two_pi * half * x[0]);
    const double cos2 = std::cos(two_pi * half * x[1]);
    std::complex<double> acc = 0.0;
    for (int k1 = 0; k1 < m; ++k1) {
        int n1 = g.frequency(k1);
        std::complex<double> f1 =
            n1 == half ? std::complex<double>(cos1, 0.0) : (n1 >= 0 ? pw1[n1] : conj(pw1[-n1]));
        std::complex<double> row = 0.0;
        for (int k2 = 0; k2 < m; ++k2) {
            int n2 = g.frequency(k2);
            std::complex<double> f2 =
                n2 == half ? std::complex<double>(cos2, 0.0) : (n2 >= 0 ? pw2[n2] : conj(pw2[-n2]));
            row += c[static_cast<std::size_t>(k1) * m + k2] * f2;
        }
        acc += f1 * row;
    }
    return acc.real();
}

}  // namespace detail

/// Evaluation of the field's symmetric trigonometric interpolant at an
/// arbitrary point. Exact at grid nodes.
inline double evaluate(const ScalarField& f, std::array<double, 2> x) {
    return detail::evaluate_spectrum(f.grid(), f.spectrum(), x);
}

inline ScalarField operator+(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid(), b.grid(), "operator+");
    std::vector<double> v(a.values());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += b.values()[i];
    return ScalarField(a.grid(), std::move(v));
}

inline ScalarField operator-(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid(), b.grid(), "operator-");
    std::vector<double> v(a.values());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= b.values()[i];
    return ScalarField(a.grid(), std::move(v));
}

inline ScalarField operator*(double s, const ScalarField& a) {
    std::vector<double> v(a.values());
    for (auto& x : v) x *= s;
    return ScalarField(a.grid(), std::move(v));
}

/// Nodewise product (aliased beyond the band, as usual for pseudo-spectral work).
inline ScalarField nodewise_product(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid(), b.grid(), "nodewise_product");
    std::vector<double> v(a.values());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= b.values()[i];
    return ScalarField(a.grid(), std::move(v));
}

}  // namespace skmfc
