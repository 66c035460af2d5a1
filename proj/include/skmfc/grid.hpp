#pragma once

#include <array>
#include <cstddef>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace skmfc {

/// Uniform periodic grid on the unit torus [0,1)^d, d in {1,2},
/// M nodes per axis (power of two, >= 8), spacing h = 1/M.
/// Node layout is row-major: index = i1*M + i2 for d = 2.
class TorusGrid {
public:
    TorusGrid(int dim, int nodes_per_axis) : d_(dim), m_(nodes_per_axis) {
        if (d_ != 1 && d_ != 2)
            throw std::invalid_argument("TorusGrid: dim must be 1 or 2");
        if (m_ < 8 || (m_ & (m_ - 1)) != 0)
            throw std::invalid_argument(
                "TorusGrid: nodes per axis must be a power of two >= 8, got " + std::to_string(m_));
    }

    int dim() const { return d_; }
    int nodes_per_axis() const { return m_; }
    double spacing() const { return 1.0 / m_; }
    std::size_t size() const { return d_ == 1 ? static_cast<std::size_t>(m_) : static_cast<std::size_t>(m_) * m_; }
    double cell_volume() const { return d_ == 1 ? 1.0 / m_ : 1.0 / (static_cast<double>(m_) * m_); }

    std::array<double, 2> node(std::size_t flat) const {
        const double h = spacing();
        if (d_ == 1) return {static_cast<double>(flat) * h, 0.0};
        return {static_cast<double>(flat / m_) * h, static_cast<double>(flat % m_) * h};
    }

    /// Integer frequency of spectral bin index along one axis, in (-M/2, M/2].
    int frequency(int bin) const { return bin <= m_ / 2 ? bin : bin - m_; }

    /// Frequencies of a flat spectral bin (row-major, same layout as nodes).
    std::array<int, 2> frequencies(std::size_t flat) const {
        if (d_ == 1) return {frequency(static_cast<int>(flat)), 0};
        return {frequency(static_cast<int>(flat / m_)), frequency(static_cast<int>(flat % m_))};
    }

    /// True when every |n_i| < M/2, i.e. the bin lies in the resolved symmetric band
    /// (Nyquist excluded).
    bool in_band(std::size_t flat) const {
        auto n = frequencies(flat);
        if (2 * std::abs(n[0]) >= m_) return false;
        return d_ == 1 || 2 * std::abs(n[1]) < m_;
    }

    friend bool operator==(const TorusGrid& a, const TorusGrid& b) {
        return a.d_ == b.d_ && a.m_ == b.m_;
    }

private:
    int d_;
    int m_;
};

inline void require_same_grid(const TorusGrid& a, const TorusGrid& b, const char* where) {
    if (!(a == b)) throw std::invalid_argument(std::string(where) + ": mismatched grids");
}

/// Wrap a coordinate into [0,1).
inline double wrap_unit(double x) {
    double y = x - static_cast<long long>(x);
    if (y < 0.0) y += 1.0;
    if (y >= 1.0) y -= 1.0;   // guards x = -1e-17 style results
    return y;
}

}  // namespace skmfc
