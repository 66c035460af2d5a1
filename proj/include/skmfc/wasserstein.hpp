#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "skmfc/errors.hpp"
#include "skmfc/measure.hpp"

namespace skmfc {

namespace detail {

struct CircleSegments {
    std::vector<double> length;
    std::vector<double> gap;   // F_mu - F_nu on the segment
};

inline CircleSegments cdf_gap_segments(const AtomicMeasure& mu, const AtomicMeasure& nu) {
    struct Event {
        double pos;
        double jump;
    };
    std::vector<Event> ev;
    ev.reserve(mu.size() + nu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) ev.push_back({mu.positions()[i][0], mu.weights()[i]});
    for (std::size_t i = 0; i < nu.size(); ++i) ev.push_back({nu.positions()[i][0], -nu.weights()[i]});
    std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.pos < b.pos; });

    CircleSegments seg;
    double g = 0.0;
    std::size_t i = 0;
    // segment before the first event has gap 0 (both CDFs vanish)
    if (!ev.empty() && ev[0].pos > 0.0) {
        seg.length.push_back(ev[0].pos);
        seg.gap.push_back(0.0);
    }
    while (i < ev.size()) {
        double p = ev[i].pos;
        while (i < ev.size() && ev[i].pos == p) g += ev[i++].jump;
        double next = i < ev.size() ? ev[i].pos : 1.0;
        if (next > p) {
            seg.length.push_back(next - p);
            seg.gap.push_back(g);
        }
    }
    return seg;
}

inline AtomicMeasure density_to_atoms(const ScalarField& density) {
    const TorusGrid& g = density.grid();
    std::vector<std::array<double, 2>> pos;
    std::vector<double> w;
    for (std::size_t i = 0; i < g.size(); ++i) {
        double v = density.values()[i];
        if (v > 0.0) {
            pos.push_back(g.node(i));
            w.push_back(v);
        }
    }
    return AtomicMeasure::normalized(g.dim(), std::move(pos), std::move(w));
}

}  // namespace detail

/// Wasserstein-1 distance on the unit circle:
///     d_1(mu,nu) = min_s int_0^1 | F_mu(x) - F_nu(x) - s | dx,
/// with the minimizing shift s* a length-weighted median of the CDF gap.
/// Exact for atomic inputs. Only d = 1 measures are admissible.
inline double wasserstein1_circle(const AtomicMeasure& mu, const AtomicMeasure& nu) {
    if (mu.dim() != 1 || nu.dim() != 1)
        throw ConfigError("wasserstein1_circle: circle transport needs d = 1");
    auto seg = detail::cdf_gap_segments(mu, nu);
    std::vector<std::size_t> order(seg.gap.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return seg.gap[a] < seg.gap[b]; });
    double cum = 0.0;
    double median = seg.gap[order.back()];
    for (std::size_t i : order) {
        cum += seg.length[i];
        if (cum >= 0.5) {
            median = seg.gap[i];
            break;
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < seg.gap.size(); ++i)
        total += seg.length[i] * std::abs(seg.gap[i] - median);
    return total;
}

/// Grid densities enter through their nodal masses.
inline double wasserstein1_circle(const ScalarField& mu, const ScalarField& nu) {
    return wasserstein1_circle(detail::density_to_atoms(mu), detail::density_to_atoms(nu));
}

}  // namespace skmfc
