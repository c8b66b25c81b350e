#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rsr/common.hpp"

namespace rsr {

struct GridDim {
    double lo = 0.0;
    double hi = 0.0;
    double resolution = 1.0;
};

/** Rectilinear grid over up to kMaxDim dimensions. Node coordinates are
 *  lo + i * (hi - lo) / (n - 1), so both endpoints are exact; n is
 *  floor((hi - lo) / resolution) + 1 with a small guard against fp dust in
 *  the quotient. Flat indices are row-major with the last dimension fastest. */
class Grid {
  public:
    explicit Grid(std::vector<GridDim> dims) : dims_(std::move(dims)) {
        if (dims_.empty() || dims_.size() > static_cast<std::size_t>(kMaxDim))
            throw ValidationError("Grid: dimension count must be in [1," + std::to_string(kMaxDim) + "]");
        size_ = 1;
        for (const auto& d : dims_) {
            if (!(d.lo <= d.hi) || !(d.resolution > 0.0))
                throw ValidationError("Grid: need lo <= hi and resolution > 0");
            const auto n = static_cast<std::size_t>(std::floor((d.hi - d.lo) / d.resolution + 1e-9)) + 1;
            const double last = d.lo + static_cast<double>(n - 1) * d.resolution;
            if (std::abs(last - d.hi) > 1e-6 * std::max(1.0, std::abs(d.hi)))
                throw ValidationError("Grid: range [" + std::to_string(d.lo) + "," + std::to_string(d.hi) +
                                      "] is not a whole number of steps of " + std::to_string(d.resolution));
            npts_.push_back(n);
            spacing_.push_back(n > 1 ? (d.hi - d.lo) / static_cast<double>(n - 1) : 1.0);
            size_ *= n;
        }
    }

    int dim() const { return static_cast<int>(dims_.size()); }
    std::size_t size() const { return size_; }
    std::size_t npts(int k) const { return npts_[k]; }
    double spacing(int k) const { return spacing_[k]; }
    const GridDim& bounds(int k) const { return dims_[k]; }

    double coord(int k, std::size_t i) const {
        if (i + 1 == npts_[k]) return dims_[k].hi;
        return dims_[k].lo + static_cast<double>(i) * spacing_[k];
    }

    std::size_t flatten(const std::array<std::size_t, kMaxDim>& idx) const {
        std::size_t f = 0;
        for (int k = 0; k < dim(); ++k) f = f * npts_[k] + idx[k];
        return f;
    }

    std::array<std::size_t, kMaxDim> unflatten(std::size_t flat) const {
        std::array<std::size_t, kMaxDim> idx{};
        for (int k = dim() - 1; k >= 0; --k) {
            idx[k] = flat % npts_[k];
            flat /= npts_[k];
        }
        return idx;
    }

    Vec node(std::size_t flat) const {
        const auto idx = unflatten(flat);
        Vec x{};
        for (int k = 0; k < dim(); ++k) x[k] = coord(k, idx[k]);
        return x;
    }

    Vec clamp_to_hull(Vec x) const {
        for (int k = 0; k < dim(); ++k) x[k] = clamp(x[k], dims_[k].lo, dims_[k].hi);
        return x;
    }

    /** Flat index of the node nearest to x (x clamped to the hull first). */
    std::size_t nearest(const Vec& x) const {
        std::array<std::size_t, kMaxDim> idx{};
        for (int k = 0; k < dim(); ++k) {
            if (npts_[k] == 1) continue;
            const double t = (clamp(x[k], dims_[k].lo, dims_[k].hi) - dims_[k].lo) / spacing_[k];
            auto i = static_cast<long long>(std::llround(t));
            if (i < 0) i = 0;
            if (i >= static_cast<long long>(npts_[k])) i = static_cast<long long>(npts_[k]) - 1;
            idx[k] = static_cast<std::size_t>(i);
        }
        return flatten(idx);
    }

  private:
    std::vector<GridDim> dims_;
    std::vector<std::size_t> npts_;
    std::vector<double> spacing_;
    std::size_t size_ = 0;
};

/** Multilinear interpolation footprint: at most 2^dim (node, weight) pairs,
 *  nonnegative, summing to one. Fixed capacity, no heap. */
struct InterpWeights {
    std::array<std::pair<std::size_t, double>, (1u << kMaxDim)> entries{};
    int count = 0;

    void push(std::size_t node, double w) {
        entries[count++] = {node, w};
    }
};

/** Multilinear cell weights for a query point, clamped to the hull. A query
 *  exactly on a node returns that node with unit weight; fractional offsets
 *  within 1e-9 of a cell face snap to it so node coordinates computed
 *  elsewhere cannot leak dust weights. */
inline InterpWeights project(const Grid& g, Vec point) {
    const int D = g.dim();
    std::array<std::size_t, kMaxDim> cell{};
    std::array<double, kMaxDim> theta{};
    for (int k = 0; k < D; ++k) {
        const auto n = g.npts(k);
        if (n == 1) {
            cell[k] = 0;
            theta[k] = 0.0;
            continue;
        }
        const double lo = g.bounds(k).lo, hi = g.bounds(k).hi;
        const double x = clamp(point[k], lo, hi);
        double t = (x - lo) / g.spacing(k);
        auto c = static_cast<long long>(std::floor(t));
        if (c < 0) c = 0;
        if (c > static_cast<long long>(n) - 2) c = static_cast<long long>(n) - 2;
        double th = t - static_cast<double>(c);
        if (th < 1e-9) th = 0.0;
        if (th > 1.0 - 1e-9) th = 1.0;
        if (th > 1.0) th = 1.0;
        cell[k] = static_cast<std::size_t>(c);
        theta[k] = th;
    }
    InterpWeights out;
    for (unsigned mask = 0; mask < (1u << D); ++mask) {
        double w = 1.0;
        std::array<std::size_t, kMaxDim> idx{};
        for (int k = 0; k < D; ++k) {
            const bool high = mask & (1u << k);
            w *= high ? theta[k] : 1.0 - theta[k];
            idx[k] = cell[k] + (high ? 1 : 0);
            if (idx[k] >= g.npts(k)) idx[k] = g.npts(k) - 1;
        }
        if (w > 0.0) out.push(g.flatten(idx), w);
    }
    return out;
}

}  // namespace rsr
