#pragma once

#include <cstddef>

namespace afc {

/// Uniform Cartesian grid of a rectangular domain [0,Lx] x [0,Ly].
/// Pressure lives at cell centres, u at vertical faces, v at horizontal
/// faces (staggered arrangement).
struct Grid {
    size_t nx = 0;   ///< cell count in x
    size_t ny = 0;   ///< cell count in y
    double Lx = 0.0; ///< domain length
    double Ly = 0.0; ///< domain height

    double dx() const { return Lx / static_cast<double>(nx); }
    double dy() const { return Ly / static_cast<double>(ny); }

    /// Cell-centre coordinates of cell (i, j).
    double xc(size_t i) const { return (static_cast<double>(i) + 0.5) * dx(); }
    double yc(size_t j) const { return (static_cast<double>(j) + 0.5) * dy(); }
    /// Face coordinates: u(i,j) sits at (xu(i), yc(j)), v(i,j) at (xc(i), yv(j)).
    double xu(size_t i) const { return static_cast<double>(i) * dx(); }
    double yv(size_t j) const { return static_cast<double>(j) * dy(); }

    void validate() const;
};

} // namespace afc
