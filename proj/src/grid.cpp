#include "afc/grid.hpp"

#include <cmath>

#include "afc/errors.hpp"

namespace afc {

void Grid::validate() const {
    if (nx < 4 || ny < 4) throw ConfigError("grid: need at least 4 cells per direction");
    if (!(Lx > 0.0) || !(Ly > 0.0)) throw ConfigError("grid: domain extents must be positive");
    const double r = dx() / dy();
    if (r < 0.5 || r > 2.0) throw ConfigError("grid: cell aspect ratio dx/dy outside [0.5, 2]");
}

} // namespace afc
