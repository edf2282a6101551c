#pragma once

#include <vector>

#include "afc/field.hpp"
#include "afc/grid.hpp"

namespace afc {

/// Pressure boundary treatment per domain side. Non-periodic sides are
/// zero-Neumann except the east side, which can carry a homogeneous
/// Dirichlet condition (outflow reference pressure).
struct PoissonBcs {
    bool periodic_x = false;
    bool periodic_y = false;
    bool dirichlet_east = false;

    void validate() const;
};

/// Discrete divergence of a staggered face-velocity pair, cell-centered.
void divergence(const Grid& grid, const ScalarField& u, const ScalarField& v,
                ScalarField& out);

/// Conjugate-gradient solver for the cell-centered five-point Laplacian,
/// preconditioned by a geometric multigrid V-cycle (or plain Jacobi).
/// The operator is assembled as divergence of the face gradients produced
/// by pressure_gradients, so a projection using those gradients drives the
/// discrete divergence to the solve residual exactly.
class PoissonSolver {
public:
    enum class Precond { multigrid, jacobi };

    PoissonSolver(const Grid& grid, PoissonBcs bcs, Precond precond = Precond::multigrid);

    /// Solve lap(x) = rhs to |residual|_inf <= tol. On singular
    /// (all-Neumann/periodic) problems the rhs mean is removed first and
    /// the returned field is gauge-fixed to zero mean. An optional x0 of
    /// matching shape warm-starts the iteration.
    /// Throws PoissonError with the residual-history tail on failure.
    ScalarField solve(const ScalarField& rhs, double tol, int max_iter,
                      const ScalarField* x0 = nullptr);

    /// Face gradients of a cell-centered field under the configured
    /// boundary conditions (gx on u-faces, gy on v-faces).
    void pressure_gradients(const ScalarField& p, ScalarField& gx, ScalarField& gy) const;

    /// The exact operator used by solve: divergence of pressure_gradients.
    void apply_laplacian(const ScalarField& x, ScalarField& out) const;

    bool singular() const { return singular_; }
    int last_iterations() const { return last_iterations_; }
    const Grid& grid() const { return grid_; }

private:
    struct Level {
        int nx, ny;
        double dx, dy;
        ScalarField x, rhs, res;
    };

    void level_apply(const Level& lv, const ScalarField& x, ScalarField& out) const;
    void level_smooth(Level& lv, int color) const;
    void v_cycle(size_t l);
    void precondition(const ScalarField& r, ScalarField& z);

    Grid grid_;
    PoissonBcs bcs_;
    Precond precond_;
    bool singular_ = false;
    int last_iterations_ = 0;
    std::vector<Level> levels_;
    ScalarField gx_, gy_; // scratch for apply_laplacian
};

} // namespace afc
