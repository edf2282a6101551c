#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "afc/body.hpp"
#include "afc/field.hpp"
#include "afc/grid.hpp"
#include "afc/poisson.hpp"

namespace afc {

/// Staggered-grid flow state: u on vertical faces (nx+1, ny), v on
/// horizontal faces (nx, ny+1), p at cell centers (nx, ny). Velocities
/// in units of U_inf, pressure in rho U_inf^2, time in D/U_inf.
struct FlowField {
    ScalarField u, v, p;
    double time = 0.0;

    FlowField() = default;
    FlowField(const Grid& grid);
    void validate(const Grid& grid) const;
};

struct SolverConfig {
    double Re = 100.0;          ///< U_inf D / nu
    double U_inf = 1.0;
    double aoa = 0.0;           ///< inflow angle [deg]
    double cfl = 0.4;           ///< fraction of the explicit stability limit
    double poisson_tol = 1e-8;  ///< post-step divergence bound
    int poisson_max_iter = 500;
    bool periodic = false;      ///< fully periodic box (no inflow/outflow)
    PoissonSolver::Precond precond = PoissonSolver::Precond::multigrid;
    /// Direct forcing smears the wall about half a cell outward, so the
    /// classification surface is pulled in by this many cells to keep the
    /// effective diameter at its nominal value.
    double ib_retraction = 0.5;

    void validate() const;
};

/// Largest dt respecting the advective and diffusive explicit limits.
/// Exposed for callers that subdivide an interval into whole steps.
double snapped_dt(double stable, double remaining);

/// Bilinear interpolation of a field whose (i, j) sample sits at
/// (x0 + i dx, y0 + j dy); the stencil is clamped at the array edge.
double bilinear_sample(const ScalarField& f, double x0, double y0, double dx,
                       double dy, double x, double y);

/// 2D incompressible Navier-Stokes: second-order central differences on
/// the staggered grid, explicit two-step (Adams-Bashforth) advection and
/// diffusion, pressure projection, and a direct-forcing immersed cylinder
/// with linear interface interpolation along the surface normal.
class Solver2d {
public:
    Solver2d(const Grid& grid, const SolverConfig& cfg, std::optional<Body> body = {});

    /// Set the jet amplitude used from the next step on.
    /// Throws ActionRangeError outside the slot bound.
    void set_jet(double U_jet);
    double jet() const { return jet_; }

    double stable_dt() const;

    /// Advance one step of size dt (caller keeps dt within stable_dt).
    void step(double dt);

    /// Body force of the last step in coefficient form (C_l, C_d),
    /// from the momentum exchange of the immersed-boundary forcing.
    std::pair<double, double> last_forces() const { return {C_l_, C_d_}; }

    /// Same momentum-exchange evaluation on the current state without
    /// stepping (exact zero for a quiescent field).
    std::pair<double, double> forces_now();

    /// Pressure at probe positions by bilinear interpolation.
    /// Throws LayoutError naming the first probe outside the domain or
    /// inside the body.
    std::vector<double> sample_probes(const std::vector<std::pair<double, double>>& layout) const;

    /// Cell-centered text snapshot (u, v, p, vorticity) with header.
    void save_snapshot(const std::string& path) const;
    /// Restore from a snapshot of the same grid: faces rebuilt from the
    /// centered values, then one projection restores the divergence bound.
    void restore_snapshot(const std::string& path);

    const FlowField& field() const { return field_; }
    FlowField& field() { return field_; }
    const Grid& grid() const { return grid_; }
    const std::optional<Body>& body() const { return body_; }
    long step_count() const { return steps_; }

    /// Max-norm of the discrete divergence of the current velocity.
    double divergence_norm() const;

private:
    enum class ForceKind { interior, interface };
    struct ForcedFace {
        int i, j;
        ForceKind kind;
        double theta;   ///< surface-ray angle at the face
        double w;       ///< interface: blend weight d / h_probe
        double px, py;  ///< interface: fluid probe point on the ray
        double rfac;    ///< interior: R / r falloff (0 near the center)
    };

    void apply_dirichlet_bcs(ScalarField& u, ScalarField& v) const;
    void fill_extended(const ScalarField& u, const ScalarField& v);
    void compute_rhs(const ScalarField& u, const ScalarField& v, ScalarField& ru,
                     ScalarField& rv);
    void outlet_and_wrap(ScalarField& u, ScalarField& v) const;
    void classify_faces();
    /// Impose body/jet targets on the predicted field; returns the
    /// momentum-exchange force sum (Fx, Fy) on the body.
    std::pair<double, double> apply_forcing(ScalarField& u, ScalarField& v, double dt);
    void project(double dt);
    std::pair<double, double> to_coefficients(double Fx, double Fy) const;

    Grid grid_;
    SolverConfig cfg_;
    std::optional<Body> body_;
    FlowField field_;
    PoissonSolver poisson_;

    double jet_ = 0.0;
    double C_l_ = 0.0, C_d_ = 0.0;
    long steps_ = 0;
    bool have_prev_ = false;

    ScalarField ru_, rv_, ru_prev_, rv_prev_;
    ScalarField Ue_, Ve_; // ghost-padded copies for the advection stencil
    ScalarField div_, gx_, gy_;
    std::vector<ForcedFace> forced_u_, forced_v_;
};

/// Momentum-exchange force coefficients of an arbitrary consistent state.
std::pair<double, double> compute_forces(const Grid& grid, const SolverConfig& cfg,
                                         const Body& body, const FlowField& field);

} // namespace afc
