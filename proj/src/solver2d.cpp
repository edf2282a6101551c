#include "afc/solver2d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "afc/errors.hpp"

namespace afc {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

FlowField::FlowField(const Grid& grid)
    : u(static_cast<int>(grid.nx) + 1, static_cast<int>(grid.ny)),
      v(static_cast<int>(grid.nx), static_cast<int>(grid.ny) + 1),
      p(static_cast<int>(grid.nx), static_cast<int>(grid.ny)) {}

void FlowField::validate(const Grid& grid) const {
    const int nx = static_cast<int>(grid.nx), ny = static_cast<int>(grid.ny);
    if (u.nx() != nx + 1 || u.ny() != ny || v.nx() != nx || v.ny() != ny + 1 ||
        p.nx() != nx || p.ny() != ny)
        throw ConfigError("flow field: array shapes do not match the grid staggering");
}

void SolverConfig::validate() const {
    if (!(Re > 0.0)) throw ConfigError("solver: Re must be positive");
    if (!(U_inf > 0.0)) throw ConfigError("solver: U_inf must be positive");
    if (!(cfl > 0.0 && cfl <= 0.9)) throw ConfigError("solver: cfl must lie in (0, 0.9]");
    if (!(poisson_tol > 0.0)) throw ConfigError("solver: poisson_tol must be positive");
    if (poisson_max_iter < 1) throw ConfigError("solver: poisson_max_iter must be >= 1");
    if (!(ib_retraction >= 0.0 && ib_retraction <= 1.0))
        throw ConfigError("solver: ib_retraction must lie in [0, 1] cells");
}

double snapped_dt(double stable, double remaining) {
    if (!(stable > 0.0) || !(remaining > 0.0))
        throw ConfigError("snapped_dt: arguments must be positive");
    if (remaining <= stable) return remaining;
    const double n = std::ceil(remaining / stable);
    return remaining / n;
}

double bilinear_sample(const ScalarField& f, double x0, double y0, double dx,
                       double dy, double x, double y) {
    const double fx = (x - x0) / dx, fy = (y - y0) / dy;
    int i0 = static_cast<int>(std::floor(fx));
    int j0 = static_cast<int>(std::floor(fy));
    i0 = std::clamp(i0, 0, f.nx() - 2);
    j0 = std::clamp(j0, 0, f.ny() - 2);
    const double ax = fx - i0, ay = fy - j0;
    return (1.0 - ax) * (1.0 - ay) * f(i0, j0) + ax * (1.0 - ay) * f(i0 + 1, j0) +
           (1.0 - ax) * ay * f(i0, j0 + 1) + ax * ay * f(i0 + 1, j0 + 1);
}

Solver2d::Solver2d(const Grid& grid, const SolverConfig& cfg, std::optional<Body> body)
    : grid_(grid), cfg_(cfg), body_(std::move(body)), field_(grid),
      poisson_(grid,
               cfg.periodic ? PoissonBcs{true, true, false} : PoissonBcs{false, false, true},
               cfg.precond),
      ru_(static_cast<int>(grid.nx) + 1, static_cast<int>(grid.ny)),
      rv_(static_cast<int>(grid.nx), static_cast<int>(grid.ny) + 1),
      ru_prev_(static_cast<int>(grid.nx) + 1, static_cast<int>(grid.ny)),
      rv_prev_(static_cast<int>(grid.nx), static_cast<int>(grid.ny) + 1),
      Ue_(static_cast<int>(grid.nx) + 3, static_cast<int>(grid.ny) + 2),
      Ve_(static_cast<int>(grid.nx) + 2, static_cast<int>(grid.ny) + 3),
      div_(static_cast<int>(grid.nx), static_cast<int>(grid.ny)),
      gx_(static_cast<int>(grid.nx) + 1, static_cast<int>(grid.ny)),
      gy_(static_cast<int>(grid.nx), static_cast<int>(grid.ny) + 1) {
    grid_.validate();
    cfg_.validate();
    if (grid_.nx < 8 || grid_.ny < 8)
        throw ConfigError("solver: need at least 8 cells per direction");
    if (body_) {
        body_->validate();
        const double margin = body_->radius() + 2.0 * body_->D;
        if (body_->xc < margin || body_->xc > grid_.Lx - margin || body_->yc < margin ||
            body_->yc > grid_.Ly - margin)
            throw ConfigError("solver: body needs two diameters of clearance to every boundary");
        classify_faces();
    }

    const double a = cfg_.aoa * kPi / 180.0;
    field_.u.fill(cfg_.U_inf * std::cos(a));
    field_.v.fill(cfg_.U_inf * std::sin(a));
    apply_dirichlet_bcs(field_.u, field_.v);
}

void Solver2d::set_jet(double U_jet) {
    if (!body_) throw ConfigError("solver: no body to actuate");
    if (!std::isfinite(U_jet) || std::abs(U_jet) > body_->jets.max_speed)
        throw ActionRangeError("jet amplitude outside [-max_speed, max_speed]");
    jet_ = U_jet;
}

double Solver2d::stable_dt() const {
    const double dx = grid_.dx(), dy = grid_.dy();
    const double umax = std::max(field_.u.max_abs(), 1e-12);
    const double vmax = std::max(field_.v.max_abs(), 1e-12);
    const double adv = std::min(dx / umax, dy / vmax);
    const double nu = cfg_.U_inf / cfg_.Re;
    const double diff = 0.5 / (nu * (1.0 / (dx * dx) + 1.0 / (dy * dy)));
    return cfg_.cfl * std::min(adv, diff);
}

void Solver2d::apply_dirichlet_bcs(ScalarField& u, ScalarField& v) const {
    if (cfg_.periodic) return;
    const int nx = static_cast<int>(grid_.nx), ny = static_cast<int>(grid_.ny);
    const double a = cfg_.aoa * kPi / 180.0;
    const double u_in = cfg_.U_inf * std::cos(a);
    const double v_in = cfg_.U_inf * std::sin(a);
    for (int j = 0; j < ny; ++j) u(0, j) = u_in;
    for (int i = 0; i < nx; ++i) {
        v(i, 0) = v_in;
        v(i, ny) = v_in;
    }
}

void Solver2d::fill_extended(const ScalarField& u, const ScalarField& v) {
    const int nx = static_cast<int>(grid_.nx), ny = static_cast<int>(grid_.ny);
    // Logical indices: Ue_(i+1, j+1) = u(i, j), Ve_(i+1, j+1) = v(i, j).
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i <= nx; ++i) Ue_(i + 1, j + 1) = u(i, j);
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i < nx; ++i) Ve_(i + 1, j + 1) = v(i, j);

    if (cfg_.periodic) {
        for (int j = 0; j < ny; ++j) {
            Ue_(0, j + 1) = u(nx - 1, j);
            Ue_(nx + 2, j + 1) = u(1, j);
        }
        for (int i = 0; i < nx + 3; ++i) {
            Ue_(i, 0) = Ue_(i, ny);
            Ue_(i, ny + 1) = Ue_(i, 1);
        }
        for (int i = 1; i <= nx; ++i) {
            Ve_(i, 0) = Ve_(i, ny);
            Ve_(i, ny + 2) = Ve_(i, 2);
        }
        for (int jj = 0; jj < ny + 3; ++jj) {
            Ve_(0, jj) = Ve_(nx, jj);
            Ve_(nx + 1, jj) = Ve_(1, jj);
        }
    } else {
        const double a = cfg_.aoa * kPi / 180.0;
        const double v_in = cfg_.U_inf * std::sin(a);
        for (int j = 0; j < ny; ++j) {
            Ue_(0, j + 1) = u(0, j);
            Ue_(nx + 2, j + 1) = u(nx, j);
        }
        // Free-slip walls: zero normal gradient of the tangential velocity.
        for (int i = 0; i < nx + 3; ++i) {
            Ue_(i, 0) = Ue_(i, 1);
            Ue_(i, ny + 1) = Ue_(i, ny);
        }
        for (int jj = 1; jj <= ny + 1; ++jj) {
            Ve_(0, jj) = 2.0 * v_in - Ve_(1, jj); // inlet Dirichlet mirror
            Ve_(nx + 1, jj) = Ve_(nx, jj);        // outlet zero gradient
        }
        for (int i = 0; i < nx + 2; ++i) {
            Ve_(i, 0) = Ve_(i, 1);
            Ve_(i, ny + 2) = Ve_(i, ny + 1);
        }
    }
}

void Solver2d::compute_rhs(const ScalarField& u, const ScalarField& v, ScalarField& ru,
                           ScalarField& rv) {
    fill_extended(u, v);
    const int nx = static_cast<int>(grid_.nx), ny = static_cast<int>(grid_.ny);
    const double dx = grid_.dx(), dy = grid_.dy();
    const double idx = 1.0 / dx, idy = 1.0 / dy;
    const double ix2 = idx * idx, iy2 = idy * idy;
    const double nu = cfg_.U_inf / cfg_.Re;

    auto U = [&](int i, int j) -> double { return Ue_(i + 1, j + 1); };
    auto V = [&](int i, int j) -> double { return Ve_(i + 1, j + 1); };

    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            const double uc = U(i, j);
            const double ue = 0.5 * (uc + U(i + 1, j)), uw = 0.5 * (U(i - 1, j) + uc);
            const double un = 0.5 * (uc + U(i, j + 1)), us = 0.5 * (U(i, j - 1) + uc);
            const double vn = 0.5 * (V(i - 1, j + 1) + V(i, j + 1));
            const double vs = 0.5 * (V(i - 1, j) + V(i, j));
            const double conv = (ue * ue - uw * uw) * idx + (un * vn - us * vs) * idy;
            const double diff = nu * ((U(i + 1, j) - 2.0 * uc + U(i - 1, j)) * ix2 +
                                      (U(i, j + 1) - 2.0 * uc + U(i, j - 1)) * iy2);
            ru(i, j) = -conv + diff;
        }
    }
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double vc = V(i, j);
            const double vn = 0.5 * (vc + V(i, j + 1)), vs = 0.5 * (V(i, j - 1) + vc);
            const double ve = 0.5 * (vc + V(i + 1, j)), vw = 0.5 * (V(i - 1, j) + vc);
            const double ue = 0.5 * (U(i + 1, j - 1) + U(i + 1, j));
            const double uw = 0.5 * (U(i, j - 1) + U(i, j));
            const double conv = (ue * ve - uw * vw) * idx + (vn * vn - vs * vs) * idy;
            const double diff = nu * ((V(i + 1, j) - 2.0 * vc + V(i - 1, j)) * ix2 +
                                      (V(i, j + 1) - 2.0 * vc + V(i, j - 1)) * iy2);
            rv(i, j) = -conv + diff;
        }
    }
}

void Solver2d::outlet_and_wrap(ScalarField& u, ScalarField& v) const {
    const int nx = static_cast<int>(grid_.nx), ny = static_cast<int>(grid_.ny);
    if (cfg_.periodic) {
        for (int j = 0; j < ny; ++j) u(nx, j) = u(0, j);
        for (int i = 0; i < nx; ++i) v(i, ny) = v(i, 0);
        return;
    }
    const double dx = grid_.dx(), dy = grid_.dy();
    for (int j = 0; j < ny; ++j) u(nx, j) = u(nx - 1, j);
    // Uniform outflow correction enforcing global mass balance.
    double Qin = 0.0, Qout = 0.0;
    for (int j = 0; j < ny; ++j) Qin += u(0, j);
    Qin *= dy;
    for (int i = 0; i < nx; ++i) Qin += (v(i, 0) - v(i, ny)) * dx;
    for (int j = 0; j < ny; ++j) Qout += u(nx, j);
    Qout *= dy;
    const double corr = (Qin - Qout) / (static_cast<double>(ny) * dy);
    for (int j = 0; j < ny; ++j) u(nx, j) += corr;
}

void Solver2d::classify_faces() {
    const Body& b = *body_;
    const int nx = static_cast<int>(grid_.nx), ny = static_cast<int>(grid_.ny);
    const double dx = grid_.dx(), dy = grid_.dy();
    const double hmin = std::min(dx, dy);
    const double band = hmin;      // interface layer thickness
    const double hp = 2.0 * hmin;  // fluid probe offset along the ray
    const double rmin = 2.0 * hmin;
    // Retraction is meaningful only when the body spans several cells; the
    // floor keeps degenerate coarse setups classifiable instead of erroring.
    const double R = std::max(b.radius() - cfg_.ib_retraction * hmin, 0.5 * b.radius());

    auto classify = [&](double x, double y, ForcedFace& f) -> bool {
        const double rx = x - b.xc, ry = y - b.yc;
        const double r = std::hypot(rx, ry);
        const double d = r - R;
        if (d >= band) return false;
        if (r < 1e-12) {
            f.kind = ForceKind::interior;
            f.theta = 0.0;
            f.rfac = 0.0;
            f.w = 0.0;
            f.px = f.py = 0.0;
            return true;
        }
        f.theta = std::atan2(ry, rx);
        if (d < 0.0) {
            f.kind = ForceKind::interior;
            f.rfac = (r >= rmin) ? R / r : 0.0;
            f.w = 0.0;
            f.px = f.py = 0.0;
        } else {
            f.kind = ForceKind::interface;
            f.w = d / hp;
            f.px = b.xc + (R + hp) * (rx / r);
            f.py = b.yc + (R + hp) * (ry / r);
            f.rfac = 1.0;
        }
        return true;
    };

    forced_u_.clear();
    forced_v_.clear();
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i <= nx; ++i) {
            ForcedFace f{};
            f.i = i;
            f.j = j;
            if (classify(grid_.xu(static_cast<size_t>(i)), grid_.yc(static_cast<size_t>(j)), f))
                forced_u_.push_back(f);
        }
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i < nx; ++i) {
            ForcedFace f{};
            f.i = i;
            f.j = j;
            if (classify(grid_.xc(static_cast<size_t>(i)), grid_.yv(static_cast<size_t>(j)), f))
                forced_v_.push_back(f);
        }
}

std::pair<double, double> Solver2d::apply_forcing(ScalarField& u, ScalarField& v, double dt) {
    if (!body_) return {0.0, 0.0};
    const Body& b = *body_;
    const double dx = grid_.dx(), dy = grid_.dy();
    const double dV = dx * dy;
    double Fx = 0.0, Fy = 0.0;

    for (const ForcedFace& f : forced_u_) {
        const double s = b.jet_speed(f.theta, jet_); // radial surface speed
        const double surf = s * std::cos(f.theta);
        double target;
        if (f.kind == ForceKind::interior) {
            target = surf * f.rfac;
        } else {
            const double up = bilinear_sample(u, 0.0, 0.5 * dy, dx, dy, f.px, f.py);
            target = surf + f.w * (up - surf);
        }
        Fx -= (target - u(f.i, f.j)) / dt * dV;
        u(f.i, f.j) = target;
    }
    for (const ForcedFace& f : forced_v_) {
        const double s = b.jet_speed(f.theta, jet_);
        const double surf = s * std::sin(f.theta);
        double target;
        if (f.kind == ForceKind::interior) {
            target = surf * f.rfac;
        } else {
            const double vp = bilinear_sample(v, 0.5 * dx, 0.0, dx, dy, f.px, f.py);
            target = surf + f.w * (vp - surf);
        }
        Fy -= (target - v(f.i, f.j)) / dt * dV;
        v(f.i, f.j) = target;
    }
    return {Fx, Fy};
}

std::pair<double, double> Solver2d::to_coefficients(double Fx, double Fy) const {
    const double a = cfg_.aoa * kPi / 180.0;
    const double q = 0.5 * cfg_.U_inf * cfg_.U_inf * (body_ ? body_->D : 1.0);
    const double drag = Fx * std::cos(a) + Fy * std::sin(a);
    const double lift = -Fx * std::sin(a) + Fy * std::cos(a);
    return {lift / q, drag / q};
}

void Solver2d::project(double dt) {
    divergence(grid_, field_.u, field_.v, div_);
    for (double& d : div_.raw()) d /= dt;
    ScalarField phi = poisson_.solve(div_, cfg_.poisson_tol / dt, cfg_.poisson_max_iter,
                                     &field_.p); // warm start from the last solution
    poisson_.pressure_gradients(phi, gx_, gy_);

    const int nx = static_cast<int>(grid_.nx), ny = static_cast<int>(grid_.ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i <= nx; ++i) field_.u(i, j) -= dt * gx_(i, j);
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i < nx; ++i) field_.v(i, j) -= dt * gy_(i, j);
    field_.p = std::move(phi);
}

void Solver2d::step(double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw ConfigError("solver: dt must be positive and finite");
    const int nx = static_cast<int>(grid_.nx), ny = static_cast<int>(grid_.ny);
    ScalarField& u = field_.u;
    ScalarField& v = field_.v;

    compute_rhs(u, v, ru_, rv_);
    const double c1 = have_prev_ ? 1.5 : 1.0;
    const double c2 = have_prev_ ? 0.5 : 0.0;

    if (cfg_.periodic) {
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                u(i, j) += dt * (c1 * ru_(i, j) - c2 * ru_prev_(i, j));
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                v(i, j) += dt * (c1 * rv_(i, j) - c2 * rv_prev_(i, j));
    } else {
        for (int j = 0; j < ny; ++j)
            for (int i = 1; i < nx; ++i)
                u(i, j) += dt * (c1 * ru_(i, j) - c2 * ru_prev_(i, j));
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                v(i, j) += dt * (c1 * rv_(i, j) - c2 * rv_prev_(i, j));
    }
    outlet_and_wrap(u, v);

    const auto [Fx, Fy] = apply_forcing(u, v, dt);
    std::tie(C_l_, C_d_) = to_coefficients(Fx, Fy);

    // Catch blow-up before it reaches the pressure solve, which would
    // otherwise report it as a solver-convergence failure.
    if (!u.all_finite() || !v.all_finite())
        throw DivergenceError("solver: non-finite predicted velocity", steps_ + 1);

    project(dt);
    if (cfg_.periodic) outlet_and_wrap(u, v); // keep duplicated faces in sync

    std::swap(ru_, ru_prev_);
    std::swap(rv_, rv_prev_);
    have_prev_ = true;
    field_.time += dt;
    ++steps_;

    if (!u.all_finite() || !v.all_finite() || !field_.p.all_finite())
        throw DivergenceError("solver: non-finite values in the flow state", steps_);
}

std::pair<double, double> Solver2d::forces_now() {
    if (!body_) return {0.0, 0.0};
    const double dt = stable_dt();
    compute_rhs(field_.u, field_.v, ru_, rv_);

    ScalarField uh = field_.u, vh = field_.v;
    const int nx = static_cast<int>(grid_.nx), ny = static_cast<int>(grid_.ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 1; i < nx; ++i) uh(i, j) += dt * ru_(i, j);
    for (int j = 1; j < ny; ++j)
        for (int i = 0; i < nx; ++i) vh(i, j) += dt * rv_(i, j);

    const auto [Fx, Fy] = apply_forcing(uh, vh, dt);
    return to_coefficients(Fx, Fy);
}

std::vector<double> Solver2d::sample_probes(
    const std::vector<std::pair<double, double>>& layout) const {
    std::vector<double> out;
    out.reserve(layout.size());
    for (size_t k = 0; k < layout.size(); ++k) {
        const auto [x, y] = layout[k];
        if (!(x >= 0.0 && x <= grid_.Lx && y >= 0.0 && y <= grid_.Ly))
            throw LayoutError("probe " + std::to_string(k) + " outside the domain");
        if (body_ && body_->signed_distance(x, y) < 0.0)
            throw LayoutError("probe " + std::to_string(k) + " inside the body");
        out.push_back(bilinear_sample(field_.p, 0.5 * grid_.dx(), 0.5 * grid_.dy(),
                                      grid_.dx(), grid_.dy(), x, y));
    }
    return out;
}

double Solver2d::divergence_norm() const {
    ScalarField d(static_cast<int>(grid_.nx), static_cast<int>(grid_.ny));
    divergence(grid_, field_.u, field_.v, d);
    return d.max_abs();
}

void Solver2d::save_snapshot(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    const int nx = static_cast<int>(grid_.nx), ny = static_cast<int>(grid_.ny);
    const double dx = grid_.dx(), dy = grid_.dy();
    char buf[160];
    std::snprintf(buf, sizeof(buf), "nx %d\nny %d\ndx %.17g\ndy %.17g\ntime %.17g\n", nx, ny,
                  dx, dy, field_.time);
    out << buf;

    const ScalarField& u = field_.u;
    const ScalarField& v = field_.v;
    auto corner_vorticity = [&](int i, int j) -> double {
        return (v(i, j) - v(i - 1, j)) / dx - (u(i, j) - u(i, j - 1)) / dy;
    };
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double uc = 0.5 * (u(i, j) + u(i + 1, j));
            const double vc = 0.5 * (v(i, j) + v(i, j + 1));
            double w = 0.0;
            int n = 0;
            for (int cj = j; cj <= j + 1; ++cj)
                for (int ci = i; ci <= i + 1; ++ci)
                    if (ci >= 1 && ci <= nx - 1 && cj >= 1 && cj <= ny - 1) {
                        w += corner_vorticity(ci, cj);
                        ++n;
                    }
            if (n > 0) w /= n;
            std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g %.17g\n", uc, vc,
                          field_.p(i, j), w);
            out << buf;
        }
    }
    if (!out) throw IoError("failed writing " + path);
}

void Solver2d::restore_snapshot(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    const int nx = static_cast<int>(grid_.nx), ny = static_cast<int>(grid_.ny);

    auto expect = [&](const std::string& key) -> double {
        std::string k;
        double v = 0.0;
        if (!(in >> k >> v) || k != key)
            throw IoError(path + ": expected header line '" + key + "'");
        return v;
    };
    if (static_cast<int>(expect("nx")) != nx || static_cast<int>(expect("ny")) != ny)
        throw IoError(path + ": snapshot grid does not match the solver grid");
    if (std::abs(expect("dx") - grid_.dx()) > 1e-12 ||
        std::abs(expect("dy") - grid_.dy()) > 1e-12)
        throw IoError(path + ": snapshot spacing does not match the solver grid");
    const double t = expect("time");

    ScalarField uc(nx, ny), vc(nx, ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            double w;
            if (!(in >> uc(i, j) >> vc(i, j) >> field_.p(i, j) >> w))
                throw IoError(path + ": truncated snapshot data");
        }

    ScalarField& u = field_.u;
    ScalarField& v = field_.v;
    for (int j = 0; j < ny; ++j)
        for (int i = 1; i < nx; ++i) u(i, j) = 0.5 * (uc(i - 1, j) + uc(i, j));
    for (int j = 1; j < ny; ++j)
        for (int i = 0; i < nx; ++i) v(i, j) = 0.5 * (vc(i, j - 1) + vc(i, j));
    if (cfg_.periodic) {
        for (int j = 0; j < ny; ++j) u(0, j) = 0.5 * (uc(nx - 1, j) + uc(0, j));
        for (int i = 0; i < nx; ++i) v(i, 0) = 0.5 * (vc(i, ny - 1) + vc(i, 0));
    } else {
        for (int j = 0; j < ny; ++j) u(nx, j) = uc(nx - 1, j);
        apply_dirichlet_bcs(u, v);
    }
    outlet_and_wrap(u, v);

    // One projection restores the divergence bound; the stored pressure
    // stays as the probe-visible pressure until the next step.
    ScalarField p_keep = field_.p;
    project(stable_dt());
    field_.p = std::move(p_keep);

    field_.time = t;
    have_prev_ = false;
}

std::pair<double, double> compute_forces(const Grid& grid, const SolverConfig& cfg,
                                         const Body& body, const FlowField& field) {
    field.validate(grid);
    Solver2d solver(grid, cfg, body);
    solver.field() = field;
    return solver.forces_now();
}

} // namespace afc
