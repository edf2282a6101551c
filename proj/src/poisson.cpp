#include "afc/poisson.hpp"

#include <cmath>

#include "afc/errors.hpp"

namespace afc {

namespace {
double mean_of(const ScalarField& f) {
    double s = 0.0;
    for (double v : f.raw()) s += v;
    return s / static_cast<double>(f.size());
}

void subtract_mean(ScalarField& f) {
    const double m = mean_of(f);
    for (double& v : f.raw()) v -= m;
}

double dot(const ScalarField& a, const ScalarField& b) {
    double s = 0.0;
    const auto& x = a.raw();
    const auto& y = b.raw();
    for (size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
    return s;
}
} // namespace

void PoissonBcs::validate() const {
    if (periodic_x && dirichlet_east)
        throw ConfigError("poisson: periodic_x excludes an east Dirichlet condition");
}

void divergence(const Grid& grid, const ScalarField& u, const ScalarField& v,
                ScalarField& out) {
    const int nx = static_cast<int>(grid.nx), ny = static_cast<int>(grid.ny);
    const double idx = 1.0 / grid.dx(), idy = 1.0 / grid.dy();
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            out(i, j) = (u(i + 1, j) - u(i, j)) * idx + (v(i, j + 1) - v(i, j)) * idy;
}

PoissonSolver::PoissonSolver(const Grid& grid, PoissonBcs bcs, Precond precond)
    : grid_(grid), bcs_(bcs), precond_(precond) {
    grid_.validate();
    bcs_.validate();
    singular_ = !bcs_.dirichlet_east;

    int nx = static_cast<int>(grid_.nx), ny = static_cast<int>(grid_.ny);
    double dx = grid_.dx(), dy = grid_.dy();
    for (;;) {
        levels_.push_back(Level{nx, ny, dx, dy, ScalarField(nx, ny), ScalarField(nx, ny),
                                ScalarField(nx, ny)});
        if (nx % 2 != 0 || ny % 2 != 0 || nx < 8 || ny < 8) break;
        nx /= 2;
        ny /= 2;
        dx *= 2.0;
        dy *= 2.0;
    }
    gx_ = ScalarField(static_cast<int>(grid_.nx) + 1, static_cast<int>(grid_.ny));
    gy_ = ScalarField(static_cast<int>(grid_.nx), static_cast<int>(grid_.ny) + 1);
}

void PoissonSolver::pressure_gradients(const ScalarField& p, ScalarField& gx,
                                       ScalarField& gy) const {
    const int nx = static_cast<int>(grid_.nx), ny = static_cast<int>(grid_.ny);
    const double idx = 1.0 / grid_.dx(), idy = 1.0 / grid_.dy();
    for (int j = 0; j < ny; ++j) {
        for (int i = 1; i < nx; ++i) gx(i, j) = (p(i, j) - p(i - 1, j)) * idx;
        if (bcs_.periodic_x) {
            const double g = (p(0, j) - p(nx - 1, j)) * idx;
            gx(0, j) = g;
            gx(nx, j) = g;
        } else {
            gx(0, j) = 0.0;
            gx(nx, j) = bcs_.dirichlet_east ? -2.0 * p(nx - 1, j) * idx : 0.0;
        }
    }
    for (int i = 0; i < nx; ++i) {
        for (int j = 1; j < ny; ++j) gy(i, j) = (p(i, j) - p(i, j - 1)) * idy;
        if (bcs_.periodic_y) {
            const double g = (p(i, 0) - p(i, ny - 1)) * idy;
            gy(i, 0) = g;
            gy(i, ny) = g;
        } else {
            gy(i, 0) = 0.0;
            gy(i, ny) = 0.0;
        }
    }
}

void PoissonSolver::apply_laplacian(const ScalarField& x, ScalarField& out) const {
    level_apply(levels_.front(), x, out);
}

void PoissonSolver::level_apply(const Level& lv, const ScalarField& x, ScalarField& out) const {
    // Flux form, grouped exactly as divergence(pressure_gradients(x)) so a
    // projection built from those helpers sees this operator bit-for-bit.
    const int nx = lv.nx, ny = lv.ny;
    const double idx = 1.0 / lv.dx, idy = 1.0 / lv.dy;
    for (int j = 0; j < ny; ++j) {
        const bool has_s = j > 0 || bcs_.periodic_y;
        const bool has_n = j + 1 < ny || bcs_.periodic_y;
        const int js = j > 0 ? j - 1 : ny - 1;
        const int jn = j + 1 < ny ? j + 1 : 0;
        for (int i = 0; i < nx; ++i) {
            const double c = x(i, j);
            double gW, gE;
            if (i > 0)
                gW = (c - x(i - 1, j)) * idx;
            else
                gW = bcs_.periodic_x ? (c - x(nx - 1, j)) * idx : 0.0;
            if (i + 1 < nx)
                gE = (x(i + 1, j) - c) * idx;
            else if (bcs_.periodic_x)
                gE = (x(0, j) - c) * idx;
            else
                gE = bcs_.dirichlet_east ? -2.0 * c * idx : 0.0;
            const double gS = has_s ? (c - x(i, js)) * idy : 0.0;
            const double gN = has_n ? (x(i, jn) - c) * idy : 0.0;
            out(i, j) = (gE - gW) * idx + (gN - gS) * idy;
        }
    }
}

void PoissonSolver::level_smooth(Level& lv, int color) const {
    const int nx = lv.nx, ny = lv.ny;
    const double ax = 1.0 / (lv.dx * lv.dx), ay = 1.0 / (lv.dy * lv.dy);
    ScalarField& x = lv.x;
    for (int j = 0; j < ny; ++j) {
        const bool has_s = j > 0 || bcs_.periodic_y;
        const bool has_n = j + 1 < ny || bcs_.periodic_y;
        const int js = j > 0 ? j - 1 : ny - 1;
        const int jn = j + 1 < ny ? j + 1 : 0;
        for (int i = (j + color) % 2; i < nx; i += 2) {
            double s = 0.0, d = 0.0;
            if (i > 0) {
                s += x(i - 1, j) * ax;
                d += ax;
            } else if (bcs_.periodic_x) {
                s += x(nx - 1, j) * ax;
                d += ax;
            }
            if (i + 1 < nx) {
                s += x(i + 1, j) * ax;
                d += ax;
            } else if (bcs_.periodic_x) {
                s += x(0, j) * ax;
                d += ax;
            } else if (bcs_.dirichlet_east) {
                d += 2.0 * ax;
            }
            if (has_s) {
                s += x(i, js) * ay;
                d += ay;
            }
            if (has_n) {
                s += x(i, jn) * ay;
                d += ay;
            }
            x(i, j) = (s - lv.rhs(i, j)) / d;
        }
    }
}

void PoissonSolver::v_cycle(size_t l) {
    Level& lv = levels_[l];
    if (l + 1 == levels_.size()) {
        for (int s = 0; s < 40; ++s) {
            level_smooth(lv, 0);
            level_smooth(lv, 1);
        }
        return;
    }
    // Red-black pre-smoothing; the post-smoothing below runs black-red so
    // the cycle stays symmetric and is a valid CG preconditioner.
    for (int s = 0; s < 2; ++s) {
        level_smooth(lv, 0);
        level_smooth(lv, 1);
    }

    level_apply(lv, lv.x, lv.res);
    for (size_t k = 0; k < lv.res.size(); ++k)
        lv.res.raw()[k] = lv.rhs.raw()[k] - lv.res.raw()[k];

    Level& cv = levels_[l + 1];
    for (int J = 0; J < cv.ny; ++J)
        for (int I = 0; I < cv.nx; ++I)
            cv.rhs(I, J) = 0.25 * (lv.res(2 * I, 2 * J) + lv.res(2 * I + 1, 2 * J) +
                                   lv.res(2 * I, 2 * J + 1) + lv.res(2 * I + 1, 2 * J + 1));
    cv.x.fill(0.0);
    v_cycle(l + 1);
    for (int J = 0; J < cv.ny; ++J)
        for (int I = 0; I < cv.nx; ++I) {
            const double e = cv.x(I, J);
            lv.x(2 * I, 2 * J) += e;
            lv.x(2 * I + 1, 2 * J) += e;
            lv.x(2 * I, 2 * J + 1) += e;
            lv.x(2 * I + 1, 2 * J + 1) += e;
        }
    for (int s = 0; s < 2; ++s) {
        level_smooth(lv, 1);
        level_smooth(lv, 0);
    }
}

void PoissonSolver::precondition(const ScalarField& r, ScalarField& z) {
    if (precond_ == Precond::multigrid) {
        // One V-cycle approximating (-lap)^{-1} r.
        Level& top = levels_.front();
        for (size_t k = 0; k < r.size(); ++k) top.rhs.raw()[k] = -r.raw()[k];
        top.x.fill(0.0);
        v_cycle(0);
        z = top.x;
    } else {
        // Diagonal scaling of -lap.
        const Level& lv = levels_.front();
        const double ax = 1.0 / (lv.dx * lv.dx), ay = 1.0 / (lv.dy * lv.dy);
        for (int j = 0; j < lv.ny; ++j) {
            const bool has_s = j > 0 || bcs_.periodic_y;
            const bool has_n = j + 1 < lv.ny || bcs_.periodic_y;
            for (int i = 0; i < lv.nx; ++i) {
                double d = 0.0;
                if (i > 0 || bcs_.periodic_x) d += ax;
                if (i + 1 < lv.nx || bcs_.periodic_x)
                    d += ax;
                else if (bcs_.dirichlet_east)
                    d += 2.0 * ax;
                if (has_s) d += ay;
                if (has_n) d += ay;
                z(i, j) = r(i, j) / d;
            }
        }
    }
    if (singular_) subtract_mean(z);
}

ScalarField PoissonSolver::solve(const ScalarField& rhs, double tol, int max_iter,
                                 const ScalarField* x0) {
    if (rhs.nx() != static_cast<int>(grid_.nx) || rhs.ny() != static_cast<int>(grid_.ny))
        throw ConfigError("poisson: rhs shape does not match the grid");
    if (!(tol > 0.0)) throw ConfigError("poisson: tolerance must be positive");

    const int nx = rhs.nx(), ny = rhs.ny();
    // Solve A x = b with the positive-definite A = -lap.
    ScalarField x(nx, ny), r(nx, ny), z(nx, ny), p(nx, ny), Ap(nx, ny);
    if (x0 != nullptr && x0->same_shape(x)) {
        x = *x0;
        level_apply(levels_.front(), x, Ap);
        for (size_t k = 0; k < rhs.size(); ++k) r.raw()[k] = Ap.raw()[k] - rhs.raw()[k];
    } else {
        for (size_t k = 0; k < rhs.size(); ++k) r.raw()[k] = -rhs.raw()[k];
    }
    if (singular_) subtract_mean(r); // compatibility projection

    std::vector<double> history;
    double resnorm = r.max_abs();
    history.push_back(resnorm);
    last_iterations_ = 0;
    if (resnorm <= tol) {
        if (singular_) subtract_mean(x);
        return x;
    }

    precondition(r, z);
    p = z;
    double rz = dot(r, z);

    for (int it = 1; it <= max_iter; ++it) {
        level_apply(levels_.front(), p, Ap);
        for (double& v : Ap.raw()) v = -v;
        const double pAp = dot(p, Ap);
        if (!(pAp > 0.0)) {
            history.resize(std::min(history.size(), size_t(10)));
            throw PoissonError("poisson: conjugate-gradient breakdown (p'Ap <= 0)", history);
        }
        const double alpha = rz / pAp;
        for (size_t k = 0; k < x.size(); ++k) {
            x.raw()[k] += alpha * p.raw()[k];
            r.raw()[k] -= alpha * Ap.raw()[k];
        }
        resnorm = r.max_abs();
        history.push_back(resnorm);
        if (resnorm <= tol) {
            last_iterations_ = it;
            if (singular_) subtract_mean(x);
            return x;
        }
        precondition(r, z);
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (size_t k = 0; k < p.size(); ++k) p.raw()[k] = z.raw()[k] + beta * p.raw()[k];
    }

    std::vector<double> tail(history.end() - std::min(history.size(), size_t(10)),
                             history.end());
    throw PoissonError("poisson: no convergence in " + std::to_string(max_iter) +
                           " iterations (residual " + std::to_string(resnorm) + ")",
                       tail);
}

} // namespace afc
