#pragma once

#include <cmath>

namespace afc {

/// Antisymmetric pair of blowing/suction slots on the cylinder surface.
/// Angles are measured counterclockwise from the front stagnation line
/// (the upstream direction). The rear slot always runs at minus the
/// front slot's speed, so the pair injects zero net mass identically.
struct JetPair {
    double angle_front = 75.0;  ///< front slot centre [deg]
    double angle_rear = 285.0;  ///< rear slot centre [deg]
    double width = 10.0;        ///< angular width of each slot [deg]
    double max_speed = 0.3;     ///< admissible |U_jet| in units of U_inf

    void validate() const;
};

/// Circular cylinder immersed in the flow, with one jet pair.
struct Body {
    double xc = 0.0;  ///< centre x
    double yc = 0.0;  ///< centre y
    double D = 1.0;   ///< diameter
    double aoa = 0.0; ///< incoming-flow angle [deg]
    JetPair jets;

    double radius() const { return 0.5 * D; }

    /// Signed distance to the surface (< 0 inside).
    double signed_distance(double x, double y) const {
        return std::hypot(x - xc, y - yc) - radius();
    }
    bool inside(double x, double y) const { return signed_distance(x, y) < 0.0; }

    /// Absolute angle [rad, ccw from +x) of the front stagnation line.
    double stagnation_angle() const;

    /// Radial surface speed at absolute angle theta [rad] for jet
    /// amplitude U_jet (top-hat profile, positive = blowing outward).
    /// Throws ActionRangeError when |U_jet| exceeds the slot bound.
    double jet_speed(double theta, double U_jet) const;

    /// Net volume flux through the surface for amplitude U_jet.
    /// Zero by construction for equal-width slots.
    double net_jet_flux(double U_jet) const;

    void validate() const;
};

} // namespace afc
