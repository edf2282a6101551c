#include "afc/body.hpp"

#include "afc/errors.hpp"

namespace afc {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double d) { return d * kPi / 180.0; }

/// Wrap an angle into [0, 2 pi).
double wrap(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    return a;
}

/// True when theta lies inside the arc centred on c with full width w.
bool in_arc(double theta, double c, double w) {
    double d = wrap(theta - c);
    if (d > kPi) d -= 2.0 * kPi;
    return std::abs(d) <= 0.5 * w;
}
} // namespace

void JetPair::validate() const {
    if (!(width > 0.0) || width >= 180.0)
        throw ConfigError("jets: slot width must lie in (0, 180) degrees");
    if (!(max_speed > 0.0))
        throw ConfigError("jets: max_speed must be positive");
    const double sep = std::abs(wrap(deg2rad(angle_front) - deg2rad(angle_rear)));
    const double gap = std::min(sep, 2.0 * kPi - sep);
    if (gap < deg2rad(width))
        throw ConfigError("jets: slots overlap");
}

double Body::stagnation_angle() const {
    // Incoming flow points along aoa; the front stagnation point faces it.
    return wrap(kPi + deg2rad(aoa));
}

double Body::jet_speed(double theta, double U_jet) const {
    if (!std::isfinite(U_jet) || std::abs(U_jet) > jets.max_speed)
        throw ActionRangeError("jet amplitude outside [-max_speed, max_speed]");
    const double base = stagnation_angle();
    const double w = deg2rad(jets.width);
    if (in_arc(theta, wrap(base + deg2rad(jets.angle_front)), w)) return U_jet;
    if (in_arc(theta, wrap(base + deg2rad(jets.angle_rear)), w)) return -U_jet;
    return 0.0;
}

double Body::net_jet_flux(double U_jet) const {
    const double w = deg2rad(jets.width);
    const double front = U_jet * radius() * w;
    const double rear = -U_jet * radius() * w;
    return front + rear;
}

void Body::validate() const {
    if (!(D > 0.0)) throw ConfigError("body: diameter must be positive");
    jets.validate();
}

} // namespace afc
