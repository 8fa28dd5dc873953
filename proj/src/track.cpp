#include "marlab/track.hpp"

#include <cmath>

namespace marlab {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double TrackGeometry::loop_radius() const { return total_length / (4.0 * kPi); }

Point2 arclength_to_xy(const TrackGeometry& geom, double s) {
    const double L = geom.total_length;
    s = std::fmod(s, L);
    if (s < 0.0) s += L;
    const double R = geom.loop_radius();
    const double half = geom.half_length();
    if (s < half) {
        // Right circle, centered (R, 0), entered at its leftmost point (0,0)
        // heading straight down, swept counterclockwise.
        const double th = kPi + s / R;
        return {R + R * std::cos(th), R * std::sin(th)};
    }
    // Left circle, centered (-R, 0), entered at its rightmost point (0,0)
    // heading straight down, swept clockwise.
    const double u = (s - half) / R;
    return {-R + R * std::cos(u), -R * std::sin(u)};
}

double planar_distance(const Point2& a, const Point2& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace marlab
