#pragma once

namespace marlab {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Closed figure-eight curve: two tangent circles of equal circumference,
/// traversed as one loop of length total_length. The tangency point is the
/// unsignalized crossing; it is visited twice per lap, at arclengths 0 and
/// total_length/2, which map to the same planar point.
struct TrackGeometry {
    double total_length = 480.0;

    double loop_radius() const;
    double half_length() const { return 0.5 * total_length; }
    /// The two arclength positions that map onto the shared crossing point.
    double crossing_a() const { return 0.0; }
    double crossing_b() const { return half_length(); }
};

/// Map arclength (any real, taken mod total_length) to the planar position.
/// The first half-lap runs counterclockwise around the right circle, the
/// second clockwise around the left circle; heading is continuous at the
/// crossing.
Point2 arclength_to_xy(const TrackGeometry& geom, double s);

double planar_distance(const Point2& a, const Point2& b);

}  // namespace marlab
