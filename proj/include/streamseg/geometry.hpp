#pragma once

// Point and parameter types shared by every stage of the pipeline.
//
// Sensor frame: x forward, y left, z up. Azimuth theta is measured CCW from
// +x in degrees, vertical angle phi from the horizontal plane (up positive).
// All angles are degrees at API boundaries and converted to radians only
// inside trig calls.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace streamseg {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Wrap an angle into [0, 360).
inline double wrap_deg(double d) {
    d = std::fmod(d, 360.0);
    if (d < 0) d += 360.0;
    return d;
}

enum class GroundLabel : uint8_t {
    Invalid = 0,    // no return in this slot
    Unlabeled,      // decoded but not yet touched by segmentation
    Ground,
    Change,         // slope discontinuity (coarse stage)
    ChangeFollow,   // close continuation of a change point (coarse stage)
    Uncertain,      // far continuation of a change point (coarse stage)
    Obstacle,
};

inline const char* to_string(GroundLabel l) {
    switch (l) {
        case GroundLabel::Invalid: return "invalid";
        case GroundLabel::Unlabeled: return "unlabeled";
        case GroundLabel::Ground: return "ground";
        case GroundLabel::Change: return "change";
        case GroundLabel::ChangeFollow: return "change_follow";
        case GroundLabel::Uncertain: return "uncertain";
        case GroundLabel::Obstacle: return "obstacle";
    }
    return "?";
}

// One measured return plus its cached cartesian projection. rho == 0 encodes
// a no-return slot; such points keep label Invalid and are skipped everywhere.
struct SphericalPoint {
    double rho = 0.0;      // range along the beam, meters
    double phi = 0.0;      // vertical angle, degrees
    double theta = 0.0;    // azimuth, degrees, [0, 360)
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double rho_xy = 0.0;   // horizontal range = rho * cos(phi)
    int row = 0;           // range-image row, ascending vertical angle
    int col = 0;           // global column index within the scan
    GroundLabel label = GroundLabel::Invalid;

    bool valid() const { return rho > 0.0; }
};

// Fill x/y/z/rho_xy from rho/phi/theta.
inline void to_cartesian(SphericalPoint& p) {
    const double phi_r = deg2rad(p.phi);
    const double theta_r = deg2rad(p.theta);
    p.z = p.rho * std::sin(phi_r);
    p.rho_xy = p.rho * std::cos(phi_r);
    p.x = p.rho_xy * std::cos(theta_r);
    p.y = p.rho_xy * std::sin(theta_r);
}

inline SphericalPoint make_point(double rho, double phi_deg, double theta_deg,
                                 int row = 0, int col = 0) {
    SphericalPoint p;
    p.rho = rho;
    p.phi = phi_deg;
    p.theta = wrap_deg(theta_deg);
    p.row = row;
    p.col = col;
    to_cartesian(p);
    p.label = p.valid() ? GroundLabel::Unlabeled : GroundLabel::Invalid;
    return p;
}

inline double dist3(const SphericalPoint& a, const SphericalPoint& b) {
    const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Tunables for the whole segmentation pipeline. Defaults are the values the
// engine was validated with on a 32-beam, 600-RPM sensor.
struct SegParams {
    int buffer_packets = 5;        // packets per streaming buffer
    double t_alpha = 0.5;          // slope threshold, coarse change detection
    double t_delta_rho = 2.0;      // m, isClose() horizontal-range gap
    double virtual_point_z = -2.0; // m, seed ground height (== -mount height)
    int block_size = 20;           // columns pooled per line-fit block
    double t_p2line = 0.2;         // m, vertical point-to-line threshold
    double line_slope_min = -0.2;  // accepted fitted-segment slope range
    double line_slope_max = 0.2;
    double line_intercept_band = 0.5;  // m, |b - virtual_point_z| bound
    double t_ccl = 1.0;            // m, horizontal-range gate for CCL joins
    int search_cols_near = 5;      // CCL look-back, points closer than ...
    double near_far_range = 20.0;  // ... this horizontal range
    int search_cols_far = 10;      // CCL look-back beyond near_far_range
    int t_neighbour = 5;           // max column gap for Neighbour linkage
    int mutual_n = 3;              // order statistic used as cluster distance
    double t_merge = 0.8;          // m, merge threshold on that distance
    int min_cluster_size = 3;      // smaller emissions are reported as noise
    bool refine_enabled = true;    // cluster refinement on/off (eval ablation)

    void validate() const {
        auto fail = [](const std::string& what) {
            throw std::invalid_argument("SegParams: " + what);
        };
        if (buffer_packets < 1) fail("buffer_packets must be >= 1");
        if (t_alpha <= 0) fail("t_alpha must be > 0");
        if (t_delta_rho <= 0) fail("t_delta_rho must be > 0");
        if (block_size < 1) fail("block_size must be >= 1");
        if (t_p2line <= 0) fail("t_p2line must be > 0");
        if (line_slope_min >= line_slope_max) fail("empty line_slope range");
        if (line_intercept_band <= 0) fail("line_intercept_band must be > 0");
        if (t_ccl <= 0) fail("t_ccl must be > 0");
        if (search_cols_near < 1) fail("search_cols_near must be >= 1");
        if (search_cols_far < search_cols_near)
            fail("search_cols_far must be >= search_cols_near");
        if (near_far_range <= 0) fail("near_far_range must be > 0");
        if (t_neighbour < 0) fail("t_neighbour must be >= 0");
        if (mutual_n < 1) fail("mutual_n must be >= 1");
        if (t_merge <= 0) fail("t_merge must be > 0");
        if (min_cluster_size < 1) fail("min_cluster_size must be >= 1");
    }
};

}  // namespace streamseg
