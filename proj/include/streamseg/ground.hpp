#pragma once

// Two-stage ground segmentation over one PacketBuffer.
//
// Coarse stage: per column, bottom to top, a small state machine labels each
// valid return Ground / Change / ChangeFollow / Uncertain from the slope to
// the next valid return and the horizontal-range gap to the previous one.
// Fine stage: per block of block_size columns, 2D line segments
// z = a*rho_xy + b are fitted through the coarse Ground+Uncertain points and
// every valid point is settled to Ground or Obstacle by its vertical distance
// to the nearest accepted segment. Change points are always Obstacle.

#include <cmath>
#include <vector>

#include "streamseg/geometry.hpp"
#include "streamseg/packet.hpp"

namespace streamseg {

inline constexpr double kVerticalDenomEps = 1e-6;  // m, slope denominator

// True iff the slope from p to the next valid return above it exceeds
// t_alpha in magnitude. A horizontal-range step below kVerticalDenomEps is a
// vertical structure and counts as a change regardless of dz.
inline bool is_change_point(const SphericalPoint& p,
                            const SphericalPoint& p_next,
                            const SegParams& params) {
    const double drho = p_next.rho_xy - p.rho_xy;
    if (std::fabs(drho) < kVerticalDenomEps) return true;
    const double alpha = (p_next.z - p.z) / drho;
    return std::fabs(alpha) > params.t_alpha;
}

inline bool is_close(const SphericalPoint& prev, const SphericalPoint& p,
                     const SegParams& params) {
    return std::fabs(p.rho_xy - prev.rho_xy) < params.t_delta_rho;
}

// Coarse labels for one column. Invalid slots are skipped and do not advance
// the previous-point state. The column starts from a virtual ground point
// directly beneath the sensor (rho_xy = 0, z = virtual_point_z), which only
// seeds the previous-label state.
inline void coarse_segment_column(std::array<SphericalPoint, kBeams>& column,
                                  const SegParams& params) {
    SphericalPoint virt;
    virt.rho = 0.0;
    virt.z = params.virtual_point_z;
    virt.label = GroundLabel::Ground;

    const SphericalPoint* prev = &virt;
    GroundLabel prev_label = GroundLabel::Ground;
    for (int i = 0; i < kBeams; ++i) {
        SphericalPoint& p = column[i];
        if (!p.valid()) continue;
        const SphericalPoint* next = nullptr;
        for (int j = i + 1; j < kBeams; ++j) {
            if (column[j].valid()) {
                next = &column[j];
                break;
            }
        }
        GroundLabel l;
        if (next != nullptr && is_change_point(p, *next, params)) {
            l = GroundLabel::Change;
        } else {
            switch (prev_label) {
                case GroundLabel::Ground:
                    l = GroundLabel::Ground;
                    break;
                case GroundLabel::Change:
                case GroundLabel::ChangeFollow:
                    l = is_close(*prev, p, params) ? GroundLabel::ChangeFollow
                                                   : GroundLabel::Uncertain;
                    break;
                default:  // Uncertain
                    l = GroundLabel::Uncertain;
                    break;
            }
        }
        p.label = l;
        prev = &p;
        prev_label = l;
    }
}

struct LineSegment {
    double a = 0.0;          // slope dz/drho_xy
    double b = 0.0;          // intercept at rho_xy = 0
    double rho_start = 0.0;  // inlier span
    double rho_end = 0.0;
    int inliers = 0;
};

namespace detail {

// Running least-squares state for z = a*rho + b.
struct LineFit {
    int n = 0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double min_x = 0, max_x = 0;

    void add(double x, double y) {
        if (n == 0) {
            min_x = max_x = x;
        } else {
            min_x = std::min(min_x, x);
            max_x = std::max(max_x, x);
        }
        ++n;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    // False when the points stack vertically and no line is defined.
    bool solve(double& a, double& b) const {
        const double denom = n * sxx - sx * sx;
        if (n < 2 || std::fabs(denom) < 1e-12) return false;
        a = (n * sxy - sx * sy) / denom;
        b = (sy - a * sx) / n;
        return true;
    }
};

inline void close_segment(const LineFit& fit, const SegParams& params,
                          std::vector<LineSegment>& out) {
    double a, b;
    if (!fit.solve(a, b)) return;
    if (fit.max_x - fit.min_x < 1e-9) return;
    if (a < params.line_slope_min || a > params.line_slope_max) return;
    if (std::fabs(b - params.virtual_point_z) > params.line_intercept_band)
        return;
    out.push_back({a, b, fit.min_x, fit.max_x, fit.n});
}

}  // namespace detail

// Sequential split-style fit over one block's candidate points, given as
// (rho_xy, z) pairs. Grows a segment while each new point sits within
// t_p2line of the current fit; otherwise closes it and starts the next one.
// Closed segments outside the slope/intercept acceptance are dropped.
// Fewer than 2 candidates: degenerate block, returns no segments.
inline std::vector<LineSegment> fit_line_segments(
    std::vector<std::pair<double, double>> candidates,
    const SegParams& params) {
    std::vector<LineSegment> out;
    if (candidates.size() < 2) return out;
    std::sort(candidates.begin(), candidates.end());

    detail::LineFit fit;
    for (const auto& [rho, z] : candidates) {
        if (fit.n >= 2) {
            double a, b;
            if (fit.solve(a, b) &&
                std::fabs(z - (a * rho + b)) > params.t_p2line) {
                detail::close_segment(fit, params, out);
                fit = detail::LineFit{};
            }
            // An unsolvable fit (all candidates at one rho so far, common
            // when a block pools near-identical columns) has no residual to
            // test; keep growing. close_segment drops it if it never
            // spreads out.
        }
        fit.add(rho, z);
    }
    detail::close_segment(fit, params, out);
    return out;
}

// Vertical distance from p to the nearest segment: the segment is evaluated
// at p's rho_xy clamped into the segment span, so a point beyond every span
// is measured against the closest span endpoint. +inf when no segments.
inline double point_to_segments(const SphericalPoint& p,
                                const std::vector<LineSegment>& segs) {
    double best = std::numeric_limits<double>::infinity();
    for (const LineSegment& s : segs) {
        const double rho = std::clamp(p.rho_xy, s.rho_start, s.rho_end);
        best = std::min(best, std::fabs(p.z - (s.a * rho + s.b)));
    }
    return best;
}

// Fine classification of every valid point in [first, last) columns against
// that block's segments. With no accepted segments the coarse labels decide:
// Ground stays Ground, everything else becomes Obstacle.
inline void fine_classify_block(std::vector<BufferColumn>& columns,
                                size_t first, size_t last,
                                const std::vector<LineSegment>& segs,
                                const SegParams& params) {
    for (size_t c = first; c < last; ++c) {
        for (auto& p : columns[c].points) {
            if (!p.valid()) continue;
            if (p.label == GroundLabel::Change) {
                p.label = GroundLabel::Obstacle;
                continue;
            }
            if (segs.empty()) {
                p.label = p.label == GroundLabel::Ground ? GroundLabel::Ground
                                                         : GroundLabel::Obstacle;
                continue;
            }
            p.label = point_to_segments(p, segs) > params.t_p2line
                          ? GroundLabel::Obstacle
                          : GroundLabel::Ground;
        }
    }
}

// Averages sorted candidate runs whose consecutive rho gaps stay below
// t_p2line into single representatives. A block pools many columns, so each
// beam ring contributes a tight clump of near-identical (rho, z) samples;
// inside the fit such a clump carries no usable slope (a run narrower than
// the residual tolerance constrains it far beyond the acceptance band) and
// under noise it aligns with the beam direction instead of the ground,
// wedging the sequential fit onto per-ring lines. The clump's mean is all
// the information the fit can use.
inline std::vector<std::pair<double, double>> collapse_rho_runs(
    std::vector<std::pair<double, double>> cand, const SegParams& params) {
    std::sort(cand.begin(), cand.end());
    std::vector<std::pair<double, double>> out;
    size_t i = 0;
    while (i < cand.size()) {
        size_t j = i + 1;
        double srho = cand[i].first, sz = cand[i].second;
        while (j < cand.size() &&
               cand[j].first - cand[j - 1].first < params.t_p2line) {
            srho += cand[j].first;
            sz += cand[j].second;
            ++j;
        }
        const double n = static_cast<double>(j - i);
        out.emplace_back(srho / n, sz / n);
        i = j;
    }
    return out;
}

// Full ground segmentation of a buffer: coarse per column, then per-block
// line fits over ring-collapsed candidates and fine classification. After
// this every valid point is either Ground or Obstacle.
inline void segment_buffer(PacketBuffer& buf, const SegParams& params) {
    for (auto& col : buf.columns) coarse_segment_column(col.points, params);

    const size_t ncols = buf.columns.size();
    const size_t bs = static_cast<size_t>(params.block_size);
    for (size_t first = 0; first < ncols; first += bs) {
        const size_t last = std::min(first + bs, ncols);
        std::vector<std::pair<double, double>> cand;
        for (size_t c = first; c < last; ++c) {
            for (const auto& p : buf.columns[c].points) {
                if (!p.valid()) continue;
                if (p.label == GroundLabel::Ground ||
                    p.label == GroundLabel::Uncertain)
                    cand.emplace_back(p.rho_xy, p.z);
            }
        }
        const auto segs = fit_line_segments(
            collapse_rho_runs(std::move(cand), params), params);
        fine_classify_block(buf.columns, first, last, segs, params);
    }
}

}  // namespace streamseg
