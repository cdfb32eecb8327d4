#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "helpers.hpp"
#include "streamseg/ground.hpp"

using namespace streamseg;
using Catch::Matchers::WithinAbs;

namespace {

// Point with direct slope-space coordinates; only rho_xy and z matter to the
// coarse stage.
SphericalPoint sp(double rho_xy, double z,
                  GroundLabel label = GroundLabel::Unlabeled) {
    SphericalPoint p;
    p.rho = std::max(1e-3, std::hypot(rho_xy, z));
    p.rho_xy = rho_xy;
    p.z = z;
    p.x = rho_xy;
    p.y = 0.0;
    p.label = label;
    return p;
}

// Column whose bottom rows are the given points; the rest stay invalid.
std::array<SphericalPoint, 32> column_of(
    const std::vector<SphericalPoint>& pts) {
    std::array<SphericalPoint, 32> col{};
    for (int r = 0; r < 32; ++r) col[r].row = r;
    for (size_t i = 0; i < pts.size(); ++i) {
        col[i] = pts[i];
        col[i].row = static_cast<int>(i);
    }
    return col;
}

}  // namespace

TEST_CASE("change detection on point pairs") {
    const SegParams P;
    SECTION("flat ground is not a change") {
        CHECK_FALSE(is_change_point(sp(5, -2), sp(6, -2), P));
    }
    SECTION("wall-steep slope is a change") {
        // alpha = 0.1 / 0.001 = 100
        CHECK(is_change_point(sp(10, 0), sp(10.001, 0.1), P));
    }
    SECTION("gentle ramp is not a change") {
        CHECK_FALSE(is_change_point(sp(5, -2), sp(6, -1.8), P));  // 0.2
    }
    SECTION("threshold is strict") {
        CHECK_FALSE(is_change_point(sp(2, -2), sp(4, -1), P));    // 0.5
        CHECK(is_change_point(sp(2, -2), sp(4, -0.998), P));      // 0.501
    }
    SECTION("vertical pair is always a change") {
        CHECK(is_change_point(sp(10, -1), sp(10, 0), P));
        CHECK(is_change_point(sp(10, 0), sp(10, -1), P));
    }
    SECTION("descending steep slope is a change too") {
        CHECK(is_change_point(sp(5, 0), sp(6, -2), P));  // alpha = -2
    }
}

TEST_CASE("closeness gate") {
    const SegParams P;  // t_delta_rho = 2
    CHECK(is_close(sp(5, 0), sp(6.9, 1), P));
    CHECK_FALSE(is_close(sp(5, 0), sp(7.0, 1), P));  // strict <
    CHECK(is_close(sp(5, 0), sp(3.2, 1), P));        // direction-free
}

TEST_CASE("coarse labels: flat ground column") {
    auto col = column_of({sp(2, -2), sp(4, -2), sp(8, -2), sp(16, -2)});
    coarse_segment_column(col, SegParams{});
    for (int i = 0; i < 4; ++i) CHECK(col[i].label == GroundLabel::Ground);
    for (int i = 4; i < 32; ++i) CHECK(col[i].label == GroundLabel::Invalid);
}

TEST_CASE("coarse labels: ground then wall") {
    // Hand-simulated: the two ground points are Ground; the last ground
    // point sees the wall base (alpha 0.6) and the wall interior is
    // vertical, so those three are Change; the wall top has no successor
    // and follows a close Change point: ChangeFollow.
    auto col = column_of({sp(4, -2), sp(6, -2), sp(8, -2), sp(10, -0.8),
                          sp(10, 0.2), sp(10, 1.2)});
    coarse_segment_column(col, SegParams{});
    CHECK(col[0].label == GroundLabel::Ground);
    CHECK(col[1].label == GroundLabel::Ground);
    CHECK(col[2].label == GroundLabel::Change);
    CHECK(col[3].label == GroundLabel::Change);
    CHECK(col[4].label == GroundLabel::Change);
    CHECK(col[5].label == GroundLabel::ChangeFollow);
}

TEST_CASE("coarse labels: far points after a wall go uncertain") {
    auto col = column_of({sp(4, -2), sp(6, -2), sp(8, -2), sp(10, -0.8),
                          sp(10, 0.2), sp(10, 1.2), sp(20, 1.0)});
    coarse_segment_column(col, SegParams{});
    CHECK(col[4].label == GroundLabel::Change);
    // The wall top is not a change wrt (20, 1.0) and sits on its Change
    // predecessor: ChangeFollow. The far point behind the wall is 10 m from
    // its predecessor: Uncertain.
    CHECK(col[5].label == GroundLabel::ChangeFollow);
    CHECK(col[6].label == GroundLabel::Uncertain);
}

TEST_CASE("coarse labels: ground continuing behind a low wall") {
    auto col = column_of({sp(4, -2), sp(6, -2), sp(7, -1), sp(7, 0),
                          sp(14, -1.95), sp(16, -1.95)});
    coarse_segment_column(col, SegParams{});
    CHECK(col[0].label == GroundLabel::Ground);
    CHECK(col[1].label == GroundLabel::Change);   // sees the wall base
    CHECK(col[2].label == GroundLabel::Change);   // vertical
    CHECK(col[3].label == GroundLabel::ChangeFollow);
    CHECK(col[4].label == GroundLabel::Uncertain);  // far behind the wall
    CHECK(col[5].label == GroundLabel::Uncertain);
}

TEST_CASE("coarse labels: wall as the first return") {
    auto col = column_of({sp(3, -1), sp(3, 0), sp(3, 1)});
    coarse_segment_column(col, SegParams{});
    CHECK(col[0].label == GroundLabel::Change);
    CHECK(col[1].label == GroundLabel::Change);
    CHECK(col[2].label == GroundLabel::ChangeFollow);
}

TEST_CASE("coarse labels: invalid rows are skipped transparently") {
    std::array<SphericalPoint, 32> col{};
    for (int r = 0; r < 32; ++r) col[r].row = r;
    col[1] = sp(2, -2);
    col[4] = sp(4, -2);
    col[9] = sp(8, -2);
    col[13] = sp(16, -2);
    coarse_segment_column(col, SegParams{});
    CHECK(col[1].label == GroundLabel::Ground);
    CHECK(col[4].label == GroundLabel::Ground);
    CHECK(col[9].label == GroundLabel::Ground);
    CHECK(col[13].label == GroundLabel::Ground);
    CHECK(col[0].label == GroundLabel::Invalid);
    CHECK(col[2].label == GroundLabel::Invalid);
}

TEST_CASE("coarse labels: single return leans on the virtual seed") {
    auto col = column_of({sp(5, -2)});
    coarse_segment_column(col, SegParams{});
    CHECK(col[0].label == GroundLabel::Ground);
}

TEST_CASE("coarse labels: empty column is a no-op") {
    std::array<SphericalPoint, 32> col{};
    CHECK_NOTHROW(coarse_segment_column(col, SegParams{}));
    for (const auto& p : col) CHECK(p.label == GroundLabel::Invalid);
}

TEST_CASE("line fit solves exact least squares") {
    detail::LineFit f;
    f.add(1, 0.0);
    f.add(2, 0.1);
    f.add(3, 0.2);
    double a = 0, b = 0;
    REQUIRE(f.solve(a, b));
    CHECK_THAT(a, WithinAbs(0.1, 1e-12));
    CHECK_THAT(b, WithinAbs(-0.1, 1e-12));
}

TEST_CASE("line fit refuses vertical stacks") {
    detail::LineFit f;
    f.add(2, 0);
    f.add(2, 1);
    double a, b;
    CHECK_FALSE(f.solve(a, b));
    detail::LineFit g;
    g.add(2, 0);
    CHECK_FALSE(g.solve(a, b));  // single point
}

TEST_CASE("segment fitting splits on a step") {
    SegParams P;
    std::vector<std::pair<double, double>> cand;
    for (int i = 0; i < 5; ++i) cand.emplace_back(1.0 + i, -2.0);
    for (int i = 0; i < 4; ++i) cand.emplace_back(5.5 + i, -1.6);
    const auto segs = fit_line_segments(cand, P);
    REQUIRE(segs.size() == 2);
    CHECK_THAT(segs[0].a, WithinAbs(0.0, 1e-9));
    CHECK_THAT(segs[0].b, WithinAbs(-2.0, 1e-9));
    CHECK_THAT(segs[0].rho_start, WithinAbs(1.0, 1e-12));
    CHECK_THAT(segs[0].rho_end, WithinAbs(5.0, 1e-12));
    CHECK(segs[0].inliers == 5);
    CHECK_THAT(segs[1].a, WithinAbs(0.0, 1e-9));
    CHECK_THAT(segs[1].b, WithinAbs(-1.6, 1e-9));
    CHECK(segs[1].inliers == 4);
}

TEST_CASE("segment fitting rejects non-ground lines") {
    SegParams P;
    SECTION("slope outside the accepted band") {
        std::vector<std::pair<double, double>> cand;
        for (int i = 0; i < 6; ++i)
            cand.emplace_back(2.0 + i, -2.0 + 0.3 * (2.0 + i));
        CHECK(fit_line_segments(cand, P).empty());
    }
    SECTION("intercept far from the sensor foot") {
        std::vector<std::pair<double, double>> cand;
        for (int i = 0; i < 6; ++i) cand.emplace_back(2.0 + i, -1.0);
        CHECK(fit_line_segments(cand, P).empty());
    }
    SECTION("vertical stack") {
        std::vector<std::pair<double, double>> cand = {
            {3, -2}, {3, -1}, {3, 0}, {3, 1}};
        CHECK(fit_line_segments(cand, P).empty());
    }
    SECTION("fewer than two candidates") {
        CHECK(fit_line_segments({{3, -2}}, P).empty());
        CHECK(fit_line_segments({}, P).empty());
    }
}

TEST_CASE("point to segment distance clamps to the span") {
    const std::vector<LineSegment> segs = {{0.0, -2.0, 1.0, 5.0, 5}};
    CHECK_THAT(point_to_segments(sp(3, -1.9), segs), WithinAbs(0.1, 1e-12));
    CHECK_THAT(point_to_segments(sp(7, -1.9), segs), WithinAbs(0.1, 1e-12));
    CHECK_THAT(point_to_segments(sp(7, -1.0), segs), WithinAbs(1.0, 1e-12));
    CHECK_THAT(point_to_segments(sp(0.2, -2.0), segs), WithinAbs(0.0, 1e-12));
    CHECK(std::isinf(point_to_segments(sp(3, -2), {})));
}

TEST_CASE("point to segment distance takes the nearest of several") {
    const std::vector<LineSegment> segs = {{0.0, -2.0, 1.0, 5.0, 5},
                                           {0.0, -1.6, 5.5, 9.0, 4}};
    CHECK_THAT(point_to_segments(sp(6, -1.5), segs), WithinAbs(0.1, 1e-12));
    CHECK_THAT(point_to_segments(sp(4, -1.8), segs), WithinAbs(0.2, 1e-12));
}

TEST_CASE("fine classification against accepted segments") {
    const SegParams P;
    const std::vector<LineSegment> segs = {{0.0, -2.0, 1.0, 10.0, 8}};
    std::vector<BufferColumn> cols(1);
    cols[0].points = column_of({
        sp(2, -2.0, GroundLabel::Ground),        // on the line
        sp(3, -1.7, GroundLabel::Ground),        // 0.3 above: demoted
        sp(4, -1.9, GroundLabel::Uncertain),     // rescued
        sp(5, -1.5, GroundLabel::Uncertain),     // 0.5 off: obstacle
        sp(6, -2.0, GroundLabel::Change),        // change is never rescued
        sp(7, -1.9, GroundLabel::ChangeFollow),  // near line: ground
    });
    fine_classify_block(cols, 0, 1, segs, P);
    CHECK(cols[0].points[0].label == GroundLabel::Ground);
    CHECK(cols[0].points[1].label == GroundLabel::Obstacle);
    CHECK(cols[0].points[2].label == GroundLabel::Ground);
    CHECK(cols[0].points[3].label == GroundLabel::Obstacle);
    CHECK(cols[0].points[4].label == GroundLabel::Obstacle);
    CHECK(cols[0].points[5].label == GroundLabel::Ground);
    CHECK(cols[0].points[6].label == GroundLabel::Invalid);
}

TEST_CASE("fine classification with no segments falls back to coarse") {
    const SegParams P;
    std::vector<BufferColumn> cols(1);
    cols[0].points = column_of({
        sp(2, -2.0, GroundLabel::Ground),
        sp(3, -1.0, GroundLabel::Uncertain),
        sp(4, 0.0, GroundLabel::Change),
        sp(5, 0.5, GroundLabel::ChangeFollow),
    });
    fine_classify_block(cols, 0, 1, {}, P);
    CHECK(cols[0].points[0].label == GroundLabel::Ground);
    CHECK(cols[0].points[1].label == GroundLabel::Obstacle);
    CHECK(cols[0].points[2].label == GroundLabel::Obstacle);
    CHECK(cols[0].points[3].label == GroundLabel::Obstacle);
}

TEST_CASE("buffer segmentation: ground survives, wall points do not") {
    SegParams P;
    PacketBuffer buf;
    buf.columns.resize(40);
    for (int c = 0; c < 40; ++c) {
        BufferColumn& col = buf.columns[c];
        col.col = c;
        std::vector<SphericalPoint> pts = {sp(4, -2), sp(6, -2), sp(8, -2),
                                           sp(9, -2)};
        if (c >= 30) {
            pts.push_back(sp(10, -0.8));
            pts.push_back(sp(10, 0.2));
            pts.push_back(sp(10, 1.2));
        }
        col.points = column_of(pts);
        for (auto& p : col.points) p.col = c;
    }
    segment_buffer(buf, P);
    for (int c = 0; c < 40; ++c) {
        const auto& pts = buf.columns[c].points;
        for (int r = 0; r < 3; ++r)
            CHECK(pts[r].label == GroundLabel::Ground);
        if (c < 30) {
            CHECK(pts[3].label == GroundLabel::Ground);
        } else {
            // The last ground return before the wall is the change point
            // itself and stays an obstacle; so does the wall.
            for (int r = 3; r < 7; ++r)
                CHECK(pts[r].label == GroundLabel::Obstacle);
        }
    }
}

TEST_CASE("buffer segmentation rescues ground behind a low wall") {
    SegParams P;
    PacketBuffer buf;
    buf.columns.resize(20);
    for (int c = 0; c < 20; ++c) {
        buf.columns[c].col = c;
        buf.columns[c].points =
            column_of({sp(4, -2), sp(6, -2), sp(7, -1), sp(7, 0),
                       sp(14, -1.95), sp(16, -1.95)});
        for (auto& p : buf.columns[c].points) p.col = c;
    }
    segment_buffer(buf, P);
    for (int c = 0; c < 20; ++c) {
        const auto& pts = buf.columns[c].points;
        CHECK(pts[0].label == GroundLabel::Ground);
        CHECK(pts[1].label == GroundLabel::Obstacle);  // saw the wall base
        CHECK(pts[2].label == GroundLabel::Obstacle);  // wall
        CHECK(pts[3].label == GroundLabel::Obstacle);  // wall top
        CHECK(pts[4].label == GroundLabel::Ground);    // rescued
        CHECK(pts[5].label == GroundLabel::Ground);    // rescued
    }
}

TEST_CASE("floating point over ground is coarse-Ground but fine-Obstacle") {
    // A lone elevated return cannot be flagged by the slope machine (no
    // neighbour evidence) but the fitted ground line rejects it.
    SegParams P;
    PacketBuffer buf;
    buf.columns.resize(20);
    for (int c = 0; c < 20; ++c) {
        buf.columns[c].col = c;
        std::vector<SphericalPoint> pts = {sp(2, -2), sp(4, -2), sp(6, -2),
                                           sp(8, -2)};
        if (c == 7) pts.push_back(sp(9, 1.0));  // alpha 3/1 -> Change anyway
        buf.columns[c].points = column_of(pts);
        for (auto& p : buf.columns[c].points) p.col = c;
    }
    // Make it genuinely undetectable coarsely: no successor, gentle slope
    // from its predecessor is impossible here (3.0), so instead drop it far:
    buf.columns[7].points[4] = sp(40, 1.0);
    buf.columns[7].points[4].row = 4;
    buf.columns[7].points[4].col = 7;
    auto probe = buf.columns[7].points;
    coarse_segment_column(probe, P);
    CHECK(probe[4].label == GroundLabel::Ground);  // slope 3/32 < t_alpha
    segment_buffer(buf, P);
    CHECK(buf.columns[7].points[4].label == GroundLabel::Obstacle);
}
