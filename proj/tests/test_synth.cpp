#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <set>

#include "helpers.hpp"
#include "streamseg/synth.hpp"

using namespace streamseg;
using Catch::Matchers::WithinAbs;

namespace {

// All 32 beams at the same vertical angle: hand oracles stay scalar.
BeamCalibration uniform_calib(double vert_deg, double az_off = 0.0) {
    BeamCalibration c;
    for (int ch = 0; ch < kBeams; ++ch) {
        c.vertical_deg[ch] = vert_deg;
        c.azimuth_offset_deg[ch] = az_off;
    }
    c.finalize();  // equal keys: stable, so row == channel
    return c;
}

SceneSpec empty_scene(int columns = 48) {
    SceneSpec s;
    s.name = "t";
    s.seed = 1;
    s.columns = columns;
    s.noise_sigma = 0.0;
    s.ground.clear();  // no ground unless a test adds it
    return s;
}

int count_truth(const LabeledScan& scan, int32_t want) {
    int n = 0;
    for (int32_t t : scan.truth)
        if (t == want) ++n;
    return n;
}

}  // namespace

TEST_CASE("flat ground ranges follow the beam depression angle") {
    auto calib = uniform_calib(-10.0);
    auto s = empty_scene();
    s.ground = {{0.0, 0.0}};
    auto scan = raycast_scan(s, calib);

    const double t_exp = 2.0 / std::sin(deg2rad(10.0));  // mount height 2
    for (int j = 0; j < scan.cols; ++j) {
        for (int r = 0; r < scan.rows; ++r) {
            const auto& p = scan.at(r, j);
            if (r % 2 != j % 2) {
                CHECK(!p.valid());  // wrong firing parity: never filled
                continue;
            }
            REQUIRE(p.valid());
            CHECK_THAT(p.rho, WithinAbs(t_exp, 1e-9));
            CHECK_THAT(p.z, WithinAbs(-2.0, 1e-9));
            CHECK_THAT(p.rho_xy, WithinAbs(2.0 / std::tan(deg2rad(10.0)), 1e-9));
            CHECK(scan.truth_at(r, j) == kTruthGround);
        }
    }
    CHECK(scan.objects.empty());
}

TEST_CASE("ground beyond max range is dropped") {
    auto s = empty_scene();
    s.ground = {{0.0, 0.0}};
    // 0.5 deg depression: ground at ~229 m, past the 150 m default.
    auto far_scan = raycast_scan(s, uniform_calib(-0.5));
    CHECK(count_truth(far_scan, kTruthGround) == 0);

    s.max_range = 400.0;
    auto near_scan = raycast_scan(s, uniform_calib(-0.5));
    CHECK(count_truth(near_scan, kTruthGround) == 48 * 16);
}

TEST_CASE("upward beams see nothing over bare ground") {
    auto s = empty_scene();
    s.ground = {{0.0, 0.0}};
    auto scan = raycast_scan(s, uniform_calib(5.0));
    CHECK(count_truth(scan, kTruthGround) == 0);
    for (const auto& p : scan.pts) CHECK(!p.valid());
}

TEST_CASE("piecewise ground: rising far piece pulls the hit closer") {
    auto s = empty_scene();
    s.ground = {{0.0, 0.0}, {10.0, 0.1}};
    auto scan = raycast_scan(s, uniform_calib(-10.0));
    // Flat-piece hit lands at rho_xy 11.34 (outside its [0,10) range); the
    // rising piece satisfies t*dz = -2 + 0.1*(t*cos(phi) - 10).
    const double sp = std::sin(deg2rad(10.0)), cp = std::cos(deg2rad(10.0));
    const double t_exp = 3.0 / (sp + 0.1 * cp);
    const auto& p = scan.at(0, 0);
    REQUIRE(p.valid());
    CHECK_THAT(p.rho, WithinAbs(t_exp, 1e-9));
    CHECK_THAT(p.z, WithinAbs(-t_exp * sp, 1e-9));
    CHECK(p.rho_xy > 10.0);
    CHECK(scan.truth_at(0, 0) == kTruthGround);
}

TEST_CASE("box raycasts to its entry face") {
    auto calib = uniform_calib(0.0);
    auto s = empty_scene();  // 48 cols: 7.5 deg per column
    SceneObject box;
    box.type = SceneObject::Type::Box;
    box.id = 7;
    box.cx = 10;
    box.cy = 0;
    box.cz = 0;
    box.sx = 2;
    box.sy = 4;
    box.sz = 2;
    s.objects = {box};

    SECTION("head-on: range is the near face") {
        auto scan = raycast_scan(s, calib);
        for (int r = 0; r < scan.rows; r += 2) {
            REQUIRE(scan.at(r, 0).valid());
            CHECK_THAT(scan.at(r, 0).rho, WithinAbs(9.0, 1e-9));
            CHECK(scan.truth_at(r, 0) == 7);
        }
        // Columns 0, 1 and 47 subtend the face (|az| <= atan(2/9) = 12.53
        // deg); everything else misses.
        CHECK(count_truth(scan, 7) == 3 * 16);
        CHECK(!scan.at(0, 12).valid());  // 90 deg: clean miss
        REQUIRE(scan.at(1, 1).valid());
        CHECK_THAT(scan.at(1, 1).rho, WithinAbs(9.0 / std::cos(deg2rad(7.5)), 1e-9));
    }
    SECTION("a quarter turn swaps the faces") {
        s.objects[0].yaw_deg = 90.0;
        auto scan = raycast_scan(s, calib);
        REQUIRE(scan.at(0, 0).valid());
        CHECK_THAT(scan.at(0, 0).rho, WithinAbs(8.0, 1e-9));  // sy/2 toward us
    }
    SECTION("truth object summary matches the realized returns") {
        auto scan = raycast_scan(s, calib);
        REQUIRE(scan.objects.size() == 1);
        const auto& o = scan.objects[0];
        CHECK(o.id == 7);
        CHECK(o.points == count_truth(scan, 7));
        double sx = 0, sy = 0, sz2 = 0;
        double mnx = 1e9, mxx = -1e9;
        int n = 0;
        for (int j = 0; j < scan.cols; ++j)
            for (int r = 0; r < scan.rows; ++r)
                if (scan.truth_at(r, j) == 7) {
                    const auto& p = scan.at(r, j);
                    sx += p.x;
                    sy += p.y;
                    sz2 += p.z;
                    mnx = std::min(mnx, p.x);
                    mxx = std::max(mxx, p.x);
                    ++n;
                }
        REQUIRE(n == o.points);
        CHECK_THAT(o.cx, WithinAbs(sx / n, 1e-9));
        CHECK_THAT(o.cy, WithinAbs(sy / n, 1e-9));
        CHECK_THAT(o.cz, WithinAbs(sz2 / n, 1e-9));
        CHECK_THAT(o.min_x, WithinAbs(mnx, 1e-12));
        CHECK_THAT(o.max_x, WithinAbs(mxx, 1e-12));
        CHECK_THAT(o.centroid_rho_xy(), WithinAbs(std::hypot(o.cx, o.cy), 1e-12));
    }
}

TEST_CASE("cylinder raycasts to the near side surface") {
    auto calib = uniform_calib(0.0);
    auto s = empty_scene();
    SceneObject cyl;
    cyl.type = SceneObject::Type::Cylinder;
    cyl.id = 3;
    cyl.cx = 5;
    cyl.cy = 0;
    cyl.radius = 1.0;
    cyl.z0 = -1.0;
    cyl.z1 = 1.0;
    s.objects = {cyl};

    SECTION("head-on range is center minus radius") {
        auto scan = raycast_scan(s, calib);
        REQUIRE(scan.at(0, 0).valid());
        CHECK_THAT(scan.at(0, 0).rho, WithinAbs(4.0, 1e-9));
        CHECK(scan.truth_at(0, 0) == 3);
    }
    SECTION("offset beyond the radius misses") {
        s.objects[0].cy = 2.0;  // ray passes 2 m from the axis
        auto scan = raycast_scan(s, calib);
        CHECK(!scan.at(0, 0).valid());
    }
    SECTION("outside the vertical extent misses") {
        s.objects[0].z0 = 0.5;  // beam plane z=0 below the cylinder
        auto scan = raycast_scan(s, calib);
        CHECK(!scan.at(0, 0).valid());
    }
}

TEST_CASE("panel raycasts through its plane bounds") {
    auto calib = uniform_calib(0.0);
    auto s = empty_scene();
    SceneObject panel;
    panel.type = SceneObject::Type::Panel;
    panel.id = 4;
    panel.cx = 6;
    panel.cy = 0;
    panel.cz = 0;
    panel.yaw_deg = 180;  // normal facing the sensor
    panel.width = 2;
    panel.height = 2;
    s.objects = {panel};

    SECTION("frontal hit at the plane distance") {
        auto scan = raycast_scan(s, calib);
        REQUIRE(scan.at(0, 0).valid());
        CHECK_THAT(scan.at(0, 0).rho, WithinAbs(6.0, 1e-9));
        CHECK(scan.truth_at(0, 0) == 4);
    }
    SECTION("edge-on rays miss") {
        s.objects[0].cx = 0;
        s.objects[0].cy = 10;
        s.objects[0].yaw_deg = 90;  // normal +y; the 0-deg ray is parallel
        auto scan = raycast_scan(s, calib);
        CHECK(!scan.at(0, 0).valid());
        REQUIRE(scan.at(0, 12).valid());  // 90 deg column hits frontally
        CHECK_THAT(scan.at(0, 12).rho, WithinAbs(10.0, 1e-9));
    }
}

TEST_CASE("calibration azimuth offsets rotate the rays") {
    auto calib = uniform_calib(0.0, 90.0);
    auto s = empty_scene();
    SceneObject box;
    box.type = SceneObject::Type::Box;
    box.id = 1;
    box.cx = 0;
    box.cy = 10;
    box.cz = 0;
    box.sx = 4;
    box.sy = 2;
    box.sz = 2;
    s.objects = {box};
    auto scan = raycast_scan(s, calib);
    // Column 0 fires at azimuth 0 + 90 deg offset: straight at the box.
    REQUIRE(scan.at(0, 0).valid());
    CHECK_THAT(scan.at(0, 0).rho, WithinAbs(9.0, 1e-9));
}

TEST_CASE("face dropout removes returns from that face only") {
    auto calib = uniform_calib(0.0);
    auto s = empty_scene();
    SceneObject box;
    box.type = SceneObject::Type::Box;
    box.id = 1;
    box.cx = 10;
    box.cy = 0;
    box.cz = 0;
    box.sx = 2;
    box.sy = 4;
    box.sz = 2;
    s.objects = {box};

    auto base = raycast_scan(s, calib);
    const int full = count_truth(base, 1);
    REQUIRE(full > 0);

    SECTION("p=1 on the facing side erases the object") {
        s.objects[0].dropout = {{"nx", 1.0}};  // entered through low-x face
        CHECK(count_truth(raycast_scan(s, calib), 1) == 0);
    }
    SECTION("p=1 on the hidden side changes nothing") {
        s.objects[0].dropout = {{"px", 1.0}};
        CHECK(count_truth(raycast_scan(s, calib), 1) == full);
    }
    SECTION("p=1 on all faces erases the object") {
        s.objects[0].dropout = {{"all", 1.0}};
        CHECK(count_truth(raycast_scan(s, calib), 1) == 0);
    }
    SECTION("fractional dropout is seed-deterministic and partial") {
        s.objects[0].dropout = {{"all", 0.5}};
        s.seed = 99;
        const int a = count_truth(raycast_scan(s, calib), 1);
        const int b = count_truth(raycast_scan(s, calib), 1);
        CHECK(a == b);
        CHECK(a > 0);
        CHECK(a < full);
    }
}

TEST_CASE("range noise is seed-deterministic and clamped positive") {
    auto calib = testutil::test_calibration();
    SceneSpec s;
    s.name = "noisy";
    s.seed = 5;
    s.columns = 72;
    s.noise_sigma = 0.05;

    auto a = raycast_scan(s, calib);
    auto b = raycast_scan(s, calib);
    REQUIRE(a.pts.size() == b.pts.size());
    for (size_t i = 0; i < a.pts.size(); ++i) {
        CHECK(a.pts[i].rho == b.pts[i].rho);  // bitwise: same RNG stream
        CHECK(a.truth[i] == b.truth[i]);
    }

    s.seed = 6;
    auto c = raycast_scan(s, calib);
    int diff = 0;
    for (size_t i = 0; i < a.pts.size(); ++i)
        if (a.pts[i].valid() && c.pts[i].valid() &&
            a.pts[i].rho != c.pts[i].rho)
            ++diff;
    CHECK(diff > 0);

    s.noise_sigma = 10.0;  // silly noise: ranges must still clamp positive
    auto d = raycast_scan(s, calib);
    for (const auto& p : d.pts)
        if (p.valid()) CHECK(p.rho >= kRangeTick - 1e-12);
}

TEST_CASE("zero noise reproduces the analytic ranges bit for bit") {
    auto calib = uniform_calib(-10.0);
    auto s = empty_scene();
    s.ground = {{0.0, 0.0}};
    s.seed = 1;
    auto a = raycast_scan(s, calib);
    s.seed = 12345;  // seed is irrelevant without noise or dropout
    auto b = raycast_scan(s, calib);
    for (size_t i = 0; i < a.pts.size(); ++i) CHECK(a.pts[i].rho == b.pts[i].rho);
}

TEST_CASE("scan_to_buffer carries geometry and labels over") {
    auto calib = testutil::test_calibration();
    SceneSpec s;
    s.name = "b";
    s.seed = 3;
    s.columns = 48;
    s.noise_sigma = 0.01;
    auto scan = raycast_scan(s, calib);
    auto buf = scan_to_buffer(scan);

    REQUIRE(buf.columns.size() == 48);
    CHECK(buf.scan_end);
    for (int j = 0; j < 48; ++j) {
        const auto& col = buf.columns[j];
        CHECK(col.col == j);
        CHECK_THAT(col.azimuth_deg, WithinAbs(j * 360.0 / 48, 1e-12));
        for (int r = 0; r < kBeams; ++r) {
            const auto& p = col.points[r];
            const auto& q = scan.at(r, j);
            if (q.valid()) {
                CHECK(p.label == GroundLabel::Unlabeled);
                CHECK(p.rho == q.rho);
                CHECK(p.z == q.z);
            } else {
                CHECK(p.label == GroundLabel::Invalid);
            }
        }
    }
}

TEST_CASE("packetized scenes decode back to the same scan") {
    auto calib = default_calibration();
    SceneSpec s;
    s.name = "rt";
    s.seed = 17;
    s.columns = 120;  // five packets: exactly one standard buffer
    s.noise_sigma = 0.01;
    SceneObject box;
    box.type = SceneObject::Type::Box;
    box.id = 1;
    box.cx = 8;
    box.cy = 0;
    box.cz = -1.1;
    box.sx = 2;
    box.sy = 2;
    box.sz = 1.8;
    s.objects = {box};

    auto scan = raycast_scan(s, calib);
    auto pkts = scene_to_packets(scan, calib);
    REQUIRE(pkts.size() == 5);

    SegParams P;
    BufferAssembler as(calib, P);
    std::vector<PacketBuffer> bufs;
    for (const auto& p : pkts)
        for (auto& b : as.push(p)) bufs.push_back(std::move(b));
    if (auto b = as.flush()) bufs.push_back(std::move(*b));
    REQUIRE(bufs.size() == 1);
    REQUIRE(bufs[0].columns.size() == 120);

    int valid = 0;
    for (int j = 0; j < 120; ++j) {
        const auto& col = bufs[0].columns[j];
        CHECK(col.col == j);
        for (int r = 0; r < kBeams; ++r) {
            const auto& dec = col.points[r];
            const auto& src = scan.at(r, j);
            REQUIRE(dec.valid() == src.valid());
            if (!src.valid()) continue;
            ++valid;
            // Range survives 4 mm quantization; azimuths here are whole
            // centidegrees so angles decode exactly.
            CHECK_THAT(dec.rho, WithinAbs(src.rho, 0.002 + 1e-9));
            CHECK_THAT(dec.theta, WithinAbs(src.theta, 1e-9));
            CHECK_THAT(dec.phi, WithinAbs(src.phi, 1e-9));
            CHECK(dec.row == r);
        }
    }
    CHECK(valid > 1000);
}

TEST_CASE("packetizing rejects column counts that do not tile packets") {
    auto calib = testutil::test_calibration();
    SceneSpec s;
    s.name = "x";
    s.columns = 36;  // not a multiple of 24
    auto scan = raycast_scan(s, calib);
    CHECK_THROWS_AS(scene_to_packets(scan, calib), SceneError);
}

TEST_CASE("raycast rejects degenerate column counts") {
    SceneSpec s;
    s.columns = 1;
    CHECK_THROWS_AS(raycast_scan(s, testutil::test_calibration()), SceneError);
}

TEST_CASE("scene files round trip through JSON") {
    SceneSpec s;
    s.name = "round-trip";
    s.seed = 77;
    s.mount_height = 1.8;
    s.noise_sigma = 0.03;
    s.max_range = 90.0;
    s.columns = 720;
    s.ground = {{0.0, 0.0}, {12.0, 0.05}};
    SceneObject box;
    box.type = SceneObject::Type::Box;
    box.id = 1;
    box.cx = 5;
    box.cy = -2;
    box.cz = -1;
    box.sx = 1;
    box.sy = 2;
    box.sz = 3;
    box.yaw_deg = 33;
    box.dropout = {{"nx", 0.25}, {"all", 0.1}};
    SceneObject cyl;
    cyl.type = SceneObject::Type::Cylinder;
    cyl.id = 2;
    cyl.cx = -4;
    cyl.cy = 4;
    cyl.radius = 0.4;
    cyl.z0 = -1.8;
    cyl.z1 = 0.4;
    SceneObject panel;
    panel.type = SceneObject::Type::Panel;
    panel.id = 3;
    panel.cx = 0;
    panel.cy = 9;
    panel.cz = -0.5;
    panel.yaw_deg = 260;
    panel.width = 3;
    panel.height = 2;
    s.objects = {box, cyl, panel};

    const std::string path = "/tmp/streamseg_scene_rt.json";
    save_scene(s, path);
    auto r = load_scene(path);

    CHECK(r.name == s.name);
    CHECK(r.seed == s.seed);
    CHECK_THAT(r.mount_height, WithinAbs(s.mount_height, 1e-12));
    CHECK_THAT(r.noise_sigma, WithinAbs(s.noise_sigma, 1e-12));
    CHECK_THAT(r.max_range, WithinAbs(s.max_range, 1e-12));
    CHECK(r.columns == s.columns);
    REQUIRE(r.ground.size() == 2);
    CHECK_THAT(r.ground[1].rho_start, WithinAbs(12.0, 1e-12));
    CHECK_THAT(r.ground[1].slope, WithinAbs(0.05, 1e-12));
    REQUIRE(r.objects.size() == 3);
    CHECK(r.objects[0].type == SceneObject::Type::Box);
    CHECK_THAT(r.objects[0].yaw_deg, WithinAbs(33.0, 1e-12));
    REQUIRE(r.objects[0].dropout.size() == 2);
    CHECK(r.objects[0].dropout[0].face == "nx");
    CHECK_THAT(r.objects[0].dropout[1].p, WithinAbs(0.1, 1e-12));
    CHECK(r.objects[1].type == SceneObject::Type::Cylinder);
    CHECK_THAT(r.objects[1].radius, WithinAbs(0.4, 1e-12));
    CHECK_THAT(r.objects[1].z1, WithinAbs(0.4, 1e-12));
    CHECK(r.objects[2].type == SceneObject::Type::Panel);
    CHECK_THAT(r.objects[2].width, WithinAbs(3.0, 1e-12));

    // Same spec, same scan.
    auto calib = testutil::test_calibration();
    SceneSpec small = s;
    small.columns = 48;
    SceneSpec small_r = r;
    small_r.columns = 48;
    auto a = raycast_scan(small, calib);
    auto b = raycast_scan(small_r, calib);
    for (size_t i = 0; i < a.pts.size(); ++i) CHECK(a.pts[i].rho == b.pts[i].rho);
}

TEST_CASE("scene loading rejects garbage") {
    CHECK_THROWS_AS(load_scene("/tmp/definitely_missing_scene.json"),
                    SceneError);

    const std::string bad = "/tmp/streamseg_scene_bad.json";
    {
        std::ofstream f(bad);
        f << "{ not json";
    }
    CHECK_THROWS_AS(load_scene(bad), SceneError);

    const std::string badtype = "/tmp/streamseg_scene_badtype.json";
    {
        std::ofstream f(badtype);
        f << R"({"name":"x","objects":[{"type":"sphere","id":1}]})";
    }
    CHECK_THROWS_AS(load_scene(badtype), SceneError);
}

TEST_CASE("bundled scenes are well-formed and packetizable") {
    auto scenes = bundled_scenes();
    REQUIRE(scenes.size() == 7);
    std::set<std::string> names;
    for (const auto& s : scenes) {
        CHECK(!s.name.empty());
        names.insert(s.name);
        CHECK(s.columns % kColumnsPerPacket == 0);
        CHECK(s.columns >= 2);
    }
    CHECK(names.size() == scenes.size());  // distinct names

    // Every bundled scene raycasts and yields returns.
    auto calib = default_calibration();
    for (const auto& s : scenes) {
        auto scan = raycast_scan(s, calib);
        int valid = 0;
        for (const auto& p : scan.pts)
            if (p.valid()) ++valid;
        INFO(s.name);
        CHECK(valid > 1000);
    }

    // The dense scene really is dense.
    const auto& urban = scenes.back();
    CHECK(urban.objects.size() == 50);
}
