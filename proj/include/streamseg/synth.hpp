#pragma once

// Synthetic scene generation: analytic ray casting of simple primitives into
// a labeled scan, and re-encoding of a labeled scan into wire packets.
//
// A scene is ground (piecewise-conic height profile around the sensor) plus
// boxes, cylinders and thin vertical panels. Returns can be dropped per box
// face / per primitive (transparent windshields) and carry Gaussian range
// noise. Everything is deterministic for a given spec (seed included).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "streamseg/geometry.hpp"
#include "streamseg/packet.hpp"

namespace streamseg {

struct SceneError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GroundPiece {
    double rho_start = 0.0;  // piece begins at this horizontal range
    double slope = 0.0;      // dz per meter of horizontal range
};

struct FaceDropout {
    std::string face = "all";  // box: px nx py ny pz nz, or "all"
    double p = 0.0;
};

struct SceneObject {
    enum class Type { Box, Cylinder, Panel };
    Type type = Type::Box;
    int id = 0;
    double cx = 0, cy = 0, cz = 0;  // center (cylinder: cz unused)
    double sx = 0, sy = 0, sz = 0;  // box size
    double yaw_deg = 0;             // box/panel heading about z
    double radius = 0;              // cylinder
    double z0 = 0, z1 = 0;          // cylinder vertical extent
    double width = 0, height = 0;   // panel (width along local y)
    std::vector<FaceDropout> dropout;

    double dropout_for(const std::string& face) const {
        double best = 0.0;
        for (const auto& d : dropout)
            if (d.face == face || d.face == "all") best = std::max(best, d.p);
        return best;
    }
};

struct SceneSpec {
    std::string name = "scene";
    uint64_t seed = 1;
    double mount_height = 2.0;  // sensor height above the ground origin
    std::vector<GroundPiece> ground{{0.0, 0.0}};  // empty: no ground at all
    double noise_sigma = 0.0;   // m, range noise
    double max_range = 150.0;   // m, returns beyond are dropped
    int columns = 1800;         // M; must be a multiple of 24 to packetize
    std::vector<SceneObject> objects;

    double ground_z0() const { return -mount_height; }
};

// --------------------------------------------------------------------------
// JSON round trip for scene files.

inline void to_json(nlohmann::json& j, const SceneSpec& s) {
    j = nlohmann::json{{"name", s.name},
                       {"seed", s.seed},
                       {"mount_height", s.mount_height},
                       {"noise_sigma", s.noise_sigma},
                       {"max_range", s.max_range},
                       {"columns", s.columns}};
    j["ground"] = nlohmann::json::array();
    for (const auto& g : s.ground)
        j["ground"].push_back({{"rho_start", g.rho_start}, {"slope", g.slope}});
    j["objects"] = nlohmann::json::array();
    for (const auto& o : s.objects) {
        nlohmann::json jo;
        jo["id"] = o.id;
        switch (o.type) {
            case SceneObject::Type::Box:
                jo["type"] = "box";
                jo["center"] = {o.cx, o.cy, o.cz};
                jo["size"] = {o.sx, o.sy, o.sz};
                jo["yaw_deg"] = o.yaw_deg;
                break;
            case SceneObject::Type::Cylinder:
                jo["type"] = "cylinder";
                jo["center"] = {o.cx, o.cy};
                jo["radius"] = o.radius;
                jo["z"] = {o.z0, o.z1};
                break;
            case SceneObject::Type::Panel:
                jo["type"] = "panel";
                jo["center"] = {o.cx, o.cy, o.cz};
                jo["width"] = o.width;
                jo["height"] = o.height;
                jo["yaw_deg"] = o.yaw_deg;
                break;
        }
        if (!o.dropout.empty()) {
            jo["dropout"] = nlohmann::json::array();
            for (const auto& d : o.dropout)
                jo["dropout"].push_back({{"face", d.face}, {"p", d.p}});
        }
        j["objects"].push_back(jo);
    }
}

inline void from_json(const nlohmann::json& j, SceneSpec& s) {
    s = SceneSpec{};
    s.name = j.value("name", s.name);
    s.seed = j.value("seed", s.seed);
    s.mount_height = j.value("mount_height", s.mount_height);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.max_range = j.value("max_range", s.max_range);
    s.columns = j.value("columns", s.columns);
    if (j.contains("ground")) {
        s.ground.clear();
        for (const auto& g : j.at("ground"))
            s.ground.push_back(
                {g.value("rho_start", 0.0), g.value("slope", 0.0)});
    }
    s.objects.clear();
    if (j.contains("objects")) {
        for (const auto& jo : j.at("objects")) {
            SceneObject o;
            o.id = jo.value("id", 0);
            const std::string t = jo.value("type", "box");
            if (t == "box") {
                o.type = SceneObject::Type::Box;
                const auto c = jo.at("center");
                o.cx = c.at(0);
                o.cy = c.at(1);
                o.cz = c.at(2);
                const auto sz = jo.at("size");
                o.sx = sz.at(0);
                o.sy = sz.at(1);
                o.sz = sz.at(2);
                o.yaw_deg = jo.value("yaw_deg", 0.0);
            } else if (t == "cylinder") {
                o.type = SceneObject::Type::Cylinder;
                const auto c = jo.at("center");
                o.cx = c.at(0);
                o.cy = c.at(1);
                o.radius = jo.at("radius");
                const auto z = jo.at("z");
                o.z0 = z.at(0);
                o.z1 = z.at(1);
            } else if (t == "panel") {
                o.type = SceneObject::Type::Panel;
                const auto c = jo.at("center");
                o.cx = c.at(0);
                o.cy = c.at(1);
                o.cz = c.at(2);
                o.width = jo.at("width");
                o.height = jo.at("height");
                o.yaw_deg = jo.value("yaw_deg", 0.0);
            } else {
                throw SceneError("unknown object type: " + t);
            }
            if (jo.contains("dropout"))
                for (const auto& d : jo.at("dropout"))
                    o.dropout.push_back(
                        {d.value("face", std::string("all")), d.at("p")});
            s.objects.push_back(o);
        }
    }
}

inline SceneSpec load_scene(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SceneError("cannot open scene file: " + path);
    nlohmann::json j;
    try {
        f >> j;
        return j.get<SceneSpec>();
    } catch (const nlohmann::json::exception& e) {
        throw SceneError("bad scene file " + path + ": " + e.what());
    }
}

inline void save_scene(const SceneSpec& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw SceneError("cannot write scene file: " + path);
    nlohmann::json j = s;
    f << j.dump(2) << '\n';
}

// --------------------------------------------------------------------------
// Ray casting.

inline constexpr int32_t kTruthNoReturn = -2;
inline constexpr int32_t kTruthGround = -1;

struct TruthObject {
    int id = 0;
    int points = 0;  // visible returns after dropout
    double cx = 0, cy = 0, cz = 0;
    double min_x = 0, min_y = 0, min_z = 0;
    double max_x = 0, max_y = 0, max_z = 0;

    double centroid_rho_xy() const { return std::hypot(cx, cy); }
};

struct LabeledScan {
    int rows = kBeams;
    int cols = 0;
    std::vector<SphericalPoint> pts;  // index col * rows + row
    std::vector<int32_t> truth;       // same indexing
    std::vector<TruthObject> objects;
    SceneSpec spec;

    SphericalPoint& at(int row, int col) { return pts[col * rows + row]; }
    const SphericalPoint& at(int row, int col) const {
        return pts[col * rows + row];
    }
    int32_t truth_at(int row, int col) const { return truth[col * rows + row]; }
};

namespace detail {

struct RayHit {
    double t = std::numeric_limits<double>::infinity();
    int32_t truth = kTruthNoReturn;
    double dropout = 0.0;
};

struct Ray {
    double dx, dy, dz;  // unit direction from the sensor at the origin
};

inline void ground_hit(const SceneSpec& spec, const Ray& r, RayHit& best) {
    const double cosp = std::hypot(r.dx, r.dy);
    double zk = spec.ground_z0();
    for (size_t i = 0; i < spec.ground.size(); ++i) {
        const GroundPiece& g = spec.ground[i];
        const double rho_end = i + 1 < spec.ground.size()
                                   ? spec.ground[i + 1].rho_start
                                   : std::numeric_limits<double>::infinity();
        const double denom = r.dz - g.slope * cosp;
        if (std::fabs(denom) > 1e-12) {
            const double t = (zk - g.slope * g.rho_start) / denom;
            if (t > 0) {
                const double rho = t * cosp;
                if (rho >= g.rho_start - 1e-9 && rho < rho_end && t < best.t) {
                    best.t = t;
                    best.truth = kTruthGround;
                    best.dropout = 0.0;
                }
            }
        }
        if (i + 1 < spec.ground.size())
            zk += g.slope * (spec.ground[i + 1].rho_start - g.rho_start);
    }
}

inline void box_hit(const SceneObject& o, const Ray& r, RayHit& best) {
    const double yaw = deg2rad(o.yaw_deg);
    const double c = std::cos(yaw), s = std::sin(yaw);
    // Rotate world into the box frame (inverse yaw).
    auto to_local = [&](double x, double y) {
        return std::pair<double, double>{c * x + s * y, -s * x + c * y};
    };
    const auto [ox, oy] = to_local(-o.cx, -o.cy);
    const double oz = -o.cz;
    const auto [dx, dy] = to_local(r.dx, r.dy);
    const double dz = r.dz;

    const double half[3] = {o.sx / 2, o.sy / 2, o.sz / 2};
    const double org[3] = {ox, oy, oz};
    const double dir[3] = {dx, dy, dz};
    double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
    int axis = -1;
    int sign = 0;
    for (int a = 0; a < 3; ++a) {
        if (std::fabs(dir[a]) < 1e-12) {
            if (std::fabs(org[a]) > half[a]) return;
            continue;
        }
        double t0 = (-half[a] - org[a]) / dir[a];
        double t1 = (half[a] - org[a]) / dir[a];
        int face_sign = -1;  // entering through the -a face
        if (t0 > t1) {
            std::swap(t0, t1);
            face_sign = 1;
        }
        if (t0 > tmin) {
            tmin = t0;
            axis = a;
            sign = face_sign;
        }
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return;
    }
    if (axis < 0 || tmin <= 1e-9) return;  // origin inside or degenerate
    if (tmin < best.t) {
        static const char* kFaces[3][2] = {{"nx", "px"}, {"ny", "py"},
                                           {"nz", "pz"}};
        best.t = tmin;
        best.truth = o.id;
        best.dropout = o.dropout_for(kFaces[axis][sign > 0 ? 1 : 0]);
    }
}

inline void cylinder_hit(const SceneObject& o, const Ray& r, RayHit& best) {
    // Side surface only; vertical axis through (cx, cy).
    const double a = r.dx * r.dx + r.dy * r.dy;
    if (a < 1e-12) return;
    const double b = -2.0 * (r.dx * o.cx + r.dy * o.cy);
    const double cc = o.cx * o.cx + o.cy * o.cy - o.radius * o.radius;
    const double disc = b * b - 4 * a * cc;
    if (disc < 0) return;
    const double sq = std::sqrt(disc);
    for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
        if (t <= 1e-9) continue;
        const double z = t * r.dz;
        if (z < o.z0 || z > o.z1) continue;
        if (t < best.t) {
            best.t = t;
            best.truth = o.id;
            best.dropout = o.dropout_for("side");
        }
        break;  // nearest valid root wins
    }
}

inline void panel_hit(const SceneObject& o, const Ray& r, RayHit& best) {
    const double yaw = deg2rad(o.yaw_deg);
    // Panel plane normal (local +x) and in-plane width axis (local +y).
    const double nx = std::cos(yaw), ny = std::sin(yaw);
    const double wx = -std::sin(yaw), wy = std::cos(yaw);
    const double denom = r.dx * nx + r.dy * ny;
    if (std::fabs(denom) < 1e-12) return;
    const double t = (o.cx * nx + o.cy * ny) / denom;
    if (t <= 1e-9) return;
    const double px = t * r.dx - o.cx, py = t * r.dy - o.cy;
    const double pz = t * r.dz - o.cz;
    if (std::fabs(px * wx + py * wy) > o.width / 2) return;
    if (std::fabs(pz) > o.height / 2) return;
    if (t < best.t) {
        best.t = t;
        best.truth = o.id;
        best.dropout = o.dropout_for("all");
    }
}

}  // namespace detail

// Cast the full scan grid. Column j sits at azimuth j*360/M; each column
// carries only the rows whose wire channel belongs to that firing parity,
// mirroring what packet assembly produces.
inline LabeledScan raycast_scan(const SceneSpec& spec,
                                const BeamCalibration& calib) {
    if (spec.columns < 2) throw SceneError("scene needs at least 2 columns");
    LabeledScan scan;
    scan.cols = spec.columns;
    scan.pts.resize(static_cast<size_t>(scan.rows) * scan.cols);
    scan.truth.assign(scan.pts.size(), kTruthNoReturn);
    scan.spec = spec;

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const double col_step = 360.0 / spec.columns;
    for (int j = 0; j < scan.cols; ++j) {
        const double col_az = j * col_step;
        for (int row = 0; row < scan.rows; ++row) {
            SphericalPoint& p = scan.at(row, j);
            p.row = row;
            p.col = j;
            const int ch = calib.row_to_channel[row];
            if (ch % kFiringsPerBlock != j % kFiringsPerBlock) continue;

            const double phi = calib.vertical_deg[ch];
            const double theta =
                wrap_deg(col_az + calib.azimuth_offset_deg[ch]);
            const double phi_r = deg2rad(phi), th_r = deg2rad(theta);
            detail::Ray ray{std::cos(phi_r) * std::cos(th_r),
                            std::cos(phi_r) * std::sin(th_r),
                            std::sin(phi_r)};

            detail::RayHit hit;
            if (!spec.ground.empty()) detail::ground_hit(spec, ray, hit);
            for (const auto& o : spec.objects) {
                switch (o.type) {
                    case SceneObject::Type::Box:
                        detail::box_hit(o, ray, hit);
                        break;
                    case SceneObject::Type::Cylinder:
                        detail::cylinder_hit(o, ray, hit);
                        break;
                    case SceneObject::Type::Panel:
                        detail::panel_hit(o, ray, hit);
                        break;
                }
            }
            if (hit.truth == kTruthNoReturn || hit.t > spec.max_range)
                continue;
            if (hit.dropout > 0.0 && uni(rng) < hit.dropout) continue;
            double rho = hit.t;
            if (spec.noise_sigma > 0.0)
                rho = std::max(kRangeTick, rho + spec.noise_sigma * gauss(rng));
            p = make_point(rho, phi, theta, row, j);
            scan.truth[static_cast<size_t>(j) * scan.rows + row] = hit.truth;
        }
    }

    // Truth-object summaries from the realized returns.
    std::map<int, TruthObject> objs;
    for (int j = 0; j < scan.cols; ++j) {
        for (int row = 0; row < scan.rows; ++row) {
            const int32_t t = scan.truth_at(row, j);
            if (t < 0) continue;
            const SphericalPoint& p = scan.at(row, j);
            auto [it, fresh] = objs.try_emplace(t);
            TruthObject& o = it->second;
            if (fresh) {
                o.id = t;
                o.min_x = o.max_x = p.x;
                o.min_y = o.max_y = p.y;
                o.min_z = o.max_z = p.z;
            }
            ++o.points;
            o.cx += p.x;
            o.cy += p.y;
            o.cz += p.z;
            o.min_x = std::min(o.min_x, p.x);
            o.max_x = std::max(o.max_x, p.x);
            o.min_y = std::min(o.min_y, p.y);
            o.max_y = std::max(o.max_y, p.y);
            o.min_z = std::min(o.min_z, p.z);
            o.max_z = std::max(o.max_z, p.z);
        }
    }
    for (auto& [id, o] : objs) {
        o.cx /= o.points;
        o.cy /= o.points;
        o.cz /= o.points;
        scan.objects.push_back(o);
    }
    return scan;
}

// One buffer spanning the whole scan, bypassing the wire format. Labels are
// reset to Unlabeled/Invalid.
inline PacketBuffer scan_to_buffer(const LabeledScan& scan) {
    PacketBuffer buf;
    buf.scan_id = 0;
    buf.scan_end = true;
    const double col_step = 360.0 / scan.cols;
    buf.columns.resize(scan.cols);
    for (int j = 0; j < scan.cols; ++j) {
        BufferColumn& col = buf.columns[j];
        col.azimuth_deg = j * col_step;
        col.col = j;
        for (int row = 0; row < scan.rows; ++row) {
            SphericalPoint p = scan.at(row, j);
            p.label = p.valid() ? GroundLabel::Unlabeled : GroundLabel::Invalid;
            col.points[row] = p;
        }
    }
    return buf;
}

// Re-encode a labeled scan as wire packets: 2 columns per block, 12 blocks
// per packet. Ranges are quantized to 4 mm ticks (round to nearest).
inline std::vector<DataPacket> scene_to_packets(const LabeledScan& scan,
                                                const BeamCalibration& calib) {
    if (scan.cols % kColumnsPerPacket != 0)
        throw SceneError("column count must be a multiple of 24 to packetize");
    const double col_step = 360.0 / scan.cols;
    std::vector<DataPacket> out(scan.cols / kColumnsPerPacket);
    for (int j = 0; j < scan.cols; j += kFiringsPerBlock) {
        const int block = (j / kFiringsPerBlock) % kBlocksPerPacket;
        DataPacket& pkt = out[j / kColumnsPerPacket];
        DataBlock& blk = pkt.blocks[block];
        blk.azimuth_cd = static_cast<uint16_t>(
            std::lround(j * col_step * 100.0) % kMaxAzimuthCd);
        for (int f = 0; f < kFiringsPerBlock; ++f) {
            for (int ch = f; ch < kBeams; ch += kFiringsPerBlock) {
                const SphericalPoint& p =
                    scan.at(calib.channel_to_row[ch], j + f);
                if (!p.valid()) continue;
                const long ticks = std::lround(p.rho / kRangeTick);
                blk.returns[ch].range_ticks = static_cast<uint16_t>(
                    std::clamp(ticks, 1L, 65535L));
                blk.returns[ch].reflectivity = 40;  // flat synthetic albedo
            }
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// Bundled scene corpus.

inline SceneSpec scene_flat_ground() {
    SceneSpec s;
    s.name = "flat-ground";
    s.seed = 11;
    s.noise_sigma = 0.02;
    return s;
}

inline SceneSpec scene_sloped_ground() {
    SceneSpec s;
    s.name = "sloped-ground";
    s.seed = 12;
    s.noise_sigma = 0.02;
    s.ground = {{0.0, std::tan(deg2rad(2.0))}};  // uniform 2 deg pitch
    return s;
}

// Two-box car (body + cabin) at an oblique heading; the cabin's sensor-facing
// face is the windshield and drops 30% of its returns. The oblique view plus
// the dropout make the initial CCL pass split the car for many noise seeds;
// refinement is expected to repair the split.
inline SceneSpec scene_car_window(uint64_t seed = 21) {
    SceneSpec s;
    s.name = "car-window-dropout";
    s.seed = seed;
    s.noise_sigma = 0.02;
    SceneObject body;
    body.type = SceneObject::Type::Box;
    body.id = 1;
    body.cx = 10.0;
    body.cy = 0.0;
    body.cz = -1.55;  // on ground (mount height 2): body 0.9 m tall
    body.sx = 4.2;
    body.sy = 1.8;
    body.sz = 0.9;
    body.yaw_deg = 52.0;
    SceneObject cabin = body;
    cabin.cx = 10.0 + 0.35 * std::cos(deg2rad(52.0));
    cabin.cy = 0.0 + 0.35 * std::sin(deg2rad(52.0));
    cabin.cz = -0.78;  // cabin 0.65 m on top of the body
    cabin.sx = 2.1;
    cabin.sy = 1.7;
    cabin.sz = 0.64;
    cabin.yaw_deg = 52.0;
    cabin.dropout = {{"nx", 0.3}, {"py", 0.3}};  // windshield + glass flank
    s.objects = {body, cabin};
    return s;
}

inline SceneSpec scene_pole_occlusion() {
    SceneSpec s;
    s.name = "pole-occlusion";
    s.seed = 31;
    s.noise_sigma = 0.02;
    SceneObject pole;
    pole.type = SceneObject::Type::Cylinder;
    pole.id = 1;
    pole.cx = 6.0;
    pole.cy = 0.0;
    pole.radius = 0.04;
    pole.z0 = -2.0;
    pole.z1 = 1.0;
    SceneObject wall;
    wall.type = SceneObject::Type::Panel;
    wall.id = 2;
    wall.cx = 12.0;
    wall.cy = 0.0;
    wall.cz = -1.2;
    wall.width = 3.0;
    wall.height = 1.6;
    wall.yaw_deg = 0.0;
    s.objects = {pole, wall};
    return s;
}

inline SceneSpec scene_two_pedestrians(double gap_m = 2.0) {
    SceneSpec s;
    s.name = "two-pedestrians";
    s.seed = 41;
    s.noise_sigma = 0.02;
    const double r = 0.3;
    const double half = (gap_m + 2 * r) / 2.0;  // center spacing for the gap
    for (int i = 0; i < 2; ++i) {
        SceneObject ped;
        ped.type = SceneObject::Type::Cylinder;
        ped.id = i + 1;
        ped.cx = 7.0;
        ped.cy = i == 0 ? -half : half;
        ped.radius = r;
        ped.z0 = -2.0;
        ped.z1 = -0.3;
        s.objects.push_back(ped);
    }
    return s;
}

inline SceneSpec scene_seam_box() {
    SceneSpec s;
    s.name = "seam-box";
    s.seed = 51;
    s.noise_sigma = 0.02;
    SceneObject box;
    box.type = SceneObject::Type::Box;
    box.id = 1;
    box.cx = 10.0;  // straight down azimuth 0: straddles the scan seam
    box.cy = 0.0;
    box.cz = -1.4;
    box.sx = 1.0;
    box.sy = 1.2;
    box.sz = 1.2;
    s.objects = {box};
    return s;
}

// Dense downtown scene: ~50 objects (cars, pedestrians, poles, panels) laid
// out on a jittered grid so nothing overlaps. Deterministic for the seed.
inline SceneSpec scene_urban_block(uint64_t seed = 7, int objects = 50) {
    SceneSpec s;
    s.name = "urban-block";
    s.seed = seed;
    s.noise_sigma = 0.02;
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    int id = 1;
    // Ring layout: radii 6..34 m, enough angular pitch per ring to keep
    // multi-meter gaps between neighbours.
    double radius = 6.0;
    while (static_cast<int>(s.objects.size()) < objects && radius < 36.0) {
        const int slots = static_cast<int>(radius * 0.7);
        const double pitch = 360.0 / slots;
        for (int k = 0;
             k < slots && static_cast<int>(s.objects.size()) < objects; ++k) {
            if (uni(rng) < 0.35) continue;  // leave holes in the ring
            const double az = (k + 0.3 + 0.4 * uni(rng)) * pitch;
            const double d = radius + 1.5 * uni(rng);
            const double x = d * std::cos(deg2rad(az));
            const double y = d * std::sin(deg2rad(az));
            const double kind = uni(rng);
            SceneObject o;
            o.id = id++;
            if (kind < 0.35) {  // car-sized box
                o.type = SceneObject::Type::Box;
                o.cx = x;
                o.cy = y;
                o.cz = -1.3;
                o.sx = 4.0;
                o.sy = 1.8;
                o.sz = 1.4;
                o.yaw_deg = az + 60.0 + 60.0 * uni(rng);
            } else if (kind < 0.6) {  // pedestrian
                o.type = SceneObject::Type::Cylinder;
                o.cx = x;
                o.cy = y;
                o.radius = 0.3;
                o.z0 = -2.0;
                o.z1 = -0.2;
            } else if (kind < 0.8) {  // pole
                o.type = SceneObject::Type::Cylinder;
                o.cx = x;
                o.cy = y;
                o.radius = 0.12;
                o.z0 = -2.0;
                o.z1 = 2.0;
            } else {  // fence/wall piece
                o.type = SceneObject::Type::Panel;
                o.cx = x;
                o.cy = y;
                o.cz = -1.1;
                o.width = 2.5;
                o.height = 1.8;
                o.yaw_deg = az + 25.0 * (uni(rng) - 0.5);
            }
            s.objects.push_back(o);
        }
        radius += 4.5;
    }
    return s;
}

inline std::vector<SceneSpec> bundled_scenes() {
    return {scene_flat_ground(),     scene_sloped_ground(),
            scene_car_window(),      scene_pole_occlusion(),
            scene_two_pedestrians(), scene_seam_box(),
            scene_urban_block()};
}

}  // namespace streamseg
