// streamseg: stream spinning-LiDAR packets through ground segmentation and
// clustering, generate synthetic scenes, evaluate against truth, and bench
// the pipeline.
//
// Exit codes: 0 success, 1 usage, 2 I/O or decode, 3 metric gate failure.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "streamseg/eval.hpp"
#include "streamseg/io.hpp"
#include "streamseg/log.hpp"
#include "streamseg/packet.hpp"
#include "streamseg/pipeline.hpp"
#include "streamseg/queue.hpp"
#include "streamseg/synth.hpp"

namespace fs = std::filesystem;
using namespace streamseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;
constexpr int kExitGate = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct GateFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::atomic<bool> g_interrupted{false};
void on_sigint(int) { g_interrupted.store(true); }

// ---------------------------------------------------------------------------
// Segmentation parameters: config file plus individual flag overrides, flags
// winning.

struct ParamsCli {
    std::string config_path;
    SegParams flags;  // receives flag values; only counted options apply
    std::vector<std::pair<CLI::Option*, std::function<void(SegParams&)>>> ups;

    void attach(CLI::App* app) {
        app->add_option("--config", config_path,
                        "JSON parameter file (missing keys keep defaults)")
            ->check(CLI::ExistingFile);
        auto reg = [&](CLI::Option* o, auto member) {
            ups.emplace_back(o, [this, member](SegParams& dst) {
                dst.*member = flags.*member;
            });
        };
        reg(app->add_option("--buffer-packets", flags.buffer_packets,
                            "packets per streaming buffer"),
            &SegParams::buffer_packets);
        reg(app->add_option("--t-alpha", flags.t_alpha,
                            "ground slope change threshold, deg"),
            &SegParams::t_alpha);
        reg(app->add_option("--t-delta-rho", flags.t_delta_rho,
                            "close-continuation horizontal range gap, m"),
            &SegParams::t_delta_rho);
        reg(app->add_option("--virtual-point-z", flags.virtual_point_z,
                            "seed height of the per-column ground walk, m"),
            &SegParams::virtual_point_z);
        reg(app->add_option("--block-size", flags.block_size,
                            "columns pooled per line-fit block"),
            &SegParams::block_size);
        reg(app->add_option("--t-p2line", flags.t_p2line,
                            "point-to-line ground distance, m"),
            &SegParams::t_p2line);
        reg(app->add_option("--line-slope-min", flags.line_slope_min,
                            "accepted ground line slope, lower"),
            &SegParams::line_slope_min);
        reg(app->add_option("--line-slope-max", flags.line_slope_max,
                            "accepted ground line slope, upper"),
            &SegParams::line_slope_max);
        reg(app->add_option("--line-intercept-band", flags.line_intercept_band,
                            "accepted ground line intercept band, m"),
            &SegParams::line_intercept_band);
        reg(app->add_option("--t-ccl", flags.t_ccl,
                            "clustering range-connectivity threshold, m"),
            &SegParams::t_ccl);
        reg(app->add_option("--search-cols-near", flags.search_cols_near,
                            "cluster search window, near points"),
            &SegParams::search_cols_near);
        reg(app->add_option("--search-cols-far", flags.search_cols_far,
                            "cluster search window, far points"),
            &SegParams::search_cols_far);
        reg(app->add_option("--near-far-range", flags.near_far_range,
                            "near/far window boundary, m"),
            &SegParams::near_far_range);
        reg(app->add_option("--t-neighbour", flags.t_neighbour,
                            "max column gap for neighbour linkage"),
            &SegParams::t_neighbour);
        reg(app->add_option("--mutual-n", flags.mutual_n,
                            "order statistic used as cluster distance"),
            &SegParams::mutual_n);
        reg(app->add_option("--t-merge", flags.t_merge,
                            "refinement merge distance, m"),
            &SegParams::t_merge);
        reg(app->add_option("--min-cluster-size", flags.min_cluster_size,
                            "clusters below this size are noise"),
            &SegParams::min_cluster_size);
        reg(app->add_flag("--refine,!--no-refine", flags.refine_enabled,
                          "enable/disable cluster refinement"),
            &SegParams::refine_enabled);
    }

    SegParams resolve() const {
        SegParams p;
        if (!config_path.empty()) p = load_params(config_path);
        for (const auto& [opt, apply] : ups)
            if (opt->count() > 0) apply(p);
        p.validate();
        return p;
    }
};

BeamCalibration resolve_calib(const std::string& path) {
    if (path.empty()) return default_calibration();
    return load_calibration(path);
}

// ---------------------------------------------------------------------------
// Packet acquisition.

struct DecodeTally {
    uint64_t total = 0;
    uint64_t failed = 0;

    double rate() const {
        return total == 0 ? 0.0 : static_cast<double>(failed) / total;
    }
    void check_rate() const {
        if (total > 0 && rate() > 0.01)
            throw IoError("decode failure rate " +
                          std::to_string(100.0 * rate()) +
                          "% exceeds the 1% budget (" +
                          std::to_string(failed) + "/" +
                          std::to_string(total) + " packets)");
    }
};

std::vector<DataPacket> decode_payloads(
    const std::vector<std::vector<uint8_t>>& payloads, DecodeTally& tally) {
    std::vector<DataPacket> out;
    out.reserve(payloads.size());
    for (const auto& pl : payloads) {
        ++tally.total;
        try {
            out.push_back(decode_packet(pl));
        } catch (const DecodeError& e) {
            ++tally.failed;
            LOG_DEBUG("packet " << (tally.total - 1) << ": " << e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// run

struct RunCli {
    std::string pcap, raw, scene, calib;
    int udp_port = 0;
    int pcap_port = pcapfmt::kDefaultPort;
    std::string out_dir = ".";
    std::vector<std::string> formats;
    bool batch = false;
    bool include_points = false;
    int max_scans = 0;   // udp: stop after this many scans (0 = until ^C)
    int idle_ms = 0;     // udp: stop after this long with no datagrams
    ParamsCli params;
};

// Captures labeled points per open scan so PLY output can show ground and
// noise, which the emitted clusters alone cannot.
struct PlyCapture {
    bool enabled = false;
    struct Cell {
        PlyPoint p;
        int row, col;
    };
    std::map<uint64_t, std::vector<Cell>> by_scan;

    void buffer(const PacketBuffer& buf) {
        if (!enabled) return;
        auto& v = by_scan[buf.scan_id];
        for (const auto& col : buf.columns)
            for (const auto& p : col.points) {
                if (!p.valid()) continue;
                v.push_back({{p.x, p.y, p.z,
                              static_cast<uint8_t>(p.label), -1},
                             p.row, p.col});
            }
    }

    std::vector<PlyPoint> finish(const ScanResult& r) {
        std::vector<PlyPoint> out;
        auto it = by_scan.find(r.scan_id);
        if (it == by_scan.end()) return out;
        std::map<std::pair<int, int>, int32_t> cluster_of;
        for (const auto& c : r.clusters)
            for (const auto& p : c.points)
                cluster_of[{p.col, p.row}] = static_cast<int32_t>(c.id);
        out.reserve(it->second.size());
        for (auto& cell : it->second) {
            auto f = cluster_of.find({cell.col, cell.row});
            if (f != cluster_of.end()) cell.p.cluster = f->second;
            out.push_back(cell.p);
        }
        by_scan.erase(it);
        return out;
    }
};

struct RunSink {
    fs::path dir;
    bool want_ndjson = false;
    bool include_points = false;
    PlyCapture ply;
    std::ofstream ndjson;
    uint64_t scans = 0, clusters = 0;

    void open() {
        if (want_ndjson) {
            ndjson.open(dir / "clusters.ndjson");
            if (!ndjson)
                throw IoError("cannot write " +
                              (dir / "clusters.ndjson").string());
        }
    }

    void completed(const ScanResult& r) {
        ++scans;
        clusters += r.clusters.size();
        if (want_ndjson) {
            auto sorted = r.clusters;
            std::sort(sorted.begin(), sorted.end(),
                      [](const auto& a, const auto& b) { return a.id < b.id; });
            for (const auto& c : sorted)
                write_cluster_ndjson(ndjson, r.scan_id, c, include_points);
        }
        if (ply.enabled) {
            auto pts = ply.finish(r);
            const fs::path path =
                dir / ("scan_" + std::to_string(r.scan_id) + ".ply");
            std::ofstream f(path);
            if (!f) throw IoError("cannot write " + path.string());
            write_ply(f, pts);
        }
        std::printf(
            "scan %llu: columns=%d ground=%llu obstacle=%llu in %zu clusters, "
            "noise=%llu, invalid=%llu\n",
            static_cast<unsigned long long>(r.scan_id), r.columns,
            static_cast<unsigned long long>(r.ground_points),
            static_cast<unsigned long long>(r.obstacle_points),
            r.clusters.size(), static_cast<unsigned long long>(r.noise_points),
            static_cast<unsigned long long>(r.invalid_points));
    }
};

void drain(Pipeline& pipe, RunSink& sink) {
    while (auto r = pipe.take_completed()) sink.completed(*r);
}

void drive_offline(const std::vector<DataPacket>& pkts,
                   const BeamCalibration& calib, const SegParams& P,
                   bool batch, RunSink& sink) {
    BufferAssembler as =
        batch ? BufferAssembler(calib, static_cast<int>(pkts.size()) + 1)
              : BufferAssembler(calib, P);
    Pipeline pipe(P);
    for (const auto& pk : pkts) {
        for (auto& buf : as.push(pk)) {
            pipe.process_buffer(buf);
            sink.ply.buffer(buf);
            drain(pipe, sink);
        }
    }
    if (auto buf = as.flush()) {
        pipe.process_buffer(*buf);
        sink.ply.buffer(*buf);
    }
    pipe.finish();
    drain(pipe, sink);
}

int cmd_run(const RunCli& cli) {
    const SegParams P = cli.params.resolve();
    const BeamCalibration calib = resolve_calib(cli.calib);

    std::error_code ec;
    fs::create_directories(cli.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cli.out_dir);

    std::set<std::string> fmt(cli.formats.begin(), cli.formats.end());
    if (fmt.empty()) fmt.insert("ndjson");

    RunSink sink;
    sink.dir = cli.out_dir;
    sink.want_ndjson = fmt.count("ndjson") > 0;
    sink.include_points = cli.include_points;
    sink.ply.enabled = fmt.count("ply") > 0;
    sink.open();

    DecodeTally tally;
    if (cli.udp_port > 0) {
        if (cli.batch)
            throw UsageError(
                "--batch needs the whole input up front; use it with --pcap, "
                "--raw or --scene");
        std::signal(SIGINT, on_sigint);
        UdpSource src(cli.udp_port);
        BoundedQueue<std::vector<uint8_t>> q(256, OverflowPolicy::DropOldest);
        std::thread rx([&] {
            double idle = 0;
            bool seen = false;
            while (!g_interrupted.load()) {
                auto d = src.recv(50);
                if (!d) {
                    idle += 50;
                    if (cli.idle_ms > 0 && seen && idle >= cli.idle_ms) break;
                    continue;
                }
                idle = 0;
                seen = true;
                q.push(std::move(*d));
            }
            q.close();
        });

        BufferAssembler as(calib, P);
        Pipeline pipe(P);
        uint64_t done = 0;
        while (auto d = q.pop()) {
            ++tally.total;
            std::optional<DataPacket> pkt;
            try {
                pkt = decode_packet(*d);
            } catch (const DecodeError&) {
                ++tally.failed;
                continue;
            }
            for (auto& buf : as.push(*pkt)) {
                pipe.process_buffer(buf);
                sink.ply.buffer(buf);
            }
            while (auto r = pipe.take_completed()) {
                sink.completed(*r);
                ++done;
            }
            if (cli.max_scans > 0 &&
                done >= static_cast<uint64_t>(cli.max_scans)) {
                g_interrupted.store(true);
                break;
            }
        }
        g_interrupted.store(true);
        rx.join();
        // Interrupt or idle: flush the scan in flight.
        if (auto buf = as.flush()) {
            pipe.process_buffer(*buf);
            sink.ply.buffer(*buf);
        }
        pipe.finish();
        drain(pipe, sink);
        if (q.dropped() > 0)
            std::fprintf(stderr, "warning: dropped %llu datagrams\n",
                         static_cast<unsigned long long>(q.dropped()));
    } else {
        std::vector<DataPacket> pkts;
        if (!cli.scene.empty()) {
            auto spec = load_scene(cli.scene);
            auto scan = raycast_scan(spec, calib);
            pkts = scene_to_packets(scan, calib);
            tally.total = pkts.size();
        } else {
            std::vector<std::vector<uint8_t>> payloads;
            if (!cli.pcap.empty()) {
                PcapStats st;
                payloads = read_pcap_file(cli.pcap, cli.pcap_port, &st);
                if (st.delivered == 0)
                    throw IoError("no sensor packets in " + cli.pcap);
            } else {
                payloads = read_raw_file(cli.raw);
            }
            pkts = decode_payloads(payloads, tally);
            tally.check_rate();
        }
        drive_offline(pkts, calib, P, cli.batch, sink);
    }

    std::printf("done: %llu scans, %llu clusters",
                static_cast<unsigned long long>(sink.scans),
                static_cast<unsigned long long>(sink.clusters));
    if (tally.total > 0)
        std::printf(", %llu/%llu packets decoded",
                    static_cast<unsigned long long>(tally.total - tally.failed),
                    static_cast<unsigned long long>(tally.total));
    std::printf("\n");
    return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchCli {
    std::string pcap, raw, scene, name, calib;
    int pcap_port = pcapfmt::kDefaultPort;
    std::string out_dir = ".";
    int repetitions = 100;
    ParamsCli params;
};

SceneSpec bundled_by_name(const std::string& name) {
    for (auto& s : bundled_scenes())
        if (s.name == name) return s;
    std::string names;
    for (const auto& s : bundled_scenes()) names += " " + s.name;
    throw UsageError("no bundled scene named '" + name + "'; available:" +
                     names);
}

// Canonical partition signature: point sets per cluster, both levels sorted.
std::string partition_signature(const ScanResult& r) {
    std::vector<std::string> parts;
    for (const auto& c : r.clusters) {
        std::vector<std::pair<int, int>> cells;
        for (const auto& p : c.points) cells.emplace_back(p.col, p.row);
        std::sort(cells.begin(), cells.end());
        std::string s;
        for (auto [col, row] : cells)
            s += std::to_string(col) + ":" + std::to_string(row) + ";";
        parts.push_back(std::move(s));
    }
    std::sort(parts.begin(), parts.end());
    std::string sig;
    for (auto& p : parts) {
        sig += p;
        sig += "|";
    }
    return sig;
}

int cmd_bench(const BenchCli& cli) {
    const SegParams P = cli.params.resolve();
    const BeamCalibration calib = resolve_calib(cli.calib);

    std::vector<DataPacket> pkts;
    std::string label;
    if (!cli.scene.empty() || !cli.name.empty()) {
        SceneSpec spec = cli.scene.empty() ? bundled_by_name(cli.name)
                                           : load_scene(cli.scene);
        label = spec.name;
        pkts = scene_to_packets(raycast_scan(spec, calib), calib);
    } else {
        DecodeTally tally;
        std::vector<std::vector<uint8_t>> payloads =
            cli.pcap.empty() ? read_raw_file(cli.raw)
                             : read_pcap_file(cli.pcap, cli.pcap_port);
        label = cli.pcap.empty() ? cli.raw : cli.pcap;
        pkts = decode_payloads(payloads, tally);
        tally.check_rate();
    }
    if (pkts.empty()) throw IoError("bench input holds no packets");

    std::error_code ec;
    fs::create_directories(cli.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cli.out_dir);

    std::vector<ScanResult> all;
    std::vector<std::string> first_sigs;
    bool deterministic = true;
    const double w0 = wall_us();
    for (int rep = 0; rep < cli.repetitions; ++rep) {
        auto scans = run_stream(pkts, calib, P);
        if (rep == 0) {
            for (const auto& s : scans)
                first_sigs.push_back(partition_signature(s));
        } else {
            for (size_t i = 0; i < scans.size(); ++i)
                if (i >= first_sigs.size() ||
                    partition_signature(scans[i]) != first_sigs[i])
                    deterministic = false;
        }
        for (auto& s : scans) all.push_back(std::move(s));
    }
    const double wall_total = wall_us() - w0;

    auto rep_sum = summarize_latency(all);
    const fs::path csv = fs::path(cli.out_dir) / "latency.csv";
    std::ofstream f(csv);
    if (!f) throw IoError("cannot write " + csv.string());
    write_latency_csv(f, all);

    std::printf("bench %s: %zu scans (%zu buffers), %d repetitions\n",
                label.c_str(), rep_sum.scans, rep_sum.buffers,
                cli.repetitions);
    std::printf("%-12s %10s %10s %10s %10s\n", "stage", "mean_us", "p50_us",
                "p99_us", "max_us");
    auto row = [](const char* name, const LatencyDist& d) {
        std::printf("%-12s %10.1f %10.1f %10.1f %10.1f\n", name, d.mean,
                    d.p50, d.p99, d.max);
    };
    row("ground", rep_sum.ground_us);
    row("cluster", rep_sum.cluster_us);
    row("buffer", rep_sum.buffer_us);
    row("scan_cpu", rep_sum.scan_cpu_us);
    row("scan_lag", rep_sum.completion_lag_us);
    std::printf(
        "reference (i7-7820 workstation, 32x1800 @ 600 rpm): ground %.0f us, "
        "cluster %.0f us, total %.0f us per scan\n",
        kReferenceTimings.ground_us, kReferenceTimings.cluster_us,
        kReferenceTimings.total_us);
    std::printf("wall total: %.1f ms; cpu total: %.1f ms\n",
                wall_total / 1000.0, rep_sum.cpu_total_us / 1000.0);
    std::printf("partitions identical across repetitions: %s\n",
                deterministic ? "yes" : "NO");
    std::printf("latency rows: %s\n", csv.string().c_str());
    if (!deterministic)
        throw IoError("cluster partitions varied across repetitions");
    return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalCli {
    std::vector<std::string> scenes;
    std::string corpus_dir, calib;
    bool bundled = false;
    bool batch = false;
    uint64_t seed = 0;  // 0: keep each scene's own seed
    double gate_range = 30.0;
    int min_truth_points = 1;
    std::string csv_path, json_path;
    std::string refused_pcap, refused_raw;
    std::optional<double> min_tpr, min_osr, min_usr, min_precision,
        min_recall, max_fnr;
    ParamsCli params;
};

int cmd_eval(const EvalCli& cli) {
    if (!cli.refused_pcap.empty() || !cli.refused_raw.empty())
        throw UsageError(
            "eval needs truth, which packet captures do not carry; evaluate "
            "scene files (--scene/--corpus/--bundled) instead");

    const SegParams P = cli.params.resolve();
    const BeamCalibration calib = resolve_calib(cli.calib);

    std::vector<SceneSpec> scenes;
    if (cli.bundled)
        for (auto& s : bundled_scenes()) scenes.push_back(std::move(s));
    for (const auto& path : cli.scenes) scenes.push_back(load_scene(path));
    if (!cli.corpus_dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(cli.corpus_dir))
            if (e.path().extension() == ".json") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (const auto& p : files) scenes.push_back(load_scene(p.string()));
        if (files.empty())
            throw IoError("no .json scene files in " + cli.corpus_dir);
    }
    if (scenes.empty())
        throw UsageError("nothing to evaluate: pass --scene, --corpus or "
                         "--bundled");

    EvalOptions opt;
    opt.range_gate = cli.gate_range;
    opt.min_truth_points = cli.min_truth_points;

    std::string csv = metrics_csv_header() + "\n";
    SegMetrics total;
    for (auto& spec : scenes) {
        if (cli.seed != 0) spec.seed = cli.seed;
        auto scan = raycast_scan(spec, calib);
        auto pkts = scene_to_packets(scan, calib);
        auto results = cli.batch ? run_batch(pkts, calib, P)
                                 : run_stream(pkts, calib, P);
        SegMetrics scene_m;
        for (const auto& r : results)
            scene_m += evaluate_scan(scan, r.clusters, opt);
        csv += metrics_csv_row(spec.name, scene_m) + "\n";
        total += scene_m;
    }
    csv += metrics_csv_row("TOTAL", total) + "\n";
    std::fputs(csv.c_str(), stdout);

    if (!cli.csv_path.empty()) {
        std::ofstream f(cli.csv_path);
        if (!f) throw IoError("cannot write " + cli.csv_path);
        f << csv;
    }
    if (!cli.json_path.empty()) {
        std::ofstream f(cli.json_path);
        if (!f) throw IoError("cannot write " + cli.json_path);
        nlohmann::json j = total;
        f << j.dump(2) << '\n';
    }

    // Gates judge the aggregate; an undefined rate (no truths at all) passes
    // vacuously.
    std::vector<std::string> failures;
    auto gate_min = [&](const char* name, const std::optional<double>& bound,
                        const std::optional<double>& value) {
        if (!bound || !value) return;
        if (*value < *bound) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "%s %.4f < required %.4f", name,
                          *value, *bound);
            failures.emplace_back(buf);
        }
    };
    gate_min("tpr", cli.min_tpr, total.tpr);
    gate_min("osr", cli.min_osr, total.osr);
    gate_min("usr", cli.min_usr, total.usr);
    gate_min("precision", cli.min_precision, total.precision);
    gate_min("recall", cli.min_recall, total.recall);
    if (cli.max_fnr && total.fnr && *total.fnr > *cli.max_fnr) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "fnr %.4f > allowed %.4f", *total.fnr,
                      *cli.max_fnr);
        failures.emplace_back(buf);
    }
    if (!failures.empty()) {
        std::string msg = "metric gate failure:";
        for (std::size_t i = 0; i < failures.size(); ++i)
            msg += (i ? "; " : " ") + failures[i];
        throw GateFailure(msg);
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthCli {
    std::string scene, name, calib;
    bool corpus = false;
    bool list = false;
    std::string out_dir = ".";
    uint64_t seed = 0;
    int columns = 0;
    std::set<std::string> formats{"json", "raw", "pcap", "ply", "truth"};
    std::vector<std::string> format_list;
};

int cmd_synth(const SynthCli& cli_in) {
    SynthCli cli = cli_in;
    if (!cli.format_list.empty())
        cli.formats = {cli.format_list.begin(), cli.format_list.end()};

    if (cli.list) {
        for (const auto& s : bundled_scenes()) {
            std::printf("%-22s %4d cols, %2zu objects, seed %llu\n",
                        s.name.c_str(), s.columns, s.objects.size(),
                        static_cast<unsigned long long>(s.seed));
        }
        return kExitOk;
    }

    std::vector<SceneSpec> scenes;
    if (cli.corpus)
        for (auto& s : bundled_scenes()) scenes.push_back(std::move(s));
    if (!cli.name.empty()) scenes.push_back(bundled_by_name(cli.name));
    if (!cli.scene.empty()) scenes.push_back(load_scene(cli.scene));
    if (scenes.empty())
        throw UsageError(
            "nothing to generate: pass --scene, --name, --corpus or --list");

    const BeamCalibration calib = resolve_calib(cli.calib);
    std::error_code ec;
    fs::create_directories(cli.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cli.out_dir);

    for (auto& spec : scenes) {
        if (cli.seed != 0) spec.seed = cli.seed;
        if (cli.columns != 0) spec.columns = cli.columns;
        const fs::path base = fs::path(cli.out_dir) / spec.name;

        if (cli.formats.count("json")) save_scene(spec, base.string() + ".json");

        auto scan = raycast_scan(spec, calib);
        int valid = 0;
        for (const auto& p : scan.pts)
            if (p.valid()) ++valid;

        if (cli.formats.count("raw") || cli.formats.count("pcap")) {
            auto pkts = scene_to_packets(scan, calib);
            std::vector<std::vector<uint8_t>> payloads;
            payloads.reserve(pkts.size());
            for (const auto& p : pkts) payloads.push_back(encode_packet(p));
            if (cli.formats.count("raw"))
                write_raw_file(base.string() + ".raw", payloads);
            if (cli.formats.count("pcap"))
                write_pcap_file(base.string() + ".pcap", payloads);
        }
        if (cli.formats.count("ply")) {
            std::vector<PlyPoint> pts;
            pts.reserve(valid);
            for (int j = 0; j < scan.cols; ++j)
                for (int r = 0; r < scan.rows; ++r) {
                    const auto& p = scan.at(r, j);
                    if (!p.valid()) continue;
                    const int32_t t = scan.truth_at(r, j);
                    pts.push_back({p.x, p.y, p.z,
                                   static_cast<uint8_t>(
                                       t == kTruthGround
                                           ? GroundLabel::Ground
                                           : GroundLabel::Obstacle),
                                   t >= 0 ? t : -1});
                }
            std::ofstream f(base.string() + ".ply");
            if (!f) throw IoError("cannot write " + base.string() + ".ply");
            write_ply(f, pts);
        }
        if (cli.formats.count("truth")) {
            nlohmann::json j;
            j["name"] = spec.name;
            j["seed"] = spec.seed;
            j["columns"] = spec.columns;
            j["returns"] = valid;
            j["objects"] = nlohmann::json::array();
            for (const auto& o : scan.objects) {
                j["objects"].push_back(
                    {{"id", o.id},
                     {"points", o.points},
                     {"centroid", {o.cx, o.cy, o.cz}},
                     {"min", {o.min_x, o.min_y, o.min_z}},
                     {"max", {o.max_x, o.max_y, o.max_z}}});
            }
            std::ofstream f(base.string() + ".truth.json");
            if (!f)
                throw IoError("cannot write " + base.string() + ".truth.json");
            f << j.dump(2) << '\n';
        }
        std::printf("%s: %d columns, %d returns, %zu truth objects -> %s.*\n",
                    spec.name.c_str(), spec.columns, valid,
                    scan.objects.size(), base.string().c_str());
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// inspect

struct InspectCli {
    std::string pcap, raw, calib;
    int pcap_port = pcapfmt::kDefaultPort;
    int max_packets = 8;
};

int cmd_inspect(const InspectCli& cli) {
    std::vector<std::vector<uint8_t>> payloads;
    PcapStats st;
    if (!cli.pcap.empty()) {
        payloads = read_pcap_file(cli.pcap, cli.pcap_port, &st);
        std::printf(
            "pcap: %llu records, %llu sensor packets, skipped %llu non-udp / "
            "%llu port / %llu length\n",
            static_cast<unsigned long long>(st.records),
            static_cast<unsigned long long>(st.delivered),
            static_cast<unsigned long long>(st.skipped_non_udp),
            static_cast<unsigned long long>(st.skipped_port),
            static_cast<unsigned long long>(st.skipped_length));
    } else {
        payloads = read_raw_file(cli.raw);
        std::printf("raw: %zu frames\n", payloads.size());
    }

    DecodeTally tally;
    auto pkts = decode_payloads(payloads, tally);
    std::printf("decoded %llu/%llu packets (%.2f%% failures)\n",
                static_cast<unsigned long long>(tally.total - tally.failed),
                static_cast<unsigned long long>(tally.total),
                100.0 * tally.rate());

    const int n = std::min<int>(cli.max_packets, static_cast<int>(pkts.size()));
    for (int i = 0; i < n; ++i) {
        const DataPacket& p = pkts[i];
        int returns = 0;
        uint16_t lo = 65535, hi = 0;
        for (const auto& b : p.blocks)
            for (const auto& r : b.returns)
                if (r.range_ticks != 0) {
                    ++returns;
                    lo = std::min(lo, r.range_ticks);
                    hi = std::max(hi, r.range_ticks);
                }
        std::printf(
            "packet %d: azimuth %.2f..%.2f deg, %d/%d returns, range "
            "%.2f..%.2f m\n",
            i, p.blocks.front().azimuth_cd / 100.0,
            p.blocks.back().azimuth_cd / 100.0, returns,
            kBlocksPerPacket * kBeams,
            returns ? lo * kRangeTick : 0.0, returns ? hi * kRangeTick : 0.0);
    }
    if (static_cast<int>(pkts.size()) > n)
        std::printf("... %zu more packets\n", pkts.size() - n);

    // Azimuth sweep summary: wrap count approximates revolutions.
    int wraps = 0;
    uint16_t prev = 0;
    bool first = true;
    for (const auto& p : pkts)
        for (const auto& b : p.blocks) {
            if (!first && b.azimuth_cd < prev) ++wraps;
            prev = b.azimuth_cd;
            first = false;
        }
    std::printf("azimuth wraps (~ full revolutions): %d\n", wraps);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "streamseg: streaming spinning-LiDAR ground segmentation and "
        "clustering.\nSet STREAMSEG_LOG=debug|info|warn|error for log "
        "verbosity."};
    app.require_subcommand(1);
    app.set_version_flag("--version", "streamseg 0.1.0");

    RunCli run;
    auto* run_cmd = app.add_subcommand(
        "run", "segment and cluster a packet stream, write cluster output");
    {
        auto* in = run_cmd->add_option_group("input", "exactly one source");
        in->add_option("--pcap", run.pcap, "pcap capture of sensor UDP")
            ->check(CLI::ExistingFile);
        in->add_option("--raw", run.raw,
                       "length-prefixed raw packet file")
            ->check(CLI::ExistingFile);
        in->add_option("--scene", run.scene, "synthetic scene spec (JSON)")
            ->check(CLI::ExistingFile);
        in->add_option("--udp", run.udp_port, "listen for live packets on "
                                              "this UDP port")
            ->check(CLI::Range(1, 65535));
        in->require_option(1);
        run_cmd->add_option("--port", run.pcap_port,
                            "pcap destination-port filter, 0 = any")
            ->check(CLI::Range(0, 65535));
        run_cmd->add_option("--calib", run.calib,
                            "beam calibration file (default: built-in table)")
            ->check(CLI::ExistingFile);
        run_cmd->add_option("--out", run.out_dir, "output directory");
        run_cmd
            ->add_option("--format", run.formats,
                         "cluster output formats (repeatable)")
            ->check(CLI::IsMember({"ndjson", "ply"}));
        run_cmd->add_flag("--batch", run.batch,
                          "one whole-scan buffer instead of streaming");
        run_cmd->add_flag("--include-points", run.include_points,
                          "embed per-point rows in ndjson");
        run_cmd->add_option("--max-scans", run.max_scans,
                            "udp: stop after this many scans");
        run_cmd->add_option("--idle-ms", run.idle_ms,
                            "udp: stop after this long with no datagrams");
        run.params.attach(run_cmd);
    }

    BenchCli bench;
    auto* bench_cmd = app.add_subcommand(
        "bench", "measure per-stage latency over repeated runs");
    {
        auto* in = bench_cmd->add_option_group("input", "exactly one source");
        in->add_option("--pcap", bench.pcap, "pcap capture")
            ->check(CLI::ExistingFile);
        in->add_option("--raw", bench.raw, "raw packet file")
            ->check(CLI::ExistingFile);
        in->add_option("--scene", bench.scene, "scene spec file")
            ->check(CLI::ExistingFile);
        in->add_option("--name", bench.name, "bundled scene name");
        in->require_option(1);
        bench_cmd->add_option("--port", bench.pcap_port, "pcap port filter")
            ->check(CLI::Range(0, 65535));
        bench_cmd->add_option("--calib", bench.calib, "beam calibration file")
            ->check(CLI::ExistingFile);
        bench_cmd->add_option("--out", bench.out_dir,
                              "directory for latency.csv");
        bench_cmd
            ->add_option("--repetitions", bench.repetitions,
                         "times to replay the input")
            ->check(CLI::Range(1, 1000000));
        bench.params.attach(bench_cmd);
    }

    EvalCli eval;
    auto* eval_cmd = app.add_subcommand(
        "eval", "score segmentation against synthetic truth");
    {
        eval_cmd->add_option("--scene", eval.scenes,
                             "scene spec file (repeatable)")
            ->check(CLI::ExistingFile);
        eval_cmd->add_option("--corpus", eval.corpus_dir,
                             "directory of scene .json files")
            ->check(CLI::ExistingDirectory);
        eval_cmd->add_flag("--bundled", eval.bundled,
                           "evaluate the built-in scene corpus");
        eval_cmd->add_option("--pcap", eval.refused_pcap,
                             "rejected: captures carry no truth");
        eval_cmd->add_option("--raw", eval.refused_raw,
                             "rejected: captures carry no truth");
        eval_cmd->add_option("--calib", eval.calib, "beam calibration file")
            ->check(CLI::ExistingFile);
        eval_cmd->add_flag("--batch", eval.batch,
                           "evaluate batch mode instead of streaming");
        eval_cmd->add_option("--seed", eval.seed,
                             "override every scene's noise seed");
        eval_cmd->add_option("--gate-range", eval.gate_range,
                             "ignore truth objects beyond this range, m");
        eval_cmd->add_option("--min-truth-points", eval.min_truth_points,
                             "skip truth objects with fewer visible points");
        eval_cmd->add_option("--csv", eval.csv_path, "write metric rows here");
        eval_cmd->add_option("--json", eval.json_path,
                             "write aggregate metrics JSON here");
        auto pct = CLI::Range(0.0, 1.0);
        eval_cmd->add_option("--min-tpr", eval.min_tpr, "gate")->check(pct);
        eval_cmd->add_option("--min-osr", eval.min_osr, "gate")->check(pct);
        eval_cmd->add_option("--min-usr", eval.min_usr, "gate")->check(pct);
        eval_cmd->add_option("--min-precision", eval.min_precision, "gate")
            ->check(pct);
        eval_cmd->add_option("--min-recall", eval.min_recall, "gate")
            ->check(pct);
        eval_cmd->add_option("--max-fnr", eval.max_fnr, "gate")->check(pct);
        eval.params.attach(eval_cmd);
    }

    SynthCli synth;
    auto* synth_cmd = app.add_subcommand(
        "synth", "generate synthetic scenes, captures and truth files");
    {
        synth_cmd->add_option("--scene", synth.scene, "scene spec file")
            ->check(CLI::ExistingFile);
        synth_cmd->add_option("--name", synth.name, "bundled scene name");
        synth_cmd->add_flag("--corpus", synth.corpus,
                            "emit every bundled scene");
        synth_cmd->add_flag("--list", synth.list, "list bundled scenes");
        synth_cmd->add_option("--out", synth.out_dir, "output directory");
        synth_cmd->add_option("--seed", synth.seed, "override scene seed");
        synth_cmd->add_option("--columns", synth.columns,
                              "override scan width (multiple of 24)");
        synth_cmd->add_option("--calib", synth.calib, "beam calibration file")
            ->check(CLI::ExistingFile);
        synth_cmd
            ->add_option("--format", synth.format_list,
                         "artifacts to emit (repeatable)")
            ->check(CLI::IsMember({"json", "raw", "pcap", "ply", "truth"}));
    }

    InspectCli inspect;
    auto* inspect_cmd = app.add_subcommand(
        "inspect", "decode a capture and print packet-level diagnostics");
    {
        auto* in = inspect_cmd->add_option_group("input", "exactly one");
        in->add_option("--pcap", inspect.pcap, "pcap capture")
            ->check(CLI::ExistingFile);
        in->add_option("--raw", inspect.raw, "raw packet file")
            ->check(CLI::ExistingFile);
        in->require_option(1);
        inspect_cmd->add_option("--port", inspect.pcap_port,
                                "pcap port filter")
            ->check(CLI::Range(0, 65535));
        inspect_cmd->add_option("--max", inspect.max_packets,
                                "packets to print");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(run);
        if (bench_cmd->parsed()) return cmd_bench(bench);
        if (eval_cmd->parsed()) return cmd_eval(eval);
        if (synth_cmd->parsed()) return cmd_synth(synth);
        if (inspect_cmd->parsed()) return cmd_inspect(inspect);
        return kExitUsage;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const GateFailure& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitGate;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
}
