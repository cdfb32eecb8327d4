#pragma once

// Buffer-at-a-time orchestration of ground segmentation and clustering, with
// per-stage latency capture and per-scan bookkeeping.

#include <chrono>
#include <ctime>
#include <deque>
#include <optional>

#include "streamseg/cluster.hpp"
#include "streamseg/geometry.hpp"
#include "streamseg/ground.hpp"
#include "streamseg/packet.hpp"

namespace streamseg {

// Thread CPU time in microseconds; falls back to wall time if the clock is
// unavailable (non-POSIX).
inline double thread_cpu_us() {
#if defined(CLOCK_THREAD_CPUTIME_ID)
    timespec ts;
    if (clock_gettime(CLOCK_THREAD_CPUTIME_ID, &ts) == 0)
        return ts.tv_sec * 1e6 + ts.tv_nsec * 1e-3;
#endif
    return std::chrono::duration<double, std::micro>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

inline double wall_us() {
    return std::chrono::duration<double, std::micro>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct StageTimes {
    uint64_t scan_id = 0;
    uint64_t buffer_seq = 0;
    int columns = 0;
    double ground_us = 0.0;
    double cluster_us = 0.0;  // CCL + refinement + emission
};

struct ScanResult {
    uint64_t scan_id = 0;
    int columns = 0;
    uint64_t total_slots = 0;
    uint64_t invalid_points = 0;
    uint64_t ground_points = 0;
    uint64_t obstacle_points = 0;  // points inside emitted clusters
    uint64_t noise_points = 0;     // points in sub-minimum groups
    std::vector<InitialCluster> clusters;
    std::vector<InitialCluster> noise_clusters;
    std::vector<StageTimes> buffer_times;
    double completion_lag_us = 0.0;  // last buffer processed -> scan closed

    double ground_us_total() const {
        double s = 0;
        for (const auto& t : buffer_times) s += t.ground_us;
        return s;
    }
    double cluster_us_total() const {
        double s = 0;
        for (const auto& t : buffer_times) s += t.cluster_us;
        return s;
    }
};

class Pipeline {
  public:
    explicit Pipeline(const SegParams& params)
        : params_(params), clusterer_(params) {
        params_.validate();
    }

    const SegParams& params() const { return params_; }

    // Segment + cluster one buffer (labels are written into it). Returns the
    // clusters this buffer closed, minimum size already applied.
    std::vector<InitialCluster> process_buffer(PacketBuffer& buf) {
        if (scan_open_ && buf.scan_id != scan_.scan_id) finalize_scan();
        if (!scan_open_) open_scan(buf.scan_id);

        StageTimes st;
        st.scan_id = buf.scan_id;
        st.buffer_seq = buf.seq;
        st.columns = static_cast<int>(buf.columns.size());

        const double g0 = thread_cpu_us();
        segment_buffer(buf, params_);
        st.ground_us = thread_cpu_us() - g0;

        for (const auto& col : buf.columns) {
            for (const auto& p : col.points) {
                switch (p.label) {
                    case GroundLabel::Ground: ++scan_.ground_points; break;
                    case GroundLabel::Obstacle: break;  // tallied at emission
                    default: ++scan_.invalid_points; break;
                }
            }
        }
        scan_.columns += static_cast<int>(buf.columns.size());
        scan_.total_slots += buf.columns.size() * kBeams;

        const double c0 = thread_cpu_us();
        auto closed = clusterer_.process_buffer(buf);
        st.cluster_us = thread_cpu_us() - c0;
        scan_.buffer_times.push_back(st);

        auto emitted = absorb(std::move(closed));
        last_buffer_wall_us_ = wall_us();
        if (buf.scan_end) finalize_scan();
        return emitted;
    }

    // End of stream: close the scan in flight.
    void finish() {
        if (scan_open_) finalize_scan();
    }

    std::optional<ScanResult> take_completed() {
        if (completed_.empty()) return std::nullopt;
        ScanResult r = std::move(completed_.front());
        completed_.pop_front();
        return r;
    }

  private:
    void open_scan(uint64_t id) {
        scan_ = ScanResult{};
        scan_.scan_id = id;
        scan_open_ = true;
        clusterer_.reset();
    }

    // Split closed clusters into real emissions and noise, tallying points.
    std::vector<InitialCluster> absorb(std::vector<InitialCluster> closed) {
        std::vector<InitialCluster> emitted;
        for (auto& c : closed) {
            if (static_cast<int>(c.points.size()) >= params_.min_cluster_size) {
                scan_.obstacle_points += c.points.size();
                emitted.push_back(c);
                scan_.clusters.push_back(std::move(c));
            } else {
                scan_.noise_points += c.points.size();
                scan_.noise_clusters.push_back(std::move(c));
            }
        }
        return emitted;
    }

    void finalize_scan() {
        const double t0 = wall_us();
        auto tail = absorb(clusterer_.finish_scan(scan_.columns));
        // Tail emissions belong to the result; callers in streaming mode see
        // them through take_completed().
        (void)tail;
        scan_.completion_lag_us =
            last_buffer_wall_us_ > 0 ? wall_us() - last_buffer_wall_us_
                                     : wall_us() - t0;
        completed_.push_back(std::move(scan_));
        scan_ = ScanResult{};
        scan_open_ = false;
    }

    SegParams params_;
    Clusterer clusterer_;
    ScanResult scan_;
    std::deque<ScanResult> completed_;
    double last_buffer_wall_us_ = 0.0;
    bool scan_open_ = false;
};

// Convenience runners over a decoded packet stream. Streaming uses
// params.buffer_packets; batch processes each scan as one buffer spanning
// all of its columns (identical algorithms, M' = M).
inline std::vector<ScanResult> run_stream(const std::vector<DataPacket>& pkts,
                                          const BeamCalibration& calib,
                                          const SegParams& params) {
    BufferAssembler as(calib, params);
    Pipeline pipe(params);
    std::vector<ScanResult> out;
    auto drain = [&]() {
        while (auto r = pipe.take_completed()) out.push_back(std::move(*r));
    };
    for (const auto& p : pkts) {
        for (auto& buf : as.push(p)) {
            pipe.process_buffer(buf);
            drain();
        }
    }
    if (auto buf = as.flush()) pipe.process_buffer(*buf);
    pipe.finish();
    drain();
    return out;
}

inline std::vector<ScanResult> run_batch(const std::vector<DataPacket>& pkts,
                                         const BeamCalibration& calib,
                                         const SegParams& params) {
    SegParams p = params;
    p.buffer_packets = static_cast<int>(pkts.size()) + 1;
    return run_stream(pkts, calib, p);
}

// ---------------------------------------------------------------------------
// Latency reporting.

struct LatencyDist {
    double mean = 0, p50 = 0, p99 = 0, max = 0;
    size_t n = 0;
};

// Nearest-rank percentiles over a sample set.
inline LatencyDist make_dist(std::vector<double> v) {
    LatencyDist d;
    d.n = v.size();
    if (v.empty()) return d;
    std::sort(v.begin(), v.end());
    double sum = 0;
    for (double x : v) sum += x;
    d.mean = sum / v.size();
    auto rank = [&](double q) {
        size_t i = static_cast<size_t>(std::ceil(q * v.size()));
        return v[std::min(v.size() - 1, i > 0 ? i - 1 : 0)];
    };
    d.p50 = rank(0.50);
    d.p99 = rank(0.99);
    d.max = v.back();
    return d;
}

struct LatencyReport {
    LatencyDist ground_us;        // per buffer
    LatencyDist cluster_us;       // per buffer
    LatencyDist buffer_us;        // per buffer, both stages
    LatencyDist scan_cpu_us;      // per scan, both stages summed
    LatencyDist completion_lag_us;
    size_t scans = 0, buffers = 0;
    double wall_total_us = 0;  // whole run, wall clock
    double cpu_total_us = 0;   // whole run, summed stage CPU
};

// Reference timing row printed next to measurements for orientation (never a
// pass/fail bound): 32x1800 scan at 600 RPM on an i7-7820 workstation.
struct ReferenceTimings {
    double ground_us = 98.0;
    double cluster_us = 167.0;
    double total_us = 265.0;
};
inline constexpr ReferenceTimings kReferenceTimings{};

inline LatencyReport summarize_latency(const std::vector<ScanResult>& scans) {
    LatencyReport rep;
    std::vector<double> g, c, b, s, lag;
    for (const auto& r : scans) {
        double scan_sum = 0;
        for (const auto& t : r.buffer_times) {
            g.push_back(t.ground_us);
            c.push_back(t.cluster_us);
            b.push_back(t.ground_us + t.cluster_us);
            scan_sum += t.ground_us + t.cluster_us;
        }
        s.push_back(scan_sum);
        lag.push_back(r.completion_lag_us);
        rep.buffers += r.buffer_times.size();
        rep.cpu_total_us += scan_sum;
    }
    rep.scans = scans.size();
    rep.ground_us = make_dist(std::move(g));
    rep.cluster_us = make_dist(std::move(c));
    rep.buffer_us = make_dist(std::move(b));
    rep.scan_cpu_us = make_dist(std::move(s));
    rep.completion_lag_us = make_dist(std::move(lag));
    return rep;
}

inline LatencyReport measure_latency(const std::vector<DataPacket>& pkts,
                                     const BeamCalibration& calib,
                                     const SegParams& params,
                                     int repetitions = 1) {
    if (repetitions < 1)
        throw std::invalid_argument("measure_latency: repetitions must be >= 1");
    std::vector<ScanResult> all;
    const double w0 = wall_us();
    for (int rep = 0; rep < repetitions; ++rep) {
        auto scans = run_stream(pkts, calib, params);
        for (auto& s : scans) all.push_back(std::move(s));
    }
    LatencyReport rep = summarize_latency(all);
    rep.wall_total_us = wall_us() - w0;
    return rep;
}

}  // namespace streamseg
