#pragma once

// Raw data-packet codec and the packet-to-column assembler.
//
// Wire format (1248 bytes per UDP payload):
//   12 data blocks x 100 bytes, then a 48-byte status tail kept opaque.
//   block := 0xFFEE flag (2B) | azimuth centideg u16le | 32 x (range u16le,
//            reflectivity u8). One range tick = 4 mm; tick 0 = no return.
//
// The 32 returns of a block are two interleaved 16-beam firings: even wire
// channels fire at the block azimuth, odd wire channels half a block-step
// later. Each firing becomes one 32-row column (the other group's rows stay
// invalid), so a packet contributes 24 columns.

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include "streamseg/geometry.hpp"

namespace streamseg {

inline constexpr size_t kPacketBytes = 1248;
inline constexpr size_t kBlockBytes = 100;
inline constexpr int kBlocksPerPacket = 12;
inline constexpr int kBeams = 32;
inline constexpr int kFiringsPerBlock = 2;
inline constexpr int kColumnsPerPacket = kBlocksPerPacket * kFiringsPerBlock;
inline constexpr size_t kTailBytes =
    kPacketBytes - kBlocksPerPacket * kBlockBytes;  // 48
inline constexpr double kRangeTick = 0.004;         // meters per tick
inline constexpr uint16_t kMaxAzimuthCd = 36000;

struct DecodeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct WrongLengthError : DecodeError {
    explicit WrongLengthError(size_t got)
        : DecodeError("packet length " + std::to_string(got) + ", expected " +
                      std::to_string(kPacketBytes)) {}
};
struct BadAzimuthError : DecodeError {
    explicit BadAzimuthError(unsigned cd, int block)
        : DecodeError("azimuth " + std::to_string(cd) + " centideg in block " +
                      std::to_string(block) + " out of [0,36000)") {}
};

struct LaserReturn {
    uint16_t range_ticks = 0;
    uint8_t reflectivity = 0;
    bool operator==(const LaserReturn&) const = default;
};

struct DataBlock {
    uint16_t azimuth_cd = 0;  // centidegrees, [0, 36000)
    std::array<LaserReturn, kBeams> returns{};
    bool operator==(const DataBlock&) const = default;
};

struct DataPacket {
    std::array<DataBlock, kBlocksPerPacket> blocks{};
    std::array<uint8_t, kTailBytes> tail{};  // preserved, never interpreted
    bool operator==(const DataPacket&) const = default;
};

inline uint16_t rd_u16le(const uint8_t* p) {
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}
inline void wr_u16le(uint8_t* p, uint16_t v) {
    p[0] = static_cast<uint8_t>(v & 0xff);
    p[1] = static_cast<uint8_t>(v >> 8);
}

inline DataPacket decode_packet(const uint8_t* data, size_t len) {
    if (len != kPacketBytes) throw WrongLengthError(len);
    DataPacket pkt;
    for (int b = 0; b < kBlocksPerPacket; ++b) {
        const uint8_t* blk = data + b * kBlockBytes;
        // blk[0..1] is the 0xFFEE block flag; tolerated whatever it holds.
        const uint16_t az = rd_u16le(blk + 2);
        if (az >= kMaxAzimuthCd) throw BadAzimuthError(az, b);
        pkt.blocks[b].azimuth_cd = az;
        for (int c = 0; c < kBeams; ++c) {
            const uint8_t* r = blk + 4 + c * 3;
            pkt.blocks[b].returns[c].range_ticks = rd_u16le(r);
            pkt.blocks[b].returns[c].reflectivity = r[2];
        }
    }
    std::memcpy(pkt.tail.data(), data + kBlocksPerPacket * kBlockBytes,
                kTailBytes);
    return pkt;
}

inline DataPacket decode_packet(const std::vector<uint8_t>& buf) {
    return decode_packet(buf.data(), buf.size());
}

inline std::vector<uint8_t> encode_packet(const DataPacket& pkt) {
    std::vector<uint8_t> out(kPacketBytes, 0);
    for (int b = 0; b < kBlocksPerPacket; ++b) {
        uint8_t* blk = out.data() + b * kBlockBytes;
        blk[0] = 0xff;
        blk[1] = 0xee;
        wr_u16le(blk + 2, pkt.blocks[b].azimuth_cd);
        for (int c = 0; c < kBeams; ++c) {
            uint8_t* r = blk + 4 + c * 3;
            wr_u16le(r, pkt.blocks[b].returns[c].range_ticks);
            r[2] = pkt.blocks[b].returns[c].reflectivity;
        }
    }
    std::memcpy(out.data() + kBlocksPerPacket * kBlockBytes, pkt.tail.data(),
                kTailBytes);
    return out;
}

// ---------------------------------------------------------------------------
// Beam calibration: vertical angle and azimuth offset per wire channel, plus
// the permutation that sorts channels into ascending-vertical-angle rows.

struct CalibError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BeamCalibration {
    // Indexed by wire channel as it appears in the packet.
    std::array<double, kBeams> vertical_deg{};
    std::array<double, kBeams> azimuth_offset_deg{};
    std::array<int, kBeams> channel_to_row{};  // wire channel -> image row
    std::array<int, kBeams> row_to_channel{};

    void finalize() {
        std::array<int, kBeams> order;
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return vertical_deg[a] < vertical_deg[b];
        });
        for (int row = 0; row < kBeams; ++row) {
            row_to_channel[row] = order[row];
            channel_to_row[order[row]] = row;
        }
    }

    double row_vertical_deg(int row) const {
        return vertical_deg[row_to_channel[row]];
    }
    double row_azimuth_offset_deg(int row) const {
        return azimuth_offset_deg[row_to_channel[row]];
    }
};

// Factory calibration of the 32-beam sensor this engine targets; used when no
// calibration file is given.
inline BeamCalibration default_calibration() {
    static constexpr double kVert[kBeams] = {
        -25.0,  -1.0,    -1.667, -15.639, -11.31, 0.0,   -0.667, -8.843,
        -7.254, 0.333,   -0.333, -6.148,  -5.333, 1.333, 0.667,  -4.0,
        -4.667, 1.667,   1.0,    -3.667,  -3.333, 3.333, 2.333,  -2.667,
        -3.0,   7.0,     4.667,  -2.333,  -2.0,   15.0,  10.333, -1.333};
    static constexpr double kAzOff[kBeams] = {
        1.4,  -4.2, 1.4, -1.4, 1.4,  -1.4, 4.2, -1.4, 1.4,  -4.2, 1.4,
        -1.4, 4.2,  -1.4, 4.2, -1.4, 1.4,  -4.2, 1.4, -4.2, 4.2,  -1.4,
        1.4,  -1.4, 1.4, -1.4, 1.4,  -4.2, 4.2, -1.4, 1.4,  -1.4};
    BeamCalibration c;
    for (int i = 0; i < kBeams; ++i) {
        c.vertical_deg[i] = kVert[i];
        c.azimuth_offset_deg[i] = kAzOff[i];
    }
    c.finalize();
    return c;
}

// Calibration file: one row per channel, "<channel> <vertical_deg>
// <azimuth_offset_deg>", '#' comments. All 32 channels must appear once.
inline BeamCalibration parse_calibration(std::istream& in) {
    BeamCalibration c;
    std::array<bool, kBeams> seen{};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        int ch;
        double vert, azoff;
        if (!(ls >> ch)) continue;  // blank / comment-only line
        if (!(ls >> vert >> azoff))
            throw CalibError("calibration line " + std::to_string(lineno) +
                             ": expected <channel> <vertical> <az_offset>");
        if (ch < 0 || ch >= kBeams)
            throw CalibError("calibration line " + std::to_string(lineno) +
                             ": channel " + std::to_string(ch) +
                             " out of [0,32)");
        if (seen[ch])
            throw CalibError("calibration: duplicate channel " +
                             std::to_string(ch));
        if (vert < -90.0 || vert > 90.0)
            throw CalibError("calibration line " + std::to_string(lineno) +
                             ": vertical angle out of [-90,90]");
        if (azoff <= -360.0 || azoff >= 360.0)
            throw CalibError("calibration line " + std::to_string(lineno) +
                             ": azimuth offset out of (-360,360)");
        seen[ch] = true;
        c.vertical_deg[ch] = vert;
        c.azimuth_offset_deg[ch] = azoff;
    }
    for (int i = 0; i < kBeams; ++i)
        if (!seen[i])
            throw CalibError("calibration: missing channel " +
                             std::to_string(i));
    c.finalize();
    return c;
}

inline BeamCalibration load_calibration(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw CalibError("cannot open calibration file: " + path);
    return parse_calibration(f);
}

inline void save_calibration(const BeamCalibration& c, std::ostream& out) {
    out << "# channel vertical_deg azimuth_offset_deg\n";
    for (int i = 0; i < kBeams; ++i)
        out << i << ' ' << c.vertical_deg[i] << ' ' << c.azimuth_offset_deg[i]
            << '\n';
}

// ---------------------------------------------------------------------------
// PacketBuffer: the streaming unit handed to the segmentation stages.

struct BufferColumn {
    double azimuth_deg = 0.0;  // firing azimuth before per-beam offsets
    int col = 0;               // global column index within the scan
    std::array<SphericalPoint, kBeams> points{};  // row order, ascending phi
};

struct PacketBuffer {
    std::vector<BufferColumn> columns;
    uint64_t scan_id = 0;
    uint64_t seq = 0;        // running buffer counter across scans
    bool scan_end = false;   // true on the last buffer of its scan
};

struct AssemblerStats {
    uint64_t packets = 0;
    uint64_t out_of_order = 0;  // azimuth regressions not explained by wrap
    uint64_t scans_started = 0;
};

// Feeds decoded packets in arrival order; yields PacketBuffers of
// buffer_packets consecutive packets (24 columns each). Azimuth drops larger
// than 180 degrees open a new scan; smaller regressions are counted as
// out-of-order packets, flush the current buffer and also start a new scan.
class BufferAssembler {
  public:
    BufferAssembler(BeamCalibration calib, const SegParams& params)
        : calib_(std::move(calib)),
          cols_per_buffer_(params.buffer_packets * kColumnsPerPacket) {}

    BufferAssembler(BeamCalibration calib, int buffer_packets)
        : calib_(std::move(calib)),
          cols_per_buffer_(buffer_packets * kColumnsPerPacket) {}

    const AssemblerStats& stats() const { return stats_; }

    std::vector<PacketBuffer> push(const DataPacket& pkt) {
        ++stats_.packets;
        std::vector<PacketBuffer> out;
        for (int b = 0; b < kBlocksPerPacket; ++b) {
            const DataBlock& blk = pkt.blocks[b];
            if (have_prev_az_) {
                const int az = blk.azimuth_cd;
                if (az < prev_az_cd_) {
                    const int drop = prev_az_cd_ - az;
                    if (drop > kMaxAzimuthCd / 2) {
                        end_scan(out);  // normal wrap past 0: next revolution
                    } else {
                        ++stats_.out_of_order;
                        end_scan(out);  // flush, then treat as a fresh scan
                    }
                }
            }
            // Forward-looking azimuth step; the packet's last block reuses
            // the previous step so no column has to wait for the next packet.
            if (b + 1 < kBlocksPerPacket) {
                int d = pkt.blocks[b + 1].azimuth_cd - blk.azimuth_cd;
                if (d < 0) d += kMaxAzimuthCd;
                if (d > 0) last_delta_cd_ = d;
            }
            emit_column(blk, 0, blk.azimuth_cd, out);
            const int az_b = (blk.azimuth_cd + last_delta_cd_ / 2) % kMaxAzimuthCd;
            emit_column(blk, 1, az_b, out);
            prev_az_cd_ = blk.azimuth_cd;
            have_prev_az_ = true;
        }
        return out;
    }

    // End of stream: hand out whatever is buffered.
    std::optional<PacketBuffer> flush() {
        if (current_.columns.empty()) return std::nullopt;
        current_.scan_end = true;
        current_.seq = seq_++;
        PacketBuffer done = std::move(current_);
        current_ = PacketBuffer{};
        return done;
    }

  private:
    void ensure_scan_open() {
        if (!scan_open_) {
            scan_open_ = true;
            ++stats_.scans_started;
        }
    }

    void end_scan(std::vector<PacketBuffer>& out) {
        if (!current_.columns.empty()) {
            current_.scan_end = true;
            current_.seq = seq_++;
            out.push_back(std::move(current_));
            current_ = PacketBuffer{};
        }
        ++scan_id_;
        next_col_ = 0;
        scan_open_ = false;
        have_prev_az_ = false;
    }

    void emit_column(const DataBlock& blk, int firing, int azimuth_cd,
                     std::vector<PacketBuffer>& out) {
        ensure_scan_open();
        BufferColumn col;
        col.azimuth_deg = azimuth_cd / 100.0;
        col.col = next_col_++;
        for (int ch = firing; ch < kBeams; ch += kFiringsPerBlock) {
            const int row = calib_.channel_to_row[ch];
            const double rho = blk.returns[ch].range_ticks * kRangeTick;
            SphericalPoint& p = col.points[row];
            if (rho > 0.0) {
                p = make_point(rho, calib_.vertical_deg[ch],
                               col.azimuth_deg + calib_.azimuth_offset_deg[ch],
                               row, col.col);
            } else {
                p.row = row;
                p.col = col.col;
                p.label = GroundLabel::Invalid;
            }
        }
        // Slots of the other firing group keep rho == 0 / Invalid but still
        // carry their position so every (row, col) is addressable.
        for (int ch = 1 - firing; ch < kBeams; ch += kFiringsPerBlock) {
            const int row = calib_.channel_to_row[ch];
            col.points[row].row = row;
            col.points[row].col = col.col;
        }
        current_.scan_id = scan_id_;
        current_.columns.push_back(std::move(col));
        if (static_cast<int>(current_.columns.size()) >= cols_per_buffer_) {
            current_.seq = seq_++;
            out.push_back(std::move(current_));
            current_ = PacketBuffer{};
            current_.scan_id = scan_id_;
        }
    }

    BeamCalibration calib_;
    int cols_per_buffer_;
    PacketBuffer current_;
    uint64_t scan_id_ = 0;
    uint64_t seq_ = 0;
    int next_col_ = 0;
    int prev_az_cd_ = 0;
    int last_delta_cd_ = 40;  // nominal 0.4 deg block step at 600 RPM
    bool have_prev_az_ = false;
    bool scan_open_ = false;
    AssemblerStats stats_;
};

}  // namespace streamseg
