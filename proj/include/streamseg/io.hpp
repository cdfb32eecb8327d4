#pragma once

// File and network I/O: pcap capture read/write (no libpcap dependency),
// length-prefixed raw packet files, a UDP packet source, parameter files,
// and the ndjson / PLY / CSV output writers.
//
// Frame readers hand back raw UDP payloads; decoding (and tolerance for
// corrupt packets) is the caller's business.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "streamseg/cluster.hpp"
#include "streamseg/packet.hpp"
#include "streamseg/pipeline.hpp"

namespace streamseg {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --------------------------------------------------------------------------
// pcap. Classic format only (not pcapng): 24-byte global header, then
// per-record headers. Microsecond and nanosecond magics, either byte order.

namespace pcapfmt {
inline constexpr uint32_t kMagicUs = 0xa1b2c3d4;
inline constexpr uint32_t kMagicUsSwap = 0xd4c3b2a1;
inline constexpr uint32_t kMagicNs = 0xa1b23c4d;
inline constexpr uint32_t kMagicNsSwap = 0x4d3cb2a1;
inline constexpr uint32_t kLinkEthernet = 1;
inline constexpr uint32_t kLinkRaw = 101;  // IPv4/IPv6 directly
inline constexpr uint16_t kEthertypeIpv4 = 0x0800;
inline constexpr uint16_t kEthertypeVlan = 0x8100;
inline constexpr int kDefaultPort = 2368;
}  // namespace pcapfmt

struct PcapStats {
    uint64_t records = 0;
    uint64_t delivered = 0;
    uint64_t skipped_non_udp = 0;  // non-IPv4, non-UDP, or mangled headers
    uint64_t skipped_port = 0;
    uint64_t skipped_length = 0;  // UDP payload but not kPacketBytes long
};

// Reads every UDP payload of exactly kPacketBytes addressed to `port`
// (port 0 accepts any destination port).
inline std::vector<std::vector<uint8_t>> read_pcap(
    std::istream& in, int port = pcapfmt::kDefaultPort,
    PcapStats* stats = nullptr) {
    auto rd32 = [](const uint8_t* p, bool swap) -> uint32_t {
        uint32_t v;
        std::memcpy(&v, p, 4);
        return swap ? __builtin_bswap32(v) : v;
    };
    uint8_t gh[24];
    if (!in.read(reinterpret_cast<char*>(gh), sizeof gh))
        throw IoError("pcap: truncated global header");
    uint32_t magic;
    std::memcpy(&magic, gh, 4);
    bool swap = false;
    if (magic == pcapfmt::kMagicUs || magic == pcapfmt::kMagicNs) {
        swap = false;
    } else if (magic == pcapfmt::kMagicUsSwap ||
               magic == pcapfmt::kMagicNsSwap) {
        swap = true;
    } else {
        throw IoError("pcap: bad magic (pcapng is not supported)");
    }
    const uint32_t linktype = rd32(gh + 20, swap);
    if (linktype != pcapfmt::kLinkEthernet && linktype != pcapfmt::kLinkRaw)
        throw IoError("pcap: unsupported linktype " +
                      std::to_string(linktype));

    PcapStats local;
    PcapStats& st = stats ? *stats : local;
    std::vector<std::vector<uint8_t>> out;
    std::vector<uint8_t> rec;
    for (;;) {
        uint8_t rh[16];
        in.read(reinterpret_cast<char*>(rh), sizeof rh);
        if (in.gcount() == 0) break;  // clean EOF
        if (in.gcount() != sizeof rh)
            throw IoError("pcap: truncated record header");
        const uint32_t incl = rd32(rh + 8, swap);
        if (incl > (1u << 20)) throw IoError("pcap: absurd record length");
        rec.resize(incl);
        if (!in.read(reinterpret_cast<char*>(rec.data()), incl))
            throw IoError("pcap: truncated record body");
        ++st.records;

        const uint8_t* p = rec.data();
        size_t n = rec.size();
        if (linktype == pcapfmt::kLinkEthernet) {
            if (n < 14) {
                ++st.skipped_non_udp;
                continue;
            }
            uint16_t ethertype = static_cast<uint16_t>(p[12]) << 8 | p[13];
            p += 14;
            n -= 14;
            if (ethertype == pcapfmt::kEthertypeVlan) {
                if (n < 4) {
                    ++st.skipped_non_udp;
                    continue;
                }
                ethertype = static_cast<uint16_t>(p[2]) << 8 | p[3];
                p += 4;
                n -= 4;
            }
            if (ethertype != pcapfmt::kEthertypeIpv4) {
                ++st.skipped_non_udp;
                continue;
            }
        }
        // IPv4 + UDP.
        if (n < 20 || (p[0] >> 4) != 4) {
            ++st.skipped_non_udp;
            continue;
        }
        const size_t ihl = static_cast<size_t>(p[0] & 0x0f) * 4;
        if (ihl < 20 || n < ihl + 8 || p[9] != 17) {
            ++st.skipped_non_udp;
            continue;
        }
        const uint8_t* udp = p + ihl;
        const int dst_port = static_cast<int>(udp[2]) << 8 | udp[3];
        const size_t udp_len = static_cast<size_t>(udp[4]) << 8 | udp[5];
        if (udp_len < 8 || ihl + udp_len > n) {
            ++st.skipped_non_udp;
            continue;
        }
        if (port != 0 && dst_port != port) {
            ++st.skipped_port;
            continue;
        }
        const size_t payload = udp_len - 8;
        if (payload != kPacketBytes) {
            ++st.skipped_length;
            continue;
        }
        out.emplace_back(udp + 8, udp + 8 + payload);
        ++st.delivered;
    }
    return out;
}

inline std::vector<std::vector<uint8_t>> read_pcap_file(
    const std::string& path, int port = pcapfmt::kDefaultPort,
    PcapStats* stats = nullptr) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open pcap file: " + path);
    return read_pcap(f, port, stats);
}

// Writes Ethernet/IPv4/UDP frames around each payload, microsecond magic,
// host byte order. Packets are spaced as a 600 RPM sensor would emit them.
inline void write_pcap(std::ostream& out,
                       const std::vector<std::vector<uint8_t>>& payloads,
                       int port = pcapfmt::kDefaultPort) {
    auto w32 = [&](uint32_t v) {
        out.write(reinterpret_cast<const char*>(&v), 4);
    };
    auto w16 = [&](uint16_t v) {
        out.write(reinterpret_cast<const char*>(&v), 2);
    };
    w32(pcapfmt::kMagicUs);
    w16(2);
    w16(4);
    w32(0);
    w32(0);
    w32(1u << 16);
    w32(pcapfmt::kLinkEthernet);

    uint64_t t_us = 0;
    for (const auto& pl : payloads) {
        const size_t ip_len = 20 + 8 + pl.size();
        const size_t frame = 14 + ip_len;
        w32(static_cast<uint32_t>(t_us / 1000000));
        w32(static_cast<uint32_t>(t_us % 1000000));
        w32(static_cast<uint32_t>(frame));
        w32(static_cast<uint32_t>(frame));

        uint8_t eth[14] = {0x02, 0, 0, 0, 0, 0x01, 0x02, 0, 0, 0, 0, 0x02,
                           0x08, 0x00};
        out.write(reinterpret_cast<const char*>(eth), sizeof eth);

        uint8_t ip[20] = {0};
        ip[0] = 0x45;
        ip[2] = static_cast<uint8_t>(ip_len >> 8);
        ip[3] = static_cast<uint8_t>(ip_len & 0xff);
        ip[8] = 64;  // ttl
        ip[9] = 17;  // udp
        ip[12] = 192; ip[13] = 168; ip[14] = 1; ip[15] = 201;
        ip[16] = 192; ip[17] = 168; ip[18] = 1; ip[19] = 100;
        uint32_t sum = 0;
        for (int i = 0; i < 20; i += 2)
            sum += static_cast<uint32_t>(ip[i]) << 8 | ip[i + 1];
        while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
        const uint16_t ck = static_cast<uint16_t>(~sum);
        ip[10] = static_cast<uint8_t>(ck >> 8);
        ip[11] = static_cast<uint8_t>(ck & 0xff);
        out.write(reinterpret_cast<const char*>(ip), sizeof ip);

        const size_t udp_len = 8 + pl.size();
        uint8_t udp[8] = {0};
        udp[0] = static_cast<uint8_t>(port >> 8);
        udp[1] = static_cast<uint8_t>(port & 0xff);
        udp[2] = udp[0];
        udp[3] = udp[1];
        udp[4] = static_cast<uint8_t>(udp_len >> 8);
        udp[5] = static_cast<uint8_t>(udp_len & 0xff);
        out.write(reinterpret_cast<const char*>(udp), sizeof udp);
        out.write(reinterpret_cast<const char*>(pl.data()),
                  static_cast<std::streamsize>(pl.size()));
        t_us += 100000 / 75;  // 75 packets per 100 ms revolution
    }
}

inline void write_pcap_file(const std::string& path,
                            const std::vector<std::vector<uint8_t>>& payloads,
                            int port = pcapfmt::kDefaultPort) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write pcap file: " + path);
    write_pcap(f, payloads, port);
}

// --------------------------------------------------------------------------
// Raw packet files: repeated [u32le length][length bytes].

inline void write_raw(std::ostream& out,
                      const std::vector<std::vector<uint8_t>>& payloads) {
    for (const auto& pl : payloads) {
        const uint32_t len = static_cast<uint32_t>(pl.size());
        out.write(reinterpret_cast<const char*>(&len), 4);
        out.write(reinterpret_cast<const char*>(pl.data()),
                  static_cast<std::streamsize>(pl.size()));
    }
}

inline std::vector<std::vector<uint8_t>> read_raw(std::istream& in) {
    std::vector<std::vector<uint8_t>> out;
    for (;;) {
        uint32_t len;
        in.read(reinterpret_cast<char*>(&len), 4);
        if (in.gcount() == 0) break;
        if (in.gcount() != 4) throw IoError("raw: truncated length prefix");
        if (len > (1u << 20)) throw IoError("raw: absurd frame length");
        std::vector<uint8_t> frame(len);
        if (!in.read(reinterpret_cast<char*>(frame.data()), len))
            throw IoError("raw: truncated frame body");
        out.push_back(std::move(frame));
    }
    return out;
}

inline void write_raw_file(const std::string& path,
                           const std::vector<std::vector<uint8_t>>& p) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write raw file: " + path);
    write_raw(f, p);
}

inline std::vector<std::vector<uint8_t>> read_raw_file(
    const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open raw file: " + path);
    return read_raw(f);
}

// --------------------------------------------------------------------------
// Live UDP source.

class UdpSource {
  public:
    explicit UdpSource(int port) {
        fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
        if (fd_ < 0) throw IoError("udp: socket() failed");
        int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        addr.sin_port = htons(static_cast<uint16_t>(port));
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) <
            0) {
            ::close(fd_);
            throw IoError("udp: cannot bind port " + std::to_string(port));
        }
    }
    UdpSource(const UdpSource&) = delete;
    UdpSource& operator=(const UdpSource&) = delete;
    ~UdpSource() {
        if (fd_ >= 0) ::close(fd_);
    }

    // One datagram, or nullopt on timeout.
    std::optional<std::vector<uint8_t>> recv(int timeout_ms) {
        pollfd pf{fd_, POLLIN, 0};
        const int r = ::poll(&pf, 1, timeout_ms);
        if (r <= 0) return std::nullopt;
        std::vector<uint8_t> buf(2048);
        const ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0, nullptr,
                                     nullptr);
        if (n < 0) return std::nullopt;
        buf.resize(static_cast<size_t>(n));
        return buf;
    }

  private:
    int fd_ = -1;
};

// --------------------------------------------------------------------------
// Segmentation parameter files (JSON, flat object, full round trip).

inline void to_json(nlohmann::json& j, const SegParams& p) {
    j = nlohmann::json{{"buffer_packets", p.buffer_packets},
                       {"t_alpha", p.t_alpha},
                       {"t_delta_rho", p.t_delta_rho},
                       {"virtual_point_z", p.virtual_point_z},
                       {"block_size", p.block_size},
                       {"t_p2line", p.t_p2line},
                       {"line_slope_min", p.line_slope_min},
                       {"line_slope_max", p.line_slope_max},
                       {"line_intercept_band", p.line_intercept_band},
                       {"t_ccl", p.t_ccl},
                       {"search_cols_near", p.search_cols_near},
                       {"search_cols_far", p.search_cols_far},
                       {"near_far_range", p.near_far_range},
                       {"t_neighbour", p.t_neighbour},
                       {"mutual_n", p.mutual_n},
                       {"t_merge", p.t_merge},
                       {"min_cluster_size", p.min_cluster_size},
                       {"refine_enabled", p.refine_enabled}};
}

inline void from_json(const nlohmann::json& j, SegParams& p) {
    static const char* known[] = {
        "buffer_packets", "t_alpha", "t_delta_rho", "virtual_point_z",
        "block_size", "t_p2line", "line_slope_min", "line_slope_max",
        "line_intercept_band",
        "t_ccl", "search_cols_near", "search_cols_far", "near_far_range",
        "t_neighbour", "mutual_n", "t_merge", "min_cluster_size",
        "refine_enabled"};
    for (const auto& [key, val] : j.items()) {
        if (std::find_if(std::begin(known), std::end(known), [&](auto* k) {
                return key == k;
            }) == std::end(known))
            throw IoError("unknown parameter: " + key);
    }
    p.buffer_packets = j.value("buffer_packets", p.buffer_packets);
    p.t_alpha = j.value("t_alpha", p.t_alpha);
    p.t_delta_rho = j.value("t_delta_rho", p.t_delta_rho);
    p.virtual_point_z = j.value("virtual_point_z", p.virtual_point_z);
    p.block_size = j.value("block_size", p.block_size);
    p.t_p2line = j.value("t_p2line", p.t_p2line);
    p.line_slope_min = j.value("line_slope_min", p.line_slope_min);
    p.line_slope_max = j.value("line_slope_max", p.line_slope_max);
    p.line_intercept_band = j.value("line_intercept_band",
                                    p.line_intercept_band);
    p.t_ccl = j.value("t_ccl", p.t_ccl);
    p.search_cols_near = j.value("search_cols_near", p.search_cols_near);
    p.search_cols_far = j.value("search_cols_far", p.search_cols_far);
    p.near_far_range = j.value("near_far_range", p.near_far_range);
    p.t_neighbour = j.value("t_neighbour", p.t_neighbour);
    p.mutual_n = j.value("mutual_n", p.mutual_n);
    p.t_merge = j.value("t_merge", p.t_merge);
    p.min_cluster_size = j.value("min_cluster_size", p.min_cluster_size);
    p.refine_enabled = j.value("refine_enabled", p.refine_enabled);
}

inline SegParams load_params(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open parameter file: " + path);
    nlohmann::json j;
    try {
        f >> j;
        SegParams p;
        from_json(j, p);
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad parameter file " + path + ": " + e.what());
    }
}

inline void save_params(const SegParams& p, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write parameter file: " + path);
    nlohmann::json j = p;
    f << j.dump(2) << '\n';
}

// --------------------------------------------------------------------------
// Cluster output, ndjson: one object per cluster, canonical field and point
// ordering so identical segmentations serialize identically.

inline void write_cluster_ndjson(std::ostream& out, uint64_t scan_id,
                                 const InitialCluster& c,
                                 bool include_points = false) {
    if (c.points.empty()) return;
    std::vector<const SphericalPoint*> pts;
    pts.reserve(c.points.size());
    for (const auto& p : c.points) pts.push_back(&p);
    std::sort(pts.begin(), pts.end(), [](const auto* a, const auto* b) {
        return std::tie(a->col, a->row) < std::tie(b->col, b->row);
    });
    double cx = 0, cy = 0, cz = 0;
    double mn[3] = {pts[0]->x, pts[0]->y, pts[0]->z};
    double mx[3] = {pts[0]->x, pts[0]->y, pts[0]->z};
    for (const auto* p : pts) {
        cx += p->x;
        cy += p->y;
        cz += p->z;
        mn[0] = std::min(mn[0], p->x);
        mn[1] = std::min(mn[1], p->y);
        mn[2] = std::min(mn[2], p->z);
        mx[0] = std::max(mx[0], p->x);
        mx[1] = std::max(mx[1], p->y);
        mx[2] = std::max(mx[2], p->z);
    }
    const double n = static_cast<double>(pts.size());
    nlohmann::json j;
    j["scan"] = scan_id;
    j["id"] = c.id;
    j["n"] = pts.size();
    j["col_start"] = c.col_start;
    j["col_end"] = c.col_end;
    j["centroid"] = {cx / n, cy / n, cz / n};
    j["min"] = {mn[0], mn[1], mn[2]};
    j["max"] = {mx[0], mx[1], mx[2]};
    if (include_points) {
        auto arr = nlohmann::json::array();
        for (const auto* p : pts)
            arr.push_back({p->row, p->col, p->x, p->y, p->z});
        j["points"] = std::move(arr);
    }
    out << j.dump() << '\n';
}

// --------------------------------------------------------------------------
// PLY (ascii): point cloud with ground label and cluster id (-1 = none).

struct PlyPoint {
    double x = 0, y = 0, z = 0;
    uint8_t label = 0;
    int32_t cluster = -1;
};

inline void write_ply(std::ostream& out, const std::vector<PlyPoint>& pts) {
    out << "ply\nformat ascii 1.0\n"
        << "element vertex " << pts.size() << "\n"
        << "property double x\nproperty double y\nproperty double z\n"
        << "property uchar label\nproperty int cluster\nend_header\n";
    char line[160];
    for (const auto& p : pts) {
        std::snprintf(line, sizeof line, "%.6f %.6f %.6f %u %d\n", p.x, p.y,
                      p.z, static_cast<unsigned>(p.label), p.cluster);
        out << line;
    }
}

// --------------------------------------------------------------------------
// Per-buffer latency CSV.

inline void write_latency_csv(std::ostream& out,
                              const std::vector<ScanResult>& scans) {
    out << "scan_id,buffer_seq,columns,ground_us,cluster_us\n";
    for (const auto& s : scans)
        for (const auto& b : s.buffer_times)
            out << b.scan_id << ',' << b.buffer_seq << ',' << b.columns << ','
                << b.ground_us << ',' << b.cluster_us << '\n';
}

}  // namespace streamseg
