#pragma once

// Shared fixtures for the test suite.

#include <array>
#include <random>
#include <vector>

#include "streamseg/geometry.hpp"
#include "streamseg/packet.hpp"

namespace testutil {

// Evenly spaced verticals, zero azimuth offsets, channel == row. Keeps
// hand-computed expectations simple.
inline streamseg::BeamCalibration test_calibration(double lo_deg = -25.0,
                                                   double hi_deg = 15.0) {
    streamseg::BeamCalibration c;
    for (int ch = 0; ch < streamseg::kBeams; ++ch) {
        c.vertical_deg[ch] =
            lo_deg + ch * (hi_deg - lo_deg) / (streamseg::kBeams - 1);
        c.azimuth_offset_deg[ch] = 0.0;
    }
    c.finalize();
    return c;
}

// A scan column from explicit (rho, phi_deg) pairs, bottom rows first;
// missing rows stay invalid.
inline std::array<streamseg::SphericalPoint, 32> make_column(
    const std::vector<std::pair<double, double>>& rho_phi, int col = 0,
    double theta_deg = 0.0) {
    std::array<streamseg::SphericalPoint, 32> pts{};
    for (int r = 0; r < 32; ++r) {
        pts[r].row = r;
        pts[r].col = col;
        pts[r].label = streamseg::GroundLabel::Invalid;
    }
    for (size_t i = 0; i < rho_phi.size() && i < 32; ++i)
        pts[i] = streamseg::make_point(rho_phi[i].first, rho_phi[i].second,
                                       theta_deg, static_cast<int>(i), col);
    return pts;
}

// A structurally valid random packet: in-range azimuths, random ranges
// (with some no-returns), random reflectivity and tail bytes.
inline streamseg::DataPacket random_packet(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> az(0, streamseg::kMaxAzimuthCd - 1);
    std::uniform_int_distribution<int> tick(0, 65535);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    streamseg::DataPacket p;
    for (auto& b : p.blocks) {
        b.azimuth_cd = static_cast<uint16_t>(az(rng));
        for (auto& r : b.returns) {
            r.range_ticks =
                uni(rng) < 0.15 ? 0 : static_cast<uint16_t>(tick(rng));
            r.reflectivity = static_cast<uint8_t>(byte(rng));
        }
    }
    for (auto& t : p.tail) t = static_cast<uint8_t>(byte(rng));
    return p;
}

}  // namespace testutil
