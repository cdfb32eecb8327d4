#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "helpers.hpp"
#include "streamseg/packet.hpp"

using namespace streamseg;
using Catch::Matchers::WithinAbs;

TEST_CASE("u16le round trip") {
    uint8_t buf[2];
    wr_u16le(buf, 0x1234);
    CHECK(buf[0] == 0x34);
    CHECK(buf[1] == 0x12);
    CHECK(rd_u16le(buf) == 0x1234);
}

TEST_CASE("range tick scale") {
    // 4 mm ticks: a 10 m wall is tick 2500.
    CHECK_THAT(2500 * kRangeTick, WithinAbs(10.0, 1e-12));
    CHECK_THAT(65535 * kRangeTick, WithinAbs(262.14, 1e-9));
}

TEST_CASE("encode/decode identity") {
    std::mt19937_64 rng(101);
    for (int i = 0; i < 1000; ++i) {
        const DataPacket p = testutil::random_packet(rng);
        const std::vector<uint8_t> wire = encode_packet(p);
        REQUIRE(wire.size() == kPacketBytes);
        CHECK(wire[0] == 0xff);
        CHECK(wire[1] == 0xee);
        const DataPacket q = decode_packet(wire);
        CHECK(p == q);
    }
}

TEST_CASE("decode rejects wrong length") {
    std::vector<uint8_t> buf(kPacketBytes - 1, 0);
    CHECK_THROWS_AS(decode_packet(buf), WrongLengthError);
    buf.assign(kPacketBytes + 1, 0);
    CHECK_THROWS_AS(decode_packet(buf), WrongLengthError);
    buf.clear();
    CHECK_THROWS_AS(decode_packet(buf), WrongLengthError);
}

TEST_CASE("decode rejects out-of-range azimuth") {
    std::mt19937_64 rng(102);
    DataPacket p = testutil::random_packet(rng);
    std::vector<uint8_t> wire = encode_packet(p);
    // Block 3 azimuth -> 36000 (first invalid value).
    wr_u16le(wire.data() + 3 * kBlockBytes + 2, 36000);
    CHECK_THROWS_AS(decode_packet(wire), BadAzimuthError);
    wr_u16le(wire.data() + 3 * kBlockBytes + 2, 35999);
    CHECK_NOTHROW(decode_packet(wire));
}

TEST_CASE("decode tolerates unexpected flag bytes") {
    std::mt19937_64 rng(103);
    const DataPacket p = testutil::random_packet(rng);
    std::vector<uint8_t> wire = encode_packet(p);
    wire[0] = 0xaa;
    wire[1] = 0xbb;
    const DataPacket q = decode_packet(wire);
    CHECK(q.blocks[0].azimuth_cd == p.blocks[0].azimuth_cd);
}

TEST_CASE("tail bytes survive the round trip") {
    std::mt19937_64 rng(104);
    DataPacket p = testutil::random_packet(rng);
    for (int i = 0; i < kTailBytes; ++i)
        p.tail[i] = static_cast<uint8_t>(i * 5 + 1);
    const DataPacket q = decode_packet(encode_packet(p));
    CHECK(q.tail == p.tail);
}

TEST_CASE("default calibration tables") {
    const BeamCalibration c = default_calibration();
    // channel_to_row and row_to_channel are inverse permutations.
    for (int ch = 0; ch < kBeams; ++ch)
        CHECK(c.row_to_channel[c.channel_to_row[ch]] == ch);
    // Rows are sorted bottom to top.
    for (int r = 1; r < kBeams; ++r)
        CHECK(c.row_vertical_deg(r) >= c.row_vertical_deg(r - 1));
    CHECK_THAT(c.row_vertical_deg(0), WithinAbs(-25.0, 1e-12));
    CHECK_THAT(c.row_vertical_deg(kBeams - 1), WithinAbs(15.0, 1e-12));
    // Azimuth offsets come from the +-1.4 / +-4.2 family.
    for (int ch = 0; ch < kBeams; ++ch) {
        const double a = std::fabs(c.azimuth_offset_deg[ch]);
        CHECK((std::fabs(a - 1.4) < 1e-9 || std::fabs(a - 4.2) < 1e-9));
    }
}

TEST_CASE("calibration text round trip") {
    const BeamCalibration c = default_calibration();
    std::ostringstream os;
    save_calibration(c, os);
    std::istringstream is(os.str());
    const BeamCalibration d = parse_calibration(is);
    for (int ch = 0; ch < kBeams; ++ch) {
        CHECK_THAT(d.vertical_deg[ch], WithinAbs(c.vertical_deg[ch], 1e-9));
        CHECK_THAT(d.azimuth_offset_deg[ch],
                   WithinAbs(c.azimuth_offset_deg[ch], 1e-9));
        CHECK(d.channel_to_row[ch] == c.channel_to_row[ch]);
    }
}

TEST_CASE("calibration parser rejects bad input") {
    SECTION("missing channels") {
        std::istringstream is("0 -25.0 1.4\n1 -1.0 -4.2\n");
        CHECK_THROWS_AS(parse_calibration(is), CalibError);
    }
    SECTION("duplicate channel") {
        std::ostringstream os;
        for (int ch = 0; ch < kBeams; ++ch)
            os << (ch == 7 ? 6 : ch) << " " << (-25.0 + ch) << " 0.0\n";
        std::istringstream is(os.str());
        CHECK_THROWS_AS(parse_calibration(is), CalibError);
    }
    SECTION("vertical angle out of range") {
        std::ostringstream os;
        for (int ch = 0; ch < kBeams; ++ch)
            os << ch << " " << (ch == 3 ? -95.0 : -25.0 + ch) << " 0.0\n";
        std::istringstream is(os.str());
        CHECK_THROWS_AS(parse_calibration(is), CalibError);
    }
    SECTION("comments and blank lines are fine") {
        std::ostringstream os;
        os << "# comment line\n\n";
        for (int ch = 0; ch < kBeams; ++ch)
            os << ch << " " << (-25.0 + ch) << " 0.0  # inline\n";
        std::istringstream is(os.str());
        CHECK_NOTHROW(parse_calibration(is));
    }
}

TEST_CASE("test calibration helper is identity-mapped") {
    const BeamCalibration c = testutil::test_calibration();
    for (int ch = 0; ch < kBeams; ++ch) {
        CHECK(c.channel_to_row[ch] == ch);
        CHECK(c.azimuth_offset_deg[ch] == 0.0);
    }
    CHECK_THAT(c.row_vertical_deg(0), WithinAbs(-25.0, 1e-12));
    CHECK_THAT(c.row_vertical_deg(31), WithinAbs(15.0, 1e-12));
}
