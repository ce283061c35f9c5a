#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rawden/frame_io.hpp"
#include "rawden/image.hpp"
#include "support.hpp"

using namespace rawden;

namespace {

std::string temp_path(const char* name)
{
    return (std::filesystem::temp_directory_path() / name).string();
}

// brute-force index-mapping oracle: which plane should hold CFA pixel (x,y)?
int oracle_plane(BayerPhase phase, int x, int y)
{
    const BayerOffsets o = bayer_offsets(phase);
    if ((x & 1) == o.rx && (y & 1) == o.ry) return 0;
    if ((x & 1) == o.g1x && (y & 1) == o.g1y) return 1;
    if ((x & 1) == o.bx && (y & 1) == o.by) return 2;
    return 3;
}

} // namespace

TEST_CASE("pack_cfa: 2x2 RGGB example")
{
    CfaFrame f;
    f.phase = BayerPhase::RGGB;
    f.img = Image(2, 2, 1);
    f.img.at(0, 0) = 5;
    f.img.at(1, 0) = 6;
    f.img.at(0, 1) = 7;
    f.img.at(1, 1) = 8;

    const PackedFrame p = pack_cfa(f);
    CHECK(p.width() == 1);
    CHECK(p.height() == 1);
    CHECK(p.at(0, 0, 0) == 5); // R
    CHECK(p.at(0, 0, 1) == 6); // G1
    CHECK(p.at(0, 0, 2) == 8); // B
    CHECK(p.at(0, 0, 3) == 7); // G2
}

TEST_CASE("unpack_cfa: planes back to the mosaic")
{
    PackedFrame p(1, 1, 4);
    p.at(0, 0, 0) = 5;
    p.at(0, 0, 1) = 6;
    p.at(0, 0, 2) = 8;
    p.at(0, 0, 3) = 7;
    const CfaFrame f = unpack_cfa(p, BayerPhase::RGGB);
    CHECK(f.img.at(0, 0) == 5);
    CHECK(f.img.at(1, 0) == 6);
    CHECK(f.img.at(0, 1) == 7);
    CHECK(f.img.at(1, 1) == 8);
}

TEST_CASE("pack/unpack is a bijection for every phase")
{
    for (BayerPhase phase : {BayerPhase::RGGB, BayerPhase::GRBG, BayerPhase::GBRG, BayerPhase::BGGR}) {
        CfaFrame f;
        f.phase = phase;
        f.img = testsup::random_integer_frame(8, 6, 0x42 + static_cast<int>(phase));
        const CfaFrame back = unpack_cfa(pack_cfa(f), phase);
        CHECK(testsup::max_abs_diff(f.img, back.img) == 0.0);
    }
}

TEST_CASE("pack_cfa: 4x4 ramp against the index-mapping oracle")
{
    for (BayerPhase phase : {BayerPhase::RGGB, BayerPhase::GRBG, BayerPhase::GBRG, BayerPhase::BGGR}) {
        CfaFrame f;
        f.phase = phase;
        f.img = Image(4, 4, 1);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                f.img.at(x, y) = static_cast<float>(4 * y + x);

        const PackedFrame p = pack_cfa(f);
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x)
                CHECK(p.at(x / 2, y / 2, oracle_plane(phase, x, y)) == f.img.at(x, y));
    }
}

TEST_CASE("unpacking with a different phase then repacking with it is identity")
{
    CfaFrame f;
    f.phase = BayerPhase::RGGB;
    f.img = testsup::random_integer_frame(8, 8, 99);
    const PackedFrame p = pack_cfa(f);

    const CfaFrame as_grbg = unpack_cfa(p, BayerPhase::GRBG);
    const PackedFrame p2 = pack_cfa(as_grbg);
    CHECK(testsup::max_abs_diff(p, p2) == 0.0);
}

TEST_CASE("pack_cfa rejects odd dimensions")
{
    CfaFrame f;
    f.img = Image(3, 4, 1);
    CHECK_THROWS_AS(pack_cfa(f), DimensionError);
}

TEST_CASE("netpbm 16-bit round trip is lossless")
{
    const std::string path = temp_path("rawden_io_test.pgm");
    Image img = testsup::random_integer_frame(7, 5, 7);
    img.at(0, 0) = 65535; // extreme value must survive unclipped
    img.at(1, 0) = 0;
    write_netpbm(path, img);
    const Image back = read_netpbm(path);
    CHECK(back.width() == 7);
    CHECK(back.channels() == 1);
    CHECK(testsup::max_abs_diff(img, back) == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("netpbm P6 round trip")
{
    const std::string path = temp_path("rawden_io_test.ppm");
    const Image img = testsup::random_frame(6, 4, 3, 11, 0.f, 65535.f);
    Image quantized(6, 4, 3);
    for (size_t i = 0; i < img.size(); ++i)
        quantized.data()[i] = std::round(img.data()[i]);
    write_netpbm(path, quantized);
    const Image back = read_netpbm(path);
    CHECK(testsup::max_abs_diff(quantized, back) == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("netpbm parses a minimal hand-built header")
{
    const std::string path = temp_path("rawden_io_minimal.pgm");
    {
        std::ofstream out(path, std::ios::binary);
        out << "P5\n2 2\n65535\n";
        const uint8_t payload[8] = {0x00, 0x01, 0x00, 0x02, 0xff, 0xff, 0x00, 0x00};
        out.write(reinterpret_cast<const char*>(payload), 8);
    }
    const Image img = read_netpbm(path);
    CHECK(img.at(0, 0) == 1);
    CHECK(img.at(1, 0) == 2);
    CHECK(img.at(0, 1) == 65535);
    CHECK(img.at(1, 1) == 0);
    std::remove(path.c_str());
}

TEST_CASE("netpbm rejects bad maxval and truncated payloads")
{
    const std::string path = temp_path("rawden_io_bad.pgm");
    {
        std::ofstream out(path, std::ios::binary);
        out << "P5\n2 2\n255\n";
        out.write("\0\0\0\0\0\0\0", 8);
    }
    CHECK_THROWS_AS(read_netpbm(path), FormatError);

    {
        std::ofstream out(path, std::ios::binary);
        out << "P5\n2 2\n65535\n";
        out.write("\0\0\0", 3); // needs 8 bytes
    }
    CHECK_THROWS_AS(read_netpbm(path), FormatError);
    std::remove(path.c_str());
}

TEST_CASE("float frame container round trip")
{
    const std::string path = temp_path("rawden_io_test.rdf");
    const Image img = testsup::random_frame(5, 3, 4, 13, -100.f, 100.f);
    write_float_frame(path, img);
    const Image back = read_float_frame(path);
    CHECK(back.channels() == 4);
    CHECK(testsup::max_abs_diff(img, back) == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("sidecar round trip")
{
    const std::string path = temp_path("rawden_sidecar.json");
    Sidecar s;
    s.phase = BayerPhase::GBRG;
    s.black_level = 64;
    s.wb_gains = {2.0, 1.0, 1.5, 1.0};
    s.iso = 3200;
    s.noise_a = 0.25;
    s.noise_b = 100.0;
    write_sidecar(path, s);

    const Sidecar back = read_sidecar(path);
    CHECK(back.phase == BayerPhase::GBRG);
    CHECK(back.black_level == 64);
    CHECK(back.wb_gains[0] == 2.0);
    CHECK(back.iso == 3200);
    REQUIRE(back.noise_a.has_value());
    CHECK(*back.noise_a == 0.25);
    std::remove(path.c_str());
}
