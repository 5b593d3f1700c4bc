#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "polgs/errors.hpp"
#include "polgs/io/exr.hpp"
#include "polgs/io/png.hpp"
#include "polgs/io/ply.hpp"
#include "polgs/rng.hpp"

using namespace polgs;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const char* name) { return fs::temp_directory_path() / name; }

Image float_exact_image(int w, int h, int c, uint64_t seed, double lo,
                        double hi) {
    Image im(w, h, c);
    Rand64 rng(seed);
    for (size_t i = 0; i < im.size(); ++i)
        im.data()[i] = double(float(rng.uniform(lo, hi)));
    return im;
}

} // namespace

TEST_CASE("three-channel exr round trips bit-exactly at float precision") {
    const Image im = float_exact_image(13, 9, 3, 1, -4.0, 4.0);
    const fs::path p = tmp("polgs_io_rgb.exr");
    write_exr(p.string(), im);
    const Image back = read_exr(p.string());
    REQUIRE(back.same_shape(im));
    for (size_t i = 0; i < im.size(); ++i)
        CHECK(back.data()[i] == im.data()[i]);
    fs::remove(p);
}

TEST_CASE("single-channel exr round trips bit-exactly at float precision") {
    const Image im = float_exact_image(7, 11, 1, 2, 0.0, 100.0);
    const fs::path p = tmp("polgs_io_gray.exr");
    write_exr(p.string(), im);
    const Image back = read_exr(p.string());
    REQUIRE(back.same_shape(im));
    for (size_t i = 0; i < im.size(); ++i)
        CHECK(back.data()[i] == im.data()[i]);
    fs::remove(p);
}

TEST_CASE("exr io rejects broken inputs") {
    CHECK_THROWS_AS(read_exr("/nonexistent/polgs_missing.exr"), DataError);
    const fs::path p = tmp("polgs_io_garbage.exr");
    {
        std::ofstream os(p, std::ios::binary);
        os << "this is not an exr file";
    }
    CHECK_THROWS_AS(read_exr(p.string()), DataError);
    fs::remove(p);
    // Unsupported channel counts are refused at write time.
    Image two(4, 4, 2);
    CHECK_THROWS_AS(write_exr(tmp("polgs_io_2ch.exr").string(), two),
                    DataError);
}

TEST_CASE("gray png round trips 8-bit values exactly") {
    Image im(16, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 16; ++x)
            im.at(x, y) = double(y * 16 + x) * 4.0 / 255.0;
    const fs::path p = tmp("polgs_io_gray.png");
    write_png_gray(p.string(), im);
    const Image back = read_png_gray(p.string());
    REQUIRE(back.same_shape(im));
    for (size_t i = 0; i < im.size(); ++i)
        CHECK(back.data()[i] == doctest::Approx(im.data()[i]).epsilon(1e-12));
    fs::remove(p);
}

TEST_CASE("png writers clamp out-of-range values") {
    Image im(2, 1, 1);
    im.at(0, 0) = -0.5;
    im.at(1, 0) = 7.0;
    const fs::path p = tmp("polgs_io_clamp.png");
    write_png_gray(p.string(), im);
    const Image back = read_png_gray(p.string());
    CHECK(back.at(0, 0) == 0.0);
    CHECK(back.at(1, 0) == 1.0);
    fs::remove(p);

    Image rgb(2, 2, 3);
    rgb.fill(0.25);
    const fs::path q = tmp("polgs_io_rgb.png");
    write_png_rgb(q.string(), rgb);
    CHECK(fs::exists(q));
    CHECK(fs::file_size(q) > 0);
    fs::remove(q);
}

TEST_CASE("png io rejects broken inputs") {
    CHECK_THROWS_AS(read_png_gray("/nonexistent/polgs_missing.png"),
                    DataError);
    const fs::path p = tmp("polgs_io_garbage.png");
    {
        std::ofstream os(p, std::ios::binary);
        os << "not a png";
    }
    CHECK_THROWS_AS(read_png_gray(p.string()), DataError);
    fs::remove(p);
}

TEST_CASE("ply write then read keeps float precision") {
    std::vector<PlyPoint> pts;
    Rand64 rng(3);
    for (int i = 0; i < 25; ++i) {
        PlyPoint p;
        p.position = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2),
                          rng.uniform(-2, 2));
        p.normal = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian())
                       .normalized();
        p.color = Rgb(rng.uniform(), rng.uniform(), rng.uniform());
        p.opacity = rng.uniform();
        pts.push_back(p);
    }
    const fs::path p = tmp("polgs_io_points.ply");
    write_ply(p.string(), pts);
    const auto back = read_ply(p.string());
    REQUIRE(back.size() == pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        CHECK((back[i].position - pts[i].position).norm() < 1e-6);
        CHECK((back[i].normal - pts[i].normal).norm() < 1e-6);
        CHECK(std::abs(back[i].opacity - pts[i].opacity) < 1e-6);
        for (int c = 0; c < 3; ++c)
            CHECK(std::abs(back[i].color[c] - pts[i].color[c]) <=
                  0.5 / 255.0 + 1e-9);
    }
    fs::remove(p);
}

TEST_CASE("ascii ply with extra properties parses") {
    const fs::path p = tmp("polgs_io_ascii.ply");
    {
        std::ofstream os(p);
        os << "ply\n"
           << "format ascii 1.0\n"
           << "comment hand written\n"
           << "element vertex 3\n"
           << "property float x\n"
           << "property float y\n"
           << "property float z\n"
           << "property float confidence\n"
           << "property uchar red\n"
           << "property uchar green\n"
           << "property uchar blue\n"
           << "end_header\n"
           << "0 0 0 0.5 255 0 0\n"
           << "1 0 0 0.5 0 255 0\n"
           << "0 1 0.25 0.5 0 0 255\n";
    }
    const auto pts = read_ply(p.string());
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].position == Vec3(0, 0, 0));
    CHECK(pts[1].position == Vec3(1, 0, 0));
    CHECK(pts[2].position.z() == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(pts[0].color[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pts[1].color[1] == doctest::Approx(1.0).epsilon(1e-12));
    // Normals default to zero when the file has none.
    CHECK(pts[0].normal.norm() == 0.0);
    fs::remove(p);
}

TEST_CASE("ply reader rejects malformed files") {
    CHECK_THROWS_AS(read_ply("/nonexistent/polgs_missing.ply"), DataError);

    const fs::path p = tmp("polgs_io_bad.ply");
    {
        std::ofstream os(p);
        os << "not a ply header\n";
    }
    CHECK_THROWS_AS(read_ply(p.string()), DataError);

    {
        std::ofstream os(p);
        os << "ply\nformat ascii 1.0\nelement vertex 5\n"
           << "property float x\nproperty float y\nproperty float z\n"
           << "end_header\n"
           << "0 0 0\n"; // four vertices short
    }
    CHECK_THROWS_AS(read_ply(p.string()), DataError);

    {
        std::ofstream os(p);
        os << "ply\nformat ascii 1.0\nelement vertex 1\n"
           << "property float u\nproperty float v\n" // no x/y/z at all
           << "end_header\n0 0\n";
    }
    CHECK_THROWS_AS(read_ply(p.string()), DataError);
    fs::remove(p);
}
