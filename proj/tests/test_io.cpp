#include "doctest.h"
#include "support.hpp"

#include "owcnf/io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

using namespace owcnf;
using namespace owcnf::io;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "owcnf_unit";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::vector<TensorRecord> sample_records() {
    const Image a = testing::random_image(5, 3, 1, -2.0, 2.0);
    TensorRecord r1 = image_record("alpha", a);
    TensorRecord r2{"beta/gamma", {2, 3, 4}, std::vector<float>(24)};
    for (std::size_t i = 0; i < r2.data.size(); ++i) r2.data[i] = static_cast<float>(i) * 0.25f - 1.0f;
    TensorRecord r3{"scalar", {1}, {3.5f}};
    return {r1, r2, r3};
}

std::vector<std::uint8_t> read_pgm_pixels(const std::filesystem::path& p, int& w, int& h) {
    std::ifstream f(p, std::ios::binary);
    std::string magic;
    int maxv = 0;
    f >> magic >> w >> h >> maxv;
    f.get();
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 2);
    f.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    CHECK(magic == "P5");
    CHECK(maxv == 65535);
    return px;
}

} // namespace

TEST_CASE("containers round trip bit for bit") {
    const auto recs = sample_records();
    const auto path = scratch("round.owcf");
    write_container(path, recs);
    const auto back = read_container(path);
    REQUIRE(back.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(back[i].name == recs[i].name);
        CHECK(back[i].dims == recs[i].dims);
        CHECK(std::memcmp(back[i].data.data(), recs[i].data.data(), recs[i].data.size() * sizeof(float)) == 0);
    }
    CHECK(encode_container(back) == encode_container(recs));
}

TEST_CASE("the byte layout is little-endian with the documented header") {
    const std::vector<TensorRecord> one{{"x", {2}, {1.0f, -2.0f}}};
    const auto bytes = encode_container(one);
    const std::vector<std::uint8_t> want{'O', 'W', 'C', 'F', 1, 0, 0, 0, 1, 0, 0, 0,  // magic, version, count
                                         1, 0, 'x',                                      // name
                                         1, 1, 2, 0, 0, 0,                               // dtype, ndim, dims
                                         0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
    CHECK(bytes == want);
}

TEST_CASE("an empty record list is a valid container") {
    const auto bytes = encode_container(std::vector<TensorRecord>{});
    CHECK(bytes.size() == 12);
    CHECK(decode_container(bytes).empty());
}

TEST_CASE("malformed containers raise structured errors") {
    auto bytes = encode_container(sample_records());
    for (const std::size_t cut : {std::size_t{3}, std::size_t{11}, std::size_t{20}, bytes.size() - 1}) {
        const std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
        try {
            decode_container(part);
            FAIL("truncated container accepted");
        } catch (const ContainerError& e) {
            CHECK((e.kind() == ContainerError::Kind::truncated || e.kind() == ContainerError::Kind::bad_magic));
        }
    }
    auto bad = bytes;
    bad[0] = 'X';
    try {
        decode_container(bad);
        FAIL("bad magic accepted");
    } catch (const ContainerError& e) {
        CHECK(e.kind() == ContainerError::Kind::bad_magic);
    }
    bad = bytes;
    bad[4] = 9;
    try {
        decode_container(bad);
        FAIL("bad version accepted");
    } catch (const ContainerError& e) {
        CHECK(e.kind() == ContainerError::Kind::bad_version);
    }
    auto recs = sample_records();
    recs[1].name = recs[0].name;
    CHECK_THROWS_AS(encode_container(recs), ContainerError);
    recs = sample_records();
    recs[0].data.pop_back();
    CHECK_THROWS_AS(encode_container(recs), ContainerError);

    bytes.push_back(0);
    CHECK_THROWS_AS(decode_container(bytes), ContainerError);
    CHECK_THROWS_AS(read_container(scratch("does_not_exist.owcf")), ContainerError);
}

TEST_CASE("images and sinograms keep their shape") {
    const Image img = testing::random_image(7, 4, 2);
    write_image(scratch("img.owcf"), img);
    const Image back = read_image(scratch("img.owcf"));
    CHECK(back.width == 7);
    CHECK(back.height == 4);
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(back.data[i] == static_cast<double>(static_cast<float>(img.data[i])));

    Sinogram s(3, 5);
    for (std::size_t i = 0; i < s.size(); ++i) s.data[i] = 0.5 * static_cast<double>(i);
    write_sinogram(scratch("sino.owcf"), s);
    const Sinogram sb = read_sinogram(scratch("sino.owcf"));
    CHECK(sb.n_views == 3);
    CHECK(sb.n_bins == 5);
    CHECK(sb.data == s.data);
    CHECK_THROWS(read_sinogram(scratch("img.owcf")));
}

TEST_CASE("PGM export maps the window linearly") {
    int w = 0;
    int h = 0;
    export_pgm(Image(3, 2, -1.0), scratch("lo.pgm"), -1.0, 3.0);
    for (const auto b : read_pgm_pixels(scratch("lo.pgm"), w, h)) CHECK(b == 0);
    CHECK(w == 3);
    CHECK(h == 2);
    export_pgm(Image(3, 2, 3.0), scratch("hi.pgm"), -1.0, 3.0);
    for (const auto b : read_pgm_pixels(scratch("hi.pgm"), w, h)) CHECK(b == 0xff);
    export_pgm(Image(3, 2, 1.0), scratch("mid.pgm"), -1.0, 3.0);
    const auto mid = read_pgm_pixels(scratch("mid.pgm"), w, h);
    const int v = mid[0] << 8 | mid[1];
    CHECK(std::abs(v - 32767.5) <= 1.0);
    export_pgm(Image(1, 1, 100.0), scratch("clamp.pgm"), 0.0, 1.0);
    CHECK(read_pgm_pixels(scratch("clamp.pgm"), w, h)[0] == 0xff);
    CHECK_THROWS_AS(export_pgm(Image(1, 1), scratch("bad.pgm"), 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("config files") {
    const Config c = Config::parse("# comment\ntop = 1\n[recon]\nK = 60 ; trailing\nomega0=0.1\nflag = true\n"
                                   "list = 1, 2.5, 4\nname = strided\n");
    CHECK(c.get_int("top", 0) == 1);
    CHECK(c.get_int("recon.K", 0) == 60);
    CHECK(c.get_double("recon.omega0", 0.0) == 0.1);
    CHECK(c.get_bool("recon.flag", false));
    CHECK(c.get_doubles("recon.list", {}) == std::vector<double>{1.0, 2.5, 4.0});
    CHECK(c.get_string("recon.name") == "strided");
    CHECK(c.get_double("recon.missing", 7.0) == 7.0);
    CHECK_THROWS_AS(c.get_string("recon.missing"), std::invalid_argument);
    CHECK_THROWS_AS(c.get_int("recon.name", 0), std::invalid_argument);
    CHECK_THROWS_AS(Config::parse("[broken\n"), std::invalid_argument);
    CHECK_THROWS_AS(Config::parse("novalue\n"), std::invalid_argument);

    Config d = c;
    d.apply_override("recon.K=5");
    d.apply_override("new.key = x");
    CHECK(d.get_int("recon.K", 0) == 5);
    CHECK(d.get_string("new.key") == "x");
    CHECK_THROWS_AS(d.apply_override("nonsense"), std::invalid_argument);

    // Text round trip.
    const Config again = Config::parse(d.to_string());
    CHECK(again.entries() == d.entries());
}

TEST_CASE("doubles format to their shortest round-trip form") {
    for (const double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.1) == "0.1");
}
