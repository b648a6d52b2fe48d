#include "depthbench/dataset_io.hpp"
#include "depthbench/error.hpp"
#include "png_codec.hpp"
#include "test_support.hpp"

#include "doctest.h"

#include <fstream>

using namespace depthbench;
using depthbench::testing::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected depthbench::Error");
    return ErrorCode::InvalidArgument;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

} // namespace

TEST_CASE("16-bit depth round trip keeps raw values bit-exact") {
    TempDir dir;
    DepthMap map;
    map.width = 2;
    map.height = 2;
    map.values = {0, 100, 200, 65535};
    save_depth_png(dir / "d.png", map);

    const DepthMap back = load_depth_png(dir / "d.png");
    CHECK(back.width == 2);
    CHECK(back.height == 2);
    CHECK(back.values == map.values);
    CHECK_FALSE(back.valid(0));
    CHECK(back.valid(1));
    CHECK(back.valid(3));
}

TEST_CASE("random 16-bit rasters survive encode and decode") {
    TempDir dir;
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> raw(0, 65535);
    for (int trial = 0; trial < 5; ++trial) {
        DepthMap map;
        map.width = 17 + trial;
        map.height = 9 + 2 * trial;
        map.values.resize(map.size());
        for (auto& v : map.values) v = static_cast<std::uint16_t>(raw(rng));
        save_depth_png(dir / "r.png", map);
        CHECK(load_depth_png(dir / "r.png").values == map.values);
    }
}

TEST_CASE("rgb round trip") {
    TempDir dir;
    RgbImage img;
    img.width = 1;
    img.height = 1;
    img.values = {10, 20, 30};
    save_rgb_png(dir / "c.png", img);
    const RgbImage back = load_rgb_png(dir / "c.png");
    CHECK(back.width == 1);
    CHECK(back.values == std::vector<std::uint8_t>{10, 20, 30});
}

TEST_CASE("decoder rejects the wrong kind of PNG") {
    TempDir dir;
    const std::vector<std::uint8_t> gray8 = {1, 2, 3, 4};
    png::encode_file(dir / "gray8.png", 2, 2, 8, 1, gray8.data());
    CHECK(code_of([&] { load_depth_png(dir / "gray8.png"); }) == ErrorCode::WrongBitDepth);
    CHECK(code_of([&] { load_rgb_png(dir / "gray8.png"); }) == ErrorCode::WrongChannelCount);

    const std::vector<std::uint8_t> rgba(2 * 2 * 4, 7);
    png::encode_file(dir / "rgba.png", 2, 2, 8, 4, rgba.data());
    CHECK(code_of([&] { load_rgb_png(dir / "rgba.png"); }) == ErrorCode::WrongChannelCount);

    const std::vector<std::uint8_t> rgb16(2 * 2 * 3 * 2, 9);
    png::encode_file(dir / "rgb16.png", 2, 2, 16, 3, rgb16.data());
    CHECK(code_of([&] { load_depth_png(dir / "rgb16.png"); }) == ErrorCode::WrongChannelCount);

    write_text(dir / "text.png", "definitely not a png");
    CHECK(code_of([&] { load_depth_png(dir / "text.png"); }) == ErrorCode::NotPng);
    CHECK(code_of([&] { load_rgb_png(dir / "missing.png"); }) == ErrorCode::NotFound);
}

TEST_CASE("to_metric_depth applies the unit scale without clamping") {
    DepthMap map;
    map.width = 2;
    map.height = 1;
    map.values = {0, 1000};
    const auto f = to_metric_depth(map);
    CHECK(f.depth_m == std::vector<double>{0.0, 1.0});
    CHECK(f.mask == std::vector<bool>{false, true});

    DepthMap single;
    single.width = 1;
    single.height = 1;
    single.values = {256};
    single.unit_scale = 1.0 / 256.0;
    CHECK(to_metric_depth(single).depth_m[0] == 1.0);

    DepthMap zeros;
    zeros.width = 3;
    zeros.height = 1;
    zeros.values = {0, 0, 0};
    CHECK(to_metric_depth(zeros).mask == std::vector<bool>{false, false, false});
}

TEST_CASE("to_metric_depth is linear in the unit scale") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> raw(0, 65535);
    DepthMap a;
    a.width = 8;
    a.height = 4;
    a.values.resize(a.size());
    for (auto& v : a.values) v = static_cast<std::uint16_t>(raw(rng));
    a.unit_scale = 0.00125;
    DepthMap b = a;
    b.unit_scale = 2 * a.unit_scale;
    const auto fa = to_metric_depth(a);
    const auto fb = to_metric_depth(b);
    CHECK(fa.mask == fb.mask);
    for (std::size_t i = 0; i < fa.size(); ++i) {
        CHECK(fb.depth_m[i] == 2.0 * fa.depth_m[i]);
    }
}

TEST_CASE("from_metric_depth quantizes and keeps masked pixels nonzero") {
    MetricDepthField f = depthbench::testing::make_field(4, 1, {0.0, 1.2344, 0.0001, 100.0});
    const DepthMap m = from_metric_depth(f);
    CHECK(m.values == std::vector<std::uint16_t>{0, 1234, 1, 65535});
}

TEST_CASE("validate_pair") {
    RgbImage rgb;
    rgb.width = kVgaWidth;
    rgb.height = kVgaHeight;
    rgb.values.assign(rgb.width * rgb.height * 3, 0);

    DepthMap depth;
    depth.width = kVgaWidth;
    depth.height = kVgaHeight;
    depth.values.assign(depth.size(), 1000);
    const std::size_t zeros = depth.size() / 50;
    for (std::size_t i = 0; i < zeros; ++i) depth.values[i * 50] = 0;

    SUBCASE("VGA pair with 2% zeros is fine") {
        const auto report = validate_pair(rgb, depth);
        CHECK(report.ok());
        CHECK(report.findings.empty());
        CHECK(report.invalid_fraction == doctest::Approx(0.02).epsilon(1e-12));
        const auto again = validate_pair(rgb, depth);
        CHECK(again.invalid_fraction == report.invalid_fraction);
        CHECK(again.findings.size() == report.findings.size());
    }
    SUBCASE("size mismatch is an error") {
        DepthMap small;
        small.width = 320;
        small.height = 240;
        small.values.assign(small.size(), 5);
        const auto report = validate_pair(rgb, small);
        CHECK(report.has(FindingKind::DimensionMismatch));
        CHECK_FALSE(report.ok());
    }
    SUBCASE("non-VGA pair is only a warning") {
        RgbImage r;
        r.width = 100;
        r.height = 100;
        r.values.assign(100 * 100 * 3, 1);
        DepthMap d;
        d.width = 100;
        d.height = 100;
        d.values.assign(d.size(), 7);
        const auto report = validate_pair(r, d);
        CHECK(report.has(FindingKind::NonVgaResolution));
        CHECK(report.ok());
    }
}

TEST_CASE("manifest parsing") {
    SUBCASE("well-formed lines") {
        const auto m = parse_manifest(
            R"({"rgb": "rgb/0.png", "depth": "depth/0.png", "split": "train"})"
            "\n"
            R"({"rgb": "rgb/1.png", "depth": "depth/1.png", "split": "val", "unit_scale": 0.002})"
            "\n\n"
            R"({"rgb": "rgb/2.png", "depth": "depth/2.png", "split": "test"})"
            "\n");
        REQUIRE(m.entries.size() == 3);
        CHECK(m.entries[1].split == Split::Val);
        CHECK(m.entries[1].unit_scale == 0.002);
        CHECK(m.entries[2].unit_scale == kDefaultUnitScale);
        CHECK(m.entries[2].depth_path == "depth/2.png");
    }
    SUBCASE("bad split reports its line") {
        const std::string text = R"({"rgb": "a.png", "depth": "a_d.png", "split": "train"})"
                                 "\n"
                                 R"({"rgb": "b.png", "depth": "b_d.png", "split": "foo"})"
                                 "\n";
        try {
            parse_manifest(text);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
            CHECK(e.code() == ErrorCode::ParseError);
        }
    }
    SUBCASE("malformed json, missing keys and bad scale") {
        CHECK(code_of([] { parse_manifest("{not json\n"); }) == ErrorCode::ParseError);
        CHECK(code_of([] { parse_manifest(R"({"rgb": "a.png", "split": "val"})"); }) == ErrorCode::ParseError);
        CHECK(code_of([] {
                  parse_manifest(R"({"rgb": "a.png", "depth": "b.png", "split": "val", "unit_scale": -1})");
              }) == ErrorCode::ParseError);
    }
    SUBCASE("empty input is an empty manifest") {
        CHECK(parse_manifest("").entries.empty());
        CHECK(parse_manifest("\n  \n").entries.empty());
    }
    SUBCASE("duplicate rgb path") {
        const std::string line = R"({"rgb": "a.png", "depth": "a_d.png", "split": "train"})";
        CHECK(code_of([&] { parse_manifest(line + "\n" + line + "\n"); }) == ErrorCode::DuplicateEntry);
    }
    SUBCASE("load from disk") {
        TempDir dir;
        write_text(dir / "m.jsonl", R"({"rgb": "x.png", "depth": "y.png", "split": "test"})"
                                    "\n");
        CHECK(load_manifest(dir / "m.jsonl").entries.size() == 1);
        CHECK(code_of([&] { load_manifest(dir / "none.jsonl"); }) == ErrorCode::NotFound);
    }
}
