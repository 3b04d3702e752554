#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <fstream>

#include "lmprobe/safetensors.hpp"
#include "support/test_support.hpp"

using lmprobe::SafetensorsFile;
using lmprobe::testing::NamedTensor;
using lmprobe::testing::scratch_dir;
using lmprobe::testing::write_safetensors;

TEST_CASE("round trip through writer and reader") {
    const auto dir = scratch_dir("st");
    const auto path = dir / "t.safetensors";
    write_safetensors(path, {{"a.weight", {{2, 3}, {1, 2, 3, 4, 5, 6}}},
                             {"b.bias", {{4}, {0.5f, -0.5f, 0.25f, 0.0f}}}});

    SafetensorsFile file(path);
    CHECK(file.contains("a.weight"));
    CHECK(file.contains("b.bias"));
    CHECK_FALSE(file.contains("c"));
    CHECK(file.names().size() == 2);

    const auto a = file.read_f32("a.weight", {2, 3});
    CHECK(a == std::vector<float>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("shape mismatch reports both shapes and the tensor name") {
    const auto dir = scratch_dir("st");
    const auto path = dir / "t.safetensors";
    write_safetensors(path, {{"a.weight", {{2, 3}, {1, 2, 3, 4, 5, 6}}}});
    SafetensorsFile file(path);
    CHECK_THROWS_WITH_AS(file.read_f32("a.weight", {3, 2}),
                         doctest::Contains("a.weight"), std::runtime_error);
    try {
        file.read_f32("a.weight", {3, 2});
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2, 3]") != std::string::npos);
        CHECK(msg.find("[3, 2]") != std::string::npos);
    }
}

TEST_CASE("missing tensor names the tensor") {
    const auto dir = scratch_dir("st");
    const auto path = dir / "t.safetensors";
    write_safetensors(path, {{"a.weight", {{1}, {1.0f}}}});
    SafetensorsFile file(path);
    CHECK_THROWS_WITH_AS(file.read_f32("wte.weight", {1}),
                         doctest::Contains("wte.weight"), std::runtime_error);
}

TEST_CASE("f16 payloads widen to f32") {
    CHECK(lmprobe::f16_to_f32(0x3C00) == 1.0f);
    CHECK(lmprobe::f16_to_f32(0xBC00) == -1.0f);
    CHECK(lmprobe::f16_to_f32(0x0000) == 0.0f);
    CHECK(lmprobe::f16_to_f32(0x8000) == -0.0f);
    CHECK(lmprobe::f16_to_f32(0x3555) == doctest::Approx(0.333251953125));
    CHECK(lmprobe::f16_to_f32(0x7C00) == std::numeric_limits<float>::infinity());
    CHECK(std::isnan(lmprobe::f16_to_f32(0x7E00)));
    CHECK(lmprobe::f16_to_f32(0x0001) == doctest::Approx(5.9604645e-08));  // smallest subnormal
    CHECK(lmprobe::f16_to_f32(0x03FF) == doctest::Approx(6.097555e-05));   // largest subnormal
}

TEST_CASE("garbage and truncated files are rejected") {
    const auto dir = scratch_dir("st");

    {
        std::ofstream out(dir / "short.safetensors", std::ios::binary);
        out << "abc";
    }
    CHECK_THROWS_AS(SafetensorsFile(dir / "short.safetensors"), std::runtime_error);

    {
        std::ofstream out(dir / "badlen.safetensors", std::ios::binary);
        std::uint64_t len = 1u << 30;
        out.write(reinterpret_cast<const char*>(&len), 8);
        out << "{}";
    }
    CHECK_THROWS_AS(SafetensorsFile(dir / "badlen.safetensors"), std::runtime_error);

    {
        std::ofstream out(dir / "badjson.safetensors", std::ios::binary);
        std::uint64_t len = 4;
        out.write(reinterpret_cast<const char*>(&len), 8);
        out << "#!?!";
    }
    CHECK_THROWS_AS(SafetensorsFile(dir / "badjson.safetensors"), std::runtime_error);

    CHECK_THROWS_AS(SafetensorsFile(dir / "does_not_exist.safetensors"), std::runtime_error);

    {
        // offsets pointing past the payload
        std::ofstream out(dir / "badoff.safetensors", std::ios::binary);
        const std::string header = R"({"x":{"dtype":"F32","shape":[4],"data_offsets":[0,16]}})";
        std::uint64_t len = header.size();
        out.write(reinterpret_cast<const char*>(&len), 8);
        out << header;  // no payload at all
    }
    CHECK_THROWS_AS(SafetensorsFile(dir / "badoff.safetensors"), std::runtime_error);
}
