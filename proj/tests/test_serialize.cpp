#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "asds/serialize.hpp"

using asds::NamedTensors;
using asds::Tensor;
using asds::TensorD;
using asds::TensorF;

namespace {

std::string bytes_of(const auto& writable) {
    std::ostringstream os(std::ios::binary);
    asds::save_tensor(os, writable);
    return os.str();
}

} // namespace

TEST_CASE("tensor container bytes match the frozen layout", "[serialize]") {
    const TensorF t({2, 2}, {1.0f, 2.0f, 3.0f, 4.0f});
    const std::string got = bytes_of(t);

    // Hand-assembled expectation: magic, version u16 LE, dtype, rank,
    // two u64 LE extents, four f32 LE payload words.
    std::string expect = "ASDT";
    expect += std::string("\x01\x00", 2);              // version 1
    expect += '\x00';                                  // dtype f32
    expect += '\x02';                                  // rank 2
    const char extent2[8] = {2, 0, 0, 0, 0, 0, 0, 0};
    expect.append(extent2, 8);
    expect.append(extent2, 8);
    for (float v : {1.0f, 2.0f, 3.0f, 4.0f}) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        for (int i = 0; i < 4; ++i) expect += char((bits >> (8 * i)) & 0xff);
    }
    REQUIRE(got.size() == expect.size());
    REQUIRE(got == expect);
}

TEST_CASE("float and double tensors round-trip bit-exactly", "[serialize]") {
    TensorF f({3, 2}, {0.0f, -1.5f, 3.25e-7f, 1e20f, -0.0f, 42.0f});
    TensorD d({2, 2, 2}, {0.1, -2.5e-300, 7.0, 1e308, 0.0, -1.0, 3.14159, -42.0});

    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    asds::save_tensor(ss, f);
    asds::save_tensor(ss, d);

    std::size_t offset = 0;
    const auto rf = asds::load_tensor(ss, offset);
    const auto rd = asds::load_tensor(ss, offset);
    REQUIRE(std::get<TensorF>(rf) == f);
    REQUIRE(std::get<TensorD>(rd) == d);
}

TEST_CASE("rank-1 tensors keep their rank through a round-trip", "[serialize]") {
    TensorD v({5}, {1, 2, 3, 4, 5});
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    asds::save_tensor(ss, v);
    std::size_t offset = 0;
    const auto r = std::get<TensorD>(asds::load_tensor(ss, offset));
    REQUIRE(r.rank() == 1);
    REQUIRE(r == v);
}

TEST_CASE("archives preserve order, names, and mixed dtypes", "[serialize]") {
    NamedTensors a;
    a.add("weights", TensorF({2, 3}, {1, 2, 3, 4, 5, 6}));
    a.add("labels", TensorD({4}, {0, 1, 2, 1}));
    a.add("empty-name-ok", TensorF({1}, {9.0f}));

    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    asds::save_archive(ss, a);
    const NamedTensors b = asds::load_archive(ss);

    REQUIRE(b == a);
    REQUIRE(b.entries.size() == 3);
    REQUIRE(b.entries[0].first == "weights");
    REQUIRE(b.entries[1].first == "labels");
    REQUIRE(b.get<float>("weights")(1, 2) == 6.0f);
    REQUIRE(b.get<double>("labels")[3] == 1.0);
    REQUIRE(b.find("nope") == nullptr);
    REQUIRE_THROWS_AS(b.get<float>("nope"), asds::FormatError);
    REQUIRE_THROWS_AS(b.get<double>("weights"), asds::FormatError); // wrong dtype
}

TEST_CASE("bad magic is reported with its byte offset", "[serialize]") {
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    ss.write("NOPE", 4);
    ss.write("rest of junk", 12);
    std::size_t offset = 0;
    try {
        asds::load_tensor(ss, offset);
        FAIL("expected FormatError");
    } catch (const asds::FormatError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("magic") != std::string::npos);
        REQUIRE(msg.find("offset 0") != std::string::npos);
    }
}

TEST_CASE("version mismatch is rejected", "[serialize]") {
    const TensorF t({1}, {1.0f});
    std::string raw = bytes_of(t);
    raw[4] = 2; // bump the version field
    std::stringstream ss(raw, std::ios::in | std::ios::binary);
    std::size_t offset = 0;
    try {
        asds::load_tensor(ss, offset);
        FAIL("expected FormatError");
    } catch (const asds::FormatError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("version") != std::string::npos);
        REQUIRE(msg.find("expected 1") != std::string::npos);
        REQUIRE(msg.find("found 2") != std::string::npos);
    }
}

TEST_CASE("unknown dtype code is rejected", "[serialize]") {
    const TensorF t({1}, {1.0f});
    std::string raw = bytes_of(t);
    raw[6] = 7; // dtype byte
    std::stringstream ss(raw, std::ios::in | std::ios::binary);
    std::size_t offset = 0;
    REQUIRE_THROWS_AS(asds::load_tensor(ss, offset), asds::FormatError);
}

TEST_CASE("truncation anywhere is reported with the failing offset", "[serialize]") {
    const TensorD t({2, 3}, {1, 2, 3, 4, 5, 6});
    const std::string raw = bytes_of(t);

    // Cut the stream at several depths: inside magic, header, extents, data.
    for (const std::size_t cut : {2UL, 5UL, 7UL, 12UL, raw.size() - 3}) {
        std::stringstream ss(raw.substr(0, cut), std::ios::in | std::ios::binary);
        std::size_t offset = 0;
        try {
            asds::load_tensor(ss, offset);
            FAIL("expected FormatError for cut at " << cut);
        } catch (const asds::FormatError& e) {
            const std::string msg = e.what();
            REQUIRE(msg.find("truncated") != std::string::npos);
            REQUIRE(msg.find("byte offset") != std::string::npos);
        }
    }
}

TEST_CASE("archive file round-trip through the filesystem", "[serialize]") {
    NamedTensors a;
    a.add("x", TensorD({2, 2}, {1.5, 2.5, 3.5, 4.5}));
    const std::string path = "test_serialize_tmp.bin";
    asds::save_archive(path, a);
    const NamedTensors b = asds::load_archive(path);
    REQUIRE(b == a);
    std::remove(path.c_str());
    REQUIRE_THROWS_AS(asds::load_archive("does_not_exist_anywhere.bin"), asds::FormatError);
}
