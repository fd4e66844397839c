#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "commvec/binary_io.hpp"
#include "commvec/common.hpp"

using namespace commvec;

TEST_CASE("fnv1a matches published test vectors") {
    CHECK(checksum_bytes("") == 0xcbf29ce484222325ULL);
    CHECK(checksum_bytes("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(checksum_bytes("foobar") == 0x85944171f73967e8ULL);
    CHECK(to_hex(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
    CHECK(to_hex(0) == "0000000000000000");
}

TEST_CASE("file checksum equals in-memory checksum") {
    const auto dir = std::filesystem::temp_directory_path() / "commvec_test_common";
    std::string data(200000, '\0');
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<char>(i * 31 + 7);
    write_file(dir / "nested" / "blob", data);
    CHECK(read_file(dir / "nested" / "blob") == data);
    CHECK(checksum_file(dir / "nested" / "blob") == checksum_bytes(data));
    CHECK_THROWS_AS(read_file(dir / "missing"), MissingInputError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("splitmix64 reference stream") {
    // First outputs for seed 1234567 from the reference implementation.
    SplitMix64 rng(1234567);
    CHECK(rng.next() == 6457827717110365317ULL);
    CHECK(rng.next() == 3203168211198807973ULL);
    CHECK(rng.next() == 9817491932198370423ULL);
}

TEST_CASE("bounded draws stay in range and cover it") {
    SplitMix64 rng(9);
    std::vector<int> seen(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.below(7);
        REQUIRE(v < 7);
        ++seen[v];
    }
    for (int c : seen) CHECK(c > 800);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("fisher-yates yields a permutation and depends on the seed") {
    std::vector<int> a(50);
    std::iota(a.begin(), a.end(), 0);
    auto b = a;
    auto c = a;
    SplitMix64 r1(5), r2(5), r3(6);
    fisher_yates(a, r1);
    fisher_yates(b, r2);
    fisher_yates(c, r3);
    CHECK(a == b);
    CHECK(a != c);
    std::sort(c.begin(), c.end());
    for (int i = 0; i < 50; ++i) CHECK(c[i] == i);
}

TEST_CASE("derived seeds differ by tag") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    CHECK(derive_seed(1, 3) == derive_seed(1, 3));
}

TEST_CASE("split and trim") {
    CHECK(split("a\tb\t\tc", '\t') == std::vector<std::string>{"a", "b", "", "c"});
    CHECK(split("", ',') == std::vector<std::string>{""});
    CHECK(trim("  x y \n") == "x y");
    CHECK(trim("   ").empty());
}

TEST_CASE("byte reader and writer round trip little-endian values") {
    ByteWriter w;
    w.u32(0x01020304);
    w.u64(0x1122334455667788ULL);
    w.f64(-1.5);
    w.str("name");
    const auto bytes = w.take();
    CHECK(static_cast<unsigned char>(bytes[0]) == 0x04);
    ByteReader r(bytes, "test");
    CHECK(r.u32() == 0x01020304u);
    CHECK(r.u64() == 0x1122334455667788ULL);
    CHECK(r.f64() == -1.5);
    CHECK(r.str() == "name");
    CHECK(r.at_end());
    CHECK_THROWS_AS(r.u32(), FormatError);
}
