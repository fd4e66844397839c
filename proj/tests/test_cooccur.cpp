#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "commvec/common.hpp"
#include "commvec/cooccur.hpp"

using namespace commvec;
using namespace commvec::cooccur;
using ingest::MembershipSets;
using ingest::SubredditVocab;

namespace {

struct Instance {
    MembershipSets sets;
    SubredditVocab vocab;
};

Instance make(const std::vector<std::vector<std::uint32_t>>& members, std::size_t users) {
    Instance in;
    for (std::size_t u = 0; u < users; ++u) in.sets.users.push_back("u" + std::to_string(u));
    for (std::size_t s = 0; s < members.size(); ++s) {
        in.sets.subreddits.push_back("s" + std::to_string(s));
        auto m = members[s];
        std::sort(m.begin(), m.end());
        in.sets.members.push_back(m);
        in.vocab.names.push_back(in.sets.subreddits.back());
        in.vocab.activity.push_back(m.size());
    }
    return in;
}

// Independent oracle: |members[i] ∩ members[j]| by set intersection.
std::map<std::pair<std::string, std::string>, std::uint32_t> oracle(const MembershipSets& sets) {
    std::map<std::pair<std::string, std::string>, std::uint32_t> out;
    for (std::size_t i = 0; i < sets.members.size(); ++i) {
        const std::set<std::uint32_t> a(sets.members[i].begin(), sets.members[i].end());
        for (std::size_t j = i + 1; j < sets.members.size(); ++j) {
            std::uint32_t n = 0;
            for (auto u : sets.members[j]) n += a.count(u);
            if (n) {
                auto key = std::minmax(sets.subreddits[i], sets.subreddits[j]);
                out[{key.first, key.second}] = n;
            }
        }
    }
    return out;
}

std::map<std::pair<std::string, std::string>, std::uint32_t> by_name(const CooccurrenceMatrix& m) {
    std::map<std::pair<std::string, std::string>, std::uint32_t> out;
    for (const auto& e : m.entries()) {
        auto key = std::minmax(m.vocab()[e.i], m.vocab()[e.j]);
        out[{key.first, key.second}] = e.count;
    }
    return out;
}

Instance random_instance(SplitMix64& rng, std::size_t max_subs, std::size_t max_users) {
    const auto subs = 1 + rng.below(max_subs);
    const auto users = 1 + rng.below(max_users);
    const double density = 0.02 + 0.3 * rng.uniform();
    std::vector<std::vector<std::uint32_t>> members(subs);
    for (std::uint32_t u = 0; u < users; ++u) {
        for (std::size_t s = 0; s < subs; ++s) {
            if (rng.bernoulli(density)) members[s].push_back(u);
        }
    }
    return make(members, users);
}

}  // namespace

TEST_CASE("small worked examples") {
    auto in = make({{1, 2}, {1, 2}, {3}}, 4);
    const auto m = build_cooccurrence(in.sets, in.vocab).matrix;
    CHECK(m.at(0, 1) == 2);
    CHECK(m.at(1, 0) == 2);
    CHECK(m.at(0, 2) == 0);
    CHECK(m.at(1, 2) == 0);
    CHECK(m.at(0, 0) == 0);
    CHECK(m.entries().size() == 1);

    auto single = make({{0, 1, 2}}, 3);
    CHECK(build_cooccurrence(single.sets, single.vocab).matrix.empty());

    auto cap = make({{0}, {0}}, 1);
    CHECK(build_cooccurrence(cap.sets, cap.vocab).matrix.at(0, 1) == 1);
}

TEST_CASE("fuzzed instances equal the intersection oracle") {
    SplitMix64 rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const auto in = random_instance(rng, 30, 200);
        const unsigned threads = 1 + static_cast<unsigned>(rng.below(4));
        const auto built = build_cooccurrence(in.sets, in.vocab, {0, threads});
        CHECK(by_name(built.matrix) == oracle(in.sets));
        for (const auto& e : built.matrix.entries()) {
            CHECK(e.i < e.j);
            CHECK(e.count > 0);
            CHECK(e.count <= std::min(in.sets.members[e.i].size(), in.sets.members[e.j].size()));
        }
    }
}

TEST_CASE("thread count does not change the matrix") {
    SplitMix64 rng(5);
    const auto in = random_instance(rng, 40, 400);
    const auto one = build_cooccurrence(in.sets, in.vocab, {0, 1}).matrix;
    const auto many = build_cooccurrence(in.sets, in.vocab, {0, 8}).matrix;
    CHECK(one == many);
    CHECK(one.serialize() == many.serialize());
}

TEST_CASE("permuting the vocabulary permutes rows and columns consistently") {
    SplitMix64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        auto in = random_instance(rng, 15, 80);
        const auto base = by_name(build_cooccurrence(in.sets, in.vocab).matrix);
        std::vector<std::size_t> perm(in.sets.subreddits.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        fisher_yates(perm, rng);
        Instance p;
        p.sets.users = in.sets.users;
        for (auto i : perm) {
            p.sets.subreddits.push_back(in.sets.subreddits[i]);
            p.sets.members.push_back(in.sets.members[i]);
            p.vocab.names.push_back(in.vocab.names[i]);
            p.vocab.activity.push_back(in.vocab.activity[i]);
        }
        CHECK(by_name(build_cooccurrence(p.sets, p.vocab).matrix) == base);
    }
}

TEST_CASE("a user active in one subreddit changes no entry") {
    SplitMix64 rng(7);
    auto in = random_instance(rng, 10, 50);
    const auto before = build_cooccurrence(in.sets, in.vocab).matrix;
    in.sets.users.push_back("loner");
    in.sets.members[0].push_back(static_cast<std::uint32_t>(in.sets.users.size() - 1));
    CHECK(build_cooccurrence(in.sets, in.vocab).matrix == before);
}

TEST_CASE("report flags empty rows and capped users") {
    auto in = make({{0, 1, 2}, {0, 1}, {}, {0}}, 3);
    const auto r = build_cooccurrence(in.sets, in.vocab);
    CHECK(r.report.empty_rows == std::vector<std::string>{"s2"});
    CHECK(r.report.capped_users == 0);
    CHECK(r.report.pair_increments == 3 + 1);  // u0 spans 3 subreddits, u1 spans 2

    const auto capped = build_cooccurrence(in.sets, in.vocab, {2, 1});
    CHECK(capped.report.capped_users == 1);
    CHECK(capped.matrix.at(0, 1) == 1);  // only u1 remains
    CHECK(capped.report.to_json()["capped_users"] == 1);

    SubredditVocab wrong = in.vocab;
    std::swap(wrong.names[0], wrong.names[1]);
    CHECK_THROWS_AS(build_cooccurrence(in.sets, wrong), std::invalid_argument);
}

TEST_CASE("constructor normalizes orientation and rejects bad entries") {
    CooccurrenceMatrix m({"a", "b", "c"}, {{2, 0, 4}, {0, 1, 1}});
    REQUIRE(m.entries().size() == 2);
    CHECK(m.entries()[0] == Entry{0, 1, 1});
    CHECK(m.entries()[1] == Entry{0, 2, 4});
    CHECK(m.at(2, 0) == 4);
    CHECK(m.index_of("c") == 2u);
    CHECK_FALSE(m.index_of("z").has_value());
    CHECK_THROWS_AS(CooccurrenceMatrix({"a", "b"}, {{1, 1, 3}}), std::invalid_argument);
    CHECK_THROWS_AS(CooccurrenceMatrix({"a", "b"}, {{0, 1, 0}}), std::invalid_argument);
    CHECK_THROWS_AS(CooccurrenceMatrix({"a", "b"}, {{0, 2, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(CooccurrenceMatrix({"a", "b"}, {{0, 1, 1}, {1, 0, 2}}), std::invalid_argument);
}

TEST_CASE("binary round trip, layout and corruption") {
    SplitMix64 rng(8);
    const auto in = random_instance(rng, 20, 100);
    const auto m = build_cooccurrence(in.sets, in.vocab).matrix;
    const auto bytes = m.serialize();
    CHECK(bytes.substr(0, 8) == "CVCOOC01");
    CHECK(CooccurrenceMatrix::deserialize(bytes) == m);

    const CooccurrenceMatrix empty;
    CHECK(CooccurrenceMatrix::deserialize(empty.serialize()) == empty);

    CHECK_THROWS_AS(CooccurrenceMatrix::deserialize(bytes.substr(0, bytes.size() - 5)), FormatError);
    auto flipped = bytes;
    flipped[bytes.size() - 3] ^= 0x10;
    CHECK_THROWS_AS(CooccurrenceMatrix::deserialize(flipped), FormatError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(CooccurrenceMatrix::deserialize(magic), FormatError);

    const auto dir = std::filesystem::temp_directory_path() / "commvec_test_cooccur";
    m.save(dir / "m.bin");
    CHECK(CooccurrenceMatrix::load(dir / "m.bin") == m);
    CHECK_THROWS_AS(CooccurrenceMatrix::load(dir / "absent.bin"), MissingInputError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("tsv debug export") {
    CooccurrenceMatrix m({"x", "y", "z"}, {{0, 1, 3}, {1, 2, 1}});
    std::ostringstream out;
    m.write_tsv(out);
    CHECK(out.str() == "x\ty\t3\ny\tz\t1\n");
}
