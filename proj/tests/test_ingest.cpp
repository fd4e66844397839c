#include <doctest.h>

#include <zlib.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "commvec/common.hpp"
#include "commvec/ingest.hpp"

using namespace commvec;
using namespace commvec::ingest;

namespace {

using Tally = std::map<std::pair<std::string, std::string>, std::uint32_t>;

Tally tally_oracle(const std::vector<CommentRecord>& records) {
    Tally t;
    for (const auto& r : records) ++t[{r.author, r.subreddit}];
    return t;
}

Tally as_tally(const ActivityTable& table) {
    Tally t;
    for (const auto& row : table.rows()) {
        t[{table.users().name(row.user), table.subreddits().name(row.subreddit)}] = row.count;
    }
    return t;
}

std::vector<CommentRecord> random_records(SplitMix64& rng, std::size_t n, std::size_t users, std::size_t subs) {
    std::vector<CommentRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({"u" + std::to_string(rng.below(users)), "s" + std::to_string(rng.below(subs)), 0,
                       "c" + std::to_string(i), ""});
    }
    return out;
}

std::map<std::string, std::set<std::string>> as_sets(const MembershipSets& m) {
    std::map<std::string, std::set<std::string>> out;
    for (std::size_t s = 0; s < m.subreddits.size(); ++s) {
        auto& set = out[m.subreddits[s]];
        for (auto u : m.members[s]) set.insert(m.users[u]);
    }
    return out;
}

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("commvec_test_ingest_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

void write_gzip(const std::filesystem::path& path, const std::string& data) {
    gzFile f = gzopen(path.string().c_str(), "wb");
    REQUIRE(f != nullptr);
    REQUIRE(gzwrite(f, data.data(), static_cast<unsigned>(data.size())) == static_cast<int>(data.size()));
    gzclose(f);
}

}  // namespace

TEST_CASE("parse maps dump fields directly") {
    const auto out = parse_comment_line(
        R"({"author":"u1","subreddit":"Honda","created_utc":1500000000,"id":"c1","body":"tr*nny is dying","score":3})");
    REQUIRE(std::holds_alternative<CommentRecord>(out));
    const auto& r = std::get<CommentRecord>(out);
    CHECK(r.author == "u1");
    CHECK(r.subreddit == "Honda");
    CHECK(r.created_utc == 1500000000);
    CHECK(r.id == "c1");
    CHECK(r.body == "tr*nny is dying");
}

TEST_CASE("created_utc accepts numeric strings and rejects garbage") {
    auto a = parse_comment_line(R"({"author":"u","subreddit":"s","created_utc":"1234"})");
    REQUIRE(std::holds_alternative<CommentRecord>(a));
    CHECK(std::get<CommentRecord>(a).created_utc == 1234);
    auto b = parse_comment_line(R"({"author":"u","subreddit":"s"})");
    REQUIRE(std::holds_alternative<CommentRecord>(b));
    CHECK(std::get<CommentRecord>(b).created_utc == 0);
    CHECK(std::holds_alternative<ParseError>(parse_comment_line(R"({"author":"u","subreddit":"s","created_utc":"soon"})")));
}

TEST_CASE("deleted, removed and incomplete records are skipped with a reason") {
    auto d = parse_comment_line(R"({"author":"[deleted]","subreddit":"gay","id":"c2","body":"x"})");
    REQUIRE(std::holds_alternative<Skip>(d));
    CHECK(std::get<Skip>(d).reason == SkipReason::deleted_author);
    auto r = parse_comment_line(R"({"author":"[removed]","subreddit":"gay"})");
    REQUIRE(std::holds_alternative<Skip>(r));
    CHECK(std::get<Skip>(r).reason == SkipReason::removed_author);
    auto m = parse_comment_line(R"({"author":"u1","id":"c3"})");
    REQUIRE(std::holds_alternative<Skip>(m));
    CHECK(std::get<Skip>(m).reason == SkipReason::missing_field);
    auto e = parse_comment_line(R"({"author":"","subreddit":"x"})");
    REQUIRE(std::holds_alternative<Skip>(e));
    CHECK(std::get<Skip>(e).reason == SkipReason::missing_field);
}

TEST_CASE("malformed lines are recoverable errors") {
    CHECK(std::holds_alternative<ParseError>(parse_comment_line("not json {{{")));
    CHECK(std::holds_alternative<ParseError>(parse_comment_line(R"({"author": "u1", "subreddit": )")));
    CHECK(std::holds_alternative<ParseError>(parse_comment_line("[1, 2]")));
    // A non-string author is treated as absent.
    auto typed = parse_comment_line(R"({"author": 5, "subreddit": "x"})");
    REQUIRE(std::holds_alternative<Skip>(typed));
    CHECK(std::get<Skip>(typed).reason == SkipReason::missing_field);

    std::istringstream in("{\"author\":\"u1\",\"subreddit\":\"A\"}\nnot json {{{\n\n{\"author\":\"u1\",\"subreddit\":\"A\"}\n");
    ActivityTable table;
    IngestReport report;
    ingest_stream(in, table, report);
    CHECK(report.lines == 3);
    CHECK(report.accepted == 2);
    CHECK(report.errors == 1);
    CHECK(report.error_samples.size() == 1);
    CHECK(table.count("u1", "A") == 2);
}

TEST_CASE("accumulation matches a brute-force tally") {
    std::vector<CommentRecord> three = {{"u1", "A", 0, "1", ""}, {"u1", "A", 0, "2", ""}, {"u2", "A", 0, "3", ""}};
    auto t = accumulate_activity(three);
    CHECK(t.count("u1", "A") == 2);
    CHECK(t.count("u2", "A") == 1);
    CHECK(t.count("u2", "B") == 0);
    CHECK(t.total() == 3);

    CHECK(accumulate_activity({}).pairs() == 0);

    SplitMix64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto records = random_records(rng, 300, 15, 6);
        const auto table = accumulate_activity(records);
        CHECK(as_tally(table) == tally_oracle(records));
        CHECK(table.total() == records.size());
        for (const auto& row : table.rows()) CHECK(row.count >= 1);
    }
}

TEST_CASE("shard merge is exact and independent of partition and order") {
    ActivityTable t1;
    t1.add("u1", "A", 2);
    ActivityTable t2;
    t2.add("u1", "A", 3);
    t1.merge(t2);
    CHECK(t1.count("u1", "A") == 5);

    SplitMix64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto records = random_records(rng, 400, 20, 8);
        const auto whole = accumulate_activity(records);
        const auto shards = 1 + rng.below(5);
        std::vector<ActivityTable> parts(shards);
        for (const auto& r : records) parts[rng.below(shards)].add(r);
        std::vector<std::size_t> order(shards);
        for (std::size_t i = 0; i < shards; ++i) order[i] = i;
        fisher_yates(order, rng);
        ActivityTable merged;
        for (auto i : order) merged.merge(parts[i]);
        CHECK(merged == whole);
        CHECK(merged.total() == whole.total());
        std::ostringstream a, b;
        merged.canonical().write_tsv(a);
        whole.canonical().write_tsv(b);
        CHECK(a.str() == b.str());
    }
}

TEST_CASE("bot filtering") {
    ActivityTable t;
    t.add("AutoModerator", "A", 50);
    t.add("u1", "A", 12);
    t.add("u1", "B", 3);
    auto filtered = filter_bots(t, BotList({"AutoModerator"}));
    CHECK(filtered.count("AutoModerator", "A") == 0);
    CHECK(filtered.count("u1", "A") == 12);
    CHECK(filtered.count("u1", "B") == 3);
    CHECK(filtered.total() == 15);

    CHECK(filter_bots(t, BotList()) == t);
    CHECK(filter_bots(t, BotList({"u9"})) == t);
    CHECK(filter_bots(t, BotList({"automoderator"})) == t);  // exact, case-sensitive

    ActivityTable s;
    s.add("HelperBot", "A", 20);
    s.add("robotics_fan", "A", 20);
    s.add("abbot", "A", 20);
    const auto h = filter_bots(s, BotList({}, true));
    CHECK(h.count("HelperBot", "A") == 0);
    CHECK(h.count("abbot", "A") == 0);
    CHECK(h.count("robotics_fan", "A") == 20);
}

TEST_CASE("bot list file format") {
    std::istringstream in("# bots\nAutoModerator\n\n  RemindMeBot  # trailing note\n");
    const auto bots = BotList::parse(in);
    CHECK(bots.size() == 2);
    CHECK(bots.is_bot("AutoModerator"));
    CHECK(bots.is_bot("RemindMeBot"));
    CHECK_FALSE(bots.is_bot("u1"));
}

TEST_CASE("membership threshold boundaries") {
    ActivityTable t;
    t.add("u1", "A", 10);
    t.add("u1", "B", 9);
    auto m = as_sets(select_active_memberships(t, 10));
    CHECK(m["A"] == std::set<std::string>{"u1"});
    CHECK(m["B"].empty());

    ActivityTable t2;
    t2.add("u1", "A", 12);
    t2.add("u2", "A", 10);
    t2.add("u3", "A", 3);
    const auto sets = select_active_memberships(t2, 10);
    CHECK(as_sets(sets)["A"] == std::set<std::string>{"u1", "u2"});
    CHECK(sets.users.size() == 2);  // u3 is active nowhere and drops out

    const auto all = select_active_memberships(t2, 1);
    CHECK(as_sets(all)["A"] == std::set<std::string>{"u1", "u2", "u3"});
    CHECK_THROWS_AS(select_active_memberships(t2, 0), std::invalid_argument);
}

TEST_CASE("membership matches the threshold rule, is monotone and commutes with bot filtering") {
    SplitMix64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        ActivityTable t;
        for (int k = 0; k < 80; ++k) {
            t.add("u" + std::to_string(rng.below(12)), "s" + std::to_string(rng.below(5)),
                  1 + static_cast<std::uint32_t>(rng.below(15)));
        }
        const std::uint32_t threshold = 1 + static_cast<std::uint32_t>(rng.below(20));
        const auto sets = as_sets(select_active_memberships(t, threshold));
        for (const auto& row : t.rows()) {
            const auto& u = t.users().name(row.user);
            const auto& s = t.subreddits().name(row.subreddit);
            CHECK((row.count >= threshold) == (sets.count(s) && sets.at(s).count(u)));
        }
        const auto higher = as_sets(select_active_memberships(t, threshold + 1));
        for (const auto& [s, members] : higher) {
            for (const auto& u : members) CHECK(sets.at(s).count(u) == 1);
        }
        BotList bots({"u" + std::to_string(rng.below(12)), "u" + std::to_string(rng.below(12))});
        // filter then threshold == threshold then drop bot members
        auto a = as_sets(select_active_memberships(filter_bots(t, bots), threshold));
        auto b = sets;
        for (auto& [s, members] : b) {
            std::erase_if(members, [&](const std::string& u) { return bots.is_bot(u); });
        }
        for (auto& [s, members] : b) {
            if (!a.count(s)) CHECK(members.empty());
            else CHECK(a.at(s) == members);
        }
    }
}

TEST_CASE("top subreddit selection ranks by active users with name tie-break") {
    MembershipSets sets;
    sets.subreddits = {"A", "B"};
    sets.users = {"u1", "u2"};
    sets.members = {{0, 1}, {0}};
    const auto top1 = select_top_subreddits(sets, 1);
    CHECK(top1.vocab.names == std::vector<std::string>{"A"});
    CHECK(top1.vocab.activity == std::vector<std::uint64_t>{2});
    CHECK(top1.sets.subreddits == std::vector<std::string>{"A"});
    CHECK_FALSE(top1.limit_exceeds_available);

    const auto all = select_top_subreddits(sets, 5);
    CHECK(all.vocab.names == std::vector<std::string>{"A", "B"});
    CHECK(all.limit_exceeds_available);
    CHECK(as_sets(all.sets) == as_sets(sets));

    MembershipSets tie;
    tie.subreddits = {"zeta", "alpha", "mid"};
    tie.users = {"u1", "u2"};
    tie.members = {{0}, {1}, {0, 1}};
    CHECK(select_top_subreddits(tie, 3).vocab.names == std::vector<std::string>{"mid", "alpha", "zeta"});
    CHECK_THROWS_AS(select_top_subreddits(tie, 0), std::invalid_argument);
}

TEST_CASE("tsv forms round-trip bit-exactly") {
    SplitMix64 rng(8);
    ActivityTable t;
    for (int k = 0; k < 200; ++k) {
        t.add("user " + std::to_string(rng.below(30)), "Sub_" + std::to_string(rng.below(9)),
              1 + static_cast<std::uint32_t>(rng.below(20)));
    }
    std::ostringstream a;
    t.write_tsv(a);
    std::istringstream ain(a.str());
    const auto t2 = ActivityTable::read_tsv(ain);
    CHECK(t2 == t);
    std::ostringstream a2;
    t2.write_tsv(a2);
    CHECK(a2.str() == a.str());

    const auto sets = select_active_memberships(t, 10);
    std::ostringstream m;
    sets.write_tsv(m);
    std::istringstream min(m.str());
    CHECK(MembershipSets::read_tsv(min) == sets);

    const auto top = select_top_subreddits(sets, 4);
    std::ostringstream v;
    top.vocab.write_tsv(v);
    std::istringstream vin(v.str());
    CHECK(SubredditVocab::read_tsv(vin) == top.vocab);

    std::istringstream bad("commvec-activity\t2\n");
    CHECK_THROWS_AS(ActivityTable::read_tsv(bad), FormatError);
}

TEST_CASE("report reconciles lines with accepted, skipped and errors") {
    std::string dump;
    SplitMix64 rng(4);
    for (int i = 0; i < 500; ++i) {
        switch (rng.below(5)) {
            case 0: dump += R"({"author":"[deleted]","subreddit":"A"})"; break;
            case 1: dump += "{broken"; break;
            case 2: dump += R"({"subreddit":"A"})"; break;
            default: dump += R"({"author":"u)" + std::to_string(rng.below(9)) + R"(","subreddit":"A"})";
        }
        dump += "\n";
    }
    std::istringstream in(dump);
    ActivityTable t;
    IngestReport r;
    ingest_stream(in, t, r);
    CHECK(r.lines == 500);
    CHECK(r.lines == r.accepted + r.skipped_total() + r.errors);
    CHECK(t.total() == r.accepted);
    CHECK(r.error_samples.size() <= 10);
    const auto j = r.to_json();
    CHECK(j["records"] == 500);
    CHECK(j.contains("skip_reasons"));
}

TEST_CASE("gzip and plain shards ingest identically, for any thread count") {
    const auto dir = temp_dir("gz");
    std::string a, b;
    SplitMix64 rng(17);
    for (int i = 0; i < 2000; ++i) {
        auto line = R"({"author":"u)" + std::to_string(rng.below(40)) + R"(","subreddit":"s)" + std::to_string(rng.below(7)) +
                    R"(","created_utc":1400000000,"id":"c)" + std::to_string(i) + "\"}\n";
        (i % 2 ? a : b) += line;
    }
    write_file(dir / "RC_a.ndjson", a);
    write_gzip(dir / "RC_b.ndjson.gz", b);
    write_file(dir / "plain_b.txt", b);

    ActivityTable plain, gz;
    IngestReport r1, r2;
    ingest_file(dir / "plain_b.txt", plain, r1);
    ingest_file(dir / "RC_b.ndjson.gz", gz, r2);
    CHECK(plain == gz);
    CHECK(r1.accepted == r2.accepted);

    const auto paths = expand_glob((dir / "RC_*").string());
    REQUIRE(paths.size() == 2);
    CHECK(paths[0].filename() == "RC_a.ndjson");
    const auto one = ingest_files(paths, 1);
    const auto four = ingest_files(paths, 4);
    CHECK(one.table == four.table);
    CHECK(one.report.accepted == 2000);
    std::ostringstream s1, s4;
    one.table.write_tsv(s1);
    four.table.write_tsv(s4);
    CHECK(s1.str() == s4.str());

    CHECK(expand_glob((dir / "nothing_*.gz").string()).empty());
    ActivityTable t;
    IngestReport r;
    CHECK_THROWS_AS(ingest_file(dir / "absent.ndjson", t, r), MissingInputError);
    std::filesystem::remove_all(dir);
}
