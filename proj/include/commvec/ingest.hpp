#pragma once

// Comment-dump ingestion: parse NDJSON dumps, tally per-(user, subreddit)
// comment counts, drop bots, and select active memberships and the working
// subreddit vocabulary.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

namespace commvec::ingest {

struct CommentRecord {
    std::string author;
    std::string subreddit;
    std::int64_t created_utc = 0;
    std::string id;
    std::string body;
};

enum class SkipReason { deleted_author, removed_author, missing_field };

std::string_view to_string(SkipReason reason);

struct Skip {
    SkipReason reason;
    std::string detail;
};

struct ParseError {
    std::string message;
};

using ParseOutcome = std::variant<CommentRecord, Skip, ParseError>;

/// Parses one dump line. Required fields are `author` and `subreddit`;
/// `created_utc` may be an integer or a numeric string; unknown fields are
/// ignored. Never throws.
ParseOutcome parse_comment_line(std::string_view raw_line);

/// Dense string <-> id mapping. Ids are assigned in first-seen order.
class Interner {
public:
    std::uint32_t intern(std::string_view name);
    std::optional<std::uint32_t> find(std::string_view name) const;
    const std::string& name(std::uint32_t id) const { return names_.at(id); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t size() const noexcept { return names_.size(); }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> ids_;
};

/// Per-(user, subreddit) comment counts over interned names.
class ActivityTable {
public:
    struct Row {
        std::uint32_t user;
        std::uint32_t subreddit;
        std::uint32_t count;
        friend bool operator==(const Row&, const Row&) = default;
    };

    void add(std::string_view user, std::string_view subreddit, std::uint32_t n = 1);
    void add(const CommentRecord& record) { add(record.author, record.subreddit); }

    /// Adds every count of `other` into this table (names re-interned).
    void merge(const ActivityTable& other);

    std::uint32_t count(std::string_view user, std::string_view subreddit) const;
    std::uint32_t count_ids(std::uint32_t user, std::uint32_t subreddit) const;

    /// Sum of all counts.
    std::uint64_t total() const noexcept { return total_; }
    /// Number of stored (user, subreddit) pairs.
    std::size_t pairs() const noexcept { return counts_.size(); }

    const Interner& users() const noexcept { return users_; }
    const Interner& subreddits() const noexcept { return subreddits_; }

    /// All rows sorted by (user id, subreddit id).
    std::vector<Row> rows() const;

    /// Same counts with both indices re-interned in lexicographic order.
    /// Two tables with equal name-keyed counts have byte-identical
    /// canonical serializations.
    ActivityTable canonical() const;

    /// Name-keyed equality, independent of id assignment.
    friend bool operator==(const ActivityTable& a, const ActivityTable& b);

    // TSV layout:
    //   commvec-activity<TAB>1
    //   users<TAB>N, then N names one per line (line order = id)
    //   subreddits<TAB>M, then M names
    //   counts<TAB>K, then K lines user_id<TAB>subreddit_id<TAB>count sorted by ids
    void write_tsv(std::ostream& out) const;
    static ActivityTable read_tsv(std::istream& in);

private:
    static std::uint64_t key(std::uint32_t u, std::uint32_t s) noexcept {
        return (static_cast<std::uint64_t>(u) << 32) | s;
    }
    void add_ids(std::uint32_t u, std::uint32_t s, std::uint32_t n);

    Interner users_;
    Interner subreddits_;
    std::unordered_map<std::uint64_t, std::uint32_t> counts_;
    std::uint64_t total_ = 0;
};

ActivityTable accumulate_activity(std::span<const CommentRecord> records);

class BotList {
public:
    BotList() = default;
    explicit BotList(std::unordered_set<std::string> names, bool suffix_heuristic = false)
        : names_(std::move(names)), suffix_heuristic_(suffix_heuristic) {}

    /// One account name per line; '#' starts a comment; blank lines ignored.
    static BotList parse(std::istream& in, bool suffix_heuristic = false);
    static BotList load(const std::filesystem::path& path, bool suffix_heuristic = false);

    /// Exact, case-sensitive membership; with the heuristic enabled, also any
    /// name ending in "bot" (case-insensitive).
    bool is_bot(std::string_view name) const;

    std::size_t size() const noexcept { return names_.size(); }
    bool suffix_heuristic() const noexcept { return suffix_heuristic_; }

private:
    std::unordered_set<std::string> names_;
    bool suffix_heuristic_ = false;
};

ActivityTable filter_bots(const ActivityTable& table, const BotList& bots);

struct MembershipSets {
    std::vector<std::string> subreddits;
    std::vector<std::string> users;
    /// members[s] = sorted ids of users active in subreddit s.
    std::vector<std::vector<std::uint32_t>> members;

    std::optional<std::uint32_t> find_subreddit(std::string_view name) const;
    /// Members of `name` as user names, sorted. Empty if absent.
    std::vector<std::string> member_names(std::string_view name) const;

    void write_tsv(std::ostream& out) const;
    static MembershipSets read_tsv(std::istream& in);
    friend bool operator==(const MembershipSets&, const MembershipSets&) = default;
};

/// Users with at least `threshold` comments in a subreddit are members of it.
/// Every subreddit in the table keeps a (possibly empty) set; users active
/// nowhere are dropped and user ids are compacted.
MembershipSets select_active_memberships(const ActivityTable& table, std::uint32_t threshold = 10);

struct SubredditVocab {
    std::vector<std::string> names;
    std::vector<std::uint64_t> activity;

    std::size_t size() const noexcept { return names.size(); }
    std::optional<std::uint32_t> find(std::string_view name) const;

    void write_tsv(std::ostream& out) const;
    static SubredditVocab read_tsv(std::istream& in);
    friend bool operator==(const SubredditVocab&, const SubredditVocab&) = default;
};

struct TopSelection {
    SubredditVocab vocab;
    /// Restricted to the vocabulary, subreddits in vocab order.
    MembershipSets sets;
    bool limit_exceeds_available = false;
};

/// Ranks by active-user count descending, names ascending on ties.
TopSelection select_top_subreddits(const MembershipSets& sets, std::size_t limit);

struct IngestReport {
    std::uint64_t lines = 0;
    std::uint64_t accepted = 0;
    std::uint64_t errors = 0;
    std::map<std::string, std::uint64_t> skipped;
    std::vector<std::string> error_samples;
    std::vector<std::string> warnings;

    std::uint64_t skipped_total() const;
    void merge(const IngestReport& other);
    nlohmann::json to_json() const;
};

/// Parses every non-blank line of `in` into `table`.
void ingest_stream(std::istream& in, ActivityTable& table, IngestReport& report);

/// Plain or gzip-compressed (".gz") NDJSON file.
void ingest_file(const std::filesystem::path& path, ActivityTable& table, IngestReport& report);

struct ShardedResult {
    ActivityTable table;
    IngestReport report;
};

/// One accumulator per file, up to `threads` at a time, merged in path order
/// and canonicalized, so the result does not depend on scheduling.
ShardedResult ingest_files(const std::vector<std::filesystem::path>& paths, unsigned threads = 0);

/// Expands a filename glob (wildcards in the last path component only).
/// Result is sorted. A pattern without wildcards is returned as-is.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

}  // namespace commvec::ingest
