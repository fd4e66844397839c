#include "commvec/ingest.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <fnmatch.h>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include <zlib.h>

#include "commvec/common.hpp"

namespace commvec::ingest {

namespace {

constexpr std::size_t kMaxErrorSamples = 10;

std::optional<std::string> string_field(const nlohmann::json& obj, const char* name) {
    auto it = obj.find(name);
    if (it == obj.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
}

void expect_line(std::istream& in, std::string& line, const char* what) {
    if (!std::getline(in, line)) throw FormatError(std::string("unexpected end of file reading ") + what);
}

std::uint64_t parse_header_count(std::istream& in, std::string_view tag) {
    std::string line;
    expect_line(in, line, std::string(tag).c_str());
    const auto fields = split(line, '\t');
    if (fields.size() != 2 || fields[0] != tag) throw FormatError("expected '" + std::string(tag) + "' header, got: " + line);
    std::uint64_t n = 0;
    const auto& f = fields[1];
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), n);
    if (ec != std::errc{} || p != f.data() + f.size()) throw FormatError("bad count in header: " + line);
    return n;
}

std::uint32_t parse_u32(const std::string& s, std::string_view context) {
    std::uint32_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw FormatError("bad integer '" + s + "' in " + std::string(context));
    return v;
}

void check_magic(std::istream& in, std::string_view magic) {
    std::string line;
    expect_line(in, line, "magic");
    if (line != std::string(magic) + "\t1") throw FormatError("bad magic line: " + line);
}

}  // namespace

std::string_view to_string(SkipReason reason) {
    switch (reason) {
        case SkipReason::deleted_author: return "deleted_author";
        case SkipReason::removed_author: return "removed_author";
        case SkipReason::missing_field: return "missing_field";
    }
    return "unknown";
}

ParseOutcome parse_comment_line(std::string_view raw_line) {
    auto obj = nlohmann::json::parse(raw_line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded()) return ParseError{"malformed JSON"};
    if (!obj.is_object()) return ParseError{"line is not a JSON object"};

    auto author = string_field(obj, "author");
    if (author == "[deleted]") return Skip{SkipReason::deleted_author, {}};
    if (author == "[removed]") return Skip{SkipReason::removed_author, {}};
    if (!author || author->empty()) return Skip{SkipReason::missing_field, "author"};
    auto subreddit = string_field(obj, "subreddit");
    if (!subreddit || subreddit->empty()) return Skip{SkipReason::missing_field, "subreddit"};

    CommentRecord rec;
    rec.author = std::move(*author);
    rec.subreddit = std::move(*subreddit);
    if (auto it = obj.find("created_utc"); it != obj.end()) {
        if (it->is_number_integer()) {
            rec.created_utc = it->get<std::int64_t>();
        } else if (it->is_number_float()) {
            rec.created_utc = static_cast<std::int64_t>(it->get<double>());
        } else if (it->is_string()) {
            const auto& s = it->get_ref<const std::string&>();
            auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), rec.created_utc);
            if (ec != std::errc{} || p != s.data() + s.size()) return ParseError{"created_utc is not numeric"};
        } else if (!it->is_null()) {
            return ParseError{"created_utc is not numeric"};
        }
    }
    if (auto id = string_field(obj, "id")) rec.id = std::move(*id);
    if (auto body = string_field(obj, "body")) rec.body = std::move(*body);
    return rec;
}

// ---------------------------------------------------------------- Interner

std::uint32_t Interner::intern(std::string_view name) {
    auto it = ids_.find(std::string(name));
    if (it != ids_.end()) return it->second;
    const auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(name);
    ids_.emplace(names_.back(), id);
    return id;
}

std::optional<std::uint32_t> Interner::find(std::string_view name) const {
    auto it = ids_.find(std::string(name));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

// ----------------------------------------------------------- ActivityTable

void ActivityTable::add_ids(std::uint32_t u, std::uint32_t s, std::uint32_t n) {
    if (n == 0) return;
    counts_[key(u, s)] += n;
    total_ += n;
}

void ActivityTable::add(std::string_view user, std::string_view subreddit, std::uint32_t n) {
    add_ids(users_.intern(user), subreddits_.intern(subreddit), n);
}

void ActivityTable::merge(const ActivityTable& other) {
    std::vector<std::uint32_t> user_map(other.users_.size());
    for (std::uint32_t i = 0; i < other.users_.size(); ++i) user_map[i] = users_.intern(other.users_.name(i));
    std::vector<std::uint32_t> sub_map(other.subreddits_.size());
    for (std::uint32_t i = 0; i < other.subreddits_.size(); ++i) sub_map[i] = subreddits_.intern(other.subreddits_.name(i));
    for (const auto& [k, c] : other.counts_) {
        add_ids(user_map[k >> 32], sub_map[k & 0xffffffffu], c);
    }
}

std::uint32_t ActivityTable::count_ids(std::uint32_t user, std::uint32_t subreddit) const {
    auto it = counts_.find(key(user, subreddit));
    return it == counts_.end() ? 0 : it->second;
}

std::uint32_t ActivityTable::count(std::string_view user, std::string_view subreddit) const {
    auto u = users_.find(user);
    auto s = subreddits_.find(subreddit);
    if (!u || !s) return 0;
    return count_ids(*u, *s);
}

std::vector<ActivityTable::Row> ActivityTable::rows() const {
    std::vector<Row> out;
    out.reserve(counts_.size());
    for (const auto& [k, c] : counts_) {
        out.push_back({static_cast<std::uint32_t>(k >> 32), static_cast<std::uint32_t>(k & 0xffffffffu), c});
    }
    std::sort(out.begin(), out.end(), [](const Row& a, const Row& b) {
        return a.user != b.user ? a.user < b.user : a.subreddit < b.subreddit;
    });
    return out;
}

ActivityTable ActivityTable::canonical() const {
    auto sorted_names = [](const Interner& in) {
        auto names = in.names();
        std::sort(names.begin(), names.end());
        return names;
    };
    ActivityTable out;
    for (const auto& n : sorted_names(users_)) out.users_.intern(n);
    for (const auto& n : sorted_names(subreddits_)) out.subreddits_.intern(n);
    for (const auto& [k, c] : counts_) {
        out.add_ids(*out.users_.find(users_.name(static_cast<std::uint32_t>(k >> 32))),
                    *out.subreddits_.find(subreddits_.name(static_cast<std::uint32_t>(k & 0xffffffffu))), c);
    }
    return out;
}

bool operator==(const ActivityTable& a, const ActivityTable& b) {
    if (a.total_ != b.total_ || a.counts_.size() != b.counts_.size()) return false;
    for (const auto& [k, c] : a.counts_) {
        const auto& u = a.users_.name(static_cast<std::uint32_t>(k >> 32));
        const auto& s = a.subreddits_.name(static_cast<std::uint32_t>(k & 0xffffffffu));
        if (b.count(u, s) != c) return false;
    }
    return true;
}

void ActivityTable::write_tsv(std::ostream& out) const {
    out << "commvec-activity\t1\n";
    out << "users\t" << users_.size() << '\n';
    for (const auto& n : users_.names()) out << n << '\n';
    out << "subreddits\t" << subreddits_.size() << '\n';
    for (const auto& n : subreddits_.names()) out << n << '\n';
    const auto rs = rows();
    out << "counts\t" << rs.size() << '\n';
    for (const auto& r : rs) out << r.user << '\t' << r.subreddit << '\t' << r.count << '\n';
}

ActivityTable ActivityTable::read_tsv(std::istream& in) {
    check_magic(in, "commvec-activity");
    ActivityTable t;
    std::string line;
    const auto n_users = parse_header_count(in, "users");
    for (std::uint64_t i = 0; i < n_users; ++i) {
        expect_line(in, line, "user names");
        if (t.users_.intern(line) != i) throw FormatError("duplicate user name: " + line);
    }
    const auto n_subs = parse_header_count(in, "subreddits");
    for (std::uint64_t i = 0; i < n_subs; ++i) {
        expect_line(in, line, "subreddit names");
        if (t.subreddits_.intern(line) != i) throw FormatError("duplicate subreddit name: " + line);
    }
    const auto n_counts = parse_header_count(in, "counts");
    for (std::uint64_t i = 0; i < n_counts; ++i) {
        expect_line(in, line, "counts");
        const auto f = split(line, '\t');
        if (f.size() != 3) throw FormatError("bad count row: " + line);
        const auto u = parse_u32(f[0], "count row");
        const auto s = parse_u32(f[1], "count row");
        const auto c = parse_u32(f[2], "count row");
        if (u >= n_users || s >= n_subs || c == 0) throw FormatError("count row out of range: " + line);
        if (t.count_ids(u, s) != 0) throw FormatError("duplicate count row: " + line);
        t.add_ids(u, s, c);
    }
    return t;
}

ActivityTable accumulate_activity(std::span<const CommentRecord> records) {
    ActivityTable t;
    for (const auto& r : records) t.add(r);
    return t;
}

// ------------------------------------------------------------------ bots

BotList BotList::parse(std::istream& in, bool suffix_heuristic) {
    std::unordered_set<std::string> names;
    std::string line;
    while (std::getline(in, line)) {
        auto view = std::string_view(line);
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = trim(view);
        if (!view.empty()) names.emplace(view);
    }
    return BotList(std::move(names), suffix_heuristic);
}

BotList BotList::load(const std::filesystem::path& path, bool suffix_heuristic) {
    std::istringstream in(read_file(path));
    return parse(in, suffix_heuristic);
}

bool BotList::is_bot(std::string_view name) const {
    if (names_.count(std::string(name)) != 0) return true;
    if (!suffix_heuristic_ || name.size() < 3) return false;
    auto tail = name.substr(name.size() - 3);
    auto lower = [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); };
    return lower(tail[0]) == 'b' && lower(tail[1]) == 'o' && lower(tail[2]) == 't';
}

ActivityTable filter_bots(const ActivityTable& table, const BotList& bots) {
    ActivityTable out;
    for (const auto& r : table.rows()) {
        const auto& user = table.users().name(r.user);
        if (bots.is_bot(user)) continue;
        out.add(user, table.subreddits().name(r.subreddit), r.count);
    }
    return out;
}

// ------------------------------------------------------------ memberships

std::optional<std::uint32_t> MembershipSets::find_subreddit(std::string_view name) const {
    auto it = std::find(subreddits.begin(), subreddits.end(), name);
    if (it == subreddits.end()) return std::nullopt;
    return static_cast<std::uint32_t>(it - subreddits.begin());
}

std::vector<std::string> MembershipSets::member_names(std::string_view name) const {
    std::vector<std::string> out;
    if (auto s = find_subreddit(name)) {
        for (auto u : members[*s]) out.push_back(users[u]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

void MembershipSets::write_tsv(std::ostream& out) const {
    out << "commvec-memberships\t1\n";
    out << "users\t" << users.size() << '\n';
    for (const auto& n : users) out << n << '\n';
    out << "subreddits\t" << subreddits.size() << '\n';
    for (const auto& n : subreddits) out << n << '\n';
    std::uint64_t total = 0;
    for (const auto& m : members) total += m.size();
    out << "members\t" << total << '\n';
    for (std::size_t s = 0; s < members.size(); ++s) {
        for (auto u : members[s]) out << s << '\t' << u << '\n';
    }
}

MembershipSets MembershipSets::read_tsv(std::istream& in) {
    check_magic(in, "commvec-memberships");
    MembershipSets m;
    std::string line;
    const auto n_users = parse_header_count(in, "users");
    for (std::uint64_t i = 0; i < n_users; ++i) {
        expect_line(in, line, "user names");
        m.users.push_back(line);
    }
    const auto n_subs = parse_header_count(in, "subreddits");
    for (std::uint64_t i = 0; i < n_subs; ++i) {
        expect_line(in, line, "subreddit names");
        m.subreddits.push_back(line);
    }
    m.members.resize(n_subs);
    const auto n_members = parse_header_count(in, "members");
    for (std::uint64_t i = 0; i < n_members; ++i) {
        expect_line(in, line, "members");
        const auto f = split(line, '\t');
        if (f.size() != 2) throw FormatError("bad member row: " + line);
        const auto s = parse_u32(f[0], "member row");
        const auto u = parse_u32(f[1], "member row");
        if (s >= n_subs || u >= n_users) throw FormatError("member row out of range: " + line);
        auto& list = m.members[s];
        if (!list.empty() && list.back() >= u) throw FormatError("member rows not sorted: " + line);
        list.push_back(u);
    }
    return m;
}

MembershipSets select_active_memberships(const ActivityTable& table, std::uint32_t threshold) {
    if (threshold == 0) throw std::invalid_argument("threshold must be >= 1");
    MembershipSets out;
    out.subreddits = table.subreddits().names();
    out.members.resize(out.subreddits.size());

    constexpr auto unassigned = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> compact(table.users().size(), unassigned);
    // rows() is sorted by user id, so compact ids preserve table order.
    for (const auto& r : table.rows()) {
        if (r.count < threshold) continue;
        auto& id = compact[r.user];
        if (id == unassigned) {
            id = static_cast<std::uint32_t>(out.users.size());
            out.users.push_back(table.users().name(r.user));
        }
        out.members[r.subreddit].push_back(id);
    }
    return out;
}

std::optional<std::uint32_t> SubredditVocab::find(std::string_view name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) return std::nullopt;
    return static_cast<std::uint32_t>(it - names.begin());
}

void SubredditVocab::write_tsv(std::ostream& out) const {
    out << "commvec-vocab\t1\n";
    out << "subreddits\t" << names.size() << '\n';
    for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << '\t' << activity[i] << '\n';
}

SubredditVocab SubredditVocab::read_tsv(std::istream& in) {
    check_magic(in, "commvec-vocab");
    SubredditVocab v;
    std::string line;
    const auto n = parse_header_count(in, "subreddits");
    for (std::uint64_t i = 0; i < n; ++i) {
        expect_line(in, line, "vocab rows");
        const auto f = split(line, '\t');
        if (f.size() != 2) throw FormatError("bad vocab row: " + line);
        v.names.push_back(f[0]);
        v.activity.push_back(parse_u32(f[1], "vocab row"));
    }
    return v;
}

TopSelection select_top_subreddits(const MembershipSets& sets, std::size_t limit) {
    if (limit == 0) throw std::invalid_argument("limit must be >= 1");
    std::vector<std::uint32_t> order(sets.subreddits.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const auto sa = sets.members[a].size();
        const auto sb = sets.members[b].size();
        return sa != sb ? sa > sb : sets.subreddits[a] < sets.subreddits[b];
    });

    TopSelection out;
    out.limit_exceeds_available = limit > order.size();
    if (order.size() > limit) order.resize(limit);

    constexpr auto unassigned = std::numeric_limits<std::uint32_t>::max();
    std::vector<std::uint32_t> compact(sets.users.size(), unassigned);
    for (auto s : order) {
        out.vocab.names.push_back(sets.subreddits[s]);
        out.vocab.activity.push_back(sets.members[s].size());
        out.sets.subreddits.push_back(sets.subreddits[s]);
        out.sets.members.emplace_back();
    }
    // Compact user ids in original id order so the result is canonical.
    std::vector<char> retained(sets.users.size(), 0);
    for (auto s : order) {
        for (auto u : sets.members[s]) retained[u] = 1;
    }
    for (std::uint32_t u = 0; u < sets.users.size(); ++u) {
        if (!retained[u]) continue;
        compact[u] = static_cast<std::uint32_t>(out.sets.users.size());
        out.sets.users.push_back(sets.users[u]);
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto& list = out.sets.members[i];
        for (auto u : sets.members[order[i]]) list.push_back(compact[u]);
    }
    return out;
}

// ---------------------------------------------------------------- reports

std::uint64_t IngestReport::skipped_total() const {
    std::uint64_t n = 0;
    for (const auto& [_, c] : skipped) n += c;
    return n;
}

void IngestReport::merge(const IngestReport& other) {
    lines += other.lines;
    accepted += other.accepted;
    errors += other.errors;
    for (const auto& [k, c] : other.skipped) skipped[k] += c;
    for (const auto& e : other.error_samples) {
        if (error_samples.size() >= kMaxErrorSamples) break;
        error_samples.push_back(e);
    }
    warnings.insert(warnings.end(), other.warnings.begin(), other.warnings.end());
}

nlohmann::json IngestReport::to_json() const {
    nlohmann::json skips = nlohmann::json::object();
    for (const auto& [k, c] : skipped) skips[k] = c;
    return {{"records", lines},       {"accepted", accepted},           {"skipped", skipped_total()},
            {"skip_reasons", skips},  {"errors", errors},               {"error_samples", error_samples},
            {"warnings", warnings}};
}

namespace {

void ingest_line(std::string_view line, ActivityTable& table, IngestReport& report, std::string_view source) {
    if (trim(line).empty()) return;
    ++report.lines;
    auto outcome = parse_comment_line(line);
    if (auto* rec = std::get_if<CommentRecord>(&outcome)) {
        table.add(*rec);
        ++report.accepted;
    } else if (auto* skip = std::get_if<Skip>(&outcome)) {
        ++report.skipped[std::string(to_string(skip->reason))];
    } else {
        ++report.errors;
        if (report.error_samples.size() < kMaxErrorSamples) {
            report.error_samples.push_back(std::string(source) + ":" + std::to_string(report.lines) + ": " +
                                           std::get<ParseError>(outcome).message);
        }
    }
}

}  // namespace

void ingest_stream(std::istream& in, ActivityTable& table, IngestReport& report) {
    std::string line;
    while (std::getline(in, line)) ingest_line(line, table, report, "<stream>");
}

void ingest_file(const std::filesystem::path& path, ActivityTable& table, IngestReport& report) {
    // zlib reads uncompressed files transparently.
    gzFile gz = gzopen(path.c_str(), "rb");
    if (gz == nullptr) throw MissingInputError("cannot open dump " + path.string());
    gzbuffer(gz, 1 << 18);
    std::string line;
    std::vector<char> buf(1 << 16);
    const auto source = path.filename().string();
    while (gzgets(gz, buf.data(), static_cast<int>(buf.size())) != nullptr) {
        std::string_view chunk(buf.data());
        line.append(chunk);
        if (!chunk.empty() && chunk.back() == '\n') {
            ingest_line(line, table, report, source);
            line.clear();
        }
    }
    int err = 0;
    const char* msg = gzerror(gz, &err);
    const std::string err_msg = msg ? msg : "";
    gzclose(gz);
    if (err != Z_OK && err != Z_STREAM_END) throw FormatError("decompression failed for " + path.string() + ": " + err_msg);
    if (!line.empty()) ingest_line(line, table, report, source);
}

ShardedResult ingest_files(const std::vector<std::filesystem::path>& paths, unsigned threads) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, std::max<std::size_t>(1, paths.size()));

    std::vector<ShardedResult> shards(paths.size());
    std::vector<std::exception_ptr> failures(paths.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next++; i < paths.size(); i = next++) {
            try {
                ingest_file(paths[i], shards[i].table, shards[i].report);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    pool.clear();
    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }

    ShardedResult out;
    for (auto& shard : shards) {
        out.table.merge(shard.table);
        out.report.merge(shard.report);
    }
    out.table = out.table.canonical();
    return out;
}

std::vector<std::filesystem::path> expand_glob(const std::string& pattern) {
    namespace fs = std::filesystem;
    const fs::path p(pattern);
    const auto name = p.filename().string();
    if (name.find_first_of("*?[") == std::string::npos) return {p};
    const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    std::vector<fs::path> out;
    if (!fs::is_directory(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        if (fnmatch(name.c_str(), entry.path().filename().c_str(), 0) == 0) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace commvec::ingest
