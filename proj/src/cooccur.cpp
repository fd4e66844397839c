#include "commvec/cooccur.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "commvec/binary_io.hpp"
#include "commvec/common.hpp"

namespace commvec::cooccur {

namespace {

constexpr std::string_view kMagic = "CVCOOC01";
constexpr std::uint32_t kVersion = 1;

std::uint64_t pair_key(std::uint32_t i, std::uint32_t j) noexcept {
    return (static_cast<std::uint64_t>(i) << 32) | j;
}

}  // namespace

CooccurrenceMatrix::CooccurrenceMatrix(std::vector<std::string> vocab, std::vector<Entry> entries)
    : vocab_(std::move(vocab)), entries_(std::move(entries)) {
    for (auto& e : entries_) {
        if (e.i == e.j) throw std::invalid_argument("diagonal entry for " + std::to_string(e.i));
        if (e.count == 0) throw std::invalid_argument("zero count stored");
        if (e.i >= vocab_.size() || e.j >= vocab_.size()) throw std::invalid_argument("entry index out of range");
        if (e.i > e.j) std::swap(e.i, e.j);
    }
    std::sort(entries_.begin(), entries_.end(),
              [](const Entry& a, const Entry& b) { return pair_key(a.i, a.j) < pair_key(b.i, b.j); });
    for (std::size_t k = 1; k < entries_.size(); ++k) {
        if (entries_[k].i == entries_[k - 1].i && entries_[k].j == entries_[k - 1].j) {
            throw std::invalid_argument("duplicate entry (" + std::to_string(entries_[k].i) + ", " +
                                        std::to_string(entries_[k].j) + ")");
        }
    }
}

std::uint32_t CooccurrenceMatrix::at(std::uint32_t i, std::uint32_t j) const {
    if (i == j) return 0;
    if (i > j) std::swap(i, j);
    const auto k = pair_key(i, j);
    auto it = std::lower_bound(entries_.begin(), entries_.end(), k,
                               [](const Entry& e, std::uint64_t key) { return pair_key(e.i, e.j) < key; });
    return (it != entries_.end() && it->i == i && it->j == j) ? it->count : 0;
}

std::optional<std::uint32_t> CooccurrenceMatrix::index_of(const std::string& name) const {
    auto it = std::find(vocab_.begin(), vocab_.end(), name);
    if (it == vocab_.end()) return std::nullopt;
    return static_cast<std::uint32_t>(it - vocab_.begin());
}

std::string CooccurrenceMatrix::serialize() const {
    ByteWriter payload;
    for (const auto& name : vocab_) payload.str(name);
    for (const auto& e : entries_) {
        payload.u32(e.i);
        payload.u32(e.j);
        payload.u32(e.count);
    }
    ByteWriter header;
    header.raw(kMagic);
    header.u32(kVersion);
    header.u32(static_cast<std::uint32_t>(vocab_.size()));
    header.u64(entries_.size());
    header.u64(checksum_bytes(payload.bytes()));
    return header.take() + payload.take();
}

CooccurrenceMatrix CooccurrenceMatrix::deserialize(std::string_view bytes) {
    ByteReader header(bytes, "co-occurrence matrix");
    if (header.raw(kMagic.size()) != kMagic) throw FormatError("co-occurrence matrix: bad magic");
    if (const auto v = header.u32(); v != kVersion) throw FormatError("co-occurrence matrix: unsupported version " + std::to_string(v));
    const auto n_vocab = header.u32();
    const auto n_entries = header.u64();
    const auto expected = header.u64();
    const auto payload = bytes.substr(header.offset());
    if (checksum_bytes(payload) != expected) {
        throw FormatError("co-occurrence matrix: checksum mismatch (file truncated or corrupted)");
    }
    ByteReader in(payload, "co-occurrence matrix");
    std::vector<std::string> vocab;
    vocab.reserve(n_vocab);
    for (std::uint32_t k = 0; k < n_vocab; ++k) vocab.push_back(in.str());
    std::vector<Entry> entries;
    entries.reserve(n_entries);
    for (std::uint64_t k = 0; k < n_entries; ++k) {
        Entry e{};
        e.i = in.u32();
        e.j = in.u32();
        e.count = in.u32();
        entries.push_back(e);
    }
    if (!in.at_end()) throw FormatError("co-occurrence matrix: trailing bytes");
    try {
        return CooccurrenceMatrix(std::move(vocab), std::move(entries));
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("co-occurrence matrix: ") + e.what());
    }
}

void CooccurrenceMatrix::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

CooccurrenceMatrix CooccurrenceMatrix::load(const std::filesystem::path& path) {
    return deserialize(read_file(path));
}

void CooccurrenceMatrix::write_tsv(std::ostream& out) const {
    for (const auto& e : entries_) out << vocab_[e.i] << '\t' << vocab_[e.j] << '\t' << e.count << '\n';
}

nlohmann::json BuildReport::to_json() const {
    return {{"users", users},
            {"capped_users", capped_users},
            {"pair_increments", pair_increments},
            {"empty_rows", empty_rows}};
}

BuildResult build_cooccurrence(const ingest::MembershipSets& sets, const ingest::SubredditVocab& vocab,
                               const BuildOptions& options) {
    if (sets.subreddits != vocab.names) {
        throw std::invalid_argument("membership sets are not restricted to the vocabulary");
    }
    BuildResult out;
    auto& report = out.report;

    // Invert to per-user membership lists; subreddit ids come out ascending.
    std::vector<std::vector<std::uint32_t>> by_user(sets.users.size());
    for (std::uint32_t s = 0; s < sets.members.size(); ++s) {
        if (sets.members[s].empty()) report.empty_rows.push_back(sets.subreddits[s]);
        for (auto u : sets.members[s]) by_user[u].push_back(s);
    }
    report.users = by_user.size();

    const unsigned threads = std::max(1u, options.threads);
    using Counts = std::unordered_map<std::uint64_t, std::uint32_t>;
    std::vector<Counts> partial(threads);
    std::vector<std::uint64_t> increments(threads, 0);
    std::vector<std::uint64_t> capped(threads, 0);

    auto count_range = [&](unsigned t) {
        auto& counts = partial[t];
        for (std::size_t u = t; u < by_user.size(); u += threads) {
            const auto& list = by_user[u];
            if (options.max_memberships_per_user != 0 && list.size() > options.max_memberships_per_user) {
                ++capped[t];
                continue;
            }
            for (std::size_t a = 0; a < list.size(); ++a) {
                for (std::size_t b = a + 1; b < list.size(); ++b) ++counts[pair_key(list[a], list[b])];
            }
            increments[t] += list.size() * (list.size() - (list.empty() ? 0 : 1)) / 2;
        }
    };
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < threads; ++t) pool.emplace_back(count_range, t);
        count_range(0);
    }

    Counts merged = std::move(partial[0]);
    for (unsigned t = 1; t < threads; ++t) {
        for (const auto& [k, c] : partial[t]) merged[k] += c;
    }
    for (unsigned t = 0; t < threads; ++t) {
        report.pair_increments += increments[t];
        report.capped_users += capped[t];
    }

    std::vector<Entry> entries;
    entries.reserve(merged.size());
    for (const auto& [k, c] : merged) {
        entries.push_back({static_cast<std::uint32_t>(k >> 32), static_cast<std::uint32_t>(k & 0xffffffffu), c});
    }
    out.matrix = CooccurrenceMatrix(vocab.names, std::move(entries));
    return out;
}

}  // namespace commvec::cooccur
