#pragma once

// Subreddit-subreddit co-occurrence counts: A_ij = number of users active in
// both i and j. Stored upper-triangular without the diagonal.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "commvec/ingest.hpp"

namespace commvec::cooccur {

struct Entry {
    std::uint32_t i;
    std::uint32_t j;
    std::uint32_t count;
    friend bool operator==(const Entry&, const Entry&) = default;
};

class CooccurrenceMatrix {
public:
    CooccurrenceMatrix() = default;

    /// Entries may be in any order and orientation; they are normalized to
    /// i < j and sorted. Throws std::invalid_argument on a diagonal entry,
    /// a zero count, an out-of-range index or a duplicate pair.
    CooccurrenceMatrix(std::vector<std::string> vocab, std::vector<Entry> entries);

    const std::vector<std::string>& vocab() const noexcept { return vocab_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return vocab_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    /// Symmetric lookup; 0 for absent pairs and for i == j.
    std::uint32_t at(std::uint32_t i, std::uint32_t j) const;
    std::optional<std::uint32_t> index_of(const std::string& name) const;

    std::string serialize() const;
    static CooccurrenceMatrix deserialize(std::string_view bytes);
    void save(const std::filesystem::path& path) const;
    static CooccurrenceMatrix load(const std::filesystem::path& path);

    /// name_i<TAB>name_j<TAB>count, one line per stored entry.
    void write_tsv(std::ostream& out) const;

    friend bool operator==(const CooccurrenceMatrix&, const CooccurrenceMatrix&) = default;

private:
    std::vector<std::string> vocab_;
    std::vector<Entry> entries_;
};

struct BuildOptions {
    /// Users with more memberships than this are left out; 0 = no cap.
    std::size_t max_memberships_per_user = 0;
    unsigned threads = 1;
};

struct BuildReport {
    std::vector<std::string> empty_rows;
    std::uint64_t users = 0;
    std::uint64_t capped_users = 0;
    std::uint64_t pair_increments = 0;
    nlohmann::json to_json() const;
};

struct BuildResult {
    CooccurrenceMatrix matrix;
    BuildReport report;
};

/// `sets` must be restricted to `vocab` (same subreddits in the same order,
/// as returned by select_top_subreddits).
BuildResult build_cooccurrence(const ingest::MembershipSets& sets, const ingest::SubredditVocab& vocab,
                               const BuildOptions& options = {});

}  // namespace commvec::cooccur
