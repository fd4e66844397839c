#pragma once

// Generators for desk-scale data with planted structure: a block-model comment
// dump, a city x sport lattice dump with its composition and analogy suites,
// and a labeled corpus whose label semantics depend on the community.
// Every generator is a pure function of its spec and seed.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "commvec/classify.hpp"
#include "commvec/vecspace.hpp"

namespace commvec::synth {

struct BlockSpec {
    std::size_t blocks = 3;
    std::size_t subreddits_per_block = 20;
    std::size_t users = 5000;
    double p_in = 0.3;
    double p_out = 0.01;
    /// Active users write between min_comments and min_comments + 4
    /// comments in each of their subreddits.
    std::uint32_t min_comments = 10;
    /// Probability that a user also leaves a few (< min_comments) comments in
    /// one random subreddit they are not active in.
    double noise_rate = 0.5;
    /// Adds a bot active everywhere, "[deleted]" authors and malformed lines.
    bool dirty = true;
};

struct LatticeSpec {
    std::size_t cities = 4;
    std::size_t sports = 3;
    std::size_t fans_per_team = 120;
    /// Chance that a fan of a team is also active in its city / sport hub.
    double p_hub = 0.8;
    /// Users active only in one city or one sport hub.
    std::size_t hub_only_users = 150;
    std::size_t filler_subreddits = 12;
    /// Users active in 2-4 random subreddits of the whole lattice.
    std::size_t background_users = 800;
    std::uint32_t min_comments = 10;
};

struct ContextSpec {
    std::size_t comments = 5000;
    /// Probability that a comment carries its community's dominant label.
    double rho = 0.9;
    /// Community roles follow the block-model blocks: block 0 antagonistic
    /// (DEG, else NDNA), block 1 supportive (APR, else DEG), block 2 homonym
    /// (HOM, else DEG). Further blocks cycle through the roles.
    double antagonistic_share = 0.6;
    /// Probability that a comment contains a word cueing its gold label.
    double cue_rate = 0.3;
    std::vector<std::string> slurs = {"zorblak", "quenth"};
};

struct SyntheticSpec {
    std::uint64_t seed = 1;
    BlockSpec block;
    LatticeSpec lattice;
    ContextSpec context;
    /// Number of files the block dump is split into.
    std::size_t shards = 2;

    void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);

struct BlockDump {
    std::vector<std::string> lines;
    std::vector<std::string> subreddits;
    /// block_of[i] is the block of subreddits[i].
    std::vector<std::size_t> block_of;
    std::vector<std::string> bots;
};

BlockDump generate_block_dump(const BlockSpec& spec, std::uint64_t seed);

struct LatticeDump {
    std::vector<std::string> lines;
    std::vector<std::string> cities;
    std::vector<std::string> sports;
    /// teams[c * sports + s]
    std::vector<std::string> teams;
    std::vector<vecspace::EvalTest> composition;
    std::vector<vecspace::EvalTest> analogy;
};

std::string city_name(std::size_t c);
std::string sport_name(std::size_t s);
std::string team_name(std::size_t c, std::size_t s);

LatticeDump generate_lattice_dump(const LatticeSpec& spec, std::uint64_t seed);

/// Comments are spread over the block-model subreddits (`subreddits`,
/// `block_of` as from generate_block_dump).
std::vector<classify::LabeledComment> generate_context_corpus(const ContextSpec& spec,
                                                              const std::vector<std::string>& subreddits,
                                                              const std::vector<std::size_t>& block_of,
                                                              std::uint64_t seed);

/// Paths written by write_synthetic, relative to its output directory.
struct SyntheticLayout {
    static constexpr const char* block_glob = "block/RC_*.ndjson";
    static constexpr const char* bots = "block/bots.txt";
    static constexpr const char* communities = "block/communities.tsv";
    static constexpr const char* lattice_dump = "lattice/RC_lattice.ndjson";
    static constexpr const char* composition = "lattice/composition.tsv";
    static constexpr const char* analogy = "lattice/analogy.tsv";
    static constexpr const char* corpus = "corpus.csv";
    static constexpr const char* spec = "spec.json";
};

/// Writes every generated artifact under `out`. Returns the files written.
std::vector<std::filesystem::path> write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out);

}  // namespace commvec::synth
