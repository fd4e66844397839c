#include "commvec/synthetic.hpp"

#include <array>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "commvec/common.hpp"

namespace commvec::synth {

namespace {

constexpr std::int64_t kEpochStart = 1136073600;  // 2006-01-01
constexpr std::int64_t kEpochSpan = 12LL * 365 * 86400;

class LineWriter {
public:
    explicit LineWriter(SplitMix64& rng) : rng_(rng) {}

    void comment(const std::string& author, const std::string& subreddit, std::uint32_t n) {
        for (std::uint32_t k = 0; k < n; ++k) {
            nlohmann::json j = {{"author", author},
                                {"subreddit", subreddit},
                                {"created_utc", kEpochStart + static_cast<std::int64_t>(rng_.below(kEpochSpan))},
                                {"id", next_id()},
                                {"body", ""}};
            lines.push_back(j.dump());
        }
    }

    std::string next_id() {
        char buf[16];
        std::snprintf(buf, sizeof buf, "c%07zu", counter_++);
        return buf;
    }

    std::vector<std::string> lines;

private:
    SplitMix64& rng_;
    std::size_t counter_ = 0;
};

std::string user_name(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
    return buf;
}

std::uint32_t active_count(SplitMix64& rng, std::uint32_t min_comments) {
    return min_comments + static_cast<std::uint32_t>(rng.below(5));
}

template <typename T>
const T& pick(const std::vector<T>& items, SplitMix64& rng) {
    return items[rng.below(items.size())];
}

const std::vector<std::string>& cue_words(classify::GoldLabel label) {
    static const std::array<std::vector<std::string>, 4> cues = {{
        {"disgusting", "vermin", "subhuman", "filthy"},
        {"quoting", "reported", "offensive", "slander"},
        {"proud", "sibling", "reclaim", "fam"},
        {"transmission", "engine", "gearbox", "clutch"},
    }};
    return cues[static_cast<std::size_t>(label)];
}

const std::vector<std::string> kFiller = {
    "today", "really", "people", "thread", "post",  "think", "know",  "game",   "time", "year",
    "good",  "lol",    "yeah",   "guess",  "thing", "said",  "comment", "day", "week", "maybe",
    "right", "look",   "way",    "sure",   "got",   "make",  "new",   "old",    "real", "stuff",
};

}  // namespace

// ------------------------------------------------------------------ spec

void SyntheticSpec::validate() const {
    auto prob = [](double p, const char* what) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(what) + " must be in [0, 1]");
    };
    if (block.blocks == 0 || block.subreddits_per_block == 0) throw std::invalid_argument("block model needs blocks and subreddits");
    prob(block.p_in, "block.p_in");
    prob(block.p_out, "block.p_out");
    prob(block.noise_rate, "block.noise_rate");
    if (block.min_comments == 0) throw std::invalid_argument("block.min_comments must be >= 1");
    if (lattice.cities < 2 || lattice.sports < 1) throw std::invalid_argument("lattice needs >= 2 cities and >= 1 sport");
    prob(lattice.p_hub, "lattice.p_hub");
    if (lattice.min_comments == 0) throw std::invalid_argument("lattice.min_comments must be >= 1");
    prob(context.rho, "context.rho");
    prob(context.antagonistic_share, "context.antagonistic_share");
    prob(context.cue_rate, "context.cue_rate");
    if (context.slurs.empty()) throw std::invalid_argument("context.slurs must not be empty");
    if (shards == 0) throw std::invalid_argument("shards must be >= 1");
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = {{"seed", s.seed},
         {"shards", s.shards},
         {"block",
          {{"blocks", s.block.blocks},
           {"subreddits_per_block", s.block.subreddits_per_block},
           {"users", s.block.users},
           {"p_in", s.block.p_in},
           {"p_out", s.block.p_out},
           {"min_comments", s.block.min_comments},
           {"noise_rate", s.block.noise_rate},
           {"dirty", s.block.dirty}}},
         {"lattice",
          {{"cities", s.lattice.cities},
           {"sports", s.lattice.sports},
           {"fans_per_team", s.lattice.fans_per_team},
           {"p_hub", s.lattice.p_hub},
           {"hub_only_users", s.lattice.hub_only_users},
           {"filler_subreddits", s.lattice.filler_subreddits},
           {"background_users", s.lattice.background_users},
           {"min_comments", s.lattice.min_comments}}},
         {"context",
          {{"comments", s.context.comments},
           {"rho", s.context.rho},
           {"antagonistic_share", s.context.antagonistic_share},
           {"cue_rate", s.context.cue_rate},
           {"slurs", s.context.slurs}}}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    s.seed = j.value("seed", s.seed);
    s.shards = j.value("shards", s.shards);
    if (j.contains("block")) {
        const auto& b = j["block"];
        s.block.blocks = b.value("blocks", s.block.blocks);
        s.block.subreddits_per_block = b.value("subreddits_per_block", s.block.subreddits_per_block);
        s.block.users = b.value("users", s.block.users);
        s.block.p_in = b.value("p_in", s.block.p_in);
        s.block.p_out = b.value("p_out", s.block.p_out);
        s.block.min_comments = b.value("min_comments", s.block.min_comments);
        s.block.noise_rate = b.value("noise_rate", s.block.noise_rate);
        s.block.dirty = b.value("dirty", s.block.dirty);
    }
    if (j.contains("lattice")) {
        const auto& l = j["lattice"];
        s.lattice.cities = l.value("cities", s.lattice.cities);
        s.lattice.sports = l.value("sports", s.lattice.sports);
        s.lattice.fans_per_team = l.value("fans_per_team", s.lattice.fans_per_team);
        s.lattice.p_hub = l.value("p_hub", s.lattice.p_hub);
        s.lattice.hub_only_users = l.value("hub_only_users", s.lattice.hub_only_users);
        s.lattice.filler_subreddits = l.value("filler_subreddits", s.lattice.filler_subreddits);
        s.lattice.background_users = l.value("background_users", s.lattice.background_users);
        s.lattice.min_comments = l.value("min_comments", s.lattice.min_comments);
    }
    if (j.contains("context")) {
        const auto& c = j["context"];
        s.context.comments = c.value("comments", s.context.comments);
        s.context.rho = c.value("rho", s.context.rho);
        s.context.antagonistic_share = c.value("antagonistic_share", s.context.antagonistic_share);
        s.context.cue_rate = c.value("cue_rate", s.context.cue_rate);
        s.context.slurs = c.value("slurs", s.context.slurs);
    }
}

// ------------------------------------------------------------ block model

BlockDump generate_block_dump(const BlockSpec& spec, std::uint64_t seed) {
    SplitMix64 rng(derive_seed(seed, 0xb10c));
    BlockDump out;
    for (std::size_t b = 0; b < spec.blocks; ++b) {
        for (std::size_t s = 0; s < spec.subreddits_per_block; ++s) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "blk%zu_sub%02zu", b, s);
            out.subreddits.emplace_back(buf);
            out.block_of.push_back(b);
        }
    }
    const std::size_t n_subs = out.subreddits.size();
    LineWriter w(rng);

    std::vector<bool> active(n_subs);
    for (std::size_t u = 0; u < spec.users; ++u) {
        const auto user = user_name("user", u);
        const auto home = static_cast<std::size_t>(rng.below(spec.blocks));
        for (std::size_t s = 0; s < n_subs; ++s) {
            active[s] = rng.bernoulli(out.block_of[s] == home ? spec.p_in : spec.p_out);
            if (active[s]) w.comment(user, out.subreddits[s], active_count(rng, spec.min_comments));
        }
        if (spec.min_comments > 1 && rng.bernoulli(spec.noise_rate)) {
            const auto s = static_cast<std::size_t>(rng.below(n_subs));
            if (!active[s]) w.comment(user, out.subreddits[s], 1 + static_cast<std::uint32_t>(rng.below(spec.min_comments - 1)));
        }
    }

    if (spec.dirty) {
        out.bots.push_back("AutoModerator");
        for (const auto& s : out.subreddits) w.comment("AutoModerator", s, spec.min_comments + 2);
        for (int k = 0; k < 40; ++k) w.comment("[deleted]", pick(out.subreddits, rng), 1);
        for (int k = 0; k < 15; ++k) w.comment("[removed]", pick(out.subreddits, rng), 1);
        w.lines.push_back(R"({"author": "user00001", "subreddit": )");
        w.lines.push_back("not json at all");
        w.lines.push_back(R"({"author": "user00002", "created_utc": 1300000000})");
    }
    fisher_yates(w.lines, rng);
    out.lines = std::move(w.lines);
    return out;
}

// ---------------------------------------------------------------- lattice

std::string city_name(std::size_t c) {
    static const std::vector<std::string> names = {"boston", "chicago", "denver", "seattle",
                                                   "atlanta", "phoenix", "dallas", "miami"};
    return c < names.size() ? names[c] : "city" + std::to_string(c);
}

std::string sport_name(std::size_t s) {
    static const std::vector<std::string> names = {"baseball", "basketball", "hockey", "football", "soccer"};
    return s < names.size() ? names[s] : "sport" + std::to_string(s);
}

std::string team_name(std::size_t c, std::size_t s) { return city_name(c) + "_" + sport_name(s); }

LatticeDump generate_lattice_dump(const LatticeSpec& spec, std::uint64_t seed) {
    SplitMix64 rng(derive_seed(seed, 0x1a77));
    LatticeDump out;
    for (std::size_t c = 0; c < spec.cities; ++c) out.cities.push_back(city_name(c));
    for (std::size_t s = 0; s < spec.sports; ++s) out.sports.push_back(sport_name(s));
    for (std::size_t c = 0; c < spec.cities; ++c) {
        for (std::size_t s = 0; s < spec.sports; ++s) out.teams.push_back(team_name(c, s));
    }
    std::vector<std::string> fillers;
    for (std::size_t f = 0; f < spec.filler_subreddits; ++f) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "general_%02zu", f);
        fillers.emplace_back(buf);
    }
    std::vector<std::string> all = out.cities;
    all.insert(all.end(), out.sports.begin(), out.sports.end());
    all.insert(all.end(), out.teams.begin(), out.teams.end());
    all.insert(all.end(), fillers.begin(), fillers.end());

    LineWriter w(rng);
    std::size_t user = 0;
    auto active = [&](const std::string& u, const std::string& sub) {
        w.comment(u, sub, active_count(rng, spec.min_comments));
    };

    for (std::size_t c = 0; c < spec.cities; ++c) {
        for (std::size_t s = 0; s < spec.sports; ++s) {
            for (std::size_t f = 0; f < spec.fans_per_team; ++f) {
                const auto u = user_name("fan", user++);
                active(u, out.teams[c * spec.sports + s]);
                if (rng.bernoulli(spec.p_hub)) active(u, out.cities[c]);
                if (rng.bernoulli(spec.p_hub)) active(u, out.sports[s]);
            }
        }
    }
    for (const auto& hubs : {out.cities, out.sports}) {
        for (const auto& hub : hubs) {
            for (std::size_t k = 0; k < spec.hub_only_users; ++k) {
                const auto u = user_name("local", user++);
                active(u, hub);
                if (!fillers.empty() && rng.bernoulli(0.5)) active(u, pick(fillers, rng));
            }
        }
    }
    for (std::size_t k = 0; k < spec.background_users; ++k) {
        const auto u = user_name("reader", user++);
        const auto n = 2 + rng.below(3);
        std::vector<std::size_t> idx(all.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        fisher_yates(idx, rng);
        for (std::size_t i = 0; i < n && i < idx.size(); ++i) active(u, all[idx[i]]);
    }
    fisher_yates(w.lines, rng);
    out.lines = std::move(w.lines);

    for (std::size_t c = 0; c < spec.cities; ++c) {
        for (std::size_t s = 0; s < spec.sports; ++s) {
            out.composition.emplace_back(vecspace::CompositionTest{out.cities[c], out.sports[s], out.teams[c * spec.sports + s]});
        }
    }
    for (std::size_t c = 0; c < spec.cities; ++c) {
        const auto c2 = (c + 1) % spec.cities;
        for (std::size_t s = 0; s < spec.sports; ++s) {
            out.analogy.emplace_back(vecspace::AnalogyTest{out.cities[c], out.teams[c * spec.sports + s], out.cities[c2],
                                                           out.teams[c2 * spec.sports + s]});
        }
    }
    return out;
}

// --------------------------------------------------------- context corpus

std::vector<classify::LabeledComment> generate_context_corpus(const ContextSpec& spec,
                                                              const std::vector<std::string>& subreddits,
                                                              const std::vector<std::size_t>& block_of,
                                                              std::uint64_t seed) {
    using classify::GoldLabel;
    if (subreddits.size() != block_of.size() || subreddits.empty()) {
        throw std::invalid_argument("context corpus needs subreddits with block assignments");
    }
    SplitMix64 rng(derive_seed(seed, 0xc0de));
    std::array<std::vector<std::size_t>, 3> by_role;
    for (std::size_t i = 0; i < subreddits.size(); ++i) by_role[block_of[i] % 3].push_back(i);
    if (by_role[0].empty()) throw std::invalid_argument("context corpus needs an antagonistic block");

    constexpr std::array<GoldLabel, 3> dominant = {GoldLabel::DEG, GoldLabel::APR, GoldLabel::HOM};
    constexpr std::array<GoldLabel, 3> minority = {GoldLabel::NDNA, GoldLabel::DEG, GoldLabel::DEG};

    std::vector<classify::LabeledComment> out;
    out.reserve(spec.comments);
    for (std::size_t n = 0; n < spec.comments; ++n) {
        std::size_t role = 0;
        if (!rng.bernoulli(spec.antagonistic_share)) {
            role = 1 + rng.below(2);
            if (by_role[role].empty()) role = by_role[1].empty() ? (by_role[2].empty() ? 0 : 2) : 1;
        }
        classify::LabeledComment c;
        char buf[32];
        std::snprintf(buf, sizeof buf, "t1_%06zu", n);
        c.id = buf;
        c.subreddit = subreddits[pick(by_role[role], rng)];
        c.author = user_name("user", rng.below(5000));
        c.created_utc = kEpochStart + static_cast<std::int64_t>(rng.below(kEpochSpan));
        c.gold = rng.bernoulli(spec.rho) ? dominant[role] : minority[role];
        c.slur = pick(spec.slurs, rng);

        std::vector<std::string> words;
        const auto filler = 3 + rng.below(6);
        for (std::size_t k = 0; k < filler; ++k) words.push_back(pick(kFiller, rng));
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(words.size() + 1)), c.slur);
        if (rng.bernoulli(spec.cue_rate)) {
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(words.size() + 1)), pick(cue_words(c.gold), rng));
        }
        if (rng.bernoulli(0.05)) words.push_back("u/" + user_name("user", rng.below(5000)));
        if (rng.bernoulli(0.05)) words.push_back("https://example.com/p/" + std::to_string(rng.below(1000)));
        std::string body;
        for (std::size_t k = 0; k < words.size(); ++k) {
            if (k) body.push_back(' ');
            body += words[k];
        }
        if (rng.bernoulli(0.3)) body += rng.bernoulli(0.5) ? "!" : ", honestly.";
        c.body = std::move(body);
        out.push_back(std::move(c));
    }
    return out;
}

// ------------------------------------------------------------------ files

std::vector<std::filesystem::path> write_synthetic(const SyntheticSpec& spec, const std::filesystem::path& out) {
    spec.validate();
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string& rel, const std::string& contents) {
        write_file(out / rel, contents);
        written.push_back(out / rel);
    };
    auto join = [](const std::vector<std::string>& lines, std::size_t shard, std::size_t shards) {
        std::string s;
        for (std::size_t i = shard; i < lines.size(); i += shards) {
            s += lines[i];
            s.push_back('\n');
        }
        return s;
    };

    const auto block = generate_block_dump(spec.block, spec.seed);
    for (std::size_t k = 0; k < spec.shards; ++k) {
        put("block/RC_" + std::to_string(k) + ".ndjson", join(block.lines, k, spec.shards));
    }
    std::string bots = "# accounts excluded from membership\n";
    for (const auto& b : block.bots) bots += b + "\n";
    put(SyntheticLayout::bots, bots);
    std::string communities = "subreddit\tblock\n";
    for (std::size_t i = 0; i < block.subreddits.size(); ++i) {
        communities += block.subreddits[i] + "\t" + std::to_string(block.block_of[i]) + "\n";
    }
    put(SyntheticLayout::communities, communities);

    const auto lattice = generate_lattice_dump(spec.lattice, spec.seed);
    put(SyntheticLayout::lattice_dump, join(lattice.lines, 0, 1));
    std::ostringstream comp;
    comp << "# city\tsport\tteam\n";
    vecspace::write_suite(comp, lattice.composition);
    put(SyntheticLayout::composition, comp.str());
    std::ostringstream ana;
    ana << "# city\tteam\tcity2\tteam2\n";
    vecspace::write_suite(ana, lattice.analogy);
    put(SyntheticLayout::analogy, ana.str());

    const auto corpus = generate_context_corpus(spec.context, block.subreddits, block.block_of, spec.seed);
    std::ostringstream csv;
    classify::write_corpus_csv(csv, corpus);
    put(SyntheticLayout::corpus, csv.str());

    put(SyntheticLayout::spec, nlohmann::json(spec).dump(2) + "\n");
    return written;
}

}  // namespace commvec::synth
