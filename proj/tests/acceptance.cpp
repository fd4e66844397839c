// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "commvec/classify.hpp"
#include "commvec/common.hpp"
#include "commvec/cooccur.hpp"
#include "commvec/embed.hpp"
#include "commvec/ingest.hpp"
#include "commvec/pipeline.hpp"
#include "commvec/synthetic.hpp"
#include "commvec/vecspace.hpp"

using namespace commvec;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const std::string& id, const std::string& title, double limit_s, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (limit_s > 0 && secs > limit_s) {
        o.pass = false;
        o.detail += "; exceeded " + std::to_string(static_cast<int>(limit_s)) + " s limit";
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %s: %s [%s] (%.2f s)\n", o.pass ? "PASS" : "FAIL", id.c_str(), title.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// Dump lines -> membership sets -> vocabulary -> co-occurrence matrix.
cooccur::CooccurrenceMatrix matrix_from_lines(const std::vector<std::string>& lines, const std::vector<std::string>& bots,
                                              std::uint32_t threshold) {
    std::string joined;
    for (const auto& l : lines) joined += l + "\n";
    std::istringstream in(joined);
    ingest::ActivityTable table;
    ingest::IngestReport rep;
    ingest::ingest_stream(in, table, rep);
    const ingest::BotList bl(std::unordered_set<std::string>(bots.begin(), bots.end()));
    const auto sets = ingest::select_active_memberships(ingest::filter_bots(table, bl), threshold);
    const auto top = ingest::select_top_subreddits(sets, 10400);
    return cooccur::build_cooccurrence(top.sets, top.vocab).matrix;
}

embed::EmbedConfig desk_embed(std::uint64_t seed) {
    embed::EmbedConfig c;
    c.dim = 16;
    c.epochs = 300;
    c.seed = seed;
    c.deterministic = true;
    return c;
}

// Brute-force pairwise intersection counts, keyed by (i, j) with i < j.
std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> intersection_oracle(const ingest::MembershipSets& s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> out;
    for (std::uint32_t i = 0; i < s.members.size(); ++i) {
        const std::set<std::uint32_t> a(s.members[i].begin(), s.members[i].end());
        for (std::uint32_t j = i + 1; j < s.members.size(); ++j) {
            std::uint32_t n = 0;
            for (auto u : s.members[j]) n += a.count(u);
            if (n) out[{i, j}] = n;
        }
    }
    return out;
}

double fpr(const classify::MetricsReport& r) {
    const double ndg = static_cast<double>(r.gold_counts[1] + r.gold_counts[2] + r.gold_counts[3]);
    const double fp = static_cast<double>(r.classified_deg[1] + r.classified_deg[2] + r.classified_deg[3]);
    return ndg > 0 ? fp / ndg : 0.0;
}

std::vector<const classify::MetricsReport*> all_reports;

}  // namespace

int main() {
    std::printf("commvec acceptance suite\n");

    report("1", "co-occurrence equals brute-force intersection on 100 fuzzed instances", 10, [] {
        SplitMix64 rng(20240601);
        std::size_t mismatches = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const auto subs = 1 + rng.below(50);
            const auto users = 1 + rng.below(500);
            const double density = 0.01 + 0.25 * rng.uniform();
            ingest::MembershipSets sets;
            ingest::SubredditVocab vocab;
            for (std::size_t u = 0; u < users; ++u) sets.users.push_back("u" + std::to_string(u));
            sets.members.resize(subs);
            for (std::uint32_t u = 0; u < users; ++u) {
                for (std::size_t s = 0; s < subs; ++s) {
                    if (rng.bernoulli(density)) sets.members[s].push_back(u);
                }
            }
            for (std::size_t s = 0; s < subs; ++s) {
                sets.subreddits.push_back("r" + std::to_string(s));
                vocab.names.push_back(sets.subreddits.back());
                vocab.activity.push_back(sets.members[s].size());
            }
            const auto m = cooccur::build_cooccurrence(sets, vocab).matrix;
            std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> got;
            for (const auto& e : m.entries()) got[{e.i, e.j}] = e.count;
            mismatches += got != intersection_oracle(sets);
        }
        return Outcome{mismatches == 0, std::to_string(100 - mismatches) + "/100 instances exact"};
    });

    report("2a", "single-pair system reaches per-entry cost < 1e-6 within 2000 epochs", 120, [] {
        embed::EmbedConfig c;
        c.dim = 4;
        c.seed = 1;
        const double value = std::exp(1.0);
        auto state = embed::init_state(2, c);
        const std::vector<embed::TrainingEntry> entries = {{0, 1, value}, {1, 0, value}};
        double per_entry = 0.0;
        std::size_t epoch = 0;
        for (; epoch < 2000; ++epoch) {
            embed::train_epoch(state, entries, c, epoch);
            per_entry = 0.0;
            for (const auto& e : entries) {
                double dot = 0.0;
                for (std::size_t d = 0; d < c.dim; ++d) dot += state.main_row(e.row)[d] * state.context_row(e.col)[d];
                const double diff = dot + state.main_bias[e.row] + state.context_bias[e.col] - std::log(value);
                per_entry = std::max(per_entry, embed::weight(value, c) * diff * diff);
            }
            if (per_entry < 1e-6) break;
        }
        return Outcome{per_entry < 1e-6,
                       "max per-entry cost " + fmt("%.3g", per_entry) + " after " + std::to_string(epoch + 1) + " epochs"};
    });

    report("2b", "planted 3-block dump: intra-block cosine beats inter-block for >= 95% of pairs", 120, [] {
        synth::BlockSpec spec;  // 3 blocks x 20 subreddits, 5000 users
        const auto dump = synth::generate_block_dump(spec, 11);
        const auto matrix = matrix_from_lines(dump.lines, dump.bots, spec.min_comments);
        const auto trained = embed::train(matrix, desk_embed(11));
        const vecspace::EmbeddingSpace space(trained.embeddings);
        std::map<std::string, std::size_t> block;
        for (std::size_t i = 0; i < dump.subreddits.size(); ++i) block[dump.subreddits[i]] = dump.block_of[i];
        // Every (anchor, same-block partner, other-block subreddit) triple.
        std::size_t wins = 0, total = 0;
        const auto& names = space.names();
        for (std::size_t a = 0; a < names.size(); ++a) {
            for (std::size_t p = 0; p < names.size(); ++p) {
                if (p == a || block.at(names[p]) != block.at(names[a])) continue;
                const double intra = vecspace::cosine(space.unit(a), space.unit(p));
                for (std::size_t o = 0; o < names.size(); ++o) {
                    if (block.at(names[o]) == block.at(names[a])) continue;
                    wins += intra > vecspace::cosine(space.unit(a), space.unit(o));
                    ++total;
                }
            }
        }
        const double share = total ? static_cast<double>(wins) / static_cast<double>(total) : 0.0;
        return Outcome{names.size() == 60 && share >= 0.95,
                       fmt("%.4f", share) + " of " + std::to_string(total) + " comparisons over " +
                           std::to_string(names.size()) + " subreddits"};
    });

    report("3", "city x sport lattice: composition and analogy hits@5 >= 80%", 120, [] {
        const synth::LatticeSpec spec;  // 4 cities x 3 sports
        const auto dump = synth::generate_lattice_dump(spec, 7);
        const auto matrix = matrix_from_lines(dump.lines, {}, spec.min_comments);
        const auto trained = embed::train(matrix, desk_embed(7));
        const vecspace::EmbeddingSpace space(trained.embeddings);
        const auto comp = vecspace::run_eval_suite(space, dump.composition, 5, "composition");
        const auto ana = vecspace::run_eval_suite(space, dump.analogy, 5, "analogy");
        const bool ok = comp.graded() == dump.composition.size() && ana.graded() == dump.analogy.size() &&
                        comp.hit_rate() >= 0.8 && ana.hit_rate() >= 0.8;
        return Outcome{ok, "composition " + std::to_string(comp.hits_at_k) + "/" + std::to_string(comp.graded()) +
                               ", analogy " + std::to_string(ana.hits_at_k) + "/" + std::to_string(ana.graded())};
    });

    // Shared by criteria 4, 5 and 8.
    synth::BlockSpec block_spec;
    const auto block_dump = synth::generate_block_dump(block_spec, 3);
    synth::ContextSpec context_spec;  // rho 0.9, 5000 comments
    const auto corpus = synth::generate_context_corpus(context_spec, block_dump.subreddits, block_dump.block_of, 3);
    classify::ExperimentConfig exp;
    exp.seed = 3;
    classify::MetricsReport none_report, name_report, baseline_report;

    report("4", "name channel cuts the NDG false-positive rate by >= 5 pp at equal-or-better accuracy", 60, [&] {
        none_report = classify::run_experiment(corpus, classify::ContextChannel::none, nullptr, exp);
        name_report = classify::run_experiment(corpus, classify::ContextChannel::name, nullptr, exp);
        all_reports.push_back(&none_report);
        all_reports.push_back(&name_report);
        const double drop_pp = 100.0 * (fpr(none_report) - fpr(name_report));
        const bool ok = drop_pp >= 5.0 && name_report.accuracy >= none_report.accuracy;
        return Outcome{ok, "FPR " + fmt("%.2f%%", 100 * fpr(none_report)) + " -> " + fmt("%.2f%%", 100 * fpr(name_report)) +
                               " (" + fmt("%.2f", drop_pp) + " pp), accuracy " + fmt("%.4f", none_report.accuracy) +
                               " -> " + fmt("%.4f", name_report.accuracy)};
    });

    report("5", "none channel is bit-identical to the context-free baseline", 0, [&] {
        if (none_report.predictions.empty()) {
            none_report = classify::run_experiment(corpus, classify::ContextChannel::none, nullptr, exp);
        }
        baseline_report = classify::run_baseline(corpus, exp);
        all_reports.push_back(&baseline_report);
        std::size_t differ = 0;
        const auto& a = none_report.predictions;
        const auto& b = baseline_report.predictions;
        if (a.size() != b.size()) return Outcome{false, "prediction counts differ"};
        for (std::size_t i = 0; i < a.size(); ++i) {
            differ += a[i].id != b[i].id || a[i].deg != b[i].deg ||
                      std::memcmp(&a[i].score, &b[i].score, sizeof(double)) != 0;
        }
        return Outcome{differ == 0, std::to_string(a.size() - differ) + "/" + std::to_string(a.size()) + " identical"};
    });

    report("6", "folds partition exactly with per-fold DEG share within 2 pp over 20 seeds", 0, [&] {
        double worst = 0.0;
        std::size_t bad_partitions = 0;
        for (std::uint64_t seed = 1; seed <= 20; ++seed) {
            const auto c = synth::generate_context_corpus(context_spec, block_dump.subreddits, block_dump.block_of, seed);
            const auto folds = classify::stratified_folds(c, 5, seed);
            std::vector<std::size_t> hits(c.size(), 0);
            for (std::uint32_t k = 0; k < folds.k; ++k) {
                for (auto i : folds.members(k)) ++hits[i];
            }
            for (auto h : hits) bad_partitions += h != 1;
            worst = std::max(worst, classify::measure_skew(c, folds).max_label_skew_pp);
        }
        return Outcome{bad_partitions == 0 && worst <= 2.0,
                       "max label skew " + fmt("%.3f", worst) + " pp, " + std::to_string(bad_partitions) +
                           " misassigned comments"};
    });

    report("7", "two deterministic pipeline runs give byte-identical manifests", 0, [&] {
        const auto root = fs::temp_directory_path() / "commvec_acceptance";
        fs::remove_all(root);
        synth::SyntheticSpec spec;
        spec.seed = 7;
        std::string manifests[2];
        for (int run = 0; run < 2; ++run) {
            const auto dir = root / ("run" + std::to_string(run));
            synth::write_synthetic(spec, dir / "synth");
            auto j = nlohmann::json::parse(R"({
              "seed": 7, "deterministic": true, "out_dir": "out",
              "ingest": {"input": "synth/block/RC_*.ndjson", "bots": "synth/block/bots.txt"},
              "embed": {"dim": 16, "epochs": 300},
              "classify": {"enabled": true, "corpus": "synth/corpus.csv",
                           "channels": ["none", "name", "neighborhood"]}
            })");
            auto config = j.get<pipeline::PipelineConfig>();
            config.base_dir = dir;
            const auto m = pipeline::run_pipeline(config);
            manifests[run] = read_file(dir / "out" / pipeline::Layout::manifest);
            for (const auto& a : m.artifacts()) {
                if (a.path.rfind("classify/report_", 0) != 0) continue;
                auto parsed = nlohmann::json::parse(read_file(dir / "out" / a.path));
                if (std::abs(parsed["reconciled_accuracy"].get<double>() - parsed["accuracy"].get<double>()) > 1e-9) {
                    return Outcome{false, "report " + a.path + " does not reconcile"};
                }
            }
        }
        fs::remove_all(root);
        const bool same = manifests[0] == manifests[1] && !manifests[0].empty();
        return Outcome{same, same ? "manifest checksum " + to_hex(checksum_bytes(manifests[0])) : "manifests differ"};
    });

    report("8", "accuracy rebuilt from per-label %DEG cells matches to 1e-9 on every run", 0, [&] {
        double worst = 0.0;
        for (const auto* r : all_reports) worst = std::max(worst, std::abs(r->reconciled_accuracy() - r->accuracy));
        return Outcome{!all_reports.empty() && worst <= 1e-9,
                       std::to_string(all_reports.size()) + " reports, max gap " + fmt("%.3g", worst)};
    });

    const char* corpus_path = std::getenv("COMMVEC_SLUR_CORPUS");
    if (corpus_path == nullptr || !fs::exists(corpus_path)) {
        std::printf("SKIP criterion 9: full labeled corpus not supplied (set COMMVEC_SLUR_CORPUS to its CSV)\n");
    } else {
        report("9", "text-only model on the full labeled corpus: accuracy 0.80 +/- 0.02, NDNA %DEG 22.5 +/- 3 pp", 0, [&] {
            const auto full = classify::load_corpus(corpus_path);
            classify::ExperimentConfig c;
            const auto r = classify::run_baseline(full, c);
            const double ndna = 100.0 * r.pct_classified_deg(classify::GoldLabel::NDNA);
            const bool ok = std::abs(r.accuracy - 0.80) <= 0.02 && std::abs(ndna - 22.5) <= 3.0;
            return Outcome{ok, "accuracy " + fmt("%.4f", r.accuracy) + ", NDNA %DEG " + fmt("%.2f", ndna)};
        });
    }

    std::printf("%s: %d failing criteria\n", failures ? "FAILED" : "OK", failures);
    return failures ? 1 : 0;
}
