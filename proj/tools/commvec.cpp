// commvec: command-line front end for every stage.

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "commvec/classify.hpp"
#include "commvec/common.hpp"
#include "commvec/cooccur.hpp"
#include "commvec/embed.hpp"
#include "commvec/ingest.hpp"
#include "commvec/pipeline.hpp"
#include "commvec/synthetic.hpp"
#include "commvec/vecspace.hpp"

namespace {

using namespace commvec;
using nlohmann::json;

void write_json(const std::string& path, const json& j) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(2) << "\n";
    } else {
        write_file(path, j.dump(2) + "\n");
    }
}

std::string tsv(const auto& writable) {
    std::ostringstream ss;
    writable.write_tsv(ss);
    return ss.str();
}

void print_scored(const std::vector<vecspace::Scored>& items) {
    for (const auto& s : items) std::cout << std::fixed << std::setprecision(6) << s.score << "\t" << s.name << "\n";
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    for (const auto& part : split(text, ',')) {
        const auto t = std::string(trim(part));
        if (!t.empty()) out.push_back(std::stod(t));
    }
    return out;
}

std::optional<double> parse_l2(const std::string& text) {
    if (text == "auto") return std::nullopt;
    return std::stod(text);
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
    std::string input;
    std::string bots;
    bool bot_suffix = false;
    std::uint32_t min_comments = 10;
    std::size_t top = 10400;
    unsigned threads = 0;
    std::string out;
};

int run_ingest(const IngestArgs& a) {
    const auto paths = ingest::expand_glob(a.input);
    if (paths.empty()) throw MissingInputError("no input files match " + a.input);
    auto sharded = ingest::ingest_files(paths, a.threads);
    auto table = std::move(sharded.table);
    std::uint64_t bot_comments = 0;
    if (!a.bots.empty() || a.bot_suffix) {
        const auto bots = a.bots.empty() ? ingest::BotList({}, true) : ingest::BotList::load(a.bots, a.bot_suffix);
        auto filtered = ingest::filter_bots(table, bots);
        bot_comments = table.total() - filtered.total();
        table = std::move(filtered);
    }
    const auto sets = ingest::select_active_memberships(table, a.min_comments);
    const auto top = ingest::select_top_subreddits(sets, a.top);
    if (top.limit_exceeds_available) {
        sharded.report.warnings.push_back("top limit " + std::to_string(a.top) + " exceeds the " +
                                          std::to_string(top.vocab.size()) + " subreddits available");
    }
    const std::filesystem::path out(a.out);
    write_file(out / "activity.tsv", tsv(table));
    write_file(out / "memberships.tsv", tsv(top.sets));
    write_file(out / "vocab.tsv", tsv(top.vocab));
    json report = sharded.report.to_json();
    report["bot_comments_removed"] = bot_comments;
    report["active_users"] = top.sets.users.size();
    report["subreddits_seen"] = sets.subreddits.size();
    report["vocab_size"] = top.vocab.size();
    write_json((out / "ingest_report.json").string(), report);
    std::cout << "records " << sharded.report.lines << ", accepted " << sharded.report.accepted << ", skipped "
              << sharded.report.skipped_total() << ", errors " << sharded.report.errors << "\n"
              << "vocabulary " << top.vocab.size() << " subreddits, " << top.sets.users.size() << " active users\n";
    for (const auto& w : sharded.report.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

// --------------------------------------------------------------- cooccur

struct CooccurArgs {
    std::string memberships;
    std::string vocab;
    std::size_t cap = 0;
    unsigned threads = 0;
    std::string out;
    std::string tsv_out;
    std::string report;
};

int run_cooccur(const CooccurArgs& a) {
    std::istringstream min(read_file(a.memberships));
    std::istringstream vin(read_file(a.vocab));
    const auto sets = ingest::MembershipSets::read_tsv(min);
    const auto vocab = ingest::SubredditVocab::read_tsv(vin);
    auto built = cooccur::build_cooccurrence(sets, vocab, {a.cap, a.threads});
    built.matrix.save(a.out);
    if (!a.tsv_out.empty()) write_file(a.tsv_out, tsv(built.matrix));
    if (!a.report.empty()) write_json(a.report, built.report.to_json());
    std::cout << built.matrix.size() << " subreddits, " << built.matrix.entries().size() << " nonzero pairs\n";
    if (!built.report.empty_rows.empty()) {
        std::cerr << "warning: " << built.report.empty_rows.size() << " subreddits co-occur with nothing\n";
    }
    return 0;
}

// ----------------------------------------------------------------- embed

struct EmbedArgs {
    std::string matrix;
    embed::EmbedConfig config;
    bool parallel = false;
    std::string finalize = "sum";
    std::string out;
    std::string loss;
};

int run_embed(EmbedArgs a) {
    a.config.deterministic = !a.parallel;
    a.config.finalize = a.finalize == "main" ? embed::FinalVectors::main_only : embed::FinalVectors::sum;
    const auto matrix = cooccur::CooccurrenceMatrix::load(a.matrix);
    const auto result = embed::train(matrix, a.config);
    result.embeddings.save(a.out);
    if (!a.loss.empty()) write_json(a.loss, json{{"loss", result.loss_trace}});
    if (!result.loss_trace.empty()) {
        std::cout << "loss " << result.loss_trace.front() << " -> " << result.loss_trace.back() << " over "
                  << result.loss_trace.size() << " epochs\n";
    }
    return 0;
}

// ----------------------------------------------------------- query / eval

struct QueryArgs {
    std::string embeddings;
    std::vector<std::string> names;
    std::size_t k = 10;
};

int run_query(const std::string& mode, const QueryArgs& a) {
    const auto matrix = embed::EmbeddingMatrix::load(a.embeddings);
    const vecspace::EmbeddingSpace space(matrix);
    const auto& n = a.names;
    auto need = [&](std::size_t count) {
        if (n.size() != count) {
            throw CLI::ValidationError("query " + mode, "expects " + std::to_string(count) + " names");
        }
    };
    if (mode == "sim") {
        need(2);
        std::cout << std::fixed << std::setprecision(6) << space.similarity(n[0], n[1]) << "\n";
    } else if (mode == "nn") {
        need(1);
        print_scored(space.nearest_neighbors(n[0], a.k));
    } else if (mode == "compose") {
        need(2);
        print_scored(space.compose(n[0], n[1], a.k));
    } else {
        need(3);
        print_scored(space.analogy(n[0], n[1], n[2], a.k));
    }
    return 0;
}

struct EvalArgs {
    std::string embeddings;
    std::string suite;
    std::string type = "composition";
    std::size_t k = 5;
    std::string report;
};

int run_eval(const EvalArgs& a) {
    const auto matrix = embed::EmbeddingMatrix::load(a.embeddings);
    const vecspace::EmbeddingSpace space(matrix);
    const auto tests = vecspace::load_suite(a.suite, vecspace::parse_suite_type(a.type));
    const auto report = vecspace::run_eval_suite(space, tests, a.k, std::filesystem::path(a.suite).stem().string());
    if (!a.report.empty()) write_json(a.report, report.to_json());
    std::cout << "tests " << report.total << ", skipped " << report.skips << ", hits@1 " << report.hits_at_1 << ", hits@"
              << a.k << " " << report.hits_at_k << " (" << std::fixed << std::setprecision(1) << 100.0 * report.hit_rate()
              << "% of graded)\n";
    return 0;
}

// -------------------------------------------------------------- classify

struct ClassifyArgs {
    std::string corpus;
    std::string channel = "none";
    std::string embeddings;
    std::size_t folds = 5;
    std::uint64_t seed = 1;
    std::string l2 = "auto";
    std::string l2_sweep;
    std::size_t neighbors = 5;
    std::size_t max_ngram = 3;
    bool sequential = false;
    std::string baseline;
    std::string report;
};

void print_metrics(const classify::MetricsReport& r) {
    std::cout << std::fixed << std::setprecision(4) << "channel " << r.channel << ": accuracy " << r.accuracy
              << ", macro P " << r.macro_precision << ", macro R " << r.macro_recall << ", macro F1 " << r.macro_f1 << "\n";
    std::cout << "% classified DEG:";
    for (auto l : classify::kGoldLabels) {
        std::cout << " " << classify::to_string(l) << " " << std::setprecision(2) << 100.0 * r.pct_classified_deg(l);
    }
    std::cout << "\n";
    if (r.context_fallbacks) std::cout << "name-only fallbacks: " << r.context_fallbacks << " comments\n";
    if (r.flips) {
        const auto& o = r.flips->overall;
        std::cout << "vs " << r.flips->baseline << ": fixed " << o.fixed_by_context << ", broken " << o.broken_by_context
                  << ", both correct " << o.both_correct << ", both wrong " << o.both_wrong << "\n";
    }
}

int run_classify(const ClassifyArgs& a) {
    const auto corpus = classify::load_corpus(a.corpus);
    const auto channel = classify::parse_channel(a.channel);
    std::optional<embed::EmbeddingMatrix> matrix;
    std::optional<vecspace::EmbeddingSpace> space;
    if (!a.embeddings.empty()) {
        matrix = embed::EmbeddingMatrix::load(a.embeddings);
        space.emplace(*matrix);
    } else if (channel == classify::ContextChannel::neighborhood) {
        throw CLI::ValidationError("--embeddings", "required for the neighborhood channel");
    }
    classify::ExperimentConfig config;
    config.folds = a.folds;
    config.seed = a.seed;
    config.neighbor_k = a.neighbors;
    config.max_ngram = a.max_ngram;
    config.parallel_folds = !a.sequential;
    config.logreg.l2 = parse_l2(a.l2);

    std::optional<std::vector<classify::Prediction>> baseline;
    std::string baseline_name;
    if (!a.baseline.empty()) {
        const auto j = json::parse(read_file(a.baseline));
        baseline = classify::read_predictions(j);
        baseline_name = j.value("channel", a.baseline);
    }
    auto run = [&](const classify::ExperimentConfig& c) {
        auto r = classify::run_experiment(corpus, channel, space ? &*space : nullptr, c);
        if (baseline) r.flips = classify::compare_runs(corpus, *baseline, r.predictions, baseline_name);
        return r;
    };

    if (!a.l2_sweep.empty()) {
        json sweep = json::array();
        for (double l2 : parse_list(a.l2_sweep)) {
            auto c = config;
            c.logreg.l2 = l2;
            const auto r = run(c);
            std::cout << "l2 " << std::defaultfloat << l2 << "\n";
            print_metrics(r);
            sweep.push_back({{"l2", l2}, {"report", r.to_json()}});
        }
        if (!a.report.empty()) write_json(a.report, json{{"channel", a.channel}, {"sweep", sweep}});
        return 0;
    }
    const auto r = run(config);
    print_metrics(r);
    if (!a.report.empty()) write_json(a.report, r.to_json());
    return 0;
}

// -------------------------------------------------------------- pipeline

int run_pipeline_cmd(const std::string& config_path, const std::vector<std::string>& overrides) {
    auto j = json::parse(read_file(config_path), nullptr, false);
    if (j.is_discarded()) throw FormatError("config " + config_path + " is not valid JSON");
    for (const auto& o : overrides) pipeline::apply_override(j, o);
    auto config = j.get<pipeline::PipelineConfig>();
    const std::filesystem::path cp(config_path);
    config.base_dir = cp.has_parent_path() ? cp.parent_path() : std::filesystem::path(".");
    const auto manifest = pipeline::run_pipeline(config, [](const std::string& msg) { std::cerr << msg << "\n"; });
    const auto artifacts = manifest.artifacts();
    std::cout << artifacts.size() << " artifacts written to " << config.resolve(config.out_dir).string() << "\n";
    for (const auto& a : artifacts) std::cout << a.checksum << "  " << a.path << "\n";
    return 0;
}

int run_synth(const std::string& spec_path, const std::string& out, std::optional<std::uint64_t> seed) {
    synth::SyntheticSpec spec;
    if (!spec_path.empty()) spec = json::parse(read_file(spec_path)).get<synth::SyntheticSpec>();
    if (seed) spec.seed = *seed;
    const auto files = synth::write_synthetic(spec, out);
    for (const auto& f : files) std::cout << f.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Community embeddings from user co-occurrence, and context-aware slur-usage classification"};
    app.require_subcommand(1);

    IngestArgs ia;
    auto* ingest_cmd = app.add_subcommand("ingest", "Aggregate NDJSON comment dumps into membership sets");
    ingest_cmd->add_option("--input", ia.input, "Dump glob (plain or .gz)")->required();
    ingest_cmd->add_option("--bots", ia.bots, "Bot list, one account per line");
    ingest_cmd->add_flag("--bot-suffix", ia.bot_suffix, "Also drop accounts whose name ends in 'bot'");
    ingest_cmd->add_option("--min-comments", ia.min_comments, "Comments needed for membership")->capture_default_str();
    ingest_cmd->add_option("--top", ia.top, "Subreddits kept, by active users")->capture_default_str();
    ingest_cmd->add_option("--threads", ia.threads, "Reader threads (0 = hardware)");
    ingest_cmd->add_option("--out", ia.out, "Output directory")->required();

    CooccurArgs ca;
    auto* cooccur_cmd = app.add_subcommand("cooccur", "Build the subreddit co-occurrence matrix");
    cooccur_cmd->add_option("--memberships", ca.memberships)->required();
    cooccur_cmd->add_option("--vocab", ca.vocab)->required();
    cooccur_cmd->add_option("--max-memberships", ca.cap, "Leave out users in more subreddits than this (0 = no cap)");
    cooccur_cmd->add_option("--threads", ca.threads);
    cooccur_cmd->add_option("--out", ca.out, "Matrix file")->required();
    cooccur_cmd->add_option("--tsv", ca.tsv_out, "Also write name_i<TAB>name_j<TAB>count");
    cooccur_cmd->add_option("--report", ca.report, "Build report JSON");

    EmbedArgs ea;
    auto* embed_cmd = app.add_subcommand("embed", "Train community embeddings");
    embed_cmd->add_option("--matrix", ea.matrix)->required();
    embed_cmd->add_option("--dim", ea.config.dim)->capture_default_str();
    embed_cmd->add_option("--epochs", ea.config.epochs)->capture_default_str();
    embed_cmd->add_option("--lr", ea.config.learning_rate)->capture_default_str();
    embed_cmd->add_option("--x-max", ea.config.x_max)->capture_default_str();
    embed_cmd->add_option("--alpha", ea.config.alpha)->capture_default_str();
    embed_cmd->add_option("--seed", ea.config.seed)->capture_default_str();
    embed_cmd->add_flag("--deterministic", "Single sequential updater (default)");
    embed_cmd->add_flag("--parallel", ea.parallel, "Lock-free concurrent updates; not bit-reproducible");
    embed_cmd->add_option("--threads", ea.config.threads, "Threads for --parallel (0 = hardware)");
    embed_cmd->add_option("--finalize", ea.finalize, "sum (w + context) or main (w only)")
        ->check(CLI::IsMember({"sum", "main"}))
        ->capture_default_str();
    embed_cmd->add_option("--out", ea.out, "Embedding file (.bin for binary, text otherwise)")->required();
    embed_cmd->add_option("--loss", ea.loss, "Per-epoch loss trace JSON");

    QueryArgs qa;
    std::string query_mode;
    auto* query_cmd = app.add_subcommand("query", "Explore the embedding space");
    query_cmd->add_option("mode", query_mode, "sim | nn | compose | analogy")
        ->required()
        ->check(CLI::IsMember({"sim", "nn", "compose", "analogy"}));
    query_cmd->add_option("names", qa.names, "Subreddit names")->required();
    query_cmd->add_option("--embeddings", qa.embeddings)->required();
    query_cmd->add_option("--k", qa.k)->capture_default_str();

    EvalArgs va;
    auto* eval_cmd = app.add_subcommand("eval", "Score a composition or analogy suite");
    eval_cmd->add_option("--embeddings", va.embeddings)->required();
    eval_cmd->add_option("--suite", va.suite)->required();
    eval_cmd->add_option("--type", va.type)->check(CLI::IsMember({"composition", "analogy"}))->capture_default_str();
    eval_cmd->add_option("--k", va.k)->capture_default_str();
    eval_cmd->add_option("--report", va.report);

    ClassifyArgs la;
    auto* classify_cmd = app.add_subcommand("classify", "Cross-validated DEG vs NDG classification");
    classify_cmd->add_option("--corpus", la.corpus)->required();
    classify_cmd->add_option("--channel", la.channel)
        ->check(CLI::IsMember({"none", "name", "neighborhood"}))
        ->capture_default_str();
    classify_cmd->add_option("--embeddings", la.embeddings, "Needed for the neighborhood channel");
    classify_cmd->add_option("--folds", la.folds)->capture_default_str();
    classify_cmd->add_option("--seed", la.seed)->capture_default_str();
    classify_cmd->add_option("--l2", la.l2, "Penalty on mean log-loss, or 'auto' for 1/n")->capture_default_str();
    classify_cmd->add_option("--l2-sweep", la.l2_sweep, "Comma-separated penalties to try");
    classify_cmd->add_option("--neighbors", la.neighbors)->capture_default_str();
    classify_cmd->add_option("--max-ngram", la.max_ngram)->capture_default_str();
    classify_cmd->add_flag("--sequential", la.sequential, "Train folds one after another");
    classify_cmd->add_option("--baseline", la.baseline, "Report JSON to build a flip table against");
    classify_cmd->add_option("--report", la.report, "Report JSON ('-' for stdout)");

    auto* pipeline_cmd = app.add_subcommand("pipeline", "Configured end-to-end runs and synthetic data");
    pipeline_cmd->require_subcommand(1);
    std::string config_path;
    std::vector<std::string> overrides;
    auto* run_cmd = pipeline_cmd->add_subcommand("run", "Run the stages enabled in a config");
    run_cmd->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--set", overrides, "Override a config value, e.g. embed.epochs=50");
    std::string spec_path;
    std::string synth_out;
    std::optional<std::uint64_t> synth_seed;
    auto* synth_cmd = pipeline_cmd->add_subcommand("synth", "Write synthetic dumps, suites and corpus");
    synth_cmd->add_option("--spec", spec_path, "Spec JSON (defaults if omitted)")->check(CLI::ExistingFile);
    synth_cmd->add_option("--out", synth_out)->required();
    synth_cmd->add_option("--seed", synth_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (ingest_cmd->parsed()) return run_ingest(ia);
        if (cooccur_cmd->parsed()) return run_cooccur(ca);
        if (embed_cmd->parsed()) return run_embed(ea);
        if (query_cmd->parsed()) return run_query(query_mode, qa);
        if (eval_cmd->parsed()) return run_eval(va);
        if (classify_cmd->parsed()) return run_classify(la);
        if (run_cmd->parsed()) return run_pipeline_cmd(config_path, overrides);
        if (synth_cmd->parsed()) return run_synth(spec_path, synth_out, synth_seed);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const vecspace::UnknownNameError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
