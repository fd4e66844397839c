#include "commvec/pipeline.hpp"

#include <chrono>
#include <set>
#include <sstream>

#include "commvec/common.hpp"
#include "commvec/ingest.hpp"
#include "commvec/text.hpp"
#include "commvec/vecspace.hpp"

namespace commvec::pipeline {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
    }
}

std::set<std::string> keys_of(const json& j, std::set<std::string> extra) {
    for (const auto& [key, value] : j.items()) extra.insert(key);
    return extra;
}

json without(json j, std::initializer_list<const char*> keys) {
    for (const auto* k : keys) j.erase(k);
    return j;
}

Artifact describe(const std::filesystem::path& file, const std::string& shown) {
    return {shown, to_hex(checksum_file(file)), static_cast<std::uint64_t>(std::filesystem::file_size(file))};
}

std::string shown_path(const std::filesystem::path& p, const std::filesystem::path& base) {
    const auto rel = p.lexically_normal().lexically_relative(base.lexically_normal());
    if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
    return p.generic_string();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

template <typename F>
std::string to_text(F&& write) {
    std::ostringstream ss;
    write(ss);
    return ss.str();
}

}  // namespace

// ------------------------------------------------------------------ config

void PipelineConfig::propagate() {
    embed.config.seed = seed;
    embed.config.deterministic = deterministic;
    classify.experiment.seed = seed;
}

std::filesystem::path PipelineConfig::resolve(const std::string& path) const {
    const std::filesystem::path p(path);
    return p.is_absolute() ? p : base_dir / p;
}

void to_json(json& j, const PipelineConfig& c) {
    json channels = json::array();
    for (auto ch : c.classify.channels) channels.push_back(std::string(classify::to_string(ch)));
    json suites = json::array();
    for (const auto& s : c.eval.suites) suites.push_back({{"path", s.path}, {"type", std::string(vecspace::to_string(s.type))}});

    json embed_block = without(json(c.embed.config), {"seed", "deterministic"});
    embed_block["enabled"] = c.embed.enabled;
    embed_block["matrix"] = c.embed.matrix;
    embed_block["write_binary"] = c.embed.write_binary;

    json classify_block = without(json(c.classify.experiment), {"seed"});
    classify_block["enabled"] = c.classify.enabled;
    classify_block["corpus"] = c.classify.corpus;
    classify_block["embeddings"] = c.classify.embeddings;
    classify_block["channels"] = channels;
    classify_block["baseline"] = std::string(classify::to_string(c.classify.baseline));

    j = {{"seed", c.seed},
         {"deterministic", c.deterministic},
         {"out_dir", c.out_dir},
         {"ingest",
          {{"enabled", c.ingest.enabled},
           {"input", c.ingest.input},
           {"bots", c.ingest.bots},
           {"bot_suffix_heuristic", c.ingest.bot_suffix_heuristic},
           {"min_comments", c.ingest.min_comments},
           {"top", c.ingest.top},
           {"threads", c.ingest.threads}}},
         {"cooccur",
          {{"enabled", c.cooccur.enabled},
           {"memberships", c.cooccur.memberships},
           {"vocab", c.cooccur.vocab},
           {"max_memberships_per_user", c.cooccur.max_memberships_per_user},
           {"threads", c.cooccur.threads}}},
         {"embed", embed_block},
         {"eval", {{"enabled", c.eval.enabled}, {"embeddings", c.eval.embeddings}, {"suites", suites}, {"k", c.eval.k}}},
         {"classify", classify_block}};
}

void from_json(const json& j, PipelineConfig& c) {
    check_keys(j, {"seed", "deterministic", "out_dir", "ingest", "cooccur", "embed", "eval", "classify"}, "config");
    c.seed = j.value("seed", c.seed);
    c.deterministic = j.value("deterministic", c.deterministic);
    c.out_dir = j.value("out_dir", c.out_dir);

    if (j.contains("ingest")) {
        const auto& b = j["ingest"];
        check_keys(b, {"enabled", "input", "bots", "bot_suffix_heuristic", "min_comments", "top", "threads"}, "ingest");
        auto& s = c.ingest;
        s.enabled = b.value("enabled", s.enabled);
        s.input = b.value("input", s.input);
        s.bots = b.value("bots", s.bots);
        s.bot_suffix_heuristic = b.value("bot_suffix_heuristic", s.bot_suffix_heuristic);
        s.min_comments = b.value("min_comments", s.min_comments);
        s.top = b.value("top", s.top);
        s.threads = b.value("threads", s.threads);
    }
    if (j.contains("cooccur")) {
        const auto& b = j["cooccur"];
        check_keys(b, {"enabled", "memberships", "vocab", "max_memberships_per_user", "threads"}, "cooccur");
        auto& s = c.cooccur;
        s.enabled = b.value("enabled", s.enabled);
        s.memberships = b.value("memberships", s.memberships);
        s.vocab = b.value("vocab", s.vocab);
        s.max_memberships_per_user = b.value("max_memberships_per_user", s.max_memberships_per_user);
        s.threads = b.value("threads", s.threads);
    }
    if (j.contains("embed")) {
        const auto& b = j["embed"];
        auto allowed = keys_of(without(json(embed::EmbedConfig{}), {"seed", "deterministic"}), {"enabled", "matrix", "write_binary"});
        check_keys(b, allowed, "embed");
        auto& s = c.embed;
        s.enabled = b.value("enabled", s.enabled);
        s.matrix = b.value("matrix", s.matrix);
        s.write_binary = b.value("write_binary", s.write_binary);
        from_json(without(b, {"enabled", "matrix", "write_binary"}), s.config);
    }
    if (j.contains("eval")) {
        const auto& b = j["eval"];
        check_keys(b, {"enabled", "embeddings", "suites", "k"}, "eval");
        auto& s = c.eval;
        s.enabled = b.value("enabled", s.enabled);
        s.embeddings = b.value("embeddings", s.embeddings);
        s.k = b.value("k", s.k);
        if (b.contains("suites")) {
            s.suites.clear();
            for (const auto& suite : b["suites"]) {
                check_keys(suite, {"path", "type"}, "eval.suites[]");
                s.suites.push_back({suite.at("path").get<std::string>(),
                                    vecspace::parse_suite_type(suite.at("type").get<std::string>())});
            }
        }
    }
    if (j.contains("classify")) {
        const auto& b = j["classify"];
        auto allowed = keys_of(without(json(classify::ExperimentConfig{}), {"seed"}),
                               {"enabled", "corpus", "embeddings", "channels", "baseline"});
        check_keys(b, allowed, "classify");
        auto& s = c.classify;
        s.enabled = b.value("enabled", s.enabled);
        s.corpus = b.value("corpus", s.corpus);
        s.embeddings = b.value("embeddings", s.embeddings);
        if (b.contains("channels")) {
            s.channels.clear();
            for (const auto& ch : b["channels"]) s.channels.push_back(classify::parse_channel(ch.get<std::string>()));
        }
        if (b.contains("baseline")) s.baseline = classify::parse_channel(b["baseline"].get<std::string>());
        from_json(without(b, {"enabled", "corpus", "embeddings", "channels", "baseline"}), s.experiment);
    }
    c.propagate();
}

PipelineConfig load_config(const std::filesystem::path& path) {
    const auto text = read_file(path);
    const auto j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw FormatError("config " + path.string() + " is not valid JSON");
    PipelineConfig c = j.get<PipelineConfig>();
    c.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return c;
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw std::invalid_argument("override must look like key.path=value: " + assignment);
    const auto key = assignment.substr(0, eq);
    const auto raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &config;
    const auto parts = split(key, '.');
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->contains(parts[i])) (*node)[parts[i]] = json::object();
        node = &(*node)[parts[i]];
        if (!node->is_object()) throw std::invalid_argument("override " + key + ": '" + parts[i] + "' is not an object");
    }
    (*node)[parts.back()] = value;
}

// ---------------------------------------------------------------- manifest

std::vector<Artifact> Manifest::artifacts() const {
    std::vector<Artifact> out;
    for (const auto& s : stages) out.insert(out.end(), s.outputs.begin(), s.outputs.end());
    return out;
}

json Manifest::to_json() const {
    auto list = [](const std::vector<Artifact>& items) {
        json a = json::array();
        for (const auto& x : items) a.push_back({{"path", x.path}, {"fnv1a64", x.checksum}, {"bytes", x.bytes}});
        return a;
    };
    json st = json::array();
    for (const auto& s : stages) st.push_back({{"stage", s.name}, {"inputs", list(s.inputs)}, {"outputs", list(s.outputs)}});
    return {{"tool", "commvec"},
            {"version", version},
            {"seed", seed},
            {"deterministic", deterministic},
            {"formats",
             {{"activity", "commvec-activity 1"},
              {"memberships", "commvec-memberships 1"},
              {"vocab", "commvec-vocab 1"},
              {"matrix", "CVCOOC01"},
              {"embeddings_binary", "CVEMB001"},
              {"stop_words", text::kStopWordListVersion}}},
            {"stages", st},
            {"artifacts", list(artifacts())}};
}

// -------------------------------------------------------------------- run

Manifest run_pipeline(const PipelineConfig& input_config, const Logger& log) {
    PipelineConfig config = input_config;
    config.propagate();
    const auto out = config.resolve(config.out_dir);
    std::filesystem::create_directories(out);
    auto say = [&](const std::string& msg) {
        if (log) log(msg);
    };

    Manifest manifest;
    manifest.seed = config.seed;
    manifest.deterministic = config.deterministic;

    auto emit = [&](StageRecord& rec, const char* rel, const std::string& contents) {
        write_file(out / rel, contents);
        rec.outputs.push_back(describe(out / rel, rel));
    };
    auto consumed = [&](StageRecord& rec, const std::filesystem::path& p) {
        rec.inputs.push_back(describe(p, shown_path(p, config.base_dir)));
    };
    auto require = [&](const std::string& configured, const char* default_rel, const char* what,
                       const char* how) -> std::filesystem::path {
        const auto p = configured.empty() ? out / default_rel : config.resolve(configured);
        if (!std::filesystem::exists(p)) {
            throw MissingInputError(std::string("missing dependency: ") + what + " (" + p.string() + "); " + how);
        }
        return p;
    };
    auto run_stage = [&](const std::string& name, auto&& body) {
        StageRecord rec{name, {}, {}};
        const auto start = std::chrono::steady_clock::now();
        say("[" + name + "] start");
        try {
            body(rec);
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(name, e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        say("[" + name + "] done in " + std::to_string(secs) + " s");
        manifest.stages.push_back(std::move(rec));
    };

    {
        StageRecord rec{"config", {}, {}};
        emit(rec, Layout::resolved_config, dump(json(config)));
        manifest.stages.push_back(std::move(rec));
    }

    std::optional<ingest::TopSelection> selection;
    std::optional<cooccur::CooccurrenceMatrix> matrix;
    std::optional<embed::EmbeddingMatrix> embeddings;

    if (config.ingest.enabled) {
        run_stage("ingest", [&](StageRecord& rec) {
            const auto& s = config.ingest;
            if (s.input.empty()) throw std::invalid_argument("ingest.input is not set");
            const auto paths = ingest::expand_glob(config.resolve(s.input).string());
            if (paths.empty()) throw MissingInputError("no input files match " + s.input);
            for (const auto& p : paths) {
                if (!std::filesystem::exists(p)) throw MissingInputError("input file not found: " + p.string());
                consumed(rec, p);
            }
            auto sharded = ingest::ingest_files(paths, s.threads);
            auto table = std::move(sharded.table);
            std::uint64_t bot_comments = 0;
            if (!s.bots.empty() || s.bot_suffix_heuristic) {
                ingest::BotList bots;
                if (!s.bots.empty()) {
                    const auto bp = config.resolve(s.bots);
                    consumed(rec, bp);
                    bots = ingest::BotList::load(bp, s.bot_suffix_heuristic);
                } else {
                    bots = ingest::BotList({}, true);
                }
                auto filtered = ingest::filter_bots(table, bots);
                bot_comments = table.total() - filtered.total();
                table = std::move(filtered);
            }
            const auto sets = ingest::select_active_memberships(table, s.min_comments);
            selection = ingest::select_top_subreddits(sets, s.top);
            if (selection->limit_exceeds_available) {
                sharded.report.warnings.push_back("top limit " + std::to_string(s.top) + " exceeds the " +
                                                  std::to_string(selection->vocab.size()) + " subreddits available");
            }
            json report = sharded.report.to_json();
            report["bot_comments_removed"] = bot_comments;
            report["active_users"] = selection->sets.users.size();
            report["subreddits_seen"] = sets.subreddits.size();
            report["vocab_size"] = selection->vocab.size();
            report["min_comments"] = s.min_comments;

            emit(rec, Layout::activity, to_text([&](std::ostream& o) { table.write_tsv(o); }));
            emit(rec, Layout::memberships, to_text([&](std::ostream& o) { selection->sets.write_tsv(o); }));
            emit(rec, Layout::vocab, to_text([&](std::ostream& o) { selection->vocab.write_tsv(o); }));
            emit(rec, Layout::ingest_report, dump(report));
            say("[ingest] " + std::to_string(sharded.report.accepted) + " comments, " +
                std::to_string(selection->vocab.size()) + " subreddits");
        });
    }

    if (config.cooccur.enabled) {
        run_stage("cooccur", [&](StageRecord& rec) {
            const auto& s = config.cooccur;
            if (!selection) {
                const auto mp = require(s.memberships, Layout::memberships, "membership sets",
                                        "enable the ingest stage or set cooccur.memberships");
                const auto vp = require(s.vocab, Layout::vocab, "subreddit vocabulary",
                                        "enable the ingest stage or set cooccur.vocab");
                consumed(rec, mp);
                consumed(rec, vp);
                std::istringstream min(read_file(mp));
                std::istringstream vin(read_file(vp));
                selection = ingest::TopSelection{ingest::SubredditVocab::read_tsv(vin), ingest::MembershipSets::read_tsv(min), false};
            }
            auto built = cooccur::build_cooccurrence(selection->sets, selection->vocab,
                                                     {s.max_memberships_per_user, s.threads});
            matrix = std::move(built.matrix);
            emit(rec, Layout::matrix, matrix->serialize());
            emit(rec, Layout::cooccur_report, dump(built.report.to_json()));
            say("[cooccur] " + std::to_string(matrix->entries().size()) + " nonzero pairs");
        });
    }

    if (config.embed.enabled) {
        run_stage("embed", [&](StageRecord& rec) {
            const auto& s = config.embed;
            if (!matrix) {
                const auto p = require(s.matrix, Layout::matrix, "co-occurrence matrix",
                                       "enable the cooccur stage or set embed.matrix");
                consumed(rec, p);
                matrix = cooccur::CooccurrenceMatrix::load(p);
            }
            auto result = embed::train(*matrix, s.config);
            embeddings = std::move(result.embeddings);
            emit(rec, Layout::embeddings_text, embeddings->to_text());
            if (s.write_binary) emit(rec, Layout::embeddings_binary, embeddings->to_binary());
            emit(rec, Layout::loss_trace, dump(json{{"loss", result.loss_trace}}));
            if (!result.loss_trace.empty()) {
                say("[embed] loss " + std::to_string(result.loss_trace.front()) + " -> " +
                    std::to_string(result.loss_trace.back()));
            }
        });
    }

    auto need_embeddings = [&](StageRecord& rec, const std::string& configured, const char* key) {
        if (embeddings) return;
        std::filesystem::path p;
        if (!configured.empty()) {
            p = config.resolve(configured);
        } else {
            p = out / Layout::embeddings_binary;
            if (!std::filesystem::exists(p)) p = out / Layout::embeddings_text;
        }
        if (!std::filesystem::exists(p)) {
            throw MissingInputError("missing dependency: embeddings (" + p.string() + "); enable the embed stage or set " + key);
        }
        consumed(rec, p);
        embeddings = embed::EmbeddingMatrix::load(p);
    };

    if (config.eval.enabled) {
        run_stage("eval", [&](StageRecord& rec) {
            const auto& s = config.eval;
            need_embeddings(rec, s.embeddings, "eval.embeddings");
            const vecspace::EmbeddingSpace space(*embeddings);
            for (const auto& suite : s.suites) {
                const auto p = config.resolve(suite.path);
                consumed(rec, p);
                const auto tests = vecspace::load_suite(p, suite.type);
                const auto stem = p.stem().string();
                auto report = vecspace::run_eval_suite(space, tests, s.k, stem);
                const std::string rel = "eval/" + stem + ".json";
                emit(rec, rel.c_str(), dump(report.to_json()));
                say("[eval] " + stem + ": hits@" + std::to_string(s.k) + " " + std::to_string(report.hits_at_k) + "/" +
                    std::to_string(report.graded()) + ", skipped " + std::to_string(report.skips));
            }
        });
    }

    if (config.classify.enabled) {
        run_stage("classify", [&](StageRecord& rec) {
            const auto& s = config.classify;
            if (s.corpus.empty()) throw std::invalid_argument("classify.corpus is not set");
            const auto cp = config.resolve(s.corpus);
            if (!std::filesystem::exists(cp)) throw MissingInputError("corpus not found: " + cp.string());
            consumed(rec, cp);
            const auto corpus = classify::load_corpus(cp);

            std::vector<classify::ContextChannel> order = {s.baseline};
            for (auto ch : s.channels) {
                if (ch != s.baseline) order.push_back(ch);
            }
            std::optional<vecspace::EmbeddingSpace> space;
            for (auto ch : order) {
                if (ch == classify::ContextChannel::neighborhood && !space) {
                    need_embeddings(rec, s.embeddings, "classify.embeddings");
                    space.emplace(*embeddings);
                }
            }
            std::optional<classify::MetricsReport> base;
            for (auto ch : order) {
                auto report = classify::run_experiment(corpus, ch, space ? &*space : nullptr, s.experiment);
                if (base) {
                    report.flips = classify::compare_runs(corpus, base->predictions, report.predictions,
                                                          std::string(classify::to_string(s.baseline)));
                }
                const std::string rel = "classify/report_" + std::string(classify::to_string(ch)) + ".json";
                emit(rec, rel.c_str(), dump(report.to_json()));
                std::ostringstream msg;
                msg << "[classify] " << classify::to_string(ch) << ": accuracy " << report.accuracy << ", macro F1 "
                    << report.macro_f1;
                say(msg.str());
                if (!base) base = std::move(report);
            }
        });
    }

    write_file(out / Layout::manifest, dump(manifest.to_json()));
    return manifest;
}

}  // namespace commvec::pipeline
