#include "commvec/classify.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <future>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "commvec/common.hpp"
#include "commvec/text.hpp"

namespace commvec::classify {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// RFC 4180 records; quoted fields may contain separators, quotes ("") and
// newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!field.empty()) throw FormatError("csv line " + std::to_string(line) + ": quote inside unquoted field");
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                record.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                break;
            case '\n':
                if (field_started || !field.empty() || !record.empty()) {
                    record.push_back(std::move(field));
                    records.push_back(std::move(record));
                }
                field.clear();
                record.clear();
                field_started = false;
                ++line;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) throw FormatError("csv: unterminated quoted field");
    if (field_started || !field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

std::string csv_quote(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string context_feature_name(std::string_view subreddit) { return "sub=" + std::string(subreddit); }

double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

std::size_t label_index(GoldLabel l) { return static_cast<std::size_t>(l); }

SparseVector featurize(const std::vector<std::string>& tokens, const std::string& subreddit, const FoldModel& fm,
                       const std::unordered_map<std::string, std::uint32_t>& context_ids, const ContextEncoder* encoder) {
    SparseVector x = fm.vectorizer.transform(tokens);
    if (encoder == nullptr) return x;
    const auto& block = encoder->encode(subreddit);
    for (const auto& [name, w] : block) {
        auto it = context_ids.find(name);
        if (it != context_ids.end()) x.emplace_back(it->second, w);
    }
    return x;
}

std::unordered_map<std::string, std::uint32_t> context_index(const FoldModel& fm) {
    std::unordered_map<std::string, std::uint32_t> ids;
    const auto base = static_cast<std::uint32_t>(fm.vectorizer.size());
    for (std::uint32_t i = 0; i < fm.context_features.size(); ++i) ids.emplace(fm.context_features[i], base + i);
    return ids;
}

MetricsReport run_impl(const std::vector<LabeledComment>& corpus, const ContextEncoder* encoder, std::string channel_name,
                       const ExperimentConfig& config) {
    if (corpus.empty()) throw std::invalid_argument("empty corpus");
    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(corpus.size());
    for (const auto& c : corpus) tokens.push_back(text::preprocess(c.body));

    const auto folds = stratified_folds(corpus, config.folds, config.seed);
    std::vector<Prediction> predictions(corpus.size());
    std::vector<FitStats> stats(config.folds);

    auto run_fold = [&](std::uint32_t f) {
        const auto fm = train_fold(corpus, tokens, folds, f, encoder, config);
        const auto ids = encoder ? context_index(fm) : std::unordered_map<std::string, std::uint32_t>{};
        for (auto i : folds.members(f)) {
            const auto x = featurize(tokens[i], corpus[i].subreddit, fm, ids, encoder);
            const double z = fm.model.decision(x);
            predictions[i] = {corpus[i].id, z > 0.0, z, f};
        }
        stats[f] = fm.stats;
    };
    if (config.parallel_folds) {
        std::vector<std::future<void>> jobs;
        for (std::uint32_t f = 0; f < config.folds; ++f) jobs.push_back(std::async(std::launch::async, run_fold, f));
        for (auto& j : jobs) j.get();
    } else {
        for (std::uint32_t f = 0; f < config.folds; ++f) run_fold(f);
    }

    auto report = compute_metrics(corpus, predictions);
    report.channel = std::move(channel_name);
    report.skew = measure_skew(corpus, folds);
    report.folds.resize(config.folds);
    for (std::uint32_t f = 0; f < config.folds; ++f) {
        auto& fmx = report.folds[f];
        std::size_t correct = 0;
        std::size_t deg = 0;
        for (auto i : folds.members(f)) {
            correct += predictions[i].deg == corpus[i].is_deg();
            deg += corpus[i].is_deg();
            ++fmx.size;
        }
        fmx.accuracy = safe_div(static_cast<double>(correct), static_cast<double>(fmx.size));
        fmx.deg_share = safe_div(static_cast<double>(deg), static_cast<double>(fmx.size));
        fmx.converged = stats[f].converged;
        fmx.l2 = stats[f].l2;
        fmx.iterations = stats[f].iterations;
    }
    if (encoder) {
        for (const auto& c : corpus) report.context_fallbacks += encoder->fell_back(c.subreddit);
    }
    return report;
}

}  // namespace

// ------------------------------------------------------------------ labels

std::string_view to_string(GoldLabel label) {
    switch (label) {
        case GoldLabel::DEG: return "DEG";
        case GoldLabel::NDNA: return "NDNA";
        case GoldLabel::APR: return "APR";
        case GoldLabel::HOM: return "HOM";
    }
    return "?";
}

GoldLabel parse_gold_label(std::string_view text) {
    const auto t = lower(trim(text));
    if (t == "deg") return GoldLabel::DEG;
    if (t == "ndna") return GoldLabel::NDNA;
    if (t == "apr") return GoldLabel::APR;
    if (t == "hom") return GoldLabel::HOM;
    throw FormatError("unknown gold label '" + std::string(text) + "'");
}

// ------------------------------------------------------------------ corpus

std::vector<LabeledComment> read_corpus_csv(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    const auto records = parse_csv(ss.str());
    if (records.empty()) throw FormatError("corpus: missing header");

    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < records[0].size(); ++i) col[lower(trim(records[0][i]))] = i;
    for (const char* required : {"id", "subreddit", "slur", "gold_label", "body"}) {
        if (!col.count(required)) throw FormatError(std::string("corpus: header lacks column '") + required + "'");
    }
    auto get = [&](const std::vector<std::string>& rec, const char* name) -> std::string {
        auto it = col.find(name);
        if (it == col.end() || it->second >= rec.size()) return {};
        return rec[it->second];
    };

    std::vector<LabeledComment> out;
    std::set<std::string> seen;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != records[0].size()) {
            throw FormatError("corpus record " + std::to_string(r) + ": expected " + std::to_string(records[0].size()) +
                              " fields, got " + std::to_string(rec.size()));
        }
        LabeledComment c;
        c.id = get(rec, "id");
        c.subreddit = get(rec, "subreddit");
        c.author = get(rec, "author");
        c.slur = get(rec, "slur");
        c.body = get(rec, "body");
        if (const auto ts = get(rec, "created_utc"); !ts.empty()) {
            auto [p, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), c.created_utc);
            if (ec != std::errc{} || p != ts.data() + ts.size()) throw FormatError("corpus record " + std::to_string(r) + ": bad created_utc");
        }
        try {
            c.gold = parse_gold_label(get(rec, "gold_label"));
        } catch (const FormatError& e) {
            throw FormatError("corpus record " + std::to_string(r) + ": " + e.what());
        }
        if (c.id.empty()) throw FormatError("corpus record " + std::to_string(r) + ": empty id");
        if (!seen.insert(c.id).second) throw FormatError("corpus: duplicate id '" + c.id + "'");
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<LabeledComment> load_corpus(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    return read_corpus_csv(in);
}

void write_corpus_csv(std::ostream& out, const std::vector<LabeledComment>& corpus) {
    out << "id,subreddit,author,created_utc,slur,gold_label,body\n";
    for (const auto& c : corpus) {
        out << csv_quote(c.id) << ',' << csv_quote(c.subreddit) << ',' << csv_quote(c.author) << ',' << c.created_utc << ','
            << csv_quote(c.slur) << ',' << to_string(c.gold) << ',' << csv_quote(c.body) << '\n';
    }
}

// ------------------------------------------------------------------ n-grams

std::vector<std::string> ngrams(const std::vector<std::string>& tokens, std::size_t max_n) {
    std::vector<std::string> out;
    for (std::size_t n = 1; n <= max_n; ++n) {
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string g = tokens[i];
            for (std::size_t j = 1; j < n; ++j) {
                g.push_back(' ');
                g += tokens[i + j];
            }
            out.push_back(std::move(g));
        }
    }
    return out;
}

Vectorizer Vectorizer::fit(const std::vector<const std::vector<std::string>*>& docs, std::size_t max_n) {
    if (docs.empty()) throw std::invalid_argument("cannot fit a vectorizer on zero documents");
    if (max_n == 0) throw std::invalid_argument("max n-gram length must be >= 1");
    std::map<std::string, std::uint32_t> df;
    for (const auto* doc : docs) {
        auto grams = ngrams(*doc, max_n);
        std::sort(grams.begin(), grams.end());
        grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
        for (auto& g : grams) ++df[std::move(g)];
    }
    Vectorizer v;
    v.max_n_ = max_n;
    v.documents_ = docs.size();
    const double n = static_cast<double>(docs.size());
    for (auto& [term, count] : df) {
        v.ids_.emplace(term, static_cast<std::uint32_t>(v.terms_.size()));
        v.terms_.push_back(term);
        v.df_.push_back(count);
        v.idf_.push_back(std::log((1.0 + n) / (1.0 + count)) + 1.0);
    }
    return v;
}

SparseVector Vectorizer::transform(const std::vector<std::string>& tokens) const {
    std::map<std::uint32_t, double> tf;
    for (const auto& g : ngrams(tokens, max_n_)) {
        if (auto it = ids_.find(g); it != ids_.end()) tf[it->second] += 1.0;
    }
    SparseVector out;
    out.reserve(tf.size());
    double sq = 0.0;
    for (const auto& [id, count] : tf) {
        const double w = count * idf_[id];
        out.emplace_back(id, w);
        sq += w * w;
    }
    if (sq > 0.0) {
        const double inv = 1.0 / std::sqrt(sq);
        for (auto& e : out) e.second *= inv;
    }
    return out;
}

std::optional<std::uint32_t> Vectorizer::term_id(const std::string& term) const {
    auto it = ids_.find(term);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
}

std::uint32_t Vectorizer::df(const std::string& term) const {
    auto id = term_id(term);
    return id ? df_[*id] : 0;
}

double Vectorizer::idf(const std::string& term) const {
    auto id = term_id(term);
    if (!id) throw std::out_of_range("term not in vocabulary: " + term);
    return idf_[*id];
}

// ------------------------------------------------------------------ context

std::string_view to_string(ContextChannel channel) {
    switch (channel) {
        case ContextChannel::none: return "none";
        case ContextChannel::name: return "name";
        case ContextChannel::neighborhood: return "neighborhood";
    }
    return "?";
}

ContextChannel parse_channel(std::string_view text) {
    if (text == "none") return ContextChannel::none;
    if (text == "name") return ContextChannel::name;
    if (text == "neighborhood") return ContextChannel::neighborhood;
    throw std::invalid_argument("channel must be none, name or neighborhood; got '" + std::string(text) + "'");
}

ContextBlock build_context_features(const std::string& subreddit, ContextChannel channel,
                                    const vecspace::EmbeddingSpace* space, std::size_t neighbor_k, bool* fell_back) {
    if (fell_back) *fell_back = false;
    ContextBlock block;
    if (channel == ContextChannel::none) return block;
    block.emplace_back(context_feature_name(subreddit), 1.0);
    if (channel == ContextChannel::name) return block;

    if (space == nullptr) throw std::invalid_argument("neighborhood channel requires embeddings");
    if (!space->contains(subreddit)) {
        if (fell_back) *fell_back = true;
        return block;
    }
    for (const auto& n : space->nearest_neighbors(subreddit, neighbor_k)) {
        block.emplace_back(context_feature_name(n.name), std::clamp(n.score, 0.0, 1.0));
    }
    std::sort(block.begin(), block.end());
    return block;
}

ContextEncoder::ContextEncoder(ContextChannel channel, const vecspace::EmbeddingSpace* space, std::size_t neighbor_k)
    : channel_(channel), space_(space), neighbor_k_(neighbor_k) {
    if (channel == ContextChannel::neighborhood && space == nullptr) {
        throw std::invalid_argument("neighborhood channel requires embeddings");
    }
}

const ContextEncoder::Entry& ContextEncoder::lookup(const std::string& subreddit) const {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(subreddit);
    if (it != cache_.end()) return it->second;
    Entry e;
    e.block = build_context_features(subreddit, channel_, space_, neighbor_k_, &e.fell_back);
    return cache_.emplace(subreddit, std::move(e)).first->second;
}

const ContextBlock& ContextEncoder::encode(const std::string& subreddit) const { return lookup(subreddit).block; }

bool ContextEncoder::fell_back(const std::string& subreddit) const { return lookup(subreddit).fell_back; }

// ------------------------------------------------------------------ folds

std::vector<std::size_t> FoldAssignment::members(std::uint32_t f) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i) {
        if (fold[i] == f) out.push_back(i);
    }
    return out;
}

std::unordered_map<std::string, std::uint32_t> FoldAssignment::by_id() const {
    std::unordered_map<std::string, std::uint32_t> out;
    for (std::size_t i = 0; i < fold.size(); ++i) out.emplace(ids[i], fold[i]);
    return out;
}

FoldAssignment stratified_folds(const std::vector<LabeledComment>& corpus, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("need at least 2 folds");
    std::map<std::string, std::size_t> per_subreddit;
    for (const auto& c : corpus) ++per_subreddit[c.subreddit];

    // Key order puts all DEG comments (then all NDG) in one contiguous run of
    // the deal, so every fold gets floor or ceil of each label's share.
    using Key = std::tuple<int, std::string, std::string>;
    std::map<Key, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& c = corpus[i];
        const bool rare = per_subreddit[c.subreddit] < k;
        // '\x01' sorts before any printable subreddit name.
        groups[{c.is_deg() ? 0 : 1, c.slur, rare ? std::string("\x01rare") : c.subreddit}].push_back(i);
    }

    FoldAssignment out;
    out.k = k;
    out.fold.assign(corpus.size(), 0);
    out.ids.reserve(corpus.size());
    for (const auto& c : corpus) out.ids.push_back(c.id);

    SplitMix64 rng(derive_seed(seed, 0x5f01d));
    std::size_t dealt = static_cast<std::size_t>(rng.below(k));
    for (auto& [key, members] : groups) {
        fisher_yates(members, rng);
        for (auto i : members) out.fold[i] = static_cast<std::uint32_t>(dealt++ % k);
    }
    return out;
}

nlohmann::json StratificationSkew::to_json() const {
    return {{"max_label_skew_pp", max_label_skew_pp}, {"max_slur_skew_pp", max_slur_skew_pp}, {"fold_sizes", fold_sizes}};
}

StratificationSkew measure_skew(const std::vector<LabeledComment>& corpus, const FoldAssignment& folds) {
    StratificationSkew s;
    s.fold_sizes.assign(folds.k, 0);
    std::vector<std::size_t> deg(folds.k, 0);
    std::map<std::string, std::vector<std::size_t>> slur_counts;
    std::size_t deg_total = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto f = folds.fold[i];
        ++s.fold_sizes[f];
        deg[f] += corpus[i].is_deg();
        deg_total += corpus[i].is_deg();
        auto& sc = slur_counts[corpus[i].slur];
        sc.resize(folds.k, 0);
        ++sc[f];
    }
    const double n = static_cast<double>(corpus.size());
    for (std::size_t f = 0; f < folds.k; ++f) {
        if (s.fold_sizes[f] == 0) continue;
        const double size = static_cast<double>(s.fold_sizes[f]);
        s.max_label_skew_pp = std::max(s.max_label_skew_pp, 100.0 * std::abs(deg[f] / size - deg_total / n));
        for (const auto& [slur, counts] : slur_counts) {
            double total = 0;
            for (auto c : counts) total += static_cast<double>(c);
            s.max_slur_skew_pp = std::max(s.max_slur_skew_pp, 100.0 * std::abs(counts[f] / size - total / n));
        }
    }
    return s;
}

// ------------------------------------------------------------------ training

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"folds", c.folds},
         {"seed", c.seed},
         {"neighbor_k", c.neighbor_k},
         {"max_ngram", c.max_ngram},
         {"l2", c.logreg.l2 ? nlohmann::json(*c.logreg.l2) : nlohmann::json("auto")},
         {"tolerance", c.logreg.tolerance},
         {"max_iterations", c.logreg.max_iterations},
         {"parallel_folds", c.parallel_folds}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c.folds = j.value("folds", c.folds);
    c.seed = j.value("seed", c.seed);
    c.neighbor_k = j.value("neighbor_k", c.neighbor_k);
    c.max_ngram = j.value("max_ngram", c.max_ngram);
    if (j.contains("l2")) {
        const auto& l2 = j["l2"];
        if (l2.is_string() && l2.get<std::string>() == "auto") {
            c.logreg.l2.reset();
        } else if (l2.is_number()) {
            c.logreg.l2 = l2.get<double>();
        } else {
            throw std::invalid_argument("l2 must be a number or \"auto\"");
        }
    }
    c.logreg.tolerance = j.value("tolerance", c.logreg.tolerance);
    c.logreg.max_iterations = j.value("max_iterations", c.logreg.max_iterations);
    c.parallel_folds = j.value("parallel_folds", c.parallel_folds);
}

FoldModel train_fold(const std::vector<LabeledComment>& corpus, const std::vector<std::vector<std::string>>& tokens,
                     const FoldAssignment& folds, std::uint32_t held_out, const ContextEncoder* encoder,
                     const ExperimentConfig& config) {
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (folds.fold[i] != held_out) train.push_back(i);
    }
    if (train.empty()) throw std::invalid_argument("training split is empty");

    FoldModel fm;
    std::vector<const std::vector<std::string>*> docs;
    docs.reserve(train.size());
    for (auto i : train) docs.push_back(&tokens[i]);
    fm.vectorizer = Vectorizer::fit(docs, config.max_ngram);

    std::unordered_map<std::string, std::uint32_t> ctx_ids;
    if (encoder) {
        std::set<std::string> names;
        for (auto i : train) {
            for (const auto& [name, w] : encoder->encode(corpus[i].subreddit)) names.insert(name);
        }
        fm.context_features.assign(names.begin(), names.end());
        ctx_ids = context_index(fm);
    }

    std::vector<SparseVector> rows;
    std::vector<std::uint8_t> labels;
    rows.reserve(train.size());
    labels.reserve(train.size());
    for (auto i : train) {
        rows.push_back(featurize(tokens[i], corpus[i].subreddit, fm, ctx_ids, encoder));
        labels.push_back(corpus[i].is_deg() ? 1 : 0);
    }
    const auto dim = fm.vectorizer.size() + fm.context_features.size();
    fm.model = train_model(rows, labels, dim, config.logreg, &fm.stats);
    return fm;
}

// ------------------------------------------------------------------ metrics

double MetricsReport::pct_classified_deg(GoldLabel label) const {
    const auto i = label_index(label);
    return safe_div(static_cast<double>(classified_deg[i]), static_cast<double>(gold_counts[i]));
}

double MetricsReport::reconciled_accuracy() const {
    double correct = pct_classified_deg(GoldLabel::DEG) * static_cast<double>(gold_counts[0]);
    for (auto l : {GoldLabel::NDNA, GoldLabel::APR, GoldLabel::HOM}) {
        correct += (1.0 - pct_classified_deg(l)) * static_cast<double>(gold_counts[label_index(l)]);
    }
    return safe_div(correct, static_cast<double>(total));
}

MetricsReport compute_metrics(const std::vector<LabeledComment>& corpus, const std::vector<Prediction>& predictions) {
    if (predictions.size() != corpus.size()) throw std::invalid_argument("prediction count does not match corpus");
    MetricsReport r;
    r.total = corpus.size();
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (predictions[i].id != corpus[i].id) throw std::invalid_argument("predictions not aligned with corpus");
        const auto li = label_index(corpus[i].gold);
        ++r.gold_counts[li];
        const bool pred = predictions[i].deg;
        r.classified_deg[li] += pred;
        if (corpus[i].is_deg()) {
            (pred ? tp : fn)++;
        } else {
            (pred ? fp : tn)++;
        }
    }
    const auto d = [](std::size_t x) { return static_cast<double>(x); };
    r.accuracy = safe_div(d(tp + tn), d(r.total));
    const double p_deg = safe_div(d(tp), d(tp + fp));
    const double r_deg = safe_div(d(tp), d(tp + fn));
    const double p_ndg = safe_div(d(tn), d(tn + fn));
    const double r_ndg = safe_div(d(tn), d(tn + fp));
    const double f_deg = safe_div(2 * p_deg * r_deg, p_deg + r_deg);
    const double f_ndg = safe_div(2 * p_ndg * r_ndg, p_ndg + r_ndg);
    r.macro_precision = (p_deg + p_ndg) / 2;
    r.macro_recall = (r_deg + r_ndg) / 2;
    r.macro_f1 = (f_deg + f_ndg) / 2;
    r.predictions = predictions;
    return r;
}

nlohmann::json FlipTable::to_json() const {
    auto counts = [](const FlipCounts& c) {
        return nlohmann::json{{"both_correct", c.both_correct},
                              {"both_wrong", c.both_wrong},
                              {"fixed_by_context", c.fixed_by_context},
                              {"broken_by_context", c.broken_by_context},
                              {"context_sensitive", c.fixed_by_context + c.broken_by_context}};
    };
    nlohmann::json by = nlohmann::json::object();
    for (auto l : kGoldLabels) by[std::string(classify::to_string(l))] = counts(by_gold[label_index(l)]);
    return {{"baseline", baseline}, {"overall", counts(overall)}, {"by_gold_label", by}};
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json pct = nlohmann::json::object();
    nlohmann::json counts = nlohmann::json::object();
    nlohmann::json deg_counts = nlohmann::json::object();
    for (auto l : kGoldLabels) {
        const std::string name(classify::to_string(l));
        pct[name] = pct_classified_deg(l);
        counts[name] = gold_counts[label_index(l)];
        deg_counts[name] = classified_deg[label_index(l)];
    }
    nlohmann::json fold_json = nlohmann::json::array();
    for (const auto& f : folds) {
        fold_json.push_back({{"size", f.size}, {"accuracy", f.accuracy}, {"deg_share", f.deg_share}, {"converged", f.converged},
                             {"l2", f.l2}, {"iterations", f.iterations}});
    }
    nlohmann::json preds = nlohmann::json::array();
    for (const auto& p : predictions) {
        preds.push_back({{"id", p.id}, {"pred", p.deg ? "DEG" : "NDG"}, {"score", p.score}, {"fold", p.fold}});
    }
    nlohmann::json j = {{"channel", channel},
                        {"total", total},
                        {"accuracy", accuracy},
                        {"macro_precision", macro_precision},
                        {"macro_recall", macro_recall},
                        {"macro_f1", macro_f1},
                        {"pct_classified_deg", pct},
                        {"gold_counts", counts},
                        {"classified_deg_counts", deg_counts},
                        {"reconciled_accuracy", reconciled_accuracy()},
                        {"folds", fold_json},
                        {"stratification", skew.to_json()},
                        {"context_fallbacks", context_fallbacks},
                        {"predictions", preds}};
    if (flips) j["flip_table"] = flips->to_json();
    return j;
}

std::vector<Prediction> read_predictions(const nlohmann::json& report) {
    if (!report.contains("predictions") || !report["predictions"].is_array()) {
        throw FormatError("report has no predictions array");
    }
    std::vector<Prediction> out;
    for (const auto& p : report["predictions"]) {
        Prediction pr;
        pr.id = p.at("id").get<std::string>();
        const auto label = p.at("pred").get<std::string>();
        if (label != "DEG" && label != "NDG") throw FormatError("bad prediction label '" + label + "'");
        pr.deg = label == "DEG";
        pr.score = p.value("score", 0.0);
        pr.fold = p.value("fold", 0u);
        out.push_back(std::move(pr));
    }
    return out;
}

FlipTable compare_runs(const std::vector<LabeledComment>& corpus, const std::vector<Prediction>& baseline,
                       const std::vector<Prediction>& candidate, std::string baseline_name) {
    std::unordered_map<std::string, bool> base;
    for (const auto& p : baseline) base.emplace(p.id, p.deg);
    std::unordered_map<std::string, bool> cand;
    for (const auto& p : candidate) cand.emplace(p.id, p.deg);

    FlipTable t;
    t.baseline = std::move(baseline_name);
    for (const auto& c : corpus) {
        auto b = base.find(c.id);
        auto k = cand.find(c.id);
        if (b == base.end()) throw std::invalid_argument("baseline has no prediction for '" + c.id + "'");
        if (k == cand.end()) throw std::invalid_argument("candidate has no prediction for '" + c.id + "'");
        const bool base_ok = b->second == c.is_deg();
        const bool cand_ok = k->second == c.is_deg();
        auto bump = [&](FlipCounts& fc) {
            if (base_ok && cand_ok) ++fc.both_correct;
            else if (!base_ok && !cand_ok) ++fc.both_wrong;
            else if (cand_ok) ++fc.fixed_by_context;
            else ++fc.broken_by_context;
        };
        bump(t.overall);
        bump(t.by_gold[label_index(c.gold)]);
    }
    return t;
}

MetricsReport run_experiment(const std::vector<LabeledComment>& corpus, ContextChannel channel,
                             const vecspace::EmbeddingSpace* space, const ExperimentConfig& config) {
    ContextEncoder encoder(channel, space, config.neighbor_k);
    return run_impl(corpus, &encoder, std::string(to_string(channel)), config);
}

MetricsReport run_baseline(const std::vector<LabeledComment>& corpus, const ExperimentConfig& config) {
    return run_impl(corpus, nullptr, "baseline", config);
}

}  // namespace commvec::classify
