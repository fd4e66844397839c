#pragma once

// Context-insensitive vs context-sensitive slur-usage classification:
// TF-IDF 1-3 gram features, an optional community-context block, logistic
// regression, stratified k-fold out-of-fold prediction and per-label
// reporting.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "commvec/logreg.hpp"
#include "commvec/vecspace.hpp"

namespace commvec::classify {

enum class GoldLabel : std::uint8_t { DEG = 0, NDNA = 1, APR = 2, HOM = 3 };
inline constexpr std::array kGoldLabels = {GoldLabel::DEG, GoldLabel::NDNA, GoldLabel::APR, GoldLabel::HOM};

std::string_view to_string(GoldLabel label);
/// Case-insensitive.
GoldLabel parse_gold_label(std::string_view text);

struct LabeledComment {
    std::string id;
    std::string subreddit;
    std::string author;
    std::int64_t created_utc = 0;
    std::string slur;
    GoldLabel gold = GoldLabel::DEG;
    std::string body;

    /// Binary task: DEG vs everything else (NDG).
    bool is_deg() const noexcept { return gold == GoldLabel::DEG; }
};

/// CSV with header id,subreddit,author,created_utc,slur,gold_label,body
/// (any column order; extra columns ignored). RFC 4180 quoting.
std::vector<LabeledComment> read_corpus_csv(std::istream& in);
std::vector<LabeledComment> load_corpus(const std::filesystem::path& path);
void write_corpus_csv(std::ostream& out, const std::vector<LabeledComment>& corpus);

// ----------------------------------------------------------- n-grams

/// Contiguous 1..max_n grams, joined with single spaces, in text order.
std::vector<std::string> ngrams(const std::vector<std::string>& tokens, std::size_t max_n = 3);

/// TF-IDF over 1..max_n grams. idf(t) = ln((1 + N) / (1 + df(t))) + 1;
/// transformed rows are L2-normalized.
class Vectorizer {
public:
    static Vectorizer fit(const std::vector<const std::vector<std::string>*>& docs, std::size_t max_n = 3);

    SparseVector transform(const std::vector<std::string>& tokens) const;

    std::size_t size() const noexcept { return terms_.size(); }
    std::size_t documents() const noexcept { return documents_; }
    const std::vector<std::string>& terms() const noexcept { return terms_; }
    std::optional<std::uint32_t> term_id(const std::string& term) const;
    std::uint32_t df(const std::string& term) const;
    double idf(const std::string& term) const;

    friend bool operator==(const Vectorizer& a, const Vectorizer& b) {
        return a.max_n_ == b.max_n_ && a.documents_ == b.documents_ && a.terms_ == b.terms_ && a.df_ == b.df_ &&
               a.idf_ == b.idf_;
    }

private:
    std::size_t max_n_ = 3;
    std::size_t documents_ = 0;
    std::vector<std::string> terms_;  // sorted; id = position
    std::unordered_map<std::string, std::uint32_t> ids_;
    std::vector<std::uint32_t> df_;
    std::vector<double> idf_;
};

// ----------------------------------------------------------- context

enum class ContextChannel { none, name, neighborhood };

std::string_view to_string(ContextChannel channel);
ContextChannel parse_channel(std::string_view text);

/// Named context features with weights, sorted by name.
using ContextBlock = std::vector<std::pair<std::string, double>>;

/// none: empty. name: {sub=<subreddit>: 1}. neighborhood: the name feature
/// plus sub=<neighbor> for the top `neighbor_k` neighbors, weighted by cosine
/// clipped to [0, 1]. A subreddit missing from `space` under the
/// neighborhood channel falls back to the name block and sets `*fell_back`.
ContextBlock build_context_features(const std::string& subreddit, ContextChannel channel,
                                    const vecspace::EmbeddingSpace* space, std::size_t neighbor_k = 5,
                                    bool* fell_back = nullptr);

// ------------------------------------------------------------- folds

struct FoldAssignment {
    std::size_t k = 5;
    /// fold[i] is the fold of corpus[i].
    std::vector<std::uint32_t> fold;
    std::vector<std::string> ids;

    std::vector<std::size_t> members(std::uint32_t f) const;
    std::unordered_map<std::string, std::uint32_t> by_id() const;
};

/// Groups by (binary label, slur, subreddit bucket), where subreddits with
/// fewer than k comments share one bucket, shuffles each group under `seed`
/// and deals all groups round-robin in key order across the folds.
FoldAssignment stratified_folds(const std::vector<LabeledComment>& corpus, std::size_t k = 5, std::uint64_t seed = 1);

struct StratificationSkew {
    /// Largest |fold DEG share - corpus DEG share|, percentage points.
    double max_label_skew_pp = 0.0;
    /// Largest |fold slur share - corpus slur share| over slurs, pp.
    double max_slur_skew_pp = 0.0;
    std::vector<std::size_t> fold_sizes;
    nlohmann::json to_json() const;
};

StratificationSkew measure_skew(const std::vector<LabeledComment>& corpus, const FoldAssignment& folds);

// ------------------------------------------------------- experiments

struct ExperimentConfig {
    std::size_t folds = 5;
    std::uint64_t seed = 1;
    std::size_t neighbor_k = 5;
    std::size_t max_ngram = 3;
    LogRegOptions logreg;
    /// Train folds on separate threads. Results do not depend on it.
    bool parallel_folds = true;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Everything learned from one fold's training split.
struct FoldModel {
    Vectorizer vectorizer;
    std::vector<std::string> context_features;  // sorted; ids follow the n-gram block
    LogisticModel model;
    FitStats stats;
};

class ContextEncoder;

/// Fits vectorizer, context feature space and model on every fold but
/// `held_out`. With `encoder == nullptr` no context code runs at all.
FoldModel train_fold(const std::vector<LabeledComment>& corpus, const std::vector<std::vector<std::string>>& tokens,
                     const FoldAssignment& folds, std::uint32_t held_out, const ContextEncoder* encoder,
                     const ExperimentConfig& config);

/// Caches context blocks per subreddit for one channel.
class ContextEncoder {
public:
    ContextEncoder(ContextChannel channel, const vecspace::EmbeddingSpace* space, std::size_t neighbor_k);
    const ContextBlock& encode(const std::string& subreddit) const;
    /// True if `subreddit` was encoded with the name-only fallback.
    bool fell_back(const std::string& subreddit) const;
    ContextChannel channel() const noexcept { return channel_; }

private:
    struct Entry {
        ContextBlock block;
        bool fell_back = false;
    };
    const Entry& lookup(const std::string& subreddit) const;

    ContextChannel channel_;
    const vecspace::EmbeddingSpace* space_;
    std::size_t neighbor_k_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, Entry> cache_;
};

struct Prediction {
    std::string id;
    bool deg = false;
    double score = 0.0;
    std::uint32_t fold = 0;
};

struct FlipCounts {
    std::size_t both_correct = 0;
    std::size_t both_wrong = 0;
    std::size_t fixed_by_context = 0;
    std::size_t broken_by_context = 0;
    std::size_t total() const noexcept { return both_correct + both_wrong + fixed_by_context + broken_by_context; }
};

struct FlipTable {
    std::string baseline;
    FlipCounts overall;
    std::array<FlipCounts, 4> by_gold{};
    nlohmann::json to_json() const;
};

struct FoldMetrics {
    std::size_t size = 0;
    double accuracy = 0.0;
    double deg_share = 0.0;
    bool converged = true;
    double l2 = 0.0;
    std::size_t iterations = 0;
};

struct MetricsReport {
    std::string channel;
    std::size_t total = 0;
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::array<std::size_t, 4> gold_counts{};
    std::array<std::size_t, 4> classified_deg{};
    std::vector<FoldMetrics> folds;
    StratificationSkew skew;
    /// Comments whose subreddit had no embedding (neighborhood channel).
    std::size_t context_fallbacks = 0;
    std::optional<FlipTable> flips;
    std::vector<Prediction> predictions;

    /// Share of comments with this gold label predicted DEG (0 when absent).
    double pct_classified_deg(GoldLabel label) const;
    /// Accuracy rebuilt from the per-label %DEG cells and label counts.
    double reconciled_accuracy() const;

    nlohmann::json to_json() const;
};

/// Metrics for out-of-fold predictions aligned with `corpus`.
MetricsReport compute_metrics(const std::vector<LabeledComment>& corpus, const std::vector<Prediction>& predictions);

/// Predictions from a report JSON written by MetricsReport::to_json.
std::vector<Prediction> read_predictions(const nlohmann::json& report);

/// Pairs predictions by comment id. Ids missing from the baseline are an error.
FlipTable compare_runs(const std::vector<LabeledComment>& corpus, const std::vector<Prediction>& baseline,
                       const std::vector<Prediction>& candidate, std::string baseline_name);

/// Out-of-fold experiment with a context channel. `space` is required for
/// the neighborhood channel.
MetricsReport run_experiment(const std::vector<LabeledComment>& corpus, ContextChannel channel,
                             const vecspace::EmbeddingSpace* space, const ExperimentConfig& config);

/// Same folds and model with no context code path at all.
MetricsReport run_baseline(const std::vector<LabeledComment>& corpus, const ExperimentConfig& config);

}  // namespace commvec::classify
