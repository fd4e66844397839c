#pragma once

// GloVe-style factorization of the co-occurrence matrix, trained with AdaGrad.
//
// For each stored pair the cost is f(A_ij) * (w_i . w~_j + b_i + b~_j - ln A_ij)^2
// with f(x) = min(1, (x / x_max)^alpha). The symmetric matrix is presented
// to the trainer in both orientations.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "commvec/cooccur.hpp"

namespace commvec::embed {

class TrainingError : public std::runtime_error {
public:
    static constexpr std::uint32_t npos = 0xffffffffu;

    explicit TrainingError(const std::string& message, std::uint32_t row = npos, std::uint32_t col = npos)
        : std::runtime_error(message), row_(row), col_(col) {}

    /// Offending entry, or npos when not tied to one.
    std::uint32_t row() const noexcept { return row_; }
    std::uint32_t col() const noexcept { return col_; }

private:
    std::uint32_t row_;
    std::uint32_t col_;
};

enum class FinalVectors { sum, main_only };

struct EmbedConfig {
    std::size_t dim = 150;
    std::size_t epochs = 100;
    double learning_rate = 0.05;
    double x_max = 100.0;
    double alpha = 0.75;
    std::uint64_t seed = 1;
    /// Single sequential updater; bit-reproducible. Otherwise lock-free
    /// concurrent updates over shards of each epoch.
    bool deterministic = true;
    unsigned threads = 0;
    FinalVectors finalize = FinalVectors::sum;

    void validate() const;
};

void to_json(nlohmann::json& j, const EmbedConfig& c);
void from_json(const nlohmann::json& j, EmbedConfig& c);

struct EmbeddingState {
    std::size_t vocab_size = 0;
    std::size_t dim = 0;
    std::vector<double> main;     // vocab_size x dim, row-major
    std::vector<double> context;  // vocab_size x dim
    std::vector<double> main_bias;
    std::vector<double> context_bias;
    // AdaGrad squared-gradient accumulators, same shapes as the above.
    std::vector<double> main_sq;
    std::vector<double> context_sq;
    std::vector<double> main_bias_sq;
    std::vector<double> context_bias_sq;

    std::span<const double> main_row(std::size_t i) const { return {main.data() + i * dim, dim}; }
    std::span<const double> context_row(std::size_t i) const { return {context.data() + i * dim, dim}; }

    /// Same state with the main and context roles exchanged.
    EmbeddingState mirrored() const;
    bool all_finite() const;

    friend bool operator==(const EmbeddingState&, const EmbeddingState&) = default;
};

/// Parameters uniform in [-0.5/dim, 0.5/dim], accumulators at 1.
EmbeddingState init_state(std::size_t vocab_size, const EmbedConfig& config);

/// f(x) = (x / x_max)^alpha below x_max, 1 at or above it.
double weight(double x, const EmbedConfig& config);

struct TrainingEntry {
    std::uint32_t row;
    std::uint32_t col;
    double value;
};

/// Each stored pair (i, j) as (i, j) followed by (j, i).
std::vector<TrainingEntry> training_entries(const cooccur::CooccurrenceMatrix& matrix);

/// One AdaGrad pass in a seeded shuffled order (the order depends only on
/// config.seed, epoch_index and entries.size()). Returns the sum of per-entry
/// costs evaluated before each update. Throws TrainingError on a non-finite
/// cost, naming the offending entry.
double train_epoch(EmbeddingState& state, std::span<const TrainingEntry> entries, const EmbedConfig& config,
                   std::size_t epoch_index);

class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::vector<std::string> names, std::size_t dim, std::vector<double> values);

    const std::vector<std::string>& names() const noexcept { return names_; }
    std::size_t size() const noexcept { return names_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
    std::span<double> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::optional<std::size_t> find(std::string_view name) const;

    /// "<count> <dim>" then one line per row: name and dim values (%.9g).
    std::string to_text() const;
    static EmbeddingMatrix from_text(std::string_view text);
    /// Full-precision binary with checksum.
    std::string to_binary() const;
    static EmbeddingMatrix from_binary(std::string_view bytes);

    void save(const std::filesystem::path& path) const;
    /// Picks binary or text by sniffing the magic.
    static EmbeddingMatrix load(const std::filesystem::path& path);

    friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

private:
    std::vector<std::string> names_;
    std::size_t dim_ = 0;
    std::vector<double> values_;
};

EmbeddingMatrix finalize(const EmbeddingState& state, std::vector<std::string> names, FinalVectors mode);

struct TrainResult {
    EmbeddingMatrix embeddings;
    std::vector<double> loss_trace;
};

TrainResult train(const cooccur::CooccurrenceMatrix& matrix, const EmbedConfig& config);

}  // namespace commvec::embed
