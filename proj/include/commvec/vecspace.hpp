#pragma once

// Similarity queries over a loaded embedding space, and grading of
// composition (a + b = ?) and analogy (a : b :: c : ?) suites.

#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

#include "commvec/embed.hpp"

namespace commvec::vecspace {

/// Query referred to a name that is not in the space.
class UnknownNameError : public std::invalid_argument {
public:
    UnknownNameError(std::string name, std::vector<std::string> suggestions);
    const std::string& name() const noexcept { return name_; }
    const std::vector<std::string>& suggestions() const noexcept { return suggestions_; }

private:
    std::string name_;
    std::vector<std::string> suggestions_;
};

/// u.v / (|u||v|). Throws std::invalid_argument on a zero-norm input or a
/// dimension mismatch.
double cosine(std::span<const double> u, std::span<const double> v);

struct Scored {
    std::string name;
    double score;
    friend bool operator==(const Scored&, const Scored&) = default;
};

/// Immutable after construction; queries are safe to run concurrently.
class EmbeddingSpace {
public:
    /// Rows are L2-normalized here. A zero-norm row is an error.
    explicit EmbeddingSpace(const embed::EmbeddingMatrix& matrix);

    std::size_t size() const noexcept { return names_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    bool contains(std::string_view name) const;
    std::span<const double> unit(std::size_t i) const { return {unit_.data() + i * dim_, dim_}; }

    double similarity(const std::string& a, const std::string& b) const;

    /// Top-k by cosine excluding `name` and `exclude`; score descending,
    /// name ascending on ties.
    std::vector<Scored> nearest_neighbors(const std::string& name, std::size_t k,
                                          const std::set<std::string>& exclude = {}) const;
    /// Ranks by cosine to unit(left) + unit(right), excluding both inputs.
    std::vector<Scored> compose(const std::string& left, const std::string& right, std::size_t k) const;
    /// a : b :: c : ?  ranks by cosine to unit(b) - unit(a) + unit(c),
    /// excluding a, b and c.
    std::vector<Scored> analogy(const std::string& a, const std::string& b, const std::string& c, std::size_t k) const;

    /// Exact scan of every row against `query`, skipping excluded indices.
    std::vector<Scored> rank(std::span<const double> query, std::size_t k, const std::vector<std::size_t>& exclude) const;

    /// Up to `limit` vocabulary names closest to `name` by edit distance.
    std::vector<std::string> suggest(const std::string& name, std::size_t limit = 3) const;

private:
    std::size_t index_or_throw(const std::string& name) const;

    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t dim_ = 0;
    std::vector<double> unit_;
};

struct CompositionTest {
    std::string left;
    std::string right;
    std::string expected;
};

struct AnalogyTest {
    std::string a;
    std::string b;
    std::string c;
    std::string expected;
};

using EvalTest = std::variant<CompositionTest, AnalogyTest>;

enum class SuiteType { composition, analogy };

SuiteType parse_suite_type(std::string_view name);
std::string_view to_string(SuiteType type);

/// Tab-separated, '#' comment lines and blank lines ignored. A row with the
/// wrong number of columns is a FormatError naming the line.
std::vector<EvalTest> parse_suite(std::istream& in, SuiteType type);
std::vector<EvalTest> load_suite(const std::filesystem::path& path, SuiteType type);
void write_suite(std::ostream& out, const std::vector<EvalTest>& tests);

struct TestResult {
    std::vector<std::string> inputs;
    std::string expected;
    std::vector<Scored> candidates;
    bool skipped = false;
    std::string skip_reason;
    bool hit_at_1 = false;
    bool hit_at_k = false;
};

struct EvalReport {
    std::string suite;
    std::size_t k = 5;
    std::size_t total = 0;
    std::size_t skips = 0;
    std::size_t hits_at_1 = 0;
    std::size_t hits_at_k = 0;
    std::vector<TestResult> results;

    std::size_t graded() const noexcept { return total - skips; }
    /// hits@k over graded (non-skipped) tests; 0 when nothing was graded.
    double hit_rate() const noexcept;
    nlohmann::json to_json() const;
};

/// Tests whose names are missing from the space, or whose expected answer
/// is one of its inputs, are skipped and counted rather than failing.
EvalReport run_eval_suite(const EmbeddingSpace& space, const std::vector<EvalTest>& tests, std::size_t k = 5,
                          std::string suite_name = "suite");

}  // namespace commvec::vecspace
