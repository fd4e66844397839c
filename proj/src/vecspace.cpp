#include "commvec/vecspace.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "commvec/common.hpp"

namespace commvec::vecspace {

namespace {

std::string unknown_message(const std::string& name, const std::vector<std::string>& suggestions) {
    std::string msg = "unknown subreddit '" + name + "'";
    if (!suggestions.empty()) {
        msg += "; did you mean:";
        for (std::size_t i = 0; i < suggestions.size(); ++i) msg += (i ? ", " : " ") + suggestions[i];
    }
    return msg;
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const bool same = std::tolower(static_cast<unsigned char>(a[i - 1])) ==
                              std::tolower(static_cast<unsigned char>(b[j - 1]));
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (same ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

UnknownNameError::UnknownNameError(std::string name, std::vector<std::string> suggestions)
    : std::invalid_argument(unknown_message(name, suggestions)),
      name_(std::move(name)),
      suggestions_(std::move(suggestions)) {}

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw std::invalid_argument("cosine: dimension mismatch");
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("cosine: zero-norm vector");
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
    return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

EmbeddingSpace::EmbeddingSpace(const embed::EmbeddingMatrix& matrix)
    : names_(matrix.names()), dim_(matrix.dim()), unit_(matrix.values()) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (!index_.emplace(names_[i], i).second) throw std::invalid_argument("duplicate name in embeddings: " + names_[i]);
        std::span<double> row(unit_.data() + i * dim_, dim_);
        const double n = norm(row);
        if (n == 0.0) throw std::invalid_argument("zero-norm embedding for '" + names_[i] + "'");
        for (double& x : row) x /= n;
    }
}

bool EmbeddingSpace::contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

std::size_t EmbeddingSpace::index_or_throw(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw UnknownNameError(name, suggest(name));
    return it->second;
}

std::vector<std::string> EmbeddingSpace::suggest(const std::string& name, std::size_t limit) const {
    std::vector<std::pair<std::size_t, std::string>> scored;
    scored.reserve(names_.size());
    for (const auto& n : names_) scored.emplace_back(edit_distance(name, n), n);
    const auto take = std::min(limit, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end());
    std::vector<std::string> out;
    for (std::size_t i = 0; i < take; ++i) out.push_back(scored[i].second);
    return out;
}

double EmbeddingSpace::similarity(const std::string& a, const std::string& b) const {
    return cosine(unit(index_or_throw(a)), unit(index_or_throw(b)));
}

std::vector<Scored> EmbeddingSpace::rank(std::span<const double> query, std::size_t k,
                                         const std::vector<std::size_t>& exclude) const {
    if (query.size() != dim_) throw std::invalid_argument("query dimension mismatch");
    const double qn = norm(query);
    if (qn == 0.0) throw std::invalid_argument("query vector has zero norm");
    if (k == 0) return {};

    std::vector<char> skip(names_.size(), 0);
    for (auto i : exclude) skip.at(i) = 1;
    std::vector<std::pair<double, std::size_t>> cand;
    cand.reserve(names_.size());
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (skip[i]) continue;
        const auto row = unit(i);
        double dot = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) dot += query[d] * row[d];
        cand.emplace_back(dot / qn, i);
    }
    const auto take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                      [&](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return names_[a.second] < names_[b.second];
                      });
    std::vector<Scored> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back({names_[cand[i].second], cand[i].first});
    return out;
}

std::vector<Scored> EmbeddingSpace::nearest_neighbors(const std::string& name, std::size_t k,
                                                      const std::set<std::string>& exclude) const {
    const auto i = index_or_throw(name);
    std::vector<std::size_t> skip{i};
    for (const auto& e : exclude) {
        if (auto it = index_.find(e); it != index_.end()) skip.push_back(it->second);
    }
    return rank(unit(i), k, skip);
}

std::vector<Scored> EmbeddingSpace::compose(const std::string& left, const std::string& right, std::size_t k) const {
    const auto l = index_or_throw(left);
    const auto r = index_or_throw(right);
    std::vector<double> v(dim_);
    for (std::size_t d = 0; d < dim_; ++d) v[d] = unit(l)[d] + unit(r)[d];
    return rank(v, k, {l, r});
}

std::vector<Scored> EmbeddingSpace::analogy(const std::string& a, const std::string& b, const std::string& c,
                                            std::size_t k) const {
    const auto ia = index_or_throw(a);
    const auto ib = index_or_throw(b);
    const auto ic = index_or_throw(c);
    std::vector<double> v(dim_);
    for (std::size_t d = 0; d < dim_; ++d) v[d] = unit(ib)[d] - unit(ia)[d] + unit(ic)[d];
    return rank(v, k, {ia, ib, ic});
}

// ------------------------------------------------------------------ suites

SuiteType parse_suite_type(std::string_view name) {
    if (name == "composition") return SuiteType::composition;
    if (name == "analogy") return SuiteType::analogy;
    throw std::invalid_argument("suite type must be 'composition' or 'analogy', got '" + std::string(name) + "'");
}

std::string_view to_string(SuiteType type) { return type == SuiteType::composition ? "composition" : "analogy"; }

std::vector<EvalTest> parse_suite(std::istream& in, SuiteType type) {
    std::vector<EvalTest> out;
    std::string line;
    std::size_t line_no = 0;
    const std::size_t width = type == SuiteType::composition ? 3 : 4;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto f = split(t, '\t');
        for (auto& x : f) x = std::string(trim(x));
        if (f.size() != width) {
            throw FormatError("suite line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                              " tab-separated names, got " + std::to_string(f.size()));
        }
        if (type == SuiteType::composition) {
            out.emplace_back(CompositionTest{f[0], f[1], f[2]});
        } else {
            out.emplace_back(AnalogyTest{f[0], f[1], f[2], f[3]});
        }
    }
    return out;
}

std::vector<EvalTest> load_suite(const std::filesystem::path& path, SuiteType type) {
    std::istringstream in(read_file(path));
    return parse_suite(in, type);
}

void write_suite(std::ostream& out, const std::vector<EvalTest>& tests) {
    for (const auto& t : tests) {
        if (const auto* c = std::get_if<CompositionTest>(&t)) {
            out << c->left << '\t' << c->right << '\t' << c->expected << '\n';
        } else {
            const auto& a = std::get<AnalogyTest>(t);
            out << a.a << '\t' << a.b << '\t' << a.c << '\t' << a.expected << '\n';
        }
    }
}

double EvalReport::hit_rate() const noexcept {
    return graded() == 0 ? 0.0 : static_cast<double>(hits_at_k) / static_cast<double>(graded());
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json tests = nlohmann::json::array();
    for (const auto& r : results) {
        nlohmann::json cands = nlohmann::json::array();
        for (const auto& c : r.candidates) cands.push_back({{"name", c.name}, {"score", c.score}});
        nlohmann::json t = {{"inputs", r.inputs}, {"expected", r.expected}, {"skipped", r.skipped}};
        if (r.skipped) {
            t["skip_reason"] = r.skip_reason;
        } else {
            t["candidates"] = std::move(cands);
            t["hit@1"] = r.hit_at_1;
            t["hit@" + std::to_string(k)] = r.hit_at_k;
        }
        tests.push_back(std::move(t));
    }
    return {{"suite", suite},
            {"k", k},
            {"total", total},
            {"skips", skips},
            {"graded", graded()},
            {"hits@1", hits_at_1},
            {"hits@" + std::to_string(k), hits_at_k},
            {"hit_rate@" + std::to_string(k), hit_rate()},
            {"tests", std::move(tests)}};
}

EvalReport run_eval_suite(const EmbeddingSpace& space, const std::vector<EvalTest>& tests, std::size_t k,
                          std::string suite_name) {
    EvalReport report;
    report.suite = std::move(suite_name);
    report.k = k;
    report.total = tests.size();
    for (const auto& test : tests) {
        TestResult r;
        if (const auto* c = std::get_if<CompositionTest>(&test)) {
            r.inputs = {c->left, c->right};
            r.expected = c->expected;
        } else {
            const auto& a = std::get<AnalogyTest>(test);
            r.inputs = {a.a, a.b, a.c};
            r.expected = a.expected;
        }
        std::vector<std::string> missing;
        for (const auto& n : r.inputs) {
            if (!space.contains(n)) missing.push_back(n);
        }
        if (!space.contains(r.expected)) missing.push_back(r.expected);
        if (!missing.empty()) {
            r.skipped = true;
            r.skip_reason = "out of vocabulary:";
            for (const auto& m : missing) r.skip_reason += " " + m;
        } else if (std::find(r.inputs.begin(), r.inputs.end(), r.expected) != r.inputs.end()) {
            r.skipped = true;
            r.skip_reason = "expected answer is one of the inputs";
        }
        if (r.skipped) {
            ++report.skips;
            report.results.push_back(std::move(r));
            continue;
        }

        const auto depth = std::max<std::size_t>(k, 1);
        r.candidates = r.inputs.size() == 2 ? space.compose(r.inputs[0], r.inputs[1], depth)
                                            : space.analogy(r.inputs[0], r.inputs[1], r.inputs[2], depth);
        r.hit_at_1 = !r.candidates.empty() && r.candidates.front().name == r.expected;
        r.hit_at_k = std::any_of(r.candidates.begin(), r.candidates.begin() + static_cast<std::ptrdiff_t>(std::min(k, r.candidates.size())),
                                 [&](const Scored& s) { return s.name == r.expected; });
        report.hits_at_1 += r.hit_at_1;
        report.hits_at_k += r.hit_at_k;
        report.results.push_back(std::move(r));
    }
    return report;
}

}  // namespace commvec::vecspace
