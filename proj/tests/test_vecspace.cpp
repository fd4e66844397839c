#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "commvec/common.hpp"
#include "commvec/vecspace.hpp"

using namespace commvec;
using namespace commvec::vecspace;
using embed::EmbeddingMatrix;

namespace {

EmbeddingMatrix random_space(std::size_t n, std::size_t dim, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<std::string> names;
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i) {
        names.push_back("n" + std::to_string(i));
        for (std::size_t d = 0; d < dim; ++d) values.push_back(rng.uniform() * 2.0 - 1.0);
    }
    return EmbeddingMatrix(names, dim, values);
}

// Oracle: cosine against every raw row, sorted with the documented tie-break.
std::vector<Scored> brute(const EmbeddingMatrix& m, const std::vector<double>& q, std::size_t k,
                          const std::set<std::string>& exclude) {
    std::vector<Scored> all;
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (exclude.count(m.names()[i])) continue;
        all.push_back({m.names()[i], cosine(q, m.row(i))});
    }
    std::sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) {
        return a.score != b.score ? a.score > b.score : a.name < b.name;
    });
    all.resize(std::min(k, all.size()));
    return all;
}

std::vector<double> unit_of(std::span<const double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    std::vector<double> out;
    for (double x : v) out.push_back(x / n);
    return out;
}

void same_ranking(const std::vector<Scored>& got, const std::vector<Scored>& want) {
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].name == want[i].name);
        CHECK(got[i].score == doctest::Approx(want[i].score).epsilon(1e-12));
    }
}

}  // namespace

TEST_CASE("cosine") {
    const std::vector<double> a = {1, 0};
    const std::vector<double> b = {0, 1};
    const std::vector<double> c = {1, 1};
    CHECK(cosine(a, a) == doctest::Approx(1.0));
    CHECK(cosine(a, b) == 0.0);
    CHECK(cosine(a, c) == doctest::Approx(0.70710678).epsilon(1e-8));
    const std::vector<double> zero = {0, 0};
    CHECK_THROWS_AS(cosine(a, zero), std::invalid_argument);
    const std::vector<double> three = {1, 2, 3};
    CHECK_THROWS_AS(cosine(a, three), std::invalid_argument);
}

TEST_CASE("space construction") {
    const auto m = random_space(5, 3, 1);
    const EmbeddingSpace s(m);
    CHECK(s.size() == 5);
    CHECK(s.dim() == 3);
    for (std::size_t i = 0; i < s.size(); ++i) {
        double n = 0.0;
        for (double x : s.unit(i)) n += x * x;
        CHECK(n == doctest::Approx(1.0));
    }
    CHECK(s.similarity("n0", "n0") == doctest::Approx(1.0));
    CHECK(s.contains("n4"));
    CHECK_FALSE(s.contains("n5"));
    CHECK_THROWS_AS(EmbeddingSpace(EmbeddingMatrix({"a", "b"}, 2, {1, 0, 0, 0})), std::invalid_argument);
    CHECK_THROWS_AS(EmbeddingSpace(EmbeddingMatrix({"a", "a"}, 1, {1, 2})), std::invalid_argument);
}

TEST_CASE("nearest neighbors match an exhaustive scan") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto m = random_space(50, 6, seed);
        const EmbeddingSpace s(m);
        const std::string q = "n" + std::to_string(seed % 50);
        const auto qi = *m.find(q);
        const std::vector<double> raw(m.row(qi).begin(), m.row(qi).end());
        same_ranking(s.nearest_neighbors(q, 7), brute(m, raw, 7, {q}));
        same_ranking(s.nearest_neighbors(q, 7, {"n1", "n2"}), brute(m, raw, 7, {q, "n1", "n2"}));
        CHECK(s.nearest_neighbors(q, 0).empty());
        CHECK(s.nearest_neighbors(q, 500).size() == 49);
    }
}

TEST_CASE("ties break by name") {
    const EmbeddingSpace s(EmbeddingMatrix({"q", "zeta", "alpha", "mid"}, 2, {1, 0, 1, 1, 1, -1, 0, 1}));
    const auto nn = s.nearest_neighbors("q", 3);
    REQUIRE(nn.size() == 3);
    CHECK(nn[0].name == "alpha");
    CHECK(nn[1].name == "zeta");
    CHECK(nn[0].score == nn[1].score);
    CHECK(nn[2].name == "mid");
}

TEST_CASE("rescaling a row does not change any ranking") {
    auto m = random_space(30, 5, 3);
    const EmbeddingSpace before(m);
    for (std::size_t i = 0; i < m.size(); i += 3) {
        for (auto& x : m.row(i)) x *= 17.5;
    }
    const EmbeddingSpace after(m);
    for (const auto& name : {"n0", "n7", "n12"}) {
        const auto a = before.nearest_neighbors(name, 5);
        const auto b = after.nearest_neighbors(name, 5);
        same_ranking(a, b);
    }
    same_ranking(before.compose("n1", "n2", 5), after.compose("n1", "n2", 5));
    same_ranking(before.analogy("n1", "n2", "n3", 5), after.analogy("n1", "n2", "n3", 5));
}

TEST_CASE("composition and analogy use unit vectors and exclude inputs") {
    const auto m = random_space(40, 4, 4);
    const EmbeddingSpace s(m);
    std::vector<double> q(4);
    const auto l = unit_of(m.row(2));
    const auto r = unit_of(m.row(5));
    for (std::size_t d = 0; d < 4; ++d) q[d] = l[d] + r[d];
    same_ranking(s.compose("n2", "n5", 6), brute(m, q, 6, {"n2", "n5"}));

    const auto a = unit_of(m.row(1));
    const auto b = unit_of(m.row(8));
    const auto c = unit_of(m.row(9));
    for (std::size_t d = 0; d < 4; ++d) q[d] = b[d] - a[d] + c[d];
    same_ranking(s.analogy("n1", "n8", "n9", 6), brute(m, q, 6, {"n1", "n8", "n9"}));

    same_ranking(s.compose("n3", "n3", 5), s.nearest_neighbors("n3", 5));
    same_ranking(s.analogy("n4", "n4", "n6", 5), s.nearest_neighbors("n6", 5, {"n4"}));
}

TEST_CASE("unknown names carry suggestions") {
    const EmbeddingSpace s(EmbeddingMatrix({"hockey", "soccer", "boston"}, 1, {1, 2, 3}));
    try {
        s.nearest_neighbors("hocky", 3);
        FAIL("expected UnknownNameError");
    } catch (const UnknownNameError& e) {
        CHECK(e.name() == "hocky");
        REQUIRE_FALSE(e.suggestions().empty());
        CHECK(e.suggestions()[0] == "hockey");
        CHECK(std::string(e.what()).find("hockey") != std::string::npos);
    }
    CHECK_THROWS_AS(s.compose("hockey", "nhl", 1), UnknownNameError);
    CHECK_THROWS_AS(s.analogy("a", "soccer", "boston", 1), UnknownNameError);
    CHECK(s.suggest("bostn", 1) == std::vector<std::string>{"boston"});
}

TEST_CASE("suite parsing") {
    std::istringstream comp("# header\n\nboston\thockey\tbruins\n  \nchicago\tbaseball\tcubs\n");
    const auto tests = parse_suite(comp, SuiteType::composition);
    REQUIRE(tests.size() == 2);
    CHECK(std::get<CompositionTest>(tests[1]).expected == "cubs");

    std::istringstream bad("a\tb\tc\nx\ty\n");
    try {
        parse_suite(bad, SuiteType::composition);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::istringstream ana("a\tb\tc\td\n");
    const auto at = parse_suite(ana, SuiteType::analogy);
    CHECK(std::get<AnalogyTest>(at[0]).c == "c");
    std::istringstream wrong("a\tb\tc\n");
    CHECK_THROWS_AS(parse_suite(wrong, SuiteType::analogy), FormatError);

    std::ostringstream out;
    write_suite(out, tests);
    std::istringstream again(out.str());
    const auto round = parse_suite(again, SuiteType::composition);
    CHECK(std::get<CompositionTest>(round[0]).left == "boston");
    CHECK(parse_suite_type("analogy") == SuiteType::analogy);
    CHECK_THROWS_AS(parse_suite_type("other"), std::invalid_argument);
}

TEST_CASE("suite grading") {
    // x + y points at xy; p + q points at none of the candidates in particular.
    const EmbeddingSpace s(EmbeddingMatrix({"x", "y", "xy", "far", "p", "q"}, 3,
                                           {1, 0, 0, 0, 1, 0, 1, 1, 0.1, 0, 0, -1, 1, 0, 1, 0, 1, 1}));
    const std::vector<EvalTest> tests = {
        CompositionTest{"x", "y", "xy"},
        CompositionTest{"x", "y", "far"},
        CompositionTest{"x", "missing", "xy"},
        CompositionTest{"x", "y", "x"},
        AnalogyTest{"x", "xy", "p", "q"},
    };
    const auto r = run_eval_suite(s, tests, 2, "mini");
    CHECK(r.total == 5);
    CHECK(r.skips == 2);
    CHECK(r.graded() == 3);
    CHECK(r.results[0].hit_at_1);
    CHECK_FALSE(r.results[1].hit_at_k);
    CHECK(r.results[2].skipped);
    CHECK(r.results[2].skip_reason.find("missing") != std::string::npos);
    CHECK(r.results[3].skipped);
    CHECK(r.hits_at_1 <= r.hits_at_k);
    CHECK(r.hit_rate() == doctest::Approx(static_cast<double>(r.hits_at_k) / 3.0));
    const auto j = r.to_json();
    CHECK(j["suite"] == "mini");
    CHECK(j["skips"] == 2);

    const auto empty = run_eval_suite(s, {}, 5);
    CHECK(empty.total == 0);
    CHECK(empty.hit_rate() == 0.0);
}

TEST_CASE("hits at 1 never exceed hits at k on random suites") {
    const auto m = random_space(30, 4, 9);
    const EmbeddingSpace s(m);
    SplitMix64 rng(9);
    std::vector<EvalTest> tests;
    for (int t = 0; t < 50; ++t) {
        auto pick = [&] { return "n" + std::to_string(rng.below(30)); };
        tests.push_back(AnalogyTest{pick(), pick(), pick(), pick()});
    }
    for (std::size_t k : {1, 3, 10}) {
        const auto r = run_eval_suite(s, tests, k);
        CHECK(r.hits_at_1 <= r.hits_at_k);
        if (k == 1) CHECK(r.hits_at_1 == r.hits_at_k);
        for (const auto& t : r.results) {
            if (!t.skipped) CHECK(t.candidates.size() == k);
        }
    }
}
