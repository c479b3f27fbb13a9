#include "error.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "porter_stemmer.hpp"
#include "retrieval.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cground;

namespace {

std::vector<Passage> to_passages(const std::vector<std::pair<std::string, std::string>>& docs) {
    std::vector<Passage> out;
    for (const auto& [id, text] : docs) out.push_back({id, text, std::nullopt});
    return out;
}

double score_of(const std::vector<RankedPassage>& ranked, const std::string& id) {
    for (const auto& r : ranked) {
        if (r.passage.passage_id == id) return r.s_ret;
    }
    return 0.0;
}

}  // namespace

TEST_CASE("porter stemmer reference pairs") {
    const std::vector<std::pair<const char*, const char*>> pairs = {
        {"caresses", "caress"},   {"ponies", "poni"},         {"ties", "ti"},
        {"cats", "cat"},          {"feed", "feed"},           {"agreed", "agre"},
        {"plastered", "plaster"}, {"bled", "bled"},           {"motoring", "motor"},
        {"sing", "sing"},         {"conflated", "conflat"},   {"troubled", "troubl"},
        {"sized", "size"},        {"hopping", "hop"},         {"tanned", "tan"},
        {"falling", "fall"},      {"hissing", "hiss"},        {"fizzed", "fizz"},
        {"failing", "fail"},      {"filing", "file"},         {"happy", "happi"},
        {"sky", "sky"},           {"relational", "relat"},    {"conditional", "condit"},
        {"rational", "ration"},   {"digitizer", "digit"},     {"predication", "predic"},
        {"operator", "oper"},     {"feudalism", "feudal"},    {"decisiveness", "decis"},
        {"hopefulness", "hope"},  {"callousness", "callous"}, {"formative", "form"},
        {"electrical", "electr"}, {"goodness", "good"},       {"revival", "reviv"},
        {"allowance", "allow"},   {"inference", "infer"},     {"airliner", "airlin"},
        {"adjustable", "adjust"}, {"defensible", "defens"},   {"replacement", "replac"},
        {"adoption", "adopt"},    {"communism", "commun"},    {"activate", "activ"},
        {"effective", "effect"},  {"bowdlerize", "bowdler"},  {"probate", "probat"},
        {"rate", "rate"},         {"cease", "ceas"},          {"controll", "control"},
        {"roll", "roll"},         {"generalizations", "gener"}, {"oscillators", "oscil"},
        {"is", "is"},             {"r2d2", "r2d2"}};
    for (const auto& [word, stem] : pairs) {
        CAPTURE(word);
        CHECK(porter_stem(word) == stem);
    }
}

TEST_CASE("analyzer") {
    CHECK(analyze("Messi's age, (2023)!") == std::vector<std::string>{"messi", "s", "age", "2023"});
    CHECK(analyze("the running dogs", {true, true}) == std::vector<std::string>{"run", "dog"});
}

TEST_CASE("hand-computed single-term score") {
    const auto index = Bm25Index::build({{"a", "alpha beta", {}}, {"b", "gamma delta", {}}, {"c", "epsilon zeta", {}}});
    CHECK(index.size() == 3);
    CHECK(index.avg_doc_len() == 2.0);
    const auto ranked = index.search("alpha");
    REQUIRE(ranked.size() == 1);
    CHECK(ranked[0].passage.passage_id == "a");
    CHECK(ranked[0].rank == 1);
    const double expected = std::log(1.0 + 2.5 / 1.5) * 1.82 / 1.82;
    CHECK(std::abs(ranked[0].s_ret - expected) < 1e-12);
    CHECK(std::abs(ranked[0].s_ret - 0.9808) < 1e-4);
    CHECK(ranked[0].s_ret_norm == 1.0);
}

TEST_CASE("idf is never negative") {
    for (std::size_t n = 1; n <= 50; ++n) {
        for (std::size_t df = 0; df <= n; ++df) CHECK(bm25_idf(n, df) >= 0.0);
    }
}

TEST_CASE("property: index search equals brute force") {
    for (std::uint64_t seed : {11u, 22u, 33u, 44u, 55u}) {
        std::mt19937_64 rng(seed);
        const auto docs = oracle::random_collection(rng, 10 + static_cast<int>(rng() % 41));
        const auto index = Bm25Index::build(to_passages(docs));
        for (int q = 0; q < 20; ++q) {
            const auto query = oracle::random_query(rng, docs);
            const Bm25Params params{0.82, 0.68, 1000};
            const auto got = index.search(query, params);
            const auto want = oracle::bm25_brute_force(docs, query, params.k1, params.b);
            CAPTURE(query);
            REQUIRE(got.size() == want.size());
            for (std::size_t i = 0; i < got.size(); ++i) {
                CHECK(got[i].passage.passage_id == want[i].id);
                CHECK(std::abs(got[i].s_ret - want[i].score) < 1e-9);
                CHECK(got[i].rank == static_cast<int>(i) + 1);
            }
        }
    }
}

TEST_CASE("top_n truncates and normalized scores span [0,1]") {
    const auto& index = fixtures::passage_index();
    const auto ranked = index.search("Messi position forward", {0.82, 0.68, 5});
    REQUIRE(ranked.size() == 5);
    CHECK(ranked.front().s_ret_norm == 1.0);
    CHECK(ranked.back().s_ret_norm == 0.0);
    for (std::size_t i = 1; i < ranked.size(); ++i) {
        CHECK(ranked[i - 1].s_ret >= ranked[i].s_ret);
        if (ranked[i - 1].s_ret == ranked[i].s_ret) {
            CHECK(ranked[i - 1].passage.passage_id < ranked[i].passage.passage_id);
        }
    }
}

TEST_CASE("ties break by passage id") {
    const auto index = Bm25Index::build({{"z", "same text", {}}, {"a", "same text", {}}, {"m", "other", {}}});
    const auto ranked = index.search("same");
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].passage.passage_id == "a");
    CHECK(ranked[1].passage.passage_id == "z");
    CHECK(ranked[1].s_ret_norm == 1.0);  // all-equal list
}

TEST_CASE("empty and unknown queries return nothing") {
    const auto& index = fixtures::passage_index();
    CHECK(index.search("").empty());
    CHECK(index.search("?!.").empty());
    CHECK(index.search("qqqqzzzz").empty());
}

TEST_CASE("property: an extra occurrence never lowers the score") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        auto docs = oracle::random_collection(rng, 12);
        docs.emplace_back("target", "river stone glass");
        const double before = score_of(Bm25Index::build(to_passages(docs)).search("river"), "target");
        docs.back().second = "river river glass";  // same length, same document frequency
        const double after = score_of(Bm25Index::build(to_passages(docs)).search("river"), "target");
        CHECK(after > before);
    }
}

TEST_CASE("property: b=0 ignores length") {
    const auto index = Bm25Index::build({{"short", "river", {}}, {"long", "river stone glass iron poem essay", {}},
                                         {"none", "sea", {}}});
    const auto ranked = index.search("river", {0.82, 0.0, 20});
    REQUIRE(ranked.size() == 2);
    CHECK(ranked[0].s_ret == ranked[1].s_ret);
    const auto with_len = index.search("river");
    CHECK(with_len[0].passage.passage_id == "short");
    CHECK(with_len[0].s_ret > with_len[1].s_ret);
}

TEST_CASE("min-max normalization") {
    CHECK(min_max_normalize({}).empty());
    CHECK(min_max_normalize({3.0}) == std::vector<double>{1.0});
    CHECK(min_max_normalize({2.0, 2.0}) == std::vector<double>{1.0, 1.0});
    CHECK(min_max_normalize({1.0, 3.0, 2.0}) == std::vector<double>{0.0, 1.0, 0.5});
}

TEST_CASE("build errors and parameter validation") {
    CHECK_THROWS_AS(Bm25Index::build({}), Error);
    try {
        Bm25Index::build({{"a", "x", {}}, {"a", "y", {}}});
        FAIL("duplicate id accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Integrity);
    }
    CHECK_THROWS_AS((Bm25Params{0.0, 0.5, 10}.validate()), Error);
    CHECK_THROWS_AS((Bm25Params{1.0, 1.5, 10}.validate()), Error);
    CHECK_THROWS_AS((Bm25Params{1.0, 0.5, 0}.validate()), Error);
}

TEST_CASE("index statistics are deterministic and round-trip bit-exactly") {
    const auto passages = load_passages(fixtures::data("passages.jsonl"));
    const auto a = Bm25Index::build(passages);
    const auto b = Bm25Index::build(passages);
    CHECK(a.serialize() == b.serialize());
    CHECK(a.term_count() == b.term_count());
    const auto image = a.serialize();
    const auto back = Bm25Index::deserialize(image);
    CHECK(back.serialize() == image);
    CHECK(back.size() == 200);
    CHECK(back.doc_freq("messi") == a.doc_freq("messi"));

    fixtures::TempDir dir;
    a.save(dir / "x.idx");
    CHECK(Bm25Index::load(dir / "x.idx").serialize() == image);

    CHECK_THROWS_AS(Bm25Index::deserialize("garbage"), Error);
    CHECK_THROWS_AS(Bm25Index::deserialize(image.substr(0, image.size() / 2)), Error);
    CHECK_THROWS_AS(Bm25Index::deserialize(image + "x"), Error);
}

TEST_CASE("stemmed index keeps its analyzer") {
    const auto index = Bm25Index::build({{"a", "running dogs", {}}, {"b", "cats", {}}}, {true, false});
    CHECK(index.search("run").size() == 1);
    const auto back = Bm25Index::deserialize(index.serialize());
    CHECK(back.analyzer() == AnalyzerOptions{true, false});
    CHECK(back.search("dog").size() == 1);
}
