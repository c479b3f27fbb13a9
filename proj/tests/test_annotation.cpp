#include "annotation.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <map>
#include <set>

using namespace cground;
using fixtures::propositions_of;
using fixtures::sorted;
using fixtures::surfaces;

namespace {

std::vector<std::string> sample_sentences() {
    std::vector<std::string> out;
    for (const auto& conv : fixtures::oracle_dataset()) {
        for (const auto& t : conv.turns) {
            out.push_back(t.question);
            out.push_back(t.effective_rewrite());
            if (t.answer) out.push_back(*t.answer);
        }
        if (conv.doc) out.push_back(conv.doc->first_sentence);
    }
    const auto passages = load_passages(fixtures::data("passages.jsonl"));
    for (std::size_t i = 0; i < passages.size(); i += 7) out.push_back(passages[i].text);
    return out;
}

}  // namespace

TEST_CASE("worked examples") {
    CHECK(surfaces(propositions_of("how old is Messi?")) == std::vector<std::string>{"Messi"});
    CHECK(sorted(surfaces(propositions_of("which position does Messi play?"))) ==
          std::vector<std::string>{"Messi", "position"});
    CHECK(sorted(surfaces(propositions_of("What's the average starting salary for a physician assistant in the UK?"))) ==
          sorted({"the average starting salary", "a physician assistant", "the UK"}));
    CHECK(propositions_of("is it true?").empty());
}

TEST_CASE("tags and chunks of the position question") {
    const ReferenceAnnotator annotator;
    const auto s = annotator.annotate("which position does Messi play?");
    std::map<std::string, const AnnotatedToken*> by_text;
    for (const auto& t : s.tokens) by_text[t.text] = &t;
    REQUIRE(by_text.count("position"));
    REQUIRE(by_text.count("Messi"));
    CHECK(by_text["position"]->pos == Pos::Noun);
    CHECK(by_text["Messi"]->pos == Pos::Propn);
    CHECK(by_text["Messi"]->is_entity);
    CHECK(by_text["which"]->pos != Pos::Det);
    REQUIRE(s.chunks.size() == 2);
}

TEST_CASE("determiner, adjective and nouns form a single chunk") {
    const ReferenceAnnotator annotator;
    const auto s = annotator.annotate("the average starting salary");
    REQUIRE(s.tokens.size() == 4);
    CHECK(s.tokens[0].pos == Pos::Det);
    REQUIRE(s.chunks.size() == 1);
    CHECK(s.chunks[0] == ChunkSpan{0, 4});
}

TEST_CASE("strict policy drops leading determiners") {
    const ReferenceAnnotator strict(ChunkPolicy{false});
    const auto props = extract_propositions(
        strict.annotate("What's the average starting salary for a physician assistant in the UK?"), 0);
    CHECK(sorted(surfaces(props)) == sorted({"average starting salary", "physician assistant", "UK"}));
}

TEST_CASE("multi-word names stay together") {
    CHECK(surfaces(propositions_of("where did Rick Barry come from?")) == std::vector<std::string>{"Rick Barry"});
    CHECK(surfaces(propositions_of("What did Guido van Rossum create?")) ==
          std::vector<std::string>{"Guido van Rossum"});
}

TEST_CASE("the network question yields its own nominal") {
    CHECK(surfaces(propositions_of("Are flows bidirectional?")) == std::vector<std::string>{"flows"});
}

TEST_CASE("tokenize splits off punctuation with byte offsets") {
    const std::string text = "Hello, (world)!";
    const auto toks = tokenize(text);
    std::vector<std::string> words;
    for (const auto& t : toks) {
        words.push_back(t.text);
        CHECK(text.substr(t.begin, t.end - t.begin) == t.text);
    }
    CHECK(words == std::vector<std::string>{"Hello", ",", "(", "world", ")", "!"});
}

TEST_CASE("match and content tokens") {
    CHECK(match_tokens("The UK, (again)!") == std::vector<std::string>{"the", "uk", "again"});
    CHECK(content_tokens("what about in the US?") == std::vector<std::string>{"us"});
    CHECK(contains_token_run({"in", "the", "uk", "the"}, {"the", "uk"}));
    CHECK_FALSE(contains_token_run({"the", "us", "uk"}, {"the", "uk"}));
    CHECK_FALSE(contains_token_run({"a"}, {}));
}

TEST_CASE("entity bearing propositions") {
    CHECK(is_entity_bearing(Proposition("the UK", 0)));
    CHECK(is_entity_bearing(Proposition("Messi", 0)));
    CHECK_FALSE(is_entity_bearing(Proposition("the average starting salary", 0)));
}

TEST_CASE("function words and pronouns") {
    CHECK(is_function_word("the"));
    CHECK(is_function_word("which"));
    CHECK_FALSE(is_function_word("salary"));
    CHECK(is_personal_pronoun("he"));
    CHECK(is_personal_pronoun("they"));
    CHECK_FALSE(is_personal_pronoun("the"));
}

TEST_CASE("make_annotator validates names") {
    CHECK(make_annotator("reference") != nullptr);
    CHECK_THROWS(make_annotator("spacy"));
    CHECK_THROWS(make_annotator("external"));  // needs a client
}

TEST_CASE("property: token and chunk invariants over the fixture corpus") {
    const ReferenceAnnotator annotator;
    for (const auto& text : sample_sentences()) {
        CAPTURE(text);
        const auto s = annotator.annotate(text);
        std::map<int, std::pair<int, int>> entity_runs;  // id -> first, last
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
            const auto& t = s.tokens[i];
            CHECK(t.index == static_cast<int>(i));
            CHECK(text.substr(t.begin, t.end - t.begin) == t.text);
            if (t.entity_id) {
                auto [it, fresh] = entity_runs.try_emplace(*t.entity_id, t.index, t.index);
                if (!fresh) {
                    CHECK(it->second.second == t.index - 1);  // contiguous
                    it->second.second = t.index;
                }
            }
        }
        for (const auto& c : s.chunks) {
            REQUIRE(c.start < c.end);
            REQUIRE(c.end <= static_cast<int>(s.tokens.size()));
            CHECK(s.tokens[static_cast<std::size_t>(c.end - 1)].is_core());
            for (int i = c.start; i < c.end; ++i) {
                const auto& t = s.tokens[static_cast<std::size_t>(i)];
                const bool allowed = t.is_core() || t.pos == Pos::Adj || (i == c.start && t.pos == Pos::Det);
                CHECK(allowed);
            }
        }
        const auto props = extract_propositions(s, 0);
        std::set<std::string> seen;
        for (const auto& p : props) {
            CHECK(text.find(p.surface()) != std::string::npos);
            CHECK(seen.insert(p.normalized()).second);
        }
    }
}
