#include "adapter.hpp"
#include "context_setups.hpp"
#include "error.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <set>

using namespace cground;

namespace {

CommonGround salary_turn2() {
    CommonGround cg;
    cg.add(Proposition("the average starting salary", 0), CgStatus::Selected);
    cg.add(Proposition("the UK", 0), CgStatus::Retained);
    cg.add(Proposition("a physician assistant", 0), CgStatus::Selected);
    cg.add(Proposition("the US", 1), CgStatus::Selected);
    return cg;
}

CommonGround listed_order() {
    CommonGround cg;
    cg.add(Proposition("the average starting salary", 0), CgStatus::Selected);
    cg.add(Proposition("the US", 1), CgStatus::Selected);
    cg.add(Proposition("a physician assistant", 0), CgStatus::Selected);
    cg.add(Proposition("the UK", 0), CgStatus::Retained);
    return cg;
}

ConversationContext us_context() {
    ConversationContext ctx;
    ctx.history.push_back({"What's the average starting salary for a physician assistant in the UK?", "£30,000"});
    ctx.current_question = "What about in the US?";
    return ctx;
}

std::set<std::string> content_set(const std::string& text) {
    const auto v = content_tokens(text);
    return {v.begin(), v.end()};
}

FormulationServices offline() { return {[](const ConversationContext& c) { return c.current_question; }, fallback_summary}; }

}  // namespace

TEST_CASE("setup vocabulary") {
    CHECK(all_setups().size() == 9);
    for (auto s : all_setups()) CHECK(setup_from_name(setup_name(s)) == s);
    CHECK(std::string(setup_display_name(Setup::CgFullCg)) == "CG-full/CG");
    CHECK_FALSE(setup_from_name("CG").has_value());
    CHECK(setup_uses_cg(Setup::CgG));
    CHECK_FALSE(setup_uses_cg(Setup::Summary));
}

TEST_CASE("original passes the question through") {
    ConversationContext ctx;
    ctx.current_question = "how old is Messi?";
    const auto f = formulate(Setup::Original, ctx, {}, {});
    CHECK(f.retriever_query == "how old is Messi?");
    CHECK(f.reader_query == "how old is Messi?");
}

TEST_CASE("cg renders the selected view in origin-turn order before the question") {
    const auto f = formulate(Setup::Cg, us_context(), listed_order(), {});
    CHECK(f.retriever_query == "the average starting salary, a physician assistant, the US ||| What about in the US?");
    CHECK(f.reader_query == f.retriever_query);
}

TEST_CASE("cg_full_cg splits retriever and reader inputs") {
    const auto cg = formulate(Setup::Cg, us_context(), salary_turn2(), {});
    const auto split = formulate(Setup::CgFullCg, us_context(), salary_turn2(), {});
    CHECK(split.retriever_query.find("the UK") != std::string::npos);
    CHECK(cg.retriever_query.find("the UK") == std::string::npos);
    CHECK(split.reader_query == cg.reader_query);
    CHECK(split.retriever_query == formulate(Setup::CgFull, us_context(), salary_turn2(), {}).retriever_query);
    const auto gold = formulate(Setup::CgG, us_context(), salary_turn2(), {});
    CHECK(gold.retriever_query == split.retriever_query);
    CHECK(gold.reader_query == split.reader_query);
}

TEST_CASE("concat uses the doc and exactly one prior turn") {
    ConversationContext ctx;
    ctx.doc = DocumentContext{"Albert Camus", "He was a writer."};
    ctx.history.push_back({"oldquestion alpha?", "oldanswer beta"});
    ctx.history.push_back({"What did he write?", "The Stranger"});
    ctx.current_question = "When?";
    const auto f = formulate(Setup::Concat, ctx, {}, {});
    CHECK(f.retriever_query == "Albert Camus ||| He was a writer. ||| What did he write? The Stranger ||| When?");
    CHECK(f.retriever_query.find("oldquestion") == std::string::npos);
    CHECK(f.retriever_query.find("oldanswer") == std::string::npos);
}

TEST_CASE("services are required where needed") {
    const auto ctx = us_context();
    CHECK_THROWS_AS(formulate(Setup::Rewrite, ctx, {}, {}), Error);
    CHECK_THROWS_AS(formulate(Setup::RewriteG, ctx, {}, {}), Error);
    CHECK_THROWS_AS(formulate(Setup::Summary, ctx, {}, {}), Error);
    FormulationServices s;
    s.rewrite = [](const ConversationContext&) { return std::string("r"); };
    s.summarize = [](const ConversationContext&) { return std::string("summary text"); };
    CHECK(formulate(Setup::Rewrite, ctx, {}, s).retriever_query == "r");
    CHECK(formulate(Setup::Summary, ctx, {}, s).retriever_query == "summary text ||| What about in the US?");
}

TEST_CASE("truncation keeps the most recent tokens of the reader input") {
    CHECK(truncate_left("a b c d", 2) == "c d");
    CHECK(truncate_left("a b", 5) == "a b");
    CHECK(truncate_left("a b", 0) == "a b");
    ConversationContext ctx;
    std::string long_answer;
    for (int i = 0; i < 500; ++i) long_answer += "w" + std::to_string(i) + " ";
    ctx.history.push_back({"q?", long_answer});
    ctx.current_question = "final question?";
    const auto f = formulate(Setup::Concat, ctx, {}, {}, FormulationOptions{384});
    CHECK(f.retriever_query.find("w0 ") != std::string::npos);  // retrieval is not truncated
    CHECK(f.reader_query.find("w0 ") == std::string::npos);
    CHECK(f.reader_query.size() < f.retriever_query.size());
    CHECK(f.reader_query.substr(f.reader_query.size() - 15) == "final question?");
}

TEST_CASE("fallback summary") {
    ConversationContext ctx;
    CHECK(fallback_summary(ctx).empty());
    ctx.doc = DocumentContext{"T", "First sentence."};
    ctx.history.push_back({"q", "ans"});
    CHECK(fallback_summary(ctx) == "First sentence. ans");
}

TEST_CASE("property: turn-1 formulations only carry question material") {
    const ReferenceAnnotator annotator;
    for (const auto& conv : fixtures::oracle_dataset()) {
        ConversationContext ctx;
        ctx.current_question = conv.turns.front().question;
        CommonGround cg;
        for (const auto& p : extract_propositions(annotator.annotate(ctx.current_question), 0)) {
            cg.add(p, CgStatus::Selected);
        }
        const auto q = content_set(ctx.current_question);
        for (Setup s : {Setup::Concat, Setup::Summary, Setup::Cg, Setup::CgFull, Setup::CgFullCg}) {
            const auto f = formulate(s, ctx, cg, offline());
            const auto got = content_set(f.retriever_query);
            CAPTURE(f.retriever_query);
            CHECK(std::includes(q.begin(), q.end(), got.begin(), got.end()));
        }
    }
}

TEST_CASE("property: retriever and reader agree except for the split setups") {
    for (const auto& conv : fixtures::oracle_dataset()) {
        for (std::size_t n = 0; n < conv.turns.size(); ++n) {
            const auto ctx = context_at(conv, n);
            CommonGround cg = salary_turn2();
            for (Setup s : {Setup::Original, Setup::Concat, Setup::Rewrite, Setup::Summary, Setup::Cg, Setup::CgFull}) {
                const auto f = formulate(s, ctx, cg, offline());
                CHECK(f.retriever_query == f.reader_query);
                CHECK(formulate(s, ctx, cg, offline()).retriever_query == f.retriever_query);  // pure
            }
        }
    }
}

TEST_CASE("external rewriter and summarizer") {
    auto backend = std::make_shared<EchoBackend>(EchoBackend::from_file(fixtures::data("echo_adapter.jsonl")));
    auto client = std::make_shared<AdapterClient>(std::make_unique<EchoTransport>(backend), std::chrono::seconds(2));
    ConversationContext ctx;
    ctx.history.push_back({"how old is Messi?", "36 years"});
    ctx.current_question = "which position does he play?";
    CHECK(external_rewriter(client)(ctx) == "which position does Messi play?");
    CHECK(external_summarizer(client)(ctx) == "Messi is 36 years old.");
    ctx.current_question = "unknown";
    CHECK_THROWS_AS(external_rewriter(client)(ctx), Error);
}
