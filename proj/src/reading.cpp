#include "reading.hpp"

#include "adapter.hpp"
#include "error.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <unordered_set>

#include <json.hpp>

using json = nlohmann::json;

namespace cground {

std::vector<SentenceSpan> split_sentences(std::string_view text) {
    std::vector<SentenceSpan> out;
    std::size_t start = 0;
    auto push = [&](std::size_t b, std::size_t e) {
        while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
        if (b < e) out.push_back({b, e});
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c != '.' && c != '?' && c != '!') continue;
        const bool boundary = i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
        if (!boundary) continue;
        push(start, i + 1);
        start = i + 1;
    }
    push(start, text.size());
    return out;
}

std::vector<AnswerCandidate> LexicalReader::read(const Passage& passage, std::string_view reader_query) const {
    const auto qv = content_tokens(reader_query);
    const std::unordered_set<std::string> query(qv.begin(), qv.end());
    if (query.empty()) return {};

    const std::string_view text = passage.text;
    const auto sentences = split_sentences(text);
    std::vector<std::pair<std::size_t, std::size_t>> ranked;  // (overlap, sentence)
    for (std::size_t s = 0; s < sentences.size(); ++s) {
        const auto toks = content_tokens(text.substr(sentences[s].begin, sentences[s].end - sentences[s].begin));
        std::unordered_set<std::string> distinct;
        for (const auto& t : toks) {
            if (query.count(t)) distinct.insert(t);
        }
        if (!distinct.empty()) ranked.emplace_back(distinct.size(), s);
    }
    if (ranked.empty()) return {};
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

    auto word_of = [](const AnnotatedToken& t) {
        auto w = match_tokens(t.text);
        return w.empty() ? std::string{} : w.front();
    };

    AnswerCandidate cand;
    cand.passage_id = passage.passage_id;
    // Sentences are tried by overlap; the first one offering a chunk that
    // adds material beyond the query answers. A sentence that merely echoes
    // the question has none.
    for (const auto& [overlap, s] : ranked) {
        const auto& sent = sentences[s];
        const auto sentence_text = text.substr(sent.begin, sent.end - sent.begin);
        const auto annotated = annotator_->annotate(sentence_text);

        std::vector<int> matched_positions;
        for (const auto& t : annotated.tokens) {
            if (auto w = word_of(t); !w.empty() && query.count(w) && !is_function_word(w)) {
                matched_positions.push_back(t.index);
            }
        }

        int chosen = -1;
        int chosen_distance = std::numeric_limits<int>::max();
        bool chosen_repeats = true;
        for (std::size_t c = 0; c < annotated.chunks.size(); ++c) {
            const auto& chunk = annotated.chunks[c];
            const auto& first = annotated.tokens[static_cast<std::size_t>(chunk.start)];
            const auto& last = annotated.tokens[static_cast<std::size_t>(chunk.end - 1)];
            const auto chunk_tokens = content_tokens(sentence_text.substr(first.begin, last.end - first.begin));
            const bool adds_material = std::any_of(chunk_tokens.begin(), chunk_tokens.end(),
                                                   [&](const std::string& t) { return !query.count(t); });
            if (!adds_material) continue;
            // Answers rarely repeat the question: chunks free of query terms go first.
            const bool repeats_query = std::any_of(chunk_tokens.begin(), chunk_tokens.end(),
                                                   [&](const std::string& t) { return query.count(t) > 0; });
            int distance = std::numeric_limits<int>::max();
            for (int m : matched_positions) {
                int d = m < chunk.start ? chunk.start - m : (m >= chunk.end ? m - chunk.end + 1 : 0);
                distance = std::min(distance, d);
            }
            if (chosen < 0 || std::pair(repeats_query, distance) < std::pair(chosen_repeats, chosen_distance)) {
                chosen = static_cast<int>(c);
                chosen_distance = distance;
                chosen_repeats = repeats_query;
            }
        }
        if (chosen < 0) continue;
        const auto& chunk = annotated.chunks[static_cast<std::size_t>(chosen)];
        cand.begin = sent.begin + annotated.tokens[static_cast<std::size_t>(chunk.start)].begin;
        cand.end = sent.begin + annotated.tokens[static_cast<std::size_t>(chunk.end - 1)].end;
        cand.s_rea = static_cast<double>(overlap) + 1.0 / (1.0 + chosen_distance);
        cand.text = std::string(text.substr(cand.begin, cand.end - cand.begin));
        return {cand};
    }

    const auto& sent = sentences[ranked.front().second];
    cand.begin = sent.begin;
    cand.end = sent.end;
    cand.s_rea = 0.0;  // nothing extractable: keep the passage, rank it last
    cand.text = std::string(text.substr(cand.begin, cand.end - cand.begin));
    return {cand};
}

std::vector<AnswerCandidate> ExternalReader::read(const Passage& passage, std::string_view reader_query) const {
    json payload = {{"passage_id", passage.passage_id},
                    {"passage", passage.text},
                    {"reader_query", std::string(reader_query)}};
    auto body = client_->call_ok("read", payload);
    std::vector<AnswerCandidate> out;
    try {
        for (const auto& s : body.at("spans")) {
            AnswerCandidate c;
            c.passage_id = passage.passage_id;
            c.begin = s.at("begin").get<std::size_t>();
            c.end = s.at("end").get<std::size_t>();
            c.s_rea = s.at("score").get<double>();
            if (c.begin > c.end || c.end > passage.text.size()) {
                throw Error(ErrorCode::Backend, "read: span offsets out of range");
            }
            c.text = passage.text.substr(c.begin, c.end - c.begin);
            if (s.contains("text") && s["text"].get<std::string>() != c.text) {
                throw Error(ErrorCode::Backend, "read: span text does not match its offsets");
            }
            out.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Backend, std::string("read: malformed response payload: ") + e.what());
    }
    return out;
}

std::vector<AnswerCandidate> fuse(std::vector<std::pair<RankedPassage, AnswerCandidate>> candidates,
                                  const FusionOptions& options) {
    if (!(options.mu >= 0.0 && options.mu <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "fusion weight mu must lie in [0, 1]");
    }
    std::vector<double> rea;
    rea.reserve(candidates.size());
    for (const auto& [_, c] : candidates) rea.push_back(c.s_rea);
    const auto rea_norm = min_max_normalize(rea);

    std::vector<AnswerCandidate> out;
    out.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        auto& [rp, c] = candidates[i];
        c.s_rea_norm = rea_norm[i];
        c.s_ret = rp.s_ret;
        c.s_ret_norm = rp.s_ret_norm;
        c.passage_rank = rp.rank;
        c.fused = options.raw_scores ? (1.0 - options.mu) * c.s_ret + options.mu * c.s_rea
                                     : (1.0 - options.mu) * c.s_ret_norm + options.mu * c.s_rea_norm;
        out.push_back(std::move(c));
    }
    std::stable_sort(out.begin(), out.end(), [](const AnswerCandidate& a, const AnswerCandidate& b) {
        if (a.fused != b.fused) return a.fused > b.fused;
        if (a.passage_rank != b.passage_rank) return a.passage_rank < b.passage_rank;
        return a.text < b.text;
    });
    return out;
}

}  // namespace cground
