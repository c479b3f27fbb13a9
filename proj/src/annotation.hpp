#pragma once

// Token-level annotation (coarse POS, entity runs, noun chunks) and the
// proposition extractor built on top of it.

#include "core_model.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cground {

class AdapterClient;

enum class Pos { Noun, Propn, Adj, Det, Verb, Other };

const char* pos_name(Pos pos) noexcept;
Pos pos_from_name(std::string_view name);

struct AnnotatedToken {
    std::string text;
    int index = 0;
    std::size_t begin = 0;  // byte offsets into the annotated text
    std::size_t end = 0;
    Pos pos = Pos::Other;
    bool is_entity = false;
    std::optional<int> entity_id;

    bool is_core() const noexcept { return pos == Pos::Noun || pos == Pos::Propn || is_entity; }
};

struct ChunkSpan {
    int start = 0;  // half-open token range
    int end = 0;
    bool operator==(const ChunkSpan&) const = default;
};

struct AnnotatedSentence {
    std::string text;
    std::vector<AnnotatedToken> tokens;
    std::vector<ChunkSpan> chunks;
};

struct ChunkPolicy {
    // Off: chunks drop the leading determiner (nouns/adjectives/entities only).
    bool include_determiners = true;
};

class Annotator {
public:
    virtual ~Annotator() = default;
    virtual AnnotatedSentence annotate(std::string_view text) const = 0;
};

/// Deterministic lexicon + suffix-rule tagger with capitalization-based
/// entity detection. Stateless after construction.
class ReferenceAnnotator final : public Annotator {
public:
    explicit ReferenceAnnotator(ChunkPolicy policy = {}) : policy_(policy) {}
    AnnotatedSentence annotate(std::string_view text) const override;

private:
    ChunkPolicy policy_;
};

/// Delegates to an out-of-process model (task "annotate").
class ExternalAnnotator final : public Annotator {
public:
    explicit ExternalAnnotator(std::shared_ptr<AdapterClient> client) : client_(std::move(client)) {}
    AnnotatedSentence annotate(std::string_view text) const override;

private:
    std::shared_ptr<AdapterClient> client_;
};

/// Whitespace split, then leading/trailing ASCII punctuation split off as
/// separate tokens. Tags are left at Other.
std::vector<AnnotatedToken> tokenize(std::string_view text);

/// Maximal spans of DET? (ADJ|core)* core, never crossing from a common noun
/// into an entity run.
std::vector<ChunkSpan> find_chunks(const std::vector<AnnotatedToken>& tokens, ChunkPolicy policy = {});

/// One proposition per chunk (exact surface text), deduplicated by normalized form.
std::vector<Proposition> extract_propositions(const AnnotatedSentence& sentence, int origin_turn);

/// Closed-class words (determiners, pronouns, auxiliaries, prepositions,
/// conjunctions, wh-words). Input must be lowercase.
bool is_function_word(std::string_view lower_word);
bool is_personal_pronoun(std::string_view lower_word);

/// Casefolded tokens with surrounding punctuation removed; empty tokens dropped.
std::vector<std::string> match_tokens(std::string_view text);

/// match_tokens minus function words.
std::vector<std::string> content_tokens(std::string_view text);

/// True when `needle` occurs as a contiguous run inside `haystack`.
bool contains_token_run(const std::vector<std::string>& haystack, const std::vector<std::string>& needle);

/// A proposition bears an entity when it has a capitalized non-determiner word.
bool is_entity_bearing(const Proposition& proposition);

std::unique_ptr<Annotator> make_annotator(std::string_view name, std::shared_ptr<AdapterClient> client = nullptr,
                                          ChunkPolicy policy = {});

}  // namespace cground
