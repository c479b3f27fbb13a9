#pragma once

// Builds the CG-enriched dataset: gold propositions per turn from rewrites,
// document enrichment, selector training labels and the validation split.

#include "annotation.hpp"
#include "core_model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cground {

struct SelectorExample {
    Proposition proposition;
    std::string question;
    std::string context_digest;  // rendering of CG-full at the turn
    int label = 0;
    std::string conversation_id;
    int turn_no = 0;
};

struct SelectorExamples {
    std::vector<SelectorExample> examples;
    std::vector<std::string> warnings;
};

using DocSource = std::unordered_map<std::string, DocumentContext>;

/// gold_cg of every turn = propositions of its rewrite (question if absent).
Conversation build_gold_cg(Conversation conversation, const Annotator& annotator);

Conversation enrich_with_doc(Conversation conversation, const DocSource& doc_source);

/// JSON-lines with conversation_id, doc_title, doc_first_sentence.
DocSource load_doc_source(const std::filesystem::path& path);
DocSource parse_doc_source(std::string_view text);

/// Fraction of turns whose conversation carries a doc.
double enrichment_coverage(const std::vector<Conversation>& conversations);

/// Union of gold_cg over turns 0..turn_index.
CommonGround gold_cg_full(const Conversation& conversation, std::size_t turn_index);

/// Label 1 iff the proposition's tokens occur as a contiguous run in the
/// normalized gold answer.
bool occurs_in_answer(const Proposition& proposition, std::string_view answer);

SelectorExamples build_selector_examples(const Conversation& conversation);

std::string serialize_selector_examples(const std::vector<SelectorExample>& examples);

/// Splits whole conversations; |validation| = round(fraction * N).
std::pair<std::vector<Conversation>, std::vector<Conversation>> split_train_validation(
    const std::vector<Conversation>& conversations, double fraction, std::uint64_t seed);

}  // namespace cground
