#pragma once

// Answer-span extraction and retriever/reader score fusion:
//   fused = (1 - mu) * s_ret + mu * s_rea
// computed on min-max normalized components unless raw fusion is requested.

#include "annotation.hpp"
#include "core_model.hpp"
#include "retrieval.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cground {

class AdapterClient;

struct AnswerCandidate {
    std::string text;
    std::string passage_id;
    std::size_t begin = 0;  // byte offsets of the span in the passage text
    std::size_t end = 0;
    double s_rea = 0.0;
    double s_rea_norm = 0.0;
    double s_ret = 0.0;
    double s_ret_norm = 0.0;
    int passage_rank = 0;
    double fused = 0.0;
};

class PassageReader {
public:
    virtual ~PassageReader() = default;
    /// Spans are verbatim substrings of passage.text.
    virtual std::vector<AnswerCandidate> read(const Passage& passage, std::string_view reader_query) const = 0;
};

/// Walks sentences by content-token overlap with the query and returns a noun
/// chunk from the first one that has a chunk adding new material: chunks
/// sharing no content word with the query first, then the one closest to a
/// matched query term. At most one span per passage; when no sentence offers
/// such a chunk the best sentence is returned whole with score 0.
class LexicalReader final : public PassageReader {
public:
    explicit LexicalReader(std::shared_ptr<const Annotator> annotator) : annotator_(std::move(annotator)) {}
    std::vector<AnswerCandidate> read(const Passage& passage, std::string_view reader_query) const override;

private:
    std::shared_ptr<const Annotator> annotator_;
};

class ExternalReader final : public PassageReader {
public:
    explicit ExternalReader(std::shared_ptr<AdapterClient> client) : client_(std::move(client)) {}
    std::vector<AnswerCandidate> read(const Passage& passage, std::string_view reader_query) const override;

private:
    std::shared_ptr<AdapterClient> client_;
};

struct SentenceSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Sentences end at '.', '?' or '!' followed by whitespace or end of text.
std::vector<SentenceSpan> split_sentences(std::string_view text);

struct FusionOptions {
    double mu = 0.5;
    bool raw_scores = false;  // blend raw s_ret/s_rea instead of normalized ones
};

/// Normalizes reader scores within the list, blends, and ranks by fused score
/// descending; ties by passage rank, then span text. Throws on mu outside [0,1].
std::vector<AnswerCandidate> fuse(std::vector<std::pair<RankedPassage, AnswerCandidate>> candidates,
                                  const FusionOptions& options);

}  // namespace cground
