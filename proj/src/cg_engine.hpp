#pragma once

// Generator and Selector backends and the per-conversation session that
// accumulates propositions turn by turn and re-selects them per question.

#include "annotation.hpp"
#include "core_model.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cground {

class AdapterClient;

struct GeneratorConfig {
    bool use_doc = true;
    bool use_conv = true;
    bool include_current_question = true;

    void validate() const;
};

class Generator {
public:
    virtual ~Generator() = default;
    /// Propositions for turn ctx.turn_index(); origin_turn is set to that turn.
    virtual std::vector<Proposition> generate(const ConversationContext& ctx, const GeneratorConfig& config) const = 0;
};

/// Replays the gold CG of the conversation it was built for.
class OracleGenerator final : public Generator {
public:
    explicit OracleGenerator(std::shared_ptr<const Conversation> gold) : gold_(std::move(gold)) {}
    std::vector<Proposition> generate(const ConversationContext& ctx, const GeneratorConfig& config) const override;

private:
    std::shared_ptr<const Conversation> gold_;
};

/// Recency heuristic: nominals of q_n, of the latest (question, answer) pair
/// and of doc at the first turn. Without the current question it cannot tell
/// what is relevant and emits the nominals of the whole history and doc.
class RuleGenerator final : public Generator {
public:
    explicit RuleGenerator(std::shared_ptr<const Annotator> annotator) : annotator_(std::move(annotator)) {}
    std::vector<Proposition> generate(const ConversationContext& ctx, const GeneratorConfig& config) const override;

private:
    std::shared_ptr<const Annotator> annotator_;
};

class ExternalGenerator final : public Generator {
public:
    explicit ExternalGenerator(std::shared_ptr<AdapterClient> client) : client_(std::move(client)) {}
    std::vector<Proposition> generate(const ConversationContext& ctx, const GeneratorConfig& config) const override;

private:
    std::shared_ptr<AdapterClient> client_;
};

struct SelectionQuery {
    std::string question;
    int turn_no = 0;
    std::optional<QaPair> previous;  // the (question, answer) pair of turn n-1
};

class Selector {
public:
    virtual ~Selector() = default;
    /// Same membership; every status rewritten (selected or retained).
    virtual CommonGround select(CommonGround cg, const SelectionQuery& query) const = 0;
};

/// Selects propositions labeled 1 for the turn: those occurring in its gold answer.
class OracleSelector final : public Selector {
public:
    explicit OracleSelector(std::shared_ptr<const Conversation> gold) : gold_(std::move(gold)) {}
    CommonGround select(CommonGround cg, const SelectionQuery& query) const override;

private:
    std::shared_ptr<const Conversation> gold_;
};

/// Selects exactly the turn's own gold propositions (gold CG_n).
class GoldTurnSelector final : public Selector {
public:
    explicit GoldTurnSelector(std::shared_ptr<const Conversation> gold) : gold_(std::move(gold)) {}
    CommonGround select(CommonGround cg, const SelectionQuery& query) const override;

private:
    std::shared_ptr<const Conversation> gold_;
};

/// Lexical overlap with the question, carry-over of what the previous
/// question talked about (plus entities named in its answer), and a pronoun
/// fallback to the conversation's first entity.
class RuleSelector final : public Selector {
public:
    CommonGround select(CommonGround cg, const SelectionQuery& query) const override;
};

/// Classifies every proposition independently (task "classify").
class ExternalSelector final : public Selector {
public:
    explicit ExternalSelector(std::shared_ptr<AdapterClient> client) : client_(std::move(client)) {}
    CommonGround select(CommonGround cg, const SelectionQuery& query) const override;

private:
    std::shared_ptr<AdapterClient> client_;
};

/// Fraction of a proposition's content tokens found in `tokens`.
double overlap_score(const Proposition& proposition, const std::vector<std::string>& tokens);

struct StepResult {
    std::vector<Proposition> generated;
    CommonGround cg;  // snapshot after selection: full() and selected() views
    std::string answer;
};

/// Single-writer state machine for one conversation.
class CgSession {
public:
    using AnswerFn = std::function<std::string(const ConversationContext& ctx, const CommonGround& cg)>;

    CgSession(std::optional<DocumentContext> doc, std::shared_ptr<const Generator> generator,
              std::shared_ptr<const Selector> selector, GeneratorConfig config = {});

    /// Generate, merge, select; then obtain the answer and extend the history.
    StepResult step(const std::string& question, const AnswerFn& answer_fn);

    const CommonGround& cg() const noexcept { return cg_; }
    const ConversationContext& context() const noexcept { return ctx_; }
    int turn() const noexcept { return ctx_.turn_index(); }

private:
    ConversationContext ctx_;
    CommonGround cg_;
    std::shared_ptr<const Generator> generator_;
    std::shared_ptr<const Selector> selector_;
    GeneratorConfig config_;
};

}  // namespace cground
