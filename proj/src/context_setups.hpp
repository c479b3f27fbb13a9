#pragma once

// Query formulations fed to the retriever and the reader, one per input setup.

#include "core_model.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cground {

class AdapterClient;

enum class Setup { Original, Concat, Rewrite, Summary, Cg, CgFull, CgFullCg, RewriteG, CgG };

const char* setup_name(Setup setup) noexcept;          // CLI vocabulary: "cg_full_cg"
const char* setup_display_name(Setup setup) noexcept;  // table rows: "CG-full/CG"
std::optional<Setup> setup_from_name(std::string_view name);
const std::vector<Setup>& all_setups();

/// Setups whose formulation reads the common ground.
bool setup_uses_cg(Setup setup) noexcept;

struct QueryFormulation {
    Setup setup = Setup::Original;
    std::string retriever_query;
    std::string reader_query;
};

using TextService = std::function<std::string(const ConversationContext&)>;

struct FormulationServices {
    TextService rewrite;    // r_n from doc, conv_[0:n-1] and q_n
    TextService summarize;  // summ_[0:n-1] from doc and conv_[0:n-1]
};

struct FormulationOptions {
    // Reader inputs keep at most this many whitespace tokens, dropping the
    // oldest material first. Zero disables truncation.
    int max_reader_tokens = 384;
};

/// Builds the retriever and reader inputs. rewrite_g and cg_g formulate like
/// rewrite and cg_full_cg; the caller supplies gold services and gold CG.
/// Throws Error(Config) when the setup needs a service that is not set.
QueryFormulation formulate(Setup setup, const ConversationContext& ctx, const CommonGround& cg,
                           const FormulationServices& services, const FormulationOptions& options = {});

/// Keeps the last `max_tokens` whitespace-separated tokens of `text`.
std::string truncate_left(std::string_view text, int max_tokens);

/// Offline stand-in for a summarizer: doc first sentence plus the latest answer.
/// Its outputs are not comparable with a trained summarization model.
std::string fallback_summary(const ConversationContext& ctx);

/// Adapter-backed services: rewrite {doc, history, question} -> {rewrite};
/// summarize {doc, history} -> {summary}.
TextService external_rewriter(std::shared_ptr<AdapterClient> client);
TextService external_summarizer(std::shared_ptr<AdapterClient> client);

}  // namespace cground
