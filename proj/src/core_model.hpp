#pragma once

// Shared domain types: turns, conversations, propositions and the common
// ground container, plus the canonical JSON-lines dataset format.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cground {

/// Separator placed between concatenated context parts.
inline constexpr std::string_view kPartSeparator = " ||| ";

/// Joins parts with kPartSeparator. Empty parts still occupy a slot.
std::string render_concatenation(const std::vector<std::string>& parts);

/// Casefold (ASCII), trim and collapse internal whitespace.
std::string normalize_text(std::string_view text);

struct DocumentContext {
    std::string title;
    std::string first_sentence;

    std::string render() const;
    bool operator==(const DocumentContext&) const = default;
};

class Proposition {
public:
    Proposition(std::string surface, int origin_turn);

    const std::string& surface() const noexcept { return surface_; }
    const std::string& normalized() const noexcept { return normalized_; }
    int origin_turn() const noexcept { return origin_turn_; }

    // Identity is the normalized form only.
    friend bool operator==(const Proposition& a, const Proposition& b) noexcept {
        return a.normalized_ == b.normalized_;
    }

private:
    std::string surface_;
    std::string normalized_;
    int origin_turn_;
};

enum class CgStatus { Selected, Retained };

const char* cg_status_name(CgStatus status) noexcept;

struct CgEntry {
    Proposition proposition;
    CgStatus status = CgStatus::Retained;
};

/// Ordered set of propositions keyed by normalized form. The first
/// occurrence of a normalized form wins and keeps its origin turn.
class CommonGround {
public:
    /// Returns false when the normalized form is already present.
    bool add(const Proposition& proposition, CgStatus status = CgStatus::Retained);

    bool contains(std::string_view normalized) const;
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    const std::vector<CgEntry>& entries() const noexcept { return entries_; }

    void set_status(std::size_t index, CgStatus status);
    void set_all(CgStatus status);

    std::vector<Proposition> full() const;
    std::vector<Proposition> selected() const;

    /// Comma-joined surfaces of the given view, in CG order.
    static std::string render(const std::vector<Proposition>& view);

private:
    std::vector<CgEntry> entries_;
};

struct Turn {
    std::string conversation_id;
    int turn_no = 0;
    std::string question;
    std::optional<std::string> rewrite;
    std::optional<std::string> answer;
    std::optional<std::string> answer_source;
    std::optional<std::vector<Proposition>> gold_cg;

    /// The rewrite, or the question when no rewrite is recorded.
    const std::string& effective_rewrite() const { return rewrite ? *rewrite : question; }
};

struct Conversation {
    std::string conversation_id;
    std::optional<DocumentContext> doc;
    std::vector<Turn> turns;
};

struct QaPair {
    std::string question;
    std::string answer;
};

/// Input to every query formulation at turn n: doc, conv_[0:n-1] and q_n.
struct ConversationContext {
    std::optional<DocumentContext> doc;
    std::vector<QaPair> history;
    std::string current_question;

    int turn_index() const noexcept { return static_cast<int>(history.size()); }
};

/// Context for turn `turn_index` of a conversation using gold answers as history.
ConversationContext context_at(const Conversation& conversation, std::size_t turn_index);

struct Passage {
    std::string passage_id;
    std::string text;
    std::optional<std::string> source_url;
};

/// Reads the canonical JSON-lines dataset. Turns are grouped by
/// conversation_id (first-appearance order) and sorted by turn_no; files
/// whose turn numbers start at 1 are shifted to 0-based.
std::vector<Conversation> load_dataset(const std::filesystem::path& path);
std::vector<Conversation> parse_dataset(std::string_view text);

/// Key-sorted canonical serialization, one turn per line.
std::string serialize_dataset(const std::vector<Conversation>& conversations);
void save_dataset(const std::vector<Conversation>& conversations,
                  const std::filesystem::path& path);

std::vector<Passage> load_passages(const std::filesystem::path& path);
std::vector<Passage> parse_passages(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace cground
