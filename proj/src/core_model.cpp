#include "core_model.hpp"

#include "error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

using json = nlohmann::json;

namespace cground {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid_argument";
        case ErrorCode::Parse: return "parse_error";
        case ErrorCode::Integrity: return "integrity_error";
        case ErrorCode::Io: return "io_error";
        case ErrorCode::NotFound: return "not_found";
        case ErrorCode::Config: return "config_error";
        case ErrorCode::Backend: return "backend_error";
        case ErrorCode::Timeout: return "timeout";
    }
    return "unknown";
}

std::string render_concatenation(const std::vector<std::string>& parts) {
    if (parts.empty()) {
        throw Error(ErrorCode::InvalidArgument, "render_concatenation: no parts");
    }
    std::string out = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) {
        out += kPartSeparator;
        out += parts[i];
    }
    return out;
}

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        auto uc = static_cast<unsigned char>(c);
        if (std::isspace(uc)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(uc)));
    }
    return out;
}

std::string DocumentContext::render() const {
    return render_concatenation({title, first_sentence});
}

Proposition::Proposition(std::string surface, int origin_turn)
    : surface_(std::move(surface)), normalized_(normalize_text(surface_)), origin_turn_(origin_turn) {
    if (normalized_.empty()) {
        throw Error(ErrorCode::InvalidArgument, "proposition surface must be non-empty");
    }
}

const char* cg_status_name(CgStatus status) noexcept {
    return status == CgStatus::Selected ? "selected" : "retained";
}

bool CommonGround::add(const Proposition& proposition, CgStatus status) {
    if (contains(proposition.normalized())) return false;
    // keep entries ordered by origin turn, insertion order within a turn
    auto pos = std::upper_bound(entries_.begin(), entries_.end(), proposition.origin_turn(),
                                [](int turn, const CgEntry& e) { return turn < e.proposition.origin_turn(); });
    entries_.insert(pos, CgEntry{proposition, status});
    return true;
}

bool CommonGround::contains(std::string_view normalized) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const CgEntry& e) { return e.proposition.normalized() == normalized; });
}

void CommonGround::set_status(std::size_t index, CgStatus status) {
    entries_.at(index).status = status;
}

void CommonGround::set_all(CgStatus status) {
    for (auto& e : entries_) e.status = status;
}

std::vector<Proposition> CommonGround::full() const {
    std::vector<Proposition> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.proposition);
    return out;
}

std::vector<Proposition> CommonGround::selected() const {
    std::vector<Proposition> out;
    for (const auto& e : entries_) {
        if (e.status == CgStatus::Selected) out.push_back(e.proposition);
    }
    return out;
}

std::string CommonGround::render(const std::vector<Proposition>& view) {
    std::string out;
    for (const auto& p : view) {
        if (!out.empty()) out += ", ";
        out += p.surface();
    }
    return out;
}

ConversationContext context_at(const Conversation& conversation, std::size_t turn_index) {
    ConversationContext ctx;
    ctx.doc = conversation.doc;
    for (std::size_t i = 0; i < turn_index && i < conversation.turns.size(); ++i) {
        const auto& t = conversation.turns[i];
        ctx.history.push_back({t.question, t.answer.value_or("")});
    }
    ctx.current_question = conversation.turns.at(turn_index).question;
    return ctx;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

namespace {

std::optional<std::string> optional_string(const json& j, const char* key, std::size_t line_no) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
        throw Error(ErrorCode::Parse,
                    "line " + std::to_string(line_no) + ": field '" + key + "' must be a string");
    }
    return it->get<std::string>();
}

std::string required_string(const json& j, const char* key, std::size_t line_no) {
    auto v = optional_string(j, key, line_no);
    if (!v) {
        throw Error(ErrorCode::Parse,
                    "line " + std::to_string(line_no) + ": missing field '" + key + "'");
    }
    return *v;
}

template <typename Fn>
void for_each_json_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        auto line = text.substr(start, end - start);
        start = end + 1;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
            if (end == text.size()) break;
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object()) {
            throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected a JSON object");
        }
        fn(j, line_no);
        if (end == text.size()) break;
    }
}

}  // namespace

std::vector<Conversation> parse_dataset(std::string_view text) {
    struct RawTurn {
        Turn turn;
        std::optional<DocumentContext> doc;
        std::size_t line_no;
    };
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<RawTurn>> groups;

    for_each_json_line(text, [&](const json& j, std::size_t line_no) {
        RawTurn raw;
        raw.line_no = line_no;
        raw.turn.conversation_id = required_string(j, "conversation_id", line_no);
        auto tn = j.find("turn_no");
        if (tn == j.end() || !tn->is_number_integer()) {
            throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": 'turn_no' must be an integer");
        }
        raw.turn.turn_no = tn->get<int>();
        raw.turn.question = required_string(j, "question", line_no);
        raw.turn.rewrite = optional_string(j, "rewrite", line_no);
        raw.turn.answer = optional_string(j, "answer", line_no);
        raw.turn.answer_source = optional_string(j, "answer_source", line_no);
        auto title = optional_string(j, "doc_title", line_no);
        auto first = optional_string(j, "doc_first_sentence", line_no);
        if (title || first) raw.doc = DocumentContext{title.value_or(""), first.value_or("")};
        if (auto g = j.find("gold_cg"); g != j.end() && !g->is_null()) {
            if (!g->is_array()) {
                throw Error(ErrorCode::Parse, "line " + std::to_string(line_no) + ": 'gold_cg' must be a list");
            }
            std::vector<Proposition> props;
            for (const auto& s : *g) {
                if (!s.is_string() || normalize_text(s.get<std::string>()).empty()) {
                    throw Error(ErrorCode::Parse,
                                "line " + std::to_string(line_no) + ": 'gold_cg' entries must be non-empty strings");
                }
                props.emplace_back(s.get<std::string>(), raw.turn.turn_no);
            }
            raw.turn.gold_cg = std::move(props);
        }
        auto [it, inserted] = groups.try_emplace(raw.turn.conversation_id);
        if (inserted) order.push_back(raw.turn.conversation_id);
        it->second.push_back(std::move(raw));
    });

    std::vector<Conversation> out;
    out.reserve(order.size());
    for (const auto& id : order) {
        auto& raws = groups[id];
        std::stable_sort(raws.begin(), raws.end(),
                         [](const RawTurn& a, const RawTurn& b) { return a.turn.turn_no < b.turn.turn_no; });
        for (std::size_t i = 1; i < raws.size(); ++i) {
            if (raws[i].turn.turn_no == raws[i - 1].turn.turn_no) {
                throw Error(ErrorCode::Integrity, "line " + std::to_string(raws[i].line_no) +
                                                      ": duplicate turn " + std::to_string(raws[i].turn.turn_no) +
                                                      " in conversation " + id);
            }
        }
        const int base = raws.front().turn.turn_no;
        if (base != 0 && base != 1) {
            throw Error(ErrorCode::Integrity, "line " + std::to_string(raws.front().line_no) +
                                                  ": conversation " + id + " does not start at turn 0 or 1");
        }
        Conversation conv;
        conv.conversation_id = id;
        conv.doc = raws.front().doc;
        for (std::size_t i = 0; i < raws.size(); ++i) {
            auto& raw = raws[i];
            if (raw.turn.turn_no - base != static_cast<int>(i)) {
                throw Error(ErrorCode::Integrity, "line " + std::to_string(raw.line_no) +
                                                      ": non-consecutive turn in conversation " + id);
            }
            if (raw.doc != conv.doc) {
                throw Error(ErrorCode::Integrity, "line " + std::to_string(raw.line_no) +
                                                      ": doc differs across turns of conversation " + id);
            }
            raw.turn.turn_no -= base;
            if (raw.turn.gold_cg) {
                std::vector<Proposition> shifted;
                for (const auto& p : *raw.turn.gold_cg) shifted.emplace_back(p.surface(), raw.turn.turn_no);
                raw.turn.gold_cg = std::move(shifted);
            }
            conv.turns.push_back(std::move(raw.turn));
        }
        out.push_back(std::move(conv));
    }
    return out;
}

std::vector<Conversation> load_dataset(const std::filesystem::path& path) {
    return parse_dataset(read_file(path));
}

std::string serialize_dataset(const std::vector<Conversation>& conversations) {
    std::string out;
    for (const auto& conv : conversations) {
        for (const auto& t : conv.turns) {
            json j;  // std::map-backed object: keys serialize sorted
            j["conversation_id"] = t.conversation_id;
            j["turn_no"] = t.turn_no;
            j["question"] = t.question;
            if (t.rewrite) j["rewrite"] = *t.rewrite;
            if (t.answer) j["answer"] = *t.answer;
            if (t.answer_source) j["answer_source"] = *t.answer_source;
            if (conv.doc) {
                j["doc_title"] = conv.doc->title;
                j["doc_first_sentence"] = conv.doc->first_sentence;
            }
            if (t.gold_cg) {
                json arr = json::array();
                for (const auto& p : *t.gold_cg) arr.push_back(p.surface());
                j["gold_cg"] = std::move(arr);
            }
            out += j.dump(-1, ' ', false, json::error_handler_t::strict);
            out += '\n';
        }
    }
    return out;
}

void save_dataset(const std::vector<Conversation>& conversations, const std::filesystem::path& path) {
    write_file(path, serialize_dataset(conversations));
}

std::vector<Passage> parse_passages(std::string_view text) {
    std::vector<Passage> out;
    for_each_json_line(text, [&](const json& j, std::size_t line_no) {
        Passage p;
        p.passage_id = required_string(j, "passage_id", line_no);
        p.text = required_string(j, "text", line_no);
        p.source_url = optional_string(j, "source_url", line_no);
        out.push_back(std::move(p));
    });
    return out;
}

std::vector<Passage> load_passages(const std::filesystem::path& path) {
    return parse_passages(read_file(path));
}

}  // namespace cground
