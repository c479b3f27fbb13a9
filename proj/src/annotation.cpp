#include "annotation.hpp"

#include "adapter.hpp"
#include "error.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace cground {
namespace {

using WordSet = std::unordered_set<std::string_view>;

const WordSet& determiners() {
    static const WordSet words = {
        "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every", "no",
        "another", "my", "your", "his", "her", "its", "our", "their", "all", "both", "either",
        "neither", "such"};
    return words;
}

const WordSet& auxiliaries() {
    static const WordSet words = {
        "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "have", "has",
        "had", "having", "can", "could", "will", "would", "shall", "should", "may", "might", "must",
        "isn't", "aren't", "wasn't", "weren't", "don't", "doesn't", "didn't", "haven't", "hasn't",
        "hadn't", "can't", "couldn't", "won't", "wouldn't", "shouldn't"};
    return words;
}

const WordSet& pronouns() {
    static const WordSet words = {
        "i", "me", "you", "he", "him", "she", "it", "we", "us", "they", "them", "myself", "yourself",
        "himself", "herself", "itself", "ourselves", "themselves", "mine", "yours", "hers", "ours",
        "theirs", "someone", "anyone", "everyone", "something", "anything", "everything", "nothing",
        "nobody", "somebody", "anybody", "there", "it's", "that's", "there's", "i'm", "he's",
        "she's", "they're", "we're", "you're", "one"};
    return words;
}

const WordSet& other_function_words() {
    static const WordSet words = {
        // wh-words
        "what", "which", "who", "whom", "whose", "when", "where", "why", "how", "what's", "who's",
        "where's", "how's", "when's", "whats",
        // prepositions
        "of", "in", "on", "at", "by", "for", "with", "about", "against", "between", "into", "through",
        "during", "before", "after", "above", "below", "to", "from", "up", "down", "out", "off",
        "over", "under", "as", "than", "like", "among", "across", "along", "around", "behind",
        "beyond", "near", "since", "until", "upon", "within", "without", "toward", "towards", "via", "unlike",
        "per",
        // conjunctions
        "and", "or", "but", "nor", "so", "yet", "if", "because", "while", "although", "though",
        "whether", "unless", "then", "once",
        // adverbs and particles
        "not", "n't", "also", "very", "too", "just", "only", "here", "more", "most", "much", "many",
        "else", "ever", "never", "always", "often", "still", "already", "even", "yes", "ok", "well",
        "now", "today", "soon", "later", "ago", "away", "back", "together", "almost", "perhaps",
        "however", "again", "further", "really", "quite", "about", "etc", "instead", "anymore"};
    return words;
}

const WordSet& personal_pronouns() {
    static const WordSet words = {"he", "him", "his", "she", "her", "hers", "it", "its",
                                  "they", "them", "their", "theirs", "he's", "she's", "it's"};
    return words;
}

const WordSet& name_particles() {
    static const WordSet words = {"van", "von", "der", "den", "de", "da", "di", "del", "della",
                                  "du", "la", "le", "bin", "ibn", "al"};
    return words;
}

const WordSet& adjective_lexicon() {
    static const WordSet words = {
        "old", "new", "young", "average", "big", "small", "large", "great", "good", "bad", "best",
        "better", "worse", "worst", "high", "low", "long", "short", "early", "late", "first", "last",
        "second", "third", "next", "previous", "other", "same", "different", "true", "false", "free",
        "full", "main", "major", "minor", "important", "popular", "famous", "common", "general",
        "public", "private", "national", "international", "local", "social", "political",
        "economic", "human", "real", "whole", "entire", "certain", "clear", "easy", "hard",
        "difficult", "possible", "special", "similar", "various", "several", "own", "top", "final",
        "current", "recent", "modern", "ancient", "scalable", "efficient", "fat", "total", "annual",
        "typical", "upstream", "downstream", "global", "early", "former", "professional", "key",
        "basic", "primary", "senior", "junior", "original", "oldest", "youngest", "largest",
        "biggest", "highest", "lowest", "longest", "fastest", "richest", "dark", "light", "hot",
        "cold", "warm", "red", "blue", "green", "black", "white", "one", "two", "three", "four",
        "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve", "twenty", "hundred",
        "thousand", "million", "billion", "half", "rare", "rich", "poor", "strong", "weak", "tall", "wide", "deep", "narrow", "heavy",
        "northern", "southern", "eastern", "western", "central", "retired"};
    return words;
}

const WordSet& noun_exceptions() {
    // words with verb/adverb-looking suffixes that are nouns
    static const WordSet words = {
        "thing", "things", "king", "ring", "string", "spring", "wing", "building", "meeting",
        "morning", "evening", "ceiling", "painting", "clothing", "wedding", "pudding", "darling",
        "family", "supply", "reply", "assembly", "fly", "ally", "rally", "anomaly", "monopoly",
        "butterfly", "lily", "speed", "seed", "need", "bed", "bread", "shed", "reed", "weed",
        "feed", "creed", "greed", "hundred", "sled", "red", "table", "cable", "vegetable",
        "variable", "bible", "olive", "archive", "motive", "detective", "executive", "native",
        "relative", "representative", "objective", "sibling", "ceiling", "lightning", "training",
        "funding", "housing", "ending", "setting", "heading", "crossing", "landing", "opening"};
    return words;
}

const WordSet& verb_lexicon() {
    static const std::unordered_set<std::string> storage = [] {
        const std::vector<std::string> bases = {
            "play", "come", "write", "go", "make", "take", "get", "know", "say", "describe", "use",
            "give", "find", "think", "tell", "become", "leave", "win", "start", "work", "live", "die",
            "mean", "happen", "include", "call", "run", "see", "want", "begin", "help", "show",
            "try", "ask", "feel", "keep", "let", "put", "seem", "turn", "provide", "hold",
            "bring", "lead", "stand", "pay", "meet", "learn", "change", "create", "allow", "move",
            "build", "stay", "fall", "reach", "kill", "remain", "suggest", "raise", "pass", "sell",
            "require", "report", "decide", "pull", "join", "marry", "study", "teach", "release",
            "retire", "appear", "connect", "serve", "grow", "lose", "invent", "discover", "produce",
            "perform", "compose", "sing", "paint", "direct", "coach", "sign", "attend", "graduate",
            "publish", "eat", "cause", "reduce", "emit", "cost", "earn", "explain", "list", "name",
            "compare", "happen", "return", "receive", "spend", "drive", "fly", "choose", "fight",
            "catch", "rise", "speak", "break", "wear", "found", "establish", "develop", "design",
            "contain", "consider", "believe", "write", "inspire", "influence", "oppose", "visit",
            "travel", "originate", "practice", "practise", "end"};
        const std::vector<std::string> irregular = {
            "wrote", "written", "went", "gone", "made", "took", "taken", "got", "gotten", "knew",
            "known", "said", "gave", "given", "thought", "told", "became", "left", "won", "meant",
            "ran", "saw", "seen", "began", "begun", "felt", "kept", "held", "brought", "stood",
            "paid", "met", "fell", "lost", "grew", "grown", "sang", "sung", "ate", "eaten", "born",
            "sold", "taught", "built", "spent", "drove", "driven", "flew", "flown", "chose",
            "chosen", "fought", "caught", "rose", "risen", "spoke", "spoken", "broke", "broken",
            "wore", "worn", "running", "winning", "getting", "putting", "cutting", "stopped",
            "planned", "starred", "starring", "led", "did", "done", "doing"};
        std::unordered_set<std::string> out(irregular.begin(), irregular.end());
        for (const auto& b : bases) {
            out.insert(b);
            const char last = b.back();
            const bool consonant_y = last == 'y' && b.size() > 1 && std::string("aeiou").find(b[b.size() - 2]) == std::string::npos;
            if (consonant_y) {
                out.insert(b.substr(0, b.size() - 1) + "ies");
                out.insert(b.substr(0, b.size() - 1) + "ied");
            } else if (last == 's' || last == 'x' || last == 'o' || b.ends_with("sh") || b.ends_with("ch")) {
                out.insert(b + "es");
                out.insert(b + "ed");
            } else if (last == 'e') {
                out.insert(b + "s");
                out.insert(b + "d");
            } else {
                out.insert(b + "s");
                out.insert(b + "ed");
            }
            if (last == 'e' && b.size() > 2) {
                out.insert(b.substr(0, b.size() - 1) + "ing");
            } else {
                out.insert(b + "ing");
            }
        }
        return out;
    }();
    static const WordSet view = [] {
        WordSet v;
        for (const auto& s : storage) v.insert(s);
        return v;
    }();
    return view;
}

bool is_ascii_punct(char c) {
    auto uc = static_cast<unsigned char>(c);
    return uc < 128 && std::ispunct(uc);
}

bool is_punct_token(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), is_ascii_punct);
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_capitalized(std::string_view s) {
    return !s.empty() && std::isupper(static_cast<unsigned char>(s.front()));
}

bool is_acronym(std::string_view s) {
    int letters = 0;
    for (char c : s) {
        auto uc = static_cast<unsigned char>(c);
        if (std::isalpha(uc)) {
            if (!std::isupper(uc)) return false;
            ++letters;
        }
    }
    return letters >= 2;
}

// Amounts such as "£30,000" read as numbers.
bool starts_with_digit(std::string_view s) {
    for (std::string_view sym : {"$", "£", "€", "¥"}) {
        if (s.starts_with(sym)) {
            s.remove_prefix(sym.size());
            break;
        }
    }
    return !s.empty() && std::isdigit(static_cast<unsigned char>(s.front()));
}

bool looks_like_year(std::string_view s) {
    if (s.size() < 4) return false;
    for (int i = 0; i < 4; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[static_cast<std::size_t>(i)]))) return false;
    }
    return s.size() == 4 || !std::isdigit(static_cast<unsigned char>(s[4]));
}

bool has_suffix(std::string_view w, std::string_view suffix, std::size_t min_len) {
    return w.size() >= min_len && w.ends_with(suffix);
}

bool adjective_by_suffix(std::string_view w) {
    for (std::string_view suf : {"ous", "ful", "less", "ive", "able", "ible", "ical", "ional"}) {
        if (has_suffix(w, suf, suf.size() + 3)) return true;
    }
    return false;
}

bool is_modal_or_do(std::string_view w) {
    static const WordSet words = {"do", "does", "did", "can", "could", "will", "would",
                                  "should", "may", "might", "must", "shall"};
    return words.count(w) > 0;
}

// True when toks[i] directly follows "do/modal + subject", the subject being a
// pronoun or a short noun phrase.
bool follows_do_subject(const std::vector<AnnotatedToken>& toks, std::size_t i) {
    if (i >= 2 && pronouns().count(to_lower(toks[i - 1].text)) && is_modal_or_do(to_lower(toks[i - 2].text))) {
        return true;
    }
    // "did the company profits fall": a noun-phrase subject only counts when
    // nothing content-like follows.
    if (i + 1 < toks.size() && !is_punct_token(toks[i + 1].text)) {
        const auto next = to_lower(toks[i + 1].text);
        if (!is_function_word(next) || auxiliaries().count(next)) return false;
    }
    std::size_t j = i;
    for (int span = 0; span < 4 && j > 0; ++span) {
        const auto& prev = toks[j - 1];
        if (prev.pos != Pos::Propn && prev.pos != Pos::Noun && prev.pos != Pos::Det && prev.pos != Pos::Adj) break;
        --j;
    }
    return j < i && j > 0 && is_modal_or_do(to_lower(toks[j - 1].text));
}

}  // namespace

const char* pos_name(Pos pos) noexcept {
    switch (pos) {
        case Pos::Noun: return "NOUN";
        case Pos::Propn: return "PROPN";
        case Pos::Adj: return "ADJ";
        case Pos::Det: return "DET";
        case Pos::Verb: return "VERB";
        case Pos::Other: return "OTHER";
    }
    return "OTHER";
}

Pos pos_from_name(std::string_view name) {
    if (name == "NOUN") return Pos::Noun;
    if (name == "PROPN") return Pos::Propn;
    if (name == "ADJ") return Pos::Adj;
    if (name == "DET") return Pos::Det;
    if (name == "VERB") return Pos::Verb;
    if (name == "OTHER") return Pos::Other;
    throw Error(ErrorCode::Parse, "unknown POS tag '" + std::string(name) + "'");
}

bool is_function_word(std::string_view lower_word) {
    return determiners().count(lower_word) || auxiliaries().count(lower_word) ||
           pronouns().count(lower_word) || other_function_words().count(lower_word);
}

bool is_personal_pronoun(std::string_view lower_word) {
    return personal_pronouns().count(lower_word) > 0;
}

std::vector<AnnotatedToken> tokenize(std::string_view text) {
    std::vector<AnnotatedToken> tokens;
    auto push = [&](std::size_t b, std::size_t e) {
        AnnotatedToken t;
        t.text = std::string(text.substr(b, e - b));
        t.index = static_cast<int>(tokens.size());
        t.begin = b;
        t.end = e;
        tokens.push_back(std::move(t));
    };
    std::size_t i = 0;
    while (i < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
            continue;
        }
        std::size_t b = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t e = i;
        std::size_t core_b = b;
        while (core_b < e && is_ascii_punct(text[core_b])) ++core_b;
        std::size_t core_e = e;
        while (core_e > core_b && is_ascii_punct(text[core_e - 1])) --core_e;
        for (std::size_t k = b; k < core_b; ++k) push(k, k + 1);
        if (core_b < core_e) push(core_b, core_e);
        for (std::size_t k = core_e; k < e; ++k) {
            if (k >= core_b) push(k, k + 1);
        }
    }
    return tokens;
}

std::vector<ChunkSpan> find_chunks(const std::vector<AnnotatedToken>& tokens, ChunkPolicy policy) {
    std::vector<ChunkSpan> chunks;
    const int n = static_cast<int>(tokens.size());
    auto at = [&](int k) -> const AnnotatedToken& { return tokens[static_cast<std::size_t>(k)]; };
    int i = 0;
    while (i < n) {
        const auto& t = at(i);
        if (!(t.pos == Pos::Det || t.pos == Pos::Adj || t.is_core())) {
            ++i;
            continue;
        }
        const int start = i;
        int j = i;
        if (at(j).pos == Pos::Det) ++j;
        int last_core = -1;
        while (j < n && (at(j).pos == Pos::Adj || at(j).is_core())) {
            if (at(j).is_entity && j > start && at(j - 1).is_core() && !at(j - 1).is_entity) break;
            if (at(j).is_core()) last_core = j;
            ++j;
        }
        if (last_core < 0) {
            i = start + 1;
            continue;
        }
        int chunk_start = start;
        if (!policy.include_determiners && at(chunk_start).pos == Pos::Det) ++chunk_start;
        chunks.push_back({chunk_start, last_core + 1});
        i = last_core + 1;
    }
    return chunks;
}

AnnotatedSentence ReferenceAnnotator::annotate(std::string_view text) const {
    AnnotatedSentence out;
    out.text = std::string(text);
    out.tokens = tokenize(text);
    auto& toks = out.tokens;
    const std::size_t n = toks.size();

    // First pass: lexical tags with sentence-position awareness.
    std::vector<bool> sentence_initial(n, false);
    {
        bool initial = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (is_punct_token(toks[i].text)) {
                if (toks[i].text == "." || toks[i].text == "?" || toks[i].text == "!") initial = true;
                continue;
            }
            sentence_initial[i] = initial;
            initial = false;
        }
    }
    auto next_word = [&](std::size_t i) -> const AnnotatedToken* {
        if (i + 1 < n && !is_punct_token(toks[i + 1].text)) return &toks[i + 1];
        return nullptr;
    };

    for (std::size_t i = 0; i < n; ++i) {
        auto& t = toks[i];
        const std::string lower = to_lower(t.text);
        if (is_punct_token(t.text)) {
            t.pos = Pos::Other;
            continue;
        }
        if (is_acronym(t.text) && t.text.size() >= 2) {
            t.pos = Pos::Propn;
            t.is_entity = true;
            continue;
        }
        // "Guido van Rossum", "Leonardo da Vinci"
        if (name_particles().count(lower) && i > 0 && toks[i - 1].pos == Pos::Propn) {
            const auto* nx = next_word(i);
            if (nx && is_capitalized(nx->text)) {
                t.pos = Pos::Propn;
                t.is_entity = true;
                continue;
            }
        }
        if (determiners().count(lower)) {
            t.pos = Pos::Det;
            continue;
        }
        if (auxiliaries().count(lower)) {
            t.pos = Pos::Verb;
            continue;
        }
        if (pronouns().count(lower) || other_function_words().count(lower)) {
            t.pos = Pos::Other;
            continue;
        }
        if (starts_with_digit(t.text)) {
            t.pos = looks_like_year(t.text) ? Pos::Propn : Pos::Adj;
            t.is_entity = looks_like_year(t.text);
            continue;
        }
        if (is_capitalized(t.text)) {
            if (!sentence_initial[i]) {
                t.pos = Pos::Propn;
                t.is_entity = true;
                continue;
            }
            const auto* nx = next_word(i);
            bool next_is_name = nx && is_capitalized(nx->text) && !is_function_word(to_lower(nx->text));
            if (nx && !next_is_name && name_particles().count(to_lower(nx->text)) && i + 2 < n) {
                next_is_name = is_capitalized(toks[i + 2].text);
            }
            if (verb_lexicon().count(lower)) {
                t.pos = Pos::Verb;
            } else if (adjective_lexicon().count(lower)) {
                t.pos = Pos::Adj;
            } else if (next_is_name) {
                t.pos = Pos::Propn;
                t.is_entity = true;
            } else {
                t.pos = Pos::Noun;
            }
            continue;
        }
        if (noun_exceptions().count(lower)) {
            t.pos = Pos::Noun;
            continue;
        }
        const bool after_modifier = i > 0 && (toks[i - 1].pos == Pos::Det || toks[i - 1].pos == Pos::Adj);
        const bool ing = has_suffix(lower, "ing", 6);
        const bool ed = has_suffix(lower, "ed", 5) && !lower.ends_with("eed");
        if (verb_lexicon().count(lower)) {
            if (!after_modifier) {
                t.pos = Pos::Verb;
            } else {
                const auto* nx = next_word(i);
                const bool noun_follows = nx && !is_function_word(to_lower(nx->text));
                t.pos = (ing || ed) && noun_follows ? Pos::Adj : Pos::Noun;
            }
            continue;
        }
        if (adjective_lexicon().count(lower) || adjective_by_suffix(lower)) {
            t.pos = Pos::Adj;
            continue;
        }
        if (has_suffix(lower, "ly", 5)) {
            t.pos = Pos::Other;
            continue;
        }
        if (ing || ed) {
            if (after_modifier) {
                const auto* nx = next_word(i);
                const bool noun_follows = nx && !is_function_word(to_lower(nx->text));
                t.pos = noun_follows ? Pos::Adj : Pos::Noun;
            } else {
                t.pos = Pos::Verb;
            }
            continue;
        }
        // "did he study", "does Messi play", "does the Nile flow"
        if (follows_do_subject(toks, i)) {
            t.pos = Pos::Verb;
            continue;
        }
        t.pos = Pos::Noun;
    }

    // Entity ids: each maximal run of entity tokens is one mention.
    int next_id = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!toks[i].is_entity) continue;
        if (i > 0 && toks[i - 1].is_entity) {
            toks[i].entity_id = toks[i - 1].entity_id;
        } else {
            toks[i].entity_id = next_id++;
        }
    }

    out.chunks = find_chunks(toks, policy_);
    return out;
}

AnnotatedSentence ExternalAnnotator::annotate(std::string_view text) const {
    nlohmann::json payload = {{"text", std::string(text)}};
    auto body = client_->call_ok("annotate", payload);
    AnnotatedSentence out;
    out.text = std::string(text);
    try {
        for (const auto& jt : body.at("tokens")) {
            AnnotatedToken t;
            t.text = jt.at("text").get<std::string>();
            t.index = static_cast<int>(out.tokens.size());
            t.begin = jt.at("begin").get<std::size_t>();
            t.end = jt.at("end").get<std::size_t>();
            t.pos = pos_from_name(jt.at("pos").get<std::string>());
            t.is_entity = jt.value("is_entity", false);
            if (jt.contains("entity_id") && !jt["entity_id"].is_null()) t.entity_id = jt["entity_id"].get<int>();
            if (t.begin > t.end || t.end > text.size()) {
                throw Error(ErrorCode::Backend, "annotate: token offsets out of range");
            }
            out.tokens.push_back(std::move(t));
        }
        const int ntok = static_cast<int>(out.tokens.size());
        int prev_end = 0;
        for (const auto& jc : body.at("chunks")) {
            ChunkSpan c{jc.at(0).get<int>(), jc.at(1).get<int>()};
            if (c.start < prev_end || c.start >= c.end || c.end > ntok) {
                throw Error(ErrorCode::Backend, "annotate: chunks must be sorted, non-overlapping and in range");
            }
            prev_end = c.end;
            out.chunks.push_back(c);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Backend, std::string("annotate: malformed response payload: ") + e.what());
    }
    return out;
}

std::vector<Proposition> extract_propositions(const AnnotatedSentence& sentence, int origin_turn) {
    std::vector<Proposition> out;
    std::unordered_set<std::string> seen;
    for (const auto& c : sentence.chunks) {
        const auto& first = sentence.tokens.at(static_cast<std::size_t>(c.start));
        const auto& last = sentence.tokens.at(static_cast<std::size_t>(c.end - 1));
        std::string surface = sentence.text.substr(first.begin, last.end - first.begin);
        if (normalize_text(surface).empty()) continue;
        Proposition p(std::move(surface), origin_turn);
        if (seen.insert(p.normalized()).second) out.push_back(std::move(p));
    }
    return out;
}

namespace {
std::vector<std::string_view> raw_words(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t b = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t e = i;
        while (b < e && is_ascii_punct(text[b])) ++b;
        while (e > b && is_ascii_punct(text[e - 1])) --e;
        if (b < e) out.push_back(text.substr(b, e - b));
    }
    return out;
}
}  // namespace

std::vector<std::string> match_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (auto w : raw_words(text)) out.push_back(to_lower(w));
    return out;
}

std::vector<std::string> content_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (auto w : raw_words(text)) {
        auto lower = to_lower(w);
        // "US" the country is not "us" the pronoun
        if (is_function_word(lower) && !is_acronym(w)) continue;
        out.push_back(std::move(lower));
    }
    return out;
}

bool contains_token_run(const std::vector<std::string>& haystack, const std::vector<std::string>& needle) {
    if (needle.empty() || needle.size() > haystack.size()) return false;
    return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

bool is_entity_bearing(const Proposition& proposition) {
    std::size_t i = 0;
    const auto& s = proposition.surface();
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t b = i;
        while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
        std::string_view w(s.data() + b, i - b);
        while (!w.empty() && is_ascii_punct(w.front())) w.remove_prefix(1);
        if (w.empty()) continue;
        if (looks_like_year(w)) return true;
        if (is_capitalized(w) && (is_acronym(w) || !is_function_word(to_lower(w)))) return true;
    }
    return false;
}

std::unique_ptr<Annotator> make_annotator(std::string_view name, std::shared_ptr<AdapterClient> client,
                                          ChunkPolicy policy) {
    if (name == "reference") return std::make_unique<ReferenceAnnotator>(policy);
    if (name == "external") {
        if (!client) throw Error(ErrorCode::Config, "external annotator requires an adapter endpoint");
        return std::make_unique<ExternalAnnotator>(std::move(client));
    }
    throw Error(ErrorCode::Config, "unknown annotator backend '" + std::string(name) + "'");
}

}  // namespace cground
