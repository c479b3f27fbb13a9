#include "retrieval.hpp"

#include "error.hpp"
#include "porter_stemmer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_set>

namespace cground {

namespace {

constexpr char kMagic[8] = {'C', 'G', 'B', 'M', '2', '5', '\0', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

const std::unordered_set<std::string_view>& stopwords() {
    static const std::unordered_set<std::string_view> words = {
        "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into",
        "is", "it", "no", "not", "of", "on", "or", "such", "that", "the", "their", "then",
        "there", "these", "they", "this", "to", "was", "will", "with"};
    return words;
}

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void str(std::string_view s) {
        u64(s.size());
        out_.append(s);
    }
    void raw(const char* p, std::size_t n) { out_.append(p, n); }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(in_[pos_++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in_[pos_++])) << (8 * i);
        return v;
    }
    std::string str() {
        auto n = u64();
        need(n);
        std::string s(in_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view raw(std::size_t n) {
        need(n);
        auto v = in_.substr(pos_, n);
        pos_ += n;
        return v;
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::uint64_t n) const {
        if (n > in_.size() - pos_) throw Error(ErrorCode::Parse, "index image truncated");
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

}  // namespace

void Bm25Params::validate() const {
    if (!(k1 > 0.0)) throw Error(ErrorCode::InvalidArgument, "bm25: k1 must be > 0");
    if (!(b >= 0.0 && b <= 1.0)) throw Error(ErrorCode::InvalidArgument, "bm25: b must lie in [0, 1]");
    if (top_n < 1) throw Error(ErrorCode::InvalidArgument, "bm25: top_n must be >= 1");
}

std::vector<std::string> analyze(std::string_view text, const AnalyzerOptions& options) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        if (!(options.remove_stopwords && stopwords().count(cur))) {
            out.push_back(options.stem ? porter_stem(cur) : cur);
        }
        cur.clear();
    };
    for (char c : text) {
        auto uc = static_cast<unsigned char>(c);
        if (std::isspace(uc) || (uc < 128 && std::ispunct(uc))) {
            flush();
        } else {
            cur.push_back(static_cast<char>(std::tolower(uc)));
        }
    }
    flush();
    return out;
}

double bm25_idf(std::size_t n_docs, std::size_t doc_freq) {
    const double n = static_cast<double>(n_docs);
    const double df = static_cast<double>(doc_freq);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double bm25_term_score(double idf, double tf, double doc_len, double avg_doc_len, const Bm25Params& params) {
    const double norm = 1.0 - params.b + params.b * doc_len / avg_doc_len;
    return idf * tf * (params.k1 + 1.0) / (tf + params.k1 * norm);
}

std::vector<double> min_max_normalize(const std::vector<double>& values) {
    if (values.empty()) return {};
    auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    const double min = *lo;
    const double range = *hi - *lo;
    std::vector<double> out(values.size(), 1.0);
    if (range > 0.0) {
        for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - min) / range;
    }
    return out;
}

Bm25Index Bm25Index::build(std::vector<Passage> passages, AnalyzerOptions options) {
    if (passages.empty()) throw Error(ErrorCode::InvalidArgument, "empty collection");
    if (passages.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::InvalidArgument, "collection too large");
    }
    Bm25Index idx;
    idx.options_ = options;
    std::unordered_set<std::string> ids;
    idx.lengths_.reserve(passages.size());
    for (std::size_t d = 0; d < passages.size(); ++d) {
        if (!ids.insert(passages[d].passage_id).second) {
            throw Error(ErrorCode::Integrity, "duplicate passage_id '" + passages[d].passage_id + "'");
        }
        auto terms = analyze(passages[d].text, options);
        idx.lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
        std::map<std::string, std::uint32_t> tf;
        for (auto& t : terms) ++tf[t];
        for (auto& [term, count] : tf) {
            idx.postings_[term].push_back({static_cast<std::uint32_t>(d), count});
        }
    }
    idx.passages_ = std::move(passages);
    idx.finalize();
    return idx;
}

void Bm25Index::finalize() {
    const double total = std::accumulate(lengths_.begin(), lengths_.end(), 0.0,
                                         [](double acc, std::uint32_t l) { return acc + l; });
    avgdl_ = passages_.empty() ? 0.0 : total / static_cast<double>(passages_.size());
}

std::size_t Bm25Index::doc_freq(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

const std::vector<Bm25Index::Posting>* Bm25Index::postings(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
}

std::vector<RankedPassage> Bm25Index::search(std::string_view query, const Bm25Params& params) const {
    params.validate();
    auto terms = analyze(query, options_);
    std::vector<std::string> unique;
    std::unordered_set<std::string> seen;
    for (auto& t : terms) {
        if (seen.insert(t).second) unique.push_back(std::move(t));
    }

    std::vector<double> scores(passages_.size(), 0.0);
    std::vector<std::uint32_t> touched;
    for (const auto& term : unique) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double idf = bm25_idf(passages_.size(), it->second.size());
        for (const auto& p : it->second) {
            if (scores[p.doc] == 0.0) touched.push_back(p.doc);
            scores[p.doc] += bm25_term_score(idf, p.tf, lengths_[p.doc], avgdl_, params);
        }
    }

    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return passages_[a].passage_id < passages_[b].passage_id;
    };
    const std::size_t keep = std::min<std::size_t>(touched.size(), static_cast<std::size_t>(params.top_n));
    std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(keep), touched.end(), better);
    touched.resize(keep);

    std::vector<double> raw;
    raw.reserve(keep);
    for (auto d : touched) raw.push_back(scores[d]);
    auto norm = min_max_normalize(raw);

    std::vector<RankedPassage> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        out.push_back({passages_[touched[i]], raw[i], norm[i], static_cast<int>(i + 1)});
    }
    return out;
}

std::string Bm25Index::serialize() const {
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kFormatVersion);
    w.u8(options_.stem ? 1 : 0);
    w.u8(options_.remove_stopwords ? 1 : 0);
    w.u64(passages_.size());
    for (std::size_t d = 0; d < passages_.size(); ++d) {
        const auto& p = passages_[d];
        w.str(p.passage_id);
        w.str(p.text);
        w.u8(p.source_url ? 1 : 0);
        w.str(p.source_url.value_or(""));
        w.u32(lengths_[d]);
    }
    std::vector<const std::string*> terms;
    terms.reserve(postings_.size());
    for (const auto& [term, _] : postings_) terms.push_back(&term);
    std::sort(terms.begin(), terms.end(), [](const std::string* a, const std::string* b) { return *a < *b; });
    w.u64(terms.size());
    for (const auto* term : terms) {
        const auto& list = postings_.at(*term);
        w.str(*term);
        w.u64(list.size());
        for (const auto& p : list) {
            w.u32(p.doc);
            w.u32(p.tf);
        }
    }
    return w.take();
}

Bm25Index Bm25Index::deserialize(std::string_view bytes) {
    Reader r(bytes);
    if (r.raw(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
        throw Error(ErrorCode::Parse, "not a BM25 index image");
    }
    if (auto v = r.u32(); v != kFormatVersion) {
        throw Error(ErrorCode::Parse, "unsupported index format version " + std::to_string(v));
    }
    Bm25Index idx;
    idx.options_.stem = r.u8() != 0;
    idx.options_.remove_stopwords = r.u8() != 0;
    const auto n = r.u64();
    if (n == 0) throw Error(ErrorCode::Parse, "index image has no passages");
    for (std::uint64_t d = 0; d < n; ++d) {
        Passage p;
        p.passage_id = r.str();
        p.text = r.str();
        const bool has_url = r.u8() != 0;
        auto url = r.str();
        if (has_url) p.source_url = std::move(url);
        idx.passages_.push_back(std::move(p));
        idx.lengths_.push_back(r.u32());
    }
    const auto n_terms = r.u64();
    for (std::uint64_t t = 0; t < n_terms; ++t) {
        auto term = r.str();
        const auto count = r.u64();
        std::vector<Posting> list;
        list.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, n)));
        for (std::uint64_t i = 0; i < count; ++i) {
            Posting p{r.u32(), r.u32()};
            if (p.doc >= n) throw Error(ErrorCode::Parse, "posting refers to unknown passage");
            list.push_back(p);
        }
        idx.postings_.emplace(std::move(term), std::move(list));
    }
    if (!r.done()) throw Error(ErrorCode::Parse, "trailing bytes after index image");
    idx.finalize();
    return idx;
}

void Bm25Index::save(const std::filesystem::path& path) const {
    write_file(path, serialize());
}

Bm25Index Bm25Index::load(const std::filesystem::path& path) {
    return deserialize(read_file(path));
}

}  // namespace cground
