#pragma once

// Okapi BM25 over an in-memory inverted index.
//
//   idf(t)   = ln(1 + (N - df + 0.5) / (df + 0.5))          (never negative)
//   score    = sum over distinct query terms of
//              idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avgdl))
//
// Results are ranked by score descending, ties by passage_id ascending.

#include "core_model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cground {

struct Bm25Params {
    double k1 = 0.82;
    double b = 0.68;
    int top_n = 20;

    void validate() const;
};

struct AnalyzerOptions {
    bool stem = false;
    bool remove_stopwords = false;

    bool operator==(const AnalyzerOptions&) const = default;
};

/// Casefold, replace ASCII punctuation with spaces, split on whitespace.
std::vector<std::string> analyze(std::string_view text, const AnalyzerOptions& options = {});

struct RankedPassage {
    Passage passage;
    double s_ret = 0.0;
    double s_ret_norm = 0.0;  // min-max within the result list
    int rank = 0;             // 1-based
};

double bm25_idf(std::size_t n_docs, std::size_t doc_freq);
double bm25_term_score(double idf, double tf, double doc_len, double avg_doc_len, const Bm25Params& params);

/// Min-max normalization; a single value or an all-equal list maps to 1.0.
std::vector<double> min_max_normalize(const std::vector<double>& values);

class Bm25Index {
public:
    struct Posting {
        std::uint32_t doc = 0;
        std::uint32_t tf = 0;
    };

    static Bm25Index build(std::vector<Passage> passages, AnalyzerOptions options = {});

    std::vector<RankedPassage> search(std::string_view query, const Bm25Params& params = {}) const;

    std::size_t size() const noexcept { return passages_.size(); }
    double avg_doc_len() const noexcept { return avgdl_; }
    std::size_t doc_len(std::size_t doc) const { return lengths_.at(doc); }
    std::size_t doc_freq(const std::string& term) const;
    std::size_t term_count() const noexcept { return postings_.size(); }
    const std::vector<Posting>* postings(const std::string& term) const;
    const Passage& passage(std::size_t doc) const { return passages_.at(doc); }
    const std::vector<Passage>& passages() const noexcept { return passages_; }
    const AnalyzerOptions& analyzer() const noexcept { return options_; }

    /// Versioned little-endian binary image; serialize(deserialize(x)) == x.
    std::string serialize() const;
    static Bm25Index deserialize(std::string_view bytes);
    void save(const std::filesystem::path& path) const;
    static Bm25Index load(const std::filesystem::path& path);

private:
    std::vector<Passage> passages_;
    std::vector<std::uint32_t> lengths_;
    double avgdl_ = 0.0;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    AnalyzerOptions options_;

    void finalize();
};

}  // namespace cground
