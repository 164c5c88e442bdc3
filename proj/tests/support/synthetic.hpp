#pragma once

// Deterministic synthetic corpora for tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qarank/rng.hpp"
#include "qarank/types.hpp"

namespace qarank::synthetic {

/// Zipf-like word sampler over "w0".."w<vocab-1>".
class ZipfWords {
  public:
    ZipfWords(std::size_t vocab, double exponent = 1.0)
    {
        double total = 0.0;
        cdf_.reserve(vocab);
        for (std::size_t i = 0; i < vocab; ++i) {
            total += 1.0 / std::pow(static_cast<double>(i + 1), exponent);
            cdf_.push_back(total);
        }
        for (auto& c : cdf_) c /= total;
    }

    std::string draw(Xoshiro256& rng) const
    {
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        auto idx = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(), static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
        return "w" + std::to_string(idx);
    }

    std::string sentence(Xoshiro256& rng, std::size_t len) const
    {
        std::string out;
        for (std::size_t i = 0; i < len; ++i) {
            if (i > 0) out.push_back(' ');
            out += draw(rng);
        }
        return out;
    }

  private:
    std::vector<double> cdf_;
};

inline Collection zipf_corpus(std::size_t n_docs, std::size_t vocab, std::size_t max_len, std::uint64_t seed)
{
    Xoshiro256 rng(seed);
    ZipfWords words(vocab);
    Collection c;
    for (std::size_t i = 0; i < n_docs; ++i) {
        std::size_t len = static_cast<std::size_t>(rng.below(max_len + 1));
        c.add(Document{"d" + std::to_string(i), words.sentence(rng, len), Source::human});
    }
    return c;
}

inline std::vector<std::string> zipf_query(Xoshiro256& rng, const ZipfWords& words, std::size_t max_terms)
{
    std::vector<std::string> q;
    std::size_t n = 1 + static_cast<std::size_t>(rng.below(max_terms));
    for (std::size_t i = 0; i < n; ++i) q.push_back(words.draw(rng));
    return q;
}

struct Hc3Shape {
    // Query counts per HC3 source label.
    std::vector<std::pair<std::string, std::size_t>> domains;
    std::size_t human_answers = 0;
    std::size_t llm_answers = 0;
};

/// Published HC3 (English) shape: 24,322 questions, 58,546 human and 26,882 ChatGPT answers.
inline Hc3Shape hc3_published_shape()
{
    return {{{"medicine", 1248}, {"finance", 3933}, {"reddit_eli5", 17112}, {"open_qa", 1187}, {"wiki_csai", 842}},
            58546,
            26882};
}

/// Writes an HC3-format JSONL file with exactly the requested shape. Answers reuse some
/// question words so lexical retrieval has signal.
inline void write_hc3_jsonl(const std::filesystem::path& path, const Hc3Shape& shape, std::uint64_t seed)
{
    Xoshiro256 rng(seed);
    ZipfWords words(20000, 1.05);
    std::size_t n = 0;
    for (const auto& [label, count] : shape.domains) n += count;
    std::vector<std::size_t> human(n, 1);
    std::vector<std::size_t> llm(n, 1);
    for (std::size_t extra = shape.human_answers - n; extra > 0; --extra) ++human[rng.below(n)];
    for (std::size_t extra = shape.llm_answers - n; extra > 0; --extra) ++llm[rng.below(n)];

    std::ofstream out(path, std::ios::binary);
    std::size_t i = 0;
    for (const auto& [label, count] : shape.domains) {
        for (std::size_t k = 0; k < count; ++k, ++i) {
            std::string question = "why " + words.sentence(rng, 3 + rng.below(8)) + "?";
            auto answer = [&](std::size_t len) {
                std::string a = words.sentence(rng, len);
                if (rng.below(2) == 0) a = question + " " + a;
                if (rng.below(50) == 0) a += "\n" + words.sentence(rng, 3);
                return a;
            };
            nlohmann::json j;
            j["question"] = question;
            j["human_answers"] = nlohmann::json::array();
            for (std::size_t a = 0; a < human[i]; ++a) j["human_answers"].push_back(answer(5 + rng.below(30)));
            j["chatgpt_answers"] = nlohmann::json::array();
            for (std::size_t a = 0; a < llm[i]; ++a) j["chatgpt_answers"].push_back(answer(10 + rng.below(30)));
            j["source"] = label;
            out << j.dump() << '\n';
        }
    }
}

}  // namespace qarank::synthetic
