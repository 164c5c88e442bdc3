#include "qarank/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cstdint>

namespace qarank {

namespace {

constexpr char32_t kInvalid = 0xFFFFFFFF;

// Decodes one codepoint starting at text[i] and advances i. Returns kInvalid for
// malformed or overlong sequences (consuming one byte).
char32_t decode_utf8(std::string_view text, std::size_t& i)
{
    auto byte = [&](std::size_t k) { return static_cast<unsigned char>(text[k]); };
    unsigned char c = byte(i);
    if (c < 0x80) {
        ++i;
        return c;
    }
    int len = 0;
    char32_t cp = 0;
    if ((c & 0xE0) == 0xC0) {
        len = 2;
        cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
        len = 3;
        cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
        len = 4;
        cp = c & 0x07;
    } else {
        ++i;
        return kInvalid;
    }
    if (i + len > text.size()) {
        ++i;
        return kInvalid;
    }
    for (int k = 1; k < len; ++k) {
        unsigned char cc = byte(i + k);
        if ((cc & 0xC0) != 0x80) {
            ++i;
            return kInvalid;
        }
        cp = (cp << 6) | (cc & 0x3F);
    }
    static constexpr char32_t min_for_len[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < min_for_len[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        ++i;
        return kInvalid;
    }
    i += len;
    return cp;
}

void encode_utf8(char32_t cp, std::string& out)
{
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool in(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

// Without a Unicode database, non-ASCII codepoints count as word characters unless they
// fall in a punctuation, symbol, space or emoji block.
bool is_word_char(char32_t cp)
{
    if (cp < 0x80) {
        return in(cp, 'a', 'z') || in(cp, 'A', 'Z') || in(cp, '0', '9');
    }
    if (cp == kInvalid) return false;
    if (in(cp, 0x80, 0xBF)) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
    if (cp == 0xD7 || cp == 0xF7) return false;
    if (in(cp, 0x2000, 0x2BFF)) return false;  // punctuation, currency, arrows, math, shapes
    if (in(cp, 0x2E00, 0x2E7F)) return false;
    if (in(cp, 0x3000, 0x303F)) return false;
    if (in(cp, 0xFE30, 0xFE4F)) return false;
    if (in(cp, 0xFF00, 0xFF0F) || in(cp, 0xFF1A, 0xFF20) || in(cp, 0xFF3B, 0xFF40) ||
        in(cp, 0xFF5B, 0xFF65)) {
        return false;
    }
    if (cp == 0xFEFF || in(cp, 0xFFF0, 0xFFFF)) return false;
    if (in(cp, 0x1F000, 0x1FAFF)) return false;
    return true;
}

char32_t to_lower(char32_t cp)
{
    if (in(cp, 'A', 'Z')) return cp + 32;
    if (cp < 0x80) return cp;
    if (in(cp, 0xC0, 0xDE) && cp != 0xD7) return cp + 32;
    if (in(cp, 0x100, 0x137) || in(cp, 0x14A, 0x177)) return (cp % 2 == 0) ? cp + 1 : cp;
    if (in(cp, 0x139, 0x148) || in(cp, 0x179, 0x17E)) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp == 0x178) return 0xFF;
    if (in(cp, 0x391, 0x3A9) && cp != 0x3A2) return cp + 32;
    if (in(cp, 0x410, 0x42F)) return cp + 32;
    if (in(cp, 0x400, 0x40F)) return cp + 80;
    return cp;
}

constexpr std::array<std::string_view, 33> kStopwords = {
    "a",    "an",   "and",   "are",  "as",    "at",   "be",   "but",  "by",
    "for",  "if",   "in",    "into", "is",    "it",   "no",   "not",  "of",
    "on",   "or",   "such",  "that", "the",   "their", "then", "there", "these",
    "they", "this", "to",    "was",  "will",  "with"};

}  // namespace

bool is_stopword(std::string_view token)
{
    return std::find(kStopwords.begin(), kStopwords.end(), token) != kStopwords.end();
}

std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config)
{
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (current.empty()) return;
        if (config.stopwords && is_stopword(current)) {
            current.clear();
            return;
        }
        tokens.push_back(config.stem ? porter_stem(current) : current);
        current.clear();
    };
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = decode_utf8(text, i);
        if (is_word_char(cp)) {
            encode_utf8(to_lower(cp), current);
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

std::vector<std::string_view> whitespace_tokens(std::string_view text)
{
    std::vector<std::string_view> out;
    auto is_ws = [](char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    };
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_ws(text[i])) ++i;
        auto start = i;
        while (i < text.size() && !is_ws(text[i])) ++i;
        if (i > start) out.push_back(text.substr(start, i - start));
    }
    return out;
}

// --- Porter stemmer ---------------------------------------------------------------------

namespace {

class PorterStemmer {
  public:
    explicit PorterStemmer(std::string word) : b_(std::move(word)), k_(static_cast<int>(b_.size()) - 1) {}

    std::string run()
    {
        if (k_ <= 1) return b_;
        step1ab();
        if (k_ > 0) {
            step1c();
            step2();
            step3();
            step4();
            step5();
        }
        return b_.substr(0, static_cast<std::size_t>(k_ + 1));
    }

  private:
    bool cons(int i) const
    {
        switch (b_[i]) {
        case 'a': case 'e': case 'i': case 'o': case 'u': return false;
        case 'y': return i == 0 ? true : !cons(i - 1);
        default: return true;
        }
    }

    // Number of VC sequences in b[0..j].
    int m() const
    {
        int n = 0;
        int i = 0;
        while (true) {
            if (i > j_) return n;
            if (!cons(i)) break;
            ++i;
        }
        ++i;
        while (true) {
            while (true) {
                if (i > j_) return n;
                if (cons(i)) break;
                ++i;
            }
            ++i;
            ++n;
            while (true) {
                if (i > j_) return n;
                if (!cons(i)) break;
                ++i;
            }
            ++i;
        }
    }

    bool vowel_in_stem() const
    {
        for (int i = 0; i <= j_; ++i) {
            if (!cons(i)) return true;
        }
        return false;
    }

    bool doublec(int j) const
    {
        if (j < 1) return false;
        if (b_[j] != b_[j - 1]) return false;
        return cons(j);
    }

    bool cvc(int i) const
    {
        if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
        char ch = b_[i];
        return !(ch == 'w' || ch == 'x' || ch == 'y');
    }

    bool ends(std::string_view s)
    {
        int len = static_cast<int>(s.size());
        if (len > k_ + 1) return false;
        if (std::string_view(b_).substr(static_cast<std::size_t>(k_ + 1 - len), s.size()) != s) {
            return false;
        }
        j_ = k_ - len;
        return true;
    }

    void setto(std::string_view s)
    {
        b_.replace(static_cast<std::size_t>(j_ + 1), static_cast<std::size_t>(k_ - j_), s);
        k_ = j_ + static_cast<int>(s.size());
        b_.resize(static_cast<std::size_t>(k_ + 1));
    }

    void r(std::string_view s)
    {
        if (m() > 0) setto(s);
    }

    void step1ab()
    {
        if (b_[k_] == 's') {
            if (ends("sses")) {
                k_ -= 2;
            } else if (ends("ies")) {
                setto("i");
            } else if (b_[k_ - 1] != 's') {
                --k_;
            }
            b_.resize(static_cast<std::size_t>(k_ + 1));
        }
        if (ends("eed")) {
            if (m() > 0) {
                --k_;
                b_.resize(static_cast<std::size_t>(k_ + 1));
            }
        } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
            k_ = j_;
            b_.resize(static_cast<std::size_t>(k_ + 1));
            if (ends("at")) {
                setto("ate");
            } else if (ends("bl")) {
                setto("ble");
            } else if (ends("iz")) {
                setto("ize");
            } else if (doublec(k_)) {
                --k_;
                char ch = b_[k_];
                if (ch == 'l' || ch == 's' || ch == 'z') ++k_;
                b_.resize(static_cast<std::size_t>(k_ + 1));
            } else if (m() == 1 && cvc(k_)) {
                j_ = k_;
                setto("e");
            }
        }
    }

    void step1c()
    {
        if (ends("y") && vowel_in_stem()) b_[k_] = 'i';
    }

    void step2()
    {
        if (k_ < 1) return;
        switch (b_[k_ - 1]) {
        case 'a':
            if (ends("ational")) { r("ate"); break; }
            if (ends("tional")) { r("tion"); break; }
            break;
        case 'c':
            if (ends("enci")) { r("ence"); break; }
            if (ends("anci")) { r("ance"); break; }
            break;
        case 'e':
            if (ends("izer")) { r("ize"); break; }
            break;
        case 'l':
            if (ends("bli")) { r("ble"); break; }
            if (ends("alli")) { r("al"); break; }
            if (ends("entli")) { r("ent"); break; }
            if (ends("eli")) { r("e"); break; }
            if (ends("ousli")) { r("ous"); break; }
            break;
        case 'o':
            if (ends("ization")) { r("ize"); break; }
            if (ends("ation")) { r("ate"); break; }
            if (ends("ator")) { r("ate"); break; }
            break;
        case 's':
            if (ends("alism")) { r("al"); break; }
            if (ends("iveness")) { r("ive"); break; }
            if (ends("fulness")) { r("ful"); break; }
            if (ends("ousness")) { r("ous"); break; }
            break;
        case 't':
            if (ends("aliti")) { r("al"); break; }
            if (ends("iviti")) { r("ive"); break; }
            if (ends("biliti")) { r("ble"); break; }
            break;
        case 'g':
            if (ends("logi")) { r("log"); break; }
            break;
        default: break;
        }
    }

    void step3()
    {
        switch (b_[k_]) {
        case 'e':
            if (ends("icate")) { r("ic"); break; }
            if (ends("ative")) { r(""); break; }
            if (ends("alize")) { r("al"); break; }
            break;
        case 'i':
            if (ends("iciti")) { r("ic"); break; }
            break;
        case 'l':
            if (ends("ical")) { r("ic"); break; }
            if (ends("ful")) { r(""); break; }
            break;
        case 's':
            if (ends("ness")) { r(""); break; }
            break;
        default: break;
        }
    }

    void step4()
    {
        if (k_ < 1) return;
        switch (b_[k_ - 1]) {
        case 'a':
            if (ends("al")) break;
            return;
        case 'c':
            if (ends("ance")) break;
            if (ends("ence")) break;
            return;
        case 'e':
            if (ends("er")) break;
            return;
        case 'i':
            if (ends("ic")) break;
            return;
        case 'l':
            if (ends("able")) break;
            if (ends("ible")) break;
            return;
        case 'n':
            if (ends("ant")) break;
            if (ends("ement")) break;
            if (ends("ment")) break;
            if (ends("ent")) break;
            return;
        case 'o':
            if (ends("ion") && j_ >= 0 && (b_[j_] == 's' || b_[j_] == 't')) break;
            if (ends("ou")) break;
            return;
        case 's':
            if (ends("ism")) break;
            return;
        case 't':
            if (ends("ate")) break;
            if (ends("iti")) break;
            return;
        case 'u':
            if (ends("ous")) break;
            return;
        case 'v':
            if (ends("ive")) break;
            return;
        case 'z':
            if (ends("ize")) break;
            return;
        default: return;
        }
        if (m() > 1) {
            k_ = j_;
            b_.resize(static_cast<std::size_t>(k_ + 1));
        }
    }

    void step5()
    {
        j_ = k_;
        if (b_[k_] == 'e') {
            int a = m();
            if (a > 1 || (a == 1 && !cvc(k_ - 1))) {
                --k_;
                b_.resize(static_cast<std::size_t>(k_ + 1));
            }
        }
        if (b_[k_] == 'l' && doublec(k_) && m() > 1) {
            --k_;
            b_.resize(static_cast<std::size_t>(k_ + 1));
        }
    }

    std::string b_;
    int k_;
    int j_ = 0;
};

}  // namespace

std::string porter_stem(std::string_view word)
{
    if (word.size() <= 2) return std::string(word);
    for (char c : word) {
        if (c < 'a' || c > 'z') return std::string(word);
    }
    return PorterStemmer(std::string(word)).run();
}

}  // namespace qarank
