#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace prefrec {

// 64-bit FNV-1a. Stable across platforms; used for prompt hashes and
// stage-seed fan-out.
constexpr std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t v);

// SHA-256 of a byte string / file, lowercase hex. Backed by OpenSSL.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file_hex(const std::string& path);

// Unicode-aware trim: ASCII whitespace plus U+3000 (ideographic space).
std::string trim(std::string_view s);

// Decodes UTF-8 into code points. Invalid sequences raise ParseError.
std::vector<char32_t> decode_utf8(std::string_view s);

// Number of Unicode scalar values in a UTF-8 string.
std::size_t codepoint_count(std::string_view s);

bool is_valid_utf8(std::string_view s);

// Splits on ASCII whitespace runs, dropping empty tokens.
std::vector<std::string> split_whitespace(std::string_view s);

// Splits into sentences on '.', '!', '?' (terminators dropped, pieces
// trimmed, empties skipped). A trailing piece without a terminator counts
// as a sentence.
std::vector<std::string> split_sentences(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string lowercase_ascii(std::string_view s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Deterministic RNG helpers. std::uniform_int_distribution is not pinned by
// the standard, so bounded draws and shuffles are done by hand on top of
// mt19937_64 (whose output sequence is).
class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next();
    // Unbiased draw in [0, bound) via rejection sampling.
    std::uint64_t bounded(std::uint64_t bound);
    double uniform();  // [0, 1)
    double uniform(double lo, double hi);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

// Stage seeds derive from one root seed by hashing the stage name, so stages
// stay independent but reproducible.
inline std::uint64_t stage_seed(std::uint64_t root_seed, std::string_view stage) {
    return fnv1a64(stage) ^ (root_seed * 0x9e3779b97f4a7c15ULL);
}

}  // namespace prefrec
