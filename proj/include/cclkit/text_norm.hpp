#pragma once

#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace cclkit {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

/// Answer normalization: lowercase ASCII letters, delete ASCII punctuation,
/// split on whitespace, drop English articles. Bytes outside ASCII pass
/// through untouched, so UTF-8 text keeps its multi-byte sequences intact.
inline std::vector<std::string> normalize_tokens(std::string_view text) {
    static constexpr std::array<std::string_view, 3> articles = {"a", "an", "the"};
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (current.empty()) return;
        bool is_article = false;
        for (auto a : articles) is_article = is_article || current == a;
        if (!is_article) tokens.push_back(current);
        current.clear();
    };
    for (char ch : text) {
        auto u = static_cast<unsigned char>(ch);
        if (u < 0x80 && std::isspace(u)) {
            flush();
        } else if (u < 0x80 && std::ispunct(u)) {
            // stripped, not a separator: "x-ray" -> "xray"
        } else {
            current.push_back(static_cast<char>(std::tolower(u)));
        }
    }
    flush();
    return tokens;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

} // namespace cclkit
