#include "groundchat/model/tokenizer.hpp"

#include <cctype>

namespace groundchat::model {

namespace {

enum class CharClass { space, letter, digit, other };

CharClass classify(unsigned char c) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') return CharClass::space;
    if (std::isalpha(c) || c >= 0x80) return CharClass::letter;
    if (std::isdigit(c)) return CharClass::digit;
    return CharClass::other;
}

} // namespace

Tokenizer::Tokenizer(std::span<const std::string_view> words) {
    add_piece("<eos>");
    for (int b = 0; b < 256; ++b) add_piece(std::string(1, static_cast<char>(b)));
    for (auto word : words) {
        std::string w(word);
        add_piece(w);
        add_piece(" " + w);
        if (!w.empty() && std::islower(static_cast<unsigned char>(w[0]))) {
            w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
            add_piece(w);
            add_piece(" " + w);
        }
    }
}

void Tokenizer::add_piece(std::string piece) {
    // Byte pieces are looked up by value, not through the index.
    if (pieces_.size() > 256 && index_.count(piece) != 0) return;
    const int id = static_cast<int>(pieces_.size());
    if (pieces_.size() > 256) index_.emplace(piece, id);
    pieces_.push_back(std::move(piece));
}

const Tokenizer& Tokenizer::builtin() {
    static const Tokenizer tokenizer(builtin_vocabulary_words());
    return tokenizer;
}

std::vector<std::string_view> Tokenizer::pretokenize(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        if (classify(static_cast<unsigned char>(text[i])) == CharClass::space) {
            std::size_t j = i;
            while (j < n && classify(static_cast<unsigned char>(text[j])) == CharClass::space) ++j;
            if (j == n || text[j - 1] != ' ') {
                out.push_back(text.substr(i, j - i));
                i = j;
                continue;
            }
            // A single ' ' right before a word attaches to that word.
            if (j - 1 > i) out.push_back(text.substr(i, j - 1 - i));
            i = j - 1;
        }
        std::size_t k = i;
        if (text[k] == ' ') ++k;
        const auto cls = classify(static_cast<unsigned char>(text[k]));
        while (k < n && classify(static_cast<unsigned char>(text[k])) == cls) ++k;
        out.push_back(text.substr(i, k - i));
        i = k;
    }
    return out;
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> ids;
    for (auto piece : pretokenize(text)) {
        const auto it = index_.find(std::string(piece));
        if (it != index_.end()) {
            ids.push_back(it->second);
            continue;
        }
        for (unsigned char c : piece) ids.push_back(1 + static_cast<int>(c));
    }
    return ids;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
    std::string out;
    for (int id : ids) {
        if (id == kEos) continue;
        out += piece(id);
    }
    return out;
}

} // namespace groundchat::model
