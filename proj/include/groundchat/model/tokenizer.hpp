#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace groundchat::model {

/// Word-piece tokenizer with byte fallback. Text is split into pieces (an
/// optional leading space plus a run of letters, digits, or punctuation);
/// pieces found in the vocabulary map to one id, everything else falls back
/// to one id per byte, so decode(encode(s)) == s for every input.
class Tokenizer {
  public:
    static constexpr int kEos = 0;

    /// Builds the vocabulary from a word list; each word contributes its
    /// bare, space-prefixed, and capitalized forms.
    explicit Tokenizer(std::span<const std::string_view> words);

    /// Tokenizer over the built-in vocabulary shipped with the toy model.
    static const Tokenizer& builtin();

    std::vector<int> encode(std::string_view text) const;
    std::string decode(std::span<const int> ids) const;

    /// Surface string of a single id (raw byte for fallback ids).
    const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
    std::size_t vocab_size() const noexcept { return pieces_.size(); }
    int eos_id() const noexcept { return kEos; }

    /// Splits text into pre-token pieces; exposed for tests.
    static std::vector<std::string_view> pretokenize(std::string_view text);

  private:
    void add_piece(std::string piece);

    std::vector<std::string> pieces_;
    std::unordered_map<std::string, int> index_;
};

std::span<const std::string_view> builtin_vocabulary_words();

} // namespace groundchat::model
