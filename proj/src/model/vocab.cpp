#include <array>
#include <string_view>

#include "groundchat/model/tokenizer.hpp"

namespace groundchat::model {

namespace {

// Built-in vocabulary of the toy decoder. Order fixes token ids, so append
// only; any edit changes every checkpoint's meaning.
constexpr std::array<std::string_view, 379> kWords = {
    // prompt markup
    "###", "<", ">", "</", "Human", "Assistant", "Vision", "Audio", "ModalityHere", "List", "Text", "->",
    ".", ",", "?", "!", ":", ";", "'", "\"", "-", "(", ")", "'s", "...", "\n", "\n\n",
    // function words
    "a", "an", "the", "and", "or", "but", "of", "in", "on", "at", "to", "for", "with", "from", "by", "as",
    "into", "over", "under", "near", "behind", "through", "between", "while", "then", "again", "also",
    "is", "are", "was", "were", "be", "being", "been", "has", "have", "had", "do", "does", "did", "can",
    "could", "might", "may", "will", "would", "should", "not", "no", "there", "this", "that", "these",
    "those", "it", "its", "they", "them", "their", "he", "she", "his", "her", "we", "you", "your", "i",
    "me", "my", "what", "which", "who", "where", "when", "how", "why", "each", "other", "both", "some",
    "any", "all", "one", "two", "three", "very", "too", "so", "than", "more", "most", "only", "just",
    "about", "up", "down", "out", "off", "here", "if", "each", "someone", "something", "nothing",
    // instructions
    "image", "audio", "sound", "sounds", "picture", "photo", "scene", "describe", "notice", "pay",
    "attention", "find", "source", "emits", "emit", "given", "related", "unrelated", "relate", "match",
    "matches", "point", "object", "objects", "making", "hear", "heard", "produces", "tell", "contains",
    "shows", "show", "see", "seen", "listen", "region", "entity", "entities", "phrase", "text", "list",
    "output", "line", "form", "exact", "substring", "refers", "copied", "detected", "inside", "describing",
    // scene vocabulary
    "dog", "dogs", "cat", "cats", "bird", "birds", "frisbee", "ball", "grass", "field", "park", "tree",
    "trees", "sky", "water", "river", "sea", "beach", "wave", "waves", "rain", "raining", "falling",
    "wind", "blows", "blowing", "background", "foreground", "car", "cars", "street", "road", "traffic",
    "engine", "train", "horn", "bell", "bells", "chime", "chimes", "music", "melody", "piano", "guitar",
    "drum", "drums", "playing", "plays", "singing", "sings", "song", "voice", "voices", "speaking",
    "talking", "speech", "crowd", "people", "person", "man", "woman", "child", "children", "baby",
    "barking", "barks", "bark", "meowing", "chirping", "chirp", "leaps", "jumping", "jumps", "catches",
    "catch", "running", "runs", "walking", "sitting", "standing", "holding", "red", "blue", "green",
    "yellow", "white", "black", "brown", "orange", "purple", "gray", "large", "small", "little", "big",
    "loud", "loudly", "soft", "softly", "quiet", "quietly", "bowl", "fruit", "fruits", "apple", "apples",
    "banana", "table", "kitchen", "room", "house", "door", "window", "roof", "floor", "wall", "food",
    "plate", "cup", "glass", "papers", "paper", "pages", "book", "map", "gift", "flipping", "turning",
    "turned", "reading", "wrapping", "breathing", "repeatedly", "rustling", "footsteps", "clock",
    "ticking", "phone", "ringing", "knocking", "machine", "motor", "airplane", "plane", "flying", "boat",
    "ocean", "stream", "fire", "crackling", "thunder", "storm", "night", "day", "morning", "city",
    "forest", "mountain", "snow", "sun", "light", "dark", "bright", "colorful", "shape", "circle",
    "square", "rectangle", "blank", "empty", "nearby", "distance", "far", "close", "front", "top",
    "bottom", "left", "right", "center", "middle", "side", "lying", "resting", "cow", "horse", "sheep",
    "duck", "chicken", "rooster", "crowing", "lawn", "mower", "drill", "hammer", "saw", "cutting",
};

} // namespace

std::span<const std::string_view> builtin_vocabulary_words() { return kWords; }

} // namespace groundchat::model
