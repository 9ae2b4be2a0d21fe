#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mirage::referring {

enum class Anchor { left, right, middle };

/// A parsed position: `rank` counts from the anchor side starting at 1.
struct Position {
    Anchor anchor = Anchor::left;
    int rank = 1;
};

inline bool is_side_word(std::string_view w) {
    return w == "leftmost" || w == "rightmost" || w == "middle" || w == "center" || w == "centre" || w == "left" ||
           w == "right";
}

inline int ordinal_rank(std::string_view w) {
    static const char* names[] = {"first", "second", "third", "fourth", "fifth"};
    for (int i = 0; i < 5; ++i) {
        if (w == names[i]) return i + 1;
    }
    if (w == "last") return -1;
    return 0;
}

inline bool is_position_word(std::string_view w) { return is_side_word(w) || ordinal_rank(w) != 0; }

/// Interprets a position word plus an optional "from the left|right" suffix.
inline Position interpret(std::string_view word, std::optional<std::string_view> from_side) {
    if (word == "leftmost" || word == "left") return {Anchor::left, 1};
    if (word == "rightmost" || word == "right") return {Anchor::right, 1};
    if (word == "middle" || word == "center" || word == "centre") return {Anchor::middle, 0};
    const int rank = ordinal_rank(word);
    if (rank == -1) return {Anchor::right, 1};
    if (from_side && *from_side == "right") return {Anchor::right, rank};
    return {Anchor::left, rank};
}

/// Index into a left-to-right list of n items, if the position exists.
inline std::optional<std::size_t> resolve(const Position& pos, std::size_t n) {
    if (n == 0) return std::nullopt;
    switch (pos.anchor) {
        case Anchor::left:
            if (pos.rank >= 1 && static_cast<std::size_t>(pos.rank) <= n) return pos.rank - 1;
            return std::nullopt;
        case Anchor::right:
            if (pos.rank >= 1 && static_cast<std::size_t>(pos.rank) <= n) return n - pos.rank;
            return std::nullopt;
        case Anchor::middle:
            if (n % 2 == 1) return n / 2;
            return std::nullopt;
    }
    return std::nullopt;
}

}  // namespace mirage::referring
