#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

namespace checkmate {

// Sentiment buckets for emoticons and emoji.
enum class EmoticonBucket : int {
  positive = 0,
  negative = 1,
  neutral = 2,
  emoji_symbol = 3,
};

inline constexpr int kNumEmoticonBuckets = 4;

struct EmoticonEntry {
  const char* pattern;  // stored lowercase; input text is lowercased first
  EmoticonBucket bucket;
};

// Built-in lexicon: ASCII emoticons plus a handful of common UTF-8
// emoji. Unknown non-ASCII runs still fall into the emoji_symbol bucket
// structurally at vocabulary lookup time.
std::span<const EmoticonEntry> builtin_emoticon_table();

const char* to_string(EmoticonBucket bucket);
// ValueError on an unknown name.
EmoticonBucket emoticon_bucket_from(const std::string& name);

// Length of the longest builtin pattern starting at pos, 0 if none.
// Matches only when the next character is not alphanumeric, so ":d"
// never bites into ":dog". Expects lowercased text. Fills *bucket on a
// match when non-null.
std::size_t match_emoticon(std::string_view text, std::size_t pos,
                           EmoticonBucket* bucket = nullptr);

}  // namespace checkmate
