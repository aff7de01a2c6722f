#include "checkmate/emoticon_table.hpp"

#include <array>
#include <cctype>
#include <cstring>

#include "checkmate/error.hpp"

namespace checkmate {

namespace {

constexpr std::array<EmoticonEntry, 30> kTable{{
    {":)", EmoticonBucket::positive},
    {":-)", EmoticonBucket::positive},
    {":d", EmoticonBucket::positive},
    {":-d", EmoticonBucket::positive},
    {";)", EmoticonBucket::positive},
    {";-)", EmoticonBucket::positive},
    {":p", EmoticonBucket::positive},
    {":-p", EmoticonBucket::positive},
    {"=)", EmoticonBucket::positive},
    {"^_^", EmoticonBucket::positive},
    {"<3", EmoticonBucket::positive},
    {":(", EmoticonBucket::negative},
    {":-(", EmoticonBucket::negative},
    {":'(", EmoticonBucket::negative},
    {"d:", EmoticonBucket::negative},
    {":/", EmoticonBucket::negative},
    {":-/", EmoticonBucket::negative},
    {">:(", EmoticonBucket::negative},
    {":|", EmoticonBucket::neutral},
    {":-|", EmoticonBucket::neutral},
    {":o", EmoticonBucket::neutral},
    {":-o", EmoticonBucket::neutral},
    {"-_-", EmoticonBucket::neutral},
    {"o_o", EmoticonBucket::neutral},
    {"\xF0\x9F\x94\xA5", EmoticonBucket::emoji_symbol},  // fire
    {"\xF0\x9F\x98\x82", EmoticonBucket::emoji_symbol},  // tears of joy
    {"\xF0\x9F\x98\xAD", EmoticonBucket::emoji_symbol},  // loud crying
    {"\xE2\x9D\xA4", EmoticonBucket::emoji_symbol},      // heart
    {"\xF0\x9F\x91\x8D", EmoticonBucket::emoji_symbol},  // thumbs up
    {"\xF0\x9F\x92\xAF", EmoticonBucket::emoji_symbol},  // hundred points
}};

constexpr std::array<const char*, 4> kBucketNames{"positive", "negative",
                                                  "neutral", "emoji_symbol"};

}  // namespace

std::span<const EmoticonEntry> builtin_emoticon_table() { return kTable; }

const char* to_string(EmoticonBucket bucket) {
  return kBucketNames[static_cast<int>(bucket)];
}

EmoticonBucket emoticon_bucket_from(const std::string& name) {
  for (int i = 0; i < kNumEmoticonBuckets; ++i) {
    if (name == kBucketNames[i]) return static_cast<EmoticonBucket>(i);
  }
  throw ValueError("unknown emoticon bucket: " + name);
}

std::size_t match_emoticon(std::string_view text, std::size_t pos,
                           EmoticonBucket* bucket) {
  std::size_t best = 0;
  for (const auto& entry : kTable) {
    const std::size_t len = std::strlen(entry.pattern);
    if (len <= best || text.size() - pos < len) continue;
    if (text.compare(pos, len, entry.pattern) != 0) continue;
    if (pos + len < text.size() &&
        std::isalnum(static_cast<unsigned char>(text[pos + len])) != 0) {
      continue;
    }
    best = len;
    if (bucket != nullptr) *bucket = entry.bucket;
  }
  return best;
}

}  // namespace checkmate
