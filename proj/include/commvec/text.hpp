#pragma once

// Comment-text normalization for the n-gram classifier.

#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace commvec::text {

inline constexpr std::string_view kUrlToken = "<url>";
inline constexpr std::string_view kUserToken = "<user>";

/// Identifies the shipped stop-word list; bump when the list changes.
inline constexpr std::string_view kStopWordListVersion = "english-v1";

const std::unordered_set<std::string>& stop_words();

/// Porter's original suffix-stripping algorithm. Input is expected to be
/// lowercase.
std::string porter_stem(std::string_view word);

/// Lowercases (ASCII), replaces URLs with <url> and user mentions (u/name,
/// /u/name, @name) with <user>, and splits the rest on non-alphanumeric
/// characters. Bytes >= 0x80 count as alphanumeric so UTF-8 words survive.
std::vector<std::string> tokenize(std::string_view body);

/// tokenize, then drop stop words, then stem. Mask tokens are kept as-is.
std::vector<std::string> preprocess(std::string_view body);

}  // namespace commvec::text
