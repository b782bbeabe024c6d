#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "tacitsim/util.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// Tokenization.
// ---------------------------------------------------------------------------

/// Lowercased alphanumeric tokens; every other character separates.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

// ---------------------------------------------------------------------------
// Porter stemmer, the classic 1980 algorithm. Tokens that are not purely
// alphabetic are returned unchanged.
// ---------------------------------------------------------------------------

namespace porter {

inline bool is_consonant(const std::string& w, std::size_t i) {
  switch (w[i]) {
    case 'a':
    case 'e':
    case 'i':
    case 'o':
    case 'u':
      return false;
    case 'y':
      return i == 0 ? true : !is_consonant(w, i - 1);
    default:
      return true;
  }
}

/// Porter's m: the number of VC sequences in [C](VC)^m[V], over w[0..len).
inline int measure(const std::string& w, std::size_t len) {
  std::size_t i = 0;
  while (i < len && is_consonant(w, i)) ++i;
  int m = 0;
  while (i < len) {
    while (i < len && !is_consonant(w, i)) ++i;
    if (i >= len) break;
    ++m;
    while (i < len && is_consonant(w, i)) ++i;
  }
  return m;
}

inline bool has_vowel(const std::string& w, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) {
    if (!is_consonant(w, i)) return true;
  }
  return false;
}

inline bool ends_double_consonant(const std::string& w) {
  const std::size_t n = w.size();
  return n >= 2 && w[n - 1] == w[n - 2] && is_consonant(w, n - 1);
}

/// *o: stem ends consonant-vowel-consonant and the final consonant is not
/// w, x, or y.
inline bool ends_cvc(const std::string& w) {
  const std::size_t n = w.size();
  if (n < 3) return false;
  if (!is_consonant(w, n - 3) || is_consonant(w, n - 2) || !is_consonant(w, n - 1)) return false;
  const char c = w[n - 1];
  return c != 'w' && c != 'x' && c != 'y';
}

inline bool ends_with(const std::string& w, const std::string& suffix) {
  return w.size() >= suffix.size() &&
         w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct Rule {
  const char* suffix;
  const char* replacement;
  int min_measure;  // condition: measure(stem) > min_measure
};

/// Applies one dictionary step: the longest matching suffix wins; if its
/// measure condition fails the word is left alone (shorter matches are not
/// retried — that is how the algorithm is specified).
inline void apply_rule_step(std::string& w, const std::vector<Rule>& rules) {
  const Rule* best = nullptr;
  std::size_t best_len = 0;
  for (const Rule& r : rules) {
    const std::string suf = r.suffix;
    if (suf.size() > best_len && ends_with(w, suf)) {
      best = &r;
      best_len = suf.size();
    }
  }
  if (!best) return;
  const std::size_t stem_len = w.size() - best_len;
  if (measure(w, stem_len) > best->min_measure) {
    w = w.substr(0, stem_len) + best->replacement;
  }
}

inline void step_1a(std::string& w) {
  if (ends_with(w, "sses")) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "ies")) {
    w.resize(w.size() - 2);
  } else if (ends_with(w, "ss")) {
    // unchanged
  } else if (ends_with(w, "s")) {
    w.pop_back();
  }
}

inline void step_1b(std::string& w) {
  if (ends_with(w, "eed")) {
    if (measure(w, w.size() - 3) > 0) w.pop_back();
    return;
  }
  bool stripped = false;
  if (ends_with(w, "ed") && has_vowel(w, w.size() - 2)) {
    w.resize(w.size() - 2);
    stripped = true;
  } else if (ends_with(w, "ing") && has_vowel(w, w.size() - 3)) {
    w.resize(w.size() - 3);
    stripped = true;
  }
  if (!stripped) return;
  if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
    w.push_back('e');
  } else if (ends_double_consonant(w)) {
    const char c = w.back();
    if (c != 'l' && c != 's' && c != 'z') w.pop_back();
  } else if (measure(w, w.size()) == 1 && ends_cvc(w)) {
    w.push_back('e');
  }
}

inline void step_1c(std::string& w) {
  if (ends_with(w, "y") && has_vowel(w, w.size() - 1)) w.back() = 'i';
}

inline void step_2(std::string& w) {
  static const std::vector<Rule> rules = {
      {"ational", "ate", 0}, {"tional", "tion", 0}, {"enci", "ence", 0},
      {"anci", "ance", 0},   {"izer", "ize", 0},    {"abli", "able", 0},
      {"alli", "al", 0},     {"entli", "ent", 0},   {"eli", "e", 0},
      {"ousli", "ous", 0},   {"ization", "ize", 0}, {"ation", "ate", 0},
      {"ator", "ate", 0},    {"alism", "al", 0},    {"iveness", "ive", 0},
      {"fulness", "ful", 0}, {"ousness", "ous", 0}, {"aliti", "al", 0},
      {"iviti", "ive", 0},   {"biliti", "ble", 0},
  };
  apply_rule_step(w, rules);
}

inline void step_3(std::string& w) {
  static const std::vector<Rule> rules = {
      {"icate", "ic", 0}, {"ative", "", 0}, {"alize", "al", 0}, {"iciti", "ic", 0},
      {"ical", "ic", 0},  {"ful", "", 0},   {"ness", "", 0},
  };
  apply_rule_step(w, rules);
}

inline void step_4(std::string& w) {
  static const std::vector<Rule> rules = {
      {"al", "", 1},    {"ance", "", 1}, {"ence", "", 1}, {"er", "", 1},  {"ic", "", 1},
      {"able", "", 1},  {"ible", "", 1}, {"ant", "", 1},  {"ement", "", 1},
      {"ment", "", 1},  {"ent", "", 1},  {"ou", "", 1},   {"ism", "", 1}, {"ate", "", 1},
      {"iti", "", 1},   {"ous", "", 1},  {"ive", "", 1},  {"ize", "", 1},
  };
  // "ion" is special-cased: it only strips after s or t.
  if (ends_with(w, "ion") && w.size() >= 4) {
    const char before = w[w.size() - 4];
    if ((before == 's' || before == 't') && measure(w, w.size() - 3) > 1) {
      w.resize(w.size() - 3);
    }
    return;
  }
  apply_rule_step(w, rules);
}

inline void step_5a(std::string& w) {
  if (!ends_with(w, "e")) return;
  const std::size_t stem_len = w.size() - 1;
  const int m = measure(w, stem_len);
  if (m > 1) {
    w.pop_back();
  } else if (m == 1) {
    const std::string stem = w.substr(0, stem_len);
    if (!ends_cvc(stem)) w.pop_back();
  }
}

inline void step_5b(std::string& w) {
  if (measure(w, w.size()) > 1 && ends_double_consonant(w) && w.back() == 'l') w.pop_back();
}

}  // namespace porter

inline std::string porter_stem(const std::string& token) {
  if (token.size() <= 2) return token;
  for (char c : token) {
    if (c < 'a' || c > 'z') return token;
  }
  std::string w = token;
  porter::step_1a(w);
  porter::step_1b(w);
  porter::step_1c(w);
  porter::step_2(w);
  porter::step_3(w);
  porter::step_4(w);
  porter::step_5a(w);
  porter::step_5b(w);
  return w;
}

// ---------------------------------------------------------------------------
// Sentence splitting for column-passage extraction. Bullet lines ("- ...")
// are treated as one sentence each so structured drafts keep a column's
// dtype, meaning, and examples together; prose is split at ., ! or ?
// followed by whitespace (decimal points survive).
// ---------------------------------------------------------------------------

inline std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  for (const std::string& raw : split_lines(text)) {
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (starts_with(line, "- ") || starts_with(line, "* ")) {
      sentences.push_back(line);
      continue;
    }
    std::string cur;
    for (std::size_t i = 0; i < line.size(); ++i) {
      cur.push_back(line[i]);
      const char c = line[i];
      if ((c == '.' || c == '!' || c == '?') &&
          (i + 1 == line.size() || std::isspace(static_cast<unsigned char>(line[i + 1])))) {
        const std::string s = trim(cur);
        if (!s.empty()) sentences.push_back(s);
        cur.clear();
      }
    }
    const std::string s = trim(cur);
    if (!s.empty()) sentences.push_back(s);
  }
  return sentences;
}

}  // namespace tacitsim
