#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tacitsim/text.hpp"

namespace tacitsim {

// ---------------------------------------------------------------------------
// METEOR: unigram alignment in stages (exact surface form, then Porter stem,
// then an optional synonym hook), combined into a recall-weighted harmonic
// mean with a fragmentation penalty.
//
//   P = m / |candidate|,  R = m / |reference|
//   fmean   = P·R / (0.9·P + 0.1·R)
//   penalty = 0.5 · (chunks / m)^3
//   score   = fmean · (1 − penalty)
//
// Within a stage, candidate tokens are scanned left to right and each takes
// the first still-unmatched reference token, so alignment is deterministic.
// ---------------------------------------------------------------------------

/// Optional third alignment stage; returns true when two (unequal,
/// unequal-stemmed) tokens should still count as a match. The default
/// pipeline runs without one.
using SynonymMatcher = std::function<bool(const std::string&, const std::string&)>;

struct MeteorAlignment {
  std::vector<std::pair<int, int>> matches;  // (candidate index, reference index)
  int chunks = 0;
};

inline MeteorAlignment align_unigrams(const std::vector<std::string>& cand,
                                      const std::vector<std::string>& ref,
                                      const SynonymMatcher& synonyms = {}) {
  const std::size_t nc = cand.size();
  const std::size_t nr = ref.size();
  std::vector<bool> cand_used(nc, false), ref_used(nr, false);
  MeteorAlignment out;

  auto run_stage = [&](auto&& equal) {
    for (std::size_t i = 0; i < nc; ++i) {
      if (cand_used[i]) continue;
      for (std::size_t j = 0; j < nr; ++j) {
        if (ref_used[j]) continue;
        if (equal(i, j)) {
          cand_used[i] = ref_used[j] = true;
          out.matches.push_back({static_cast<int>(i), static_cast<int>(j)});
          break;
        }
      }
    }
  };

  run_stage([&](std::size_t i, std::size_t j) { return cand[i] == ref[j]; });

  std::vector<std::string> cand_stems(nc), ref_stems(nr);
  for (std::size_t i = 0; i < nc; ++i) cand_stems[i] = porter_stem(cand[i]);
  for (std::size_t j = 0; j < nr; ++j) ref_stems[j] = porter_stem(ref[j]);
  run_stage([&](std::size_t i, std::size_t j) { return cand_stems[i] == ref_stems[j]; });

  if (synonyms) {
    run_stage([&](std::size_t i, std::size_t j) { return synonyms(cand[i], ref[j]); });
  }

  std::sort(out.matches.begin(), out.matches.end());

  if (!out.matches.empty()) {
    out.chunks = 1;
    for (std::size_t k = 0; k + 1 < out.matches.size(); ++k) {
      if (out.matches[k + 1].first != out.matches[k].first + 1 ||
          out.matches[k + 1].second != out.matches[k].second + 1) {
        ++out.chunks;
      }
    }
  }
  return out;
}

inline double meteor_tokens(const std::vector<std::string>& cand,
                            const std::vector<std::string>& ref,
                            const SynonymMatcher& synonyms = {}) {
  if (cand.empty() || ref.empty()) return 0.0;
  const MeteorAlignment al = align_unigrams(cand, ref, synonyms);
  const double m = static_cast<double>(al.matches.size());
  if (m == 0.0) return 0.0;
  const double precision = m / static_cast<double>(cand.size());
  const double recall = m / static_cast<double>(ref.size());
  const double fmean = precision * recall / (0.9 * precision + 0.1 * recall);
  const double frag = static_cast<double>(al.chunks) / m;
  const double penalty = 0.5 * frag * frag * frag;
  return fmean * (1.0 - penalty);
}

inline double meteor(const std::string& candidate, const std::string& reference,
                     const SynonymMatcher& synonyms = {}) {
  return meteor_tokens(tokenize(candidate), tokenize(reference), synonyms);
}

}  // namespace tacitsim
