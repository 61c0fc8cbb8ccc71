#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prosolm/corpus.hpp"
#include "prosolm/error.hpp"
#include "prosolm/rng.hpp"

namespace prosolm {

// Per-POS prosody distribution: diagonal Gaussian in feature space.
struct PosGaussian {
  std::vector<double> mean;    // kFeatureDim
  std::vector<double> stddev;  // kFeatureDim, non-negative
};

// Linear AoA generator: intercept + w_f·log(freq) + Σ_j w_j·avg_feature_j
// + w_c·(mean log bigram probability) + Gaussian noise, clamped to ≥ 1 month.
// The contextual term uses maximum-likelihood bigram probabilities of the
// generated corpus itself, so words that are predictable in context get a
// lower (earlier) AoA when the weight is negative.
struct AoaGenModel {
  double intercept = 30.0;
  double log_freq_weight = -2.5;
  std::map<std::size_t, double> feature_weights;  // feature dim -> weight
  double contextual_weight = 0.0;
  double noise_stddev = 0.5;
};

struct SynthSpec {
  std::size_t vocab_size = 100;
  std::size_t utterance_count = 10000;
  double zipf_exponent = 1.35;
  std::size_t min_utterance_len = 3;
  std::size_t max_utterance_len = 12;
  // Strength of the word → prosody link. Each word carries a fixed set of
  // binary prosodic archetype marks; a mark adds coupling·shift to one of the
  // dimensions in kSynthArchetypeDims, so quantized classes pick up partial
  // word information (discrete jumps survive per-dimension standardization,
  // which a continuous per-word offset would not).
  double prosody_word_coupling = 0.9;
  // Four-state emphasis process over token positions. A token's state is
  // marked on its own prosody (kSynthStateDims carry the two state bits), but
  // the state read by the word sampler is the PREVIOUS token's: a
  // state_word_mix share of head-rank draws is rotated inside the top
  // kSynthStateBlock ranks by 4·state positions. The prosody of the preceding
  // token therefore predicts the next word beyond what the word history or
  // the current token's own prosody knows — the anticipatory cue that models
  // conditioned on the previous prosody class exploit. Set state_word_mix and
  // state_shift to 0 for an i.i.d. Zipf stream.
  double state_stickiness = 0.0;  // P(state kept) per step; 0 = i.i.d. states
  double state_word_mix = 0.85;   // in [0,1]
  double state_shift = 2.5;       // bit weight on kSynthStateDims
  std::vector<PosGaussian> pos_gaussians;  // 5 entries; defaults built when empty
  AoaGenModel aoa_model;
  std::uint64_t seed = 1;
  std::string child = "synth";
  std::string speaker = "MOT";
};

struct SynthOutput {
  Corpus corpus;
  AoaDataset aoa;
  PosLabels pos;
};

// Feature dimensions carrying the two emphasis-state bits; kept clear of the
// POS mean dimensions (0..9) and the archetype dimensions.
inline constexpr std::array<std::size_t, 2> kSynthStateDims = {70, 71};
inline constexpr int kSynthStateCount = 4;
// Head block of the rank table rotated by the emphasis state.
inline constexpr std::size_t kSynthStateBlock = 16;
// Dimensions carrying the per-word archetype marks, and the mark height
// before coupling is applied.
inline constexpr std::array<std::size_t, 3> kSynthArchetypeDims = {20, 40, 60};
inline constexpr double kSynthArchetypeShift = 2.5;

// Each POS class gets its own pair of elevated mean dimensions (class c on
// dims 2c and 2c+1), tight spread elsewhere.
inline std::vector<PosGaussian> default_pos_gaussians() {
  std::vector<PosGaussian> gaussians(5);
  for (std::size_t c = 0; c < 5; ++c) {
    gaussians[c].mean.assign(kFeatureDim, 0.0);
    gaussians[c].stddev.assign(kFeatureDim, 0.25);
    gaussians[c].mean[2 * c] = 4.0;
    gaussians[c].mean[2 * c + 1] = 4.0;
  }
  return gaussians;
}

// The archetype dimensions double as the AoA signal carriers: their
// type-level averages vary across words (through the archetype marks), so a
// weight on them is recoverable by the feature sweep. Kept away from the POS
// mean dimensions so the sweep separates the two sources.
inline std::map<std::size_t, double> default_aoa_feature_weights() {
  return {{20, 2.0}, {40, -2.0}, {60, 1.5}};
}

namespace detail {

inline std::string synth_word(std::size_t index, std::size_t vocab_size) {
  std::size_t width = 1;
  for (std::size_t v = vocab_size - 1; v >= 10; v /= 10) ++width;
  width = std::max<std::size_t>(width, 3);
  std::string digits = std::to_string(index);
  return "w" + std::string(width - digits.size(), '0') + digits;
}

}  // namespace detail

// Deterministic synthetic corpus + AoA + POS triple: Zipf-distributed words
// chunked into utterances, per-token prosody from the word's POS Gaussian
// plus archetype and state marks, AoA from the linear generator over realized
// statistics. All randomness fans out from the single seed.
inline SynthOutput synthesize(const SynthSpec& spec) {
  if (spec.vocab_size < 5) {
    throw infeasible_error("synth: vocab_size must be at least 5 to populate the POS classes");
  }
  if (spec.utterance_count == 0) throw infeasible_error("synth: utterance_count must be positive");
  if (!(spec.zipf_exponent > 0.0)) throw infeasible_error("synth: zipf_exponent must be > 0");
  if (spec.min_utterance_len == 0 || spec.min_utterance_len > spec.max_utterance_len) {
    throw infeasible_error("synth: utterance length bounds must satisfy 1 <= min <= max");
  }
  if (spec.prosody_word_coupling < 0.0 || spec.prosody_word_coupling > 1.0) {
    throw infeasible_error("synth: prosody_word_coupling must lie in [0,1]");
  }
  if (spec.state_stickiness < 0.0 || spec.state_stickiness > 1.0 ||
      spec.state_word_mix < 0.0 || spec.state_word_mix > 1.0) {
    throw infeasible_error("synth: state_stickiness and state_word_mix must lie in [0,1]");
  }
  const auto gaussians = spec.pos_gaussians.empty() ? default_pos_gaussians() : spec.pos_gaussians;
  if (gaussians.size() != 5) throw infeasible_error("synth: need one Gaussian per POS class");
  for (const auto& g : gaussians) {
    if (g.mean.size() != kFeatureDim || g.stddev.size() != kFeatureDim) {
      throw infeasible_error("synth: POS Gaussians must be " + std::to_string(kFeatureDim) +
                             "-dimensional");
    }
  }
  for (const auto& [dim, weight] : spec.aoa_model.feature_weights) {
    if (dim >= kFeatureDim) {
      throw infeasible_error("synth: AoA feature weight on out-of-range dim " +
                             std::to_string(dim));
    }
  }

  const Rng root(spec.seed);
  Rng rng_marks = root.derive(1);
  Rng rng_lengths = root.derive(2);
  Rng rng_words = root.derive(3);
  Rng rng_prosody = root.derive(4);
  Rng rng_noise = root.derive(5);
  Rng rng_state = root.derive(6);

  SynthOutput out;

  // Vocabulary, POS assignment, fixed per-word archetype marks.
  std::vector<std::string> words(spec.vocab_size);
  std::vector<PosTag> pos_of(spec.vocab_size);
  std::vector<std::array<bool, kSynthArchetypeDims.size()>> marks(spec.vocab_size);
  for (std::size_t i = 0; i < spec.vocab_size; ++i) {
    words[i] = detail::synth_word(i, spec.vocab_size);
    pos_of[i] = static_cast<PosTag>(i % 5);
    out.pos.entries.emplace(words[i], pos_of[i]);
    for (auto& bit : marks[i]) bit = rng_marks.uniform() < 0.5;
  }

  // Zipf cumulative mass over ranks (rank = vocabulary index + 1).
  std::vector<double> cumulative(spec.vocab_size);
  double mass = 0.0;
  for (std::size_t r = 1; r <= spec.vocab_size; ++r) {
    mass += std::pow(static_cast<double>(r), -spec.zipf_exponent);
    cumulative[r - 1] = mass;
  }
  auto sample_rank = [&]() {
    const double u = rng_words.uniform() * mass;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<std::size_t>(
        std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                 static_cast<std::ptrdiff_t>(spec.vocab_size) - 1));
  };
  // A state_word_mix share of draws landing in the head block has its rank
  // rotated by the given (previous-token) state, so each state prefers a
  // different ordering of the frequent words while the tail stays shared.
  const std::size_t block = std::min<std::size_t>(kSynthStateBlock, spec.vocab_size);
  const std::size_t step = std::max<std::size_t>(1, block / kSynthStateCount);
  auto sample_word = [&](int state) {
    std::size_t rank = sample_rank();
    if (spec.state_word_mix > 0.0 && rng_words.uniform() < spec.state_word_mix &&
        rank < block) {
      rank = (rank + static_cast<std::size_t>(state) * step) % block;
    }
    return rank;
  };

  // Token stream chunked into utterances, prosody per token.
  out.corpus.name = "synthetic";
  const std::size_t len_span = spec.max_utterance_len - spec.min_utterance_len + 1;
  for (std::size_t u = 0; u < spec.utterance_count; ++u) {
    Utterance utt;
    utt.id = "synth-" + std::to_string(u);
    utt.child = spec.child;
    utt.speaker = spec.speaker;
    const std::size_t len = spec.min_utterance_len + rng_lengths.below(len_span);
    int prev_state = static_cast<int>(rng_state.below(kSynthStateCount));
    for (std::size_t t = 0; t < len; ++t) {
      // The word reads the PREVIOUS token's state; this token's own state is
      // drawn afterwards and marks only its prosody.
      const std::size_t w = sample_word(prev_state);
      const int state = (spec.state_stickiness > 0.0 &&
                         rng_state.uniform() < spec.state_stickiness)
                            ? prev_state
                            : static_cast<int>(rng_state.below(kSynthStateCount));
      Token token;
      token.word = words[w];
      const auto& g = gaussians[static_cast<std::size_t>(pos_of[w])];
      std::vector<double> vec(kFeatureDim);
      for (std::size_t d = 0; d < kFeatureDim; ++d) {
        vec[d] = g.mean[d] + g.stddev[d] * rng_prosody.normal();
      }
      for (std::size_t j = 0; j < kSynthArchetypeDims.size(); ++j) {
        if (marks[w][j]) {
          vec[kSynthArchetypeDims[j]] += spec.prosody_word_coupling * kSynthArchetypeShift;
        }
      }
      vec[kSynthStateDims[0]] += spec.state_shift * static_cast<double>(state & 1);
      vec[kSynthStateDims[1]] += spec.state_shift * static_cast<double>((state >> 1) & 1);
      token.prosody = std::move(vec);
      utt.tokens.push_back(std::move(token));
      prev_state = state;
    }
    out.corpus.utterances.push_back(std::move(utt));
  }

  // Realized statistics the AoA generator reads off the corpus.
  const auto freq = word_frequencies(out.corpus);
  const auto avg_features = type_level_average(out.corpus);

  std::map<std::string, double> mean_log_bigram;
  if (spec.aoa_model.contextual_weight != 0.0) {
    // Maximum-likelihood bigram log probabilities with a start-of-utterance
    // context, averaged over each word's occurrences.
    std::map<std::string, std::map<std::string, std::uint64_t>> bigram;
    std::map<std::string, std::uint64_t> context_total;
    for (const auto& utt : out.corpus.utterances) {
      std::string prev = "<s>";
      for (const auto& token : utt.tokens) {
        ++bigram[prev][token.word];
        ++context_total[prev];
        prev = token.word;
      }
    }
    std::map<std::string, std::pair<double, std::uint64_t>> acc;
    for (const auto& utt : out.corpus.utterances) {
      std::string prev = "<s>";
      for (const auto& token : utt.tokens) {
        const double p = static_cast<double>(bigram[prev][token.word]) /
                         static_cast<double>(context_total[prev]);
        auto& a = acc[token.word];
        a.first += std::log(p);
        ++a.second;
        prev = token.word;
      }
    }
    for (const auto& [word, a] : acc) {
      mean_log_bigram[word] = a.first / static_cast<double>(a.second);
    }
  }

  for (const auto& [word, count] : freq) {
    double months = spec.aoa_model.intercept +
                    spec.aoa_model.log_freq_weight * std::log(static_cast<double>(count));
    const auto& features = avg_features.at(word);
    for (const auto& [dim, weight] : spec.aoa_model.feature_weights) {
      months += weight * features[dim];
    }
    if (spec.aoa_model.contextual_weight != 0.0) {
      months += spec.aoa_model.contextual_weight * mean_log_bigram.at(word);
    }
    months += spec.aoa_model.noise_stddev * rng_noise.normal();
    out.aoa.entries.emplace(word, std::max(1.0, months));
  }

  return out;
}

}  // namespace prosolm
