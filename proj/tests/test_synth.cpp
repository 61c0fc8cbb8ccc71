#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <set>

#include "prosolm/synth.hpp"
#include "test_helpers.hpp"

using namespace prosolm;
using Catch::Approx;

namespace {

SynthSpec small_spec() {
  SynthSpec spec;
  spec.vocab_size = 30;
  spec.utterance_count = 400;
  spec.seed = 11;
  return spec;
}

std::vector<PosGaussian> silent_gaussians() {
  std::vector<PosGaussian> gs(5);
  for (std::size_t c = 0; c < 5; ++c) {
    gs[c].mean.assign(static_cast<std::size_t>(kFeatureDim), static_cast<double>(c));
    gs[c].stddev.assign(static_cast<std::size_t>(kFeatureDim), 0.0);
  }
  return gs;
}

}  // namespace

TEST_CASE("synthesis is deterministic in the seed") {
  const auto a = synthesize(small_spec());
  const auto b = synthesize(small_spec());
  CHECK(a.corpus.utterances == b.corpus.utterances);
  CHECK(a.aoa.entries == b.aoa.entries);
  CHECK(a.pos.entries == b.pos.entries);

  auto other = small_spec();
  other.seed = 12;
  const auto c = synthesize(other);
  CHECK_FALSE(a.corpus.utterances == c.corpus.utterances);
}

TEST_CASE("generated corpus respects the requested shape") {
  const auto spec = small_spec();
  const auto out = synthesize(spec);
  REQUIRE(out.corpus.utterances.size() == spec.utterance_count);
  CHECK(out.corpus.name == "synthetic");

  std::set<std::string> ids;
  std::set<std::string> seen_words;
  for (const auto& utt : out.corpus.utterances) {
    CHECK(ids.insert(utt.id).second);
    CHECK(utt.child == spec.child);
    CHECK(utt.speaker == spec.speaker);
    REQUIRE(utt.tokens.size() >= spec.min_utterance_len);
    REQUIRE(utt.tokens.size() <= spec.max_utterance_len);
    for (const auto& tok : utt.tokens) {
      REQUIRE(tok.prosody.has_value());
      REQUIRE(tok.prosody->size() == static_cast<std::size_t>(kFeatureDim));
      seen_words.insert(tok.word);
    }
  }
  // Every realized word is in the POS table, tagged by its index.
  CHECK(out.pos.entries.size() == spec.vocab_size);
  CHECK(out.pos.entries.at("w000") == PosTag::nn);
  CHECK(out.pos.entries.at("w001") == PosTag::vrb);
  CHECK(out.pos.entries.at("w002") == PosTag::fct);
  CHECK(out.pos.entries.at("w003") == PosTag::adj);
  CHECK(out.pos.entries.at("w004") == PosTag::oth);
  for (const auto& w : seen_words) CHECK(out.pos.entries.count(w) == 1);
  // AoA covers exactly the realized vocabulary.
  CHECK(out.aoa.entries.size() == word_frequencies(out.corpus).size());
}

TEST_CASE("plain zipf stream puts most mass on the head ranks") {
  auto spec = small_spec();
  spec.state_word_mix = 0.0;  // no emphasis rotation: pure Zipf ranks
  spec.utterance_count = 1500;
  const auto out = synthesize(spec);
  const auto freq = word_frequencies(out.corpus);
  auto count = [&](const std::string& w) {
    const auto it = freq.find(w);
    return it == freq.end() ? std::uint64_t{0} : it->second;
  };
  CHECK(count("w000") > count("w004"));
  CHECK(count("w004") > count("w020"));
  CHECK(count("w000") > 4 * count("w010"));
}

TEST_CASE("word-coupled marks land on the archetype dimensions only") {
  auto spec = small_spec();
  spec.pos_gaussians = silent_gaussians();
  spec.prosody_word_coupling = 0.8;
  spec.state_shift = 1.5;
  const auto out = synthesize(spec);

  const double mark = spec.prosody_word_coupling * kSynthArchetypeShift;
  std::map<std::string, std::vector<double>> first_seen;
  for (const auto& utt : out.corpus.utterances) {
    for (const auto& tok : utt.tokens) {
      const auto& v = *tok.prosody;
      const double base = v[0];  // POS class mean, constant across dims here
      for (std::size_t d : kSynthArchetypeDims) {
        const double lift = v[d] - base;
        CHECK((std::abs(lift) <= 1e-12 || lift == Approx(mark)));
      }
      for (std::size_t d : kSynthStateDims) {
        const double lift = v[d] - base;
        CHECK((std::abs(lift) <= 1e-12 || lift == Approx(spec.state_shift)));
      }
      // A quiet dimension carries nothing but the class mean.
      CHECK(v[30] == Approx(base));
      // Marks are a fixed per-word signature.
      auto [it, fresh] = first_seen.emplace(tok.word, std::vector<double>{});
      std::vector<double> sig = {v[kSynthArchetypeDims[0]] - base,
                                 v[kSynthArchetypeDims[1]] - base,
                                 v[kSynthArchetypeDims[2]] - base};
      if (fresh) {
        it->second = sig;
      } else {
        CHECK(it->second == sig);
      }
    }
  }
}

TEST_CASE("silent generator emits identical vectors per word") {
  auto spec = small_spec();
  spec.pos_gaussians = silent_gaussians();
  spec.state_shift = 0.0;  // no per-token state marking left
  const auto out = synthesize(spec);
  std::map<std::string, std::vector<double>> expect;
  for (const auto& utt : out.corpus.utterances) {
    for (const auto& tok : utt.tokens) {
      auto [it, fresh] = expect.emplace(tok.word, *tok.prosody);
      if (!fresh) CHECK(*tok.prosody == it->second);
    }
  }
}

TEST_CASE("noise-free aoa is the documented linear form") {
  auto spec = small_spec();
  spec.aoa_model.intercept = 30.0;
  spec.aoa_model.log_freq_weight = -2.5;
  spec.aoa_model.feature_weights.clear();
  spec.aoa_model.contextual_weight = 0.0;
  spec.aoa_model.noise_stddev = 0.0;
  const auto out = synthesize(spec);
  const auto freq = word_frequencies(out.corpus);
  for (const auto& [word, months] : out.aoa.entries) {
    const double expect = 30.0 - 2.5 * std::log(static_cast<double>(freq.at(word)));
    CHECK(months == Approx(std::max(1.0, expect)).margin(1e-9));
  }
}

TEST_CASE("aoa feature weights read the realized type averages") {
  auto spec = small_spec();
  spec.aoa_model.feature_weights = {{20, 2.0}, {60, -1.0}};
  spec.aoa_model.noise_stddev = 0.0;
  const auto out = synthesize(spec);
  const auto freq = word_frequencies(out.corpus);
  const auto avg = type_level_average(out.corpus);
  for (const auto& [word, months] : out.aoa.entries) {
    const double expect = spec.aoa_model.intercept +
                          spec.aoa_model.log_freq_weight *
                              std::log(static_cast<double>(freq.at(word))) +
                          2.0 * avg.at(word)[20] - 1.0 * avg.at(word)[60];
    CHECK(months == Approx(std::max(1.0, expect)).margin(1e-9));
  }
}

TEST_CASE("contextual aoa term averages maximum-likelihood bigram surprisal") {
  auto spec = small_spec();
  spec.vocab_size = 20;
  spec.utterance_count = 250;
  spec.aoa_model.feature_weights.clear();
  spec.aoa_model.contextual_weight = -2.0;
  spec.aoa_model.noise_stddev = 0.0;
  const auto out = synthesize(spec);

  // Recompute the documented contextual statistic from the corpus alone.
  std::map<std::string, std::map<std::string, std::uint64_t>> bigram;
  std::map<std::string, std::uint64_t> total;
  for (const auto& utt : out.corpus.utterances) {
    std::string prev = "<s>";
    for (const auto& tok : utt.tokens) {
      ++bigram[prev][tok.word];
      ++total[prev];
      prev = tok.word;
    }
  }
  std::map<std::string, std::pair<double, std::uint64_t>> acc;
  for (const auto& utt : out.corpus.utterances) {
    std::string prev = "<s>";
    for (const auto& tok : utt.tokens) {
      const double p = static_cast<double>(bigram[prev][tok.word]) /
                       static_cast<double>(total[prev]);
      acc[tok.word].first += std::log(p);
      ++acc[tok.word].second;
      prev = tok.word;
    }
  }

  const auto freq = word_frequencies(out.corpus);
  for (const auto& [word, months] : out.aoa.entries) {
    const double contextual = acc.at(word).first / static_cast<double>(acc.at(word).second);
    const double expect = spec.aoa_model.intercept +
                          spec.aoa_model.log_freq_weight *
                              std::log(static_cast<double>(freq.at(word))) -
                          2.0 * contextual;
    CHECK(months == Approx(std::max(1.0, expect)).margin(1e-9));
  }
}

TEST_CASE("aoa never drops below one month") {
  auto spec = small_spec();
  spec.aoa_model.intercept = 0.2;
  spec.aoa_model.log_freq_weight = 0.0;
  spec.aoa_model.feature_weights.clear();
  spec.aoa_model.noise_stddev = 0.0;
  const auto out = synthesize(spec);
  for (const auto& [word, months] : out.aoa.entries) CHECK(months == 1.0);
}

TEST_CASE("generator specs are validated") {
  SynthSpec s;

  s = small_spec();
  s.vocab_size = 4;
  CHECK_THROWS_AS(synthesize(s), Error);

  s = small_spec();
  s.utterance_count = 0;
  CHECK_THROWS_AS(synthesize(s), Error);

  s = small_spec();
  s.zipf_exponent = 0.0;
  CHECK_THROWS_AS(synthesize(s), Error);

  s = small_spec();
  s.min_utterance_len = 0;
  CHECK_THROWS_AS(synthesize(s), Error);

  s = small_spec();
  s.min_utterance_len = 9;
  s.max_utterance_len = 4;
  CHECK_THROWS_AS(synthesize(s), Error);

  s = small_spec();
  s.prosody_word_coupling = 1.4;
  CHECK_THROWS_AS(synthesize(s), Error);

  s = small_spec();
  s.state_word_mix = -0.1;
  CHECK_THROWS_AS(synthesize(s), Error);

  s = small_spec();
  s.pos_gaussians = silent_gaussians();
  s.pos_gaussians.pop_back();
  CHECK_THROWS_AS(synthesize(s), Error);

  s = small_spec();
  s.pos_gaussians = silent_gaussians();
  s.pos_gaussians[2].mean.resize(5);
  CHECK_THROWS_AS(synthesize(s), Error);

  s = small_spec();
  s.aoa_model.feature_weights = {{123, 1.0}};
  CHECK_THROWS_AS(synthesize(s), Error);
}
