#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "prosolm/corpus.hpp"
#include "prosolm/error.hpp"
#include "prosolm/textio.hpp"

namespace prosolm {

inline constexpr const char* kBosWord = "<s>";
inline constexpr const char* kEosWord = "</s>";
inline constexpr const char* kUnkWord = "<unk>";

// Conditioning factors available to a model. Words are factors of the two
// preceding positions; prosody classes of the preceding and the predicted
// position.
enum class Factor : int {
  prev2_word = 0,  // w-2
  prev_word = 1,   // w-1
  prev_pros = 2,   // p-1
  cur_pros = 3,    // p0
};

inline const char* factor_tag(Factor f) {
  switch (f) {
    case Factor::prev2_word: return "W-2";
    case Factor::prev_word: return "W-1";
    case Factor::prev_pros: return "P-1";
    case Factor::cur_pros: return "P0";
  }
  return "?";
}

inline Factor factor_from_tag(const std::string& tag) {
  if (tag == "W-2") return Factor::prev2_word;
  if (tag == "W-1") return Factor::prev_word;
  if (tag == "P-1") return Factor::prev_pros;
  if (tag == "P0") return Factor::cur_pros;
  throw schema_error("unknown factor tag '" + tag + "'");
}

enum class Smoothing { ml, witten_bell };

inline const char* to_string(Smoothing s) {
  return s == Smoothing::ml ? "ml" : "wb";
}

inline Smoothing smoothing_from_string(const std::string& s) {
  if (s == "ml") return Smoothing::ml;
  if (s == "wb") return Smoothing::witten_bell;
  throw schema_error("unknown smoothing '" + s + "' (expected wb|ml)");
}

// One of the seven conditioning configurations.
struct ModelConfig {
  std::string name;
  std::vector<Factor> context;

  bool uses_prosody() const {
    return std::any_of(context.begin(), context.end(), [](Factor f) {
      return f == Factor::prev_pros || f == Factor::cur_pros;
    });
  }
};

inline const std::vector<ModelConfig>& model_configs() {
  static const std::vector<ModelConfig> configs = {
      {"uni", {}},
      {"bi", {Factor::prev_word}},
      {"tri", {Factor::prev2_word, Factor::prev_word}},
      {"bi_prosUni", {Factor::prev_word, Factor::cur_pros}},
      {"bi_prosBi", {Factor::prev_word, Factor::prev_pros, Factor::cur_pros}},
      {"tri_prosUni", {Factor::prev2_word, Factor::prev_word, Factor::cur_pros}},
      {"tri_prosBi",
       {Factor::prev2_word, Factor::prev_word, Factor::prev_pros, Factor::cur_pros}},
  };
  return configs;
}

inline const ModelConfig& config_by_name(const std::string& name) {
  for (const auto& c : model_configs()) {
    if (c.name == name) return c;
  }
  throw usage_error("unknown model config '" + name +
                    "' (expected uni|bi|tri|bi_prosUni|bi_prosBi|tri_prosUni|tri_prosBi)");
}

// Backoff path: drop one factor at a time until the context is empty. The
// most distant conditioning goes first and the immediately preceding word is
// kept longest: w-2, then p-1, then p0, then w-1.
inline std::vector<std::vector<Factor>> backoff_chain(const ModelConfig& config) {
  static constexpr std::array<Factor, 4> drop_order = {
      Factor::prev2_word, Factor::prev_pros, Factor::cur_pros, Factor::prev_word};
  std::vector<std::vector<Factor>> chain;
  std::vector<Factor> current = config.context;
  chain.push_back(current);
  while (!current.empty()) {
    for (Factor f : drop_order) {
      const auto it = std::find(current.begin(), current.end(), f);
      if (it != current.end()) {
        current.erase(it);
        break;
      }
    }
    chain.push_back(current);
  }
  return chain;
}

// Full conditioning information at one predicted position. Missing history at
// the start of an utterance is padded with <s> / kNoPros.
struct WordContext {
  std::string prev2_word = kBosWord;
  std::string prev_word = kBosWord;
  int prev_pros = kNoPros;
  int cur_pros = kNoPros;
};

struct PerplexityReport {
  double log_prob_sum = 0.0;  // natural log
  std::uint64_t predicted_token_count = 0;
  double perplexity = 0.0;  // exp(-log_prob_sum / predicted_token_count)
  std::uint64_t oov_count = 0;

  // `model,corpus,k,tokens,oov,logprob,ppl`
  std::string csv_line(const std::string& model, const std::string& corpus, int k) const {
    return model + "," + corpus + "," + std::to_string(k) + "," +
           std::to_string(predicted_token_count) + "," + std::to_string(oov_count) + "," +
           format_double(log_prob_sum) + "," + format_double(perplexity);
  }
};

struct WordProbability {
  double mean_prob = 0.0;
  std::uint64_t occurrences = 0;
};

struct TrainOptions {
  Smoothing smoothing = Smoothing::witten_bell;
  std::uint64_t unk_threshold = 1;  // words at or below this count become <unk>
  bool predict_sentence_end = true;
  int codebook_k = 0;  // prosody alphabet size; 0 = infer from the labels
};

// Factored n-gram language model in backoff form. Counts are accumulated at
// every node of the backoff chain; probabilities are Witten-Bell discounted
// (or left at maximum likelihood) and stored as log10 values, so a model and
// its save/load round-trip produce bit-identical probabilities.
//
// Smoothing semantics per node, for context h with total count c(h), distinct
// successor count T(h), and prediction vocabulary V:
//   - context never seen: the whole distribution passes through to the next
//     node (backoff weight 1).
//   - Witten-Bell, unseen words remain: seen words get c(h,w)/(c(h)+T(h));
//     the reserved mass T(h)/(c(h)+T(h)) goes to unseen words proportionally
//     to the next node's distribution, scaled to normalize exactly.
//   - context saw every word of V: plain c(h,w)/c(h); nothing to reserve.
//   - maximum likelihood: c(h,w)/c(h); unseen words in a seen context get 0.
// Below the unigram node sits the uniform distribution over V.
class FactoredLm {
 public:
  using ContextKey = std::array<std::int32_t, 4>;
  static constexpr std::int32_t kUnusedSlot = std::numeric_limits<std::int32_t>::min();
  static constexpr std::int32_t kBosId = 0;
  static constexpr std::int32_t kEosId = 1;
  static constexpr std::int32_t kUnkId = 2;

  struct ContextTable {
    std::map<std::int32_t, double> log10_prob;  // seen successor words
    double log10_bow = 0.0;
  };

  struct Node {
    std::vector<Factor> factors;
    std::map<ContextKey, ContextTable> contexts;
  };

  static FactoredLm train(const QuantizedCorpus& corpus, const ModelConfig& config,
                          const TrainOptions& options = {}) {
    if (corpus.base.utterances.empty()) {
      throw infeasible_error("train: cannot train on an empty corpus");
    }
    FactoredLm lm;
    lm.config_ = config;
    lm.smoothing_ = options.smoothing;
    lm.unk_threshold_ = options.unk_threshold;
    lm.predict_end_ = options.predict_sentence_end;

    if (config.uses_prosody()) {
      const int max_label = corpus.max_label();
      if (max_label == kNoPros) {
        throw infeasible_error("train: config '" + config.name +
                               "' conditions on prosody but every token is unlabeled");
      }
      lm.k_ = options.codebook_k > 0 ? options.codebook_k : max_label + 1;
      if (max_label >= lm.k_) {
        throw infeasible_error("train: prosody label " + std::to_string(max_label) +
                               " out of range for k=" + std::to_string(lm.k_));
      }
    } else {
      lm.k_ = options.codebook_k;
    }

    // Vocabulary: words above the threshold, in lexicographic order after the
    // reserved ids.
    const auto freq = word_frequencies(corpus.base);
    lm.vocab_ = {kBosWord, kEosWord, kUnkWord};
    for (const auto& [word, count] : freq) {
      if (count > options.unk_threshold) lm.vocab_.push_back(word);
    }
    for (std::size_t i = 0; i < lm.vocab_.size(); ++i) {
      lm.word_ids_.emplace(lm.vocab_[i], static_cast<std::int32_t>(i));
    }
    lm.log10_uniform_ = -std::log10(static_cast<double>(lm.vocab_.size() - 1));

    // Count accumulation at every backoff node.
    const auto chain = backoff_chain(config);
    struct CountTable {
      std::map<std::int32_t, std::uint64_t> words;
      std::uint64_t total = 0;
    };
    std::vector<std::map<ContextKey, CountTable>> counts(chain.size());
    for (std::size_t u = 0; u < corpus.base.utterances.size(); ++u) {
      const auto framed = lm.frame(corpus.base.utterances[u], corpus.labels[u], nullptr);
      for (const auto& pos : framed) {
        for (std::size_t level = 0; level < chain.size(); ++level) {
          const ContextKey key = project(pos.context, chain[level]);
          auto& table = counts[level][key];
          ++table.words[pos.word];
          ++table.total;
        }
      }
    }

    // Probability tables, bottom-up so each node can evaluate its parent.
    lm.nodes_.resize(chain.size());
    for (std::size_t level = chain.size(); level-- > 0;) {
      Node& node = lm.nodes_[level];
      node.factors = chain[level];
      for (const auto& [key, table] : counts[level]) {
        ContextTable ct;
        const double total = static_cast<double>(table.total);
        const double distinct = static_cast<double>(table.words.size());
        const bool saturated = table.words.size() + 1 >= lm.vocab_.size();
        if (options.smoothing == Smoothing::ml || saturated) {
          for (const auto& [wid, cnt] : table.words) {
            ct.log10_prob.emplace(wid, std::log10(static_cast<double>(cnt) / total));
          }
          ct.log10_bow = 0.0;
        } else {
          const double denom = total + distinct;
          for (const auto& [wid, cnt] : table.words) {
            ct.log10_prob.emplace(wid, std::log10(static_cast<double>(cnt) / denom));
          }
          const double reserved = distinct / denom;
          // Mass of the next node's distribution on this context's unseen
          // words. The complement is cheap but loses precision once most of
          // the mass is seen; sum the unseen side directly in that case.
          double seen_mass = 0.0;
          for (const auto& [wid, cnt] : table.words) {
            seen_mass += std::pow(10.0, lm.eval_log10(level + 1, key, wid));
          }
          double gap = 1.0 - seen_mass;
          if (gap < 0.5) {
            gap = 0.0;
            for (std::int32_t wid = 1; wid < static_cast<std::int32_t>(lm.vocab_.size());
                 ++wid) {
              if (table.words.count(wid) > 0) continue;
              gap += std::pow(10.0, lm.eval_log10(level + 1, key, wid));
            }
          }
          ct.log10_bow = std::log10(reserved / gap);
        }
        node.contexts.emplace(key, std::move(ct));
      }
    }
    return lm;
  }

  const ModelConfig& config() const { return config_; }
  Smoothing smoothing() const { return smoothing_; }
  int codebook_k() const { return k_; }
  std::uint64_t unk_threshold() const { return unk_threshold_; }
  bool predicts_sentence_end() const { return predict_end_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }

  // Words the model can predict: the vocabulary minus <s>.
  std::vector<std::string> prediction_vocabulary() const {
    return {vocab_.begin() + 1, vocab_.end()};
  }

  // Smoothed probability of `word` in the given context. Unknown words (in
  // the context or predicted) map to <unk>. Under maximum likelihood a seen
  // context assigns 0 to unseen successors.
  double prob(const WordContext& ctx, const std::string& word) const {
    if (word.empty()) throw usage_error("prob: empty word");
    if (word == kBosWord) throw usage_error("prob: <s> is never predicted");
    ContextKey full;
    full[slot(Factor::prev2_word)] = lookup(ctx.prev2_word);
    full[slot(Factor::prev_word)] = lookup(ctx.prev_word);
    full[slot(Factor::prev_pros)] = ctx.prev_pros;
    full[slot(Factor::cur_pros)] = ctx.cur_pros;
    const double l = eval_log10(0, full, lookup(word));
    return l == -std::numeric_limits<double>::infinity() ? 0.0 : std::pow(10.0, l);
  }

  PerplexityReport perplexity(const QuantizedCorpus& corpus) const {
    if (corpus.base.utterances.empty()) {
      throw infeasible_error("perplexity: empty corpus");
    }
    validate_labels(corpus);
    PerplexityReport report;
    for (std::size_t u = 0; u < corpus.base.utterances.size(); ++u) {
      const auto framed = frame(corpus.base.utterances[u], corpus.labels[u], &report.oov_count);
      for (const auto& pos : framed) {
        const double l = eval_log10(0, pos.context, pos.word);
        report.log_prob_sum += l * std::log(10.0);
        ++report.predicted_token_count;
      }
    }
    report.perplexity =
        std::exp(-report.log_prob_sum / static_cast<double>(report.predicted_token_count));
    return report;
  }

  // Mean probability of each target word over its token occurrences, scored
  // in the token's actual context. Unattested targets are absent.
  std::map<std::string, WordProbability> avg_word_probability(
      const QuantizedCorpus& corpus, const std::set<std::string>& targets) const {
    if (targets.empty()) throw usage_error("avg_word_probability: empty target set");
    validate_labels(corpus);
    std::map<std::string, WordProbability> result;
    for (std::size_t u = 0; u < corpus.base.utterances.size(); ++u) {
      const auto& utt = corpus.base.utterances[u];
      const auto framed = frame(utt, corpus.labels[u], nullptr);
      for (std::size_t t = 0; t < utt.tokens.size(); ++t) {
        const std::string& word = utt.tokens[t].word;
        if (targets.count(word) == 0) continue;
        const double l = eval_log10(0, framed[t].context, framed[t].word);
        auto& acc = result[word];
        acc.mean_prob += l == -std::numeric_limits<double>::infinity() ? 0.0 : std::pow(10.0, l);
        ++acc.occurrences;
      }
    }
    for (auto& [word, stat] : result) {
      stat.mean_prob /= static_cast<double>(stat.occurrences);
    }
    return result;
  }

  // Versioned text model file; ARPA-inspired with factor-tagged context
  // fields. Round-trips bit-exactly.
  void save(const std::string& path) const {
    auto out = open_output(path);
    out << "prosolm-flm 1\n";
    out << "config " << config_.name << '\n';
    out << "smoothing " << to_string(smoothing_) << '\n';
    out << "k " << k_ << '\n';
    out << "vocab " << vocab_.size() << '\n';
    out << "unk_threshold " << unk_threshold_ << '\n';
    out << "predict_end " << (predict_end_ ? 1 : 0) << '\n';
    out << "\\vocabulary\n";
    for (const auto& w : vocab_) out << w << '\n';
    for (const auto& node : nodes_) {
      out << "\\node";
      if (node.factors.empty()) {
        out << " -";
      } else {
        for (Factor f : node.factors) out << ' ' << factor_tag(f);
      }
      out << '\n';
      for (const auto& [key, table] : node.contexts) {
        std::string ctx_fields;
        for (Factor f : node.factors) {
          ctx_fields += ' ';
          if (f == Factor::prev_pros || f == Factor::cur_pros) {
            ctx_fields += "P:" + std::to_string(key[slot(f)]);
          } else {
            ctx_fields += "W:" + vocab_[static_cast<std::size_t>(key[slot(f)])];
          }
        }
        out << "\\bow" << ctx_fields << ' ' << format_double(table.log10_bow) << '\n';
        const std::string prefix = ctx_fields.empty() ? "" : ctx_fields.substr(1) + " ";
        for (const auto& [wid, logp] : table.log10_prob) {
          out << prefix << vocab_[static_cast<std::size_t>(wid)] << ' '
              << format_double(logp) << '\n';
        }
      }
    }
    out << "\\end\n";
    if (!out) throw io_error("failed writing '" + path + "'");
  }

  static FactoredLm load(const std::string& path) {
    auto in = open_input(path);
    std::string line;
    auto next_line = [&](const std::string& what) {
      if (!std::getline(in, line)) throw schema_error(path + ": truncated file (" + what + ")");
      line = strip_cr(line);
    };
    next_line("version");
    if (line != "prosolm-flm 1") {
      throw schema_error(path + ": unsupported model version '" + line + "'");
    }
    FactoredLm lm;
    auto header_field = [&](const std::string& name) {
      next_line(name);
      const auto cells = split_ws(line);
      if (cells.size() != 2 || cells[0] != name) {
        throw schema_error(path + ": expected header field '" + name + "', got '" + line + "'");
      }
      return cells[1];
    };
    lm.config_ = config_by_name(header_field("config"));
    lm.smoothing_ = smoothing_from_string(header_field("smoothing"));
    lm.k_ = static_cast<int>(parse_int(header_field("k"), path));
    const auto vocab_size = parse_int(header_field("vocab"), path);
    lm.unk_threshold_ = static_cast<std::uint64_t>(parse_int(header_field("unk_threshold"), path));
    lm.predict_end_ = parse_int(header_field("predict_end"), path) != 0;
    next_line("vocabulary marker");
    if (line != "\\vocabulary") throw schema_error(path + ": expected \\vocabulary block");
    if (vocab_size < 3) throw schema_error(path + ": vocabulary too small");
    for (long long i = 0; i < vocab_size; ++i) {
      next_line("vocabulary entry");
      lm.vocab_.push_back(line);
      lm.word_ids_.emplace(line, static_cast<std::int32_t>(i));
    }
    if (lm.vocab_[0] != kBosWord || lm.vocab_[1] != kEosWord || lm.vocab_[2] != kUnkWord) {
      throw schema_error(path + ": vocabulary must start with <s> </s> <unk>");
    }
    lm.log10_uniform_ = -std::log10(static_cast<double>(lm.vocab_.size() - 1));

    const auto expected_chain = backoff_chain(lm.config_);
    Node* node = nullptr;
    std::size_t node_index = 0;
    bool finished = false;
    auto parse_key = [&](const std::vector<std::string>& cells, std::size_t offset,
                         const std::vector<Factor>& factors) {
      ContextKey key = unused_key();
      for (std::size_t i = 0; i < factors.size(); ++i) {
        const std::string& field = cells[offset + i];
        const auto colon = field.find(':');
        if (colon == std::string::npos) {
          throw schema_error(path + ": malformed context field '" + field + "'");
        }
        const std::string tag = field.substr(0, colon);
        const std::string value = field.substr(colon + 1);
        const Factor f = factors[i];
        if (f == Factor::prev_pros || f == Factor::cur_pros) {
          if (tag != "P") throw schema_error(path + ": expected P: field, got '" + field + "'");
          key[slot(f)] = static_cast<std::int32_t>(parse_int(value, path));
        } else {
          if (tag != "W") throw schema_error(path + ": expected W: field, got '" + field + "'");
          const auto it = lm.word_ids_.find(value);
          if (it == lm.word_ids_.end()) {
            throw schema_error(path + ": context word '" + value + "' not in vocabulary");
          }
          key[slot(f)] = it->second;
        }
      }
      return key;
    };
    while (std::getline(in, line)) {
      line = strip_cr(line);
      if (line.empty()) continue;
      if (line == "\\end") {
        finished = true;
        break;
      }
      const auto cells = split_ws(line);
      if (cells[0] == "\\node") {
        if (node_index >= expected_chain.size()) {
          throw schema_error(path + ": more nodes than the backoff chain has");
        }
        std::vector<Factor> factors;
        if (!(cells.size() == 2 && cells[1] == "-")) {
          for (std::size_t i = 1; i < cells.size(); ++i) {
            factors.push_back(factor_from_tag(cells[i]));
          }
        }
        if (factors != expected_chain[node_index]) {
          throw schema_error(path + ": node " + std::to_string(node_index) +
                             " factors do not match the config's backoff chain");
        }
        lm.nodes_.emplace_back();
        node = &lm.nodes_.back();
        node->factors = std::move(factors);
        ++node_index;
        continue;
      }
      if (node == nullptr) throw schema_error(path + ": data line before any \\node");
      const std::size_t arity = node->factors.size();
      if (cells[0] == "\\bow") {
        if (cells.size() != arity + 2) {
          throw schema_error(path + ": malformed bow line '" + line + "'");
        }
        const ContextKey key = parse_key(cells, 1, node->factors);
        node->contexts[key].log10_bow = parse_double(cells.back(), path + " bow line");
      } else if (cells[0].front() == '\\') {
        throw schema_error(path + ": unknown marker line '" + line + "'");
      } else {
        if (cells.size() != arity + 2) {
          throw schema_error(path + ": malformed ngram line '" + line + "'");
        }
        const ContextKey key = parse_key(cells, 0, node->factors);
        const auto wit = lm.word_ids_.find(cells[arity]);
        if (wit == lm.word_ids_.end()) {
          throw schema_error(path + ": predicted word '" + cells[arity] + "' not in vocabulary");
        }
        node->contexts[key].log10_prob.emplace(wit->second,
                                               parse_double(cells.back(), path + " ngram line"));
      }
    }
    if (!finished) throw schema_error(path + ": truncated file (missing \\end)");
    if (node_index != expected_chain.size()) {
      throw schema_error(path + ": expected " + std::to_string(expected_chain.size()) +
                         " backoff nodes, found " + std::to_string(node_index));
    }
    return lm;
  }

  bool operator==(const FactoredLm& other) const {
    if (config_.name != other.config_.name || smoothing_ != other.smoothing_ ||
        k_ != other.k_ || unk_threshold_ != other.unk_threshold_ ||
        predict_end_ != other.predict_end_ || vocab_ != other.vocab_ ||
        nodes_.size() != other.nodes_.size()) {
      return false;
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].factors != other.nodes_[i].factors) return false;
      const auto& a = nodes_[i].contexts;
      const auto& b = other.nodes_[i].contexts;
      if (a.size() != b.size()) return false;
      auto bi = b.begin();
      for (auto ai = a.begin(); ai != a.end(); ++ai, ++bi) {
        if (ai->first != bi->first || ai->second.log10_bow != bi->second.log10_bow ||
            ai->second.log10_prob != bi->second.log10_prob) {
          return false;
        }
      }
    }
    return true;
  }

 private:
  struct FramedPosition {
    ContextKey context;
    std::int32_t word;
  };

  static constexpr std::size_t slot(Factor f) { return static_cast<std::size_t>(f); }

  static ContextKey unused_key() {
    return {kUnusedSlot, kUnusedSlot, kUnusedSlot, kUnusedSlot};
  }

  static ContextKey project(const ContextKey& full, const std::vector<Factor>& factors) {
    ContextKey key = unused_key();
    for (Factor f : factors) key[slot(f)] = full[slot(f)];
    return key;
  }

  std::int32_t lookup(const std::string& word) const {
    const auto it = word_ids_.find(word);
    return it == word_ids_.end() ? kUnkId : it->second;
  }

  // Frames one utterance as <s>-padded positions followed by </s> when
  // sentence-end prediction is on. Counts out-of-vocabulary tokens.
  std::vector<FramedPosition> frame(const Utterance& utt, const std::vector<int>& labels,
                                    std::uint64_t* oov_count) const {
    const std::size_t n = utt.tokens.size();
    std::vector<std::int32_t> wids(n);
    for (std::size_t t = 0; t < n; ++t) {
      const auto it = word_ids_.find(utt.tokens[t].word);
      if (it == word_ids_.end()) {
        wids[t] = kUnkId;
        if (oov_count != nullptr) ++(*oov_count);
      } else {
        wids[t] = it->second;
      }
    }
    std::vector<FramedPosition> out;
    out.reserve(n + 1);
    const std::size_t end = predict_end_ ? n + 1 : n;
    for (std::size_t t = 0; t < end; ++t) {
      FramedPosition pos;
      pos.context[slot(Factor::prev2_word)] = t >= 2 ? wids[t - 2] : kBosId;
      pos.context[slot(Factor::prev_word)] = t >= 1 ? wids[t - 1] : kBosId;
      pos.context[slot(Factor::prev_pros)] =
          t >= 1 ? static_cast<std::int32_t>(labels[t - 1]) : kNoPros;
      pos.context[slot(Factor::cur_pros)] =
          t < n ? static_cast<std::int32_t>(labels[t]) : kNoPros;
      pos.word = t < n ? wids[t] : kEosId;
      out.push_back(pos);
    }
    return out;
  }

  // log10 probability via the backoff walk starting at `level`. Returns
  // -infinity where maximum likelihood assigns zero.
  double eval_log10(std::size_t level, const ContextKey& full, std::int32_t wid) const {
    double acc = 0.0;
    for (std::size_t i = level; i < nodes_.size(); ++i) {
      const Node& node = nodes_[i];
      const auto it = node.contexts.find(project(full, node.factors));
      if (it == node.contexts.end()) continue;  // unseen context: pass through
      const auto pit = it->second.log10_prob.find(wid);
      if (pit != it->second.log10_prob.end()) return acc + pit->second;
      if (smoothing_ == Smoothing::ml) return -std::numeric_limits<double>::infinity();
      acc += it->second.log10_bow;
    }
    return acc + log10_uniform_;
  }

  void validate_labels(const QuantizedCorpus& corpus) const {
    if (!config_.uses_prosody() || k_ <= 0) return;
    const int max_label = corpus.max_label();
    if (max_label >= k_) {
      throw infeasible_error("prosody label " + std::to_string(max_label) +
                             " out of range for model k=" + std::to_string(k_) +
                             " (codebook mismatch)");
    }
  }

  ModelConfig config_;
  Smoothing smoothing_ = Smoothing::witten_bell;
  int k_ = 0;
  std::uint64_t unk_threshold_ = 1;
  bool predict_end_ = true;
  std::vector<std::string> vocab_;
  std::map<std::string, std::int32_t> word_ids_;
  std::vector<Node> nodes_;
  double log10_uniform_ = 0.0;
};

}  // namespace prosolm
