#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "prosolm/error.hpp"
#include "prosolm/textio.hpp"

namespace prosolm {

// Width of the prosodic descriptor attached to a spoken word.
inline constexpr int kFeatureDim = 88;

// Class label carried by tokens that have no prosody vector.
inline constexpr int kNoPros = -1;

struct Token {
  std::string word;  // lowercase, non-empty, no whitespace
  std::optional<std::vector<double>> prosody;  // exactly kFeatureDim finite entries

  bool operator==(const Token&) const = default;
};

struct Utterance {
  std::string id;
  std::string child;
  std::string speaker;
  std::vector<Token> tokens;  // non-empty

  bool operator==(const Utterance&) const = default;
};

struct Corpus {
  std::string name;
  std::vector<Utterance> utterances;  // file order, deterministic

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& u : utterances) n += u.tokens.size();
    return n;
  }
};

// Word -> age of acquisition in months (positive, finite).
struct AoaDataset {
  std::map<std::string, double> entries;
};

enum class PosTag { nn, vrb, fct, adj, oth };

inline const char* to_string(PosTag t) {
  switch (t) {
    case PosTag::nn: return "nn";
    case PosTag::vrb: return "vrb";
    case PosTag::fct: return "fct";
    case PosTag::adj: return "adj";
    case PosTag::oth: return "oth";
  }
  return "oth";
}

inline PosTag pos_from_string(const std::string& s) {
  if (s == "nn") return PosTag::nn;
  if (s == "vrb") return PosTag::vrb;
  if (s == "fct") return PosTag::fct;
  if (s == "adj") return PosTag::adj;
  if (s == "oth") return PosTag::oth;
  throw schema_error("unknown pos tag '" + s + "' (expected nn|vrb|fct|adj|oth)");
}

struct PosLabels {
  std::map<std::string, PosTag> entries;
};

// Canonical word form: ASCII-lowercased with leading/trailing punctuation
// stripped. Internal punctuation (don't, mm-hm) survives. Returns the empty
// string for words that are pure punctuation.
inline std::string normalize_word(const std::string& raw) {
  std::string s = lower_ascii(raw);
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline bool has_whitespace(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

namespace detail {

inline std::string file_stem(const std::string& path) {
  const auto slash = path.find_last_of("/\\");
  std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = base.find_last_of('.');
  if (dot != std::string::npos && dot > 0) base.resize(dot);
  return base;
}

}  // namespace detail

// Reads the JSONL corpus format: one object per line with keys id, child,
// speaker, words (array of strings) and prosody (array parallel to words,
// entries either null or an array of exactly kFeatureDim numbers). A missing
// prosody key stands for all-null.
inline Corpus load_corpus(const std::string& path) {
  auto in = open_input(path);
  Corpus corpus;
  corpus.name = detail::file_stem(path);
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw schema_error(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    const std::string where = path + ":" + std::to_string(line_no);
    if (!rec.is_object()) throw schema_error(where + ": record is not an object");
    for (const char* key : {"id", "child", "speaker"}) {
      if (!rec.contains(key) || !rec[key].is_string()) {
        throw schema_error(where + ": missing or non-string field '" + std::string(key) + "'");
      }
    }
    if (!rec.contains("words") || !rec["words"].is_array() || rec["words"].empty()) {
      throw schema_error(where + ": 'words' must be a non-empty array");
    }
    Utterance utt;
    utt.id = rec["id"].get<std::string>();
    utt.child = rec["child"].get<std::string>();
    utt.speaker = rec["speaker"].get<std::string>();
    if (!seen_ids.insert(utt.id).second) {
      throw schema_error(where + ": duplicate utterance id '" + utt.id + "'");
    }
    const auto& words = rec["words"];
    const nlohmann::json* prosody = nullptr;
    if (rec.contains("prosody") && !rec["prosody"].is_null()) {
      prosody = &rec["prosody"];
      if (!prosody->is_array() || prosody->size() != words.size()) {
        throw schema_error(where + ": 'prosody' must be an array parallel to 'words'");
      }
    }
    for (std::size_t t = 0; t < words.size(); ++t) {
      if (!words[t].is_string()) {
        throw schema_error(where + ": word " + std::to_string(t) + " is not a string");
      }
      const std::string raw = words[t].get<std::string>();
      if (has_whitespace(raw)) {
        throw schema_error(where + ": word " + std::to_string(t) + " contains whitespace");
      }
      Token tok;
      tok.word = normalize_word(raw);
      if (tok.word.empty()) {
        throw schema_error(where + ": utterance '" + utt.id + "' word " + std::to_string(t) +
                           " is empty after normalization");
      }
      if (prosody != nullptr && !(*prosody)[t].is_null()) {
        const auto& vec = (*prosody)[t];
        if (!vec.is_array() || static_cast<int>(vec.size()) != kFeatureDim) {
          throw schema_error(where + ": utterance '" + utt.id + "' token " + std::to_string(t) +
                             ": prosody vector has " + std::to_string(vec.size()) + " entries, expected " +
                             std::to_string(kFeatureDim));
        }
        std::vector<double> values(kFeatureDim);
        for (int d = 0; d < kFeatureDim; ++d) {
          if (!vec[d].is_number()) {
            throw schema_error(where + ": utterance '" + utt.id + "' token " + std::to_string(t) +
                               ": prosody entry " + std::to_string(d) + " is not a number");
          }
          values[d] = vec[d].get<double>();
          if (!std::isfinite(values[d])) {
            throw schema_error(where + ": utterance '" + utt.id + "' token " + std::to_string(t) +
                               ": non-finite prosody entry " + std::to_string(d));
          }
        }
        tok.prosody = std::move(values);
      }
      utt.tokens.push_back(std::move(tok));
    }
    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
  auto out = open_output(path);
  for (const auto& utt : corpus.utterances) {
    nlohmann::json rec;
    rec["id"] = utt.id;
    rec["child"] = utt.child;
    rec["speaker"] = utt.speaker;
    auto& words = rec["words"] = nlohmann::json::array();
    auto& prosody = rec["prosody"] = nlohmann::json::array();
    for (const auto& tok : utt.tokens) {
      words.push_back(tok.word);
      if (tok.prosody) {
        prosody.push_back(*tok.prosody);
      } else {
        prosody.push_back(nullptr);
      }
    }
    out << rec.dump() << '\n';
  }
  if (!out) throw io_error("failed writing '" + path + "'");
}

inline const std::set<std::string>& default_noise_markers() {
  static const std::set<std::string> markers = {"xxx", "yyy", "www"};
  return markers;
}

// Keeps utterances whose speaker matches; when drop_noise is set, also drops
// utterances containing any noise-marker token.
inline Corpus filter_utterances(const Corpus& corpus, const std::string& speaker, bool drop_noise,
                                const std::set<std::string>& noise_markers = default_noise_markers()) {
  if (speaker.empty()) throw usage_error("filter_utterances: speaker must be non-empty");
  Corpus out;
  out.name = corpus.name;
  for (const auto& utt : corpus.utterances) {
    if (utt.speaker != speaker) continue;
    if (drop_noise) {
      const bool noisy = std::any_of(utt.tokens.begin(), utt.tokens.end(), [&](const Token& t) {
        return noise_markers.count(t.word) > 0;
      });
      if (noisy) continue;
    }
    out.utterances.push_back(utt);
  }
  return out;
}

inline std::map<std::string, std::uint64_t> word_frequencies(const Corpus& corpus) {
  std::map<std::string, std::uint64_t> freq;
  for (const auto& utt : corpus.utterances) {
    for (const auto& tok : utt.tokens) ++freq[tok.word];
  }
  return freq;
}

// Element-wise mean of the prosody vectors of each word type. Words whose
// tokens all lack prosody are absent from the result.
inline std::map<std::string, std::vector<double>> type_level_average(const Corpus& corpus) {
  std::map<std::string, std::pair<std::vector<double>, std::uint64_t>> acc;
  for (const auto& utt : corpus.utterances) {
    for (const auto& tok : utt.tokens) {
      if (!tok.prosody) continue;
      auto& slot = acc[tok.word];
      if (slot.second == 0) slot.first.assign(kFeatureDim, 0.0);
      for (int d = 0; d < kFeatureDim; ++d) slot.first[d] += (*tok.prosody)[d];
      ++slot.second;
    }
  }
  std::map<std::string, std::vector<double>> out;
  for (auto& [word, slot] : acc) {
    for (double& v : slot.first) v /= static_cast<double>(slot.second);
    out.emplace(word, std::move(slot.first));
  }
  return out;
}

// CSV with header `word,aoa_months`.
inline AoaDataset load_aoa(const std::string& path) {
  auto in = open_input(path);
  AoaDataset aoa;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "word,aoa_months") {
        throw schema_error(path + ": expected header 'word,aoa_months', got '" + line + "'");
      }
      continue;
    }
    const auto cells = split_char(line, ',');
    if (cells.size() != 2) {
      throw schema_error(path + ":" + std::to_string(line_no) + ": expected 2 columns");
    }
    const std::string word = normalize_word(cells[0]);
    if (word.empty()) throw schema_error(path + ":" + std::to_string(line_no) + ": empty word");
    const double months = parse_double(cells[1], path + ":" + std::to_string(line_no));
    if (!(months > 0.0) || !std::isfinite(months)) {
      throw schema_error(path + ":" + std::to_string(line_no) + ": aoa_months must be positive and finite");
    }
    if (!aoa.entries.emplace(word, months).second) {
      throw schema_error(path + ":" + std::to_string(line_no) + ": duplicate word '" + word + "'");
    }
  }
  return aoa;
}

inline void save_aoa(const AoaDataset& aoa, const std::string& path) {
  auto out = open_output(path);
  out << "word,aoa_months\n";
  for (const auto& [word, months] : aoa.entries) {
    out << word << ',' << format_double(months) << '\n';
  }
  if (!out) throw io_error("failed writing '" + path + "'");
}

// CSV with header `word,pos`.
inline PosLabels load_pos(const std::string& path) {
  auto in = open_input(path);
  PosLabels pos;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "word,pos") {
        throw schema_error(path + ": expected header 'word,pos', got '" + line + "'");
      }
      continue;
    }
    const auto cells = split_char(line, ',');
    if (cells.size() != 2) {
      throw schema_error(path + ":" + std::to_string(line_no) + ": expected 2 columns");
    }
    const std::string word = normalize_word(cells[0]);
    if (word.empty()) throw schema_error(path + ":" + std::to_string(line_no) + ": empty word");
    if (!pos.entries.emplace(word, pos_from_string(cells[1])).second) {
      throw schema_error(path + ":" + std::to_string(line_no) + ": duplicate word '" + word + "'");
    }
  }
  return pos;
}

inline void save_pos(const PosLabels& pos, const std::string& path) {
  auto out = open_output(path);
  out << "word,pos\n";
  for (const auto& [word, tag] : pos.entries) {
    out << word << ',' << to_string(tag) << '\n';
  }
  if (!out) throw io_error("failed writing '" + path + "'");
}

// Corpus plus one prosody-class label per token. Tokens without prosody carry
// kNoPros. Produced by quantize_corpus and consumed by the language models.
struct QuantizedCorpus {
  Corpus base;
  std::vector<std::vector<int>> labels;  // parallel to base.utterances[i].tokens

  static QuantizedCorpus without_labels(Corpus corpus) {
    QuantizedCorpus qc;
    qc.labels.reserve(corpus.utterances.size());
    for (const auto& utt : corpus.utterances) {
      qc.labels.emplace_back(utt.tokens.size(), kNoPros);
    }
    qc.base = std::move(corpus);
    return qc;
  }

  int max_label() const {
    int m = kNoPros;
    for (const auto& utt : labels) {
      for (int v : utt) m = std::max(m, v);
    }
    return m;
  }
};

// Quantized corpus JSONL: the corpus schema plus a parallel `pros_class`
// array of integers (kNoPros for unlabeled tokens).
inline void save_quantized_corpus(const QuantizedCorpus& qc, const std::string& path) {
  auto out = open_output(path);
  for (std::size_t i = 0; i < qc.base.utterances.size(); ++i) {
    const auto& utt = qc.base.utterances[i];
    nlohmann::json rec;
    rec["id"] = utt.id;
    rec["child"] = utt.child;
    rec["speaker"] = utt.speaker;
    auto& words = rec["words"] = nlohmann::json::array();
    auto& prosody = rec["prosody"] = nlohmann::json::array();
    for (const auto& tok : utt.tokens) {
      words.push_back(tok.word);
      if (tok.prosody) {
        prosody.push_back(*tok.prosody);
      } else {
        prosody.push_back(nullptr);
      }
    }
    rec["pros_class"] = qc.labels[i];
    out << rec.dump() << '\n';
  }
  if (!out) throw io_error("failed writing '" + path + "'");
}

inline QuantizedCorpus load_quantized_corpus(const std::string& path) {
  QuantizedCorpus qc;
  qc.base = load_corpus(path);
  // Second pass for the labels; load_corpus already validated the rest.
  auto in = open_input(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const nlohmann::json rec = nlohmann::json::parse(line);
    const std::size_t u = qc.labels.size();
    const auto& utt = qc.base.utterances[u];
    if (!rec.contains("pros_class") || !rec["pros_class"].is_array() ||
        rec["pros_class"].size() != utt.tokens.size()) {
      throw schema_error(path + ":" + std::to_string(line_no) +
                         ": 'pros_class' must be an integer array parallel to 'words'");
    }
    std::vector<int> labels;
    labels.reserve(utt.tokens.size());
    for (const auto& v : rec["pros_class"]) {
      if (!v.is_number_integer()) {
        throw schema_error(path + ":" + std::to_string(line_no) + ": non-integer pros_class entry");
      }
      const int label = v.get<int>();
      if (label < kNoPros) {
        throw schema_error(path + ":" + std::to_string(line_no) + ": pros_class entry below " +
                           std::to_string(kNoPros));
      }
      labels.push_back(label);
    }
    qc.labels.push_back(std::move(labels));
  }
  return qc;
}

}  // namespace prosolm
