// prosolm command-line tool: corpus synthesis, prosody quantization, factored
// language models, AoA regression, and the end-to-end experiment pipeline.
//
// Exit codes: 0 ok, 2 usage, 3 schema/format, 4 infeasible parameters, 5 I/O.
// PROSOLM_THREADS caps internal parallelism (0 = auto).

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "prosolm/corpus.hpp"
#include "prosolm/error.hpp"
#include "prosolm/flm.hpp"
#include "prosolm/pcaviz.hpp"
#include "prosolm/quantizer.hpp"
#include "prosolm/regress.hpp"
#include "prosolm/rng.hpp"
#include "prosolm/synth.hpp"
#include "prosolm/textio.hpp"

namespace fs = std::filesystem;
using namespace prosolm;

namespace {

int env_threads() {
  const char* value = std::getenv("PROSOLM_THREADS");
  if (value == nullptr || *value == '\0') return 0;
  const long long n = parse_int(value, "PROSOLM_THREADS");
  if (n < 0) throw usage_error("PROSOLM_THREADS must be >= 0");
  return static_cast<int>(n);
}

// A corpus file may be raw or already quantized (pros_class arrays). Sniff
// the first record rather than asking the user to say which.
bool is_quantized_file(const std::string& path) {
  auto in = open_input(path);
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      return false;  // load_corpus reports the schema problem properly
    }
    return rec.is_object() && rec.contains("pros_class");
  }
  return false;
}

// Resolves the three ways a language-model command can receive its corpus:
// raw + codebook (quantize here), pre-quantized file, or raw with no prosody
// conditioning. Returns the codebook's k (0 when none applies).
QuantizedCorpus load_lm_corpus(const std::string& corpus_path, const std::string& codebook_path,
                               int* codebook_k) {
  *codebook_k = 0;
  if (!codebook_path.empty()) {
    const QuantizerModel codebook = load_codebook(codebook_path);
    *codebook_k = codebook.k;
    return quantize_corpus(codebook, load_corpus(corpus_path));
  }
  if (is_quantized_file(corpus_path)) {
    QuantizedCorpus qc = load_quantized_corpus(corpus_path);
    *codebook_k = qc.max_label() + 1;
    return qc;
  }
  return QuantizedCorpus::without_labels(load_corpus(corpus_path));
}

void save_wordprobs_csv(const std::string& path,
                        const std::map<std::string, WordProbability>& probs) {
  auto out = open_output(path);
  out << "word,mean_prob,occurrences\n";
  for (const auto& [word, stat] : probs) {
    out << word << ',' << format_double(stat.mean_prob) << ',' << stat.occurrences << '\n';
  }
  if (!out) throw io_error("failed writing '" + path + "'");
}

std::map<std::string, double> load_wordprobs_csv(const std::string& path) {
  auto in = open_input(path);
  std::map<std::string, double> probs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "word,mean_prob,occurrences") {
        throw schema_error(path + ": expected header 'word,mean_prob,occurrences'");
      }
      continue;
    }
    const auto cells = split_char(line, ',');
    if (cells.size() != 3) {
      throw schema_error(path + ":" + std::to_string(line_no) + ": expected 3 columns");
    }
    probs[cells[0]] = parse_double(cells[1], path + ":" + std::to_string(line_no));
  }
  return probs;
}

std::set<std::string> load_target_words(const std::string& path) {
  auto in = open_input(path);
  std::set<std::string> targets;
  std::string line;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (!line.empty()) targets.insert(normalize_word(line));
  }
  targets.erase("");
  if (targets.empty()) throw schema_error(path + ": no target words");
  return targets;
}

// Seeded utterance-level split; order within each side stays corpus order.
std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, double test_frac,
                                       std::uint64_t seed) {
  const std::size_t n = corpus.utterances.size();
  if (!(test_frac > 0.0) || !(test_frac < 1.0)) {
    throw usage_error("test fraction must lie strictly between 0 and 1");
  }
  std::size_t test_n = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(n)));
  test_n = std::max<std::size_t>(1, std::min(test_n, n - 1));
  if (n < 2) throw infeasible_error("cannot split a corpus with fewer than 2 utterances");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::set<std::size_t> test_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(test_n));

  std::pair<Corpus, Corpus> out;
  out.first.name = "train";
  out.second.name = "test";
  for (std::size_t i = 0; i < n; ++i) {
    (test_idx.count(i) > 0 ? out.second : out.first).utterances.push_back(corpus.utterances[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommand options
// ---------------------------------------------------------------------------

struct SynthCmd {
  std::string out;
  SynthSpec spec;
};

struct QuantizeFitCmd {
  std::string corpus, out;
  int k = 50;
  std::uint64_t seed = 1;
  bool raw = false;
  std::size_t max_iterations = 100;
  double tolerance = 1e-6;
};

struct QuantizeApplyCmd {
  std::string corpus, codebook, out;
};

struct LmTrainCmd {
  std::string corpus, codebook, out;
  std::string config = "tri";
  std::string smoothing = "wb";
  std::uint64_t unk_threshold = 1;
  bool no_predict_end = false;
};

struct LmPplCmd {
  std::string model, corpus, codebook, out;
};

struct LmWordprobsCmd {
  std::string model, corpus, codebook, targets, out;
};

struct AoaSweepCmd {
  std::string corpus, aoa, out;
  std::string mode = "with_frequency";
  double lambda = 1.0;
  std::size_t folds = 10;
  std::uint64_t seed = 1;
};

struct AoaCvCmd {
  std::string corpus, aoa, out;
  std::string predictors = "f";
  std::vector<std::string> probs;  // name=path
  double lambda = 1.0;
  std::size_t folds = 10;
  std::uint64_t seed = 1;
};

struct PcaCmd {
  std::string corpus, pos, out, svg, meta;
  bool raw = false;
};

struct PipelineCmd {
  std::string corpus, aoa, out;
  std::uint64_t seed = 7;
  double test_frac = 0.1;
  double lambda = 1.0;
  std::size_t folds = 10;
  std::uint64_t unk_threshold = 1;
  std::string smoothing = "wb";
};

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

void run_synth(const SynthCmd& cmd) {
  const SynthOutput data = synthesize(cmd.spec);
  fs::create_directories(cmd.out);
  save_corpus(data.corpus, (fs::path(cmd.out) / "corpus.jsonl").string());
  save_aoa(data.aoa, (fs::path(cmd.out) / "aoa.csv").string());
  save_pos(data.pos, (fs::path(cmd.out) / "pos.csv").string());
  std::cout << "synth: " << data.corpus.utterances.size() << " utterances, "
            << data.corpus.token_count() << " tokens, " << data.aoa.entries.size()
            << " AoA words -> " << cmd.out << '\n';
}

void run_quantize_fit(const QuantizeFitCmd& cmd) {
  const Corpus corpus = load_corpus(cmd.corpus);
  const Eigen::MatrixXd points = prosody_matrix(corpus);
  if (points.rows() == 0) {
    throw infeasible_error("quantize-fit: corpus has no prosody vectors");
  }
  KmeansOptions options;
  options.standardize = !cmd.raw;
  options.max_iterations = cmd.max_iterations;
  options.relative_tolerance = cmd.tolerance;
  options.threads = env_threads();
  const QuantizerModel model = fit_kmeans(points, cmd.k, cmd.seed, options);
  save_codebook(model, cmd.out);
  std::cout << "quantize-fit: k=" << model.k << " on " << points.rows()
            << " vectors, distortion " << format_double(model.distortion) << " after "
            << model.distortion_trace.size() << " iterations -> " << cmd.out << '\n';
}

void run_quantize_apply(const QuantizeApplyCmd& cmd) {
  const QuantizerModel model = load_codebook(cmd.codebook);
  const Corpus corpus = load_corpus(cmd.corpus);
  const QuantizedCorpus qc = quantize_corpus(model, corpus);
  save_quantized_corpus(qc, cmd.out);
  std::cout << "quantize-apply: labeled " << corpus.token_count() << " tokens with k="
            << model.k << " classes -> " << cmd.out << '\n';
}

void run_lm_train(const LmTrainCmd& cmd) {
  int codebook_k = 0;
  const QuantizedCorpus qc = load_lm_corpus(cmd.corpus, cmd.codebook, &codebook_k);
  TrainOptions options;
  options.smoothing = smoothing_from_string(cmd.smoothing);
  options.unk_threshold = cmd.unk_threshold;
  options.predict_sentence_end = !cmd.no_predict_end;
  options.codebook_k = codebook_k;
  const FactoredLm lm = FactoredLm::train(qc, config_by_name(cmd.config), options);
  lm.save(cmd.out);
  std::cout << "lm-train: " << cmd.config << " (" << cmd.smoothing << "), vocabulary "
            << lm.vocabulary().size() << " -> " << cmd.out << '\n';
}

// Shared by lm-ppl and lm-wordprobs: load model + corpus, enforcing that a
// supplied codebook matches the model's prosody alphabet.
QuantizedCorpus load_scored_corpus(const FactoredLm& lm, const std::string& corpus_path,
                                   const std::string& codebook_path) {
  if (!codebook_path.empty()) {
    const QuantizerModel codebook = load_codebook(codebook_path);
    if (lm.codebook_k() > 0 && codebook.k != lm.codebook_k()) {
      throw infeasible_error("codebook k=" + std::to_string(codebook.k) +
                             " does not match model k=" + std::to_string(lm.codebook_k()));
    }
    return quantize_corpus(codebook, load_corpus(corpus_path));
  }
  if (is_quantized_file(corpus_path)) return load_quantized_corpus(corpus_path);
  return QuantizedCorpus::without_labels(load_corpus(corpus_path));
}

void run_lm_ppl(const LmPplCmd& cmd) {
  const FactoredLm lm = FactoredLm::load(cmd.model);
  const QuantizedCorpus qc = load_scored_corpus(lm, cmd.corpus, cmd.codebook);
  const PerplexityReport report = lm.perplexity(qc);
  const std::string csv = "model,corpus,k,tokens,oov,logprob,ppl\n" +
                          report.csv_line(lm.config().name, qc.base.name, lm.codebook_k()) + "\n";
  if (cmd.out.empty()) {
    std::cout << csv;
  } else {
    auto out = open_output(cmd.out);
    out << csv;
    if (!out) throw io_error("failed writing '" + cmd.out + "'");
  }
}

void run_lm_wordprobs(const LmWordprobsCmd& cmd) {
  const FactoredLm lm = FactoredLm::load(cmd.model);
  const QuantizedCorpus qc = load_scored_corpus(lm, cmd.corpus, cmd.codebook);
  const auto targets = load_target_words(cmd.targets);
  const auto probs = lm.avg_word_probability(qc, targets);
  save_wordprobs_csv(cmd.out, probs);
  std::cout << "lm-wordprobs: scored " << probs.size() << " of " << targets.size()
            << " target words -> " << cmd.out << '\n';
}

void run_aoa_sweep(const AoaSweepCmd& cmd) {
  const Corpus corpus = load_corpus(cmd.corpus);
  const AoaDataset aoa = load_aoa(cmd.aoa);
  SweepOptions options;
  options.lambda = cmd.lambda;
  options.folds = cmd.folds;
  options.seed = cmd.seed;
  const SweepResult sweep = single_feature_sweep(
      word_frequencies(corpus), type_level_average(corpus), aoa,
      sweep_mode_from_string(cmd.mode), options);
  save_sweep_csv(cmd.out, sweep);
  std::cout << "aoa-sweep: " << sweep.ranked.size() << " predictors over "
            << sweep.words.size() << " words, best " << sweep.ranked.front().feature
            << " (mse " << format_double(sweep.ranked.front().mean_mse) << ") -> " << cmd.out
            << '\n';
}

void run_aoa_cv(const AoaCvCmd& cmd) {
  const Corpus corpus = load_corpus(cmd.corpus);
  const AoaDataset aoa = load_aoa(cmd.aoa);
  std::vector<std::pair<std::string, std::map<std::string, double>>> prob_maps;
  for (const auto& spec : cmd.probs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw usage_error("--probs expects name=path, got '" + spec + "'");
    }
    prob_maps.emplace_back(spec.substr(0, eq), load_wordprobs_csv(spec.substr(eq + 1)));
  }
  const DesignMatrix design =
      lm_predictor_matrix(prob_maps, word_frequencies(corpus), aoa, cmd.predictors);
  const CvResult cv = cv_mse(design, cmd.lambda, cmd.folds, cmd.seed);
  save_cv_json(cmd.out, cv, design.column_names, design.word_index.size(), design.dropped_words);
  std::cout << "aoa-cv: predictors [" << cmd.predictors << "] on " << design.word_index.size()
            << " words, mean mse " << format_double(cv.mean_mse) << " -> " << cmd.out << '\n';
}

void run_pca(const PcaCmd& cmd) {
  const Corpus corpus = load_corpus(cmd.corpus);
  const PosLabels pos = load_pos(cmd.pos);
  const auto features = type_level_average(corpus);
  if (features.size() < 3) {
    throw infeasible_error("pca: need at least 3 words with prosody features");
  }
  Eigen::MatrixXd matrix(static_cast<Eigen::Index>(features.size()), kFeatureDim);
  std::vector<std::string> words;
  words.reserve(features.size());
  for (const auto& [word, vec] : features) {
    matrix.row(static_cast<Eigen::Index>(words.size())) =
        Eigen::Map<const Eigen::VectorXd>(vec.data(), kFeatureDim);
    words.push_back(word);
  }
  if (!cmd.raw) {
    matrix = fit_standardizer(matrix).apply_rows(matrix);
  }
  const PcaModel model = fit_pca(matrix);
  ScatterMap points;
  for (std::size_t i = 0; i < words.size(); ++i) {
    points.emplace(words[i], project(model, matrix.row(static_cast<Eigen::Index>(i))));
  }
  save_scatter_csv(cmd.out, points, pos);
  if (!cmd.svg.empty()) save_scatter_svg(cmd.svg, points, pos);
  if (!cmd.meta.empty()) save_pca_metadata(cmd.meta, model, points, pos);
  std::cout << "pca: projected " << points.size() << " words, explained variance "
            << format_double(model.explained_variance_ratio[0]) << " + "
            << format_double(model.explained_variance_ratio[1]) << " -> " << cmd.out << '\n';
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

void run_pipeline(const PipelineCmd& cmd) {
  const fs::path dir(cmd.out);
  fs::create_directories(dir / "models");
  fs::create_directories(dir / "wordprobs");
  fs::create_directories(dir / "cv");

  const Rng root(cmd.seed);
  auto sub_seed = [&root](std::uint64_t salt) {
    Rng child = root.derive(salt);
    return child.next_u64();
  };

  // Inputs: user corpus + AoA, or the default synthetic triple.
  Corpus corpus;
  AoaDataset aoa;
  if (!cmd.corpus.empty()) {
    if (cmd.aoa.empty()) throw usage_error("pipeline: --corpus requires --aoa");
    corpus = load_corpus(cmd.corpus);
    aoa = load_aoa(cmd.aoa);
  } else {
    SynthSpec spec;
    spec.seed = sub_seed(1);
    spec.aoa_model.feature_weights = default_aoa_feature_weights();
    const SynthOutput data = synthesize(spec);
    corpus = std::move(data.corpus);
    aoa = std::move(data.aoa);
    save_corpus(corpus, (dir / "corpus.jsonl").string());
    save_aoa(aoa, (dir / "aoa.csv").string());
    save_pos(data.pos, (dir / "pos.csv").string());
  }

  const auto [train, test] = split_corpus(corpus, cmd.test_frac, sub_seed(2));
  const Smoothing smoothing = smoothing_from_string(cmd.smoothing);
  const std::vector<int> ks = {50, 100, 500};

  nlohmann::ordered_json summary;
  summary["seed"] = cmd.seed;
  summary["corpus"] = {{"utterances", corpus.utterances.size()},
                       {"tokens", corpus.token_count()},
                       {"train_utterances", train.utterances.size()},
                       {"test_utterances", test.utterances.size()}};
  summary["smoothing"] = cmd.smoothing;
  summary["unk_threshold"] = cmd.unk_threshold;

  // Perplexity of every config: word-only models once (k = 0), prosodic
  // models per codebook size. Models and word probabilities are written for
  // the smallest configuration of each config.
  struct PplRow {
    std::string config;
    int k;
    PerplexityReport train_report, test_report;
  };
  std::vector<PplRow> rows;
  std::set<std::string> aoa_words;
  for (const auto& [word, months] : aoa.entries) aoa_words.insert(word);
  std::vector<std::pair<std::string, std::map<std::string, double>>> prob_maps;

  auto process_model = [&](const ModelConfig& config, const QuantizedCorpus& qtrain,
                           const QuantizedCorpus& qtest, int k, bool persist) {
    TrainOptions options;
    options.smoothing = smoothing;
    options.unk_threshold = cmd.unk_threshold;
    options.codebook_k = k;
    const FactoredLm lm = FactoredLm::train(qtrain, config, options);
    rows.push_back({config.name, k, lm.perplexity(qtrain), lm.perplexity(qtest)});
    if (persist) {
      const std::string stem = config.name + (k > 0 ? "_k" + std::to_string(k) : "");
      lm.save((dir / "models" / (stem + ".lm")).string());
      const auto probs = lm.avg_word_probability(qtrain, aoa_words);
      save_wordprobs_csv((dir / "wordprobs" / (stem + ".csv")).string(), probs);
      std::map<std::string, double> flat;
      for (const auto& [word, stat] : probs) flat.emplace(word, stat.mean_prob);
      prob_maps.emplace_back(config.name, std::move(flat));
    }
  };

  const QuantizedCorpus plain_train = QuantizedCorpus::without_labels(train);
  const QuantizedCorpus plain_test = QuantizedCorpus::without_labels(test);
  for (const auto& config : model_configs()) {
    if (!config.uses_prosody()) process_model(config, plain_train, plain_test, 0, true);
  }
  KmeansOptions kmeans_options;
  kmeans_options.threads = env_threads();
  for (const int k : ks) {
    const QuantizerModel codebook =
        fit_kmeans(prosody_matrix(train), k, sub_seed(1000 + static_cast<std::uint64_t>(k)),
                   kmeans_options);
    save_codebook(codebook, (dir / ("codebook_k" + std::to_string(k) + ".txt")).string());
    const QuantizedCorpus qtrain = quantize_corpus(codebook, train);
    const QuantizedCorpus qtest = quantize_corpus(codebook, test);
    for (const auto& config : model_configs()) {
      if (config.uses_prosody()) process_model(config, qtrain, qtest, k, k == ks.front());
    }
  }

  auto ppl_csv = open_output((dir / "perplexity.csv").string());
  ppl_csv << "model,corpus,k,tokens,oov,logprob,ppl\n";
  for (const auto& row : rows) {
    ppl_csv << row.train_report.csv_line(row.config, "train", row.k) << '\n';
    ppl_csv << row.test_report.csv_line(row.config, "test", row.k) << '\n';
  }
  if (!ppl_csv) throw io_error("failed writing perplexity.csv");
  summary["perplexity"] = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    summary["perplexity"].push_back({{"config", row.config},
                                     {"k", row.k},
                                     {"train_ppl", row.train_report.perplexity},
                                     {"test_ppl", row.test_report.perplexity},
                                     {"test_oov", row.test_report.oov_count}});
  }

  // Feature sweeps on two halves of the training corpus, Table-1-style
  // selection, then the regression suite.
  const std::uint64_t cv_seed = sub_seed(3);
  SweepOptions sweep_options;
  sweep_options.lambda = cmd.lambda;
  sweep_options.folds = cmd.folds;
  sweep_options.seed = cv_seed;
  Corpus half_a, half_b;
  half_a.name = "train_a";
  half_b.name = "train_b";
  for (std::size_t i = 0; i < train.utterances.size(); ++i) {
    (i < (train.utterances.size() + 1) / 2 ? half_a : half_b)
        .utterances.push_back(train.utterances[i]);
  }
  const auto freq = word_frequencies(train);
  const SweepResult sweep_a = single_feature_sweep(
      word_frequencies(half_a), type_level_average(half_a), aoa, SweepMode::with_frequency,
      sweep_options);
  const SweepResult sweep_b = single_feature_sweep(
      word_frequencies(half_b), type_level_average(half_b), aoa, SweepMode::with_frequency,
      sweep_options);
  save_sweep_csv((dir / "sweep_a.csv").string(), sweep_a);
  save_sweep_csv((dir / "sweep_b.csv").string(), sweep_b);
  const std::vector<std::string> selected = select_features(sweep_a, sweep_b, 10);
  {
    auto out = open_output((dir / "selected_features.txt").string());
    for (const auto& name : selected) out << name << '\n';
    if (!out) throw io_error("failed writing selected_features.txt");
  }
  summary["selected_features"] = selected;

  summary["cv"] = nlohmann::ordered_json::array();
  auto record_cv = [&](const std::string& label, const DesignMatrix& design) {
    const CvResult cv = cv_mse(design, cmd.lambda, cmd.folds, cv_seed);
    save_cv_json((dir / "cv" / (label + ".json")).string(), cv, design.column_names,
                 design.word_index.size(), design.dropped_words);
    summary["cv"].push_back(
        {{"predictors", label}, {"rows", design.word_index.size()}, {"mean_mse", cv.mean_mse}});
  };
  record_cv("f", lm_predictor_matrix(prob_maps, freq, aoa, "f"));
  for (const auto& [name, probs] : prob_maps) {
    record_cv("f_" + name, lm_predictor_matrix(prob_maps, freq, aoa, "f_" + name));
  }
  record_cv("all", lm_predictor_matrix(prob_maps, freq, aoa, "all"));

  // Frequency plus the selected prosody features: assemble the design matrix
  // by hand from type-level averages.
  {
    const auto features = type_level_average(train);
    DesignMatrix design;
    design.column_names.push_back("f");
    design.column_names.insert(design.column_names.end(), selected.begin(), selected.end());
    std::vector<std::size_t> dims;
    for (const auto& name : selected) {
      dims.push_back(static_cast<std::size_t>(parse_int(name.substr(name.rfind('_') + 1), name)));
    }
    std::vector<std::vector<double>> matrix_rows;
    for (const auto& [word, months] : aoa.entries) {
      const auto fit = freq.find(word);
      const auto vit = features.find(word);
      if (fit == freq.end() || fit->second == 0 || vit == features.end()) {
        design.dropped_words.push_back(word + ": missing from corpus");
        continue;
      }
      std::vector<double> row;
      row.push_back(std::log(static_cast<double>(fit->second)));
      for (const std::size_t d : dims) row.push_back(vit->second[d]);
      design.word_index.push_back(word);
      matrix_rows.push_back(std::move(row));
    }
    design.X.resize(static_cast<Eigen::Index>(matrix_rows.size()),
                    static_cast<Eigen::Index>(design.column_names.size()));
    design.y.resize(static_cast<Eigen::Index>(matrix_rows.size()));
    for (std::size_t i = 0; i < matrix_rows.size(); ++i) {
      design.y(static_cast<Eigen::Index>(i)) = aoa.entries.at(design.word_index[i]);
      for (std::size_t j = 0; j < matrix_rows[i].size(); ++j) {
        design.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = matrix_rows[i][j];
      }
    }
    record_cv("f_selected", design);
  }

  // Rendered comparison table.
  {
    auto txt = open_output((dir / "summary.txt").string());
    txt << "prosolm pipeline summary (seed " << cmd.seed << ")\n";
    txt << "corpus: " << corpus.utterances.size() << " utterances, " << corpus.token_count()
        << " tokens; train " << train.utterances.size() << ", test " << test.utterances.size()
        << "\n\n";
    auto line = [&txt](char fill) {
      txt << std::string(76, fill) << '\n';
    };
    char buf[128];
    txt << "perplexity (" << cmd.smoothing << " smoothing)\n";
    line('-');
    std::snprintf(buf, sizeof(buf), "%-14s %4s %12s %12s %8s\n", "config", "k", "train_ppl",
                  "test_ppl", "oov");
    txt << buf;
    line('-');
    for (const auto& row : rows) {
      std::snprintf(buf, sizeof(buf), "%-14s %4d %12.2f %12.2f %8llu\n", row.config.c_str(),
                    row.k, row.train_report.perplexity, row.test_report.perplexity,
                    static_cast<unsigned long long>(row.test_report.oov_count));
      txt << buf;
    }
    line('-');
    txt << "\nselected features: ";
    for (std::size_t i = 0; i < selected.size(); ++i) {
      txt << (i > 0 ? ", " : "") << selected[i];
    }
    txt << "\n\nAoA cross-validation (lambda " << format_double(cmd.lambda) << ", "
        << cmd.folds << " folds)\n";
    line('-');
    std::snprintf(buf, sizeof(buf), "%-16s %6s %12s\n", "predictors", "rows", "mean_mse");
    txt << buf;
    line('-');
    for (const auto& entry : summary["cv"]) {
      std::snprintf(buf, sizeof(buf), "%-16s %6zu %12.4f\n",
                    entry["predictors"].get<std::string>().c_str(),
                    entry["rows"].get<std::size_t>(), entry["mean_mse"].get<double>());
      txt << buf;
    }
    line('-');
    if (!txt) throw io_error("failed writing summary.txt");
  }
  {
    auto js = open_output((dir / "summary.json").string());
    js << summary.dump(2) << '\n';
    if (!js) throw io_error("failed writing summary.json");
  }
  std::cout << "pipeline: wrote " << (dir / "summary.json").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prosody-aware language modeling toolkit"};
  app.require_subcommand(1);

  SynthCmd synth_cmd;
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus + AoA + POS triple");
  synth->add_option("--out", synth_cmd.out, "output directory")->required();
  synth->add_option("--seed", synth_cmd.spec.seed, "root random seed");
  synth->add_option("--vocab-size", synth_cmd.spec.vocab_size, "vocabulary size (>= 5)");
  synth->add_option("--utterances", synth_cmd.spec.utterance_count, "number of utterances");
  synth->add_option("--zipf", synth_cmd.spec.zipf_exponent, "Zipf exponent (> 0)");
  synth->add_option("--coupling", synth_cmd.spec.prosody_word_coupling,
                    "word-identity share of token prosody, in [0,1]");
  synth->add_option("--noise", synth_cmd.spec.aoa_model.noise_stddev, "AoA noise stddev");
  synth->add_option("--contextual-weight", synth_cmd.spec.aoa_model.contextual_weight,
                    "AoA weight on mean log bigram probability");
  synth->add_option("--min-len", synth_cmd.spec.min_utterance_len, "minimum utterance length");
  synth->add_option("--max-len", synth_cmd.spec.max_utterance_len, "maximum utterance length");
  synth->callback([&] {
    synth_cmd.spec.aoa_model.feature_weights = default_aoa_feature_weights();
    run_synth(synth_cmd);
  });

  QuantizeFitCmd qfit_cmd;
  auto* qfit = app.add_subcommand("quantize-fit", "fit a k-means prosody codebook");
  qfit->add_option("--corpus", qfit_cmd.corpus, "corpus JSONL")->required();
  qfit->add_option("--out", qfit_cmd.out, "codebook file")->required();
  qfit->add_option("--k", qfit_cmd.k, "number of prosody classes")->required();
  qfit->add_option("--seed", qfit_cmd.seed, "random seed");
  qfit->add_option("--max-iter", qfit_cmd.max_iterations, "iteration cap");
  qfit->add_option("--tol", qfit_cmd.tolerance, "relative distortion tolerance");
  qfit->add_flag("--raw", qfit_cmd.raw, "skip per-dimension standardization");
  qfit->callback([&] { run_quantize_fit(qfit_cmd); });

  QuantizeApplyCmd qapply_cmd;
  auto* qapply = app.add_subcommand("quantize-apply", "label a corpus with codebook classes");
  qapply->add_option("--corpus", qapply_cmd.corpus, "corpus JSONL")->required();
  qapply->add_option("--codebook", qapply_cmd.codebook, "codebook file")->required();
  qapply->add_option("--out", qapply_cmd.out, "quantized corpus JSONL")->required();
  qapply->callback([&] { run_quantize_apply(qapply_cmd); });

  LmTrainCmd ltrain_cmd;
  auto* ltrain = app.add_subcommand("lm-train", "train a factored language model");
  ltrain->add_option("--corpus", ltrain_cmd.corpus, "corpus JSONL (raw or quantized)")->required();
  ltrain->add_option("--out", ltrain_cmd.out, "model file")->required();
  ltrain->add_option("--config", ltrain_cmd.config,
                     "uni|bi|tri|bi_prosUni|bi_prosBi|tri_prosUni|tri_prosBi");
  ltrain->add_option("--smoothing", ltrain_cmd.smoothing, "wb|ml");
  ltrain->add_option("--unk-threshold", ltrain_cmd.unk_threshold,
                     "words at or below this count become <unk>");
  ltrain->add_option("--codebook", ltrain_cmd.codebook, "quantize the corpus with this codebook");
  ltrain->add_flag("--no-predict-end", ltrain_cmd.no_predict_end,
                   "do not model the end-of-utterance token");
  ltrain->callback([&] { run_lm_train(ltrain_cmd); });

  LmPplCmd lppl_cmd;
  auto* lppl = app.add_subcommand("lm-ppl", "evaluate perplexity of a model on a corpus");
  lppl->add_option("--model", lppl_cmd.model, "model file")->required();
  lppl->add_option("--corpus", lppl_cmd.corpus, "corpus JSONL (raw or quantized)")->required();
  lppl->add_option("--codebook", lppl_cmd.codebook, "quantize the corpus with this codebook");
  lppl->add_option("--out", lppl_cmd.out, "report CSV (stdout when omitted)");
  lppl->callback([&] { run_lm_ppl(lppl_cmd); });

  LmWordprobsCmd lwp_cmd;
  auto* lwp = app.add_subcommand("lm-wordprobs",
                                 "mean in-context probability of target words");
  lwp->add_option("--model", lwp_cmd.model, "model file")->required();
  lwp->add_option("--corpus", lwp_cmd.corpus, "corpus JSONL (raw or quantized)")->required();
  lwp->add_option("--targets", lwp_cmd.targets, "file with one target word per line")->required();
  lwp->add_option("--codebook", lwp_cmd.codebook, "quantize the corpus with this codebook");
  lwp->add_option("--out", lwp_cmd.out, "output CSV")->required();
  lwp->callback([&] { run_lm_wordprobs(lwp_cmd); });

  AoaSweepCmd sweep_cmd;
  auto* sweep = app.add_subcommand("aoa-sweep", "rank single prosody features as AoA predictors");
  sweep->add_option("--corpus", sweep_cmd.corpus, "corpus JSONL")->required();
  sweep->add_option("--aoa", sweep_cmd.aoa, "AoA CSV")->required();
  sweep->add_option("--out", sweep_cmd.out, "sweep CSV")->required();
  sweep->add_option("--mode", sweep_cmd.mode, "alone|with_frequency");
  sweep->add_option("--lambda", sweep_cmd.lambda, "ridge penalty");
  sweep->add_option("--folds", sweep_cmd.folds, "cross-validation folds");
  sweep->add_option("--seed", sweep_cmd.seed, "fold-shuffle seed");
  sweep->callback([&] { run_aoa_sweep(sweep_cmd); });

  AoaCvCmd cv_cmd;
  auto* cv = app.add_subcommand("aoa-cv", "cross-validated AoA regression");
  cv->add_option("--corpus", cv_cmd.corpus, "corpus JSONL (frequency source)")->required();
  cv->add_option("--aoa", cv_cmd.aoa, "AoA CSV")->required();
  cv->add_option("--out", cv_cmd.out, "result JSON")->required();
  cv->add_option("--predictors", cv_cmd.predictors, "f | all | f_<model> | comma list");
  cv->add_option("--probs", cv_cmd.probs, "model word-probability CSV as name=path")
      ->take_all();
  cv->add_option("--lambda", cv_cmd.lambda, "ridge penalty");
  cv->add_option("--folds", cv_cmd.folds, "cross-validation folds");
  cv->add_option("--seed", cv_cmd.seed, "fold-shuffle seed");
  cv->callback([&] { run_aoa_cv(cv_cmd); });

  PcaCmd pca_cmd;
  auto* pca = app.add_subcommand("pca", "project type-level features to 2-D by POS");
  pca->add_option("--corpus", pca_cmd.corpus, "corpus JSONL")->required();
  pca->add_option("--pos", pca_cmd.pos, "POS CSV")->required();
  pca->add_option("--out", pca_cmd.out, "scatter CSV")->required();
  pca->add_option("--svg", pca_cmd.svg, "also render an SVG scatter");
  pca->add_option("--meta", pca_cmd.meta, "also write silhouette metadata JSON");
  pca->add_flag("--raw", pca_cmd.raw, "fit on raw (unstandardized) features");
  pca->callback([&] { run_pca(pca_cmd); });

  PipelineCmd pipe_cmd;
  auto* pipe = app.add_subcommand("pipeline", "end-to-end experiment run with summary report");
  pipe->add_option("--out", pipe_cmd.out, "output directory")->required();
  pipe->add_option("--corpus", pipe_cmd.corpus, "corpus JSONL (synthesized when omitted)");
  pipe->add_option("--aoa", pipe_cmd.aoa, "AoA CSV (required with --corpus)");
  pipe->add_option("--seed", pipe_cmd.seed, "root seed");
  pipe->add_option("--test-frac", pipe_cmd.test_frac, "held-out utterance fraction");
  pipe->add_option("--lambda", pipe_cmd.lambda, "ridge penalty");
  pipe->add_option("--folds", pipe_cmd.folds, "cross-validation folds");
  pipe->add_option("--unk-threshold", pipe_cmd.unk_threshold, "LM unknown-word threshold");
  pipe->add_option("--smoothing", pipe_cmd.smoothing, "wb|ml");
  pipe->callback([&] { run_pipeline(pipe_cmd); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
