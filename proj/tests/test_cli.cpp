#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "prosolm/corpus.hpp"
#include "prosolm/quantizer.hpp"
#include "test_helpers.hpp"

#ifndef PROSOLM_CLI_PATH
#error "PROSOLM_CLI_PATH must point at the built binary"
#endif

using namespace prosolm;
using prosolm::test::TempDir;

namespace {

struct CliRun {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CliRun run_cli(const TempDir& dir, const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const std::string log = dir.file("cli-log-" + std::to_string(counter++) + ".txt");
  std::string command = env.empty() ? std::string() : env + " ";
  command += std::string(PROSOLM_CLI_PATH) + " " + args + " >" + log + " 2>&1";
  const int status = std::system(command.c_str());
  CliRun run;
  run.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  run.output = ss.str();
  return run;
}

}  // namespace

TEST_CASE("cli drives the full modeling chain") {
  TempDir dir("cli");
  const std::string data = dir.file("data");

  // --- synth ---------------------------------------------------------------
  auto synth = run_cli(dir, "synth --out " + data +
                                " --vocab-size 30 --utterances 800 --seed 5 --noise 0.2");
  INFO(synth.output);
  REQUIRE(synth.exit_code == 0);
  const std::string corpus_path = data + "/corpus.jsonl";
  REQUIRE(load_corpus(corpus_path).utterances.size() == 800);
  REQUIRE(load_aoa(data + "/aoa.csv").entries.size() >= 10);
  REQUIRE(load_pos(data + "/pos.csv").entries.size() == 30);

  // --- quantize-fit / apply --------------------------------------------------
  const std::string codebook = dir.file("codebook.txt");
  auto qfit = run_cli(dir, "quantize-fit --corpus " + corpus_path + " --out " + codebook +
                               " --k 8 --seed 3");
  INFO(qfit.output);
  REQUIRE(qfit.exit_code == 0);
  CHECK(load_codebook(codebook).k == 8);

  const std::string quantized = dir.file("quantized.jsonl");
  auto qapply = run_cli(dir, "quantize-apply --corpus " + corpus_path + " --codebook " +
                                 codebook + " --out " + quantized);
  INFO(qapply.output);
  REQUIRE(qapply.exit_code == 0);
  const auto qc = load_quantized_corpus(quantized);
  CHECK(qc.max_label() < 8);
  CHECK(qc.base.utterances.size() == 800);

  // --- lm-train: quantized file is sniffed without a codebook flag ----------
  const std::string model = dir.file("bi_prosUni.lm");
  auto ltrain = run_cli(dir, "lm-train --corpus " + quantized + " --out " + model +
                                 " --config bi_prosUni");
  INFO(ltrain.output);
  REQUIRE(ltrain.exit_code == 0);

  // --- lm-ppl to stdout and to a file ----------------------------------------
  auto lppl = run_cli(dir, "lm-ppl --model " + model + " --corpus " + quantized);
  INFO(lppl.output);
  REQUIRE(lppl.exit_code == 0);
  CHECK(lppl.output.find("model,corpus,k,tokens,oov,logprob,ppl") != std::string::npos);
  CHECK(lppl.output.find("bi_prosUni") != std::string::npos);

  const std::string ppl_csv = dir.file("ppl.csv");
  auto lppl_file = run_cli(dir, "lm-ppl --model " + model + " --corpus " + corpus_path +
                                    " --codebook " + codebook + " --out " + ppl_csv);
  INFO(lppl_file.output);
  REQUIRE(lppl_file.exit_code == 0);
  std::ifstream ppl_in(ppl_csv);
  std::string header;
  REQUIRE(std::getline(ppl_in, header));
  CHECK(header == "model,corpus,k,tokens,oov,logprob,ppl");

  // --- lm-wordprobs -----------------------------------------------------------
  const std::string targets = dir.file("targets.txt");
  {
    std::ofstream out(targets);
    for (int w = 0; w < 30; ++w) {
      out << "w0" << (w < 10 ? "0" : "") << w << '\n';
    }
  }
  const std::string wordprobs = dir.file("wordprobs.csv");
  auto lwp = run_cli(dir, "lm-wordprobs --model " + model + " --corpus " + quantized +
                              " --targets " + targets + " --out " + wordprobs);
  INFO(lwp.output);
  REQUIRE(lwp.exit_code == 0);
  std::ifstream wp_in(wordprobs);
  REQUIRE(std::getline(wp_in, header));
  CHECK(header == "word,mean_prob,occurrences");

  // --- aoa-sweep and aoa-cv ----------------------------------------------------
  const std::string sweep_csv = dir.file("sweep.csv");
  auto sweep = run_cli(dir, "aoa-sweep --corpus " + corpus_path + " --aoa " + data +
                                "/aoa.csv --out " + sweep_csv + " --mode with_frequency");
  INFO(sweep.output);
  REQUIRE(sweep.exit_code == 0);
  std::ifstream sw_in(sweep_csv);
  REQUIRE(std::getline(sw_in, header));
  CHECK(header.rfind("rank,feature,mode,mean_mse", 0) == 0);

  const std::string cv_json = dir.file("cv.json");
  auto cv = run_cli(dir, "aoa-cv --corpus " + corpus_path + " --aoa " + data +
                             "/aoa.csv --out " + cv_json + " --predictors f_bi --probs bi=" +
                             wordprobs);
  INFO(cv.output);
  REQUIRE(cv.exit_code == 0);
  std::ifstream cv_in(cv_json);
  std::stringstream cv_ss;
  cv_ss << cv_in.rdbuf();
  CHECK(cv_ss.str().find("\"mean_mse\"") != std::string::npos);

  // --- pca ---------------------------------------------------------------------
  const std::string scatter = dir.file("scatter.csv");
  auto pca = run_cli(dir, "pca --corpus " + corpus_path + " --pos " + data + "/pos.csv --out " +
                              scatter + " --svg " + dir.file("scatter.svg") + " --meta " +
                              dir.file("meta.json"));
  INFO(pca.output);
  REQUIRE(pca.exit_code == 0);
  std::ifstream sc_in(scatter);
  REQUIRE(std::getline(sc_in, header));
  CHECK(header == "word,pc1,pc2,pos");
  CHECK(std::ifstream(dir.file("scatter.svg")).good());
  CHECK(std::ifstream(dir.file("meta.json")).good());
}

TEST_CASE("cli exit codes follow the documented classes") {
  TempDir dir("cli-err");

  SECTION("usage errors exit 2") {
    CHECK(run_cli(dir, "").exit_code == 2);                      // missing subcommand
    CHECK(run_cli(dir, "synth --bogus-flag x").exit_code == 2);  // unknown option
    CHECK(run_cli(dir, "lm-train --out m.lm").exit_code == 2);   // missing required option
  }

  SECTION("schema errors exit 3") {
    const std::string bad = dir.file("bad.jsonl");
    {
      std::ofstream out(bad);
      out << "{this is not json\n";
    }
    const auto run = run_cli(dir, "lm-train --corpus " + bad + " --out " + dir.file("m.lm"));
    INFO(run.output);
    CHECK(run.exit_code == 3);

    const std::string bad_aoa = dir.file("bad_aoa.csv");
    {
      std::ofstream out(bad_aoa);
      out << "word,aoa_months\nball,16\nball,17\n";
    }
    const std::string tiny = dir.file("tiny.jsonl");
    {
      std::ofstream out(tiny);
      out << R"({"id":"u1","child":"c","speaker":"MOT","words":["ball"]})" << "\n";
    }
    const auto sweep = run_cli(dir, "aoa-sweep --corpus " + tiny + " --aoa " + bad_aoa +
                                        " --out " + dir.file("s.csv"));
    INFO(sweep.output);
    CHECK(sweep.exit_code == 3);
  }

  SECTION("infeasible requests exit 4") {
    const std::string data = dir.file("data");
    REQUIRE(run_cli(dir, "synth --out " + data + " --vocab-size 12 --utterances 20 --seed 2")
                .exit_code == 0);
    const auto run = run_cli(dir, "quantize-fit --corpus " + data + "/corpus.jsonl --out " +
                                      dir.file("cb.txt") + " --k 100000");
    INFO(run.output);
    CHECK(run.exit_code == 4);
  }

  SECTION("missing inputs exit 5") {
    const auto run =
        run_cli(dir, "lm-ppl --model " + dir.file("absent.lm") + " --corpus " + dir.file("a.jsonl"));
    INFO(run.output);
    CHECK(run.exit_code == 5);
  }
}

TEST_CASE("cli rejects a codebook that does not match the model") {
  TempDir dir("cli-mismatch");
  const std::string data = dir.file("data");
  REQUIRE(run_cli(dir, "synth --out " + data + " --vocab-size 20 --utterances 300 --seed 9")
              .exit_code == 0);
  const std::string corpus = data + "/corpus.jsonl";

  const std::string cb8 = dir.file("cb8.txt");
  const std::string cb4 = dir.file("cb4.txt");
  REQUIRE(run_cli(dir, "quantize-fit --corpus " + corpus + " --out " + cb8 + " --k 8").exit_code ==
          0);
  REQUIRE(run_cli(dir, "quantize-fit --corpus " + corpus + " --out " + cb4 + " --k 4").exit_code ==
          0);

  const std::string model = dir.file("m.lm");
  REQUIRE(run_cli(dir, "lm-train --corpus " + corpus + " --codebook " + cb8 + " --out " + model +
                           " --config tri_prosBi")
              .exit_code == 0);

  const auto mismatch =
      run_cli(dir, "lm-ppl --model " + model + " --corpus " + corpus + " --codebook " + cb4);
  INFO(mismatch.output);
  CHECK(mismatch.exit_code == 4);
  const auto match =
      run_cli(dir, "lm-ppl --model " + model + " --corpus " + corpus + " --codebook " + cb8);
  INFO(match.output);
  CHECK(match.exit_code == 0);
}

TEST_CASE("thread override comes from the environment") {
  TempDir dir("cli-threads");
  const std::string data = dir.file("data");
  REQUIRE(run_cli(dir, "synth --out " + data + " --vocab-size 12 --utterances 120 --seed 4")
              .exit_code == 0);
  const std::string corpus = data + "/corpus.jsonl";

  const auto good = run_cli(dir, "quantize-fit --corpus " + corpus + " --out " +
                                     dir.file("cb.txt") + " --k 4",
                            "PROSOLM_THREADS=2");
  INFO(good.output);
  CHECK(good.exit_code == 0);

  const auto bad = run_cli(dir, "quantize-fit --corpus " + corpus + " --out " +
                                    dir.file("cb2.txt") + " --k 4",
                           "PROSOLM_THREADS=-1");
  INFO(bad.output);
  CHECK(bad.exit_code == 2);

  // Thread count never changes the fitted codebook.
  const auto one = run_cli(dir, "quantize-fit --corpus " + corpus + " --out " +
                                    dir.file("cb_t1.txt") + " --k 4 --seed 6",
                           "PROSOLM_THREADS=1");
  const auto four = run_cli(dir, "quantize-fit --corpus " + corpus + " --out " +
                                     dir.file("cb_t4.txt") + " --k 4 --seed 6",
                            "PROSOLM_THREADS=4");
  REQUIRE(one.exit_code == 0);
  REQUIRE(four.exit_code == 0);
  std::ifstream a(dir.file("cb_t1.txt")), b(dir.file("cb_t4.txt"));
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
}
