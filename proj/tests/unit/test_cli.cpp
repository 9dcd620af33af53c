#include <algorithm>
#include <json.hpp>

#include "cli_harness.hpp"
#include "doctest.h"
#include "fatality/corpus.hpp"
#include "fatality/metrics.hpp"
#include "fatality/model.hpp"

using namespace fatality;
using namespace fatality::testing;
namespace fs = std::filesystem;

namespace {

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// Split directory whose train and validation sets are both the 8-row fixture.
fs::path overfit_split_dir(const std::string& name) {
  const auto dir = scratch_dir(name);
  const auto csv = read_file(kData + "/overfit_fixture.csv");
  write_text(dir / "train.csv", csv);
  write_text(dir / "validation.csv", csv);
  return dir;
}

std::vector<std::string> overfit_train_args(const fs::path& data, const fs::path& out) {
  return concat({"train", "--data", data.string(), "--vocab", kData + "/vocab_test.txt", "--out",
                 out.string(), "--epochs", "200", "--batch-size", "8", "--lr", "5e-3", "--seed", "3"},
                tiny_model_flags());
}

fs::path zero_head_weights(const fs::path& dir) {
  model::ModelConfig c;
  c.num_layers = 1, c.hidden = 16, c.heads = 2, c.ffn_dim = 64, c.max_positions = 32, c.max_seq = 16;
  c.vocab_size = 100;
  auto p = model::init_params(c, 5);
  p.at("classifier.weight").fill(0);
  p.at("classifier.bias").fill(0);
  const auto path = dir / "zero.bcw";
  model::save_weights(p, c, path);
  return path;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"bogus"}).code == 2);
  CHECK(run_cli({"split", "--nope", "1"}).code == 2);
  CHECK(run_cli({"--help"}).code == 0);
  const auto help = run_cli({"train", "--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("--freeze-encoder") != std::string::npos);
}

TEST_CASE("split writes partitions, manifest and config") {
  const auto out = scratch_dir("cli_split");
  const auto r = run_cli({"split", "--data", kData + "/fixture_events.csv", "--out", out.string(),
                          "--seed", "7"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("examples=40 train=32 validation=4 test=4 seed=7 stratified=true") != std::string::npos);
  CHECK(line_count(read_file(out / "train.csv")) == 33);
  CHECK(line_count(read_file(out / "validation.csv")) == 5);
  CHECK(line_count(read_file(out / "test.csv")) == 5);
  const auto manifest = read_file(out / "split_manifest.tsv");
  CHECK(manifest.rfind("# seed=7\n", 0) == 0);
  CHECK(line_count(manifest) == 43);
  const auto config = read_file(out / "config.txt");
  CHECK(config.find("seed = 7\n") != std::string::npos);
  CHECK(config.find("stratified = true\n") != std::string::npos);

  // Every written row parses back with the original fatality counts.
  std::size_t rows = 0;
  for (const char* part : {"train.csv", "validation.csv", "test.csv"}) {
    rows += corpus::load_csv(out / part).size();
  }
  CHECK(rows == 40);

  const auto again = scratch_dir("cli_split_again");
  REQUIRE(run_cli({"split", "--data", kData + "/fixture_events.csv", "--out", again.string(),
                   "--seed", "7"}).code == 0);
  for (const char* f : {"train.csv", "validation.csv", "test.csv", "split_manifest.tsv"}) {
    CHECK(read_file(out / f) == read_file(again / f));
  }
}

TEST_CASE("split options and errors") {
  const auto out = scratch_dir("cli_split_opts");
  const auto csv = kData + "/fixture_events.csv";
  const auto counts = run_cli({"split", "--data", csv, "--out", out.string(), "--counts", "30,5,5",
                               "--no-stratified"});
  CHECK(counts.code == 0);
  CHECK(counts.out.find("train=30 validation=5 test=5") != std::string::npos);
  CHECK(read_file(out / "split_manifest.tsv").find("# stratified=false") != std::string::npos);

  const auto too_many = run_cli({"split", "--data", csv, "--out", out.string(), "--counts", "40,5,5"});
  CHECK(too_many.code == 2);
  CHECK(too_many.err.find("do not match corpus size 40") != std::string::npos);
  CHECK(run_cli({"split", "--data", csv, "--out", out.string(), "--paper-split"}).code == 2);
  CHECK(run_cli({"split", "--data", "/nonexistent.csv", "--out", out.string()}).code == 2);
  CHECK(run_cli({"split", "--data", csv}).code == 2);
  CHECK(run_cli({"split", "--data", csv, "--out", out.string(), "--seed", "abc"}).code == 2);

  const auto bad = out / "bad.csv";
  write_text(bad, "notes,fatalities\nfine,1\nbroken,many\n");
  const auto r = run_cli({"split", "--data", bad.string(), "--out", out.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("row 2") != std::string::npos);
}

TEST_CASE("paper split on a 4752-row corpus") {
  const auto dir = scratch_dir("cli_paper_split");
  std::string csv = "notes,fatalities\n";
  for (int i = 0; i < 4752; ++i) csv += "event number " + std::to_string(i) + "," + std::to_string(i % 3) + "\n";
  csv += "event number 0,0\nevent number 1,1\n";  // duplicates are dropped first
  write_text(dir / "corpus.csv", csv);
  const auto out = dir / "out";
  const auto r = run_cli({"split", "--data", (dir / "corpus.csv").string(), "--out", out.string(),
                          "--paper-split"});
  REQUIRE(r.code == 0);
  CHECK(line_count(read_file(out / "train.csv")) == 3827);
  CHECK(line_count(read_file(out / "validation.csv")) == 427);
  CHECK(line_count(read_file(out / "test.csv")) == 501);
}

TEST_CASE("train, eval and predict on the overfit fixture") {
  const auto data = overfit_split_dir("cli_overfit_data");
  const auto out = scratch_dir("cli_overfit_out");
  const auto r = run_cli(overfit_train_args(data, out));
  REQUIRE(r.code == 0);
  const auto log = read_file(out / "train_log.jsonl");
  CHECK(line_count(log) == 200);
  CHECK(log == r.out);
  std::string last = log.substr(0, log.size() - 1);
  last = last.substr(last.rfind('\n') + 1);
  const auto entry = nlohmann::json::parse(last);
  CHECK(entry["epoch"] == 200);
  CHECK(entry["train_loss"].get<double>() < 0.05);
  CHECK(fs::exists(out / "final.bcw"));
  CHECK(fs::exists(out / "best.bcw"));
  CHECK(read_file(out / "config.txt").find("seed = 3\n") != std::string::npos);

  const auto fixture = kData + "/overfit_fixture.csv";
  const auto eval_out = out / "eval";
  const auto ev = run_cli({"eval", "--weights", (out / "final.bcw").string(), "--data", fixture,
                           "--vocab", kData + "/vocab_test.txt", "--out", eval_out.string()});
  REQUIRE(ev.code == 0);
  const auto report = nlohmann::ordered_json::parse(ev.out);
  std::vector<std::string> keys;
  for (const auto& [k, v] : report.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"accuracy", "precision", "recall", "f1", "confusion"});
  CHECK(report["accuracy"].get<double>() == 1.0);
  CHECK(nlohmann::ordered_json::parse(read_file(eval_out / "metrics.json")) == report);
  CHECK(fs::exists(eval_out / "config.txt"));

  // predict on the same rows reproduces eval's confusion counts.
  const auto examples = corpus::binarize(corpus::load_csv(fixture));
  std::string texts;
  std::vector<int> actual;
  for (const auto& e : examples) texts += e.text + "\n", actual.push_back(e.label);
  write_text(out / "texts.txt", texts);
  const auto pr = run_cli({"predict", "--weights", (out / "final.bcw").string(), "--vocab",
                           kData + "/vocab_test.txt", "--input", (out / "texts.txt").string()});
  REQUIRE(pr.code == 0);
  std::vector<int> predicted;
  std::istringstream lines(pr.out);
  std::string line;
  while (std::getline(lines, line)) {
    CHECK(line.size() == 10);  // 0.dddddd<TAB>label
    predicted.push_back(line.back() - '0');
  }
  const auto c = metrics::confusion(predicted, actual);
  CHECK(report["confusion"]["tp"] == c.tp);
  CHECK(report["confusion"]["fp"] == c.fp);
  CHECK(report["confusion"]["fn"] == c.fn);
  CHECK(report["confusion"]["tn"] == c.tn);

  const auto wrong_vocab = out / "vocab8.txt";
  write_text(wrong_vocab, "[PAD]\n[UNK]\n[CLS]\n[SEP]\ntaliban\nkill\n##ed\ndistrict\n");
  const auto mismatch = run_cli({"eval", "--weights", (out / "final.bcw").string(), "--data",
                                 fixture, "--vocab", wrong_vocab.string()});
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find("8") != std::string::npos);
  CHECK(mismatch.err.find("100") != std::string::npos);
}

TEST_CASE("train errors") {
  const auto data = overfit_split_dir("cli_train_err_data");
  const auto out = scratch_dir("cli_train_err_out");
  auto args = overfit_train_args(data, out);

  auto epochs0 = args;
  *(std::find(epochs0.begin(), epochs0.end(), "--epochs") + 1) = "0";
  CHECK(run_cli(epochs0).code == 2);

  auto blowup = concat(args, {"--grad-clip-norm", "none", "--warmup-fraction", "0"});
  *(std::find(blowup.begin(), blowup.end(), "--lr") + 1) = "1e30";
  const auto nan = run_cli(blowup);
  CHECK(nan.code == 3);
  CHECK(nan.err.find("step") != std::string::npos);

  auto no_vocab = args;
  *(std::find(no_vocab.begin(), no_vocab.end(), "--vocab") + 1) = "/nonexistent/vocab.txt";
  CHECK(run_cli(no_vocab).code == 2);

  auto file_data = args;
  *(std::find(file_data.begin(), file_data.end(), "--data") + 1) = kData + "/overfit_fixture.csv";
  CHECK(run_cli(file_data).code == 2);

  auto bad_heads = concat(args, {"--heads", "3"});
  CHECK(run_cli(bad_heads).code == 2);
}

TEST_CASE("config file with flag precedence") {
  const auto data = overfit_split_dir("cli_cfg_data");
  const auto out = scratch_dir("cli_cfg_out");
  write_text(out / "run.cfg",
             "# tiny run\nepochs = 3\nbatch-size = 8\nlr = 5e-3\nseed = 11\nlayers = 1\nhidden = 16\n"
             "heads = 2\nffn_dim = 64\nmax_positions = 32\nmax_seq = 16\nvocab = " +
                 kData + "/vocab_test.txt\n");
  const auto r = run_cli({"train", "--config", (out / "run.cfg").string(), "--data", data.string(),
                          "--out", (out / "a").string(), "--epochs", "2"});
  REQUIRE(r.code == 0);
  CHECK(line_count(read_file(out / "a" / "train_log.jsonl")) == 2);
  const auto cfg = read_file(out / "a" / "config.txt");
  CHECK(cfg.find("epochs = 2\n") != std::string::npos);
  CHECK(cfg.find("seed = 11\n") != std::string::npos);

  write_text(out / "bad.cfg", "colour = blue\n");
  CHECK(run_cli({"train", "--config", (out / "bad.cfg").string()}).code == 2);
  CHECK(run_cli({"train", "--config", (out / "missing.cfg").string()}).code == 2);
}

TEST_CASE("predict contracts") {
  const auto dir = scratch_dir("cli_predict");
  const auto weights = zero_head_weights(dir).string();
  const auto vocab = kData + "/vocab_test.txt";
  const auto one = run_cli({"predict", "--weights", weights, "--vocab", vocab, "--text", "Taliban killed"});
  CHECK(one.code == 0);
  CHECK(one.out == "0.500000\t1\n");

  write_text(dir / "twice.txt", "fatal clash in kabul\nfatal clash in kabul\n");
  const auto twice = run_cli({"predict", "--weights", weights, "--vocab", vocab, "--input",
                              (dir / "twice.txt").string(), "--out", (dir / "p").string()});
  REQUIRE(twice.code == 0);
  REQUIRE(line_count(twice.out) == 2);
  CHECK(twice.out.substr(0, twice.out.find('\n')) == twice.out.substr(twice.out.find('\n') + 1, 10));
  CHECK(read_file(dir / "p" / "predictions.tsv") == twice.out);
  CHECK(fs::exists(dir / "p" / "config.txt"));

  write_text(dir / "empty.txt", "");
  const auto empty = run_cli({"predict", "--weights", weights, "--vocab", vocab, "--input",
                              (dir / "empty.txt").string()});
  CHECK(empty.code == 0);
  CHECK(empty.out.empty());

  CHECK(run_cli({"predict", "--weights", weights, "--vocab", vocab, "--input", "/nonexistent.txt"}).code == 2);
  CHECK(run_cli({"predict", "--weights", weights, "--vocab", vocab}).code == 2);
  CHECK(run_cli({"predict", "--weights", weights, "--vocab", vocab, "--text", "x", "--input",
                 (dir / "empty.txt").string()}).code == 2);
  CHECK(run_cli({"predict", "--weights", weights, "--vocab", vocab, "--text", "x", "--threshold", "1.5"}).code == 2);

  write_text(dir / "corrupt.bcw", "XXXX");
  CHECK(run_cli({"predict", "--weights", (dir / "corrupt.bcw").string(), "--vocab", vocab, "--text", "x"}).code == 2);
}

TEST_CASE("analyze writes the frozen fixture tables") {
  const auto out = scratch_dir("cli_analyze");
  const auto r = run_cli({"analyze", "--data", kData + "/fixture_events.csv", "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.err.empty());
  CHECK(read_file(out / "length_stats.tsv") ==
        "char_min\tchar_mean\tchar_max\tword_min\tword_mean\tword_max\n46\t71.5\t94\t7\t11.3\t15\n");
  const auto fatal = read_file(out / "top_words_fatal.tsv");
  CHECK(line_count(fatal) == 10);
  CHECK(fatal.rfind("killed\t18\ntaliban\t16\nfighters\t9\n", 0) == 0);
  CHECK(read_file(out / "top_words_nonfatal.tsv").rfind("taliban\t17\nforces\t12\n", 0) == 0);
  CHECK(line_count(read_file(out / "word_cloud.tsv")) == 130);
  CHECK(read_file(out / "config.txt").find("k = 10\n") != std::string::npos);

  const auto k3 = run_cli({"analyze", "--data", kData + "/fixture_events.csv", "--out",
                           (out / "k3").string(), "--k", "3", "--stopwords", kData + "/stopwords_en.txt"});
  CHECK(k3.code == 0);
  CHECK(line_count(read_file(out / "k3" / "top_words_fatal.tsv")) == 3);
  CHECK(run_cli({"analyze", "--data", kData + "/fixture_events.csv", "--out", out.string(), "--k", "0"}).code == 2);

  write_text(out / "calm.csv", "notes,fatalities\nprotest in kabul,0\nmarket reopened,0\n");
  const auto calm = run_cli({"analyze", "--data", (out / "calm.csv").string(), "--out", (out / "calm").string()});
  CHECK(calm.code == 0);
  CHECK(calm.err.find("warning") != std::string::npos);
  CHECK(read_file(out / "calm" / "top_words_fatal.tsv").empty());
}
