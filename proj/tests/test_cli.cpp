#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>

#include "stylo/stylo.hpp"

namespace fs = std::filesystem;
using namespace stylo;

namespace {

const fs::path kData = STYLO_TEST_DATA;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(STYLO_CLI) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("stylo_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& name) const { return (dir_ / name).string(); }
  nlohmann::json json_at(const std::string& name) const { return nlohmann::json::parse(read_file(dir_ / name)); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, StatsMatchGolden) {
  ASSERT_EQ(run_cli("stats --in " + (kData / "mini.conllu").string() + " --out " + out("s")), 0);
  EXPECT_EQ(read_file(dir_ / "s/stats.csv"), read_file(kData / "mini_stats.golden.csv"));
  const auto manifest = json_at("s/run_manifest.json");
  EXPECT_EQ(manifest["command"], "stats");
  EXPECT_EQ(manifest["outputs"], (nlohmann::json{"stats.csv"}));
  EXPECT_EQ(manifest["inputs"].size(), 1u);
  EXPECT_FALSE(fs::exists(dir_ / "s/error.json"));
}

TEST_F(Cli, PreprocessMatchesGolden) {
  ASSERT_EQ(run_cli("preprocess --in " + (kData / "raw_manifest.jsonl").string() + " --out " + out("p")), 0);
  EXPECT_EQ(read_file(dir_ / "p/rejections.csv"), read_file(kData / "rejections.golden.csv"));
  const auto accepted = parse_manifest(read_file(dir_ / "p/manifest.jsonl"), true);
  ASSERT_EQ(accepted.size(), 3u);
  EXPECT_EQ(accepted[0].id, "valid_long");
}

TEST_F(Cli, EmptyManifestIsNotAnError) {
  write_file_atomic(dir_ / "empty.jsonl", "");
  ASSERT_EQ(run_cli("preprocess --in " + out("empty.jsonl") + " --out " + out("p")), 0);
  EXPECT_EQ(read_file(dir_ / "p/rejections.csv"), "id,reason\n");
  EXPECT_EQ(read_file(dir_ / "p/manifest.jsonl"), "");
}

TEST_F(Cli, ValidationFailuresExitTwoWithErrorFile) {
  write_file_atomic(dir_ / "bad.jsonl", "{\"id\": \"x\", \"term\": \"t\"}\n");
  EXPECT_EQ(run_cli("preprocess --in " + out("bad.jsonl") + " --out " + out("e1")), 2);
  const auto err = json_at("e1/error.json");
  EXPECT_EQ(err["command"], "preprocess");
  EXPECT_EQ(err["code"], "BadManifest");
  EXPECT_FALSE(fs::exists(dir_ / "e1/run_manifest.json"));

  write_file_atomic(dir_ / "bad.toml", "kind = \n");
  EXPECT_EQ(run_cli("evaluate --config " + out("bad.toml") + " --out " + out("e2")), 2);
  EXPECT_EQ(json_at("e2/error.json")["code"], "BadConfig");

  EXPECT_EQ(run_cli("stats --in " + out("missing.conllu") + " --out " + out("e3")), 2);
  EXPECT_EQ(json_at("e3/error.json")["code"], "IoError");

  EXPECT_EQ(run_cli("stats"), 2);  // missing --in
  EXPECT_EQ(run_cli("no-such-command"), 2);
}

TEST_F(Cli, InternalFailuresExitThree) {
  // An output path below a regular file cannot be created.
  write_file_atomic(dir_ / "file", "x");
  EXPECT_EQ(run_cli("stats --in " + (kData / "mini.conllu").string() + " --out " + out("file/sub")), 3);
}

TEST_F(Cli, FeaturizeTrainExplainChain) {
  const auto corpus = (kData / "eval_small.conllu").string();
  write_file_atomic(dir_ / "cfg.toml",
                    "seed = 4\n[features]\nsize_limit = 50\n[model]\nn_iterations = 10\nmin_data_in_leaf = 5\n");
  const std::string cfg = " --config " + out("cfg.toml");
  ASSERT_EQ(run_cli("featurize --in " + corpus + cfg + " --out " + out("f")), 0);
  const auto matrix = parse_matrix_csv(read_file(dir_ / "f/matrix.csv"));
  EXPECT_EQ(matrix.feature_names.size(), 50u);
  EXPECT_EQ(matrix.ids.size(), load_annotated_corpus(corpus).size());

  ASSERT_EQ(run_cli("train --matrix " + out("f/matrix.csv") + " --vocabulary " + out("f/vocabulary.json") + cfg +
                    " --out " + out("t")),
            0);
  EXPECT_EQ(json_at("t/run_manifest.json")["seed"], 4);
  const auto model = load_model(dir_ / "t/model.json");
  EXPECT_EQ(model.classes, (std::vector<std::string>{"human", "machine"}));

  ASSERT_EQ(run_cli("explain --model " + out("t/model.json") + " --vocabulary " + out("f/vocabulary.json") + " --in " +
                    corpus + " --top 3 --out " + out("x")),
            0);
  const auto explanations = json_at("x/explanations.json");
  ASSERT_EQ(explanations.size(), matrix.ids.size());
  // SHAP values plus the base reproduce the model margin.
  const auto vocab = vocabulary_from_json(json_at("f/vocabulary.json"));
  const auto docs = load_annotated_corpus(corpus);
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const auto margin = predict_margin(model, vectorize(docs[i], vocab));
    const auto& e = explanations[i];
    double sum = e["base"][0].get<double>();
    for (const auto& [name, v] : e["values"].items()) sum += v[0].get<double>();
    EXPECT_NEAR(sum, margin[0], 1e-6);
  }
  for (const auto& r : json_at("x/spans.json")) EXPECT_LE(r["spans"].size() + r["absent"].size(), 200u);
  EXPECT_EQ(read_file(dir_ / "x/ranking.csv").substr(0, 28), "feature,class,mean_abs_shap\n");
  EXPECT_NE(read_file(dir_ / "x/spans.html").find("<mark"), std::string::npos);
  for (const char* svg : {"shap_summary_by_class.svg", "shap_summary_by_value.svg", "ranking.svg"}) {
    EXPECT_EQ(read_file(dir_ / "x" / svg).rfind("<svg", 0), 0u) << svg;
  }

  // A model trained with another vocabulary is refused.
  write_file_atomic(dir_ / "cfg2.toml", "[features]\nsize_limit = 40\n");
  ASSERT_EQ(run_cli("featurize --in " + corpus + " --config " + out("cfg2.toml") + " --out " + out("f2")), 0);
  EXPECT_EQ(run_cli("explain --model " + out("t/model.json") + " --vocabulary " + out("f2/vocabulary.json") + " --in " +
                    corpus + " --out " + out("x2")),
            2);
  EXPECT_EQ(json_at("x2/error.json")["code"], "VocabularyMismatch");
}

TEST_F(Cli, SingleLeafModelExplainsToZeros) {
  const auto corpus = (kData / "eval_small.conllu").string();
  write_file_atomic(dir_ / "cfg.toml", "[features]\nsize_limit = 20\n");
  ASSERT_EQ(run_cli("featurize --in " + corpus + " --config " + out("cfg.toml") + " --out " + out("f")), 0);
  const auto vocab = vocabulary_from_json(json_at("f/vocabulary.json"));
  TreeEnsemble m;
  m.num_features = vocab.size();
  m.base_score = {0.0};
  m.classes = {"human", "machine"};
  m.vocabulary_fingerprint = vocab.fingerprint();
  Tree t;
  t.nodes.emplace_back();
  t.nodes[0].cover = 1.0;
  t.nodes[0].value = {0.75};
  m.trees = {t};
  m.tree_weights = {1.0};
  save_model(m, dir_ / "leaf.json");
  ASSERT_EQ(run_cli("explain --model " + out("leaf.json") + " --vocabulary " + out("f/vocabulary.json") + " --in " +
                    corpus + " --out " + out("x")),
            0);
  for (const auto& e : json_at("x/explanations.json")) {
    EXPECT_EQ(e["base"][0], 0.75);
    EXPECT_TRUE(e["values"].empty());
  }
  for (const auto& r : json_at("x/spans.json")) EXPECT_TRUE(r["spans"].empty());
}

TEST_F(Cli, EvaluateMatchesGoldenAndIsReproducible) {
  const auto config = (kData / "eval_small.toml").string();
  ASSERT_EQ(run_cli("evaluate --config " + config + " --out " + out("a")), 0);
  ASSERT_EQ(run_cli("evaluate --config " + config + " --jobs 3 --out " + out("b")), 0);
  for (const char* name : {"metrics.csv", "confusion.csv", "confusion_normalized.csv", "shap_ranking.csv"}) {
    EXPECT_EQ(read_file(dir_ / "a" / name), read_file(dir_ / "b" / name)) << name;
  }
  EXPECT_EQ(read_file(dir_ / "a/metrics.csv"), read_file(kData / "eval_small_metrics.golden.csv"));
  const auto metrics = json_at("a/metrics.json");
  EXPECT_EQ(metrics["kind"], "binary");
  EXPECT_EQ(metrics["cv"]["k"], 4);
  EXPECT_TRUE(fs::exists(dir_ / "a/models/fold_00/model.json"));

  // The saved fold models evaluate an external set without retraining.
  write_file_atomic(dir_ / "ext.toml", "kind = \"external\"\ncorpus = \"" + (kData / "eval_small.conllu").string() +
                                           "\"\n[external]\nmodel_dir = \"" + out("a/models") + "\"\n");
  ASSERT_EQ(run_cli("evaluate --config " + out("ext.toml") + " --out " + out("ext")), 0);
  const auto ext = json_at("ext/metrics.json");
  EXPECT_EQ(ext["kind"], "external");
  EXPECT_EQ(ext["per_model"].size(), 4u);
  EXPECT_FALSE(ext["single_class"].get<bool>());

  // --seed overrides the config.
  ASSERT_EQ(run_cli("evaluate --config " + config + " --seed 77 --out " + out("c")), 0);
  EXPECT_EQ(json_at("c/metrics.json")["seed"], 77);
}
