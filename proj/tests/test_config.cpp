#include <gtest/gtest.h>

#include "stylo/config.hpp"

using namespace stylo;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadConfig);
    return e.what();
  }
  ADD_FAILURE() << "parsed: " << text;
  return {};
}

}  // namespace

TEST(ConfigParser, ScalarsTablesAndComments) {
  const auto j = parse_config(R"(# experiment
kind = "multiclass"   # trailing comment
seed = 1_000
ratio = 0.25
neg = -3
big = 1e3
flag = true
path = 'C:\raw\dir'
esc = "a\"b # not a comment"

[model]
type = "gbdt"
[model.dart]
enabled = false
[multiclass]
classes = ["human", "gpt4", ]
empty = []
mixed = [1, 2.5]
)");
  EXPECT_EQ(j["kind"], "multiclass");
  EXPECT_EQ(j["seed"], 1000);
  EXPECT_TRUE(j["seed"].is_number_integer());
  EXPECT_EQ(j["ratio"], 0.25);
  EXPECT_EQ(j["neg"], -3);
  EXPECT_TRUE(j["big"].is_number_float());
  EXPECT_EQ(j["big"], 1000.0);
  EXPECT_EQ(j["flag"], true);
  EXPECT_EQ(j["path"], "C:\\raw\\dir");
  EXPECT_EQ(j["esc"], "a\"b # not a comment");
  EXPECT_EQ(j["model"]["type"], "gbdt");
  EXPECT_EQ(j["model"]["dart"]["enabled"], false);
  EXPECT_EQ(j["multiclass"]["classes"], (nlohmann::json{"human", "gpt4"}));
  EXPECT_TRUE(j["multiclass"]["empty"].empty());
  EXPECT_EQ(j["multiclass"]["mixed"][1], 2.5);
}

TEST(ConfigParser, DottedKeysAndCrlf) {
  const auto j = parse_config("[model]\r\ndart.drop_rate = 0.2\r\ncart.max_depth = 4\r\n");
  EXPECT_EQ(j["model"]["dart"]["drop_rate"], 0.2);
  EXPECT_EQ(j["model"]["cart"]["max_depth"], 4);
}

TEST(ConfigParser, ErrorsNameTheLine) {
  EXPECT_NE(config_error("a = 1\nb = \n").find("line 2"), std::string::npos);
  EXPECT_NE(config_error("a = 1\na = 2\n").find("duplicate"), std::string::npos);
  EXPECT_NE(config_error("\n\n[open\n").find("line 3"), std::string::npos);
  EXPECT_NE(config_error("s = \"never closed\n").find("unterminated"), std::string::npos);
  EXPECT_NE(config_error("x = 12abc\n").find("12abc"), std::string::npos);
  EXPECT_NE(config_error("x = 1 2\n").find("trailing"), std::string::npos);
  EXPECT_NE(config_error("a = 1\n[a]\n").find("not a table"), std::string::npos);
  config_error("= 3\n");
  config_error("arr = [1, 2\n");
}

TEST(ConfigGet, DefaultsAndTypeErrors) {
  const auto j = parse_config("top = 2\n[s]\nn = 5\nx = 0.5\nb = true\nname = \"v\"\nneg = -1\n");
  EXPECT_EQ(config_get<std::size_t>(j, "s", "n", 0), 5u);
  EXPECT_EQ(config_get<std::size_t>(j, "s", "missing", 9), 9u);
  EXPECT_EQ(config_get<std::size_t>(j, "nosection", "n", 7), 7u);
  EXPECT_EQ(config_get<int>(j, "", "top", 0), 2);
  // integers are accepted where a float is expected
  EXPECT_EQ(config_get<double>(j, "s", "n", 0.0), 5.0);
  EXPECT_EQ(config_get<std::string>(j, "s", "name", ""), "v");
  EXPECT_THROW(config_get<std::size_t>(j, "s", "x", 0), Error);
  EXPECT_THROW(config_get<std::size_t>(j, "s", "neg", 0), Error);
  EXPECT_THROW(config_get<bool>(j, "s", "n", false), Error);
  EXPECT_THROW(config_get<std::string>(j, "s", "b", ""), Error);
  try {
    config_get<double>(j, "s", "name", 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadConfig);
    EXPECT_NE(std::string(e.what()).find("s.name"), std::string::npos);
  }
}

TEST(ExperimentConfig, BinaryWithRelativePaths) {
  const auto j = parse_config(R"(
kind = "binary"
corpus = "data/corpus.conllu"
folds = 5
seed = 11
jobs = 2
explain = true
[binary]
class_a = "human"
class_b = "gpt4"
[features]
size_limit = 500
selection = "document_frequency"
binary_drop_space = false
[model]
type = "cart"
[model.cart]
max_depth = 3
[output]
dir = "/abs/out"
save_models = true
)");
  const auto c = experiment_config_from(j, "/base");
  EXPECT_EQ(c.kind, ExperimentKind::Binary);
  EXPECT_EQ(c.corpus, std::filesystem::path("/base/data/corpus.conllu"));
  EXPECT_EQ(c.out_dir, std::filesystem::path("/abs/out"));
  EXPECT_EQ(c.class_a, "human");
  EXPECT_EQ(c.class_b, "gpt4");
  EXPECT_EQ(c.settings.folds, 5u);
  EXPECT_EQ(c.settings.seed, 11u);
  EXPECT_EQ(c.settings.jobs, 2u);
  EXPECT_TRUE(c.settings.explain);
  EXPECT_TRUE(c.settings.keep_models);
  EXPECT_FALSE(c.settings.binary_drop_space);
  EXPECT_EQ(c.settings.features.size_limit, 500u);
  EXPECT_EQ(c.settings.features.selection, SelectionMetric::DocumentFrequency);
  EXPECT_EQ(c.settings.model.type, ModelType::Cart);
  EXPECT_EQ(c.settings.model.cart.max_depth, 3u);
}

TEST(ExperimentConfig, DefaultsMatchTheReferenceSetup) {
  const auto c = experiment_config_from(parse_config("kind = \"multiclass\"\ncorpus = \"c.conllu\"\n"), "");
  const auto& b = c.settings.model.boost;
  EXPECT_EQ(c.settings.folds, 10u);
  EXPECT_EQ(c.max_sentences, 18u);
  EXPECT_EQ(c.settings.features.size_limit, 3000u);
  EXPECT_EQ(b.max_depth, 5u);
  EXPECT_EQ(b.num_leaves, 5u);
  EXPECT_EQ(b.learning_rate, 0.5);
  EXPECT_EQ(b.n_iterations, 100u);
  EXPECT_EQ(b.bagging_freq, 3u);
  EXPECT_EQ(b.bagging_fraction, 0.8);
  EXPECT_TRUE(b.dart.enabled);
  EXPECT_TRUE(c.classes.empty());
}

TEST(ExperimentConfig, RequiredFieldsAndBadValues) {
  auto code = [](const std::string& text) {
    try {
      experiment_config_from(parse_config(text), "");
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::IoError;
  };
  EXPECT_EQ(code("kind = \"binary\"\n"), ErrorCode::BadConfig);
  EXPECT_EQ(code("corpus = \"c\"\n[binary]\nclass_a = \"h\"\n"), ErrorCode::BadConfig);
  EXPECT_EQ(code("kind = \"logo\"\ncorpus = \"c\"\n[logo]\nheld_out = \"x\"\n"), ErrorCode::BadConfig);
  EXPECT_EQ(code("kind = \"external\"\ncorpus = \"c\"\n"), ErrorCode::BadConfig);
  EXPECT_EQ(code("kind = \"sideways\"\ncorpus = \"c\"\n"), ErrorCode::BadConfig);
  EXPECT_EQ(code("kind = \"multiclass\"\ncorpus = \"c\"\n[model]\ntype = \"forest\"\n"), ErrorCode::BadConfig);
  EXPECT_EQ(code("kind = \"multiclass\"\ncorpus = \"c\"\n[model]\nlearning_rate = 0\n"), ErrorCode::BadConfig);
  EXPECT_EQ(code("kind = \"multiclass\"\ncorpus = \"c\"\n[features]\nselection = \"tfidf\"\n"), ErrorCode::BadConfig);
  EXPECT_EQ(code("kind = \"multiclass\"\ncorpus = \"c\"\nfolds = \"ten\"\n"), ErrorCode::BadConfig);
}

TEST(ExperimentConfig, ClassListsFollowTheKind) {
  const auto pw = experiment_config_from(
      parse_config("kind = \"pairwise\"\ncorpus = \"c\"\n[pairwise]\nclasses = [\"a\", \"b\"]\n"), "");
  EXPECT_EQ(pw.classes, (std::vector<std::string>{"a", "b"}));
  const auto ext = experiment_config_from(
      parse_config("kind = \"external\"\ncorpus = \"c\"\n[external]\nmodel_dir = \"m\"\nas_class = \"gpt4\"\n"), "/x");
  EXPECT_EQ(ext.model_dir, std::filesystem::path("/x/m"));
  EXPECT_EQ(ext.as_class, std::optional<std::string>("gpt4"));
}
