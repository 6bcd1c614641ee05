#include "deepida/config.hpp"
#include "deepida/error.hpp"

#include <doctest.h>

using namespace deepida;
using namespace deepida::config;

namespace {

ErrorKind kind_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::InvalidInput;
}

}  // namespace

TEST_CASE("empty document gives the defaults") {
  const RunConfig c = parse_config("{}");
  const RunConfig d;
  CHECK(c.seed == d.seed);
  CHECK(c.train.epochs == 50);
  CHECK(c.train.batch_size == 0);
  CHECK(c.train.adam.learning_rate == 1e-3);
  CHECK(c.train.ida.rho == 0.5);
  CHECK(c.train.ida.l == 0);
  CHECK(c.networks.size() == 1);
  CHECK(c.networks[0] == trainer::NetworkShape{});
  CHECK(c.ranking.pairs == 50);
  CHECK_FALSE(c.retrain_top.has_value());
}

TEST_CASE("values are read and the seed is shared") {
  const RunConfig c = parse_config(R"({
    "seed": 17,
    "train": {"epochs": 3, "batch_size": 32, "learning_rate": 0.01, "validation": "best_epoch"},
    "ida": {"rho": 0.25, "l": 2, "centering": "class_mean_average"},
    "network": [{"hidden": [8, 4], "output": 3}, {"hidden": [], "output": 3, "batch_norm": false}],
    "ranking": {"pairs": 7, "feature_fraction": 0.5, "retrain_top": "10%"},
    "data": {"train": {"views": ["a.csv", "b.csv"], "labels": "y.csv"}}
  })");
  CHECK(c.seed == 17);
  CHECK(c.train.seed == 17);
  CHECK(c.ranking.seed == 17);
  CHECK(c.train.epochs == 3);
  CHECK(c.train.batch_size == 32);
  CHECK(c.train.validation == trainer::Validation::BestEpoch);
  CHECK(c.train.ida.rho == 0.25);
  CHECK(c.train.ida.l == 2);
  CHECK(c.train.ida.centering == linalg::Centering::ClassMeanAverage);
  REQUIRE(c.networks.size() == 2);
  CHECK(c.networks[0].hidden == std::vector<Eigen::Index>{8, 4});
  CHECK(c.networks[1].hidden.empty());
  CHECK_FALSE(c.networks[1].batch_norm);
  CHECK(c.ranking.pairs == 7);
  REQUIRE(c.retrain_top.has_value());
  CHECK(c.retrain_top->kind == ranking::Selection::Kind::Percent);
  CHECK(c.train_data.views == std::vector<std::string>{"a.csv", "b.csv"});
  CHECK(c.train_data.labels == "y.csv");
  CHECK(c.valid_data.empty());
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK(kind_of(R"({"sed": 1})") == ErrorKind::InvalidConfig);
  CHECK(kind_of(R"({"train": {"epoch": 1}})") == ErrorKind::InvalidConfig);
  CHECK(kind_of(R"({"ida": {"rho": "high"}})") == ErrorKind::InvalidConfig);
  CHECK(kind_of(R"({"ida": {"centering": "median"}})") == ErrorKind::InvalidConfig);
  CHECK(kind_of(R"({"network": []})") == ErrorKind::InvalidConfig);
  CHECK(kind_of(R"({"data": {"train": {"view": []}}})") == ErrorKind::InvalidConfig);
  CHECK(kind_of(R"({"seed": -1})") == ErrorKind::InvalidConfig);
  CHECK(kind_of(R"({"ranking": {"retrain_top": "x%"}})") == ErrorKind::InvalidSelection);
  CHECK(kind_of(R"({"seed": )") == ErrorKind::ParseError);
  CHECK(kind_of("[1, 2]") == ErrorKind::InvalidConfig);
}

TEST_CASE("effective config round-trips and omits the worker count") {
  RunConfig c = parse_config(R"({"seed": 5, "ida": {"rho": 1.0}, "ranking": {"retrain_top": 20}})");
  const std::string text = effective_config(c);
  CHECK(text.find("workers") == std::string::npos);
  const RunConfig back = parse_config(text);
  CHECK(effective_config(back) == text);
  c.ranking.workers = 8;
  CHECK(effective_config(c) == text);
}

TEST_CASE("validate enforces ranges") {
  RunConfig c;
  c.train.ida.rho = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c.train.ida.rho = 0.0;
  c.validate();
  c.train.ida.rho = 1.0;
  c.validate();
  c.networks.clear();
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("selection parsing") {
  const ranking::Selection count = parse_selection("20");
  CHECK(count.kind == ranking::Selection::Kind::Count);
  CHECK(count.value == 20);
  CHECK(count.resolve(100) == 20);
  const ranking::Selection pct = parse_selection("10%");
  CHECK(pct.kind == ranking::Selection::Kind::Percent);
  CHECK(pct.resolve(100) == 10);
  CHECK(pct.resolve(55) == 6);
  CHECK(format_selection(count) == "20");
  CHECK(format_selection(pct) == "10%");
  CHECK(format_selection(parse_selection("2.5%")) == "2.5%");
  for (const char* bad : {"", "%", "abc", "1.5", "-3", "0", "10%%", "5x"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_selection(bad), Error);
  }
}
