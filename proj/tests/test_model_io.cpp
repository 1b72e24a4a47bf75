#include <doctest.h>

#include <bit>

#include "amr/model_io.hpp"
#include "amr/models.hpp"
#include "test_util.hpp"

using namespace amr;
using amr::test::TempDir;
using amr::test::throws_code;

namespace {

struct Fixture {
  PreparedData data;
  std::vector<TrainedModel> models;

  Fixture() {
    SynthConfig sc;
    sc.n_countries = 12;
    sc.pairs_per_country = 4;
    data = prepare_features(synthesize_dataset(sc, 3), PipelineConfig{});
    GbtSpec g;
    g.n_estimators = 15;
    g.subsample_ratio = 0.8;
    LstmSpec l;
    l.hidden_size = 6;
    l.max_epochs = 4;
    models.push_back(train_naive(data.train.X));
    models.push_back(train_linear(data.train.X));
    models.push_back(train_ridge(data.train.X, RidgeSpec{}));
    models.push_back(train_gbt(data.train.X, g, SplitMode::Exact));
    models.push_back(train_gbt(data.train.X, g, SplitMode::Histogram));
    models.push_back(train_lstm(data.train.X, data.val.X, l));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("every model kind survives a save/load round trip bit for bit") {
  const auto& f = fixture();
  TempDir dir;
  REQUIRE(f.models.size() == kModelKindCount);
  for (std::size_t i = 0; i < kModelKindCount; ++i) {
    const auto& m = f.models[i];
    CAPTURE(model_tag(m.kind()));
    CHECK(m.kind() == kAllModelKinds[i]);
    const auto path = dir.str(std::string(model_tag(m.kind())) + ".amrm");
    save_model(m, path);
    const auto back = load_model(path);
    CHECK(back.kind() == m.kind());
    CHECK(back.n_features() == m.n_features());
    CHECK(bit_equal(back.predict(f.data.test.X), m.predict(f.data.test.X)));
    CHECK(serialize_model(back) == serialize_model(m));
    CHECK(back.meta().hyperparameters == m.meta().hyperparameters);
    CHECK(back.meta().epochs_run == m.meta().epochs_run);
    CHECK(bit_equal(back.meta().val_mae_trace, m.meta().val_mae_trace));
    CHECK(back.feature_importances().has_value() == m.feature_importances().has_value());
    if (m.feature_importances()) CHECK(bit_equal(*back.feature_importances(), *m.feature_importances()));
  }
}

TEST_CASE("artifact header") {
  const auto bytes = serialize_model(fixture().models[0]);
  CHECK(bytes.substr(0, 8) == "AMRMODEL");
  CHECK(static_cast<unsigned char>(bytes[8]) == 1);
  CHECK(static_cast<unsigned char>(bytes[12]) == 0);
}

TEST_CASE("corrupted artifacts are rejected") {
  const auto& f = fixture();
  for (const auto& m : f.models) {
    CAPTURE(model_tag(m.kind()));
    const auto bytes = serialize_model(m);

    SUBCASE("flipped byte") {
      for (std::size_t pos : {std::size_t{3}, std::size_t{9}, bytes.size() / 2, bytes.size() - 9, bytes.size() - 1}) {
        auto bad = bytes;
        bad[pos] = static_cast<char>(bad[pos] ^ 0x40);
        CHECK(throws_code([&] { deserialize_model(bad); }, ErrorCode::CorruptModel));
      }
    }
    SUBCASE("truncated") {
      for (std::size_t len : {std::size_t{0}, std::size_t{5}, std::size_t{16}, bytes.size() / 2, bytes.size() - 1})
        CHECK(throws_code([&] { deserialize_model(std::string_view(bytes).substr(0, len)); }, ErrorCode::CorruptModel));
    }
    SUBCASE("trailing garbage") {
      CHECK(throws_code([&] { deserialize_model(bytes + "x"); }, ErrorCode::CorruptModel));
    }
  }
}

TEST_CASE("missing artifact file") {
  TempDir dir;
  CHECK(throws_code([&] { load_model(dir.str("nope.amrm")); }, ErrorCode::ArtifactMissing));
}

TEST_CASE("model tags round trip") {
  for (auto k : kAllModelKinds) {
    CHECK(parse_model_tag(model_tag(k)) == k);
    CHECK_FALSE(model_display_name(k).empty());
  }
  CHECK_FALSE(parse_model_tag("xgboost").has_value());
}

TEST_CASE("predict rejects a matrix with the wrong width") {
  const auto& f = fixture();
  for (const auto& m : f.models)
    CHECK(throws_code([&] { m.predict(FeatureMatrix(2, kFeatureCount + 1)); }, ErrorCode::ColumnMismatch));
}
