#include "amr/report.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "amr/binary_io.hpp"
#include "amr/error.hpp"

namespace amr {

using nlohmann::ordered_json;

const ModelRow* EvalReport::row(ModelKind k) const noexcept {
  for (const auto& m : models)
    if (m.kind == k) return &m;
  return nullptr;
}

EvalReport build_report(const std::vector<TrainedModel>& models, const PreparedData& data) {
  std::map<ModelKind, const TrainedModel*> by_kind;
  for (const auto& m : models) by_kind[m.kind()] = &m;
  for (auto k : kAllModelKinds) {
    if (!by_kind.contains(k)) {
      throw Error(ErrorCode::MissingModel, "no trained " + std::string(model_tag(k)) + " model");
    }
  }

  EvalReport r;
  r.split = data.split;
  r.n_train = data.train.X.rows();
  r.n_val = data.val.X.rows();
  r.n_test = data.test.X.rows();
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) r.generated_at = epoch;

  const auto y_test = data.test.X.target();
  std::map<ModelKind, std::vector<double>> test_pred;
  for (auto k : kAllModelKinds) {
    const auto& m = *by_kind[k];
    ModelRow row;
    row.kind = k;
    row.val_mae = mae(data.val.X.target(), m.predict(data.val.X));
    auto pred = m.predict(data.test.X);
    row.mae = mae(y_test, pred);
    row.rmse = rmse(y_test, pred);
    row.r2 = r2(y_test, pred);
    row.hyperparameters = m.meta().hyperparameters;
    r.regional_by_model[k] = regional_mae(y_test, pred, data.test.regions);
    test_pred[k] = std::move(pred);
    r.models.push_back(std::move(row));
  }

  const double naive_mae = r.row(ModelKind::Naive)->mae;
  for (auto& row : r.models) {
    if (naive_mae > 0.0) row.improvement_vs_naive_pct = round1(improvement_vs_naive(row.mae, naive_mae));
  }

  for (const auto& row : r.models)
    if (row.mae < r.row(r.best_model)->mae) r.best_model = row.kind;
  r.regional = r.regional_by_model[r.best_model];

  r.importance_model = r.row(ModelKind::GBTHistogram)->mae < r.row(ModelKind::GBTExact)->mae
                           ? ModelKind::GBTHistogram
                           : ModelKind::GBTExact;
  r.importance = feature_importance(*by_kind[r.importance_model]);

  const auto& best_pred = test_pred[r.best_model];
  r.residuals.reserve(best_pred.size());
  for (std::size_t i = 0; i < best_pred.size(); ++i) {
    r.residuals.push_back({i, data.test.regions[i], y_test[i], best_pred[i], y_test[i] - best_pred[i]});
  }
  return r;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ordered_json years_json(const std::set<int>& ys) { return ordered_json(std::vector<int>(ys.begin(), ys.end())); }

std::set<int> years_from(const ordered_json& j) {
  auto v = j.get<std::vector<int>>();
  return {v.begin(), v.end()};
}

ordered_json regional_json(const RegionalTable& t) {
  ordered_json arr = ordered_json::array();
  for (const auto& e : t.entries) {
    arr.push_back({{"region", std::string(region_name(e.region))}, {"mae", e.mae}, {"n", e.n}});
  }
  return arr;
}

ordered_json excluded_json(const RegionalTable& t) {
  ordered_json arr = ordered_json::array();
  for (auto reg : t.excluded) arr.push_back(std::string(region_name(reg)));
  return arr;
}

WhoRegion region_from(const ordered_json& j) {
  auto r = parse_region(j.get<std::string>());
  if (!r) throw Error(ErrorCode::IncompleteReport, "unknown region in report: " + j.dump());
  return *r;
}

RegionalTable regional_from(const ordered_json& entries, const ordered_json& excluded) {
  RegionalTable t;
  for (const auto& e : entries)
    t.entries.push_back({region_from(e.at("region")), e.at("mae").get<double>(), e.at("n").get<std::size_t>()});
  for (const auto& x : excluded) t.excluded.push_back(region_from(x));
  return t;
}

ModelKind kind_from(const ordered_json& j) {
  auto k = parse_model_tag(j.get<std::string>());
  if (!k) throw Error(ErrorCode::IncompleteReport, "unknown model tag in report: " + j.dump());
  return *k;
}

}  // namespace

std::string render_report(const EvalReport& r) {
  std::ostringstream os;
  os << "AMR forecasting benchmark (report v" << r.report_version << ")\n";
  os << "rows: train " << r.n_train << ", validation " << r.n_val << ", test " << r.n_test << "\n\n";
  os << "Model performance on the held-out test partition\n";
  for (const auto& m : r.models) {
    os << "  " << model_display_name(m.kind) << (m.kind == r.best_model ? " (best)" : "") << "\n";
    os << "    test MAE " << fixed(m.mae, 2) << "  RMSE " << fixed(m.rmse, 2) << "  R2 "
       << (m.r2 ? fixed(*m.r2, 3) : std::string("n/a")) << "  (validation MAE "
       << fixed(m.val_mae, 2) << ")\n";
    os << "    improvement vs naive: "
       << (m.improvement_vs_naive_pct ? fixed(*m.improvement_vs_naive_pct, 1) + "%" : std::string("n/a"))
       << (m.kind == ModelKind::Naive ? " (reference)" : "") << "\n";
  }
  os << "\nGain importance (" << model_display_name(r.importance_model) << ")\n";
  for (std::size_t i = 0; i < r.importance.size(); ++i) {
    os << "  " << (i + 1) << ". " << r.importance[i].display_name << ": "
       << fixed(100.0 * r.importance[i].importance, 1) << "%\n";
  }
  os << "\nTest MAE by WHO region (" << model_display_name(r.best_model) << ")\n";
  for (const auto& e : r.regional.entries) {
    os << "  " << region_name(e.region) << ": " << fixed(e.mae, 2) << " (n=" << e.n << ")\n";
  }
  for (auto reg : r.regional.excluded) os << "  " << region_name(reg) << ": excluded, no test observations\n";
  return os.str();
}

std::string report_to_json(const EvalReport& r) {
  ordered_json j;
  j["report_version"] = r.report_version;
  j["best_model"] = std::string(model_tag(r.best_model));
  ordered_json models = ordered_json::array();
  for (const auto& m : r.models) {
    ordered_json row;
    row["kind"] = std::string(model_tag(m.kind));
    row["name"] = std::string(model_display_name(m.kind));
    row["val_mae"] = m.val_mae;
    row["mae"] = m.mae;
    row["rmse"] = m.rmse;
    row["r2"] = m.r2 ? ordered_json(*m.r2) : ordered_json(nullptr);
    row["improvement_vs_naive_pct"] =
        m.improvement_vs_naive_pct ? ordered_json(*m.improvement_vs_naive_pct) : ordered_json(nullptr);
    ordered_json hp = ordered_json::object();
    for (const auto& [k, v] : m.hyperparameters) hp[k] = v;
    row["hyperparameters"] = hp;
    models.push_back(std::move(row));
  }
  j["models"] = std::move(models);
  j["regional"] = regional_json(r.regional);
  j["excluded_regions"] = excluded_json(r.regional);
  ordered_json by_model = ordered_json::object();
  for (const auto& [k, t] : r.regional_by_model) {
    by_model[std::string(model_tag(k))] = {{"regional", regional_json(t)}, {"excluded_regions", excluded_json(t)}};
  }
  j["regional_by_model"] = std::move(by_model);
  j["importance_model"] = std::string(model_tag(r.importance_model));
  ordered_json imp = ordered_json::array();
  for (const auto& e : r.importance) {
    imp.push_back({{"feature", e.feature}, {"label", e.display_name}, {"column", e.column}, {"importance", e.importance}});
  }
  j["importance"] = std::move(imp);
  j["split"] = {{"train_years", years_json(r.split.train_years)},
                {"val_years", years_json(r.split.val_years)},
                {"test_years", years_json(r.split.test_years)}};
  j["rows"] = {{"train", r.n_train}, {"val", r.n_val}, {"test", r.n_test}};
  j["timestamps"] = {{"generated_at", r.generated_at ? ordered_json(*r.generated_at) : ordered_json(nullptr)}};
  return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    auto j = ordered_json::parse(text);
    EvalReport r;
    r.report_version = j.at("report_version").get<int>();
    if (r.report_version != kReportVersion) {
      throw Error(ErrorCode::IncompleteReport, "unsupported report_version " + std::to_string(r.report_version));
    }
    r.best_model = kind_from(j.at("best_model"));
    for (const auto& row : j.at("models")) {
      ModelRow m;
      m.kind = kind_from(row.at("kind"));
      m.val_mae = row.at("val_mae").get<double>();
      m.mae = row.at("mae").get<double>();
      m.rmse = row.at("rmse").get<double>();
      if (!row.at("r2").is_null()) m.r2 = row.at("r2").get<double>();
      if (!row.at("improvement_vs_naive_pct").is_null())
        m.improvement_vs_naive_pct = row.at("improvement_vs_naive_pct").get<double>();
      for (const auto& [k, v] : row.at("hyperparameters").items()) m.hyperparameters[k] = v.get<double>();
      r.models.push_back(std::move(m));
    }
    r.regional = regional_from(j.at("regional"), j.at("excluded_regions"));
    for (const auto& [k, v] : j.at("regional_by_model").items()) {
      auto kind = parse_model_tag(k);
      if (!kind) throw Error(ErrorCode::IncompleteReport, "unknown model tag " + k);
      r.regional_by_model[*kind] = regional_from(v.at("regional"), v.at("excluded_regions"));
    }
    r.importance_model = kind_from(j.at("importance_model"));
    for (const auto& e : j.at("importance")) {
      r.importance.push_back({e.at("column").get<std::size_t>(), e.at("feature").get<std::string>(),
                              e.at("label").get<std::string>(), e.at("importance").get<double>()});
    }
    const auto& s = j.at("split");
    r.split.train_years = years_from(s.at("train_years"));
    r.split.val_years = years_from(s.at("val_years"));
    r.split.test_years = years_from(s.at("test_years"));
    const auto& rows = j.at("rows");
    r.n_train = rows.at("train").get<std::size_t>();
    r.n_val = rows.at("val").get<std::size_t>();
    r.n_test = rows.at("test").get<std::size_t>();
    const auto& ts = j.at("timestamps").at("generated_at");
    if (!ts.is_null()) r.generated_at = ts.get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IncompleteReport, std::string("malformed report JSON: ") + e.what());
  }
}

void emit_figure_data(const EvalReport& r, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);

  std::string cmp = "model,kind,val_mae,test_mae,test_rmse,test_r2,improvement_vs_naive_pct,is_best\n";
  for (const auto& m : r.models) {
    cmp += std::string(model_display_name(m.kind)) + "," + std::string(model_tag(m.kind)) + "," +
           exact(m.val_mae) + "," + exact(m.mae) + "," + exact(m.rmse) + "," +
           (m.r2 ? exact(*m.r2) : "") + "," +
           (m.improvement_vs_naive_pct ? fixed(*m.improvement_vs_naive_pct, 1) : "") + "," +
           (m.kind == r.best_model ? "1" : "0") + "\n";
  }
  write_file((base / "model_comparison.csv").string(), cmp);

  std::string imp = "rank,feature,label,importance\n";
  for (std::size_t i = 0; i < r.importance.size(); ++i) {
    const auto& e = r.importance[i];
    imp += std::to_string(i + 1) + "," + e.feature + "," + e.display_name + "," + exact(e.importance) + "\n";
  }
  write_file((base / "feature_importance.csv").string(), imp);

  std::string reg = "model,region,mae,n,excluded,is_best\n";
  for (const auto& [k, t] : r.regional_by_model) {
    const std::string best = k == r.best_model ? "1" : "0";
    for (const auto& e : t.entries) {
      reg += std::string(model_tag(k)) + "," + std::string(region_name(e.region)) + "," + exact(e.mae) + "," +
             std::to_string(e.n) + ",0," + best + "\n";
    }
    for (auto x : t.excluded) reg += std::string(model_tag(k)) + "," + std::string(region_name(x)) + ",,0,1," + best + "\n";
  }
  write_file((base / "regional_mae.csv").string(), reg);

  std::string res = "row,region,y,yhat,residual\n";
  for (const auto& e : r.residuals) {
    res += std::to_string(e.row) + "," + std::string(region_name(e.region)) + "," + exact(e.y) + "," +
           exact(e.yhat) + "," + exact(e.residual) + "\n";
  }
  write_file((base / "residuals.csv").string(), res);
}

}  // namespace amr
