#include "amr/model_io.hpp"

#include "amr/binary_io.hpp"
#include "amr/error.hpp"

namespace amr {

namespace {

void write_payload(ByteWriter& w, const TrainedModel::Params& params) {
  struct Visitor {
    ByteWriter& w;
    void operator()(const NaiveParams& p) const { w.u32(p.lag_column); }
    void operator()(const LinearParams& p) const {
      w.f64(p.intercept);
      w.f64(p.lambda);
      w.f64s(p.weights);
    }
    void operator()(const TreeEnsemble& e) const {
      w.f64(e.base_score);
      w.f64(e.learning_rate);
      w.u64(e.trees.size());
      for (const auto& t : e.trees) {
        w.u64(t.nodes.size());
        for (const auto& n : t.nodes) {
          w.u32(static_cast<std::uint32_t>(n.feature));
          w.f64(n.threshold);
          w.u32(n.left);
          w.u32(n.right);
          w.f64(n.weight);
        }
      }
    }
    void operator()(const LstmParams& p) const {
      w.u64(p.input_size);
      w.u64(p.hidden_size);
      w.f64s(p.theta);
      w.f64s(p.x_mean);
      w.f64s(p.x_sd);
      w.f64(p.y_mean);
      w.f64(p.y_sd);
    }
  };
  std::visit(Visitor{w}, params);
}

TrainedModel::Params read_payload(ByteReader& r, ModelKind kind, std::size_t n_features) {
  switch (kind) {
    case ModelKind::Naive: {
      NaiveParams p;
      p.lag_column = r.u32();
      if (p.lag_column >= n_features) r.fail("lag column out of range");
      return p;
    }
    case ModelKind::Linear:
    case ModelKind::Ridge: {
      LinearParams p;
      p.intercept = r.f64();
      p.lambda = r.f64();
      p.weights = r.f64s();
      if (p.weights.size() != n_features) r.fail("weight count does not match feature count");
      return p;
    }
    case ModelKind::GBTExact:
    case ModelKind::GBTHistogram: {
      TreeEnsemble e;
      e.base_score = r.f64();
      e.learning_rate = r.f64();
      const auto n_trees = r.u64();
      if (n_trees > r.remaining()) r.fail("tree count exceeds file size");
      e.trees.resize(n_trees);
      for (auto& t : e.trees) {
        const auto n_nodes = r.u64();
        if (n_nodes == 0 || n_nodes > r.remaining() / 28) r.fail("bad node count");
        t.nodes.resize(n_nodes);
        for (auto& n : t.nodes) {
          n.feature = static_cast<std::int32_t>(r.u32());
          n.threshold = r.f64();
          n.left = r.u32();
          n.right = r.u32();
          n.weight = r.f64();
        }
        for (std::size_t i = 0; i < t.nodes.size(); ++i) {
          const auto& n = t.nodes[i];
          if (n.is_leaf()) continue;
          if (static_cast<std::size_t>(n.feature) >= n_features || n.left <= i || n.right <= i ||
              n.left >= n_nodes || n.right >= n_nodes) {
            r.fail("tree structure is inconsistent");
          }
        }
      }
      return e;
    }
    case ModelKind::LSTM: {
      LstmParams p;
      p.input_size = r.u64();
      p.hidden_size = r.u64();
      p.theta = r.f64s();
      p.x_mean = r.f64s();
      p.x_sd = r.f64s();
      p.y_mean = r.f64();
      p.y_sd = r.f64();
      const std::size_t h = p.hidden_size;
      const std::size_t d = p.input_size;
      if (d != n_features || p.x_mean.size() != d || p.x_sd.size() != d ||
          p.theta.size() != 4 * h * d + 4 * h * h + 4 * h + h + 1) {
        r.fail("LSTM parameter shapes are inconsistent");
      }
      return p;
    }
  }
  r.fail("unknown model kind");
}

}  // namespace

std::string serialize_model(const TrainedModel& m) {
  ByteWriter w;
  w.raw(kModelMagic);
  w.u32(kModelFormatVersion);
  w.u8(static_cast<std::uint8_t>(m.kind()));
  w.u32(static_cast<std::uint32_t>(m.n_features()));

  const auto& meta = m.meta();
  w.u32(static_cast<std::uint32_t>(meta.hyperparameters.size()));
  for (const auto& [k, v] : meta.hyperparameters) {
    w.str(k);
    w.f64(v);
  }
  w.u64(meta.epochs_run);
  w.f64s(meta.val_mae_trace);
  w.f64s(meta.train_mae_trace);

  const auto& imp = m.feature_importances();
  w.u8(imp ? 1 : 0);
  if (imp) w.f64s(*imp);

  write_payload(w, m.params());
  const std::uint64_t sum = fnv1a64(w.bytes());
  w.u64(sum);
  return std::move(w).take();
}

TrainedModel deserialize_model(std::string_view bytes) {
  if (bytes.size() < kModelMagic.size() + 8) throw Error(ErrorCode::CorruptModel, "file too short");
  const auto body = bytes.substr(0, bytes.size() - 8);
  ByteReader tail(bytes.substr(bytes.size() - 8), ErrorCode::CorruptModel);
  if (tail.u64() != fnv1a64(body)) throw Error(ErrorCode::CorruptModel, "checksum mismatch");

  ByteReader r(body, ErrorCode::CorruptModel);
  if (r.raw(kModelMagic.size()) != kModelMagic) r.fail("bad magic");
  if (const auto v = r.u32(); v != kModelFormatVersion)
    r.fail("unsupported model format version " + std::to_string(v));
  const auto kind_raw = r.u8();
  if (kind_raw >= kModelKindCount) r.fail("unknown model kind");
  const auto kind = static_cast<ModelKind>(kind_raw);
  const std::size_t n_features = r.u32();

  TrainingMeta meta;
  const auto n_hp = r.u32();
  for (std::uint32_t i = 0; i < n_hp; ++i) {
    auto k = r.str();
    meta.hyperparameters[k] = r.f64();
  }
  meta.epochs_run = r.u64();
  meta.val_mae_trace = r.f64s();
  meta.train_mae_trace = r.f64s();

  std::optional<std::vector<double>> imp;
  if (r.u8() != 0) {
    imp = r.f64s();
    if (imp->size() != n_features) r.fail("importance vector length mismatch");
  }

  TrainedModel m(kind, n_features, read_payload(r, kind, n_features));
  if (r.remaining() != 0) r.fail("trailing bytes after payload");
  m.set_feature_importances(std::move(imp));
  m.meta() = std::move(meta);
  return m;
}

void save_model(const TrainedModel& m, const std::string& path) { write_file(path, serialize_model(m)); }

TrainedModel load_model(const std::string& path) {
  try {
    return deserialize_model(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw Error(ErrorCode::ArtifactMissing, e.what());
    throw;
  }
}

}  // namespace amr
