#pragma once

// Per-image iconicity indicators. Every indicator is oriented so that a
// higher score means a more iconic image.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "iconika/common.hpp"
#include "iconika/datamodel.hpp"
#include "iconika/solvers.hpp"

namespace iconika {

enum class BoxSource { gt, det };

enum class Provenance { oracle, predicted, external };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::oracle: return "oracle";
    case Provenance::predicted: return "predicted";
    case Provenance::external: return "external";
  }
  return "?";
}

// An indicator could not be computed for an image because an annotation,
// feature row or model it needs is absent.
struct AnnotationMissing {
  std::string what;
};

using IndicatorValue = std::variant<double, AnnotationMissing>;

inline bool has_value(const IndicatorValue& v) { return std::holds_alternative<double>(v); }
inline double value_of(const IndicatorValue& v) { return std::get<double>(v); }

struct IndicatorScores {
  std::string indicator_name;
  std::map<std::string, double> scores;
  Provenance provenance = Provenance::oracle;
  std::vector<std::string> missing;  // ids that could not be scored

  bool operator==(const IndicatorScores&) const = default;
};

struct ClassPrototype {
  int class_id = 0;
  Vector mu;                                    // empty when built without features
  std::optional<Vector> attr_mean;              // in [0,1]^M
  std::optional<std::vector<bool>> attr_signature;  // attr_mean >= 0.5

  bool operator==(const ClassPrototype&) const = default;
};

// ---------------------------------------------------------------------------
// Class-independent indicators

inline const std::optional<BoundingBox>& box_of(const ImageRecord& r, BoxSource source) {
  return source == BoxSource::gt ? r.gt_box : r.det_box;
}

// Fraction of the image covered by the box.
inline IndicatorValue bb_size(const ImageRecord& r, BoxSource source) {
  const auto& box = box_of(r, source);
  if (!box) return AnnotationMissing{source == BoxSource::gt ? "gt_box" : "det_box"};
  return (box->w * box->h) / (static_cast<double>(r.width) * static_cast<double>(r.height));
}

// Minus the distance between box and image centres, in units of the image
// diagonal.
inline IndicatorValue bb_dist2center(const ImageRecord& r, BoxSource source) {
  const auto& box = box_of(r, source);
  if (!box) return AnnotationMissing{source == BoxSource::gt ? "gt_box" : "det_box"};
  const double dx = box->center_x() - r.width / 2.0;
  const double dy = box->center_y() - r.height / 2.0;
  const double diag = std::hypot(static_cast<double>(r.width), static_cast<double>(r.height));
  return -std::hypot(dx, dy) / diag;
}

// Number of visible parts.
inline IndicatorValue occlusion_score(const ImageRecord& r) {
  if (!r.parts) return AnnotationMissing{"parts"};
  return static_cast<double>(std::count(r.parts->begin(), r.parts->end(), true));
}

inline double external_score(const ImageRecord& r, const std::string& name) {
  auto it = r.external_scores.find(name);
  if (it == r.external_scores.end()) {
    std::string names;
    for (const auto& [n, _] : r.external_scores) names += (names.empty() ? "" : ", ") + n;
    throw std::invalid_argument(fmt::format("image '{}' has no external score '{}' (available: {})", r.image_id, name,
                                            names.empty() ? "none" : names));
  }
  return it->second;
}

// External score produced by a linear model on the image's feature row.
inline double external_score(const LinearModel& model, std::span<const double> x) { return model.score(x); }

// ---------------------------------------------------------------------------
// Class-dependent indicators

inline double cluster_score(std::span<const double> x, const ClassPrototype& proto) {
  if (x.size() != proto.mu.size()) throw std::invalid_argument("cluster_score: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += (x[k] - proto.mu[k]) * (x[k] - proto.mu[k]);
  return -s;
}

inline double class_svm_score(std::span<const double> x, const LinearModel& model) { return model.score(x); }

inline double i2c_att_score(const std::vector<bool>& a, const ClassPrototype& proto) {
  if (!proto.attr_mean) throw std::invalid_argument("i2c_att_score: prototype has no attribute mean");
  const Vector& c = *proto.attr_mean;
  if (a.size() != c.size()) throw std::invalid_argument("i2c_att_score: attribute length mismatch");
  double s = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) {
    const double d = (a[m] ? 1.0 : 0.0) - c[m];
    s += d * d;
  }
  return -std::sqrt(s);
}

inline constexpr double kDapEpsilon = 1e-5;

// Log of the product over attributes of p(a_m = signature_m | x), each factor
// clamped to [epsilon, 1 - epsilon].
inline double dap_score(std::span<const double> attr_probs, const ClassPrototype& proto, double epsilon = kDapEpsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw std::invalid_argument("dap_score: epsilon must lie in (0, 0.5)");
  if (!proto.attr_signature) throw std::invalid_argument("dap_score: prototype has no attribute signature");
  const auto& sig = *proto.attr_signature;
  if (attr_probs.size() != sig.size())
    throw std::invalid_argument(fmt::format("dap_score: {} probabilities for M = {}", attr_probs.size(), sig.size()));
  double s = 0.0;
  for (std::size_t m = 0; m < sig.size(); ++m) {
    const double q = sig[m] ? attr_probs[m] : 1.0 - attr_probs[m];
    s += std::log(std::clamp(q, epsilon, 1.0 - epsilon));
  }
  return s;
}

inline double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

// Class prototypes from the train images of a dataset. mu is the mean feature
// row (left empty when features is null); attribute fields are present when
// at least one of the class's images carries attributes.
inline std::map<int, ClassPrototype> build_prototypes(const Dataset& train, const FeatureMatrix* features) {
  std::map<int, std::vector<const ImageRecord*>> by_class;
  for (const auto& [id, r] : train.records) {
    auto s = train.split.find(id);
    if (s != train.split.end() && s->second != Split::train) continue;
    by_class[r.class_id].push_back(&r);
  }
  std::map<int, ClassPrototype> out;
  for (const auto& [cls, recs] : by_class) {
    ClassPrototype p;
    p.class_id = cls;
    if (features != nullptr) {
      p.mu.assign(features->dim, 0.0);
      std::size_t n = 0;
      for (const auto* r : recs)
        if (const Vector* row = features->find(r->image_id)) {
          for (std::size_t k = 0; k < features->dim; ++k) p.mu[k] += (*row)[k];
          ++n;
        }
      if (n == 0)
        throw ValidationError(fmt::format("class {} has no train image with '{}' features", cls, features->feature_name));
      for (auto& v : p.mu) v /= static_cast<double>(n);
    }
    Vector mean;
    std::size_t n_attr = 0;
    for (const auto* r : recs) {
      if (!r->attributes) continue;
      if (mean.empty()) mean.assign(r->attributes->size(), 0.0);
      for (std::size_t m = 0; m < mean.size(); ++m) mean[m] += (*r->attributes)[m] ? 1.0 : 0.0;
      ++n_attr;
    }
    if (n_attr > 0) {
      for (auto& v : mean) v /= static_cast<double>(n_attr);
      std::vector<bool> sig(mean.size());
      for (std::size_t m = 0; m < mean.size(); ++m) sig[m] = mean[m] >= 0.5;
      p.attr_mean = std::move(mean);
      p.attr_signature = std::move(sig);
    } else {
      log().warn("class {}: no train attribute vectors, attribute prototype absent", cls);
    }
    out.emplace(cls, std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Indicator suite

enum class IndicatorKind { bb_size, bb_dist2center, occlusion, external, cluster, class_svm, svm_att, i2c_att, dap };

inline IndicatorKind indicator_kind_from_string(std::string_view s) {
  static const std::map<std::string_view, IndicatorKind> kinds = {
      {"bb_size", IndicatorKind::bb_size},     {"bb_dist2center", IndicatorKind::bb_dist2center},
      {"occlusion", IndicatorKind::occlusion}, {"external", IndicatorKind::external},
      {"cluster", IndicatorKind::cluster},     {"class_svm", IndicatorKind::class_svm},
      {"svm_att", IndicatorKind::svm_att},     {"i2c_att", IndicatorKind::i2c_att},
      {"dap", IndicatorKind::dap}};
  auto it = kinds.find(s);
  if (it == kinds.end()) throw ValidationError(fmt::format("unknown indicator type '{}'", s));
  return it->second;
}

struct IndicatorSpec {
  std::string name;
  IndicatorKind kind = IndicatorKind::bb_size;
  Provenance provenance = Provenance::oracle;
  std::string features;  // feature matrix for cluster / class_svm / predicted dap
  std::string score;     // external score name
};

struct SuiteConfig {
  std::vector<IndicatorSpec> indicators;
  double aux_lambda = 1e-3;  // regularisation of per-class and attribute classifiers
  int aux_epochs = 50;
  std::optional<std::filesystem::path> model_dir;
};

// Parse the "suite" section of an experiment config:
//   {"indicators": [{"name": "BB-size", "type": "bb_size", "source": "gt"}, ...],
//    "aux_lambda": 1e-3, "aux_epochs": 50, "model_dir": "models/"}
// source: gt|det for boxes, oracle|predicted for dap; features names a feature matrix.
inline SuiteConfig suite_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  SuiteConfig cfg;
  try {
    for (const auto& e : j.at("indicators")) {
      IndicatorSpec s;
      s.kind = indicator_kind_from_string(e.at("type").get<std::string>());
      s.name = e.value("name", e.at("type").get<std::string>());
      const std::string source = e.value("source", std::string{});
      s.features = e.value("features", std::string{});
      s.score = e.value("score", std::string{});
      switch (s.kind) {
        case IndicatorKind::bb_size:
        case IndicatorKind::bb_dist2center:
          if (source != "gt" && source != "det")
            throw ValidationError(fmt::format("indicator '{}': source must be gt or det", s.name));
          s.provenance = source == "gt" ? Provenance::oracle : Provenance::predicted;
          break;
        case IndicatorKind::dap:
          if (source != "oracle" && source != "predicted")
            throw ValidationError(fmt::format("indicator '{}': source must be oracle or predicted", s.name));
          s.provenance = source == "oracle" ? Provenance::oracle : Provenance::predicted;
          if (s.provenance == Provenance::predicted && s.features.empty())
            throw ValidationError(fmt::format("indicator '{}': predicted dap needs features", s.name));
          break;
        case IndicatorKind::external:
          if (s.score.empty()) throw ValidationError(fmt::format("indicator '{}': external needs a score name", s.name));
          s.provenance = Provenance::external;
          break;
        case IndicatorKind::cluster:
        case IndicatorKind::class_svm:
          if (s.features.empty()) throw ValidationError(fmt::format("indicator '{}': features required", s.name));
          s.provenance = Provenance::predicted;
          break;
        default:
          s.provenance = Provenance::oracle;
      }
      cfg.indicators.push_back(std::move(s));
    }
    cfg.aux_lambda = j.value("aux_lambda", cfg.aux_lambda);
    cfg.aux_epochs = j.value("aux_epochs", cfg.aux_epochs);
    if (j.contains("model_dir")) {
      std::filesystem::path p = j.at("model_dir").get<std::string>();
      cfg.model_dir = p.is_absolute() ? p : base_dir / p;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("invalid indicator suite config: {}", e.what()));
  }
  std::set<std::string> names;
  for (const auto& s : cfg.indicators)
    if (!names.insert(s.name).second) throw ValidationError(fmt::format("duplicate indicator name '{}'", s.name));
  return cfg;
}

// Key for prototypes built from attributes only.
inline const std::string kAttributesKey = "@attributes";

// Auxiliary models the class-dependent indicators need, trained on the train
// split. Keys are feature matrix names (or kAttributesKey).
struct SuiteModels {
  std::map<std::string, std::map<int, ClassPrototype>> prototypes;
  std::map<std::string, std::map<int, LinearModel>> class_svms;
  std::map<std::string, std::vector<LinearModel>> attribute_classifiers;

  bool operator==(const SuiteModels&) const = default;
};

namespace detail {

inline Vector attributes_as_vector(const std::vector<bool>& a) {
  Vector v(a.size());
  for (std::size_t m = 0; m < a.size(); ++m) v[m] = a[m] ? 1.0 : 0.0;
  return v;
}

// One-vs-rest classifier per class over rows keyed by image id.
inline std::map<int, LinearModel> train_one_vs_rest(const Dataset& train, const std::map<std::string, Vector>& rows,
                                                    const TrainOptions& opt) {
  std::vector<Vector> X;
  std::vector<int> classes;
  for (const auto& [id, x] : rows) {
    X.push_back(x);
    classes.push_back(train.record(id).class_id);
  }
  std::set<int> present(classes.begin(), classes.end());
  std::map<int, LinearModel> out;
  for (int cls : present) {
    std::vector<int> y(classes.size());
    for (std::size_t i = 0; i < classes.size(); ++i) y[i] = classes[i] == cls ? 1 : -1;
    if (present.size() < 2) {
      log().warn("one-vs-rest: only class {} present, using a constant model", cls);
      LinearModel m;
      m.w.assign(X.front().size(), 0.0);
      m.b = 1.0;
      out.emplace(cls, std::move(m));
      continue;
    }
    out.emplace(cls, train_binary_svm(X, y, opt));
  }
  return out;
}

inline std::map<std::string, Vector> train_rows(const Dataset& ds, const FeatureMatrix& fm) {
  std::map<std::string, Vector> rows;
  for (const auto& id : ds.ids(Split::train))
    if (const Vector* r = fm.find(id)) rows.emplace(id, *r);
  return rows;
}

// Bias magnitude for an attribute that is constant over the training set;
// the sigmoid saturates well past the DAP clamp.
inline constexpr double kConstantAttributeBias = 30.0;

}  // namespace detail

inline SuiteModels train_suite_models(const Dataset& ds, const SuiteConfig& cfg) {
  SuiteModels models;
  TrainOptions opt;
  opt.lambda = cfg.aux_lambda;
  opt.epochs = cfg.aux_epochs;
  const Dataset train = ds.subset(ds.ids(Split::train));

  auto ensure_prototypes = [&](const std::string& key) {
    if (models.prototypes.contains(key)) return;
    const FeatureMatrix* fm = key == kAttributesKey ? nullptr : &ds.feature(key);
    models.prototypes.emplace(key, build_prototypes(train, fm));
  };

  for (const auto& s : cfg.indicators) {
    switch (s.kind) {
      case IndicatorKind::cluster:
        ensure_prototypes(s.features);
        break;
      case IndicatorKind::class_svm:
        if (!models.class_svms.contains(s.features))
          models.class_svms.emplace(s.features, detail::train_one_vs_rest(train, detail::train_rows(ds, ds.feature(s.features)), opt));
        break;
      case IndicatorKind::svm_att:
        if (!models.class_svms.contains(kAttributesKey)) {
          std::map<std::string, Vector> rows;
          for (const auto& [id, r] : train.records)
            if (r.attributes) rows.emplace(id, detail::attributes_as_vector(*r.attributes));
          if (rows.empty()) throw ValidationError("svm_att: no train image carries attributes");
          models.class_svms.emplace(kAttributesKey, detail::train_one_vs_rest(train, rows, opt));
        }
        break;
      case IndicatorKind::i2c_att:
        ensure_prototypes(kAttributesKey);
        break;
      case IndicatorKind::dap:
        ensure_prototypes(kAttributesKey);
        if (s.provenance == Provenance::predicted && !models.attribute_classifiers.contains(s.features)) {
          const auto rows = detail::train_rows(ds, ds.feature(s.features));
          std::vector<Vector> X;
          std::vector<std::vector<bool>> A;
          for (const auto& [id, x] : rows)
            if (const auto& a = train.record(id).attributes) {
              X.push_back(x);
              A.push_back(*a);
            }
          if (X.empty()) throw ValidationError("predicted dap: no train image has both attributes and features");
          std::vector<LinearModel> classifiers;
          const std::size_t M = A.front().size();
          for (std::size_t m = 0; m < M; ++m) {
            std::vector<int> y(X.size());
            for (std::size_t i = 0; i < X.size(); ++i) y[i] = A[i][m] ? 1 : -1;
            const bool any_pos = std::find(y.begin(), y.end(), 1) != y.end();
            const bool any_neg = std::find(y.begin(), y.end(), -1) != y.end();
            if (any_pos && any_neg) {
              TrainOptions o = opt;
              o.seed = opt.seed + m;
              classifiers.push_back(train_binary_svm(X, y, o));
            } else {
              LinearModel c;
              c.w.assign(X.front().size(), 0.0);
              c.b = any_pos ? detail::kConstantAttributeBias : -detail::kConstantAttributeBias;
              classifiers.push_back(std::move(c));
            }
          }
          models.attribute_classifiers.emplace(s.features, std::move(classifiers));
        }
        break;
      default:
        break;
    }
  }
  return models;
}

// Score one image with one indicator.
inline IndicatorValue score_image(const Dataset& ds, const SuiteModels& models, const IndicatorSpec& spec,
                                  const ImageRecord& r) {
  const BoxSource src = spec.provenance == Provenance::oracle ? BoxSource::gt : BoxSource::det;
  auto row = [&](const std::string& feat) -> const Vector* { return ds.feature(feat).find(r.image_id); };
  auto proto = [&](const std::string& key) -> const ClassPrototype* {
    auto it = models.prototypes.find(key);
    if (it == models.prototypes.end()) return nullptr;
    auto p = it->second.find(r.class_id);
    return p == it->second.end() ? nullptr : &p->second;
  };

  switch (spec.kind) {
    case IndicatorKind::bb_size: return bb_size(r, src);
    case IndicatorKind::bb_dist2center: return bb_dist2center(r, src);
    case IndicatorKind::occlusion: return occlusion_score(r);
    case IndicatorKind::external:
      if (!r.external_scores.contains(spec.score)) return AnnotationMissing{"external score " + spec.score};
      return external_score(r, spec.score);
    case IndicatorKind::cluster: {
      const Vector* x = row(spec.features);
      if (x == nullptr) return AnnotationMissing{"features " + spec.features};
      const ClassPrototype* p = proto(spec.features);
      if (p == nullptr) return AnnotationMissing{fmt::format("prototype for class {}", r.class_id)};
      return cluster_score(*x, *p);
    }
    case IndicatorKind::class_svm:
    case IndicatorKind::svm_att: {
      const std::string key = spec.kind == IndicatorKind::svm_att ? kAttributesKey : spec.features;
      Vector attrs;
      const Vector* x = nullptr;
      if (spec.kind == IndicatorKind::svm_att) {
        if (!r.attributes) return AnnotationMissing{"attributes"};
        attrs = detail::attributes_as_vector(*r.attributes);
        x = &attrs;
      } else {
        x = row(spec.features);
        if (x == nullptr) return AnnotationMissing{"features " + spec.features};
      }
      auto it = models.class_svms.find(key);
      if (it == models.class_svms.end()) return AnnotationMissing{"class models " + key};
      auto m = it->second.find(r.class_id);
      if (m == it->second.end()) return AnnotationMissing{fmt::format("model for class {}", r.class_id)};
      return class_svm_score(*x, m->second);
    }
    case IndicatorKind::i2c_att: {
      if (!r.attributes) return AnnotationMissing{"attributes"};
      const ClassPrototype* p = proto(kAttributesKey);
      if (p == nullptr || !p->attr_mean) return AnnotationMissing{fmt::format("attribute prototype for class {}", r.class_id)};
      return i2c_att_score(*r.attributes, *p);
    }
    case IndicatorKind::dap: {
      const ClassPrototype* p = proto(kAttributesKey);
      if (p == nullptr || !p->attr_signature)
        return AnnotationMissing{fmt::format("attribute prototype for class {}", r.class_id)};
      if (spec.provenance == Provenance::oracle) {
        if (!r.attributes) return AnnotationMissing{"attributes"};
        return dap_score(detail::attributes_as_vector(*r.attributes), *p);
      }
      const Vector* x = row(spec.features);
      if (x == nullptr) return AnnotationMissing{"features " + spec.features};
      auto it = models.attribute_classifiers.find(spec.features);
      if (it == models.attribute_classifiers.end()) return AnnotationMissing{"attribute classifiers " + spec.features};
      Vector probs;
      probs.reserve(it->second.size());
      for (const auto& c : it->second) probs.push_back(sigmoid(c.score(*x)));
      return dap_score(probs, *p);
    }
  }
  return AnnotationMissing{"unsupported indicator"};
}

// One IndicatorScores per configured indicator over the given images.
// Images an indicator cannot score are listed in `missing`.
inline std::vector<IndicatorScores> compute_indicator_suite(const Dataset& ds, const SuiteModels& models,
                                                            const SuiteConfig& cfg,
                                                            const std::vector<std::string>& image_ids) {
  std::vector<IndicatorScores> out;
  for (const auto& spec : cfg.indicators) {
    IndicatorScores s{spec.name, {}, spec.provenance, {}};
    for (const auto& id : image_ids) {
      const IndicatorValue v = score_image(ds, models, spec, ds.record(id));
      if (has_value(v)) {
        s.scores.emplace(id, value_of(v));
      } else {
        s.missing.push_back(id);
      }
    }
    if (!s.missing.empty())
      log().warn("indicator '{}': {} of {} images lack what it needs", spec.name, s.missing.size(), image_ids.size());
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence of auxiliary models
//
// model_dir/prototypes.json           {key: [{class_id, mu, attr_mean?, attr_signature?}]}
// model_dir/class_svm/<key>/<cls>.model
// model_dir/attributes/<key>/<m>.model

inline void save_suite_models(const SuiteModels& models, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json protos = nlohmann::json::object();
  for (const auto& [key, by_class] : models.prototypes) {
    auto& arr = protos[key] = nlohmann::json::array();
    for (const auto& [cls, p] : by_class) {
      nlohmann::json e = {{"class_id", cls}, {"mu", p.mu}};
      if (p.attr_mean) e["attr_mean"] = *p.attr_mean;
      if (p.attr_signature) e["attr_signature"] = detail::bools_to_json(*p.attr_signature);
      arr.push_back(std::move(e));
    }
  }
  std::ofstream(dir / "prototypes.json", std::ios::trunc) << protos.dump() << '\n';
  for (const auto& [key, by_class] : models.class_svms) {
    fs::create_directories(dir / "class_svm" / key);
    for (const auto& [cls, m] : by_class) save_model(dir / "class_svm" / key / fmt::format("{}.model", cls), m);
  }
  for (const auto& [key, list] : models.attribute_classifiers) {
    fs::create_directories(dir / "attributes" / key);
    for (std::size_t m = 0; m < list.size(); ++m)
      save_model(dir / "attributes" / key / fmt::format("{:05}.model", m), list[m]);
  }
}

inline SuiteModels load_suite_models(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  SuiteModels models;
  const fs::path proto_path = dir / "prototypes.json";
  if (fs::exists(proto_path)) {
    std::ifstream in(proto_path);
    try {
      const auto j = nlohmann::json::parse(in);
      for (const auto& [key, arr] : j.items()) {
        auto& by_class = models.prototypes[key];
        for (const auto& e : arr) {
          ClassPrototype p;
          p.class_id = e.at("class_id").get<int>();
          p.mu = e.at("mu").get<Vector>();
          if (e.contains("attr_mean")) p.attr_mean = e.at("attr_mean").get<Vector>();
          if (e.contains("attr_signature")) p.attr_signature = detail::bools_from_json(e.at("attr_signature"));
          by_class.emplace(p.class_id, std::move(p));
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(fmt::format("{}: {}", proto_path.string(), e.what()));
    }
  }
  auto sorted_entries = [](const fs::path& p) {
    std::vector<fs::path> v;
    if (fs::exists(p))
      for (const auto& e : fs::directory_iterator(p)) v.push_back(e.path());
    std::sort(v.begin(), v.end());
    return v;
  };
  for (const auto& keydir : sorted_entries(dir / "class_svm"))
    for (const auto& f : sorted_entries(keydir))
      models.class_svms[keydir.filename().string()].emplace(std::stoi(f.stem().string()), load_model(f).model);
  for (const auto& keydir : sorted_entries(dir / "attributes"))
    for (const auto& f : sorted_entries(keydir))
      models.attribute_classifiers[keydir.filename().string()].push_back(load_model(f).model);
  return models;
}

}  // namespace iconika
