#pragma once

// Indicator evaluation, correlation tables, fusion, direct prediction,
// annotator agreement, and the experiment driver that writes a report bundle.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "iconika/common.hpp"
#include "iconika/datamodel.hpp"
#include "iconika/indicators.hpp"
#include "iconika/rankstats.hpp"
#include "iconika/solvers.hpp"

#ifndef ICONIKA_VERSION
#define ICONIKA_VERSION "0.0.0"
#endif

namespace iconika {

inline constexpr const char* kVersion = ICONIKA_VERSION;

// ---------------------------------------------------------------------------
// Evaluation against ground-truth ratings

struct EvaluationRow {
  std::string name;
  double src = 0.0;
  double p_value = 1.0;
  std::optional<double> ap;  // absent when no evaluated image is a positive
  std::size_t n = 0;
  bool degenerate = false;

  bool operator==(const EvaluationRow&) const = default;
};

// SRC (t-approximation p-value) and AP at alpha = 1.5 over the images that
// have both a score and a rating. AP ties break on image id.
inline EvaluationRow evaluate_scores(const std::string& name, const std::map<std::string, double>& scores,
                                     const std::map<std::string, double>& ratings) {
  std::vector<std::string> ids;
  Vector s, r;
  for (const auto& [id, v] : scores) {
    auto it = ratings.find(id);
    if (it == ratings.end()) continue;
    ids.push_back(id);
    s.push_back(v);
    r.push_back(it->second);
  }
  if (ids.size() < 2)
    throw ValidationError(fmt::format("indicator '{}': {} rated images in common, need at least 2", name, ids.size()));
  EvaluationRow row;
  row.name = name;
  row.n = ids.size();
  const CorrelationResult c = spearman(s, r);
  row.src = c.rho;
  row.p_value = c.p_value;
  row.degenerate = c.degenerate;
  if (std::any_of(r.begin(), r.end(), [](double v) { return v > kIconicThreshold; }))
    row.ap = average_precision(s, r, kIconicThreshold, ids);
  else
    log().warn("indicator '{}': no positives among {} images, AP undefined", name, ids.size());
  return row;
}

inline EvaluationRow evaluate_indicator(const IndicatorScores& scores, const std::map<std::string, double>& ratings) {
  return evaluate_scores(scores.indicator_name, scores.scores, ratings);
}

// ---------------------------------------------------------------------------
// Indicator-by-indicator SRC

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<std::optional<double>>> src;  // nullopt: fewer than 2 common images
};

inline CorrelationMatrix indicator_correlation_matrix(const std::vector<IndicatorScores>& suite) {
  CorrelationMatrix m;
  const std::size_t k = suite.size();
  for (const auto& s : suite) m.names.push_back(s.indicator_name);
  m.src.assign(k, std::vector<std::optional<double>>(k));
  for (std::size_t i = 0; i < k; ++i) {
    m.src[i][i] = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      Vector a, b;
      for (const auto& [id, v] : suite[i].scores) {
        auto it = suite[j].scores.find(id);
        if (it == suite[j].scores.end()) continue;
        a.push_back(v);
        b.push_back(it->second);
      }
      if (a.size() < 2) {
        log().warn("correlation {} / {}: fewer than 2 common images", m.names[i], m.names[j]);
        continue;
      }
      m.src[i][j] = m.src[j][i] = spearman(a, b).rho;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Suite tables and fusion

// Images scored by every indicator, one column per indicator.
struct SuiteTable {
  std::vector<std::string> names;
  std::map<std::string, Vector> rows;
  std::vector<std::string> excluded;  // images some indicator could not score
};

inline SuiteTable assemble_suite(const std::vector<IndicatorScores>& suite) {
  if (suite.empty()) throw std::invalid_argument("empty indicator suite");
  SuiteTable t;
  std::set<std::string> all;
  for (const auto& s : suite) {
    t.names.push_back(s.indicator_name);
    for (const auto& [id, _] : s.scores) all.insert(id);
    all.insert(s.missing.begin(), s.missing.end());
  }
  for (const auto& id : all) {
    Vector row;
    row.reserve(suite.size());
    for (const auto& s : suite) {
      auto it = s.scores.find(id);
      if (it == s.scores.end()) break;
      row.push_back(it->second);
    }
    if (row.size() == suite.size())
      t.rows.emplace(id, std::move(row));
    else
      t.excluded.push_back(id);
  }
  if (!t.excluded.empty()) log().warn("fusion: {} images lack some indicator and are excluded", t.excluded.size());
  return t;
}

// Per-indicator whitening statistics from each indicator's own scores.
inline Whitener fit_suite_whitener(const std::vector<IndicatorScores>& train_suite, double floor = 1e-12) {
  if (train_suite.empty()) throw std::invalid_argument("empty indicator suite");
  Whitener w{{}, {}, floor};
  for (const auto& s : train_suite) {
    if (s.scores.empty())
      throw ValidationError(fmt::format("indicator '{}' scored no training image", s.indicator_name));
    std::vector<Vector> col;
    col.reserve(s.scores.size());
    for (const auto& [_, v] : s.scores) col.push_back({v});
    const Whitener one = fit_whitener(col, floor);
    w.mean.push_back(one.mean[0]);
    w.std.push_back(one.std[0]);
  }
  return w;
}

inline Provenance combined_provenance(const std::vector<IndicatorScores>& suite) {
  return std::all_of(suite.begin(), suite.end(), [](const auto& s) { return s.provenance == Provenance::oracle; })
             ? Provenance::oracle
             : Provenance::predicted;
}

// Mean of whitened indicator values.
inline IndicatorScores fuse_average(const std::vector<IndicatorScores>& suite, const Whitener& whitener,
                                    const std::string& name = "Average") {
  const SuiteTable t = assemble_suite(suite);
  IndicatorScores out{name, {}, combined_provenance(suite), t.excluded};
  for (const auto& [id, row] : t.rows) {
    const Vector z = whitener.apply(row);
    double s = 0.0;
    for (double v : z) s += v;
    out.scores.emplace(id, s / static_cast<double>(z.size()));
  }
  return out;
}

// A linear iconicity model over whitened input rows, with its whitener and
// the lambda selection that produced it.
struct PredictorModel {
  LinearModel model;
  Whitener whitener;
  LambdaSelection selection;

  std::map<std::string, double> score(const std::map<std::string, Vector>& rows) const {
    std::map<std::string, double> out;
    for (const auto& [id, x] : rows) out.emplace(id, model.score(whitener.apply(x)));
    return out;
  }
};

// Fit the whitener on the training rows, choose lambda on a stratified split
// of the training images, then retrain on all of them.
inline PredictorModel train_predictor(const Dataset& train, const std::map<std::string, Vector>& rows,
                                      const std::vector<std::string>& columns, Objective objective,
                                      const std::vector<double>& grid, TrainOptions opt) {
  std::map<std::string, Vector> train_rows;
  for (const auto& [id, x] : rows)
    if (train.records.contains(id)) train_rows.emplace(id, x);
  if (train_rows.empty()) throw ValidationError("no training rows to learn from");

  std::vector<Vector> raw;
  raw.reserve(train_rows.size());
  for (const auto& [_, x] : train_rows) raw.push_back(x);
  PredictorModel pm;
  pm.whitener = fit_whitener(raw);
  for (auto& [_, x] : train_rows) x = pm.whitener.apply(x);

  auto data_for = [&](const Dataset& part) {
    TrainingData d;
    for (const auto& [id, x] : train_rows)
      if (part.records.contains(id)) d.rows.emplace(id, x);
    d.ratings = part.ratings;
    d.batches = part.batches;
    return d;
  };
  const HalfSplit halves = split_half(train, opt.seed);
  pm.selection = select_lambda(data_for(halves.first), data_for(halves.second), grid, objective, opt);
  opt.lambda = pm.selection.lambda;
  try {
    pm.model = train_iconicity_model(data_for(train), objective, opt);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(fmt::format("{} model: {}", to_string(objective), e.what()));
  }
  pm.model.columns = columns;
  return pm;
}

inline PredictorModel fuse_learned(const Dataset& train, const std::vector<IndicatorScores>& train_suite,
                                   Objective objective, const std::vector<double>& grid, const TrainOptions& opt) {
  const SuiteTable t = assemble_suite(train_suite);
  return train_predictor(train, t.rows, t.names, objective, grid, opt);
}

inline IndicatorScores apply_fusion(const PredictorModel& pm, const std::vector<IndicatorScores>& suite,
                                    const std::string& name) {
  const SuiteTable t = assemble_suite(suite);
  if (!pm.model.columns.empty() && pm.model.columns != t.names)
    throw ValidationError(fmt::format("fusion model '{}' expects different indicators", name));
  return {name, pm.score(t.rows), combined_provenance(suite), t.excluded};
}

// ---------------------------------------------------------------------------
// Annotator agreement

struct AgreementGroup {
  std::string name;
  std::vector<std::string> annotators;
};

struct PairAgreement {
  std::string a, b;
  std::size_t n = 0;
  double src = 0.0;
  double p_value = 1.0;
  bool degenerate = false;
};

struct GroupAgreement {
  std::string name;
  std::vector<PairAgreement> pairs;
  std::optional<double> mean_src;  // over non-degenerate pairs
  std::size_t used_pairs = 0;
};

// Pairwise SRC between annotators of a group over the images both rated;
// the group statistic is the mean over non-degenerate pairs. Small overlaps
// (n <= 8) get exact permutation p-values.
inline std::vector<GroupAgreement> annotator_agreement(const std::vector<RatingRecord>& ratings,
                                                       const std::vector<AgreementGroup>& groups) {
  std::map<std::string, std::map<std::string, std::pair<double, int>>> by_annotator;
  for (const auto& r : ratings) {
    auto& [sum, n] = by_annotator[r.annotator_id][r.image_id];
    sum += r.rating;
    ++n;
  }
  std::vector<GroupAgreement> out;
  for (const auto& g : groups) {
    GroupAgreement ga{g.name, {}, std::nullopt, 0};
    double total = 0.0;
    for (std::size_t i = 0; i < g.annotators.size(); ++i)
      for (std::size_t j = i + 1; j < g.annotators.size(); ++j) {
        PairAgreement p{g.annotators[i], g.annotators[j]};
        Vector a, b;
        const auto ai = by_annotator.find(p.a);
        const auto bi = by_annotator.find(p.b);
        if (ai != by_annotator.end() && bi != by_annotator.end())
          for (const auto& [id, sa] : ai->second)
            if (auto it = bi->second.find(id); it != bi->second.end()) {
              a.push_back(sa.first / sa.second);
              b.push_back(it->second.first / it->second.second);
            }
        p.n = a.size();
        if (p.n < 2) {
          p.degenerate = true;
        } else {
          const auto c = spearman(
              a, b, p.n <= kMaxExactPermutationN ? PValueMethod::exact_permutation : PValueMethod::t_approximation);
          p.src = c.rho;
          p.p_value = c.p_value;
          p.degenerate = c.degenerate;
        }
        if (p.degenerate) {
          log().warn("agreement {}: pair {} / {} is degenerate over {} shared images, excluded", g.name, p.a, p.b, p.n);
        } else {
          total += p.src;
          ++ga.used_pairs;
        }
        ga.pairs.push_back(std::move(p));
      }
    if (ga.used_pairs > 0) ga.mean_src = total / static_cast<double>(ga.used_pairs);
    out.push_back(std::move(ga));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-class contribution reports

struct ImageContribution {
  std::string image_id;
  double score = 0.0;
  std::map<std::string, double> contributions;  // w_i * z_i
};

struct ContributionReport {
  int class_id = 0;
  double bias = 0.0;
  ImageContribution best;
  ImageContribution worst;
};

inline ImageContribution contribution_of(const LinearModel& model, const Whitener& whitener,
                                         const std::vector<std::string>& names, const std::string& id,
                                         const Vector& row) {
  ImageContribution c{id, model.score(whitener.apply(row)), {}};
  const Vector z = whitener.apply(row);
  for (std::size_t k = 0; k < z.size(); ++k) c.contributions[names[k]] = model.w[k] * z[k];
  return c;
}

// Highest and lowest fused score among the class's images in the suite; ties
// go to the smaller image id.
inline ContributionReport contribution_report(const LinearModel& model, const Whitener& whitener,
                                              const std::vector<IndicatorScores>& suite, const Dataset& ds,
                                              int class_id) {
  const SuiteTable t = assemble_suite(suite);
  if (!model.columns.empty() && model.columns != t.names)
    throw ValidationError("contribution report: model columns do not match the suite");
  const std::string* best = nullptr;
  const std::string* worst = nullptr;
  double best_s = 0.0, worst_s = 0.0;
  for (const auto& [id, row] : t.rows) {
    if (ds.record(id).class_id != class_id) continue;
    const double s = model.score(whitener.apply(row));
    if (best == nullptr || s > best_s) {
      best = &id;
      best_s = s;
    }
    if (worst == nullptr || s < worst_s) {
      worst = &id;
      worst_s = s;
    }
  }
  if (best == nullptr) throw ValidationError(fmt::format("class {} has no evaluated images", class_id));
  return {class_id, model.b, contribution_of(model, whitener, t.names, *best, t.rows.at(*best)),
          contribution_of(model, whitener, t.names, *worst, t.rows.at(*worst))};
}

// ---------------------------------------------------------------------------
// Experiment configuration
//
// {"seed": 0,
//  "suite": {"indicators": [...], "aux_lambda": 1e-3, "aux_epochs": 50},
//  "lambda_grid": [1e-4, 1e-3, 1e-2, 1e-1, 1],
//  "epochs": 200,
//  "fusion": {"average": true, "learned": ["bin", "rank"]},
//  "dip": {"enabled": true, "features": "fv", "objectives": ["bin", "rank"], "combine": true},
//  "agreement": {"groups": [{"name": "g1", "annotators": ["a", "b"]}]},
//  "contributions": true}

struct DipConfig {
  bool enabled = false;
  std::string features;
  std::vector<Objective> objectives{Objective::binary, Objective::ranking};
  bool combine = true;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  SuiteConfig suite;
  std::vector<double> lambda_grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  int epochs = 200;
  bool fusion_average = true;
  std::vector<Objective> fusion_learned{Objective::binary, Objective::ranking};
  DipConfig dip;
  std::vector<AgreementGroup> agreement_groups;
  bool contributions = true;
  nlohmann::json raw;  // as given, for the bundle manifest
};

inline std::string short_name(Objective o) { return o == Objective::binary ? "bin" : "rank"; }

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  ExperimentConfig c;
  c.raw = j;
  auto objectives = [](const nlohmann::json& arr) {
    std::vector<Objective> out;
    for (const auto& o : arr) out.push_back(objective_from_string(o.get<std::string>()));
    return out;
  };
  try {
    c.seed = j.value("seed", std::uint64_t{0});
    c.suite = suite_config_from_json(j.at("suite"), base_dir);
    if (j.contains("lambda_grid")) c.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    c.epochs = j.value("epochs", c.epochs);
    if (j.contains("fusion")) {
      const auto& f = j.at("fusion");
      c.fusion_average = f.value("average", true);
      if (f.contains("learned")) c.fusion_learned = objectives(f.at("learned"));
    }
    if (j.contains("dip")) {
      const auto& d = j.at("dip");
      c.dip.enabled = d.value("enabled", true);
      c.dip.features = d.value("features", std::string{});
      if (d.contains("objectives")) c.dip.objectives = objectives(d.at("objectives"));
      c.dip.combine = d.value("combine", true);
      if (c.dip.enabled && c.dip.features.empty()) throw ValidationError("dip: 'features' is required");
    }
    if (j.contains("agreement"))
      for (const auto& g : j.at("agreement").at("groups"))
        c.agreement_groups.push_back({g.at("name").get<std::string>(), g.at("annotators").get<std::vector<std::string>>()});
    c.contributions = j.value("contributions", true);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("invalid experiment config: {}", e.what()));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(fmt::format("invalid experiment config: {}", e.what()));
  }
  if (c.lambda_grid.empty()) throw ValidationError("lambda_grid is empty");
  for (double l : c.lambda_grid)
    if (!(l > 0.0)) throw ValidationError(fmt::format("lambda_grid: {} is not positive", l));
  if (c.epochs < 1) throw ValidationError("epochs must be at least 1");
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config '{}'", path.string()));
  try {
    return experiment_config_from_json(nlohmann::json::parse(in), path.parent_path());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

// ---------------------------------------------------------------------------
// Bundle writing

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", p.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", p.string()));
  out << text;
}

inline std::string fmt_real(double v) { return fmt::format("{:.6f}", v); }
inline std::string fmt_p(double v) { return fmt::format("{:.6e}", v); }

inline std::string evaluation_table(const std::vector<EvaluationRow>& rows, const std::string& first_column = "indicator") {
  std::string out = first_column + "\tn\tsrc\tp_value\tap\n";
  for (const auto& r : rows)
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", r.name, r.n, fmt_real(r.src), fmt_p(r.p_value),
                       r.ap ? fmt_real(*r.ap) : "NA");
  return out;
}

inline std::string correlation_table(const CorrelationMatrix& m) {
  std::string out = "indicator";
  for (const auto& n : m.names) out += "\t" + n;
  out += "\n";
  for (std::size_t i = 0; i < m.names.size(); ++i) {
    out += m.names[i];
    for (const auto& v : m.src[i]) out += "\t" + (v ? fmt_real(*v) : std::string("NA"));
    out += "\n";
  }
  return out;
}

inline std::string agreement_table(const std::vector<GroupAgreement>& groups) {
  std::string out = "group\tannotator_a\tannotator_b\tn\tsrc\tp_value\tdegenerate\n";
  for (const auto& g : groups)
    for (const auto& p : g.pairs)
      out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\n", g.name, p.a, p.b, p.n, fmt_real(p.src), fmt_p(p.p_value),
                         p.degenerate ? "yes" : "no");
  return out;
}

inline std::string agreement_summary_table(const std::vector<GroupAgreement>& groups) {
  std::string out = "group\tpairs\tused_pairs\tmean_src\n";
  for (const auto& g : groups)
    out += fmt::format("{}\t{}\t{}\t{}\n", g.name, g.pairs.size(), g.used_pairs,
                       g.mean_src ? fmt_real(*g.mean_src) : "NA");
  return out;
}

inline std::string scores_table(const std::vector<IndicatorScores>& suite) {
  std::set<std::string> ids;
  for (const auto& s : suite) {
    for (const auto& [id, _] : s.scores) ids.insert(id);
    ids.insert(s.missing.begin(), s.missing.end());
  }
  std::string out = "image_id";
  for (const auto& s : suite) out += "\t" + s.indicator_name;
  out += "\n";
  for (const auto& id : ids) {
    out += id;
    for (const auto& s : suite) {
      auto it = s.scores.find(id);
      out += "\t" + (it == s.scores.end() ? std::string("NA") : fmt::format("{:.9g}", it->second));
    }
    out += "\n";
  }
  return out;
}

inline nlohmann::json contribution_json(const ContributionReport& r) {
  auto image = [](const ImageContribution& c) {
    return nlohmann::json{{"image_id", c.image_id}, {"score", c.score}, {"contributions", c.contributions}};
  };
  return {{"class_id", r.class_id}, {"bias", r.bias}, {"best", image(r.best)}, {"worst", image(r.worst)}};
}

// ---------------------------------------------------------------------------
// Experiment driver

struct ExperimentReport {
  std::vector<IndicatorScores> train_suite;
  std::vector<IndicatorScores> test_suite;
  SuiteModels suite_models;
  std::vector<EvaluationRow> indicators;
  CorrelationMatrix correlation;
  std::vector<EvaluationRow> predictions;
  std::map<std::string, PredictorModel> models;  // by prediction row name
  std::vector<GroupAgreement> agreement;
  std::vector<ContributionReport> contributions;
  std::string contributions_from;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;
};

inline TrainOptions experiment_train_options(const ExperimentConfig& cfg) {
  TrainOptions opt;
  opt.seed = cfg.seed;
  opt.epochs = cfg.epochs;
  return opt;
}

// Auxiliary models: loaded from suite.model_dir when it holds a saved set,
// trained on the train split otherwise.
inline SuiteModels prepare_suite_models(const Dataset& ds, const SuiteConfig& suite) {
  if (suite.model_dir && std::filesystem::exists(*suite.model_dir / "prototypes.json"))
    return load_suite_models(*suite.model_dir);
  return train_suite_models(ds, suite);
}

// Runs every configured stage. A failing stage is recorded in `errors` and
// the remaining stages still run.
inline ExperimentReport run_experiment(const Dataset& ds, const ExperimentConfig& cfg) {
  ExperimentReport rep;
  auto stage = [&](const std::string& what, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      rep.errors.push_back(fmt::format("{}: {}", what, e.what()));
      log().error("{}: {}", what, e.what());
    }
  };

  const std::vector<std::string> train_ids = ds.ids(Split::train);
  const std::vector<std::string> test_ids = ds.ids(Split::test);
  const Dataset train = ds.subset(train_ids);
  const auto ratings = ds.image_ratings();
  const TrainOptions opt = experiment_train_options(cfg);

  SuiteModels& models = rep.suite_models;
  bool have_suite = false;
  stage("indicator suite", [&] {
    models = prepare_suite_models(ds, cfg.suite);
    rep.train_suite = compute_indicator_suite(ds, models, cfg.suite, train_ids);
    rep.test_suite = compute_indicator_suite(ds, models, cfg.suite, test_ids);
    have_suite = true;
  });
  for (const auto& s : rep.test_suite) {
    if (!s.missing.empty())
      rep.warnings.push_back(fmt::format("indicator '{}': {} test images not scored", s.indicator_name, s.missing.size()));
    stage("evaluate " + s.indicator_name, [&] { rep.indicators.push_back(evaluate_indicator(s, ratings)); });
  }
  if (have_suite) stage("correlation", [&] { rep.correlation = indicator_correlation_matrix(rep.test_suite); });

  auto add_prediction = [&](const std::string& name, const std::map<std::string, double>& scores) {
    rep.predictions.push_back(evaluate_scores(name, scores, ratings));
  };
  auto note_selection = [&](const std::string& name, const PredictorModel& pm) {
    if (pm.selection.fallback) rep.warnings.push_back(name + ": " + pm.selection.warning);
  };

  if (have_suite && cfg.fusion_average)
    stage("Average", [&] {
      const Whitener w = fit_suite_whitener(rep.train_suite);
      add_prediction("Average", fuse_average(rep.test_suite, w).scores);
    });
  if (have_suite)
    for (Objective o : cfg.fusion_learned) {
      const std::string name = "SVM-" + short_name(o);
      stage(name, [&] {
        PredictorModel pm = fuse_learned(train, rep.train_suite, o, cfg.lambda_grid, opt);
        add_prediction(name, apply_fusion(pm, rep.test_suite, name).scores);
        note_selection(name, pm);
        rep.models.emplace(name, std::move(pm));
      });
    }

  if (cfg.dip.enabled)
    for (Objective o : cfg.dip.objectives) {
      const std::string name = "DIP-" + short_name(o);
      stage(name, [&] {
        const FeatureMatrix& fm = ds.feature(cfg.dip.features);
        std::vector<std::string> cols;
        for (std::size_t k = 0; k < fm.dim; ++k) cols.push_back(fmt::format("{}[{}]", fm.feature_name, k));
        PredictorModel pm = train_predictor(train, fm.rows, cols, o, cfg.lambda_grid, opt);
        const auto scores = pm.score(fm.rows);
        std::map<std::string, double> test_scores;
        for (const auto& id : test_ids)
          if (auto it = scores.find(id); it != scores.end()) test_scores.emplace(id, it->second);
        add_prediction(name, test_scores);
        note_selection(name, pm);

        if (cfg.dip.combine && have_suite) {
          const std::string combined = "Combined-" + short_name(o);
          IndicatorScores dip_train{name, {}, Provenance::predicted, {}};
          IndicatorScores dip_test{name, test_scores, Provenance::predicted, {}};
          for (const auto& id : train_ids)
            if (auto it = scores.find(id); it != scores.end()) dip_train.scores.emplace(id, it->second);
          auto train_suite = rep.train_suite;
          auto test_suite = rep.test_suite;
          train_suite.push_back(std::move(dip_train));
          test_suite.push_back(std::move(dip_test));
          stage(combined, [&] {
            PredictorModel cm = fuse_learned(train, train_suite, o, cfg.lambda_grid, opt);
            add_prediction(combined, apply_fusion(cm, test_suite, combined).scores);
            note_selection(combined, cm);
            rep.models.emplace(combined, std::move(cm));
          });
        }
        rep.models.emplace(name, std::move(pm));
      });
    }

  if (!cfg.agreement_groups.empty())
    stage("agreement", [&] { rep.agreement = annotator_agreement(ds.ratings, cfg.agreement_groups); });

  if (cfg.contributions && have_suite) {
    for (const char* name : {"SVM-rank", "SVM-bin"})
      if (rep.models.contains(name)) {
        rep.contributions_from = name;
        break;
      }
    if (!rep.contributions_from.empty()) {
      const PredictorModel& pm = rep.models.at(rep.contributions_from);
      std::set<int> classes;
      for (const auto& id : test_ids) classes.insert(ds.record(id).class_id);
      for (int c : classes)
        stage(fmt::format("contributions class {}", c), [&] {
          rep.contributions.push_back(contribution_report(pm.model, pm.whitener, rep.test_suite, ds, c));
        });
    }
  }
  return rep;
}

inline std::string model_file_name(const std::string& row_name) {
  std::string s = row_name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s + ".model";
}

inline std::string summary_text(const ExperimentReport& rep, const ExperimentConfig& cfg) {
  std::string out = fmt::format("iconika {} experiment, seed {}\n\n", kVersion, cfg.seed);
  auto block = [&](const std::string& title, const std::vector<EvaluationRow>& rows) {
    out += title + "\n";
    for (const auto& r : rows)
      out += fmt::format("  {:<24} n={:<6} SRC={:>9}  p={}  AP={}\n", r.name, r.n, fmt_real(r.src), fmt_p(r.p_value),
                         r.ap ? fmt_real(*r.ap) : "NA");
    out += "\n";
  };
  block("Indicators (test split)", rep.indicators);
  block("Predictors (test split)", rep.predictions);
  if (!rep.agreement.empty()) {
    out += "Annotator agreement (group statistic: mean of pairwise SRC)\n";
    for (const auto& g : rep.agreement)
      out += fmt::format("  {:<12} pairs={} used={} mean SRC={}\n", g.name, g.pairs.size(), g.used_pairs,
                         g.mean_src ? fmt_real(*g.mean_src) : "NA");
    out += "\n";
  }
  if (!rep.warnings.empty()) {
    out += "Warnings\n";
    for (const auto& w : rep.warnings) out += "  " + w + "\n";
    out += "\n";
  }
  if (!rep.errors.empty()) {
    out += "Errors\n";
    for (const auto& e : rep.errors) out += "  " + e + "\n";
  }
  return out;
}

// Write the report bundle. Contents depend only on the data, config and seed.
inline void write_bundle(const ExperimentReport& rep, const ExperimentConfig& cfg, const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  fs::create_directories(out / "models");
  write_file(out / "indicators.tsv", evaluation_table(rep.indicators));
  write_file(out / "correlation.tsv", correlation_table(rep.correlation));
  write_file(out / "prediction.tsv", evaluation_table(rep.predictions, "method"));
  write_file(out / "agreement.tsv", agreement_table(rep.agreement));
  write_file(out / "agreement_groups.tsv", agreement_summary_table(rep.agreement));
  write_file(out / "scores.tsv", scores_table(rep.test_suite));
  std::string contrib;
  for (const auto& c : rep.contributions) contrib += contribution_json(c).dump() + "\n";
  write_file(out / "contributions.jsonl", contrib);
  write_file(out / "summary.txt", summary_text(rep, cfg));

  nlohmann::json hashes = nlohmann::json::object();
  nlohmann::json lambdas = nlohmann::json::object();
  for (const auto& [name, pm] : rep.models) {
    const std::string file = model_file_name(name);
    const std::string bytes = serialize_model(pm.model, pm.whitener);
    write_file(out / "models" / file, bytes);
    hashes[file] = sha256_hex(bytes);
    lambdas[name] = pm.model.lambda;
  }
  const std::string config_text = cfg.raw.dump();
  nlohmann::json manifest = {{"format", "iconika-bundle"},
                             {"version", kVersion},
                             {"seed", cfg.seed},
                             {"config", cfg.raw},
                             {"config_sha256", sha256_hex(config_text)},
                             {"models", hashes},
                             {"lambdas", lambdas},
                             {"contributions_from", rep.contributions_from},
                             {"warnings", rep.warnings},
                             {"errors", rep.errors}};
  write_file(out / "bundle_manifest.json", manifest.dump(2) + "\n");
}

}  // namespace iconika
