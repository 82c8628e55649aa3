#include "iconika/pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "iconika/synthetic.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/planted.hpp"

namespace {

using namespace iconika;

IndicatorScores scores_of(const std::string& name, const std::map<std::string, double>& m) {
  return {name, m, Provenance::oracle, {}};
}

std::map<std::string, double> random_map(Rng& rng, int n, const std::string& prefix = "i") {
  std::map<std::string, double> m;
  for (int i = 0; i < n; ++i) m[fmt::format("{}{:04}", prefix, i)] = standard_normal(rng);
  return m;
}

TEST(EvaluateIndicator, PerfectAndAntiIndicators) {
  const std::map<std::string, double> ratings = {{"a", 0}, {"b", 1}, {"c", 2}, {"d", 2}, {"e", 1}};
  const auto perfect = evaluate_indicator(scores_of("p", ratings), ratings);
  EXPECT_DOUBLE_EQ(perfect.src, 1.0);
  EXPECT_DOUBLE_EQ(*perfect.ap, 1.0);
  EXPECT_EQ(perfect.n, 5u);
  std::map<std::string, double> neg;
  for (const auto& [id, r] : ratings) neg[id] = -r;
  EXPECT_DOUBLE_EQ(evaluate_indicator(scores_of("n", neg), ratings).src, -1.0);
}

TEST(EvaluateIndicator, UsesIntersectionAndMatchesOracle) {
  Rng rng(3);
  std::map<std::string, double> scores = random_map(rng, 30), ratings;
  for (const auto& [id, s] : scores) ratings[id] = static_cast<double>(uniform_index(rng, 3));
  scores["only_scored"] = 5;
  ratings["only_rated"] = 2;
  const auto row = evaluate_indicator(scores_of("x", scores), ratings);
  EXPECT_EQ(row.n, 30u);
  std::vector<double> a, b, ids_ratings;
  std::vector<std::string> ids;
  for (const auto& [id, s] : scores)
    if (ratings.contains(id)) {
      a.push_back(s);
      b.push_back(ratings.at(id));
      ids.push_back(id);
    }
  EXPECT_NEAR(row.src, oracle::spearman(a, b), 1e-12);
  EXPECT_NEAR(*row.ap, oracle::average_precision(a, b, 1.5, ids), 1e-12);
}

TEST(EvaluateIndicator, ErrorsAndMissingAp) {
  EXPECT_THROW(evaluate_indicator(scores_of("x", {{"a", 1}}), {{"b", 1}}), ValidationError);
  const auto row = evaluate_indicator(scores_of("x", {{"a", 1}, {"b", 2}, {"c", 0}}), {{"a", 0}, {"b", 1}, {"c", 1}});
  EXPECT_FALSE(row.ap.has_value());
}

TEST(EvaluateIndicator, InvariantToMonotoneTransforms) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::map<std::string, double> scores = random_map(rng, 40), ratings;
    for (const auto& [id, s] : scores) ratings[id] = static_cast<double>(uniform_index(rng, 3));
    ratings.begin()->second = 2;
    std::map<std::string, double> transformed;
    for (const auto& [id, s] : scores) transformed[id] = std::exp(3 * s) - 7;
    const auto a = evaluate_indicator(scores_of("x", scores), ratings);
    const auto b = evaluate_indicator(scores_of("x", transformed), ratings);
    EXPECT_DOUBLE_EQ(a.src, b.src);
    EXPECT_DOUBLE_EQ(*a.ap, *b.ap);
  }
}

TEST(EvaluateIndicator, NullDistributionSanity) {
  Rng rng(5);
  int quiet = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    std::map<std::string, double> scores = random_map(rng, 1000), ratings;
    for (const auto& [id, s] : scores) ratings[id] = static_cast<double>(uniform_index(rng, 3));
    const auto row = evaluate_indicator(scores_of("r", scores), ratings);
    quiet += std::abs(row.src) < 0.1 && row.p_value > 0.05;
  }
  EXPECT_GE(quiet, 90);
}

TEST(CorrelationMatrix, Examples) {
  Rng rng(6);
  const auto m1 = indicator_correlation_matrix({scores_of("a", random_map(rng, 10))});
  ASSERT_EQ(m1.src.size(), 1u);
  EXPECT_EQ(*m1.src[0][0], 1.0);

  const auto base = random_map(rng, 50);
  const auto dup = indicator_correlation_matrix({scores_of("a", base), scores_of("b", base)});
  EXPECT_DOUBLE_EQ(*dup.src[0][1], 1.0);

  const auto m = indicator_correlation_matrix(
      {scores_of("a", random_map(rng, 1000)), scores_of("b", random_map(rng, 1000)), scores_of("c", random_map(rng, 1000))});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(*m.src[i][i], 1.0);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(m.src[i][j], m.src[j][i]);
      if (i != j) {
        EXPECT_LT(std::abs(*m.src[i][j]), 0.1);
      }
    }
  }
}

TEST(CorrelationMatrix, TooFewCommonImagesFlagged) {
  const auto m = indicator_correlation_matrix({scores_of("a", {{"x", 1}, {"y", 2}}), scores_of("b", {{"y", 1}, {"z", 3}})});
  EXPECT_FALSE(m.src[0][1].has_value());
  EXPECT_FALSE(m.src[1][0].has_value());
  EXPECT_EQ(correlation_table(m), "indicator\ta\tb\na\t1.000000\tNA\nb\tNA\t1.000000\n");
}

TEST(FuseAverage, Examples) {
  const Whitener w{{0, 0}, {1, 1}, 1e-12};
  const auto fused = fuse_average({scores_of("a", {{"x", 0.5}}), scores_of("b", {{"x", -0.5}})}, w);
  EXPECT_EQ(fused.scores.at("x"), 0.0);

  Rng rng(7);
  const auto single = scores_of("a", random_map(rng, 20));
  const Whitener ws = fit_suite_whitener({single});
  const auto f1 = fuse_average({single}, ws);
  for (const auto& [id, v] : single.scores) EXPECT_DOUBLE_EQ(f1.scores.at(id), (v - ws.mean[0]) / ws.std[0]);

  const auto a = scores_of("a", random_map(rng, 20)), b = scores_of("b", random_map(rng, 20)),
             c = scores_of("c", random_map(rng, 20));
  const Whitener w3{{1, -2, 0.5}, {2, 0.5, 4}, 1e-12};
  const auto f3 = fuse_average({a, b, c}, w3);
  for (const auto& [id, v] : f3.scores)
    EXPECT_NEAR(v, ((a.scores.at(id) - 1) / 2 + (b.scores.at(id) + 2) / 0.5 + (c.scores.at(id) - 0.5) / 4) / 3, 1e-12);
  EXPECT_THROW(fuse_average({}, w3), std::invalid_argument);
}

TEST(FuseAverage, ExcludesImagesMissingAnIndicator) {
  IndicatorScores a = scores_of("a", {{"x", 1}, {"y", 2}, {"z", 3}});
  IndicatorScores b = scores_of("b", {{"x", 1}, {"z", 3}});
  b.missing = {"y"};
  const auto f = fuse_average({a, b}, Whitener{{0, 0}, {1, 1}, 1e-12});
  EXPECT_EQ(f.scores.size(), 2u);
  EXPECT_EQ(f.missing, std::vector<std::string>{"y"});
}

TEST(SuiteWhitener, FitsEachIndicatorOnItsOwnScores) {
  const Whitener w = fit_suite_whitener({scores_of("a", {{"x", 1}, {"y", 2}, {"z", 3}}), scores_of("b", {{"x", 4}})});
  EXPECT_EQ(w.mean, (Vector{2, 4}));
  EXPECT_DOUBLE_EQ(w.std[0], std::sqrt(2.0 / 3.0));
  EXPECT_EQ(w.std[1], 1.0);
  EXPECT_THROW(fit_suite_whitener({scores_of("a", {})}), ValidationError);
}

struct FusionRun {
  Dataset train;
  std::vector<IndicatorScores> train_suite, test_suite;
  std::map<std::string, double> ratings;
};

FusionRun fusion_run(const planted::FusionDataset& fd, const SuiteConfig& cfg) {
  const Dataset& ds = fd.dataset;
  FusionRun r;
  r.train = ds.subset(ds.ids(Split::train));
  r.train_suite = compute_indicator_suite(ds, {}, cfg, ds.ids(Split::train));
  r.test_suite = compute_indicator_suite(ds, {}, cfg, ds.ids(Split::test));
  r.ratings = ds.image_ratings();
  return r;
}

const std::vector<double> kGrid{1e-3, 1e-2, 1e-1, 1.0};

TEST(FuseLearned, LeakedRatingsGiveNearPerfectRanking) {
  planted::FusionOptions o;
  o.raters = 12;
  o.leak_ratings = true;
  const auto fd = planted::make_fusion_dataset(1, o);
  const auto run = fusion_run(fd, planted::external_suite(3, true));
  TrainOptions opt;
  const PredictorModel pm = fuse_learned(run.train, run.train_suite, Objective::ranking, kGrid, opt);
  const auto fused = apply_fusion(pm, run.test_suite, "SVM-rank");
  EXPECT_GE(evaluate_scores("SVM-rank", fused.scores, run.ratings).src, 0.99);
}

TEST(FuseLearned, RecoversPlantedSigns) {
  for (std::uint64_t seed : {1, 2, 3}) {
    planted::FusionOptions o;
    o.indicator_noise = {0.5, 0.8, 1.0};
    const auto fd = planted::make_fusion_dataset(seed, o);
    const auto run = fusion_run(fd, planted::external_suite(3));
    for (Objective obj : {Objective::binary, Objective::ranking}) {
      const PredictorModel pm = fuse_learned(run.train, run.train_suite, obj, kGrid, TrainOptions{});
      EXPECT_EQ(pm.model.columns, (std::vector<std::string>{"ind1", "ind2", "ind3"}));
      for (double w : pm.model.w) EXPECT_GT(w, 0.0) << to_string(obj) << " seed " << seed;
    }
  }
}

TEST(FuseLearned, SingleIndicatorKeepsItsRanking) {
  const auto fd = planted::make_fusion_dataset(4);
  const auto run = fusion_run(fd, planted::external_suite(1));
  const PredictorModel pm = fuse_learned(run.train, run.train_suite, Objective::ranking, kGrid, TrainOptions{});
  ASSERT_GT(pm.model.w[0], 0.0);
  const auto fused = apply_fusion(pm, run.test_suite, "f");
  const auto& raw = run.test_suite[0].scores;
  for (const auto& [i, si] : raw)
    for (const auto& [j, sj] : raw)
      if (si < sj) {
        EXPECT_LT(fused.scores.at(i), fused.scores.at(j));
      }
}

TEST(FuseLearned, FusionBeatsSingleIndicators) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto fd = planted::make_fusion_dataset(100 + seed);
    const auto run = fusion_run(fd, planted::external_suite(3));
    double best_single = -1;
    for (const auto& s : run.test_suite) best_single = std::max(best_single, evaluate_indicator(s, run.ratings).src);
    const double avg =
        evaluate_scores("avg", fuse_average(run.test_suite, fit_suite_whitener(run.train_suite)).scores, run.ratings).src;
    const PredictorModel pm = fuse_learned(run.train, run.train_suite, Objective::ranking, kGrid, TrainOptions{});
    const double learned = evaluate_scores("l", apply_fusion(pm, run.test_suite, "l").scores, run.ratings).src;
    wins += avg > best_single && learned > best_single && learned >= avg - 0.02;
  }
  EXPECT_GE(wins, 4);
}

TEST(FuseLearned, ColumnMismatchRejected) {
  const auto fd = planted::make_fusion_dataset(4);
  const auto run = fusion_run(fd, planted::external_suite(2));
  const PredictorModel pm = fuse_learned(run.train, run.train_suite, Objective::ranking, kGrid, TrainOptions{});
  auto swapped = run.test_suite;
  std::swap(swapped[0], swapped[1]);
  EXPECT_THROW(apply_fusion(pm, swapped, "x"), ValidationError);
}

std::vector<RatingRecord> annotator(const std::string& who, const std::vector<int>& r) {
  std::vector<RatingRecord> out;
  for (std::size_t i = 0; i < r.size(); ++i) out.push_back({who, "b", fmt::format("img{:02}", i), r[i], 0});
  return out;
}

std::vector<RatingRecord> concat(std::initializer_list<std::vector<RatingRecord>> parts) {
  std::vector<RatingRecord> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

TEST(Agreement, IdenticalAndReversed) {
  const std::vector<int> r = {0, 1, 2, 2, 1, 0, 1, 2, 0, 1};
  std::vector<int> rev(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) rev[i] = 2 - r[i];
  const auto ratings = concat({annotator("a", r), annotator("b", r), annotator("c", rev)});
  const auto g = annotator_agreement(ratings, {{"same", {"a", "b"}}, {"rev", {"a", "c"}}});
  ASSERT_EQ(g.size(), 2u);
  EXPECT_DOUBLE_EQ(*g[0].mean_src, 1.0);
  EXPECT_DOUBLE_EQ(g[0].pairs[0].src, 1.0);
  EXPECT_DOUBLE_EQ(*g[1].mean_src, -1.0);
  EXPECT_EQ(g[0].pairs[0].n, 10u);
}

TEST(Agreement, TwoIdenticalOneRandom) {
  Rng rng(10);
  std::vector<int> r(50), noise(50);
  for (auto& v : r) v = static_cast<int>(uniform_index(rng, 3));
  for (auto& v : noise) v = static_cast<int>(uniform_index(rng, 3));
  const auto g = annotator_agreement(concat({annotator("a", r), annotator("b", r), annotator("c", noise)}),
                                     {{"g", {"a", "b", "c"}}});
  const std::vector<double> rd(r.begin(), r.end()), nd(noise.begin(), noise.end());
  const double rho_hat = oracle::spearman(rd, nd);
  EXPECT_LT(std::abs(rho_hat), 0.3);
  EXPECT_NEAR(*g[0].mean_src, (1 + 2 * rho_hat) / 3, 1e-12);
  EXPECT_EQ(g[0].pairs.size(), 3u);
  EXPECT_LT(g[0].pairs[0].p_value, 1e-10);
}

TEST(Agreement, DegeneratePairsExcluded) {
  const auto ratings = concat({annotator("a", {0, 1, 2, 1}), annotator("b", {1, 1, 1, 1}), annotator("c", {0, 1, 2, 2}),
                               annotator("d", {})});
  const auto g = annotator_agreement(ratings, {{"g", {"a", "b", "c", "d"}}});
  ASSERT_EQ(g[0].pairs.size(), 6u);
  EXPECT_EQ(g[0].used_pairs, 1u);  // only a-c
  EXPECT_TRUE(g[0].pairs[0].degenerate);
  EXPECT_NEAR(*g[0].mean_src, g[0].pairs[1].src, 0);
  // n = 4: exact permutation p-value
  std::vector<double> a{0, 1, 2, 1}, c{0, 1, 2, 2};
  EXPECT_DOUBLE_EQ(g[0].pairs[1].p_value, oracle::permutation_pvalue(a, c));
}

struct ContributionFixture {
  Dataset ds;
  std::vector<IndicatorScores> suite;
  LinearModel model;
  Whitener whitener;
};

ContributionFixture contribution_fixture() {
  ContributionFixture f;
  for (int i = 0; i < 6; ++i) {
    ImageRecord r;
    r.image_id = fmt::format("im{}", i);
    r.class_id = i < 5 ? 1 : 2;
    r.width = r.height = 10;
    f.ds.records.emplace(r.image_id, r);
  }
  f.suite = {scores_of("a", {{"im0", 1}, {"im1", 2}, {"im2", 3}, {"im3", 2}, {"im4", 0}, {"im5", 9}}),
             scores_of("b", {{"im0", 5}, {"im1", 1}, {"im2", 1}, {"im3", 1}, {"im4", 2}, {"im5", 9}})};
  f.model.w = {0.7, -0.2};
  f.model.b = 0.125;
  f.model.columns = {"a", "b"};
  f.whitener = {{1.5, 2}, {2, 0.5}, 1e-12};
  return f;
}

TEST(Contributions, BestWorstAndDecomposition) {
  const auto f = contribution_fixture();
  const auto rep = contribution_report(f.model, f.whitener, f.suite, f.ds, 1);
  EXPECT_EQ(rep.best.image_id, "im2");
  EXPECT_EQ(rep.worst.image_id, "im0");
  for (const auto* c : {&rep.best, &rep.worst}) {
    double sum = rep.bias;
    for (const auto& [name, v] : c->contributions) sum += v;
    EXPECT_NEAR(sum, c->score, 1e-9);
  }
  const auto single = contribution_report(f.model, f.whitener, f.suite, f.ds, 2);
  EXPECT_EQ(single.best.image_id, "im5");
  EXPECT_EQ(single.worst.image_id, "im5");
  EXPECT_THROW(contribution_report(f.model, f.whitener, f.suite, f.ds, 3), ValidationError);
}

TEST(Contributions, ZeroedWeightRemovesExactlyItsTerm) {
  auto f = contribution_fixture();
  const auto full = contribution_of(f.model, f.whitener, {"a", "b"}, "im1", {2, 1});
  f.model.w[1] = 0;
  const auto ablated = contribution_of(f.model, f.whitener, {"a", "b"}, "im1", {2, 1});
  EXPECT_EQ(ablated.contributions.at("b"), 0.0);
  EXPECT_EQ(ablated.contributions.at("a"), full.contributions.at("a"));
  EXPECT_NEAR(full.score - ablated.score, full.contributions.at("b"), 1e-12);
}

TEST(Contributions, TiesGoToSmallerId) {
  auto f = contribution_fixture();
  f.suite = {scores_of("a", {{"im0", 1}, {"im1", 1}, {"im2", 1}}), scores_of("b", {{"im0", 1}, {"im1", 1}, {"im2", 1}})};
  const auto rep = contribution_report(f.model, f.whitener, f.suite, f.ds, 1);
  EXPECT_EQ(rep.best.image_id, "im0");
  EXPECT_EQ(rep.worst.image_id, "im0");
}

nlohmann::json experiment_json() {
  return nlohmann::json::parse(R"({
    "seed": 3,
    "suite": {"indicators": [
      {"name":"BB-size","type":"bb_size","source":"gt"},
      {"name":"BB-dist2center","type":"bb_dist2center","source":"gt"},
      {"name":"Occlusion","type":"occlusion"},
      {"name":"Aesthetic","type":"external","score":"aesthetic"},
      {"name":"I2C-Att-Orac","type":"i2c_att"},
      {"name":"DAP-Orac","type":"dap","source":"oracle"},
      {"name":"Cluster-FV","type":"cluster","features":"fv"}],
      "aux_epochs": 20},
    "lambda_grid": [0.001, 0.01, 0.1],
    "epochs": 60,
    "dip": {"enabled": true, "features": "fv"},
    "agreement": {"groups": [{"name": "g1", "annotators": ["ann01", "ann02"]}]}
  })");
}

Dataset experiment_dataset() {
  SyntheticOptions o;
  o.classes = 4;
  o.images_per_class = 30;
  o.seed = 11;
  Dataset ds = make_synthetic_dataset(o).dataset;
  // second rating pass on a few test batches so agreement has overlap
  std::vector<RatingRecord> extra;
  for (const auto& r : ds.ratings)
    if (r.annotator_id == "ann01") extra.push_back({"ann02", r.batch_id, r.image_id, (r.rating + (r.timestamp % 3 == 0)) % 3, 0});
  std::erase_if(extra, [&](const RatingRecord& e) {
    return std::any_of(ds.ratings.begin(), ds.ratings.end(),
                       [&](const auto& r) { return r.annotator_id == e.annotator_id && r.image_id == e.image_id; });
  });
  ds.ratings.insert(ds.ratings.end(), extra.begin(), extra.end());
  std::sort(ds.ratings.begin(), ds.ratings.end());
  return ds;
}

TEST(Experiment, BundleIsCompleteAndByteIdentical) {
  const Dataset ds = experiment_dataset();
  const ExperimentConfig cfg = experiment_config_from_json(experiment_json());
  fixtures::TempDir a, b;
  const auto rep = run_experiment(ds, cfg);
  EXPECT_TRUE(rep.errors.empty()) << rep.errors.front();
  EXPECT_EQ(rep.indicators.size(), 7u);
  std::vector<std::string> methods;
  for (const auto& r : rep.predictions) methods.push_back(r.name);
  EXPECT_EQ(methods, (std::vector<std::string>{"Average", "SVM-bin", "SVM-rank", "DIP-bin", "Combined-bin", "DIP-rank",
                                               "Combined-rank"}));
  EXPECT_EQ(rep.contributions.size(), 4u);
  EXPECT_EQ(rep.contributions_from, "SVM-rank");
  ASSERT_EQ(rep.agreement.size(), 1u);
  EXPECT_GT(rep.agreement[0].pairs[0].n, 10u);
  write_bundle(rep, cfg, a.path());
  write_bundle(run_experiment(ds, cfg), cfg, b.path());

  std::vector<std::string> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path()))
    if (e.is_regular_file()) files.push_back(std::filesystem::relative(e.path(), a.path()).string());
  std::sort(files.begin(), files.end());
  for (const char* f : {"indicators.tsv", "correlation.tsv", "prediction.tsv", "agreement.tsv", "agreement_groups.tsv",
                        "contributions.jsonl", "summary.txt", "bundle_manifest.json", "scores.tsv", "models/svm-rank.model"})
    EXPECT_TRUE(std::find(files.begin(), files.end(), f) != files.end()) << f;
  for (const auto& f : files) EXPECT_EQ(fixtures::read_text(a / f), fixtures::read_text(b / f)) << f;

  const auto manifest = nlohmann::json::parse(fixtures::read_text(a / "bundle_manifest.json"));
  EXPECT_EQ(manifest.at("seed"), 3);
  EXPECT_EQ(manifest.at("models").at("svm-rank.model"), sha256_hex(fixtures::read_text(a / "models/svm-rank.model")));
  EXPECT_EQ(load_model(a / "models/svm-rank.model").model, rep.models.at("SVM-rank").model);
}

TEST(Experiment, DisablingDipDropsOnlyDipRows) {
  const Dataset ds = experiment_dataset();
  auto j = experiment_json();
  const auto with = run_experiment(ds, experiment_config_from_json(j));
  j["dip"]["enabled"] = false;
  const auto without = run_experiment(ds, experiment_config_from_json(j));
  std::vector<EvaluationRow> kept;
  for (const auto& r : with.predictions)
    if (r.name.rfind("DIP", 0) != 0 && r.name.rfind("Combined", 0) != 0) kept.push_back(r);
  EXPECT_EQ(without.predictions, kept);
  EXPECT_EQ(without.indicators, with.indicators);
}

TEST(Experiment, FailingStageKeepsOtherResults) {
  const Dataset ds = experiment_dataset();
  auto j = experiment_json();
  j["dip"]["features"] = "nope";
  const auto rep = run_experiment(ds, experiment_config_from_json(j));
  EXPECT_EQ(rep.errors.size(), 2u);
  EXPECT_NE(rep.errors[0].find("nope"), std::string::npos);
  EXPECT_EQ(rep.predictions.size(), 3u);
}

TEST(ExperimentConfig, Validation) {
  auto j = experiment_json();
  const auto cfg = experiment_config_from_json(j);
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.lambda_grid.size(), 3u);
  EXPECT_EQ(cfg.suite.indicators.size(), 7u);
  for (auto mutate : std::vector<std::function<void(nlohmann::json&)>>{
           [](auto& x) { x["lambda_grid"] = nlohmann::json::array(); },
           [](auto& x) { x["lambda_grid"] = {0.1, -1}; },
           [](auto& x) { x["epochs"] = 0; },
           [](auto& x) { x.erase("suite"); },
           [](auto& x) { x["dip"].erase("features"); },
           [](auto& x) { x["fusion"] = {{"learned", {"sideways"}}}; },
           [](auto& x) { x["seed"] = "zero"; },
       }) {
    auto bad = j;
    mutate(bad);
    EXPECT_THROW(experiment_config_from_json(bad), ValidationError) << bad.dump();
  }
}

}  // namespace
