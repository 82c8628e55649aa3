#include "iconika/indicators.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "iconika/synthetic.hpp"
#include "support/fixtures.hpp"

namespace {

using namespace iconika;

ImageRecord record_with_box(double x, double y, double w, double h, int width = 100, int height = 100) {
  ImageRecord r;
  r.image_id = "img";
  r.class_id = 1;
  r.width = width;
  r.height = height;
  r.gt_box = BoundingBox{x, y, w, h, std::nullopt};
  return r;
}

ClassPrototype attribute_prototype(std::vector<bool> sig) {
  ClassPrototype p;
  p.class_id = 1;
  Vector mean(sig.size());
  for (std::size_t m = 0; m < sig.size(); ++m) mean[m] = sig[m] ? 1.0 : 0.0;
  p.attr_mean = mean;
  p.attr_signature = std::move(sig);
  return p;
}

TEST(BoxIndicators, Size) {
  EXPECT_EQ(value_of(bb_size(record_with_box(0, 0, 100, 100), BoxSource::gt)), 1.0);
  EXPECT_EQ(value_of(bb_size(record_with_box(10, 20, 50, 50), BoxSource::gt)), 0.25);
  const auto missing = bb_size(record_with_box(0, 0, 10, 10), BoxSource::det);
  ASSERT_FALSE(has_value(missing));
  EXPECT_EQ(std::get<AnnotationMissing>(missing).what, "det_box");
}

TEST(BoxIndicators, Dist2Center) {
  EXPECT_EQ(value_of(bb_dist2center(record_with_box(25, 25, 50, 50), BoxSource::gt)), 0.0);
  // centre at (0,0) and at (100,100)
  EXPECT_NEAR(value_of(bb_dist2center(record_with_box(-10, -10, 20, 20), BoxSource::gt)), -0.5, 1e-15);
  EXPECT_NEAR(value_of(bb_dist2center(record_with_box(90, 90, 20, 20), BoxSource::gt)), -0.5, 1e-15);
  EXPECT_FALSE(has_value(bb_dist2center(record_with_box(0, 0, 1, 1), BoxSource::det)));
  // off-square image: diagonal 500, centre offset (30,40)
  EXPECT_NEAR(value_of(bb_dist2center(record_with_box(180, 140, 0 + 100, 100, 400, 300), BoxSource::gt)), -50.0 / 500.0,
              1e-15);
}

TEST(Occlusion, CountsVisibleParts) {
  ImageRecord r = record_with_box(0, 0, 1, 1);
  r.parts = std::vector<bool>(15, true);
  EXPECT_EQ(value_of(occlusion_score(r)), 15.0);
  r.parts = std::vector<bool>(15, false);
  EXPECT_EQ(value_of(occlusion_score(r)), 0.0);
  for (int i = 0; i < 9; ++i) (*r.parts)[static_cast<std::size_t>(2 * i % 15)] = true;
  EXPECT_EQ(value_of(occlusion_score(r)), 9.0);
  r.parts.reset();
  EXPECT_FALSE(has_value(occlusion_score(r)));
}

TEST(External, PassthroughModelAndUnknownName) {
  ImageRecord r = record_with_box(0, 0, 1, 1);
  r.external_scores["aesthetic"] = 0.7;
  r.external_scores["memorability"] = 0.1;
  EXPECT_EQ(external_score(r, "aesthetic"), 0.7);
  LinearModel m;
  m.w = {1.0, 0.0};
  EXPECT_EQ(external_score(m, Vector{0.3, 9.0}), 0.3);
  try {
    external_score(r, "foo");
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("aesthetic, memorability"), std::string::npos) << e.what();
  }
}

TEST(Prototypes, MeansAndSignatureTie) {
  Dataset ds;
  FeatureMatrix fm{"f", 2, {}};
  const std::vector<std::pair<Vector, std::vector<bool>>> rows = {{{0, 0}, {true, false}}, {{2, 2}, {true, true}}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ImageRecord r = record_with_box(0, 0, 1, 1);
    r.image_id = fmt::format("a{}", i);
    r.attributes = rows[i].second;
    fm.rows[r.image_id] = rows[i].first;
    ds.split[r.image_id] = Split::train;
    ds.records.emplace(r.image_id, r);
  }
  ImageRecord single = record_with_box(0, 0, 1, 1);
  single.image_id = "s";
  single.class_id = 2;
  fm.rows["s"] = {5, -3};
  ds.split["s"] = Split::train;
  ds.records.emplace("s", single);

  const auto protos = build_prototypes(ds, &fm);
  EXPECT_EQ(protos.at(1).mu, (Vector{1, 1}));
  EXPECT_EQ(*protos.at(1).attr_mean, (Vector{1, 0.5}));
  EXPECT_EQ(*protos.at(1).attr_signature, (std::vector<bool>{true, true}));
  EXPECT_EQ(protos.at(2).mu, (Vector{5, -3}));
  EXPECT_FALSE(protos.at(2).attr_mean.has_value());

  fm.rows.erase("s");
  EXPECT_THROW(build_prototypes(ds, &fm), ValidationError);
}

TEST(Prototypes, IgnoreTestImages) {
  fixtures::TempDir dir;
  const Dataset ds = load_dataset(fixtures::write_small_fixture(dir.path()));
  const auto protos = build_prototypes(ds, &ds.feature("gist"));
  // train rows of class 1 are (1,0), (1,0.5), (1,1)
  EXPECT_EQ(protos.at(1).mu, (Vector{1, 0.5}));
  EXPECT_EQ(protos.at(2).mu, (Vector{2, 0.5}));
  // attribute 0 is class_id - 1
  EXPECT_EQ(*protos.at(1).attr_mean, (Vector{0, 1}));
  EXPECT_EQ(*protos.at(2).attr_signature, (std::vector<bool>{true, true}));
}

TEST(Cluster, Examples) {
  ClassPrototype p;
  p.mu = {1, 2, 3};
  EXPECT_EQ(cluster_score(Vector{1, 2, 3}, p), 0.0);
  EXPECT_EQ(cluster_score(Vector{1, 4, 3}, p), -4.0);
  EXPECT_THROW(cluster_score(Vector{1, 2}, p), std::invalid_argument);
}

TEST(Cluster, OrderingMatchesDistanceOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    ClassPrototype p;
    p.mu.resize(4);
    for (auto& v : p.mu) v = standard_normal(rng);
    std::vector<Vector> xs(3, Vector(4));
    for (auto& x : xs)
      for (auto& v : x) v = standard_normal(rng);
    std::vector<double> dist;
    for (const auto& x : xs) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += std::pow(x[k] - p.mu[k], 2);
      dist.push_back(std::sqrt(s));
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (dist[i] < dist[j]) { EXPECT_GT(cluster_score(xs[i], p), cluster_score(xs[j], p)); }
  }
}

TEST(Cluster, TranslationInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    ClassPrototype p;
    Vector x(6), shift(6);
    p.mu.resize(6);
    for (std::size_t k = 0; k < 6; ++k) {
      p.mu[k] = standard_normal(rng);
      x[k] = standard_normal(rng);
      shift[k] = 10 * standard_normal(rng);
    }
    const double before = cluster_score(x, p);
    for (std::size_t k = 0; k < 6; ++k) {
      x[k] += shift[k];
      p.mu[k] += shift[k];
    }
    EXPECT_NEAR(cluster_score(x, p), before, 1e-9);
  }
}

TEST(ClassSvm, Examples) {
  LinearModel zero;
  zero.w = {0, 0};
  EXPECT_EQ(class_svm_score(Vector{3, 4}, zero), 0.0);
  LinearModel m;
  m.w = {0.5, -2};
  m.b = 0.25;
  const Vector x{1.5, 0.75};
  const Vector x2{3.0, 1.5};
  EXPECT_DOUBLE_EQ(class_svm_score(x2, m) - m.b, 2 * (class_svm_score(x, m) - m.b));
}

TEST(ClassSvm, SeparableClassesRankAboveOthers) {
  Rng rng(3);
  std::vector<Vector> X;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    const int label = i % 2 ? 1 : -1;
    X.push_back({label * 2.0 + 0.3 * standard_normal(rng), standard_normal(rng)});
    y.push_back(label);
  }
  TrainOptions opt;
  opt.lambda = 1e-3;
  const LinearModel m = train_binary_svm(X, y, opt);
  double min_pos = 1e300, max_neg = -1e300;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double s = class_svm_score(X[i], m);
    if (y[i] > 0) min_pos = std::min(min_pos, s);
    else max_neg = std::max(max_neg, s);
  }
  EXPECT_GT(min_pos, max_neg);
}

TEST(I2C, Examples) {
  ClassPrototype p = attribute_prototype({true, false, true});
  EXPECT_EQ(i2c_att_score({true, false, true}, p), 0.0);
  p.attr_mean = Vector{0, 0};
  EXPECT_EQ(i2c_att_score({true, false}, p), -1.0);
  EXPECT_DOUBLE_EQ(i2c_att_score({true, true}, p), -std::sqrt(2.0));
  EXPECT_THROW(i2c_att_score({true}, p), std::invalid_argument);
}

// Attribute vectors are boolean, so the shift that keeps them boolean is the
// reflection a -> 1 - a applied to one coordinate of both arguments.
TEST(I2C, InvariantUnderJointReflection) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<bool> a(8);
    ClassPrototype p;
    p.attr_mean = Vector(8);
    for (std::size_t m = 0; m < 8; ++m) {
      a[m] = uniform_real(rng) < 0.5;
      (*p.attr_mean)[m] = uniform_real(rng);
    }
    const double before = i2c_att_score(a, p);
    const auto k = uniform_index(rng, 8);
    a[k] = !a[k];
    (*p.attr_mean)[k] = 1.0 - (*p.attr_mean)[k];
    EXPECT_NEAR(i2c_att_score(a, p), before, 1e-12);
  }
}

TEST(Dap, Examples) {
  const double eps = kDapEpsilon;
  EXPECT_EQ(eps, 1e-5);
  const auto p = attribute_prototype({true, false, true, true});
  EXPECT_DOUBLE_EQ(dap_score(Vector{1, 0, 1, 1}, p), 4 * std::log(1 - eps));
  const auto q = attribute_prototype({true, true, true});
  EXPECT_DOUBLE_EQ(dap_score(Vector{1, 1, 0}, q), 2 * std::log(1 - eps) + std::log(eps));
  EXPECT_THROW(dap_score(Vector{1, 1}, q), std::invalid_argument);
  EXPECT_THROW(dap_score(Vector{1, 1, 1}, q, 0.5), std::invalid_argument);
  EXPECT_THROW(dap_score(Vector{1, 1, 1}, q, 0.0), std::invalid_argument);
}

TEST(Dap, LogMatchesClampedProduct) {
  Rng rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t M = 1 + uniform_index(rng, 10);
    std::vector<bool> sig(M);
    Vector probs(M);
    for (std::size_t m = 0; m < M; ++m) {
      sig[m] = uniform_real(rng) < 0.5;
      const double u = uniform_real(rng);
      probs[m] = u < 0.2 ? 0.0 : (u < 0.4 ? 1.0 : uniform_real(rng));
    }
    double product = 1.0;
    for (std::size_t m = 0; m < M; ++m) {
      double q = sig[m] ? probs[m] : 1.0 - probs[m];
      if (q < kDapEpsilon) q = kDapEpsilon;
      if (q > 1.0 - kDapEpsilon) q = 1.0 - kDapEpsilon;
      product *= q;
    }
    EXPECT_NEAR(std::exp(dap_score(probs, attribute_prototype(sig))), product, 1e-12);
  }
}

TEST(Dap, PermutationInvariant) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t M = 2 + uniform_index(rng, 30);
    std::vector<bool> sig(M);
    Vector probs(M);
    for (std::size_t m = 0; m < M; ++m) {
      sig[m] = uniform_real(rng) < 0.5;
      probs[m] = uniform_real(rng);
    }
    std::vector<std::size_t> perm(M);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm, rng);
    std::vector<bool> sig2(M);
    Vector probs2(M);
    for (std::size_t m = 0; m < M; ++m) {
      sig2[m] = sig[perm[m]];
      probs2[m] = probs[perm[m]];
    }
    EXPECT_NEAR(dap_score(probs2, attribute_prototype(sig2)), dap_score(probs, attribute_prototype(sig)), 1e-9);
  }
}

// A perturbation that makes an image more iconic by construction never lowers
// its score.
TEST(Orientation, PerturbationsNeverDecreaseScores) {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int W = 200 + static_cast<int>(uniform_index(rng, 300)), H = 200 + static_cast<int>(uniform_index(rng, 300));
    const double w = 10 + uniform_real(rng) * (W / 2.0), h = 10 + uniform_real(rng) * (H / 2.0);
    const double x = uniform_real(rng) * (W - w), y = uniform_real(rng) * (H - h);
    const ImageRecord r = record_with_box(x, y, w, h, W, H);

    // grow the box about its centre
    const double g = 1.0 + uniform_real(rng);
    const ImageRecord bigger = record_with_box(x - (g - 1) * w / 2, y - (g - 1) * h / 2, g * w, g * h, W, H);
    EXPECT_GE(value_of(bb_size(bigger, BoxSource::gt)), value_of(bb_size(r, BoxSource::gt)));

    // move the centre part of the way to the image centre
    const double t = uniform_real(rng);
    const double nx = x + t * (W / 2.0 - (x + w / 2)), ny = y + t * (H / 2.0 - (y + h / 2));
    const ImageRecord centred = record_with_box(nx, ny, w, h, W, H);
    EXPECT_GE(value_of(bb_dist2center(centred, BoxSource::gt)), value_of(bb_dist2center(r, BoxSource::gt)) - 1e-15);

    // reveal one more part
    ImageRecord parts = r;
    parts.parts = std::vector<bool>(15);
    for (std::size_t p = 0; p < 15; ++p) (*parts.parts)[p] = uniform_real(rng) < 0.5;
    ImageRecord more = parts;
    (*more.parts)[uniform_index(rng, 15)] = true;
    EXPECT_GE(value_of(occlusion_score(more)), value_of(occlusion_score(parts)));

    // feature moved toward mu
    ClassPrototype proto = attribute_prototype({true, false, true, false, true});
    proto.mu = {standard_normal(rng), standard_normal(rng), standard_normal(rng)};
    Vector f{standard_normal(rng), standard_normal(rng), standard_normal(rng)};
    Vector closer = f;
    const double s = uniform_real(rng);
    for (std::size_t k = 0; k < 3; ++k) closer[k] += s * (proto.mu[k] - f[k]);
    EXPECT_GE(cluster_score(closer, proto), cluster_score(f, proto));

    // attributes moved toward the signature
    std::vector<bool> a(5);
    for (std::size_t m = 0; m < 5; ++m) a[m] = uniform_real(rng) < 0.5;
    std::vector<bool> toward = a;
    const auto m = uniform_index(rng, 5);
    toward[m] = (*proto.attr_signature)[m];
    EXPECT_GE(i2c_att_score(toward, proto), i2c_att_score(a, proto));
    EXPECT_GE(dap_score(detail::attributes_as_vector(toward), proto), dap_score(detail::attributes_as_vector(a), proto));
    Vector probs(5);
    for (auto& v : probs) v = uniform_real(rng);
    Vector probs_toward = probs;
    probs_toward[m] += ((*proto.attr_signature)[m] ? 1.0 - probs[m] : -probs[m]) * uniform_real(rng);
    EXPECT_GE(dap_score(probs_toward, proto), dap_score(probs, proto));
  }
}

SuiteConfig oracle_suite() {
  return suite_config_from_json(nlohmann::json::parse(R"({"indicators":[
    {"name":"BB-size","type":"bb_size","source":"gt"},
    {"name":"BB-dist2center","type":"bb_dist2center","source":"gt"},
    {"name":"Occlusion","type":"occlusion"},
    {"name":"Aesthetic","type":"external","score":"aesthetic"},
    {"name":"Memorability","type":"external","score":"memorability"},
    {"name":"SVM-Att-Orac","type":"svm_att"},
    {"name":"I2C-Att-Orac","type":"i2c_att"},
    {"name":"DAP-Orac","type":"dap","source":"oracle"}]})"));
}

TEST(Suite, ThreeImagesOneIndicator) {
  fixtures::TempDir dir;
  const Dataset ds = load_dataset(fixtures::write_small_fixture(dir.path()));
  const auto cfg = suite_config_from_json(nlohmann::json::parse(R"({"indicators":[{"type":"bb_size","source":"gt"}]})"));
  const auto out = compute_indicator_suite(ds, train_suite_models(ds, cfg), cfg, {"c1_0", "c1_1", "c2_3"});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].indicator_name, "bb_size");
  EXPECT_EQ(out[0].scores.size(), 3u);
  EXPECT_EQ(out[0].scores.at("c2_3"), 0.25);
  EXPECT_TRUE(out[0].missing.empty());
}

TEST(Suite, MissingPartsCollectedNotFatal) {
  fixtures::TempDir dir;
  Dataset ds = load_dataset(fixtures::write_small_fixture(dir.path()));
  for (auto& [id, r] : ds.records) r.parts.reset();
  const auto cfg = suite_config_from_json(nlohmann::json::parse(R"({"indicators":[{"type":"occlusion"}]})"));
  const auto ids = ds.all_ids();
  const auto out = compute_indicator_suite(ds, {}, cfg, ids);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].scores.empty());
  EXPECT_EQ(out[0].missing, ids);
}

TEST(Suite, FullOracleSuiteOnSynthetic) {
  SyntheticOptions opt;
  opt.classes = 3;
  opt.images_per_class = 20;
  const Dataset ds = make_synthetic_dataset(opt).dataset;
  const auto cfg = oracle_suite();
  const auto test_ids = ds.ids(Split::test);
  const auto out = compute_indicator_suite(ds, train_suite_models(ds, cfg), cfg, test_ids);
  ASSERT_EQ(out.size(), 8u);
  for (const auto& s : out) {
    EXPECT_EQ(s.scores.size(), test_ids.size()) << s.indicator_name;
    EXPECT_EQ(s.provenance, s.indicator_name == "Aesthetic" || s.indicator_name == "Memorability" ? Provenance::external
                                                                                                   : Provenance::oracle);
    for (const auto& [id, v] : s.scores) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Suite, PredictedIndicatorsAndModelPersistence) {
  SyntheticOptions opt;
  opt.classes = 3;
  opt.images_per_class = 20;
  const Dataset ds = make_synthetic_dataset(opt).dataset;
  const auto cfg = suite_config_from_json(nlohmann::json::parse(R"({"indicators":[
    {"name":"DPM-size","type":"bb_size","source":"det"},
    {"name":"Cluster-FV","type":"cluster","features":"fv"},
    {"name":"SVM-FV","type":"class_svm","features":"fv"},
    {"name":"DAP-Pred","type":"dap","source":"predicted","features":"fv"}],"aux_epochs":20})"));
  const SuiteModels models = train_suite_models(ds, cfg);
  EXPECT_EQ(models.class_svms.at("fv").size(), 3u);
  EXPECT_EQ(models.attribute_classifiers.at("fv").size(), 12u);
  const auto ids = ds.ids(Split::test);
  const auto out = compute_indicator_suite(ds, models, cfg, ids);
  ASSERT_EQ(out.size(), 4u);
  for (const auto& s : out) {
    EXPECT_EQ(s.provenance, Provenance::predicted);
    EXPECT_EQ(s.scores.size() + s.missing.size(), ids.size());
  }
  EXPECT_GT(out[1].scores.size(), 0u);

  fixtures::TempDir dir;
  save_suite_models(models, dir.path());
  const SuiteModels reloaded = load_suite_models(dir.path());
  EXPECT_EQ(reloaded.prototypes, models.prototypes);
  const auto again = compute_indicator_suite(ds, reloaded, cfg, ids);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(again[i].scores, out[i].scores) << out[i].indicator_name;
}

TEST(Suite, Deterministic) {
  const Dataset ds = make_synthetic_dataset({.classes = 2, .images_per_class = 10}).dataset;
  const auto cfg = oracle_suite();
  const auto a = compute_indicator_suite(ds, train_suite_models(ds, cfg), cfg, ds.all_ids());
  const auto b = compute_indicator_suite(ds, train_suite_models(ds, cfg), cfg, ds.all_ids());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].scores, b[i].scores);
}

TEST(SuiteConfig, RejectsBadEntries) {
  for (const char* bad : {R"({"indicators":[{"type":"bb_size"}]})", R"({"indicators":[{"type":"nope"}]})",
                          R"({"indicators":[{"type":"cluster"}]})", R"({"indicators":[{"type":"external"}]})",
                          R"({"indicators":[{"type":"dap","source":"predicted"}]})",
                          R"({"indicators":[{"type":"occlusion"},{"type":"occlusion"}]})", R"({})"}) {
    EXPECT_THROW(suite_config_from_json(nlohmann::json::parse(bad)), ValidationError) << bad;
  }
}

}  // namespace
