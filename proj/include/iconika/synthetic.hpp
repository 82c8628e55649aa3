#pragma once

// Synthetic datasets with a planted per-image iconicity. Every annotation
// (box size and placement, part visibility, attributes, features, external
// scores, ratings) is generated to depend on the latent value, so the whole
// pipeline can be exercised without real images.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "iconika/common.hpp"
#include "iconika/datamodel.hpp"

namespace iconika {

// Standard normal by Box-Muller over uniform_real(), reproducible across
// standard libraries.
inline double standard_normal(Rng& rng) {
  double u1 = uniform_real(rng);
  while (u1 <= 0.0) u1 = uniform_real(rng);
  const double u2 = uniform_real(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

struct SyntheticOptions {
  int classes = 6;
  int images_per_class = 40;
  double test_fraction = 0.5;
  int B = 5;
  int P = 15;
  int M = 12;
  int feature_dim = 16;
  int annotators = 4;
  double rating_noise = 0.5;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  Dataset dataset;
  std::map<std::string, double> iconicity;  // planted latent value
};

// Map a noisy latent value to the 0/1/2 scale.
inline int rating_from_latent(double v) { return v < -0.5 ? 0 : (v < 0.5 ? 1 : 2); }

inline SyntheticDataset make_synthetic_dataset(const SyntheticOptions& o) {
  Rng rng(o.seed);
  SyntheticDataset out;
  Dataset& ds = out.dataset;
  ds.manifest.K = o.classes;
  ds.manifest.P = o.P;
  ds.manifest.M = o.M;
  ds.manifest.B = o.B;

  auto sigmoid = [](double s) { return 1.0 / (1.0 + std::exp(-s)); };
  auto bernoulli = [&](double p) { return uniform_real(rng) < p; };

  FeatureMatrix fm{"fv", static_cast<std::size_t>(o.feature_dim), {}};
  Vector iconic_dir(static_cast<std::size_t>(o.feature_dim));
  for (auto& v : iconic_dir) v = standard_normal(rng);
  const double dir_norm = std::sqrt(squared_norm(iconic_dir));
  for (auto& v : iconic_dir) v /= dir_norm;

  std::vector<std::string> annotators;
  for (int a = 0; a < o.annotators; ++a) annotators.push_back(fmt::format("ann{:02}", a + 1));
  std::size_t next_annotator = 0;
  std::int64_t clock = 1'400'000'000;

  for (int c = 1; c <= o.classes; ++c) {
    Vector class_mean(static_cast<std::size_t>(o.feature_dim));
    for (auto& v : class_mean) v = 3.0 * standard_normal(rng);
    std::vector<bool> signature(static_cast<std::size_t>(o.M));
    for (std::size_t m = 0; m < signature.size(); ++m) signature[m] = bernoulli(0.5);

    std::vector<std::string> train_ids, test_ids;
    const int n_test = static_cast<int>(std::lround(o.images_per_class * o.test_fraction));
    for (int i = 0; i < o.images_per_class; ++i) {
      ImageRecord r;
      r.image_id = fmt::format("c{:03}_{:04}", c, i);
      r.class_id = c;
      r.width = 400 + static_cast<int>(uniform_index(rng, 200));
      r.height = 300 + static_cast<int>(uniform_index(rng, 200));
      r.provenance = "synthetic";
      const double z = standard_normal(rng);
      out.iconicity.emplace(r.image_id, z);

      // Iconic images: larger, more centred boxes.
      const double area = std::clamp(0.3 + 0.12 * z + 0.05 * standard_normal(rng), 0.04, 0.9);
      const double aspect = std::exp(0.2 * standard_normal(rng));
      const double bw = std::min(r.width * std::sqrt(area) * aspect, r.width * 0.98);
      const double bh = std::min(r.height * std::sqrt(area) / aspect, r.height * 0.98);
      const double off = std::clamp(0.12 - 0.05 * z + 0.03 * standard_normal(rng), 0.0, 0.45);
      const double ang = 2.0 * std::numbers::pi * uniform_real(rng);
      double cx = r.width / 2.0 + off * r.width * std::cos(ang);
      double cy = r.height / 2.0 + off * r.height * std::sin(ang);
      cx = std::clamp(cx, bw / 2.0, r.width - bw / 2.0);
      cy = std::clamp(cy, bh / 2.0, r.height - bh / 2.0);
      BoundingBox gt{cx - bw / 2.0, cy - bh / 2.0, bw, bh, std::nullopt};
      detail::clamp_box(gt, r.width, r.height);
      r.gt_box = gt;
      BoundingBox det = *r.gt_box;
      det.x += 0.05 * bw * standard_normal(rng);
      det.y += 0.05 * bh * standard_normal(rng);
      det.w *= std::exp(0.1 * standard_normal(rng));
      det.h *= std::exp(0.1 * standard_normal(rng));
      det.score = sigmoid(1.0 + z);
      if (detail::clamp_box(det, r.width, r.height)) r.det_box = det;

      std::vector<bool> parts(static_cast<std::size_t>(o.P));
      for (std::size_t p = 0; p < parts.size(); ++p) parts[p] = bernoulli(sigmoid(1.0 + 1.2 * z));
      r.parts = std::move(parts);

      std::vector<bool> attrs(static_cast<std::size_t>(o.M));
      for (std::size_t m = 0; m < attrs.size(); ++m)
        attrs[m] = bernoulli(sigmoid(1.5 + 1.5 * z)) ? signature[m] : !signature[m];
      r.attributes = std::move(attrs);

      r.external_scores["aesthetic"] = 0.4 * z + standard_normal(rng);
      r.external_scores["memorability"] = 0.3 * z + standard_normal(rng);

      // Features: class mean, a shared "iconic" direction, and spread that
      // shrinks for iconic images. Stored at float precision.
      Vector x(static_cast<std::size_t>(o.feature_dim));
      const double spread = 1.2 * std::exp(-0.4 * z);
      for (std::size_t k = 0; k < x.size(); ++k)
        x[k] = static_cast<double>(static_cast<float>(class_mean[k] + 1.5 * z * iconic_dir[k] + spread * standard_normal(rng)));
      fm.rows.emplace(r.image_id, std::move(x));

      const bool is_test = i < n_test;
      ds.split.emplace(r.image_id, is_test ? Split::test : Split::train);
      (is_test ? test_ids : train_ids).push_back(r.image_id);
      ds.records.emplace(r.image_id, std::move(r));
    }

    // Batches of B same-class images within each split, one annotator each.
    for (auto* ids : {&train_ids, &test_ids}) {
      shuffle(*ids, rng);
      for (std::size_t start = 0; start + static_cast<std::size_t>(o.B) <= ids->size(); start += static_cast<std::size_t>(o.B)) {
        AnnotationBatch b;
        b.batch_id = fmt::format("b{:03}_{:03}", c, ds.batches.size());
        b.class_id = c;
        b.image_ids.assign(ids->begin() + static_cast<std::ptrdiff_t>(start),
                           ids->begin() + static_cast<std::ptrdiff_t>(start) + o.B);
        std::sort(b.image_ids.begin(), b.image_ids.end());
        b.assigned_annotator = annotators[next_annotator++ % annotators.size()];
        for (const auto& id : b.image_ids) {
          const double noisy = out.iconicity.at(id) + o.rating_noise * standard_normal(rng);
          ds.ratings.push_back({b.assigned_annotator, b.batch_id, id, rating_from_latent(noisy), clock++});
        }
        ds.batches.push_back(std::move(b));
      }
    }
  }
  ds.features.emplace("fv", std::move(fm));
  std::sort(ds.ratings.begin(), ds.ratings.end());
  std::sort(ds.batches.begin(), ds.batches.end(),
            [](const AnnotationBatch& a, const AnnotationBatch& b) { return a.batch_id < b.batch_id; });
  return out;
}

}  // namespace iconika
