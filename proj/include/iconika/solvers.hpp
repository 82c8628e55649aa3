#pragma once

// Linear predictors: L2-regularised hinge-loss classifier, pairwise ranking
// on within-batch preference pairs, whitening, lambda selection, and model
// persistence.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "iconika/common.hpp"
#include "iconika/datamodel.hpp"
#include "iconika/rankstats.hpp"

namespace iconika {

enum class Objective { binary, ranking };

inline std::string_view to_string(Objective o) { return o == Objective::binary ? "binary" : "ranking"; }

inline Objective objective_from_string(std::string_view s) {
  if (s == "binary" || s == "bin") return Objective::binary;
  if (s == "ranking" || s == "rank") return Objective::ranking;
  throw ValidationError(fmt::format("unknown objective '{}' (expected binary|ranking)", s));
}

// Rating threshold separating iconic from non-iconic images.
inline constexpr double kIconicThreshold = 1.5;

// ---------------------------------------------------------------------------
// Whitening

struct Whitener {
  Vector mean;
  Vector std;
  double floor = 1e-12;

  Vector apply(std::span<const double> x) const {
    if (x.size() != mean.size())
      throw std::invalid_argument(fmt::format("Whitener: expected {} columns, got {}", mean.size(), x.size()));
    Vector z(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) z[k] = (x[k] - mean[k]) / std[k];
    return z;
  }

  bool operator==(const Whitener&) const = default;
};

// Per-column population mean and standard deviation. Columns whose deviation
// is below the floor get std = 1, so they whiten to (near) zero.
inline Whitener fit_whitener(const std::vector<Vector>& rows, double floor = 1e-12) {
  if (rows.empty()) throw std::invalid_argument("fit_whitener: empty input");
  const std::size_t d = rows.front().size();
  Whitener w{Vector(d, 0.0), Vector(d, 0.0), floor};
  for (const auto& r : rows) {
    if (r.size() != d) throw std::invalid_argument("fit_whitener: ragged rows");
    for (std::size_t k = 0; k < d; ++k) w.mean[k] += r[k];
  }
  const auto n = static_cast<double>(rows.size());
  for (auto& m : w.mean) m /= n;
  for (const auto& r : rows)
    for (std::size_t k = 0; k < d; ++k) w.std[k] += (r[k] - w.mean[k]) * (r[k] - w.mean[k]);
  for (auto& s : w.std) {
    s = std::sqrt(s / n);
    if (s < floor) s = 1.0;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Preference pairs

struct RankPair {
  std::string pos_id;
  std::string neg_id;
  std::string annotator_id;
  std::string batch_id;

  bool operator==(const RankPair&) const = default;
};

// Every ordered (higher, lower) pair within one annotator's ratings of one
// batch. Ratings naming an unknown batch or an image outside their batch are
// skipped with a warning.
inline std::vector<RankPair> build_pairs(const std::vector<RatingRecord>& ratings,
                                         const std::vector<AnnotationBatch>& batches) {
  std::map<std::string, std::set<std::string>> members;
  for (const auto& b : batches) members[b.batch_id].insert(b.image_ids.begin(), b.image_ids.end());

  // (batch, annotator) -> [(image, rating)]
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<std::string, int>>> groups;
  for (const auto& r : ratings) {
    auto it = members.find(r.batch_id);
    if (it == members.end()) {
      log().warn("build_pairs: rating of '{}' references unknown batch '{}'", r.image_id, r.batch_id);
      continue;
    }
    if (!it->second.contains(r.image_id)) {
      log().warn("build_pairs: image '{}' is not in batch '{}'", r.image_id, r.batch_id);
      continue;
    }
    groups[{r.batch_id, r.annotator_id}].emplace_back(r.image_id, r.rating);
  }

  std::vector<RankPair> pairs;
  for (auto& [key, items] : groups) {
    std::sort(items.begin(), items.end());
    for (const auto& [pi, pr] : items)
      for (const auto& [ni, nr] : items)
        if (pr > nr) pairs.push_back({pi, ni, key.second, key.first});
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Models

struct LinearModel {
  Vector w;
  double b = 0.0;  // always 0 for ranking models
  double lambda = 0.0;
  Objective objective = Objective::binary;
  std::uint64_t seed = 0;
  int epochs = 0;  // epochs actually run
  std::vector<double> training_log;
  std::vector<std::string> columns;  // optional names of the input dimensions

  double score(std::span<const double> x) const {
    if (x.size() != w.size())
      throw std::invalid_argument(fmt::format("LinearModel: expected {} features, got {}", w.size(), x.size()));
    return dot(w, x) + b;
  }

  bool operator==(const LinearModel&) const = default;
};

struct TrainOptions {
  double lambda = 1e-2;
  int epochs = 200;
  std::uint64_t seed = 0;
  bool early_stop = true;
  int patience = 10;           // epochs over which relative change is measured
  double tolerance = 1e-8;     // relative objective change that stops training
};

// Mean hinge loss plus (lambda/2)||w||^2.
inline double hinge_objective(std::span<const Vector> X, std::span<const int> y, std::span<const double> w,
                              double b, double lambda) {
  double loss = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) loss += std::max(0.0, 1.0 - y[i] * (dot(w, X[i]) + b));
  return loss / static_cast<double>(X.size()) + 0.5 * lambda * squared_norm(w);
}

namespace detail {

// Exact minimiser over b of (1/N) sum max(0, 1 - y_i (s_i + b)). The function
// is convex piecewise linear with kinks at b = y_i - s_i; among minimising
// kinks the midpoint of the flat stretch is returned.
inline double best_bias(std::span<const double> s, std::span<const int> y) {
  std::vector<double> pos, neg;  // pos: active while b < 1 - s; neg: active while b > -1 - s
  for (std::size_t i = 0; i < s.size(); ++i) (y[i] > 0 ? pos : neg).push_back(y[i] > 0 ? 1.0 - s[i] : -1.0 - s[i]);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::vector<double> pos_suffix(pos.size() + 1, 0.0), neg_prefix(neg.size() + 1, 0.0);
  for (std::size_t i = pos.size(); i-- > 0;) pos_suffix[i] = pos_suffix[i + 1] + pos[i];
  for (std::size_t i = 0; i < neg.size(); ++i) neg_prefix[i + 1] = neg_prefix[i] + neg[i];

  auto loss_at = [&](double b) {
    // sum over pos with t > b of (t - b) + sum over neg with u < b of (b - u)
    const auto pk = static_cast<std::size_t>(std::upper_bound(pos.begin(), pos.end(), b) - pos.begin());
    const auto nk = static_cast<std::size_t>(std::lower_bound(neg.begin(), neg.end(), b) - neg.begin());
    return (pos_suffix[pk] - static_cast<double>(pos.size() - pk) * b) + (static_cast<double>(nk) * b - neg_prefix[nk]);
  };

  std::vector<double> kinks;
  kinks.reserve(s.size());
  kinks.insert(kinks.end(), pos.begin(), pos.end());
  kinks.insert(kinks.end(), neg.begin(), neg.end());
  std::sort(kinks.begin(), kinks.end());
  double best = std::numeric_limits<double>::infinity();
  double lo = 0.0, hi = 0.0;
  for (double k : kinks) {
    const double v = loss_at(k);
    const double tol = std::isinf(best) ? 0.0 : 1e-12 * std::max(1.0, std::abs(best));
    if (v < best - tol) {
      best = v;
      lo = hi = k;
    } else if (v <= best + tol) {
      hi = k;
    }
  }
  return 0.5 * (lo + hi);
}

// Seeded stochastic subgradient descent with 1/(lambda t) steps, projection
// onto the ball of radius 1/sqrt(lambda), and suffix averaging: the candidate
// after epoch e averages the iterates of epochs (e/2, e]. The unregularised
// bias moves with the smaller step min(1/(lambda t), 1/sqrt(t)), and each
// candidate gets the exact best bias for its averaged w. The returned model
// is the best candidate seen, so training_log is non-increasing.
inline LinearModel pegasos(std::span<const Vector> X, std::span<const int> y, bool fit_bias, const TrainOptions& opt) {
  const std::size_t n = X.size();
  const std::size_t d = X.front().size();
  const double lambda = opt.lambda;
  const double radius = 1.0 / std::sqrt(lambda);

  Rng rng(opt.seed);
  Vector w(d, 0.0);
  double b = 0.0;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  // cumulative[k] = sum of iterates through the end of epoch first_epoch + k
  std::deque<Vector> cumulative{Vector(d, 0.0)};
  std::size_t first_epoch = 0;
  Vector running(d, 0.0);

  LinearModel best;
  best.w.assign(d, 0.0);
  best.b = fit_bias ? best_bias(Vector(n, 0.0), y) : 0.0;
  double best_obj = hinge_objective(X, y, best.w, best.b, lambda);
  std::vector<double> log_values, candidate_values;
  Vector s(n);

  std::uint64_t t = 0;
  int epoch = 0;
  while (epoch < opt.epochs) {
    ++epoch;
    shuffle(order, rng);
    for (std::size_t idx : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      const double margin = y[idx] * (dot(w, X[idx]) + b);
      const double shrink = 1.0 - eta * lambda;
      for (auto& v : w) v *= shrink;
      if (margin < 1.0) {
        const auto& x = X[idx];
        for (std::size_t k = 0; k < d; ++k) w[k] += eta * y[idx] * x[k];
        if (fit_bias) b += std::min(eta, 1.0 / std::sqrt(static_cast<double>(t))) * y[idx];
      }
      const double nrm = std::sqrt(squared_norm(w));
      if (nrm > radius) {
        const double f = radius / nrm;
        for (auto& v : w) v *= f;
      }
      for (std::size_t k = 0; k < d; ++k) running[k] += w[k];
    }
    cumulative.push_back(running);

    const auto start = static_cast<std::size_t>(epoch / 2);
    while (first_epoch < start) {
      cumulative.pop_front();
      ++first_epoch;
    }
    const double steps = static_cast<double>((static_cast<std::size_t>(epoch) - start) * n);
    Vector avg(d);
    for (std::size_t k = 0; k < d; ++k) avg[k] = (cumulative.back()[k] - cumulative.front()[k]) / steps;

    double avg_b = 0.0;
    if (fit_bias) {
      for (std::size_t i = 0; i < n; ++i) s[i] = dot(avg, X[i]);
      avg_b = best_bias(s, y);
    }
    const double obj = hinge_objective(X, y, avg, avg_b, lambda);
    if (obj < best_obj) {
      best_obj = obj;
      best.w = std::move(avg);
      best.b = avg_b;
    }
    log_values.push_back(best_obj);
    candidate_values.push_back(obj);

    // Stop once the averaged iterate itself has settled. The pocket value can
    // sit still while SGD is still moving, so it is not used here.
    if (opt.early_stop && epoch > opt.patience) {
      const double then = candidate_values[candidate_values.size() - 1 - static_cast<std::size_t>(opt.patience)];
      if (std::abs(then - obj) <= opt.tolerance * std::max(std::abs(then), 1e-300)) break;
    }
  }

  // Weights are stored at float32 precision so persisted models round-trip exactly.
  for (auto& v : best.w) v = static_cast<double>(static_cast<float>(v));
  best.b = static_cast<double>(static_cast<float>(best.b));
  best.lambda = lambda;
  best.seed = opt.seed;
  best.epochs = epoch;
  best.training_log = std::move(log_values);
  return best;
}

inline void check_rows(std::span<const Vector> X) {
  if (X.empty()) throw std::invalid_argument("training set is empty");
  const std::size_t d = X.front().size();
  if (d == 0) throw std::invalid_argument("feature dimension must be positive");
  for (const auto& x : X) {
    if (x.size() != d) throw std::invalid_argument("ragged feature rows");
    for (double v : x)
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
  }
}

}  // namespace detail

// Binary hinge-loss classifier with bias. Labels are +1 / -1.
inline LinearModel train_binary_svm(std::span<const Vector> X, std::span<const int> y, const TrainOptions& opt) {
  detail::check_rows(X);
  if (y.size() != X.size()) throw std::invalid_argument("train_binary_svm: label count mismatch");
  if (!(opt.lambda > 0.0)) throw std::invalid_argument("train_binary_svm: lambda must be positive");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v == 1) has_pos = true;
    else if (v == -1) has_neg = true;
    else throw std::invalid_argument("train_binary_svm: labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("train_binary_svm: both classes must be present");
  LinearModel m = detail::pegasos(X, y, true, opt);
  m.objective = Objective::binary;
  return m;
}

inline std::vector<Vector> difference_vectors(const std::map<std::string, Vector>& rows,
                                              const std::vector<RankPair>& pairs) {
  std::vector<Vector> diffs;
  diffs.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto pi = rows.find(p.pos_id);
    if (pi == rows.end()) throw std::invalid_argument(fmt::format("no feature row for image '{}'", p.pos_id));
    auto ni = rows.find(p.neg_id);
    if (ni == rows.end()) throw std::invalid_argument(fmt::format("no feature row for image '{}'", p.neg_id));
    if (pi->second.size() != ni->second.size()) throw std::invalid_argument("ragged feature rows");
    Vector d(pi->second.size());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = pi->second[k] - ni->second[k];
    diffs.push_back(std::move(d));
  }
  return diffs;
}

// Pairwise ranking: hinge loss on w.(x+ - x-) with unit margin, no bias.
inline LinearModel train_ranking_svm(const std::map<std::string, Vector>& rows, const std::vector<RankPair>& pairs,
                                     const TrainOptions& opt) {
  if (pairs.empty()) throw std::invalid_argument("train_ranking_svm: no preference pairs");
  if (!(opt.lambda > 0.0)) throw std::invalid_argument("train_ranking_svm: lambda must be positive");
  const std::vector<Vector> diffs = difference_vectors(rows, pairs);
  detail::check_rows(diffs);
  const std::vector<int> ones(diffs.size(), 1);
  LinearModel m = detail::pegasos(diffs, ones, false, opt);
  m.objective = Objective::ranking;
  return m;
}

inline std::map<std::string, double> predict(const LinearModel& model, const std::map<std::string, Vector>& rows) {
  std::map<std::string, double> out;
  for (const auto& [id, x] : rows) out.emplace(id, model.score(x));
  return out;
}

// ---------------------------------------------------------------------------
// Iconicity models on labelled rows

// Rows with the ratings and batches that label them.
struct TrainingData {
  std::map<std::string, Vector> rows;
  std::vector<RatingRecord> ratings;
  std::vector<AnnotationBatch> batches;

  // Mean rating of every rated image that has a row.
  std::map<std::string, double> mean_ratings() const {
    std::map<std::string, std::pair<double, int>> acc;
    for (const auto& r : ratings) {
      if (!rows.contains(r.image_id)) continue;
      auto& [sum, n] = acc[r.image_id];
      sum += r.rating;
      ++n;
    }
    std::map<std::string, double> out;
    for (const auto& [id, sn] : acc) out.emplace(id, sn.first / sn.second);
    return out;
  }
};

// Binary: positives are images whose mean rating exceeds 1.5. Ranking:
// within-batch pairs whose members both have rows.
inline LinearModel train_iconicity_model(const TrainingData& data, Objective objective, const TrainOptions& opt) {
  if (objective == Objective::binary) {
    std::vector<Vector> X;
    std::vector<int> y;
    for (const auto& [id, r] : data.mean_ratings()) {
      X.push_back(data.rows.at(id));
      y.push_back(r > kIconicThreshold ? 1 : -1);
    }
    return train_binary_svm(X, y, opt);
  }
  std::vector<RankPair> pairs = build_pairs(data.ratings, data.batches);
  std::erase_if(pairs, [&](const RankPair& p) { return !data.rows.contains(p.pos_id) || !data.rows.contains(p.neg_id); });
  return train_ranking_svm(data.rows, pairs, opt);
}

// Validation score of a model on rated rows: SRC for ranking, AP for binary.
// Returns nullopt when the validation set cannot score (fewer than 2 rated
// rows, constant ratings, or no positives).
inline std::optional<double> validation_score(const LinearModel& model, const TrainingData& data, Objective objective) {
  const auto ratings = data.mean_ratings();
  if (ratings.size() < 2) return std::nullopt;
  Vector scores, truth;
  std::vector<std::string> ids;
  for (const auto& [id, r] : ratings) {
    ids.push_back(id);
    scores.push_back(model.score(data.rows.at(id)));
    truth.push_back(r);
  }
  if (objective == Objective::ranking) {
    if (std::all_of(truth.begin(), truth.end(), [&](double v) { return v == truth.front(); })) return std::nullopt;
    return spearman(scores, truth).rho;
  }
  if (std::none_of(truth.begin(), truth.end(), [](double v) { return v > kIconicThreshold; })) return std::nullopt;
  return average_precision(scores, truth, kIconicThreshold, ids);
}

struct LambdaSelection {
  double lambda = 0.0;
  std::vector<std::pair<double, double>> validation;  // (lambda, score) per grid value that trained
  bool fallback = false;
  std::string warning;
};

// Train on the first half for each grid value and keep the lambda with the
// best validation score on the second half; ties go to the smaller lambda.
// If nothing can be validated the grid median is used.
inline LambdaSelection select_lambda(const TrainingData& first, const TrainingData& second, std::vector<double> grid,
                                     Objective objective, TrainOptions opt) {
  if (grid.empty()) throw std::invalid_argument("select_lambda: empty grid");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  LambdaSelection out;
  if (grid.size() == 1) {
    out.lambda = grid.front();
    return out;
  }
  std::optional<double> best;
  for (double lambda : grid) {
    opt.lambda = lambda;
    std::optional<double> score;
    try {
      score = validation_score(train_iconicity_model(first, objective, opt), second, objective);
    } catch (const std::invalid_argument& e) {
      log().debug("select_lambda: lambda {} not trainable: {}", lambda, e.what());
    }
    if (!score) continue;
    out.validation.emplace_back(lambda, *score);
    if (!best || *score > *best) {
      best = score;
      out.lambda = lambda;
    }
  }
  if (!best) {
    out.fallback = true;
    out.lambda = grid[(grid.size() - 1) / 2];
    out.warning = fmt::format("select_lambda: validation degenerate, using grid median {}", out.lambda);
    log().warn("{}", out.warning);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence
//
// One line of JSON header (objective, lambda, seed, epochs, dim, bias,
// training log, column names, optional whitener) terminated by '\n', then
// dim little-endian float32 weights.

struct ModelFile {
  LinearModel model;
  std::optional<Whitener> whitener;

  bool operator==(const ModelFile&) const = default;
};

inline std::string serialize_model(const LinearModel& m, const std::optional<Whitener>& whitener = std::nullopt) {
  nlohmann::json h = {{"format", "iconika-model"},
                      {"version", 1},
                      {"objective", to_string(m.objective)},
                      {"lambda", m.lambda},
                      {"seed", m.seed},
                      {"epochs", m.epochs},
                      {"dim", m.w.size()},
                      {"bias", m.b},
                      {"training_log", m.training_log},
                      {"columns", m.columns}};
  if (whitener) h["whitener"] = {{"mean", whitener->mean}, {"std", whitener->std}, {"floor", whitener->floor}};
  std::string out = h.dump();
  out.push_back('\n');
  for (double v : m.w) {
    const auto f = static_cast<float>(v);
    char buf[sizeof(float)];
    std::memcpy(buf, &f, sizeof(float));
    out.append(buf, sizeof(float));
  }
  return out;
}

inline ModelFile deserialize_model(const std::string& bytes, const std::string& where = "model") {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw ValidationError(fmt::format("{}: missing model header", where));
  ModelFile mf;
  std::size_t dim = 0;
  try {
    const auto h = nlohmann::json::parse(bytes.substr(0, nl));
    if (h.at("format") != "iconika-model" || h.at("version") != 1)
      throw ValidationError(fmt::format("{}: not an iconika model file", where));
    mf.model.objective = objective_from_string(h.at("objective").get<std::string>());
    mf.model.lambda = h.at("lambda").get<double>();
    mf.model.seed = h.at("seed").get<std::uint64_t>();
    mf.model.epochs = h.at("epochs").get<int>();
    mf.model.b = h.at("bias").get<double>();
    mf.model.training_log = h.at("training_log").get<std::vector<double>>();
    mf.model.columns = h.at("columns").get<std::vector<std::string>>();
    dim = h.at("dim").get<std::size_t>();
    if (h.contains("whitener")) {
      const auto& wj = h.at("whitener");
      mf.whitener = Whitener{wj.at("mean").get<Vector>(), wj.at("std").get<Vector>(), wj.at("floor").get<double>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("{}: invalid model header: {}", where, e.what()));
  }
  if (bytes.size() - nl - 1 != dim * sizeof(float))
    throw ValidationError(fmt::format("{}: weight block has wrong size for dim {}", where, dim));
  mf.model.w.resize(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    float f;
    std::memcpy(&f, bytes.data() + nl + 1 + k * sizeof(float), sizeof(float));
    mf.model.w[k] = f;
  }
  return mf;
}

inline void save_model(const std::filesystem::path& path, const LinearModel& m,
                       const std::optional<Whitener>& whitener = std::nullopt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  const std::string bytes = serialize_model(m, whitener);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str(), path.string());
}

}  // namespace iconika
