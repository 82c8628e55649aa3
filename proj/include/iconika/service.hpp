#pragma once

// Rating campaign service: static batch assignment, an append-only ratings
// log, and the HTTP front end the browser client talks to.

#include <fcntl.h>
#include <unistd.h>

#include <array>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "iconika/common.hpp"
#include "iconika/datamodel.hpp"

namespace iconika {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct RedundancyGroup {
  std::string name;
  std::vector<std::string> annotators;
};

struct CampaignConfig {
  int B = 5;
  int classes_per_annotator = 50;  // unique batches per annotator, one class each
  int shared_set_size = 50;
  int shared_classes = 10;
  std::vector<RedundancyGroup> groups;
  std::vector<std::string> train_annotators;
  std::vector<std::string> test_annotators;
  std::map<std::string, std::string> tokens;  // annotator -> opaque token
  std::string admin_token;                    // guards export when non-empty
  std::uint64_t seed = 0;
};

// Throws ValidationError on the first violated invariant.
inline void validate(const CampaignConfig& c) {
  if (c.B < 2) throw ValidationError("campaign: B must be at least 2");
  if (c.classes_per_annotator < 0) throw ValidationError("campaign: classes_per_annotator must be >= 0");
  if (c.shared_set_size < 0 || c.shared_classes < 1)
    throw ValidationError("campaign: shared_set_size must be >= 0 and shared_classes >= 1");
  if (c.shared_set_size % c.shared_classes != 0 || (c.shared_set_size / c.shared_classes) % c.B != 0)
    throw ValidationError(fmt::format("campaign: shared_set_size {} must split into {} classes of whole batches of {}",
                                      c.shared_set_size, c.shared_classes, c.B));
  std::set<std::string> train(c.train_annotators.begin(), c.train_annotators.end());
  std::set<std::string> test(c.test_annotators.begin(), c.test_annotators.end());
  if (train.size() != c.train_annotators.size() || test.size() != c.test_annotators.size())
    throw ValidationError("campaign: annotator listed twice");
  for (const auto& a : train)
    if (test.contains(a)) throw ValidationError(fmt::format("campaign: annotator '{}' is in both train and test campaigns", a));
  std::set<std::string> tokens;
  for (const auto* side : {&train, &test})
    for (const auto& a : *side) {
      if (a.empty()) throw ValidationError("campaign: empty annotator id");
      auto it = c.tokens.find(a);
      if (it == c.tokens.end() || it->second.empty())
        throw ValidationError(fmt::format("campaign: annotator '{}' has no token", a));
      if (!tokens.insert(it->second).second) throw ValidationError("campaign: tokens must be unique");
    }
  for (const auto& [a, _] : c.tokens)
    if (!train.contains(a) && !test.contains(a))
      throw ValidationError(fmt::format("campaign: token for unregistered annotator '{}'", a));
  std::set<std::string> grouped, names;
  for (const auto& g : c.groups) {
    if (g.name.empty() || !names.insert(g.name).second)
      throw ValidationError(fmt::format("campaign: group name '{}' empty or repeated", g.name));
    if (g.annotators.empty()) throw ValidationError(fmt::format("campaign: group '{}' is empty", g.name));
    std::optional<bool> in_train;
    for (const auto& a : g.annotators) {
      if (!train.contains(a) && !test.contains(a))
        throw ValidationError(fmt::format("campaign: group '{}' names unregistered annotator '{}'", g.name, a));
      if (!grouped.insert(a).second)
        throw ValidationError(fmt::format("campaign: annotator '{}' is in more than one redundancy group", a));
      if (in_train && *in_train != train.contains(a))
        throw ValidationError(fmt::format("campaign: group '{}' mixes train and test annotators", g.name));
      in_train = train.contains(a);
    }
  }
}

inline CampaignConfig campaign_config_from_json(const json& j) {
  CampaignConfig c;
  try {
    c.B = j.value("B", c.B);
    c.classes_per_annotator = j.value("classes_per_annotator", c.classes_per_annotator);
    c.shared_set_size = j.value("shared_set_size", c.shared_set_size);
    c.shared_classes = j.value("shared_classes", c.shared_classes);
    c.seed = j.value("seed", c.seed);
    c.admin_token = j.value("admin_token", std::string{});
    c.train_annotators = j.value("train_annotators", std::vector<std::string>{});
    c.test_annotators = j.value("test_annotators", std::vector<std::string>{});
    c.tokens = j.value("tokens", std::map<std::string, std::string>{});
    if (j.contains("groups"))
      for (const auto& g : j.at("groups"))
        c.groups.push_back({g.at("name").get<std::string>(), g.at("annotators").get<std::vector<std::string>>()});
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("invalid campaign config: {}", e.what()));
  }
  validate(c);
  return c;
}

inline json to_json(const CampaignConfig& c) {
  json groups = json::array();
  for (const auto& g : c.groups) groups.push_back({{"name", g.name}, {"annotators", g.annotators}});
  return {{"B", c.B},
          {"classes_per_annotator", c.classes_per_annotator},
          {"shared_set_size", c.shared_set_size},
          {"shared_classes", c.shared_classes},
          {"seed", c.seed},
          {"admin_token", c.admin_token},
          {"train_annotators", c.train_annotators},
          {"test_annotators", c.test_annotators},
          {"tokens", c.tokens},
          {"groups", groups}};
}

struct AssignedBatch {
  AnnotationBatch batch;
  bool shared = false;
};

// Per annotator: shared batches first, then unique ones.
struct Assignment {
  std::vector<AnnotationBatch> batches;  // every distinct batch, sorted by id
  std::map<std::string, std::vector<AssignedBatch>> per_annotator;
  std::vector<std::string> warnings;
};

// Static assignment. Train-campaign annotators see train images, test-campaign
// annotators test images. Each redundancy group gets shared_classes classes
// with shared_set_size / shared_classes images each; those images are then
// kept out of the unique pool. Unique batches take B images at a time from a
// shuffled per-class pool, cycling, so coverage spreads over annotators.
inline Assignment assign_batches(const Dataset& ds, const CampaignConfig& c) {
  validate(c);
  Rng rng(c.seed);
  Assignment out;
  const auto B = static_cast<std::size_t>(c.B);

  std::map<Split, std::map<int, std::vector<std::string>>> pools;
  for (const auto& [id, s] : ds.split) pools[s][ds.record(id).class_id].push_back(id);
  for (auto& [_, by_class] : pools)
    for (auto& [__, ids] : by_class) shuffle(ids, rng);

  auto role_of = [&](const std::string& a) {
    return std::find(c.train_annotators.begin(), c.train_annotators.end(), a) != c.train_annotators.end() ? Split::train
                                                                                                             : Split::test;
  };

  for (const auto& g : c.groups) {
    if (c.shared_set_size == 0) break;
    auto& by_class = pools[role_of(g.annotators.front())];
    const auto per_class = static_cast<std::size_t>(c.shared_set_size / c.shared_classes);
    std::vector<int> eligible;
    for (const auto& [cls, ids] : by_class)
      if (ids.size() >= per_class) eligible.push_back(cls);
    if (eligible.size() < static_cast<std::size_t>(c.shared_classes))
      throw ValidationError(fmt::format("group '{}': need {} classes with {} unshared images, found {}", g.name,
                                        c.shared_classes, per_class, eligible.size()));
    shuffle(eligible, rng);
    eligible.resize(static_cast<std::size_t>(c.shared_classes));
    std::sort(eligible.begin(), eligible.end());
    std::size_t k = 0;
    for (int cls : eligible) {
      auto& ids = by_class[cls];
      for (std::size_t start = 0; start < per_class; start += B) {
        AnnotationBatch b;
        b.batch_id = fmt::format("s-{}-{:03}", g.name, k++);
        b.class_id = cls;
        b.image_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(start),
                           ids.begin() + static_cast<std::ptrdiff_t>(start + B));
        std::sort(b.image_ids.begin(), b.image_ids.end());
        b.assigned_annotator = g.name;
        for (const auto& a : g.annotators) out.per_annotator[a].push_back({b, true});
        out.batches.push_back(std::move(b));
      }
      ids.erase(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(per_class));
    }
  }

  std::map<std::pair<Split, int>, std::size_t> cursor;
  for (const auto* side : {&c.train_annotators, &c.test_annotators})
    for (const auto& a : *side) {
      auto& list = out.per_annotator[a];
      const Split s = role_of(a);
      std::vector<int> eligible;
      for (const auto& [cls, ids] : pools[s])
        if (ids.size() >= B) eligible.push_back(cls);
      shuffle(eligible, rng);
      if (eligible.size() < static_cast<std::size_t>(c.classes_per_annotator))
        out.warnings.push_back(fmt::format("annotator '{}': only {} classes have {} unshared {} images, wanted {}", a,
                                           eligible.size(), B, to_string(s), c.classes_per_annotator));
      else
        eligible.resize(static_cast<std::size_t>(c.classes_per_annotator));
      std::size_t k = 0;
      for (int cls : eligible) {
        const auto& ids = pools[s][cls];
        std::size_t& pos = cursor[{s, cls}];
        AnnotationBatch b;
        b.batch_id = fmt::format("u-{}-{:03}", a, k++);
        b.class_id = cls;
        for (std::size_t i = 0; i < B; ++i) b.image_ids.push_back(ids[(pos + i) % ids.size()]);
        pos = (pos + B) % ids.size();
        std::sort(b.image_ids.begin(), b.image_ids.end());
        b.assigned_annotator = a;
        list.push_back({b, false});
        out.batches.push_back(std::move(b));
      }
    }
  std::sort(out.batches.begin(), out.batches.end(),
            [](const AnnotationBatch& x, const AnnotationBatch& y) { return x.batch_id < y.batch_id; });
  return out;
}

// ---------------------------------------------------------------------------
// Campaign state

class CampaignError : public std::runtime_error {
 public:
  enum class Kind { unknown_annotator, unknown_batch, not_assigned, invalid, duplicate };
  CampaignError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
  Kind kind;
};

struct SubmittedRating {
  std::string image_id;
  int rating = 0;
};

struct Progress {
  std::string annotator_id;
  std::size_t batches_total = 0;
  std::size_t batches_done = 0;
  std::size_t shared_total = 0;
  std::size_t shared_done = 0;
  std::size_t ratings = 0;
};

inline json to_json(const Progress& p) {
  return {{"annotator", p.annotator_id},
          {"batches_total", p.batches_total},
          {"batches_done", p.batches_done},
          {"shared_total", p.shared_total},
          {"shared_done", p.shared_done},
          {"ratings", p.ratings}};
}

struct RatingsExport {
  std::string log;  // ratings.jsonl lines in append order
  std::size_t records = 0;
  std::array<std::size_t, 3> counts{};  // per rating value
};

inline json summary_json(const RatingsExport& e) {
  return {{"records", e.records}, {"counts", {{"0", e.counts[0]}, {"1", e.counts[1]}, {"2", e.counts[2]}}}};
}

class Campaign {
 public:
  using Clock = std::function<std::int64_t()>;

  // Opens (or creates) the ratings log at log_path and replays it. A torn
  // final line, left by a crash before acknowledgment, is cut off.
  Campaign(Dataset ds, CampaignConfig cfg, fs::path log_path, Clock clock = {})
      : cfg_(std::move(cfg)), ds_(std::move(ds)), log_path_(std::move(log_path)), clock_(std::move(clock)) {
    ds_.ratings.clear();
    ds_.batches.clear();
    assignment_ = assign_batches(ds_, cfg_);
    for (const auto& w : assignment_.warnings) log().warn("{}", w);
    for (const auto& [a, list] : assignment_.per_annotator) {
      auto& flags = done_[a];
      flags = std::make_unique<std::atomic<bool>[]>(list.size());
      for (std::size_t i = 0; i < list.size(); ++i) {
        flags[i].store(false);
        index_[{a, list[i].batch.batch_id}] = i;
      }
    }
    if (!clock_) clock_ = [] {
      return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
    };
    if (!log_path_.parent_path().empty()) fs::create_directories(log_path_.parent_path());
    replay();
    fd_ = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError(fmt::format("cannot open ratings log '{}': {}", log_path_.string(), std::strerror(errno)));
  }

  Campaign(const Campaign&) = delete;
  Campaign& operator=(const Campaign&) = delete;
  ~Campaign() {
    if (fd_ >= 0) ::close(fd_);
  }

  const CampaignConfig& config() const { return cfg_; }
  const Assignment& assignment() const { return assignment_; }
  const Dataset& dataset() const { return ds_; }
  const fs::path& log_path() const { return log_path_; }

  bool registered(const std::string& annotator) const { return done_.contains(annotator); }

  // Annotator owning this token, or empty.
  std::string annotator_for_token(const std::string& token) const {
    if (token.empty()) return {};
    for (const auto& [a, t] : cfg_.tokens)
      if (t == token) return a;
    return {};
  }

  // Next unrated batch, or nullopt when the annotator is done.
  std::optional<AssignedBatch> next_batch(const std::string& annotator) const {
    const auto& list = batches_of(annotator);
    const auto& flags = done_.at(annotator);
    for (std::size_t i = 0; i < list.size(); ++i)
      if (!flags[i].load(std::memory_order_acquire)) return list[i];
    return std::nullopt;
  }

  Progress progress(const std::string& annotator) const {
    const auto& list = batches_of(annotator);
    const auto& flags = done_.at(annotator);
    Progress p{annotator, list.size(), 0, 0, 0, 0};
    for (std::size_t i = 0; i < list.size(); ++i) {
      const bool d = flags[i].load(std::memory_order_acquire);
      p.batches_done += d;
      p.shared_total += list[i].shared;
      p.shared_done += d && list[i].shared;
      if (d) p.ratings += list[i].batch.image_ids.size();
    }
    return p;
  }

  // Validates, appends B records with one write, fsyncs, then acknowledges.
  // Any error leaves the log untouched.
  std::vector<RatingRecord> submit(const std::string& annotator, const std::string& batch_id,
                                   const std::vector<SubmittedRating>& ratings) {
    const auto& list = batches_of(annotator);
    auto it = index_.find({annotator, batch_id});
    if (it == index_.end()) {
      const bool exists = std::any_of(assignment_.batches.begin(), assignment_.batches.end(),
                                      [&](const AnnotationBatch& b) { return b.batch_id == batch_id; });
      if (!exists) throw CampaignError(CampaignError::Kind::unknown_batch, fmt::format("unknown batch '{}'", batch_id));
      throw CampaignError(CampaignError::Kind::not_assigned,
                          fmt::format("batch '{}' is not assigned to annotator '{}'", batch_id, annotator));
    }
    const AnnotationBatch& b = list[it->second].batch;
    check_ratings(b, ratings);

    std::lock_guard lock(write_mutex_);
    auto& flag = done_.at(annotator)[it->second];
    if (flag.load(std::memory_order_acquire))
      throw CampaignError(CampaignError::Kind::duplicate,
                          fmt::format("batch '{}' was already submitted by '{}'", batch_id, annotator));
    const std::int64_t ts = clock_();
    std::vector<RatingRecord> recs;
    std::string buf;
    for (const auto& r : ratings) {
      recs.push_back({annotator, batch_id, r.image_id, r.rating, ts});
      buf += to_json(recs.back()).dump();
      buf += '\n';
    }
    append_durably(buf);
    records_.insert(records_.end(), recs.begin(), recs.end());
    flag.store(true, std::memory_order_release);
    return recs;
  }

  RatingsExport export_ratings() const {
    std::lock_guard lock(write_mutex_);
    RatingsExport e;
    for (const auto& r : records_) {
      e.log += to_json(r).dump();
      e.log += '\n';
      ++e.counts[static_cast<std::size_t>(r.rating)];
    }
    e.records = records_.size();
    return e;
  }

  // The campaign's images, assignment and collected ratings as a dataset
  // load_dataset() accepts.
  Dataset export_dataset() const {
    Dataset out = ds_;
    {
      std::lock_guard lock(write_mutex_);
      out.ratings = records_;
    }
    std::sort(out.ratings.begin(), out.ratings.end());
    out.batches = assignment_.batches;
    out.manifest.B = cfg_.B;
    return out;
  }

 private:
  const std::vector<AssignedBatch>& batches_of(const std::string& annotator) const {
    auto it = assignment_.per_annotator.find(annotator);
    if (it == assignment_.per_annotator.end())
      throw CampaignError(CampaignError::Kind::unknown_annotator,
                          fmt::format("unknown annotator '{}': ask the campaign organiser to register this id", annotator));
    return it->second;
  }

  void check_ratings(const AnnotationBatch& b, const std::vector<SubmittedRating>& ratings) const {
    if (ratings.size() != b.image_ids.size())
      throw CampaignError(CampaignError::Kind::invalid, fmt::format("batch '{}' needs exactly {} ratings, got {}",
                                                                    b.batch_id, b.image_ids.size(), ratings.size()));
    std::set<std::string> seen;
    for (const auto& r : ratings) {
      if (!is_valid_rating(r.rating))
        throw CampaignError(CampaignError::Kind::invalid,
                            fmt::format("rating {} for image '{}' outside {{0,1,2}}", r.rating, r.image_id));
      if (std::find(b.image_ids.begin(), b.image_ids.end(), r.image_id) == b.image_ids.end())
        throw CampaignError(CampaignError::Kind::invalid,
                            fmt::format("image '{}' is not in batch '{}'", r.image_id, b.batch_id));
      if (!seen.insert(r.image_id).second)
        throw CampaignError(CampaignError::Kind::invalid, fmt::format("image '{}' rated twice", r.image_id));
    }
  }

  void append_durably(const std::string& buf) {
    std::size_t off = 0;
    while (off < buf.size()) {
      const ssize_t n = ::write(fd_, buf.data() + off, buf.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(fmt::format("ratings log write failed: {}", std::strerror(errno)));
      }
      off += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw IoError(fmt::format("ratings log fsync failed: {}", std::strerror(errno)));
  }

  void replay() {
    if (!fs::exists(log_path_)) return;
    std::string text;
    {
      std::ifstream in(log_path_, std::ios::binary);
      text.assign(std::istreambuf_iterator<char>(in), {});
    }
    const std::size_t complete = text.rfind('\n') == std::string::npos ? 0 : text.rfind('\n') + 1;
    if (complete != text.size()) {
      log().warn("{}: dropping unacknowledged partial line", log_path_.string());
      fs::resize_file(log_path_, complete);
      text.resize(complete);
    }
    std::map<std::pair<std::string, std::string>, std::vector<SubmittedRating>> pending;
    std::size_t lineno = 0, start = 0;
    while (start < text.size()) {
      const std::size_t end = text.find('\n', start);
      const std::string line = text.substr(start, end - start);
      start = end + 1;
      ++lineno;
      try {
        const RatingRecord r = rating_record_from_json(json::parse(line));
        records_.push_back(r);
        pending[{r.annotator_id, r.batch_id}].push_back({r.image_id, r.rating});
      } catch (const std::exception& e) {
        throw ValidationError(fmt::format("{}:{}: {}", log_path_.string(), lineno, e.what()));
      }
    }
    for (const auto& [key, ratings] : pending) {
      const auto& [annotator, batch_id] = key;
      auto it = index_.find(key);
      if (it == index_.end())
        throw ValidationError(fmt::format("{}: batch '{}' is not assigned to '{}' under this campaign config",
                                          log_path_.string(), batch_id, annotator));
      try {
        check_ratings(assignment_.per_annotator.at(annotator)[it->second].batch, ratings);
      } catch (const CampaignError& e) {
        throw ValidationError(fmt::format("{}: {}", log_path_.string(), e.what()));
      }
      done_.at(annotator)[it->second].store(true);
    }
  }

  CampaignConfig cfg_;
  Dataset ds_;
  fs::path log_path_;
  Clock clock_;
  Assignment assignment_;
  std::map<std::string, std::unique_ptr<std::atomic<bool>[]>> done_;
  std::map<std::pair<std::string, std::string>, std::size_t> index_;
  mutable std::mutex write_mutex_;
  std::vector<RatingRecord> records_;
  int fd_ = -1;
};

// ---------------------------------------------------------------------------
// HTTP

struct ServerOptions {
  fs::path image_dir;           // served under /images/
  std::string image_suffix = ".jpg";
  fs::path ui_dir;              // served under / when set
};

inline int status_for(CampaignError::Kind k) {
  switch (k) {
    case CampaignError::Kind::unknown_annotator: return 404;
    case CampaignError::Kind::unknown_batch: return 404;
    case CampaignError::Kind::not_assigned: return 403;
    case CampaignError::Kind::duplicate: return 409;
    case CampaignError::Kind::invalid: return 400;
  }
  return 400;
}

inline json batch_payload(const Campaign& c, const std::string& annotator, const ServerOptions& so) {
  const auto next = c.next_batch(annotator);
  json j = {{"annotator", annotator}, {"progress", to_json(c.progress(annotator))}};
  if (!next) {
    j["done"] = true;
    return j;
  }
  j["done"] = false;
  j["batch_id"] = next->batch.batch_id;
  j["class_id"] = next->batch.class_id;
  j["shared"] = next->shared;
  json images = json::array();
  for (const auto& id : next->batch.image_ids)
    images.push_back({{"image_id", id}, {"url", "/images/" + httplib::detail::encode_url(id + so.image_suffix)}});
  j["images"] = images;
  return j;
}

// Routes:
//   GET  /api/batch?annotator=<id>     next batch or {"done": true}
//   POST /api/ratings                  {annotator, batch, ratings: [{image_id, rating}]}
//   GET  /api/progress?annotator=<id>
//   GET  /api/export[?format=summary]  ratings.jsonl, or record counts
// Annotator routes need the X-Annotator-Token header; export needs
// X-Admin-Token when the campaign sets one.
inline void install_routes(httplib::Server& srv, Campaign& c, const ServerOptions& so = {}) {
  auto reply = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto fail = [reply](httplib::Response& res, int status, const std::string& msg) { reply(res, status, {{"error", msg}}); };

  // Resolves the annotator and checks the token. Returns false after writing
  // the error response.
  auto authorise = [&c, fail](const httplib::Request& req, httplib::Response& res, const std::string& annotator) {
    if (annotator.empty()) {
      fail(res, 400, "missing annotator");
      return false;
    }
    if (!c.registered(annotator)) {
      fail(res, 404, fmt::format("unknown annotator '{}': ask the campaign organiser to register this id", annotator));
      return false;
    }
    if (c.annotator_for_token(req.get_header_value("X-Annotator-Token")) != annotator) {
      fail(res, 403, "missing or wrong X-Annotator-Token");
      return false;
    }
    return true;
  };

  srv.Get("/api/batch", [&c, so, authorise, reply](const httplib::Request& req, httplib::Response& res) {
    const std::string a = req.get_param_value("annotator");
    if (!authorise(req, res, a)) return;
    reply(res, 200, batch_payload(c, a, so));
  });

  srv.Get("/api/progress", [&c, authorise, reply](const httplib::Request& req, httplib::Response& res) {
    const std::string a = req.get_param_value("annotator");
    if (!authorise(req, res, a)) return;
    reply(res, 200, to_json(c.progress(a)));
  });

  srv.Post("/api/ratings", [&c, so, authorise, reply, fail](const httplib::Request& req, httplib::Response& res) {
    std::string annotator, batch;
    std::vector<SubmittedRating> ratings;
    try {
      const json j = json::parse(req.body);
      annotator = j.at("annotator").get<std::string>();
      batch = j.at("batch").get<std::string>();
      for (const auto& r : j.at("ratings")) {
        if (!r.at("rating").is_number_integer()) throw ValidationError("rating must be an integer");
        ratings.push_back({r.at("image_id").get<std::string>(), r.at("rating").get<int>()});
      }
    } catch (const std::exception& e) {
      fail(res, 400, fmt::format("malformed submission: {}", e.what()));
      return;
    }
    if (!authorise(req, res, annotator)) return;
    try {
      const auto recs = c.submit(annotator, batch, ratings);
      reply(res, 200, {{"accepted", recs.size()}, {"batch", batch}, {"next", batch_payload(c, annotator, so)}});
    } catch (const CampaignError& e) {
      fail(res, status_for(e.kind), e.what());
    } catch (const std::exception& e) {
      fail(res, 500, e.what());
    }
  });

  srv.Get("/api/export", [&c, reply, fail](const httplib::Request& req, httplib::Response& res) {
    if (!c.config().admin_token.empty() && req.get_header_value("X-Admin-Token") != c.config().admin_token) {
      fail(res, 403, "missing or wrong X-Admin-Token");
      return;
    }
    const RatingsExport e = c.export_ratings();
    if (req.get_param_value("format") == "summary") {
      reply(res, 200, summary_json(e));
      return;
    }
    res.status = 200;
    res.set_content(e.log, "application/x-ndjson");
  });

  if (!so.image_dir.empty() && !srv.set_mount_point("/images", so.image_dir.string()))
    throw IoError(fmt::format("image directory '{}' does not exist", so.image_dir.string()));
  if (!so.ui_dir.empty() && !srv.set_mount_point("/", so.ui_dir.string()))
    throw IoError(fmt::format("ui directory '{}' does not exist", so.ui_dir.string()));
}

}  // namespace iconika
