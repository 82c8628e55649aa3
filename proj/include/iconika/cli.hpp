#pragma once

// Command-line front end. Every subcommand loads its inputs, calls the
// library, and writes results plus run_manifest.json into --out.

#include <pthread.h>
#include <signal.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <openssl/opensslv.h>

#include "iconika/datamodel.hpp"
#include "iconika/pipeline.hpp"
#include "iconika/service.hpp"
#include "iconika/synthetic.hpp"

namespace iconika::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum ExitCode { kOk = 0, kValidation = 1, kUsage = 2 };

struct Options {
  std::string subcommand;
  fs::path manifest;
  fs::path config;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::vector<double> lambda_grid;
  std::string objective;  // bin | rank
  std::vector<std::string> indicators;
  std::string log_level;
  // serve / export
  std::string host = "127.0.0.1";
  int port = 8080;
  fs::path images;
  std::string image_suffix = ".jpg";
  fs::path ui;
  fs::path ratings_log;
  // synth
  int classes = 6;
  int images_per_class = 40;
};

// Hooks for embedding (tests): where text goes, how serve reports its port
// and how it can be told to stop without a signal.
struct Context {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
  std::function<void(int)> on_listening;
  std::atomic<bool>* stop = nullptr;
};

inline json library_versions() {
  return {{"iconika", kVersion},
          {"fmt", FMT_VERSION},
          {"spdlog", fmt::format("{}.{}.{}", SPDLOG_VER_MAJOR, SPDLOG_VER_MINOR, SPDLOG_VER_PATCH)},
          {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR, NLOHMANN_JSON_VERSION_MINOR,
                                        NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION},
          {"cpp_httplib", CPPHTTPLIB_VERSION},
          {"boost", BOOST_LIB_VERSION},
          {"openssl", OPENSSL_VERSION_TEXT}};
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ','))
    if (!part.empty()) out.push_back(part);
  return out;
}

}  // namespace detail

inline std::string hash_file(const fs::path& p) { return fs::exists(p) ? sha256_hex(read_file(p)) : ""; }

// Reads the experiment config and applies command-line overrides to its JSON,
// so the recorded config is the one that ran.
inline ExperimentConfig effective_config(const Options& o) {
  json j;
  {
    std::ifstream in(o.config);
    if (!in) throw IoError(fmt::format("cannot open config '{}'", o.config.string()));
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ValidationError(fmt::format("{}: {}", o.config.string(), e.what()));
    }
  }
  if (!j.is_object()) throw ValidationError(fmt::format("{}: config must be a JSON object", o.config.string()));
  if (o.seed) j["seed"] = *o.seed;
  if (!o.lambda_grid.empty()) j["lambda_grid"] = o.lambda_grid;
  if (!o.objective.empty()) {
    const std::string name = objective_from_string(o.objective) == Objective::binary ? "binary" : "ranking";
    j["fusion"]["learned"] = {name};
    if (j.contains("dip")) j["dip"]["objectives"] = {name};
  }
  if (!o.indicators.empty()) {
    if (!j.contains("suite") || !j["suite"].contains("indicators"))
      throw ValidationError("--indicators given but the config has no suite");
    json kept = json::array();
    for (const auto& want : o.indicators) {
      bool found = false;
      for (const auto& e : j["suite"]["indicators"])
        if (e.value("name", e.value("type", std::string{})) == want) {
          kept.push_back(e);
          found = true;
        }
      if (!found) throw ValidationError(fmt::format("--indicators: '{}' is not in the config suite", want));
    }
    j["suite"]["indicators"] = kept;
  }
  return experiment_config_from_json(j, o.config.parent_path());
}

// Same config with only the listed stages kept.
inline ExperimentConfig restrict_stages(ExperimentConfig cfg, bool average, bool learned, bool dip) {
  json& j = cfg.raw;
  if (!average) cfg.fusion_average = false;
  if (!learned) cfg.fusion_learned.clear();
  if (!dip) cfg.dip.enabled = false;
  cfg.agreement_groups.clear();
  cfg.contributions = false;
  j["fusion"]["average"] = cfg.fusion_average;
  json learned_names = json::array();
  for (Objective o : cfg.fusion_learned) learned_names.push_back(o == Objective::binary ? "binary" : "ranking");
  j["fusion"]["learned"] = learned_names;
  if (j.contains("dip")) j["dip"]["enabled"] = cfg.dip.enabled;
  j.erase("agreement");
  j["contributions"] = false;
  return cfg;
}

class Runner {
 public:
  Runner(Options o, Context& ctx) : o_(std::move(o)), ctx_(ctx) {}

  int run() {
    fs::create_directories(o_.out);
    int code = kValidation;
    try {
      code = dispatch();
    } catch (...) {
      write_run_manifest(kValidation);
      throw;
    }
    write_run_manifest(code);
    return code;
  }

 private:
  int dispatch() {
    const auto& s = o_.subcommand;
    int code = kOk;
    if (s == "ingest") code = ingest();
    else if (s == "indicators") code = indicators();
    else if (s == "train") code = train();
    else if (s == "evaluate") code = evaluate();
    else if (s == "correlate") code = correlate();
    else if (s == "fuse") code = fuse();
    else if (s == "agreement") code = agreement();
    else if (s == "experiment") code = experiment();
    else if (s == "serve") code = serve();
    else if (s == "export") code = export_ratings();
    else if (s == "synth") code = synth();
    return code;
  }

  Dataset dataset() { return load_dataset(o_.manifest); }

  ExperimentConfig config() {
    cfg_ = effective_config(o_);
    return *cfg_;
  }

  void emit(const fs::path& rel, const std::string& text) {
    fs::create_directories((o_.out / rel).parent_path());
    write_file(o_.out / rel, text);
    outputs_.push_back(rel.generic_string());
  }

  // Stage errors are reported but do not stop the other stages; the exit
  // code says something went wrong.
  int finish(const ExperimentReport& rep) {
    for (const auto& w : rep.warnings) ctx_.err << "warning: " << w << "\n";
    for (const auto& e : rep.errors) ctx_.err << "error: " << e << "\n";
    return rep.errors.empty() ? kOk : kValidation;
  }

  int ingest() {
    const Dataset ds = dataset();
    std::set<int> classes;
    for (const auto& [_, r] : ds.records) classes.insert(r.class_id);
    json feats = json::object();
    for (const auto& [name, fm] : ds.features) feats[name] = {{"dim", fm.dim}, {"rows", fm.rows.size()}};
    const json summary = {{"images", ds.records.size()},
                          {"classes", classes.size()},
                          {"train", ds.ids(Split::train).size()},
                          {"test", ds.ids(Split::test).size()},
                          {"ratings", ds.ratings.size()},
                          {"batches", ds.batches.size()},
                          {"features", feats}};
    emit("dataset_summary.json", summary.dump(2) + "\n");
    ctx_.out << summary.dump(2) << "\n";
    return kOk;
  }

  int indicators() {
    const Dataset ds = dataset();
    const ExperimentConfig cfg = config();
    const SuiteModels models = prepare_suite_models(ds, cfg.suite);
    std::vector<std::string> ids;
    for (const auto& [id, _] : ds.records) ids.push_back(id);
    const auto suite = compute_indicator_suite(ds, models, cfg.suite, ids);
    emit("indicator_scores.tsv", scores_table(suite));
    save_suite_models(models, o_.out / "suite_models");
    outputs_.push_back("suite_models/");
    ctx_.out << fmt::format("{} indicators over {} images\n", suite.size(), ids.size());
    return kOk;
  }

  int train() {
    const Dataset ds = dataset();
    const ExperimentConfig cfg = restrict_stages(config(), false, true, true);
    cfg_ = cfg;
    const ExperimentReport rep = run_experiment(ds, cfg);
    save_suite_models(rep.suite_models, o_.out / "suite_models");
    outputs_.push_back("suite_models/");
    for (const auto& [name, pm] : rep.models) {
      emit(fs::path("models") / model_file_name(name), serialize_model(pm.model, pm.whitener));
      ctx_.out << fmt::format("{}: lambda {}\n", name, pm.model.lambda);
    }
    return finish(rep);
  }

  int evaluate() {
    const Dataset ds = dataset();
    const ExperimentConfig cfg = restrict_stages(config(), false, false, false);
    cfg_ = cfg;
    const ExperimentReport rep = run_experiment(ds, cfg);
    const std::string table = evaluation_table(rep.indicators);
    emit("indicators.tsv", table);
    ctx_.out << table;
    return finish(rep);
  }

  int correlate() {
    const Dataset ds = dataset();
    const ExperimentConfig cfg = restrict_stages(config(), false, false, false);
    cfg_ = cfg;
    const ExperimentReport rep = run_experiment(ds, cfg);
    const std::string table = correlation_table(rep.correlation);
    emit("correlation.tsv", table);
    ctx_.out << table;
    return finish(rep);
  }

  int fuse() {
    const Dataset ds = dataset();
    const ExperimentConfig cfg = restrict_stages(config(), true, true, false);
    cfg_ = cfg;
    const ExperimentReport rep = run_experiment(ds, cfg);
    const std::string table = evaluation_table(rep.predictions, "method");
    emit("prediction.tsv", table);
    for (const auto& [name, pm] : rep.models)
      emit(fs::path("models") / model_file_name(name), serialize_model(pm.model, pm.whitener));
    ctx_.out << table;
    return finish(rep);
  }

  // Reads only the "agreement" section, so no indicator suite is needed.
  int agreement() {
    const Dataset ds = dataset();
    json j;
    try {
      j = json::parse(read_file(o_.config));
    } catch (const json::parse_error& e) {
      throw ValidationError(fmt::format("{}: {}", o_.config.string(), e.what()));
    }
    std::vector<AgreementGroup> groups;
    try {
      for (const auto& g : j.at("agreement").at("groups"))
        groups.push_back({g.at("name").get<std::string>(), g.at("annotators").get<std::vector<std::string>>()});
    } catch (const json::exception& e) {
      throw ValidationError(fmt::format("{}: agreement groups: {}", o_.config.string(), e.what()));
    }
    raw_config_ = j;
    const auto result = annotator_agreement(ds.ratings, groups);
    emit("agreement.tsv", agreement_table(result));
    emit("agreement_groups.tsv", agreement_summary_table(result));
    ctx_.out << agreement_summary_table(result);
    return kOk;
  }

  int experiment() {
    const Dataset ds = dataset();
    const ExperimentConfig cfg = config();
    const ExperimentReport rep = run_experiment(ds, cfg);
    write_bundle(rep, cfg, o_.out);
    for (const auto& e : fs::recursive_directory_iterator(o_.out))
      if (e.is_regular_file() && e.path().filename() != "run_manifest.json")
        outputs_.push_back(fs::relative(e.path(), o_.out).generic_string());
    std::sort(outputs_.begin(), outputs_.end());
    ctx_.out << summary_text(rep, cfg);
    return finish(rep);
  }

  CampaignConfig campaign_config() {
    json j;
    try {
      j = json::parse(read_file(o_.config));
    } catch (const json::parse_error& e) {
      throw ValidationError(fmt::format("{}: {}", o_.config.string(), e.what()));
    }
    raw_config_ = j;
    if (o_.seed) j["seed"] = *o_.seed;
    return campaign_config_from_json(j);
  }

  int serve() {
    Dataset ds = dataset();
    Campaign campaign(std::move(ds), campaign_config(), o_.out / "ratings.jsonl");
    outputs_.push_back("ratings.jsonl");
    httplib::Server srv;
    install_routes(srv, campaign, {o_.images, o_.image_suffix, o_.ui});

    // SIGINT/SIGTERM are blocked here and picked up by a watcher thread, so
    // server threads never run a handler.
    sigset_t set, old;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, &old);
    const int port = o_.port == 0 ? srv.bind_to_any_port(o_.host) : (srv.bind_to_port(o_.host, o_.port) ? o_.port : -1);
    if (port < 0) {
      pthread_sigmask(SIG_SETMASK, &old, nullptr);
      throw IoError(fmt::format("cannot listen on {}:{}", o_.host, o_.port));
    }
    std::atomic<bool> finished{false};
    std::thread watcher([&] {
      const timespec tick{0, 100'000'000};
      while (!finished.load()) {
        if (sigtimedwait(&set, nullptr, &tick) > 0 || (ctx_.stop && ctx_.stop->load())) {
          srv.stop();
          return;
        }
      }
    });
    ctx_.out << fmt::format("listening on http://{}:{}\n", o_.host, port) << std::flush;
    if (ctx_.on_listening) ctx_.on_listening(port);
    srv.listen_after_bind();
    finished = true;
    watcher.join();
    pthread_sigmask(SIG_SETMASK, &old, nullptr);
    const RatingsExport e = campaign.export_ratings();
    ctx_.out << fmt::format("stopped; {} ratings in log\n", e.records);
    return kOk;
  }

  int export_ratings() {
    Dataset ds = dataset();
    if (!fs::exists(o_.ratings_log)) throw IoError(fmt::format("ratings log '{}' not found", o_.ratings_log.string()));
    // Replay a copy: the campaign opens its log for appending.
    const fs::path scratch = o_.out / ".replay.jsonl";
    fs::copy_file(o_.ratings_log, scratch, fs::copy_options::overwrite_existing);
    RatingsExport e;
    Dataset exported;
    try {
      Campaign campaign(std::move(ds), campaign_config(), scratch);
      e = campaign.export_ratings();
      exported = campaign.export_dataset();
    } catch (...) {
      fs::remove(scratch);
      throw;
    }
    fs::remove(scratch);
    save_dataset(exported, o_.out / "dataset");
    outputs_.push_back("dataset/");
    emit("ratings.jsonl", e.log);
    emit("ratings_summary.json", summary_json(e).dump(2) + "\n");
    ctx_.out << summary_json(e).dump() << "\n";
    return kOk;
  }

  int synth() {
    SyntheticOptions so;
    so.seed = o_.seed.value_or(0);
    so.classes = o_.classes;
    so.images_per_class = o_.images_per_class;
    if (so.classes < 1 || so.images_per_class < 2 * so.B)
      throw ValidationError(fmt::format("synth: need classes >= 1 and images-per-class >= {}", 2 * so.B));
    const SyntheticDataset sd = make_synthetic_dataset(so);
    save_dataset(sd.dataset, o_.out);
    for (const char* f : {"manifest.json", "metadata.jsonl", "split.jsonl", "ratings.jsonl", "batches.jsonl", "fv.icfm"})
      outputs_.push_back(f);
    std::string truth = "image_id\ticonicity\n";
    for (const auto& [id, z] : sd.iconicity) truth += fmt::format("{}\t{:.9g}\n", id, z);
    emit("planted_iconicity.tsv", truth);
    const json example = {
        {"seed", so.seed},
        {"suite",
         {{"indicators",
           {{{"name", "BB-size"}, {"type", "bb_size"}, {"source", "gt"}},
            {{"name", "BB-dist2center"}, {"type", "bb_dist2center"}, {"source", "gt"}},
            {{"name", "Occlusion"}, {"type", "occlusion"}},
            {{"name", "Aesthetic"}, {"type", "external"}, {"score", "aesthetic"}},
            {{"name", "Memorability"}, {"type", "external"}, {"score", "memorability"}},
            {{"name", "Cluster-FV"}, {"type", "cluster"}, {"features", "fv"}},
            {{"name", "Class-SVM-FV"}, {"type", "class_svm"}, {"features", "fv"}},
            {{"name", "I2C-Att-Orac"}, {"type", "i2c_att"}},
            {{"name", "DAP-Orac"}, {"type", "dap"}, {"source", "oracle"}},
            {{"name", "DAP-FV"}, {"type", "dap"}, {"source", "predicted"}, {"features", "fv"}}}}}},
        {"lambda_grid", {1e-4, 1e-3, 1e-2, 1e-1, 1.0}},
        {"epochs", 200},
        {"dip", {{"enabled", true}, {"features", "fv"}}}};
    emit("experiment.json", example.dump(2) + "\n");

    CampaignConfig campaign;
    campaign.classes_per_annotator = std::min(so.classes, 6);
    campaign.shared_classes = std::min(so.classes, 2);
    campaign.shared_set_size = campaign.shared_classes * so.B;
    Rng rng(so.seed);
    for (int i = 1; i <= 4; ++i)
      for (auto* side : {&campaign.train_annotators, &campaign.test_annotators}) {
        const std::string id = fmt::format("{}{:02}", side == &campaign.train_annotators ? "tr" : "te", i);
        side->push_back(id);
        campaign.tokens[id] = fmt::format("{:016x}", rng());
      }
    campaign.groups = {{"train-g1", {"tr01", "tr02"}}, {"test-g1", {"te01", "te02"}}};
    campaign.admin_token = fmt::format("{:016x}", rng());
    campaign.seed = so.seed;
    emit("campaign.json", to_json(campaign).dump(2) + "\n");
    ctx_.out << fmt::format("wrote {} images to {}\n", sd.dataset.records.size(), o_.out.string());
    return kOk;
  }

  void write_run_manifest(int code) {
    json m = {{"tool", "iconika"},
              {"subcommand", o_.subcommand},
              {"exit_code", code},
              {"versions", library_versions()},
              {"outputs", outputs_}};
    if (!o_.manifest.empty()) {
      m["manifest"] = o_.manifest.string();
      m["manifest_sha256"] = hash_file(o_.manifest);
    }
    if (!o_.config.empty()) {
      m["config_path"] = o_.config.string();
      m["config_file_sha256"] = hash_file(o_.config);
    }
    if (cfg_) {
      m["seed"] = cfg_->seed;
      m["config"] = cfg_->raw;
      m["config_sha256"] = sha256_hex(cfg_->raw.dump());
    } else {
      m["seed"] = o_.seed.value_or(0);
      if (!raw_config_.is_null()) {
        m["config"] = raw_config_;
        m["config_sha256"] = sha256_hex(raw_config_.dump());
      }
    }
    write_file(o_.out / "run_manifest.json", m.dump(2) + "\n");
  }

  Options o_;
  Context& ctx_;
  std::optional<ExperimentConfig> cfg_;
  json raw_config_;
  std::vector<std::string> outputs_;
};

// Parses argv and runs. Returns the process exit code.
inline int run(int argc, const char* const* argv, Context ctx = {}) {
  CLI::App app{"iconika: image iconicity indicators, predictors and annotation campaigns", "iconika"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));
  Options o;
  std::string lambda_grid, indicator_list;
  std::optional<std::uint64_t> seed;

  auto common = [&](CLI::App* sc, bool manifest, bool config) {
    sc->add_option("--out", o.out, "output directory")->required();
    sc->add_option("--seed", seed, "random seed (default 0, or the config's)");
    sc->add_option("--log-level", o.log_level, "trace|debug|info|warn|error|off (overrides ICONIKA_LOG)");
    if (manifest) sc->add_option("--manifest", o.manifest, "dataset manifest.json")->required();
    if (config) sc->add_option("--config", o.config, "config file (JSON)")->required();
  };
  auto modelling = [&](CLI::App* sc) {
    sc->add_option("--lambda-grid", lambda_grid, "comma-separated lambda values");
    sc->add_option("--objective", o.objective, "bin or rank")->check(CLI::IsMember({"bin", "rank", "binary", "ranking"}));
    sc->add_option("--indicators", indicator_list, "comma-separated indicator names from the config suite");
  };

  common(app.add_subcommand("ingest", "validate a dataset and summarise it"), true, false);
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"indicators", "compute the indicator suite for every image"},
           {"train", "train auxiliary, fusion and direct predictors"},
           {"evaluate", "SRC, p-value and AP of each indicator on the test split"},
           {"correlate", "pairwise SRC between indicators on the test split"},
           {"fuse", "average and learned fusion of the suite"},
           {"experiment", "run every configured stage and write a report bundle"}}) {
    auto* sc = app.add_subcommand(name, help);
    common(sc, true, true);
    modelling(sc);
  }
  common(app.add_subcommand("agreement", "inter-annotator agreement for configured groups"), true, true);
  auto* serve = app.add_subcommand("serve", "run the annotation service (ratings log in --out)");
  common(serve, true, true);
  serve->add_option("--port", o.port, "TCP port, 0 picks a free one")->check(CLI::Range(0, 65535));
  serve->add_option("--host", o.host, "bind address");
  serve->add_option("--images", o.images, "directory served under /images/");
  serve->add_option("--image-suffix", o.image_suffix, "appended to image ids in image URLs");
  serve->add_option("--ui", o.ui, "directory served under /");
  auto* exp = app.add_subcommand("export", "replay a ratings log and export it as a dataset");
  common(exp, true, true);
  exp->add_option("--log", o.ratings_log, "ratings log written by serve")->required();
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset with planted iconicity");
  common(synth, false, false);
  synth->add_option("--classes", o.classes, "number of classes");
  synth->add_option("--images-per-class", o.images_per_class, "images per class");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, ctx.out, ctx.err);
      return kOk;
    }
    std::string what = e.what();
    if (argc > 1 && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr)
      what = fmt::format("unknown subcommand '{}'", argv[1]);
    ctx.err << "error: " << what << "\n\n" << app.help();
    return kUsage;
  }

  o.subcommand = app.get_subcommands().front()->get_name();
  o.seed = seed;
  try {
    for (const auto& part : detail::split_list(lambda_grid)) o.lambda_grid.push_back(std::stod(part));
  } catch (const std::exception&) {
    ctx.err << "error: --lambda-grid expects comma-separated numbers\n";
    return kUsage;
  }
  o.indicators = detail::split_list(indicator_list);
  if (!o.log_level.empty()) log().set_level(spdlog::level::from_str(o.log_level));

  try {
    Runner runner(o, ctx);
    return runner.run();
  } catch (const std::exception& e) {
    ctx.err << "error: " << e.what() << "\n";
    return kValidation;
  }
}

}  // namespace iconika::cli
