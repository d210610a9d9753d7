// folioseg command line: batch counterparts of the annotation workflow plus
// the HTTP service. Everything goes through the C API.
//
// Exit codes: 0 success, 1 partial failure (some records or folios were
// rejected), 2 fatal error.

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "folioseg/folioseg.h"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kFatal = 2;

struct Failure {
  fs_status status;
  std::string message;
};

void check(fs_status s, const std::string& context) {
  if (s != FS_OK) throw Failure{s, context + ": " + fs_last_error_message() + " [" + fs_status_name(s) + "]"};
}

/// Owns a string returned by the library.
class Owned {
 public:
  Owned() = default;
  ~Owned() { fs_string_free(p_); }
  Owned(const Owned&) = delete;
  Owned& operator=(const Owned&) = delete;
  char** out() { return &p_; }
  std::string str() const { return p_ ? p_ : ""; }
  Json json() const { return Json::parse(str()); }

 private:
  char* p_ = nullptr;
};

template <typename T, void (*Free)(T*)>
class Handle {
 public:
  Handle() = default;
  ~Handle() { Free(p_); }
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  T** out() { return &p_; }
  T* get() const { return p_; }

 private:
  T* p_ = nullptr;
};

using Project = Handle<fs_project, fs_project_free>;
using Provider = Handle<fs_provider, fs_provider_free>;
using Service = Handle<fs_service, fs_service_free>;
using ProviderServer = Handle<fs_provider_server, fs_provider_server_free>;

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Failure{FS_ERR_IO, "cannot read " + path.string()};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Globals {
  std::string project;
  std::string provider_url;
  std::string config;
  std::string actor = "cli";
  bool json = false;

  Json config_json() const {
    if (config.empty()) return Json::object();
    try {
      return Json::parse(read_text(config));
    } catch (const Json::exception& e) {
      throw Failure{FS_ERR_PARSE, config + ": " + e.what()};
    }
  }
  std::string config_dir() const { return config.empty() ? std::string() : fs::path(config).parent_path().string(); }

  void need_project() const {
    if (project.empty()) throw Failure{FS_ERR_INVALID_ARGUMENT, "--project is required for this command"};
  }

  void load(Project& p) const {
    need_project();
    check(fs_project_load(project.c_str(), p.out()), "loading " + project);
    if (const auto c = config_json(); c.contains("cache_dir"))
      check(fs_project_set_cache_dir(p.get(), c["cache_dir"].get<std::string>().c_str()), "cache_dir");
  }
  void save(const Project& p) const { check(fs_project_save(p.get(), project.c_str()), "saving " + project); }

  /// --provider-url wins over the config file's provider.url.
  void open_provider(Provider& p) const {
    std::string url = provider_url;
    std::int64_t timeout_ms = 0;
    const auto c = config_json();
    if (const auto it = c.find("provider"); it != c.end()) {
      if (url.empty()) {
        url = it->value("url", std::string());
        if (url.rfind("mock:", 0) == 0 && !config_dir().empty() && fs::path(url.substr(5)).is_relative())
          url = "mock:" + (fs::path(config_dir()) / url.substr(5)).string();
      }
      timeout_ms = it->value("timeout_ms", std::int64_t{0});
    }
    if (url.empty()) throw Failure{FS_ERR_PROVIDER_UNAVAILABLE, "no provider: pass --provider-url or set provider.url"};
    check(fs_provider_open(url.c_str(), timeout_ms, p.out()), "opening provider " + url);
  }
};

void print_issues(const char* kind, const Json& list) {
  for (const auto& i : list)
    std::cerr << kind << " line " << i["line"].get<std::size_t>() << ": " << i["message"].get<std::string>() << "\n";
}

/// Blocks SIGINT/SIGTERM in every thread started afterwards and returns a
/// function that waits for one of them.
auto capture_signals() {
  static sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return [] {
    int sig = 0;
    sigwait(&set, &sig);
    return sig;
  };
}

int run_import(const Globals& g, const std::string& file, fs_import_kind kind) {
  Project p;
  g.load(p);
  Owned report;
  check(fs_project_import(p.get(), file.c_str(), kind, g.actor.c_str(), report.out()), "importing " + file);
  g.save(p);
  const auto r = report.json();
  if (g.json) {
    std::cout << r.dump(2) << "\n";
  } else {
    std::cout << "created " << r["created"].size() << ", rejected " << r["rejected"].size() << ", warnings "
              << r["warnings"].size() << "\n";
  }
  print_issues("rejected", r["rejected"]);
  print_issues("warning", r["warnings"]);
  return r["partial"].get<bool>() ? kPartial : kOk;
}

struct AutomaskFlags {
  std::optional<double> min_quality;
  std::optional<std::uint64_t> min_area;
  std::optional<double> nms_iou;
  std::optional<std::uint32_t> max_proposals;
};

int run_automask(const Globals& g, std::vector<std::string> folios, const AutomaskFlags& flags) {
  Project p;
  g.load(p);
  Provider provider;
  g.open_provider(provider);
  Json config = Json::object();
  if (const auto c = g.config_json(); c.contains("automask")) config = c["automask"];
  if (flags.min_quality) config["min_quality"] = *flags.min_quality;
  if (flags.min_area) config["min_area"] = *flags.min_area;
  if (flags.nms_iou) config["nms_iou"] = *flags.nms_iou;
  if (flags.max_proposals) config["max_proposals"] = *flags.max_proposals;
  if (folios.empty()) {
    Owned doc;
    check(fs_project_json(p.get(), doc.out()), "reading project");
    const auto project = doc.json();
    for (const auto& f : project["folios"]) folios.push_back(f["id"].get<std::string>());
  }
  const auto config_text = config.dump();
  std::size_t ok = 0;
  std::size_t failed = 0;
  Json results = Json::array();
  for (const auto& f : folios) {
    Owned result;
    const auto s = fs_automask(p.get(), provider.get(), f.c_str(), config_text.c_str(), g.actor.c_str(), result.out());
    if (s != FS_OK) {
      // Bad settings or a dead provider fail every folio alike.
      if (s == FS_ERR_INVALID_ARGUMENT || s == FS_ERR_PARSE || s == FS_ERR_PROVIDER_UNAVAILABLE ||
          s == FS_ERR_CAPABILITY_MISSING)
        check(s, "automask " + f);
      std::cerr << "automask " << f << ": " << fs_last_error_message() << " [" << fs_status_name(s) << "]\n";
      results.push_back(Json{{"folio_id", f}, {"error", fs_last_error_message()}});
      ++failed;
      continue;
    }
    const auto r = result.json();
    results.push_back(r);
    if (!g.json) std::cout << f << ": " << r["annotation_ids"].size() << " drafts\n";
    ++ok;
  }
  if (ok > 0) g.save(p);
  if (g.json) std::cout << Json{{"folios", results}}.dump(2) << "\n";
  if (failed == 0) return kOk;
  return ok > 0 ? kPartial : kFatal;
}

int run_ground(const Globals& g, const std::string& folio, const std::vector<std::string>& phrases) {
  Project p;
  g.load(p);
  Provider provider;
  g.open_provider(provider);
  Owned result;
  check(fs_ground(p.get(), provider.get(), folio.c_str(), Json(phrases).dump().c_str(), g.actor.c_str(), result.out()),
        "ground " + folio);
  g.save(p);
  const auto r = result.json();
  if (g.json) {
    std::cout << r.dump(2) << "\n";
  } else {
    std::cout << folio << ": " << r["annotation_ids"].size() << " drafts\n";
    for (const auto& u : r["undetected"]) std::cout << "not found in image: " << u.get<std::string>() << "\n";
  }
  for (const auto& f : r["failures"])
    std::cerr << "phrase '" << f["phrase"].get<std::string>() << "': " << f["message"].get<std::string>() << "\n";
  return r["failures"].empty() ? kOk : kPartial;
}

int run_export(const Globals& g, const std::string& out, const std::string& scope) {
  Project p;
  g.load(p);
  fs_export_scope s = FS_EXPORT_VALIDATED_ONLY;
  if (scope == "all_instances") s = FS_EXPORT_ALL_INSTANCES;
  else if (scope != "validated_only") throw Failure{FS_ERR_INVALID_ARGUMENT, "unknown scope " + scope};
  Owned doc;
  Owned report;
  check(fs_project_export_coco(p.get(), s, doc.out(), report.out()), "export");
  if (out.empty() || out == "-") {
    std::cout << doc.str();
  } else {
    const auto tmp = out + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary);
      f << doc.str();
      if (!f) throw Failure{FS_ERR_IO, "cannot write " + out};
    }
    fs::rename(tmp, out);
  }
  const auto r = report.json();
  std::cerr << "exported " << r["exported"].get<std::uint64_t>() << " annotations";
  std::cerr << " (skipped: " << r["skipped_status"].get<std::uint64_t>() << " by status, "
            << r["skipped_unlabeled"].get<std::uint64_t>() << " unlabeled, " << r["skipped_no_mask"].get<std::uint64_t>()
            << " without mask)\n";
  for (const auto& w : r["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
  return kOk;
}

int run_serve(const Globals& g, std::optional<int> port, const std::string& root) {
  auto config = g.config_json();
  if (port) config["port"] = *port;
  if (!root.empty()) config["project_root"] = fs::absolute(root).string();
  if (!g.provider_url.empty()) config["provider"]["url"] = g.provider_url;
  const auto wait_signal = capture_signals();
  Service service;
  check(fs_service_start(config.dump().c_str(), g.config_dir().c_str(), service.out()), "starting service");
  std::cout << "listening on port " << fs_service_port(service.get()) << std::endl;
  wait_signal();
  check(fs_service_stop(service.get()), "stopping service");
  std::cout << "stopped" << std::endl;
  return kOk;
}

int run_serve_mock(const std::string& fixtures, const std::string& host, int port) {
  const auto wait_signal = capture_signals();
  Provider provider;
  check(fs_provider_open(("mock:" + fixtures).c_str(), 0, provider.out()), "loading fixtures");
  ProviderServer server;
  check(fs_provider_server_start(provider.get(), host.c_str(), port, server.out()), "starting provider server");
  std::cout << "listening on " << host << ":" << fs_provider_server_port(server.get()) << std::endl;
  wait_signal();
  check(fs_provider_server_stop(server.get()), "stopping provider server");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"folioseg: segmentation and labeling of illuminated manuscript folios"};
  app.set_version_flag("--version", std::string(fs_version()));
  app.require_subcommand(1);
  Globals g;
  app.add_option("--project", g.project, "Project file");
  app.add_option("--provider-url", g.provider_url, "Provider: mock:<fixture dir> or a sidecar URL");
  app.add_option("--config", g.config, "Service/config file (JSON)")->check(CLI::ExistingFile);
  app.add_option("--actor", g.actor, "Name recorded on every change");
  app.add_flag("--json", g.json, "Print machine-readable reports");

  int code = kOk;
  std::function<int()> action;

  auto* init = app.add_subcommand("init", "Create an empty project file");
  std::string init_name;
  bool force = false;
  init->add_option("--name", init_name, "Project name (defaults to the file stem)");
  init->add_flag("--force", force, "Overwrite an existing file");
  init->callback([&] {
    action = [&] {
      g.need_project();
      if (fs::exists(g.project) && !force) throw Failure{FS_ERR_CONFLICT, g.project + " already exists"};
      Project p;
      check(fs_project_create((init_name.empty() ? fs::path(g.project).stem().string() : init_name).c_str(), p.out()),
            "create");
      g.save(p);
      std::cout << "created " << g.project << "\n";
      return kOk;
    };
  });

  auto* add_folio = app.add_subcommand("add-folio", "Register folio images (paths or URLs)");
  std::vector<std::string> images;
  std::string folio_id, shelfmark, folio_ref;
  add_folio->add_option("images", images, "Image paths or URLs")->required();
  add_folio->add_option("--id", folio_id, "Folio id (single image only; default: file stem)");
  add_folio->add_option("--shelfmark", shelfmark);
  add_folio->add_option("--folio-ref", folio_ref);
  add_folio->callback([&] {
    action = [&] {
      if (!folio_id.empty() && images.size() != 1) throw Failure{FS_ERR_INVALID_ARGUMENT, "--id needs exactly one image"};
      Project p;
      g.load(p);
      for (const auto& img : images)
        check(fs_project_add_folio(p.get(), folio_id.empty() ? nullptr : folio_id.c_str(), img.c_str(),
                                   shelfmark.c_str(), folio_ref.c_str(), g.actor.c_str()),
              img);
      g.save(p);
      std::cout << "added " << images.size() << " folio(s)\n";
      return kOk;
    };
  });

  auto* add_label = app.add_subcommand("add-label", "Add a vocabulary entry");
  std::string lemma, gloss, language, parent, label_id;
  std::vector<std::string> aliases;
  add_label->add_option("lemma", lemma, "Lemma (catalogue term)")->required();
  add_label->add_option("--id", label_id);
  add_label->add_option("--gloss", gloss, "Translation, e.g. English");
  add_label->add_option("--language", language);
  add_label->add_option("--alias", aliases);
  add_label->add_option("--parent", parent, "Parent label id");
  add_label->callback([&] {
    action = [&] {
      Json l{{"lemma", lemma}};
      if (!label_id.empty()) l["id"] = label_id;
      if (!gloss.empty()) l["gloss"] = gloss;
      if (!language.empty()) l["language"] = language;
      if (!aliases.empty()) l["aliases"] = aliases;
      if (!parent.empty()) l["parent"] = parent;
      Project p;
      g.load(p);
      check(fs_project_add_label(p.get(), l.dump().c_str(), g.actor.c_str()), "add-label");
      g.save(p);
      return kOk;
    };
  });

  std::string import_file;
  auto* import_tags = app.add_subcommand("import-tags", "Import legacy image-level tags (.csv or .json)");
  import_tags->add_option("file", import_file)->required()->check(CLI::ExistingFile);
  import_tags->callback([&] { action = [&] { return run_import(g, import_file, FS_IMPORT_TAGS); }; });
  auto* import_boxes = app.add_subcommand("import-boxes", "Import legacy bounding boxes (.csv or .json)");
  import_boxes->add_option("file", import_file)->required()->check(CLI::ExistingFile);
  import_boxes->callback([&] { action = [&] { return run_import(g, import_file, FS_IMPORT_BOXES); }; });

  auto* automask = app.add_subcommand("automask", "Generate unlabeled draft masks for folios");
  std::vector<std::string> automask_folios;
  AutomaskFlags flags;
  automask->add_option("--folio", automask_folios, "Folio ids (default: all)");
  automask->add_option("--min-quality", flags.min_quality);
  automask->add_option("--min-area", flags.min_area);
  automask->add_option("--nms-iou", flags.nms_iou);
  automask->add_option("--max-proposals", flags.max_proposals);
  automask->callback([&] { action = [&] { return run_automask(g, automask_folios, flags); }; });

  auto* ground = app.add_subcommand("ground", "Draft labeled masks from text phrases");
  std::string ground_folio;
  std::vector<std::string> phrases;
  ground->add_option("--folio", ground_folio)->required();
  ground->add_option("phrases", phrases)->required();
  ground->callback([&] { action = [&] { return run_ground(g, ground_folio, phrases); }; });

  auto* export_cmd = app.add_subcommand("export", "Write a COCO instance-segmentation file");
  std::string out_path, scope = "validated_only";
  export_cmd->add_option("--out,-o", out_path, "Output file (default: stdout)");
  export_cmd->add_option("--scope", scope, "validated_only or all_instances");
  export_cmd->callback([&] { action = [&] { return run_export(g, out_path, scope); }; });

  auto* stats = app.add_subcommand("stats", "Print annotation counts");
  stats->callback([&] {
    action = [&] {
      Project p;
      g.load(p);
      Owned s;
      check(fs_project_stats(p.get(), s.out()), "stats");
      std::cout << s.json().dump(2) << "\n";
      return kOk;
    };
  });

  auto* serve = app.add_subcommand("serve", "Run the HTTP service until SIGINT/SIGTERM");
  std::optional<int> port;
  std::string project_root;
  serve->add_option("--port", port);
  serve->add_option("--project-root", project_root);
  serve->callback([&] { action = [&] { return run_serve(g, port, project_root); }; });

  auto* serve_mock = app.add_subcommand("serve-mock-provider", "Serve the deterministic mock provider over HTTP");
  std::string fixtures, host = "127.0.0.1";
  int mock_port = 8601;
  serve_mock->add_option("--fixtures", fixtures, "Directory of images with .truth.json sidecars")
      ->required()
      ->check(CLI::ExistingDirectory);
  serve_mock->add_option("--host", host);
  serve_mock->add_option("--port", mock_port);
  serve_mock->callback([&] { action = [&] { return run_serve_mock(fixtures, host, mock_port); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kFatal;
  }
  try {
    code = action();
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return kFatal;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFatal;
  }
  return code;
}
