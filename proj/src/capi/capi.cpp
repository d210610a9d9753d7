#include <cstdlib>
#include <cstring>

#include "folioseg/api.hpp"
#include "folioseg/error.hpp"
#include "folioseg/folioseg.h"
#include "folioseg/http_provider.hpp"
#include "folioseg/image_store.hpp"
#include "folioseg/pipeline.hpp"
#include "folioseg/text.hpp"

using namespace folioseg;

struct fs_project {
  corpus::Project project;
  std::unique_ptr<ImageStore> store = std::make_unique<ImageStore>();
};

struct fs_provider {
  std::shared_ptr<provider::Provider> provider;
};

struct fs_service {
  std::unique_ptr<api::Service> service;
};

struct fs_provider_server {
  std::unique_ptr<provider::ProviderServer> server;
  int port = 0;
};

static_assert(FS_ERR_INVALID_ARGUMENT == static_cast<int>(ErrorCode::InvalidArgument) + 1);
static_assert(FS_ERR_INTERNAL == static_cast<int>(ErrorCode::Internal) + 1);

namespace {

thread_local std::string last_error;

fs_status status_of(ErrorCode code) { return static_cast<fs_status>(static_cast<int>(code) + 1); }

template <typename F>
fs_status guarded(F&& f) noexcept {
  try {
    f();
    last_error.clear();
    return FS_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const Json::exception& e) {
    last_error = e.what();
    return FS_ERR_PARSE;
  } catch (const std::exception& e) {
    last_error = e.what();
    return FS_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return FS_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  require(p != nullptr, ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}

std::string text(const char* s, const char* fallback = "") { return s ? s : fallback; }

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const Json& j) {
  if (out) *out = dup(j.dump());
}

Json issues_json(std::vector<corpus::RecordIssue> issues) {
  std::stable_sort(issues.begin(), issues.end(), [](const auto& a, const auto& b) { return a.line < b.line; });
  Json list = Json::array();
  for (const auto& i : issues) list.push_back(Json{{"line", i.line}, {"message", i.message}});
  return list;
}

}  // namespace

extern "C" {

const char* fs_version(void) { return "0.1.0"; }

const char* fs_status_name(fs_status status) {
  if (status == FS_OK) return "ok";
  if (status < FS_ERR_INVALID_ARGUMENT || status > FS_ERR_INTERNAL) return "unknown";
  return error_code_name(static_cast<ErrorCode>(status - 1)).data();
}

const char* fs_last_error_message(void) { return last_error.c_str(); }

void fs_string_free(char* s) { std::free(s); }

fs_status fs_project_create(const char* name, fs_project** out) {
  return guarded([&] {
    need(out, "out");
    *out = new fs_project{corpus::Project(text(name))};
  });
}

fs_status fs_project_load(const char* path, fs_project** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new fs_project{corpus::load_project(path)};
  });
}

fs_status fs_project_save(const fs_project* project, const char* path) {
  return guarded([&] {
    need(project, "project");
    need(path, "path");
    corpus::save_project(project->project, path);
  });
}

void fs_project_free(fs_project* project) { delete project; }

fs_status fs_project_set_cache_dir(fs_project* project, const char* dir) {
  return guarded([&] {
    need(project, "project");
    project->store = std::make_unique<ImageStore>(text(dir));
  });
}

fs_status fs_project_add_folio(fs_project* project, const char* id, const char* image_uri, const char* shelfmark,
                               const char* folio_ref, const char* actor) {
  return guarded([&] {
    need(project, "project");
    need(image_uri, "image_uri");
    std::string fid = text(id);
    if (fid.empty()) {
      const std::string uri = image_uri;
      auto stem = uri.substr(uri.find_last_of('/') + 1);
      fid = slugify(stem.substr(0, stem.find_first_of(".?#")));
    }
    auto folio = make_folio(*project->store, fid, image_uri, text(shelfmark), text(folio_ref));
    project->project.add_folio(std::move(folio), text(actor, "cli"));
  });
}

fs_status fs_project_add_label(fs_project* project, const char* label_json, const char* actor) {
  return guarded([&] {
    need(project, "project");
    need(label_json, "label_json");
    auto j = wire::parse(label_json);
    if (!j.contains("id")) j["id"] = slugify(wire::string_field(j, "lemma"));
    project->project.add_label(corpus::label_from_json(j), text(actor, "cli"));
  });
}

fs_status fs_project_import(fs_project* project, const char* path, fs_import_kind kind, const char* actor,
                            char** report_json) {
  return guarded([&] {
    need(project, "project");
    need(path, "path");
    std::vector<corpus::RecordIssue> issues;
    const auto records = corpus::read_legacy_file(path, issues);
    auto report = kind == FS_IMPORT_BOXES ? corpus::import_legacy_boxes(project->project, records, text(actor, "cli"))
                                          : corpus::import_legacy_image_tags(project->project, records, text(actor, "cli"));
    issues.insert(issues.end(), report.rejected.begin(), report.rejected.end());
    emit(report_json, Json{{"created", report.created},
                           {"rejected", issues_json(issues)},
                           {"warnings", issues_json(report.warnings)},
                           {"partial", !issues.empty()}});
  });
}

fs_status fs_project_stats(const fs_project* project, char** stats_json) {
  return guarded([&] {
    need(project, "project");
    emit(stats_json, corpus::to_json(corpus::stats(project->project)));
  });
}

fs_status fs_project_json(const fs_project* project, char** project_json) {
  return guarded([&] {
    need(project, "project");
    need(project_json, "project_json");
    *project_json = dup(project->project.to_json().dump(2) + "\n");
  });
}

fs_status fs_project_export_coco(const fs_project* project, fs_export_scope scope, char** document_json,
                                 char** report_json) {
  return guarded([&] {
    need(project, "project");
    const auto out = corpus::export_coco(project->project, scope == FS_EXPORT_ALL_INSTANCES
                                                                ? corpus::ExportMode::AllInstances
                                                                : corpus::ExportMode::ValidatedOnly);
    const auto& r = out.report;
    const Json report{{"exported", r.exported},
                      {"skipped_no_mask", r.skipped_no_mask},
                      {"skipped_unlabeled", r.skipped_unlabeled},
                      {"skipped_status", r.skipped_status},
                      {"warnings", r.warnings}};
    // Allocate both before handing either out, so a failure leaks nothing.
    char* doc = document_json ? dup(out.text()) : nullptr;
    char* rep = nullptr;
    try {
      if (report_json) rep = dup(report.dump());
    } catch (...) {
      std::free(doc);
      throw;
    }
    if (document_json) *document_json = doc;
    if (report_json) *report_json = rep;
  });
}

fs_status fs_provider_open(const char* url, int64_t timeout_ms, fs_provider** out) {
  return guarded([&] {
    need(url, "url");
    need(out, "out");
    api::ProviderConfig config;
    config.url = url;
    if (timeout_ms > 0) config.timeout = std::chrono::milliseconds(timeout_ms);
    auto p = api::open_provider(config);
    require(p != nullptr, ErrorCode::InvalidArgument, "empty provider URL");
    *out = new fs_provider{std::move(p)};
  });
}

void fs_provider_free(fs_provider* provider) { delete provider; }

fs_status fs_provider_describe(fs_provider* provider, char** descriptor_json) {
  return guarded([&] {
    need(provider, "provider");
    emit(descriptor_json, wire::descriptor_to_json(provider->provider->describe()));
  });
}

fs_status fs_automask(fs_project* project, fs_provider* provider, const char* folio_id, const char* config_json,
                      const char* actor, char** result_json) {
  return guarded([&] {
    need(project, "project");
    need(provider, "provider");
    need(folio_id, "folio_id");
    auto& p = project->project;
    const auto& folio = p.folio(folio_id);
    Json merged = corpus::to_json(p.automask_defaults());
    if (config_json && *config_json) {
      const auto overrides = wire::parse(config_json);
      for (const auto& [k, v] : overrides.items()) {
        require(merged.contains(k), ErrorCode::InvalidArgument, "unknown automask setting " + k);
        merged[k] = v;
      }
    }
    const auto config = corpus::automask_from_json(merged);
    const auto kept = pipeline::generate_automask(project->store->input(folio), *provider->provider, config);
    std::vector<std::string> ids;
    if (!kept.empty()) ids = pipeline::commit_automask(p, folio_id, kept, text(actor, "cli"));
    emit(result_json, Json{{"folio_id", folio_id}, {"proposals", kept.size()}, {"annotation_ids", ids}});
  });
}

fs_status fs_ground(fs_project* project, fs_provider* provider, const char* folio_id, const char* phrases_json,
                    const char* actor, char** result_json) {
  return guarded([&] {
    need(project, "project");
    need(provider, "provider");
    need(folio_id, "folio_id");
    need(phrases_json, "phrases_json");
    auto& p = project->project;
    const auto phrases = wire::parse(phrases_json).get<std::vector<std::string>>();
    const auto result = pipeline::ground_annotations(p, project->store->input(p.folio(folio_id)), phrases,
                                                     *provider->provider);
    std::vector<std::string> ids;
    if (!result.drafts.empty()) ids = pipeline::commit_grounded(p, folio_id, result, text(actor, "cli"));
    Json failures = Json::array();
    for (const auto& f : result.failures)
      failures.push_back(Json{{"phrase", f.phrase}, {"code", std::string(error_code_name(f.code))}, {"message", f.message}});
    emit(result_json, Json{{"folio_id", folio_id},
                           {"annotation_ids", ids},
                           {"failures", failures},
                           {"undetected", result.undetected}});
  });
}

fs_status fs_service_start(const char* config_json, const char* base_dir, fs_service** out) {
  return guarded([&] {
    need(out, "out");
    const auto config =
        api::config_from_json(config_json && *config_json ? wire::parse(config_json) : Json::object(), text(base_dir));
    auto service = std::make_unique<api::Service>(config, api::open_provider(config.provider));
    service->start();
    *out = new fs_service{std::move(service)};
  });
}

int fs_service_port(const fs_service* service) { return service ? service->service->port() : -1; }

fs_status fs_service_wait(fs_service* service) {
  return guarded([&] {
    need(service, "service");
    service->service->wait();
  });
}

fs_status fs_service_stop(fs_service* service) {
  return guarded([&] {
    need(service, "service");
    service->service->stop();
  });
}

void fs_service_free(fs_service* service) { delete service; }

fs_status fs_provider_server_start(fs_provider* provider, const char* host, int port, fs_provider_server** out) {
  return guarded([&] {
    need(provider, "provider");
    need(out, "out");
    auto server = std::make_unique<provider::ProviderServer>(provider->provider);
    const int bound = server->start(text(host, "127.0.0.1"), port);
    *out = new fs_provider_server{std::move(server), bound};
  });
}

int fs_provider_server_port(const fs_provider_server* server) { return server ? server->port : -1; }

fs_status fs_provider_server_wait(fs_provider_server* server) {
  return guarded([&] {
    need(server, "server");
    server->server->wait();
  });
}

fs_status fs_provider_server_stop(fs_provider_server* server) {
  return guarded([&] {
    need(server, "server");
    server->server->stop();
  });
}

void fs_provider_server_free(fs_provider_server* server) { delete server; }

}  // extern "C"
