#include <atomic>
#include <regex>
#include <set>
#include <shared_mutex>
#include <thread>

#include "../http_common.hpp"
#include "folioseg/api.hpp"
#include "folioseg/error.hpp"
#include "folioseg/image_store.hpp"
#include "folioseg/pipeline.hpp"
#include "folioseg/suggest.hpp"
#include "folioseg/text.hpp"

namespace folioseg::api {

namespace fs = std::filesystem;
using corpus::Project;
using httplib::Request;
using httplib::Response;

namespace {

/// An error whose body carries structured details.
class DetailedError : public Error {
 public:
  DetailedError(ErrorCode code, const std::string& message, Json details)
      : Error(code, message), details_(std::move(details)) {}
  const Json& details() const noexcept { return details_; }

 private:
  Json details_;
};

struct ProjectSlot {
  std::string name;
  fs::path path;
  std::mutex writer;  // one mutation at a time
  mutable std::mutex snapshot_mutex;
  std::shared_ptr<const Project> snapshot;
  std::mutex index_mutex;
  suggest::SegmentIndex index;

  std::shared_ptr<const Project> current() const {
    std::lock_guard lock(snapshot_mutex);
    return snapshot;
  }
};

struct Job {
  std::string id;
  std::string kind;
  std::string project;
  std::string folio;
  std::string state = "queued";
  Json result = nullptr;
  Json error = nullptr;
};

struct Worker {
  std::thread thread;
  std::shared_ptr<std::atomic<bool>> done;
};

const Json kHandled = Json(Json::value_t::discarded);

Json job_json(const Job& j) {
  return Json{{"id", j.id},   {"kind", j.kind},     {"project", j.project}, {"folio_id", j.folio},
              {"state", j.state}, {"result", j.result}, {"error", j.error}};
}

Json annotation_view(const corpus::Annotation& a) {
  auto j = corpus::to_json(a);
  j["bbox"] = a.bbox ? wire::box_to_json(*a.bbox) : Json(nullptr);
  Json polygons = Json::array();
  for (const auto& p : a.polygons) polygons.push_back(wire::polygon_to_json(p));
  j["polygons"] = polygons;
  return j;
}

Json proposal_view(const geometry::Proposal& p) {
  auto j = wire::proposal_to_json(p);
  j["area"] = geometry::mask_area(p.mask);
  const auto box = geometry::mask_bbox(p.mask);
  j["bbox"] = box ? wire::box_to_json(*box) : Json(nullptr);
  return j;
}

Json error_json(ErrorCode code, const std::string& message) {
  return Json{{"code", std::string(error_code_name(code))}, {"message", message}};
}

Json body_of(const Request& req) {
  if (req.body.empty()) return Json::object();
  auto j = wire::parse(req.body);
  require(j.is_object(), ErrorCode::Parse, "request body must be a JSON object");
  return j;
}

bool valid_project_name(const std::string& name) {
  static const std::regex pattern("[A-Za-z0-9][A-Za-z0-9_-]{0,63}");
  return std::regex_match(name, pattern);
}

/// `mask` as RLE JSON or `polygons` rasterized onto the folio grid.
std::optional<geometry::BinaryMask> mask_from_body(const Json& body, geometry::GridDims dims) {
  if (const auto it = body.find("mask"); it != body.end() && !it->is_null()) {
    auto mask = wire::mask_from_json(*it);
    require(mask.dims() == dims, ErrorCode::DimensionMismatch, "mask dimensions do not match the folio");
    return mask;
  }
  if (const auto it = body.find("polygons"); it != body.end() && !it->is_null()) {
    require(it->is_array(), ErrorCode::Parse, "polygons must be an array");
    auto mask = geometry::BinaryMask::empty(dims);
    for (const auto& p : *it) mask = geometry::mask_union(mask, geometry::rasterize(wire::polygon_from_json(p), dims));
    return mask;
  }
  return std::nullopt;
}

corpus::AutomaskDefaults overlay(corpus::AutomaskDefaults base, const Json& overrides) {
  if (overrides.is_null()) return base;
  require(overrides.is_object(), ErrorCode::Parse, "config must be an object");
  Json merged = corpus::to_json(base);
  for (const auto& [k, v] : overrides.items()) {
    require(merged.contains(k), ErrorCode::InvalidArgument, "unknown automask setting " + k);
    merged[k] = v;
  }
  return corpus::automask_from_json(merged);
}

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  BoundedProvider provider;
  ImageStore store;
  httplib::Server server;
  std::thread listener;
  int port = -1;
  bool stopped = false;

  std::shared_mutex projects_mutex;
  std::map<std::string, std::shared_ptr<ProjectSlot>> projects;

  std::mutex jobs_mutex;
  std::map<std::string, Job> jobs;
  std::vector<Worker> workers;
  std::uint64_t next_job = 1;
  bool stopping = false;

  Impl(ServiceConfig c, std::shared_ptr<provider::Provider> p)
      : config(std::move(c)),
        provider(std::move(p)),
        store(config.cache_dir.empty() ? config.project_root / ".cache" : config.cache_dir, config.provider.timeout) {
    // httplib's default also sets SO_REUSEPORT, which would let a second
    // service silently share a busy port.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
    });
  }

  // Projects

  void load_all() {
    const auto& root = config.project_root;
    std::error_code ec;
    if (!fs::exists(root, ec)) fs::create_directories(root, ec);
    require(!ec && fs::is_directory(root, ec), ErrorCode::Io, "project root " + root.string() + " is not a usable directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root, ec))
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    require(!ec, ErrorCode::Io, "cannot list project root " + root.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
    std::unique_lock lock(projects_mutex);
    for (const auto& f : files) {
      auto slot = std::make_shared<ProjectSlot>();
      slot->name = f.stem().string();
      slot->path = f;
      try {
        slot->snapshot = std::make_shared<const Project>(corpus::load_project(f, config.clock));
      } catch (const Error& e) {
        fail(e.code(), f.string() + ": " + e.what());
      }
      projects[slot->name] = slot;
    }
  }

  std::shared_ptr<ProjectSlot> slot(const std::string& name) {
    std::shared_lock lock(projects_mutex);
    const auto it = projects.find(name);
    require(it != projects.end(), ErrorCode::NotFound, "no project named " + name);
    return it->second;
  }

  std::vector<std::shared_ptr<ProjectSlot>> all_slots() {
    std::shared_lock lock(projects_mutex);
    std::vector<std::shared_ptr<ProjectSlot>> out;
    for (const auto& [name, s] : projects) out.push_back(s);
    return out;
  }

  /// Runs `f` on a copy of the project. If it appended events, the copy is
  /// written to disk and only then becomes current; a throw leaves both the
  /// file and the served state untouched.
  Json mutate(ProjectSlot& s, const std::function<Json(Project&)>& f) {
    std::lock_guard writer(s.writer);
    auto copy = std::make_shared<Project>(*s.current());
    const auto before = copy->events().size();
    auto out = f(*copy);
    if (copy->events().size() != before) {
      corpus::save_project(*copy, s.path);
      std::lock_guard lock(s.snapshot_mutex);
      s.snapshot = std::move(copy);
    }
    return out;
  }

  /// Folio, annotation and suggestion ids are unique only within a project:
  /// `?project=` (or "project" in the body) picks one, otherwise the id must
  /// be held by exactly one project.
  std::shared_ptr<ProjectSlot> locate(const Request& req, const Json& body, const std::string& kind,
                                      const std::string& id, const std::function<bool(const Project&)>& has) {
    std::string named = req.has_param("project") ? req.get_param_value("project") : body.value("project", "");
    if (!named.empty()) {
      auto s = slot(named);
      require(has(*s->current()), ErrorCode::NotFound, kind + " " + id + " not found in project " + named);
      return s;
    }
    std::vector<std::shared_ptr<ProjectSlot>> hits;
    for (auto& s : all_slots())
      if (has(*s->current())) hits.push_back(s);
    require(!hits.empty(), ErrorCode::NotFound, "no " + kind + " " + id);
    if (hits.size() > 1) {
      Json names = Json::array();
      for (const auto& h : hits) names.push_back(h->name);
      throw DetailedError(ErrorCode::Conflict, kind + " " + id + " exists in several projects; pass ?project=",
                          Json{{"projects", names}});
    }
    return hits.front();
  }

  std::shared_ptr<ProjectSlot> locate_folio(const Request& req, const Json& body, const std::string& id) {
    return locate(req, body, "folio", id, [&](const Project& p) { return p.folios().count(id) > 0; });
  }
  std::shared_ptr<ProjectSlot> locate_annotation(const Request& req, const Json& body, const std::string& id) {
    return locate(req, body, "annotation", id, [&](const Project& p) { return p.annotations().count(id) > 0; });
  }

  std::string actor(const Json& body) const {
    auto a = body.value("actor", config.actor);
    require(!a.empty(), ErrorCode::InvalidArgument, "actor must not be empty");
    return a;
  }

  void require_provider(provider::Capability c) { provider::require_capability(provider.describe(), c); }

  // Jobs

  std::string submit(Job job, std::function<Json()> work) {
    std::lock_guard lock(jobs_mutex);
    require(!stopping, ErrorCode::Conflict, "service is shutting down");
    for (auto it = workers.begin(); it != workers.end();) {
      if (it->done->load()) {
        it->thread.join();
        it = workers.erase(it);
      } else {
        ++it;
      }
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "j%06llu", static_cast<unsigned long long>(next_job++));
    job.id = buf;
    const auto id = job.id;
    jobs[id] = std::move(job);
    auto done = std::make_shared<std::atomic<bool>>(false);
    workers.push_back({std::thread([this, id, work = std::move(work), done] {
                         set_job(id, [](Job& j) { j.state = "running"; });
                         try {
                           auto result = work();
                           set_job(id, [&](Job& j) {
                             j.state = "succeeded";
                             j.result = std::move(result);
                           });
                         } catch (const Error& e) {
                           set_job(id, [&](Job& j) {
                             j.state = "failed";
                             j.error = error_json(e.code(), e.what());
                           });
                         } catch (const std::exception& e) {
                           set_job(id, [&](Job& j) {
                             j.state = "failed";
                             j.error = error_json(ErrorCode::Internal, e.what());
                           });
                         }
                         done->store(true);
                       }),
                       done});
    return id;
  }

  void set_job(const std::string& id, const std::function<void(Job&)>& f) {
    std::lock_guard lock(jobs_mutex);
    f(jobs.at(id));
  }

  // Routing

  using Handler = std::function<Json(const Request&, Response&)>;

  static httplib::Server::Handler wrap(Handler h) {
    return [h = std::move(h)](const Request& req, Response& res) {
      try {
        const auto out = h(req, res);
        if (!out.is_discarded()) res.set_content(out.dump(), "application/json");
      } catch (const DetailedError& e) {
        res.status = http::status_for(e.code());
        res.set_content(http::error_body(e.code(), e.what(), e.details().dump()), "application/json");
      } catch (const Error& e) {
        res.status = http::status_for(e.code());
        res.set_content(http::error_body(e.code(), e.what()), "application/json");
      } catch (const Json::exception& e) {
        res.status = 400;
        res.set_content(http::error_body(ErrorCode::Parse, e.what()), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(http::error_body(ErrorCode::Internal, e.what()), "application/json");
      }
    };
  }

  void get(const char* pattern, Handler h) { server.Get(pattern, wrap(std::move(h))); }
  void post(const char* pattern, Handler h) { server.Post(pattern, wrap(std::move(h))); }
  void patch(const char* pattern, Handler h) { server.Patch(pattern, wrap(std::move(h))); }
  void del(const char* pattern, Handler h) { server.Delete(pattern, wrap(std::move(h))); }

  void install_routes();
  void project_routes();
  void folio_routes();
  void annotation_routes();
  void label_routes();
  void suggestion_routes();
};

void Service::Impl::install_routes() {
  server.set_error_handler([](const Request&, Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    const auto code = res.status == 404 ? ErrorCode::NotFound : ErrorCode::InvalidArgument;
    res.set_content(http::error_body(code, "no route for this method and path"), "application/json");
    return httplib::Server::HandlerResponse::Handled;
  });

  get("/v1/health", [this](const Request&, Response&) {
    Json p = nullptr;
    bool degraded = false;
    try {
      const auto d = provider.describe();
      p = wire::descriptor_to_json(d);
    } catch (const Error& e) {
      degraded = true;
      p = Json{{"error", error_json(e.code(), e.what())}};
    }
    std::size_t n = 0;
    {
      std::shared_lock lock(projects_mutex);
      n = projects.size();
    }
    return Json{{"status", "ok"}, {"degraded", degraded}, {"provider", p}, {"projects", n}};
  });

  get(R"(/v1/jobs/([^/]+))", [this](const Request& req, Response&) {
    std::lock_guard lock(jobs_mutex);
    const auto it = jobs.find(req.matches[1]);
    require(it != jobs.end(), ErrorCode::NotFound, "no job " + std::string(req.matches[1]));
    return job_json(it->second);
  });

  project_routes();
  folio_routes();
  annotation_routes();
  label_routes();
  suggestion_routes();
}

void Service::Impl::project_routes() {
  const auto summary = [](const ProjectSlot& s) {
    const auto p = s.current();
    return Json{{"name", s.name},
                {"folios", p->folios().size()},
                {"labels", p->labels().size()},
                {"annotations", p->annotations().size()},
                {"suggestions", p->suggestions().size()},
                {"events", p->events().size()}};
  };

  get("/v1/projects", [this, summary](const Request&, Response&) {
    Json list = Json::array();
    for (const auto& s : all_slots()) list.push_back(summary(*s));
    return Json{{"projects", list}};
  });

  post("/v1/projects", [this, summary](const Request& req, Response& res) {
    const auto body = body_of(req);
    const auto name = wire::string_field(body, "name");
    require(valid_project_name(name), ErrorCode::InvalidArgument,
            "project names are 1-64 characters of letters, digits, '_' and '-'");
    const auto who = actor(body);
    std::unique_lock lock(projects_mutex);
    const auto path = project_path(config.project_root, name);
    require(!projects.count(name) && !fs::exists(path), ErrorCode::Conflict, "project " + name + " already exists");
    Project project(name, config.clock);
    if (!(config.automask == corpus::AutomaskDefaults{})) project.set_automask_defaults(config.automask, who);
    corpus::save_project(project, path);
    auto slot = std::make_shared<ProjectSlot>();
    slot->name = name;
    slot->path = path;
    slot->snapshot = std::make_shared<const Project>(std::move(project));
    projects[name] = slot;
    res.status = 201;
    return summary(*slot);
  });

  get(R"(/v1/projects/([^/]+))", [this, summary](const Request& req, Response&) {
    const auto s = slot(req.matches[1]);
    auto j = summary(*s);
    const auto p = s->current();
    j["automask_defaults"] = corpus::to_json(p->automask_defaults());
    Json rules = Json::array();
    for (const auto& r : p->rules()) rules.push_back(corpus::to_json(r));
    j["rules"] = rules;
    return j;
  });

  get(R"(/v1/projects/([^/]+)/stats)", [this](const Request& req, Response&) {
    return corpus::to_json(corpus::stats(*slot(req.matches[1])->current()));
  });

  get(R"(/v1/projects/([^/]+)/events)", [this](const Request& req, Response&) {
    const auto p = slot(req.matches[1])->current();
    const std::uint64_t since = req.has_param("since") ? std::stoull(req.get_param_value("since")) : 0;
    Json list = Json::array();
    for (const auto& e : p->events())
      if (e.seq > since) list.push_back(corpus::to_json(e));
    return Json{{"events", list}};
  });

  post(R"(/v1/projects/([^/]+)/rules)", [this](const Request& req, Response&) {
    const auto s = slot(req.matches[1]);
    const auto body = body_of(req);
    std::vector<corpus::ConceptRule> rules;
    for (const auto& r : wire::field(body, "rules")) rules.push_back(corpus::rule_from_json(r));
    const auto who = actor(body);
    return mutate(*s, [&](Project& p) {
      p.set_rules(rules, who);
      Json list = Json::array();
      for (const auto& r : p.rules()) list.push_back(corpus::to_json(r));
      return Json{{"rules", list}};
    });
  });

  get(R"(/v1/projects/([^/]+)/concepts/([^/]+))", [this](const Request& req, Response&) {
    const auto p = slot(req.matches[1])->current();
    Json list = Json::array();
    for (const auto& c : corpus::infer_concepts(*p, req.matches[2], p->rules()))
      list.push_back(Json{{"concept", c.concept_label},
                          {"lemma", p->label(c.concept_label).lemma},
                          {"supporting_ids", c.supporting_ids}});
    return Json{{"folio_id", std::string(req.matches[2])}, {"concepts", list}};
  });

  post(R"(/v1/projects/([^/]+)/export)", [this](const Request& req, Response& res) {
    const auto format = req.has_param("mode") ? req.get_param_value("mode") : std::string("coco");
    require(format == "coco", ErrorCode::InvalidArgument, "unsupported export mode " + format);
    const auto scope = req.has_param("scope") ? req.get_param_value("scope") : std::string("validated_only");
    const auto out = corpus::export_coco(*slot(req.matches[1])->current(), corpus::parse_export_mode(scope));
    const auto& r = out.report;
    res.set_header("X-Export-Report", Json{{"exported", r.exported},
                                           {"skipped_no_mask", r.skipped_no_mask},
                                           {"skipped_unlabeled", r.skipped_unlabeled},
                                           {"skipped_status", r.skipped_status},
                                           {"warnings", r.warnings}}
                                          .dump());
    res.set_content(out.text(), "application/json");
    return kHandled;
  });
}

void Service::Impl::folio_routes() {
  get(R"(/v1/projects/([^/]+)/folios)", [this](const Request& req, Response&) {
    Json list = Json::array();
    for (const auto& [id, f] : slot(req.matches[1])->current()->folios()) list.push_back(corpus::to_json(f));
    return Json{{"folios", list}};
  });

  post(R"(/v1/projects/([^/]+)/folios)", [this](const Request& req, Response& res) {
    const auto s = slot(req.matches[1]);
    const auto body = body_of(req);
    const auto uri = wire::string_field(body, "image_uri");
    auto id = body.value("id", std::string());
    if (id.empty()) {
      std::string stem = uri.substr(uri.find_last_of('/') + 1);
      stem = stem.substr(0, stem.find_first_of(".?#"));
      id = slugify(stem);
    }
    require(!id.empty(), ErrorCode::InvalidArgument, "cannot derive a folio id from " + uri);
    // Decoding happens outside the writer lock; add_folio still checks for clashes.
    const auto folio = make_folio(store, id, uri, body.value("shelfmark", std::string()),
                                  body.value("folio_ref", std::string()));
    const auto who = actor(body);
    res.status = 201;
    return mutate(*s, [&](Project& p) { return corpus::to_json(p.add_folio(folio, who)); });
  });

  get(R"(/v1/folios/([^/]+)/image)", [this](const Request& req, Response& res) {
    const std::string id = req.matches[1];
    const auto folio = locate_folio(req, Json::object(), id)->current()->folio(id);
    const auto bytes = store.bytes(folio.image_uri);
    res.set_header("Cache-Control", "max-age=86400");
    res.set_header("ETag", "\"" + folio.content_key + "\"");
    res.set_content(std::string(bytes->begin(), bytes->end()), ImageStore::media_type(*bytes));
    return kHandled;
  });

  post(R"(/v1/folios/([^/]+)/segment)", [this](const Request& req, Response&) {
    const std::string id = req.matches[1];
    const auto body = body_of(req);
    const auto p = locate_folio(req, body, id)->current();
    const auto& folio = p->folio(id);
    const auto prompts = wire::prompts_from_json(wire::field(body, "prompts"));
    provider::validate_prompts(prompts, folio.dims);
    require_provider(provider::Capability::PromptSegmentation);
    Json list = Json::array();
    for (const auto& prop : provider.segment_with_prompts(store.input(folio), prompts)) list.push_back(proposal_view(prop));
    return Json{{"folio_id", id}, {"proposals", list}};
  });

  post(R"(/v1/folios/([^/]+)/automask)", [this](const Request& req, Response& res) {
    const std::string id = req.matches[1];
    const auto body = body_of(req);
    const auto s = locate_folio(req, body, id);
    const auto p = s->current();
    p->folio(id);
    const auto config = overlay(p->automask_defaults(), body.value("config", Json(nullptr)));
    pipeline::validate_config(config);
    const bool commit = body.value("commit", false);
    const auto who = actor(body);
    require_provider(provider::Capability::AutoSegmentation);
    Job job;
    job.kind = "automask";
    job.project = s->name;
    job.folio = id;
    const auto job_id = submit(std::move(job), [this, s, id, config, commit, who] {
      const auto folio = s->current()->folio(id);
      const auto kept = pipeline::generate_automask(store.input(folio), provider, config);
      Json list = Json::array();
      for (const auto& prop : kept) list.push_back(proposal_view(prop));
      Json result{{"proposals", list}, {"annotation_ids", Json::array()}, {"config", corpus::to_json(config)}};
      if (commit && !kept.empty())
        result["annotation_ids"] = mutate(*s, [&](Project& proj) { return Json(pipeline::commit_automask(proj, id, kept, who)); });
      return result;
    });
    res.status = 202;
    return Json{{"job_id", job_id}, {"state", "queued"}, {"href", "/v1/jobs/" + job_id}};
  });

  post(R"(/v1/folios/([^/]+)/ground)", [this](const Request& req, Response&) {
    const std::string id = req.matches[1];
    const auto body = body_of(req);
    const auto s = locate_folio(req, body, id);
    const auto phrases = wire::field(body, "phrases").get<std::vector<std::string>>();
    require(!phrases.empty(), ErrorCode::InvalidArgument, "phrases must not be empty");
    const auto who = actor(body);
    require_provider(provider::Capability::TextDetection);
    const auto p = s->current();
    const auto result = pipeline::ground_annotations(*p, store.input(p->folio(id)), phrases, provider);
    std::vector<std::string> ids;
    if (!result.drafts.empty())
      ids = mutate(*s, [&](Project& proj) { return Json(pipeline::commit_grounded(proj, id, result, who)); })
                .get<std::vector<std::string>>();
    Json drafts = Json::array();
    for (std::size_t i = 0; i < result.drafts.size(); ++i) {
      const auto& d = result.drafts[i];
      drafts.push_back(Json{{"annotation_id", ids[i]},
                            {"phrase", d.phrase},
                            {"label", d.label},
                            {"confidence", d.confidence},
                            {"box", wire::box_to_json(d.box)}});
    }
    Json failures = Json::array();
    for (const auto& f : result.failures)
      failures.push_back(Json{{"phrase", f.phrase}, {"code", std::string(error_code_name(f.code))}, {"message", f.message}});
    return Json{{"annotation_ids", ids}, {"drafts", drafts}, {"failures", failures}, {"undetected", result.undetected}};
  });

  post(R"(/v1/folios/([^/]+)/assign_drop)", [this](const Request& req, Response&) {
    const std::string id = req.matches[1];
    const auto body = body_of(req);
    const auto s = locate_folio(req, body, id);
    const auto drop = wire::box_from_json(wire::field(body, "drop"));
    const auto label = wire::string_field(body, "label");
    const auto who = actor(body);
    return mutate(*s, [&](Project& p) {
      p.label(label);
      const auto& folio = p.folio(id);
      require(drop.x_min >= 0 && drop.y_min >= 0 && drop.x_max <= folio.dims.width && drop.y_max <= folio.dims.height,
              ErrorCode::InvalidArgument, "drop box lies outside the folio");
      std::vector<geometry::DropCandidate> candidates;
      for (const auto& [aid, a] : p.annotations())
        if (a.folio_id == id && a.has_mask() && a.status != corpus::Status::Rejected) candidates.push_back({aid, *a.mask});
      Json fractions = Json::array();
      for (const auto& c : candidates) {
        const double f = geometry::consumed_fraction(c.mask, drop);
        if (f > 0.0) fractions.push_back(Json{{"annotation_id", c.id}, {"fraction", f}, {"area", geometry::mask_area(c.mask)}});
      }
      const auto winner = geometry::assign_drop(drop, candidates);
      Json out{{"annotation_id", winner ? Json(*winner) : Json(nullptr)}, {"label", label}, {"candidates", fractions}};
      if (winner) {
        const auto& a = p.annotation(*winner);
        out["changed"] = a.label != std::optional<std::string>(label);
        out["annotation"] = annotation_view(out["changed"].get<bool>() ? p.assign_label(*winner, label, who) : a);
      } else {
        out["changed"] = false;
      }
      return out;
    });
  });
}

void Service::Impl::annotation_routes() {
  get(R"(/v1/projects/([^/]+)/annotations)", [this](const Request& req, Response&) {
    const auto p = slot(req.matches[1])->current();
    const auto param = [&](const char* k) -> std::optional<std::string> {
      if (!req.has_param(k)) return std::nullopt;
      return req.get_param_value(k);
    };
    const auto folio = param("folio");
    const auto label = param("label");
    std::optional<corpus::Status> status;
    if (const auto s = param("status")) status = corpus::parse_status(*s);
    std::optional<corpus::Provenance> prov;
    if (const auto s = param("provenance")) prov = corpus::parse_provenance(*s);
    Json list = Json::array();
    for (const auto& [id, a] : p->annotations()) {
      if (folio && a.folio_id != *folio) continue;
      if (status && a.status != *status) continue;
      if (prov && a.provenance != *prov) continue;
      if (label && a.label.value_or("") != *label) continue;
      list.push_back(annotation_view(a));
    }
    return Json{{"annotations", list}};
  });

  get(R"(/v1/projects/([^/]+)/annotations/([^/]+))", [this](const Request& req, Response&) {
    return annotation_view(slot(req.matches[1])->current()->annotation(req.matches[2]));
  });

  post(R"(/v1/projects/([^/]+)/annotations)", [this](const Request& req, Response& res) {
    const auto s = slot(req.matches[1]);
    const auto body = body_of(req);
    const auto who = actor(body);
    auto out = mutate(*s, [&](Project& p) {
      if (const auto it = body.find("promote_from"); it != body.end()) {
        const auto source = it->get<std::string>();
        const auto mask = mask_from_body(body, p.folio(p.annotation(source).folio_id).dims);
        require(mask.has_value(), ErrorCode::InvalidArgument, "promotion needs a mask or polygons");
        return annotation_view(p.promote_to_instance(source, *mask, who));
      }
      corpus::NewAnnotation spec;
      spec.folio_id = wire::string_field(body, "folio_id");
      spec.mask = mask_from_body(body, p.folio(spec.folio_id).dims);
      if (const auto it = body.find("legacy_box"); it != body.end() && !it->is_null()) spec.legacy_box = wire::box_from_json(*it);
      if (const auto it = body.find("label"); it != body.end() && !it->is_null()) spec.label = it->get<std::string>();
      spec.provenance = corpus::parse_provenance(body.value("provenance", std::string("manual")));
      return annotation_view(p.add_annotation(std::move(spec), who));
    });
    res.status = 201;
    return out;
  });

  patch(R"(/v1/projects/([^/]+)/annotations/([^/]+))", [this](const Request& req, Response&) {
    const auto s = slot(req.matches[1]);
    const std::string id = req.matches[2];
    const auto body = body_of(req);
    const auto who = actor(body);
    const int changes = static_cast<int>(body.contains("label")) + static_cast<int>(body.contains("status")) +
                        static_cast<int>(body.contains("mask") || body.contains("polygons"));
    require(changes == 1, ErrorCode::InvalidArgument,
            "a PATCH changes exactly one of label, status or geometry (mask/polygons)");
    return mutate(*s, [&](Project& p) {
      const auto& a = p.annotation(id);
      if (body.contains("label")) {
        const auto& l = body.at("label");
        return annotation_view(p.assign_label(id, l.is_null() ? std::nullopt : std::optional(l.get<std::string>()), who));
      }
      if (body.contains("status"))
        return annotation_view(p.set_status(id, corpus::parse_status(body.at("status").get<std::string>()), who));
      auto mask = mask_from_body(body, p.folio(a.folio_id).dims);
      require(mask.has_value(), ErrorCode::InvalidArgument, "geometry must not be null");
      return annotation_view(p.edit_geometry(id, std::move(*mask), who));
    });
  });

  del(R"(/v1/projects/([^/]+)/annotations/([^/]+))", [this](const Request& req, Response&) {
    const auto s = slot(req.matches[1]);
    const std::string id = req.matches[2];
    Json body = body_of(req);
    if (req.has_param("actor")) body["actor"] = req.get_param_value("actor");
    const auto who = actor(body);
    return mutate(*s, [&](Project& p) {
      p.delete_annotation(id, who);
      return Json{{"deleted", id}};
    });
  });

  post(R"(/v1/annotations/([^/]+)/validate)", [this](const Request& req, Response&) {
    const std::string id = req.matches[1];
    const auto body = body_of(req);
    const auto s = locate_annotation(req, body, id);
    pipeline::Decision decision{pipeline::parse_decision(wire::string_field(body, "decision")), std::nullopt};
    const auto who = actor(body);
    return mutate(*s, [&](Project& p) {
      decision.mask = mask_from_body(body, p.folio(p.annotation(id).folio_id).dims);
      return annotation_view(pipeline::validate(p, id, decision, who));
    });
  });

  get(R"(/v1/projects/([^/]+)/annotations/([^/]+)/neighbors)", [this](const Request& req, Response&) {
    const auto s = slot(req.matches[1]);
    const std::string id = req.matches[2];
    const std::size_t k = req.has_param("k") ? std::stoul(req.get_param_value("k")) : 10;
    const auto p = s->current();
    p->annotation(id);
    require_provider(provider::Capability::Embedding);
    std::lock_guard lock(s->index_mutex);
    s->index.sync(*p, suggest::provider_embedder(provider, [&](const std::string& f) { return store.input(p->folio(f)); }));
    Json list = Json::array();
    for (const auto& n : s->index.knn_unlabeled(id, k)) list.push_back(Json{{"annotation_id", n.id}, {"similarity", n.similarity}});
    return Json{{"annotation_id", id}, {"neighbors", list}};
  });
}

void Service::Impl::label_routes() {
  get(R"(/v1/projects/([^/]+)/labels)", [this](const Request& req, Response&) {
    Json list = Json::array();
    for (const auto& [id, l] : slot(req.matches[1])->current()->labels()) list.push_back(corpus::to_json(l));
    return Json{{"labels", list}};
  });

  post(R"(/v1/projects/([^/]+)/labels)", [this](const Request& req, Response& res) {
    const auto s = slot(req.matches[1]);
    auto body = body_of(req);
    const auto who = actor(body);
    body.erase("actor");
    body.erase("project");
    if (!body.contains("id")) body["id"] = slugify(wire::string_field(body, "lemma"));
    const auto label = corpus::label_from_json(body);
    res.status = 201;
    return mutate(*s, [&](Project& p) { return corpus::to_json(p.add_label(label, who)); });
  });
}

void Service::Impl::suggestion_routes() {
  get(R"(/v1/projects/([^/]+)/suggestions)", [this](const Request& req, Response&) {
    const auto p = slot(req.matches[1])->current();
    std::optional<std::string> state;
    if (req.has_param("state")) state = req.get_param_value("state");
    Json list = Json::array();
    for (const auto& [id, sg] : p->suggestions())
      if (!state || corpus::suggestion_state_name(sg.state) == *state) list.push_back(corpus::to_json(sg));
    return Json{{"suggestions", list}};
  });

  post(R"(/v1/projects/([^/]+)/suggest)", [this](const Request& req, Response&) {
    const auto s = slot(req.matches[1]);
    const auto body = body_of(req);
    const auto seeds = wire::field(body, "seed_ids").get<std::vector<std::string>>();
    const double threshold = wire::field(body, "threshold").get<double>();
    const auto who = actor(body);
    const auto p = s->current();
    for (const auto& id : seeds) p->annotation(id);
    require_provider(provider::Capability::Embedding);
    std::vector<corpus::Suggestion> proposed;
    suggest::SyncReport report;
    {
      std::lock_guard lock(s->index_mutex);
      report = s->index.sync(*p, suggest::provider_embedder(provider, [&](const std::string& f) {
        return store.input(p->folio(f));
      }));
      proposed = s->index.propose_batch(seeds, threshold);
    }
    return mutate(*s, [&](Project& proj) {
      // A target with an open suggestion is not proposed again until that one is resolved.
      std::set<std::string> open;
      for (const auto& [id, sg] : proj.suggestions())
        if (sg.state == corpus::SuggestionState::Pending) open.insert(sg.target_id);
      std::vector<corpus::Suggestion> fresh;
      for (auto& sg : proposed) {
        const auto it = proj.annotations().find(sg.target_id);
        if (open.count(sg.target_id) || it == proj.annotations().end() || it->second.label) continue;
        fresh.push_back(std::move(sg));
      }
      Json list = Json::array();
      for (const auto& id : proj.add_suggestions(fresh, who)) list.push_back(corpus::to_json(proj.suggestion(id)));
      Json failures = Json::array();
      for (const auto& [id, msg] : report.failures) failures.push_back(Json{{"annotation_id", id}, {"message", msg}});
      return Json{{"suggestions", list},
                  {"index", Json{{"added", report.added}, {"updated", report.updated}, {"removed", report.removed},
                                 {"failures", failures}}}};
    });
  });

  const auto resolve = [this](bool default_accept) {
    return [this, default_accept](const Request& req, Response&) {
      const auto body = body_of(req);
      const auto id = wire::string_field(body, "suggestion_id");
      const bool accept = body.value("accept", default_accept);
      const auto who = actor(body);
      const auto s = locate(req, body, "suggestion", id, [&](const Project& p) { return p.suggestions().count(id) > 0; });
      return mutate(*s, [&](Project& p) {
        const auto sg = p.resolve_suggestion(id, accept, who);
        return Json{{"suggestion", corpus::to_json(sg)}, {"annotation", annotation_view(p.annotation(sg.target_id))}};
      });
    };
  };
  post("/v1/suggestions/accept", resolve(true));
  post("/v1/suggestions/reject", resolve(false));
}

Service::Service(ServiceConfig config, std::shared_ptr<provider::Provider> provider)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(provider))) {
  impl_->install_routes();
}

Service::~Service() { stop(); }

int Service::start() {
  require(impl_->port < 0, ErrorCode::Conflict, "service already started");
  impl_->load_all();
  const auto& c = impl_->config;
  const int bound = c.port == 0 ? impl_->server.bind_to_any_port(c.host)
                                : (impl_->server.bind_to_port(c.host, c.port) ? c.port : -1);
  require(bound > 0, ErrorCode::Io, "cannot listen on " + c.host + ":" + std::to_string(c.port) + " (port busy?)");
  impl_->port = bound;
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

int Service::port() const noexcept { return impl_->port; }

void Service::wait() {
  if (impl_->port < 0) return;
  while (impl_->server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

void Service::stop() {
  if (!impl_ || impl_->stopped) return;
  {
    std::lock_guard lock(impl_->jobs_mutex);
    impl_->stopping = true;
  }
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
  std::vector<Worker> workers;
  {
    std::lock_guard lock(impl_->jobs_mutex);
    workers.swap(impl_->workers);
  }
  for (auto& w : workers) w.thread.join();
  impl_->stopped = true;
}

const BoundedProvider& Service::provider() const { return impl_->provider; }

}  // namespace folioseg::api
