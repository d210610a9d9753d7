// Exercises the shared library strictly through its C header. The core is
// linked only to write image fixtures.

#include <doctest.h>
#include <httplib.h>

#include <fstream>
#include <thread>

#include "folioseg/folioseg.h"
#include "folioseg/wire.hpp"
#include "support/fixtures.hpp"

extern "C" int folioseg_c_header_check(void);

namespace fs = std::filesystem;
using folioseg::Json;

namespace {

/// Takes ownership of a library string.
Json take(char* s) {
  REQUIRE(s != nullptr);
  auto j = Json::parse(s);
  fs_string_free(s);
  return j;
}

struct Api {
  fs::path dir;
  fs::path images;
  fs_project* project = nullptr;
  fs_provider* provider = nullptr;

  explicit Api(const std::string& name) {
    dir = testsupport::temp_dir("capi_" + name);
    images = dir / "images";
    for (const auto& f : {testsupport::two_disks(), testsupport::three_components(), testsupport::folio_1r()})
      testsupport::write_fixture(f, images);
    REQUIRE(fs_project_create("demo", &project) == FS_OK);
    for (const auto* f : {"two_disks", "three_components", "lat22_1r"})
      REQUIRE(fs_project_add_folio(project, nullptr, image(f).c_str(), "BnF lat. 22", nullptr, "t") == FS_OK);
    REQUIRE(fs_provider_open(("mock:" + images.string()).c_str(), 0, &provider) == FS_OK);
  }
  ~Api() {
    fs_provider_free(provider);
    fs_project_free(project);
  }

  std::string image(const std::string& n) const { return (images / (n + ".png")).string(); }
};

}  // namespace

TEST_CASE("the header compiles as C") { CHECK(folioseg_c_header_check() == 0); }

TEST_CASE("status names and the last-error contract") {
  CHECK(std::string(fs_status_name(FS_OK)) == "ok");
  CHECK(std::string(fs_status_name(FS_ERR_NOT_FOUND)) == "not_found");
  CHECK(std::string(fs_status_name(FS_ERR_INTEGRITY)) == "integrity_violation");
  CHECK(std::string(fs_status_name(FS_ERR_INTERNAL)) == "internal");
  CHECK(std::string(fs_status_name(static_cast<fs_status>(99))) == "unknown");
  CHECK(std::string(fs_version()) == "0.1.0");

  fs_project* p = nullptr;
  CHECK(fs_project_load("/nonexistent/p.json", &p) == FS_ERR_IO);
  CHECK(p == nullptr);
  CHECK(std::string(fs_last_error_message()).find("/nonexistent/p.json") != std::string::npos);

  // Errors are per thread.
  std::thread([] {
    CHECK(std::string(fs_last_error_message()).empty());
    fs_project* q = nullptr;
    CHECK(fs_project_create("x", &q) == FS_OK);
    fs_project_free(q);
  }).join();
  CHECK_FALSE(std::string(fs_last_error_message()).empty());

  CHECK(fs_project_create("x", &p) == FS_OK);
  CHECK(std::string(fs_last_error_message()).empty());
  CHECK(fs_project_stats(nullptr, nullptr) == FS_ERR_INVALID_ARGUMENT);
  CHECK(fs_project_add_label(p, "{not json", "t") == FS_ERR_PARSE);
  CHECK(fs_project_add_label(p, R"({"gloss":"no lemma"})", "t") != FS_OK);
  fs_project_free(p);

  // Freeing NULL is harmless everywhere.
  fs_string_free(nullptr);
  fs_project_free(nullptr);
  fs_provider_free(nullptr);
  fs_service_free(nullptr);
  fs_provider_server_free(nullptr);
  CHECK(fs_service_port(nullptr) == -1);
}

TEST_CASE("projects round-trip through save and load") {
  Api a("roundtrip");
  CHECK(fs_project_add_folio(a.project, nullptr, a.image("two_disks").c_str(), nullptr, nullptr, "t") == FS_ERR_CONFLICT);
  CHECK(fs_project_add_folio(a.project, "x", (a.dir / "missing.png").c_str(), nullptr, nullptr, "t") == FS_ERR_IO);
  REQUIRE(fs_project_add_label(a.project, R"({"lemma":"Évêque","gloss":"bishop","language":"fr"})", "t") == FS_OK);

  const auto path = (a.dir / "p.json").string();
  REQUIRE(fs_project_save(a.project, path.c_str()) == FS_OK);
  fs_project* loaded = nullptr;
  REQUIRE(fs_project_load(path.c_str(), &loaded) == FS_OK);
  char* before = nullptr;
  char* after = nullptr;
  REQUIRE(fs_project_json(a.project, &before) == FS_OK);
  REQUIRE(fs_project_json(loaded, &after) == FS_OK);
  CHECK(std::string(before) == std::string(after));
  const auto doc = Json::parse(after);
  fs_string_free(before);
  fs_string_free(after);
  fs_project_free(loaded);
  CHECK(doc["labels"][0]["id"] == "eveque");
  CHECK(doc["folios"].size() == 3);
  CHECK(doc["folios"][0]["shelfmark"] == "BnF lat. 22");

  // A document from a newer format is refused with its own code.
  auto bumped = doc;
  bumped["format_version"] = "999";
  const auto future = (a.dir / "future.json").string();
  std::ofstream(future) << bumped.dump();
  CHECK(fs_project_load(future.c_str(), &loaded) == FS_ERR_VERSION_MISMATCH);
  std::ofstream(future) << "{";
  CHECK(fs_project_load(future.c_str(), &loaded) == FS_ERR_PARSE);
}

TEST_CASE("legacy import reports rejected rows") {
  Api a("import");
  const auto csv = a.dir / "tags.csv";
  std::ofstream(csv) << "folio_key,label\ntwo_disks,dragon\nghost,moine\nlat22_1r,\n";
  char* report = nullptr;
  REQUIRE(fs_project_import(a.project, csv.c_str(), FS_IMPORT_TAGS, "t", &report) == FS_OK);
  const auto r = take(report);
  CHECK(r["created"].size() == 1);
  REQUIRE(r["rejected"].size() == 2);
  CHECK(r["rejected"][0]["line"] == 3);
  CHECK(r["rejected"][1]["line"] == 4);
  CHECK(r["partial"] == true);
  char* stats = nullptr;
  REQUIRE(fs_project_stats(a.project, &stats) == FS_OK);
  CHECK(take(stats)["by_provenance"]["legacy_image_level"] == 1);
}

TEST_CASE("automask, grounding and export through the C API") {
  Api a("pipeline");
  char* descriptor = nullptr;
  REQUIRE(fs_provider_describe(a.provider, &descriptor) == FS_OK);
  CHECK(take(descriptor)["capabilities"].size() >= 3);

  char* result = nullptr;
  REQUIRE(fs_automask(a.project, a.provider, "three_components", R"({"min_quality":0.0,"min_area":50})", "t",
                      &result) == FS_OK);
  auto r = take(result);
  CHECK(r["proposals"] == 3);
  CHECK(r["annotation_ids"].size() == 3);
  CHECK(fs_automask(a.project, a.provider, "nope", nullptr, "t", &result) == FS_ERR_NOT_FOUND);
  CHECK(fs_automask(a.project, a.provider, "two_disks", R"({"bogus":1})", "t", &result) == FS_ERR_INVALID_ARGUMENT);
  CHECK(fs_automask(a.project, a.provider, "two_disks", R"({"min_quality":2})", "t", &result) ==
        FS_ERR_INVALID_ARGUMENT);

  REQUIRE(fs_project_add_label(a.project, R"({"lemma":"moine","gloss":"monk"})", "t") == FS_OK);
  REQUIRE(fs_ground(a.project, a.provider, "lat22_1r", R"(["moine","licorne"])", "t", &result) == FS_OK);
  r = take(result);
  CHECK(r["annotation_ids"].size() == 1);
  CHECK(r["failures"].size() == 1);
  CHECK(fs_ground(a.project, a.provider, "lat22_1r", R"("moine")", "t", &result) == FS_ERR_PARSE);

  // Nothing is validated yet.
  char* doc = nullptr;
  char* report = nullptr;
  REQUIRE(fs_project_export_coco(a.project, FS_EXPORT_VALIDATED_ONLY, &doc, &report) == FS_OK);
  CHECK(take(doc)["annotations"].empty());
  CHECK(take(report)["exported"] == 0);
  REQUIRE(fs_project_export_coco(a.project, FS_EXPORT_ALL_INSTANCES, &doc, nullptr) == FS_OK);
  // Drafts without a label are skipped even here; the grounded one carries "moine".
  CHECK(take(doc)["annotations"].size() == 1);
}

TEST_CASE("service and provider server lifecycles") {
  Api a("service");
  fs_provider_server* server = nullptr;
  REQUIRE(fs_provider_server_start(a.provider, "127.0.0.1", 0, &server) == FS_OK);
  const int provider_port = fs_provider_server_port(server);
  REQUIRE(provider_port > 0);

  // A remote client over the sidecar protocol sees the same descriptor.
  fs_provider* remote = nullptr;
  REQUIRE(fs_provider_open(("http://127.0.0.1:" + std::to_string(provider_port)).c_str(), 5000, &remote) == FS_OK);
  char* local_d = nullptr;
  char* remote_d = nullptr;
  REQUIRE(fs_provider_describe(a.provider, &local_d) == FS_OK);
  REQUIRE(fs_provider_describe(remote, &remote_d) == FS_OK);
  CHECK(take(local_d) == take(remote_d));

  const Json config{{"port", 0},
                    {"project_root", "projects"},
                    {"provider", {{"url", "http://127.0.0.1:" + std::to_string(provider_port)}}}};
  fs_service* service = nullptr;
  REQUIRE(fs_service_start(config.dump().c_str(), a.dir.c_str(), &service) == FS_OK);
  const int port = fs_service_port(service);
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/v1/health");
  REQUIRE(health);
  CHECK(Json::parse(health->body)["degraded"] == false);
  CHECK(client.Post("/v1/projects", R"({"name":"demo"})", "application/json")->status == 201);

  // Same port again: the second service cannot bind.
  fs_service* clash = nullptr;
  auto again = config;
  again["port"] = port;
  CHECK(fs_service_start(again.dump().c_str(), a.dir.c_str(), &clash) == FS_ERR_IO);
  CHECK(clash == nullptr);
  CHECK(fs_service_start(R"({"port":70000})", nullptr, &clash) == FS_ERR_INVALID_ARGUMENT);

  std::thread waiter([&] { CHECK(fs_service_wait(service) == FS_OK); });
  CHECK(fs_service_stop(service) == FS_OK);
  waiter.join();
  fs_service_free(service);
  CHECK(fs::exists(a.dir / "projects" / "demo.json"));

  fs_provider_free(remote);
  CHECK(fs_provider_server_stop(server) == FS_OK);
  fs_provider_server_free(server);
}
