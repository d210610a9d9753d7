#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <memory>

#include "folioseg/corpus.hpp"
#include "folioseg/error.hpp"

namespace folioseg::corpus {

namespace {

constexpr std::pair<Provenance, std::string_view> kProvenanceNames[] = {
    {Provenance::LegacyImageLevel, "legacy_image_level"},
    {Provenance::LegacyBox, "legacy_box"},
    {Provenance::Auto, "auto"},
    {Provenance::TextGrounded, "text_grounded"},
    {Provenance::Prompted, "prompted"},
    {Provenance::Manual, "manual"},
};

constexpr std::pair<Status, std::string_view> kStatusNames[] = {
    {Status::Draft, "draft"},
    {Status::Validated, "validated"},
    {Status::Rejected, "rejected"},
};

std::string format_utc(std::time_t seconds, int millis) {
  std::tm tm{};
  gmtime_r(&seconds, &tm);
  char buf[40];
  const auto n = std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%.*s.%03dZ", static_cast<int>(n), buf, millis);
  return out;
}

template <typename T>
std::optional<T> optional_field(const Json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

std::string_view provenance_name(Provenance p) noexcept {
  for (const auto& [value, name] : kProvenanceNames)
    if (value == p) return name;
  return "manual";
}

Provenance parse_provenance(std::string_view name) {
  for (const auto& [value, n] : kProvenanceNames)
    if (n == name) return value;
  fail(ErrorCode::InvalidArgument, "unknown provenance '" + std::string(name) + "'");
}

std::string_view status_name(Status s) noexcept {
  for (const auto& [value, name] : kStatusNames)
    if (value == s) return name;
  return "draft";
}

Status parse_status(std::string_view name) {
  for (const auto& [value, n] : kStatusNames)
    if (n == name) return value;
  fail(ErrorCode::InvalidArgument, "unknown status '" + std::string(name) + "'");
}

bool is_legal_transition(Status from, Status to) noexcept {
  return (from == Status::Draft && (to == Status::Validated || to == Status::Rejected)) ||
         (from == Status::Rejected && to == Status::Draft);
}

std::string_view suggestion_state_name(SuggestionState s) noexcept {
  switch (s) {
    case SuggestionState::Pending: return "pending";
    case SuggestionState::Accepted: return "accepted";
    case SuggestionState::Rejected: return "rejected";
  }
  return "pending";
}

ExportMode parse_export_mode(std::string_view name) {
  if (name == "validated_only") return ExportMode::ValidatedOnly;
  if (name == "all_instances") return ExportMode::AllInstances;
  fail(ErrorCode::InvalidArgument, "unknown export mode '" + std::string(name) + "'");
}

Clock system_clock() {
  return [] {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count();
    return format_utc(static_cast<std::time_t>(ms / 1000), static_cast<int>(ms % 1000));
  };
}

Clock counting_clock() {
  auto tick = std::make_shared<std::atomic<std::int64_t>>(0);
  return [tick] {
    constexpr std::time_t kBase = 1767225600;  // 2026-01-01T00:00:00Z
    return format_utc(kBase + tick->fetch_add(1), 0);
  };
}

void Annotation::set_mask(std::optional<BinaryMask> m) {
  mask = std::move(m);
  if (has_mask()) {
    bbox = geometry::mask_bbox(*mask);
    polygons = geometry::polygonize(*mask, 0.0);
  } else {
    bbox = legacy_box;
    polygons.clear();
  }
}

Json to_json(const Label& l) {
  Json j{{"id", l.id}, {"lemma", l.lemma}};
  j["gloss"] = l.gloss ? Json(*l.gloss) : Json(nullptr);
  j["language"] = l.language;
  j["aliases"] = l.aliases;
  j["parent"] = l.parent ? Json(*l.parent) : Json(nullptr);
  return j;
}

Label label_from_json(const Json& j) {
  Label l;
  l.id = wire::string_field(j, "id");
  l.lemma = wire::string_field(j, "lemma");
  l.gloss = optional_field<std::string>(j, "gloss");
  l.language = j.value("language", std::string("fr"));
  if (const auto it = j.find("aliases"); it != j.end()) l.aliases = it->get<std::vector<std::string>>();
  l.parent = optional_field<std::string>(j, "parent");
  return l;
}

Json to_json(const Folio& f) {
  return Json{{"id", f.id},
              {"shelfmark", f.shelfmark},
              {"folio_ref", f.folio_ref},
              {"image_uri", f.image_uri},
              {"dims", wire::dims_to_json(f.dims)},
              {"content_key", f.content_key}};
}

Folio folio_from_json(const Json& j) {
  Folio f;
  f.id = wire::string_field(j, "id");
  f.shelfmark = j.value("shelfmark", std::string());
  f.folio_ref = j.value("folio_ref", std::string());
  f.image_uri = j.value("image_uri", std::string());
  f.dims = wire::dims_from_json(wire::field(j, "dims"));
  f.content_key = j.value("content_key", std::string());
  return f;
}

Json to_json(const Annotation& a) {
  Json j{{"id", a.id}, {"folio_id", a.folio_id}};
  j["provenance"] = provenance_name(a.provenance);
  j["status"] = status_name(a.status);
  j["label"] = a.label ? Json(*a.label) : Json(nullptr);
  if (a.mask) j["mask"] = wire::mask_to_json(*a.mask);
  if (a.legacy_box) j["legacy_box"] = wire::box_to_json(*a.legacy_box);
  if (a.source_id) j["source_id"] = *a.source_id;
  j["derived_ids"] = a.derived_ids;
  j["consumed"] = a.consumed;
  j["actor"] = a.actor;
  j["created_at"] = a.created_at;
  j["updated_at"] = a.updated_at;
  return j;
}

Annotation annotation_from_json(const Json& j) {
  Annotation a;
  a.id = wire::string_field(j, "id");
  a.folio_id = wire::string_field(j, "folio_id");
  a.provenance = parse_provenance(wire::string_field(j, "provenance"));
  a.status = parse_status(wire::string_field(j, "status"));
  a.label = optional_field<std::string>(j, "label");
  if (const auto it = j.find("legacy_box"); it != j.end() && !it->is_null()) a.legacy_box = wire::box_from_json(*it);
  a.source_id = optional_field<std::string>(j, "source_id");
  if (const auto it = j.find("derived_ids"); it != j.end()) a.derived_ids = it->get<std::vector<std::string>>();
  a.consumed = j.value("consumed", false);
  a.actor = j.value("actor", std::string());
  a.created_at = j.value("created_at", std::string());
  a.updated_at = j.value("updated_at", std::string());
  std::optional<BinaryMask> mask;
  if (const auto it = j.find("mask"); it != j.end() && !it->is_null()) mask = wire::mask_from_json(*it);
  a.set_mask(std::move(mask));
  return a;
}

Json to_json(const ConceptRule& r) {
  Json req = Json::array();
  for (const auto& q : r.required) req.push_back(Json{{"label", q.label}, {"min_count", q.min_count}});
  return Json{{"concept", r.concept_label}, {"required", req}};
}

ConceptRule rule_from_json(const Json& j) {
  ConceptRule r;
  r.concept_label = wire::string_field(j, "concept");
  for (const auto& q : wire::field(j, "required"))
    r.required.push_back({wire::string_field(q, "label"), q.value("min_count", 1u)});
  return r;
}

Json to_json(const Suggestion& s) {
  return Json{{"id", s.id},
              {"target_id", s.target_id},
              {"label", s.label},
              {"similarity", s.similarity},
              {"seed_id", s.seed_id},
              {"state", suggestion_state_name(s.state)}};
}

Suggestion suggestion_from_json(const Json& j) {
  Suggestion s;
  s.id = wire::string_field(j, "id");
  s.target_id = wire::string_field(j, "target_id");
  s.label = wire::string_field(j, "label");
  s.similarity = wire::field(j, "similarity").get<double>();
  s.seed_id = wire::string_field(j, "seed_id");
  const auto state = wire::string_field(j, "state");
  if (state == "pending") {
    s.state = SuggestionState::Pending;
  } else if (state == "accepted") {
    s.state = SuggestionState::Accepted;
  } else if (state == "rejected") {
    s.state = SuggestionState::Rejected;
  } else {
    fail(ErrorCode::Parse, "unknown suggestion state '" + state + "'");
  }
  return s;
}

Json to_json(const AutomaskDefaults& d) {
  return Json{{"min_quality", d.min_quality},
              {"min_area", d.min_area},
              {"nms_iou", d.nms_iou},
              {"max_proposals", d.max_proposals}};
}

AutomaskDefaults automask_from_json(const Json& j) {
  AutomaskDefaults d;
  d.min_quality = j.value("min_quality", d.min_quality);
  d.min_area = j.value("min_area", d.min_area);
  d.nms_iou = j.value("nms_iou", d.nms_iou);
  d.max_proposals = j.value("max_proposals", d.max_proposals);
  return d;
}

Json to_json(const Event& e) {
  return Json{{"seq", e.seq}, {"type", e.type}, {"at", e.at}, {"actor", e.actor}, {"payload", e.payload}};
}

Event event_from_json(const Json& j) {
  Event e;
  e.seq = wire::field(j, "seq").get<std::uint64_t>();
  e.type = wire::string_field(j, "type");
  e.at = j.value("at", std::string());
  e.actor = j.value("actor", std::string());
  e.payload = wire::field(j, "payload");
  return e;
}

}  // namespace folioseg::corpus
