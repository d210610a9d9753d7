#include <algorithm>
#include <cstdio>
#include <set>

#include "folioseg/corpus.hpp"
#include "folioseg/error.hpp"
#include "folioseg/image.hpp"
#include "folioseg/text.hpp"

namespace folioseg::corpus {

namespace {

std::string sequence_id(char prefix, std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06llu", prefix, static_cast<unsigned long long>(n));
  return buf;
}

/// Numeric part of an id like "a000042"; 0 when it does not follow the pattern.
std::uint64_t sequence_of(const std::string& id, char prefix) {
  if (id.size() < 2 || id[0] != prefix) return 0;
  std::uint64_t n = 0;
  for (std::size_t i = 1; i < id.size(); ++i) {
    if (id[i] < '0' || id[i] > '9') return 0;
    n = n * 10 + static_cast<std::uint64_t>(id[i] - '0');
  }
  return n;
}

bool is_legacy(Provenance p) { return p == Provenance::LegacyImageLevel || p == Provenance::LegacyBox; }

template <typename Map>
const typename Map::mapped_type& lookup(const Map& map, const std::string& id, const char* what) {
  const auto it = map.find(id);
  if (it == map.end()) fail(ErrorCode::NotFound, std::string("unknown ") + what + " '" + id + "'");
  return it->second;
}

Json ids_json(const std::vector<std::string>& ids) { return Json(ids); }

/// Geometry rules per provenance; `what` prefixes messages.
void check_geometry(const Annotation& a, const Folio& folio, ErrorCode code) {
  const auto where = "annotation " + (a.id.empty() ? std::string("(new)") : a.id) + ": ";
  switch (a.provenance) {
    case Provenance::LegacyImageLevel:
      require(!a.mask && !a.legacy_box, code, where + "image-level annotations carry no geometry");
      break;
    case Provenance::LegacyBox:
      require(!a.mask, code, where + "legacy box annotations carry no mask");
      require(a.legacy_box.has_value(), code, where + "legacy box annotations need a box");
      require(a.legacy_box->is_valid() && a.legacy_box->x_max <= folio.dims.width &&
                  a.legacy_box->y_max <= folio.dims.height,
              code, where + "legacy box outside the folio");
      break;
    default:
      require(!a.legacy_box, code, where + "only legacy box annotations carry a legacy box");
      require(a.has_mask(), code, where + "instance annotations need a non-empty mask");
      require(a.mask->dims() == folio.dims, ErrorCode::DimensionMismatch,
              where + "mask dimensions differ from the folio");
  }
}

}  // namespace

Project::Project(std::string name, Clock clock) : name_(std::move(name)), clock_(std::move(clock)) {}

const Folio& Project::folio(const std::string& id) const { return lookup(folios_, id, "folio"); }
const Label& Project::label(const std::string& id) const { return lookup(labels_, id, "label"); }
const Annotation& Project::annotation(const std::string& id) const { return lookup(annotations_, id, "annotation"); }
const Suggestion& Project::suggestion(const std::string& id) const { return lookup(suggestions_, id, "suggestion"); }

void Project::commit(std::string type, const std::string& actor, Json payload) {
  Event e{events_.size() + 1, std::move(type), clock_ ? clock_() : std::string(), actor, std::move(payload)};
  apply(e);
  events_.push_back(std::move(e));
}

void Project::apply(const Event& event) {
  const auto& p = event.payload;
  try {
    if (const auto it = p.find("folios"); it != p.end())
      for (const auto& f : *it) {
        auto folio = folio_from_json(f);
        folios_[folio.id] = std::move(folio);
      }
    if (const auto it = p.find("labels"); it != p.end())
      for (const auto& l : *it) {
        auto label = label_from_json(l);
        labels_[label.id] = std::move(label);
      }
    if (const auto it = p.find("rules"); it != p.end()) {
      rules_.clear();
      for (const auto& r : *it) rules_.push_back(rule_from_json(r));
    }
    if (const auto it = p.find("automask"); it != p.end()) automask_ = automask_from_json(*it);
    if (const auto it = p.find("deleted_annotations"); it != p.end())
      for (const auto& id : *it) annotations_.erase(id.get<std::string>());
    if (const auto it = p.find("annotations"); it != p.end())
      for (const auto& a : *it) {
        auto ann = annotation_from_json(a);
        next_annotation_ = std::max(next_annotation_, sequence_of(ann.id, 'a') + 1);
        annotations_[ann.id] = std::move(ann);
      }
    if (const auto it = p.find("deleted_suggestions"); it != p.end())
      for (const auto& id : *it) suggestions_.erase(id.get<std::string>());
    if (const auto it = p.find("suggestions"); it != p.end())
      for (const auto& s : *it) {
        auto sug = suggestion_from_json(s);
        next_suggestion_ = std::max(next_suggestion_, sequence_of(sug.id, 's') + 1);
        suggestions_[sug.id] = std::move(sug);
      }
  } catch (const Json::exception& e) {
    fail(ErrorCode::Parse, "event " + std::to_string(event.seq) + " (" + event.type + "): " + e.what());
  }
}

const Folio& Project::add_folio(Folio folio, const std::string& actor) {
  require(!folio.id.empty(), ErrorCode::InvalidArgument, "folio id must not be empty");
  require(!folios_.count(folio.id), ErrorCode::Conflict, "folio '" + folio.id + "' already exists");
  geometry::validate_dims(folio.dims);
  const auto id = folio.id;
  commit("folio_added", actor, Json{{"folios", Json::array({corpus::to_json(folio)})}});
  return folios_.at(id);
}

const Label& Project::add_label(Label label, const std::string& actor) {
  require(!label.id.empty(), ErrorCode::InvalidArgument, "label id must not be empty");
  require(!fold_text(label.lemma).empty(), ErrorCode::InvalidArgument, "label lemma must not be empty");
  require(!labels_.count(label.id), ErrorCode::Conflict, "label '" + label.id + "' already exists");
  if (label.parent) lookup(labels_, *label.parent, "parent label");
  const auto lemma_key = fold_text(label.lemma);
  for (const auto& [id, other] : labels_) {
    const auto other_lemma = fold_text(other.lemma);
    for (const auto& alias : label.aliases)
      require(fold_text(alias) != other_lemma, ErrorCode::Conflict,
              "alias '" + alias + "' is the lemma of label '" + id + "'");
    for (const auto& alias : other.aliases)
      require(fold_text(alias) != lemma_key, ErrorCode::Conflict,
              "lemma '" + label.lemma + "' is an alias of label '" + id + "'");
  }
  const auto id = label.id;
  commit("label_added", actor, Json{{"labels", Json::array({corpus::to_json(label)})}});
  return labels_.at(id);
}

std::optional<std::string> Project::match_label(std::string_view text) const {
  const auto key = fold_text(text);
  if (key.empty()) return std::nullopt;
  std::optional<std::pair<int, std::string>> best;
  auto offer = [&](int rank, const std::string& id) {
    if (!best || std::pair(rank, id) < *best) best = std::pair(rank, id);
  };
  for (const auto& [id, l] : labels_) {
    if (fold_text(l.lemma) == key) offer(0, id);
    if (l.gloss && fold_text(*l.gloss) == key) offer(1, id);
    for (const auto& alias : l.aliases)
      if (fold_text(alias) == key) offer(1, id);
  }
  if (!best) return std::nullopt;
  return best->second;
}

std::string Project::resolve_label(std::string_view text, ResolveMode mode, const std::string& actor) {
  require(!fold_text(text).empty(), ErrorCode::InvalidArgument, "label text must not be empty");
  if (auto id = match_label(text)) return *id;
  require(mode == ResolveMode::CreateOrMatch, ErrorCode::NotFound,
          "no label matches '" + std::string(text) + "'");
  const auto base = slugify(text);
  auto id = base;
  for (int n = 2; labels_.count(id); ++n) id = base + "_" + std::to_string(n);
  // Keep the text as typed, minus surrounding whitespace.
  const auto first = text.find_first_not_of(" \t\r\n");
  const auto last = text.find_last_not_of(" \t\r\n");
  Label label;
  label.id = id;
  label.lemma = std::string(text.substr(first, last - first + 1));
  add_label(std::move(label), actor);
  return id;
}

void Project::set_rules(std::vector<ConceptRule> rules, const std::string& actor) {
  Json list = Json::array();
  for (const auto& r : rules) {
    lookup(labels_, r.concept_label, "concept label");
    require(!r.required.empty(), ErrorCode::InvalidArgument, "rule for '" + r.concept_label + "' has no requirements");
    for (const auto& q : r.required) {
      lookup(labels_, q.label, "required label");
      require(q.min_count >= 1, ErrorCode::InvalidArgument, "min_count must be at least 1");
      require(q.label != r.concept_label, ErrorCode::InvalidArgument,
              "concept '" + r.concept_label + "' cannot require itself");
    }
    list.push_back(corpus::to_json(r));
  }
  commit("rules_set", actor, Json{{"rules", list}});
}

void Project::set_automask_defaults(const AutomaskDefaults& d, const std::string& actor) {
  require(d.min_quality >= 0.0 && d.min_quality <= 1.0 && d.nms_iou >= 0.0 && d.nms_iou <= 1.0 &&
              d.max_proposals >= 1,
          ErrorCode::InvalidArgument, "automask defaults out of range");
  commit("automask_defaults_set", actor, Json{{"automask", corpus::to_json(d)}});
}

std::string Project::mint_annotation_id() { return sequence_id('a', next_annotation_); }

Annotation Project::build_annotation(NewAnnotation spec, const std::string& actor, const std::string& now) const {
  const auto& f = lookup(folios_, spec.folio_id, "folio");
  if (spec.label) lookup(labels_, *spec.label, "label");
  Annotation a;
  a.folio_id = spec.folio_id;
  a.label = spec.label;
  a.provenance = spec.provenance;
  a.status = Status::Draft;
  a.legacy_box = spec.legacy_box;
  a.actor = actor;
  a.created_at = now;
  a.updated_at = now;
  if (spec.mask) require(spec.mask->dims() == f.dims, ErrorCode::DimensionMismatch, "mask dimensions differ from the folio");
  a.set_mask(std::move(spec.mask));
  check_geometry(a, f, ErrorCode::InvalidArgument);
  return a;
}

const Annotation& Project::add_annotation(NewAnnotation spec, const std::string& actor) {
  const auto ids = add_annotations({std::move(spec)}, actor, "annotation_added");
  return annotations_.at(ids.front());
}

std::vector<std::string> Project::add_annotations(std::vector<NewAnnotation> specs, const std::string& actor,
                                                  const std::string& event_type) {
  if (specs.empty()) return {};
  const auto now = clock_ ? clock_() : std::string();
  Json list = Json::array();
  std::vector<std::string> ids;
  auto seq = next_annotation_;
  for (auto& spec : specs) {
    auto a = build_annotation(std::move(spec), actor, now);
    a.id = sequence_id('a', seq++);
    ids.push_back(a.id);
    list.push_back(corpus::to_json(a));
  }
  commit(event_type, actor, Json{{"annotations", list}});
  return ids;
}

const Annotation& Project::set_status(const std::string& id, Status to, const std::string& actor) {
  auto a = lookup(annotations_, id, "annotation");
  const auto from = a.status;
  require(is_legal_transition(from, to), ErrorCode::IllegalTransition,
          "annotation " + id + ": " + std::string(status_name(from)) + " -> " + std::string(status_name(to)) +
              " is not allowed");
  a.status = to;
  a.actor = actor;
  a.updated_at = clock_ ? clock_() : std::string();
  commit("status_changed", actor,
         Json{{"annotations", Json::array({corpus::to_json(a)})},
              {"before", Json{{"status", status_name(from)}}}});
  return annotations_.at(id);
}

const Annotation& Project::edit_geometry(const std::string& id, BinaryMask mask, const std::string& actor) {
  auto a = lookup(annotations_, id, "annotation");
  require(!is_legacy(a.provenance), ErrorCode::InvalidArgument,
          "annotation " + id + " is a legacy record; promote it instead");
  require(a.status == Status::Draft, ErrorCode::IllegalTransition,
          "annotation " + id + " is " + std::string(status_name(a.status)) + "; only drafts can be edited");
  require(mask.dims() == folio(a.folio_id).dims, ErrorCode::DimensionMismatch, "mask dimensions differ from the folio");
  require(!mask.is_empty(), ErrorCode::InvalidArgument, "edited mask must not be empty");
  const auto before = wire::mask_to_json(*a.mask);
  a.set_mask(std::move(mask));
  a.actor = actor;
  a.updated_at = clock_ ? clock_() : std::string();
  commit("geometry_edited", actor,
         Json{{"annotations", Json::array({corpus::to_json(a)})}, {"before", Json{{"mask", before}}}});
  return annotations_.at(id);
}

const Annotation& Project::assign_label(const std::string& id, std::optional<std::string> label,
                                        const std::string& actor) {
  auto a = lookup(annotations_, id, "annotation");
  if (label) lookup(labels_, *label, "label");
  require(label || !is_legacy(a.provenance), ErrorCode::InvalidArgument, "legacy records keep their label");
  Json before{{"label", a.label ? Json(*a.label) : Json(nullptr)}, {"status", status_name(a.status)}};
  a.label = std::move(label);
  if (a.status == Status::Validated) a.status = Status::Draft;
  a.actor = actor;
  a.updated_at = clock_ ? clock_() : std::string();
  commit("label_assigned", actor, Json{{"annotations", Json::array({corpus::to_json(a)})}, {"before", before}});
  return annotations_.at(id);
}

void Project::delete_annotation(const std::string& id, const std::string& actor) {
  const auto& a = lookup(annotations_, id, "annotation");
  require(a.derived_ids.empty(), ErrorCode::Conflict,
          "annotation " + id + " has promoted instances and is kept for audit");
  Json updated = Json::array();
  if (a.source_id) {
    auto source = annotations_.at(*a.source_id);
    std::erase(source.derived_ids, id);
    source.consumed = !source.derived_ids.empty();
    updated.push_back(corpus::to_json(source));
  }
  std::vector<std::string> dropped;
  for (const auto& [sid, s] : suggestions_)
    if (s.target_id == id || s.seed_id == id) dropped.push_back(sid);
  Json payload{{"deleted_annotations", Json::array({id})}};
  if (!updated.empty()) payload["annotations"] = updated;
  if (!dropped.empty()) payload["deleted_suggestions"] = ids_json(dropped);
  payload["before"] = Json{{"annotation", corpus::to_json(a)}};
  commit("annotation_deleted", actor, std::move(payload));
}

const Annotation& Project::promote_to_instance(const std::string& source_id, BinaryMask mask, const std::string& actor) {
  auto source = lookup(annotations_, source_id, "annotation");
  require(is_legacy(source.provenance), ErrorCode::InvalidArgument,
          "annotation " + source_id + " is not a legacy record");
  require(!mask.is_empty(), ErrorCode::InvalidArgument, "promoted mask must not be empty");
  if (source.provenance == Provenance::LegacyBox) {
    const auto box = geometry::mask_bbox(mask);
    require(box && geometry::boxes_intersect(*box, *source.legacy_box), ErrorCode::InvalidArgument,
            "mask does not intersect the legacy box of " + source_id);
  }
  const auto now = clock_ ? clock_() : std::string();
  auto instance = build_annotation(NewAnnotation{source.folio_id, std::move(mask), std::nullopt, source.label,
                                                 Provenance::Prompted},
                                   actor, now);
  instance.id = mint_annotation_id();
  instance.source_id = source_id;
  source.derived_ids.push_back(instance.id);
  source.consumed = true;
  source.updated_at = now;
  const auto new_id = instance.id;
  commit("annotation_promoted", actor, Json{{"annotations", Json::array({corpus::to_json(source), corpus::to_json(instance)})}});
  return annotations_.at(new_id);
}

std::vector<std::string> Project::add_suggestions(std::vector<Suggestion> suggestions, const std::string& actor) {
  if (suggestions.empty()) return {};
  Json list = Json::array();
  std::vector<std::string> ids;
  auto seq = next_suggestion_;
  for (auto& s : suggestions) {
    const auto& target = lookup(annotations_, s.target_id, "annotation");
    require(!target.label && target.has_mask(), ErrorCode::InvalidArgument,
            "suggestion target " + s.target_id + " must be an unlabeled instance");
    lookup(annotations_, s.seed_id, "annotation");
    lookup(labels_, s.label, "label");
    require(s.similarity >= -1.0 && s.similarity <= 1.0, ErrorCode::InvalidArgument, "similarity out of range");
    s.id = sequence_id('s', seq++);
    s.state = SuggestionState::Pending;
    ids.push_back(s.id);
    list.push_back(corpus::to_json(s));
  }
  commit("suggestions_proposed", actor, Json{{"suggestions", list}});
  return ids;
}

const Suggestion& Project::resolve_suggestion(const std::string& id, bool accept, const std::string& actor) {
  auto s = lookup(suggestions_, id, "suggestion");
  require(s.state == SuggestionState::Pending, ErrorCode::Conflict, "suggestion " + id + " was already resolved");
  Json payload = Json::object();
  if (accept) {
    auto target = lookup(annotations_, s.target_id, "annotation");
    require(!target.label, ErrorCode::Conflict, "target " + s.target_id + " was labeled in the meantime");
    target.label = s.label;
    target.status = Status::Draft;
    target.actor = actor;
    target.updated_at = clock_ ? clock_() : std::string();
    payload["annotations"] = Json::array({corpus::to_json(target)});
  }
  s.state = accept ? SuggestionState::Accepted : SuggestionState::Rejected;
  payload["suggestions"] = Json::array({corpus::to_json(s)});
  commit(accept ? "suggestion_accepted" : "suggestion_rejected", actor, std::move(payload));
  return suggestions_.at(id);
}

void Project::check_integrity() const {
  const auto broken = [](const std::string& message) { fail(ErrorCode::Integrity, message); };
  for (const auto& [id, f] : folios_) {
    if (id != f.id) broken("folio key mismatch for '" + id + "'");
    if (f.dims.width < 1 || f.dims.height < 1) broken("folio '" + id + "' has invalid dimensions");
  }
  for (const auto& [id, l] : labels_) {
    if (id != l.id) broken("label key mismatch for '" + id + "'");
    // Walk up the parent chain; a chain longer than the label count is a cycle.
    std::size_t steps = 0;
    for (auto p = l.parent; p; p = labels_.at(*p).parent) {
      if (!labels_.count(*p)) broken("label '" + id + "' has unknown parent '" + *p + "'");
      if (++steps > labels_.size()) broken("label parents form a cycle at '" + id + "'");
    }
    for (const auto& [other_id, other] : labels_) {
      if (other_id == id) continue;
      for (const auto& alias : l.aliases)
        if (fold_text(alias) == fold_text(other.lemma))
          broken("alias '" + alias + "' of '" + id + "' is the lemma of '" + other_id + "'");
    }
  }
  for (const auto& r : rules_) {
    if (!labels_.count(r.concept_label)) broken("rule concept '" + r.concept_label + "' is not a label");
    if (r.required.empty()) broken("rule '" + r.concept_label + "' has no requirements");
    for (const auto& q : r.required)
      if (!labels_.count(q.label) || q.min_count < 1 || q.label == r.concept_label)
        broken("rule '" + r.concept_label + "' has an invalid requirement '" + q.label + "'");
  }
  for (const auto& [id, a] : annotations_) {
    if (id != a.id) broken("annotation key mismatch for '" + id + "'");
    const auto f = folios_.find(a.folio_id);
    if (f == folios_.end()) broken("annotation " + id + " references missing folio '" + a.folio_id + "'");
    if (a.label && !labels_.count(*a.label))
      broken("annotation " + id + " references missing label '" + *a.label + "'");
    try {
      check_geometry(a, f->second, ErrorCode::Integrity);
    } catch (const Error& e) {
      broken(e.what());
    }
    if (a.source_id) {
      const auto s = annotations_.find(*a.source_id);
      if (s == annotations_.end() || !is_legacy(s->second.provenance) ||
          std::find(s->second.derived_ids.begin(), s->second.derived_ids.end(), id) == s->second.derived_ids.end())
        broken("annotation " + id + " has a dangling source link");
    }
    for (const auto& d : a.derived_ids) {
      const auto t = annotations_.find(d);
      if (t == annotations_.end() || t->second.source_id != id)
        broken("annotation " + id + " has a dangling derived link '" + d + "'");
    }
  }
  for (const auto& [id, s] : suggestions_) {
    if (id != s.id) broken("suggestion key mismatch for '" + id + "'");
    if (!annotations_.count(s.target_id) || !annotations_.count(s.seed_id) || !labels_.count(s.label))
      broken("suggestion " + id + " references missing records");
  }
  for (std::size_t i = 0; i < events_.size(); ++i)
    if (events_[i].seq != i + 1) broken("event log is not contiguous at position " + std::to_string(i + 1));
}

bool Project::same_state(const Project& other) const {
  return folios_ == other.folios_ && labels_ == other.labels_ && annotations_ == other.annotations_ &&
         suggestions_ == other.suggestions_ && rules_ == other.rules_ && automask_ == other.automask_;
}

Project Project::replay(const std::string& name, const std::vector<Event>& events) {
  Project p(name, nullptr);
  for (const auto& e : events) {
    p.apply(e);
    p.events_.push_back(e);
  }
  p.check_integrity();
  return p;
}

Json Project::to_json() const {
  Json doc{{"format_version", kFormatVersion}, {"name", name_}};
  doc["automask"] = corpus::to_json(automask_);
  doc["next_ids"] = Json{{"annotation", next_annotation_}, {"suggestion", next_suggestion_}};
  auto list = [](const auto& map) {
    Json out = Json::array();
    for (const auto& [id, v] : map) out.push_back(corpus::to_json(v));
    return out;
  };
  doc["folios"] = list(folios_);
  doc["labels"] = list(labels_);
  Json rules = Json::array();
  for (const auto& r : rules_) rules.push_back(corpus::to_json(r));
  doc["rules"] = rules;
  doc["annotations"] = list(annotations_);
  doc["suggestions"] = list(suggestions_);
  Json events = Json::array();
  for (const auto& e : events_) events.push_back(corpus::to_json(e));
  doc["events"] = events;
  return doc;
}

Project Project::from_json(const Json& doc, Clock clock) {
  require(doc.is_object(), ErrorCode::Parse, "project document must be an object");
  const auto version = doc.find("format_version");
  require(version != doc.end(), ErrorCode::Parse, "project document lacks format_version");
  require(version->is_string() && version->get<std::string>() == kFormatVersion, ErrorCode::VersionMismatch,
          "unsupported project format_version " + version->dump() + " (this build reads \"" + kFormatVersion + "\")");
  Project p(doc.value("name", std::string()), std::move(clock));
  try {
    if (const auto it = doc.find("automask"); it != doc.end()) p.automask_ = automask_from_json(*it);
    for (const auto& f : wire::field(doc, "folios")) {
      auto folio = folio_from_json(f);
      const auto id = folio.id;
      require(p.folios_.emplace(id, std::move(folio)).second, ErrorCode::Integrity, "duplicate folio '" + id + "'");
    }
    for (const auto& l : wire::field(doc, "labels")) {
      auto label = label_from_json(l);
      const auto id = label.id;
      require(p.labels_.emplace(id, std::move(label)).second, ErrorCode::Integrity, "duplicate label '" + id + "'");
    }
    if (const auto it = doc.find("rules"); it != doc.end())
      for (const auto& r : *it) p.rules_.push_back(rule_from_json(r));
    for (const auto& a : wire::field(doc, "annotations")) {
      auto ann = annotation_from_json(a);
      const auto id = ann.id;
      p.next_annotation_ = std::max(p.next_annotation_, sequence_of(id, 'a') + 1);
      require(p.annotations_.emplace(id, std::move(ann)).second, ErrorCode::Integrity,
              "duplicate annotation '" + id + "'");
    }
    if (const auto it = doc.find("suggestions"); it != doc.end())
      for (const auto& s : *it) {
        auto sug = suggestion_from_json(s);
        const auto id = sug.id;
        p.next_suggestion_ = std::max(p.next_suggestion_, sequence_of(id, 's') + 1);
        require(p.suggestions_.emplace(id, std::move(sug)).second, ErrorCode::Integrity,
                "duplicate suggestion '" + id + "'");
      }
    if (const auto it = doc.find("events"); it != doc.end())
      for (const auto& e : *it) p.events_.push_back(event_from_json(e));
    if (const auto it = doc.find("next_ids"); it != doc.end()) {
      p.next_annotation_ = std::max(p.next_annotation_, it->value("annotation", std::uint64_t{1}));
      p.next_suggestion_ = std::max(p.next_suggestion_, it->value("suggestion", std::uint64_t{1}));
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::Parse, std::string("malformed project document: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument || e.code() == ErrorCode::DimensionMismatch)
      fail(ErrorCode::Parse, std::string("malformed project document: ") + e.what());
    throw;
  }
  p.check_integrity();
  return p;
}

void save_project(const Project& project, const std::filesystem::path& path) {
  project.check_integrity();
  write_file_atomic(path, project.to_json().dump(2) + "\n");
}

Project load_project(const std::filesystem::path& path, Clock clock) {
  const auto bytes = read_file_bytes(path);
  return Project::from_json(wire::parse(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size())),
                            std::move(clock));
}

}  // namespace folioseg::corpus
