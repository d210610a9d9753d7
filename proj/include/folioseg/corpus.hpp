#pragma once

// Project model: vocabulary, folios, annotations, concept rules, suggestions
// and the append-only event log.
//
// Every mutation is expressed as one Event whose payload carries the full
// after-state of each touched record. The same apply step serves live
// mutation and replay, so replaying the log always reproduces the project.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "folioseg/geometry.hpp"
#include "folioseg/wire.hpp"

namespace folioseg::corpus {

using geometry::BBox;
using geometry::BinaryMask;
using geometry::GridDims;

enum class Provenance { LegacyImageLevel, LegacyBox, Auto, TextGrounded, Prompted, Manual };
enum class Status { Draft, Validated, Rejected };

std::string_view provenance_name(Provenance p) noexcept;
Provenance parse_provenance(std::string_view name);
std::string_view status_name(Status s) noexcept;
Status parse_status(std::string_view name);
/// draft->validated, draft->rejected, rejected->draft.
bool is_legal_transition(Status from, Status to) noexcept;

struct Label {
  std::string id;
  std::string lemma;
  std::optional<std::string> gloss;
  std::string language = "fr";
  std::vector<std::string> aliases;
  std::optional<std::string> parent;
  friend bool operator==(const Label&, const Label&) = default;
};

struct Requirement {
  std::string label;
  std::uint32_t min_count = 1;
  friend bool operator==(const Requirement&, const Requirement&) = default;
};

struct ConceptRule {
  std::string concept_label;
  std::vector<Requirement> required;
  friend bool operator==(const ConceptRule&, const ConceptRule&) = default;
};

struct Folio {
  std::string id;
  std::string shelfmark;
  std::string folio_ref;
  std::string image_uri;
  GridDims dims;
  /// pixel_key of the decoded image; lets providers and caches find it.
  std::string content_key;
  friend bool operator==(const Folio&, const Folio&) = default;
};

struct Annotation {
  std::string id;
  std::string folio_id;
  std::optional<BinaryMask> mask;
  /// Only for legacy_box provenance: the box as catalogued.
  std::optional<BBox> legacy_box;
  std::optional<std::string> label;
  Provenance provenance = Provenance::Manual;
  Status status = Status::Draft;
  std::string actor;
  std::string created_at;
  std::string updated_at;
  /// Legacy record this instance was promoted from.
  std::optional<std::string> source_id;
  /// Instances promoted from this legacy record.
  std::vector<std::string> derived_ids;
  bool consumed = false;

  // Derived from mask (or legacy_box); kept in sync by set_mask.
  std::optional<BBox> bbox;
  std::vector<geometry::Polygon> polygons;

  bool has_mask() const noexcept { return mask.has_value() && !mask->is_empty(); }
  void set_mask(std::optional<BinaryMask> m);
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct AutomaskDefaults {
  double min_quality = 0.7;
  std::uint64_t min_area = 100;
  double nms_iou = 0.7;
  std::uint32_t max_proposals = 500;
  friend bool operator==(const AutomaskDefaults&, const AutomaskDefaults&) = default;
};

enum class SuggestionState { Pending, Accepted, Rejected };
std::string_view suggestion_state_name(SuggestionState s) noexcept;

struct Suggestion {
  std::string id;
  std::string target_id;
  std::string label;
  double similarity = 0.0;
  std::string seed_id;
  SuggestionState state = SuggestionState::Pending;
  friend bool operator==(const Suggestion&, const Suggestion&) = default;
};

struct Event {
  std::uint64_t seq = 0;
  std::string type;
  std::string at;
  std::string actor;
  Json payload;
  friend bool operator==(const Event&, const Event&) = default;
};

/// ISO-8601 UTC timestamp source.
using Clock = std::function<std::string()>;
Clock system_clock();
/// Deterministic clock for tests: "2026-01-01T00:00:00.000Z" plus one
/// second per call.
Clock counting_clock();

enum class ResolveMode { MatchOnly, CreateOrMatch };

/// Everything needed to create an annotation; ids and timestamps are minted.
struct NewAnnotation {
  std::string folio_id;
  std::optional<BinaryMask> mask;
  std::optional<BBox> legacy_box;
  std::optional<std::string> label;
  Provenance provenance = Provenance::Manual;
};

class Project {
 public:
  explicit Project(std::string name = {}, Clock clock = system_clock());

  const std::string& name() const noexcept { return name_; }
  const std::map<std::string, Folio>& folios() const noexcept { return folios_; }
  const std::map<std::string, Label>& labels() const noexcept { return labels_; }
  const std::map<std::string, Annotation>& annotations() const noexcept { return annotations_; }
  const std::map<std::string, Suggestion>& suggestions() const noexcept { return suggestions_; }
  const std::vector<ConceptRule>& rules() const noexcept { return rules_; }
  const std::vector<Event>& events() const noexcept { return events_; }
  const AutomaskDefaults& automask_defaults() const noexcept { return automask_; }

  /// Throw NotFound for unknown ids.
  const Folio& folio(const std::string& id) const;
  const Label& label(const std::string& id) const;
  const Annotation& annotation(const std::string& id) const;
  const Suggestion& suggestion(const std::string& id) const;

  void set_clock(Clock clock) { clock_ = std::move(clock); }

  // Mutations. Each validates first, then appends exactly one event.

  const Folio& add_folio(Folio folio, const std::string& actor);
  const Label& add_label(Label label, const std::string& actor);
  /// Case- and diacritic-insensitive match on lemma, gloss and aliases.
  /// Lemma matches win over gloss/alias matches, then the smaller id.
  std::optional<std::string> match_label(std::string_view text) const;
  std::string resolve_label(std::string_view text, ResolveMode mode, const std::string& actor);
  void set_rules(std::vector<ConceptRule> rules, const std::string& actor);
  void set_automask_defaults(const AutomaskDefaults& defaults, const std::string& actor);

  const Annotation& add_annotation(NewAnnotation spec, const std::string& actor);
  /// Adds several annotations as one event; returns their ids in order.
  std::vector<std::string> add_annotations(std::vector<NewAnnotation> specs, const std::string& actor,
                                           const std::string& event_type = "annotations_added");
  const Annotation& set_status(const std::string& id, Status to, const std::string& actor);
  /// Replaces the mask of a draft instance; status stays draft.
  const Annotation& edit_geometry(const std::string& id, BinaryMask mask, const std::string& actor);
  /// Relabels (or clears the label of) an instance. A validated annotation
  /// returns to draft because its label changed.
  const Annotation& assign_label(const std::string& id, std::optional<std::string> label, const std::string& actor);
  void delete_annotation(const std::string& id, const std::string& actor);
  /// New prompted draft from a legacy record; the source is kept and marked consumed.
  const Annotation& promote_to_instance(const std::string& source_id, BinaryMask mask, const std::string& actor);

  std::vector<std::string> add_suggestions(std::vector<Suggestion> suggestions, const std::string& actor);
  /// Accepting labels the target (status draft) in the same event.
  const Suggestion& resolve_suggestion(const std::string& id, bool accept, const std::string& actor);

  /// Throws Integrity on any broken reference or invariant.
  void check_integrity() const;

  /// State equality, ignoring the log and clock.
  bool same_state(const Project& other) const;
  /// Rebuilds a project from nothing but its events.
  static Project replay(const std::string& name, const std::vector<Event>& events);

  // Serialization.
  Json to_json() const;
  static Project from_json(const Json& doc, Clock clock = system_clock());

 private:
  void commit(std::string type, const std::string& actor, Json payload);
  void apply(const Event& event);
  std::string mint_annotation_id();
  Annotation build_annotation(NewAnnotation spec, const std::string& actor, const std::string& now) const;

  std::string name_;
  Clock clock_;
  std::map<std::string, Folio> folios_;
  std::map<std::string, Label> labels_;
  std::map<std::string, Annotation> annotations_;
  std::map<std::string, Suggestion> suggestions_;
  std::vector<ConceptRule> rules_;
  AutomaskDefaults automask_;
  std::vector<Event> events_;
  std::uint64_t next_annotation_ = 1;
  std::uint64_t next_suggestion_ = 1;
};

inline constexpr const char* kFormatVersion = "1";

void save_project(const Project& project, const std::filesystem::path& path);
Project load_project(const std::filesystem::path& path, Clock clock = system_clock());

// Record <-> JSON, as used in the project file and event payloads.
Json to_json(const Label& l);
Label label_from_json(const Json& j);
Json to_json(const Folio& f);
Folio folio_from_json(const Json& j);
Json to_json(const Annotation& a);
Annotation annotation_from_json(const Json& j);
Json to_json(const ConceptRule& r);
ConceptRule rule_from_json(const Json& j);
Json to_json(const Suggestion& s);
Suggestion suggestion_from_json(const Json& j);
Json to_json(const AutomaskDefaults& d);
AutomaskDefaults automask_from_json(const Json& j);
Json to_json(const Event& e);
Event event_from_json(const Json& j);

// Legacy ingestion.

struct LegacyRecord {
  std::size_t line = 0;  // 1-based source line or record index
  std::string folio_key;
  std::string label_text;
  std::optional<BBox> box;
};

struct RecordIssue {
  std::size_t line = 0;
  std::string message;
};

struct ImportReport {
  std::vector<std::string> created;
  std::vector<RecordIssue> rejected;
  std::vector<RecordIssue> warnings;
  bool partial() const noexcept { return !rejected.empty(); }
};

/// Delimited text with header folio_key,label[,x_min,y_min,x_max,y_max].
/// Malformed rows land in `issues`.
std::vector<LegacyRecord> parse_legacy_csv(std::string_view text, std::vector<RecordIssue>& issues);
/// JSON array of {folio_key, label, box?: {x_min, ...}} or [x_min, y_min, x_max, y_max].
std::vector<LegacyRecord> parse_legacy_json(std::string_view text, std::vector<RecordIssue>& issues);
/// Picks the parser from the extension (.json, else delimited text).
std::vector<LegacyRecord> read_legacy_file(const std::filesystem::path& path, std::vector<RecordIssue>& issues);

ImportReport import_legacy_image_tags(Project& project, const std::vector<LegacyRecord>& records,
                                      const std::string& actor);
ImportReport import_legacy_boxes(Project& project, const std::vector<LegacyRecord>& records,
                                 const std::string& actor);

// Concepts and statistics.

struct ConceptSuggestion {
  std::string concept_label;
  std::vector<std::string> supporting_ids;
  friend bool operator==(const ConceptSuggestion&, const ConceptSuggestion&) = default;
};

/// Fires a rule when the folio's validated instances carry every required
/// label at least min_count times. Suggestions only; nothing is created.
std::vector<ConceptSuggestion> infer_concepts(const Project& project, const std::string& folio_id,
                                              const std::vector<ConceptRule>& rules);

struct Stats {
  std::uint64_t total = 0;
  std::map<std::string, std::uint64_t> by_label;  // "" for unlabeled
  std::map<std::string, std::uint64_t> by_status;
  std::map<std::string, std::uint64_t> by_provenance;
  std::map<std::string, std::uint64_t> by_folio;
};
Stats stats(const Project& project);
Json to_json(const Stats& s);

// COCO export.

enum class ExportMode { ValidatedOnly, AllInstances };
ExportMode parse_export_mode(std::string_view name);

struct ExportReport {
  std::uint64_t exported = 0;
  std::uint64_t skipped_no_mask = 0;
  std::uint64_t skipped_unlabeled = 0;
  std::uint64_t skipped_status = 0;
  std::vector<std::string> warnings;
};

struct CocoExport {
  Json document;
  ExportReport report;
  /// Canonical serialization; byte-identical for identical projects.
  std::string text() const;
};

/// Polygons from polygonize(mask, 1.0), tightened until every annotation
/// re-rasterizes to IoU >= 0.99. ValidatedOnly exports validated instances;
/// AllInstances adds drafts (rejected annotations are never exported).
CocoExport export_coco(const Project& project, ExportMode mode);
/// Flattens a polygon with holes into one ring by bridging each hole to the
/// ring built so far; the result rasterizes identically under even-odd.
geometry::Ring keyhole(const geometry::Polygon& polygon);

}  // namespace folioseg::corpus
