#include <algorithm>
#include <cmath>
#include <set>

#include "folioseg/corpus.hpp"
#include "folioseg/error.hpp"

namespace folioseg::corpus {

using geometry::Point;
using geometry::Polygon;
using geometry::Ring;

std::vector<ConceptSuggestion> infer_concepts(const Project& project, const std::string& folio_id,
                                              const std::vector<ConceptRule>& rules) {
  project.folio(folio_id);
  std::map<std::string, std::vector<std::string>> by_label;
  for (const auto& [id, a] : project.annotations()) {
    if (a.folio_id == folio_id && a.status == Status::Validated && a.has_mask() && a.label)
      by_label[*a.label].push_back(id);
  }
  std::vector<ConceptSuggestion> out;
  for (const auto& rule : rules) {
    bool fires = true;
    std::set<std::string> support;
    for (const auto& q : rule.required) {
      const auto it = by_label.find(q.label);
      if (it == by_label.end() || it->second.size() < q.min_count) {
        fires = false;
        break;
      }
      support.insert(it->second.begin(), it->second.end());
    }
    if (fires) out.push_back({rule.concept_label, {support.begin(), support.end()}});
  }
  return out;
}

Stats stats(const Project& project) {
  Stats s;
  for (const auto& [id, l] : project.labels()) s.by_label[id] = 0;
  for (const auto& [id, f] : project.folios()) s.by_folio[id] = 0;
  for (const auto st : {Status::Draft, Status::Validated, Status::Rejected}) s.by_status[std::string(status_name(st))] = 0;
  for (const auto p : {Provenance::LegacyImageLevel, Provenance::LegacyBox, Provenance::Auto, Provenance::TextGrounded,
                       Provenance::Prompted, Provenance::Manual})
    s.by_provenance[std::string(provenance_name(p))] = 0;
  for (const auto& [id, a] : project.annotations()) {
    ++s.total;
    ++s.by_label[a.label.value_or("")];
    ++s.by_status[std::string(status_name(a.status))];
    ++s.by_provenance[std::string(provenance_name(a.provenance))];
    ++s.by_folio[a.folio_id];
  }
  return s;
}

Json to_json(const Stats& s) {
  return Json{{"total", s.total},
              {"by_label", s.by_label},
              {"by_status", s.by_status},
              {"by_provenance", s.by_provenance},
              {"by_folio", s.by_folio}};
}

Ring keyhole(const Polygon& polygon) {
  Ring ring = polygon.exterior;
  for (const auto& hole : polygon.holes) {
    if (hole.empty()) continue;
    std::size_t best_i = 0;
    std::size_t best_j = 0;
    double best = INFINITY;
    for (std::size_t i = 0; i < ring.size(); ++i)
      for (std::size_t j = 0; j < hole.size(); ++j) {
        const double dx = ring[i].x - hole[j].x;
        const double dy = ring[i].y - hole[j].y;
        const double d = dx * dx + dy * dy;
        if (d < best) {
          best = d;
          best_i = i;
          best_j = j;
        }
      }
    // ring[..i], hole from j all the way round to j, back to ring[i], ring[i+1..].
    Ring next(ring.begin(), ring.begin() + static_cast<std::ptrdiff_t>(best_i) + 1);
    for (std::size_t k = 0; k <= hole.size(); ++k) next.push_back(hole[(best_j + k) % hole.size()]);
    next.insert(next.end(), ring.begin() + static_cast<std::ptrdiff_t>(best_i), ring.end());
    ring = std::move(next);
  }
  return ring;
}

namespace {

Json coordinate(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return Json(static_cast<std::int64_t>(v));
  return Json(v);
}

std::string file_name_of(const Folio& f) {
  auto uri = f.image_uri;
  if (const auto q = uri.find_first_of("?#"); q != std::string::npos) uri.resize(q);
  const auto slash = uri.find_last_of('/');
  auto name = slash == std::string::npos ? uri : uri.substr(slash + 1);
  return name.empty() ? f.id + ".png" : name;
}

struct Flattened {
  std::vector<Ring> rings;
  double iou = 0.0;
};

Flattened flatten(const BinaryMask& mask) {
  Flattened best;
  for (const double tol : {1.0, 0.5, 0.25, 0.0}) {
    Flattened f;
    auto raster = BinaryMask::empty(mask.dims());
    for (const auto& poly : geometry::polygonize(mask, tol)) {
      auto ring = keyhole(poly);
      raster = geometry::mask_union(raster, geometry::rasterize(Polygon{ring, {}}, mask.dims()));
      f.rings.push_back(std::move(ring));
    }
    f.iou = geometry::mask_iou(raster, mask);
    if (f.iou > best.iou || best.rings.empty()) best = std::move(f);
    if (best.iou >= 0.99) break;
  }
  return best;
}

}  // namespace

CocoExport export_coco(const Project& project, ExportMode mode) {
  CocoExport out;
  auto& doc = out.document;
  doc["info"] = Json{{"description", project.name().empty() ? "folioseg export" : project.name()},
                     {"version", "1.0"},
                     {"mode", mode == ExportMode::ValidatedOnly ? "validated_only" : "all_instances"}};
  doc["licenses"] = Json::array();

  std::map<std::string, std::int64_t> image_ids;
  Json images = Json::array();
  for (const auto& [id, f] : project.folios()) {
    const auto n = static_cast<std::int64_t>(image_ids.size()) + 1;
    image_ids[id] = n;
    images.push_back(Json{{"id", n},
                          {"file_name", file_name_of(f)},
                          {"width", f.dims.width},
                          {"height", f.dims.height},
                          {"folio_id", id}});
  }
  doc["images"] = images;

  std::map<std::string, std::int64_t> category_ids;
  Json categories = Json::array();
  for (const auto& [id, l] : project.labels()) {
    const auto n = static_cast<std::int64_t>(category_ids.size()) + 1;
    category_ids[id] = n;
    const auto super = l.parent ? project.label(*l.parent).lemma : std::string();
    categories.push_back(Json{{"id", n}, {"name", l.lemma}, {"supercategory", super}, {"label_id", id}});
  }
  doc["categories"] = categories;

  Json annotations = Json::array();
  for (const auto& [id, a] : project.annotations()) {
    if (!a.has_mask()) {
      ++out.report.skipped_no_mask;
      continue;
    }
    const bool eligible = mode == ExportMode::ValidatedOnly ? a.status == Status::Validated
                                                            : a.status != Status::Rejected;
    if (!eligible) {
      ++out.report.skipped_status;
      continue;
    }
    if (!a.label) {
      ++out.report.skipped_unlabeled;
      continue;
    }
    const auto flat = flatten(*a.mask);
    if (flat.iou < 0.99) out.report.warnings.push_back("annotation " + id + ": polygon IoU " + std::to_string(flat.iou));
    Json segmentation = Json::array();
    for (const auto& ring : flat.rings) {
      Json coords = Json::array();
      for (const auto& p : ring) {
        coords.push_back(coordinate(p.x));
        coords.push_back(coordinate(p.y));
      }
      segmentation.push_back(std::move(coords));
    }
    const auto& b = *a.bbox;
    annotations.push_back(Json{{"id", static_cast<std::int64_t>(annotations.size()) + 1},
                               {"image_id", image_ids.at(a.folio_id)},
                               {"category_id", category_ids.at(*a.label)},
                               {"segmentation", segmentation},
                               {"area", geometry::mask_area(*a.mask)},
                               {"bbox", Json::array({b.x_min, b.y_min, b.width(), b.height()})},
                               {"iscrowd", 0},
                               {"annotation_id", id}});
  }
  out.report.exported = annotations.size();
  doc["annotations"] = annotations;
  if (out.report.exported == 0) out.report.warnings.push_back("no exportable annotations");
  return out;
}

std::string CocoExport::text() const { return document.dump(2) + "\n"; }

}  // namespace folioseg::corpus
