#include "folioseg/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "folioseg/text.hpp"

namespace folioseg::pipeline {

using provider::Capability;

void validate_config(const AutomaskConfig& c) {
  require(c.min_quality >= 0.0 && c.min_quality <= 1.0, ErrorCode::InvalidArgument, "min_quality must be in [0,1]");
  require(c.nms_iou >= 0.0 && c.nms_iou <= 1.0, ErrorCode::InvalidArgument, "nms_iou must be in [0,1]");
  require(c.max_proposals >= 1, ErrorCode::InvalidArgument, "max_proposals must be positive");
}

std::vector<Proposal> filter_proposals(std::vector<Proposal> raw, const AutomaskConfig& config) {
  validate_config(config);
  std::erase_if(raw, [&](const Proposal& p) {
    return p.quality < config.min_quality || geometry::mask_area(p.mask) < config.min_area;
  });
  auto kept = geometry::nms(std::move(raw), config.nms_iou);
  if (kept.size() > config.max_proposals) kept.erase(kept.begin() + config.max_proposals, kept.end());
  return kept;
}

std::vector<Proposal> generate_automask(const provider::ImageInput& image, provider::Provider& provider,
                                        const AutomaskConfig& config) {
  validate_config(config);
  try {
    provider::require_capability(provider.describe(), Capability::AutoSegmentation);
    return filter_proposals(provider.segment_everything(image), config);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("automask: ") + e.what());
  }
}

std::vector<std::string> commit_automask(corpus::Project& project, const std::string& folio_id,
                                         const std::vector<Proposal>& proposals, const std::string& actor) {
  std::vector<corpus::NewAnnotation> specs;
  for (const auto& p : proposals)
    specs.push_back({folio_id, p.mask, std::nullopt, std::nullopt, corpus::Provenance::Auto});
  return project.add_annotations(std::move(specs), actor, "automask_drafts_added");
}

GroundingResult ground_annotations(const corpus::Project& project, const provider::ImageInput& image,
                                   std::span<const std::string> phrases, provider::Provider& provider) {
  GroundingResult result;
  // Resolve phrases; every textual form of a label becomes a detector query.
  std::map<std::string, std::string> label_of_form;     // folded form -> label id
  std::map<std::string, std::string> phrase_of_label;   // label id -> first phrase naming it
  std::vector<std::string> queries;
  for (const auto& phrase : phrases) {
    const auto id = project.match_label(phrase);
    if (!id) {
      result.failures.push_back({phrase, ErrorCode::NotFound, "no label matches '" + phrase + "'"});
      continue;
    }
    if (!phrase_of_label.emplace(*id, phrase).second) continue;
    const auto& label = project.label(*id);
    std::vector<std::string> forms{phrase, label.lemma};
    if (label.gloss) forms.push_back(*label.gloss);
    forms.insert(forms.end(), label.aliases.begin(), label.aliases.end());
    for (const auto& form : forms) {
      const auto key = fold_text(form);
      if (!key.empty() && label_of_form.emplace(key, *id).second) queries.push_back(form);
    }
  }
  if (queries.empty()) return result;

  const auto descriptor = provider.describe();
  provider::require_capability(descriptor, Capability::TextDetection);
  provider::require_capability(descriptor, Capability::PromptSegmentation);
  const auto detections = provider.detect_by_text(image, queries);

  std::set<std::string> detected;
  std::set<std::tuple<std::string, std::int32_t, std::int32_t, std::int32_t, std::int32_t>> seen_boxes;
  for (const auto& d : detections) {
    const auto it = label_of_form.find(fold_text(d.phrase));
    if (it == label_of_form.end()) continue;
    const auto& label = it->second;
    detected.insert(label);
    if (!seen_boxes.emplace(label, d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max).second) continue;
    const auto& phrase = phrase_of_label.at(label);
    try {
      const auto proposals = provider.segment_with_prompts(image, provider::PromptSet{{}, d.box});
      if (proposals.empty() || proposals.front().mask.is_empty()) {
        result.failures.push_back({phrase, ErrorCode::NotFound, "nothing segmented inside the detection box"});
        continue;
      }
      result.drafts.push_back({phrase, label, d.box, d.confidence, proposals.front().mask});
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ProviderUnavailable || e.code() == ErrorCode::ProviderTimeout) throw;
      result.failures.push_back({phrase, e.code(), e.what()});
    }
  }
  for (const auto& [label, phrase] : phrase_of_label)
    if (!detected.count(label)) result.undetected.push_back(phrase);
  return result;
}

std::vector<std::string> commit_grounded(corpus::Project& project, const std::string& folio_id,
                                         const GroundingResult& result, const std::string& actor) {
  std::vector<corpus::NewAnnotation> specs;
  for (const auto& d : result.drafts)
    specs.push_back({folio_id, d.mask, std::nullopt, d.label, corpus::Provenance::TextGrounded});
  return project.add_annotations(std::move(specs), actor, "grounded_drafts_added");
}

DecisionKind parse_decision(std::string_view name) {
  if (name == "accept") return DecisionKind::Accept;
  if (name == "reject") return DecisionKind::Reject;
  if (name == "edit") return DecisionKind::Edit;
  if (name == "reopen") return DecisionKind::Reopen;
  fail(ErrorCode::InvalidArgument, "decision must be accept, reject, edit or reopen");
}

const corpus::Annotation& validate(corpus::Project& project, const std::string& annotation_id,
                                   const Decision& decision, const std::string& actor) {
  using corpus::Status;
  switch (decision.kind) {
    case DecisionKind::Accept: return project.set_status(annotation_id, Status::Validated, actor);
    case DecisionKind::Reject: return project.set_status(annotation_id, Status::Rejected, actor);
    case DecisionKind::Reopen: return project.set_status(annotation_id, Status::Draft, actor);
    case DecisionKind::Edit:
      require(decision.mask.has_value(), ErrorCode::InvalidArgument, "edit needs new geometry");
      return project.edit_geometry(annotation_id, *decision.mask, actor);
  }
  fail(ErrorCode::Internal, "unhandled decision");
}

}  // namespace folioseg::pipeline
