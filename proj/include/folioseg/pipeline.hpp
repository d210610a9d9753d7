#pragma once

// Automatic mask generation, text-grounded drafting and human validation.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "folioseg/corpus.hpp"
#include "folioseg/error.hpp"
#include "folioseg/provider.hpp"

namespace folioseg::pipeline {

using AutomaskConfig = corpus::AutomaskDefaults;
using geometry::Proposal;

/// Throws InvalidArgument when a bound is out of range.
void validate_config(const AutomaskConfig& config);

/// quality >= min_quality, then area >= min_area, then NMS, then truncation.
std::vector<Proposal> filter_proposals(std::vector<Proposal> raw, const AutomaskConfig& config);
std::vector<Proposal> generate_automask(const provider::ImageInput& image, provider::Provider& provider,
                                        const AutomaskConfig& config);
/// Stores proposals as unlabeled auto drafts in one event.
std::vector<std::string> commit_automask(corpus::Project& project, const std::string& folio_id,
                                         const std::vector<Proposal>& proposals, const std::string& actor);

struct GroundedDraft {
  std::string phrase;
  std::string label;
  geometry::BBox box;
  double confidence = 0.0;
  geometry::BinaryMask mask;
};

struct PhraseFailure {
  std::string phrase;
  ErrorCode code = ErrorCode::NotFound;
  std::string message;
};

struct GroundingResult {
  std::vector<GroundedDraft> drafts;     // detection order: confidence descending
  std::vector<PhraseFailure> failures;   // unresolvable phrases, empty segmentations
  std::vector<std::string> undetected;   // resolved but nothing found in the image
};

/// Resolves each phrase against the vocabulary (match only), detects every
/// textual form of the resolved labels, and segments inside each detection
/// box with a box-only prompt, keeping the top proposal. Read-only.
GroundingResult ground_annotations(const corpus::Project& project, const provider::ImageInput& image,
                                   std::span<const std::string> phrases, provider::Provider& provider);
/// Stores grounded drafts (text_grounded, draft) in one event.
std::vector<std::string> commit_grounded(corpus::Project& project, const std::string& folio_id,
                                         const GroundingResult& result, const std::string& actor);

enum class DecisionKind { Accept, Reject, Edit, Reopen };
DecisionKind parse_decision(std::string_view name);

struct Decision {
  DecisionKind kind = DecisionKind::Accept;
  std::optional<geometry::BinaryMask> mask;  // Edit only
};

/// accept: draft->validated; reject: draft->rejected; reopen: rejected->draft;
/// edit: new geometry on a draft, which stays draft.
const corpus::Annotation& validate(corpus::Project& project, const std::string& annotation_id,
                                   const Decision& decision, const std::string& actor);

}  // namespace folioseg::pipeline
