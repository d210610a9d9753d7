#pragma once

// JSON forms shared by the project file, the HTTP API and the provider
// sidecar protocol. Masks always travel as {"dims": {...}, "runs": [...]}.

#include <json.hpp>

#include "folioseg/geometry.hpp"
#include "folioseg/provider.hpp"

namespace folioseg {

using Json = nlohmann::ordered_json;

namespace wire {

Json dims_to_json(geometry::GridDims dims);
geometry::GridDims dims_from_json(const Json& j);

Json mask_to_json(const geometry::BinaryMask& mask);
geometry::BinaryMask mask_from_json(const Json& j);

Json box_to_json(const geometry::BBox& box);
geometry::BBox box_from_json(const Json& j);

Json ring_to_json(const geometry::Ring& ring);
geometry::Ring ring_from_json(const Json& j);
Json polygon_to_json(const geometry::Polygon& polygon);
geometry::Polygon polygon_from_json(const Json& j);

/// {runs, dims, quality} plus "source".
Json proposal_to_json(const geometry::Proposal& proposal);
geometry::Proposal proposal_from_json(const Json& j);

Json prompts_to_json(const provider::PromptSet& prompts);
provider::PromptSet prompts_from_json(const Json& j);

Json detection_to_json(const provider::TextDetection& d);
provider::TextDetection detection_from_json(const Json& j);

Json tag_to_json(const provider::ImageTag& t);
provider::ImageTag tag_from_json(const Json& j);

Json descriptor_to_json(const provider::ProviderDescriptor& d);
provider::ProviderDescriptor descriptor_from_json(const Json& j);

/// Parses text, mapping syntax errors to ErrorCode::Parse.
Json parse(std::string_view text);

/// Lookup helpers that raise ErrorCode::Parse with the field name.
const Json& field(const Json& j, const char* name);
std::string string_field(const Json& j, const char* name);

}  // namespace wire
}  // namespace folioseg
