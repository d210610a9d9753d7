#include "folioseg/wire.hpp"

#include "folioseg/error.hpp"

namespace folioseg::wire {

using geometry::BBox;
using geometry::BinaryMask;
using geometry::GridDims;

Json parse(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::Parse, std::string("malformed JSON: ") + e.what());
  }
}

const Json& field(const Json& j, const char* name) {
  if (!j.is_object()) fail(ErrorCode::Parse, std::string("expected an object holding '") + name + "'");
  const auto it = j.find(name);
  if (it == j.end()) fail(ErrorCode::Parse, std::string("missing field '") + name + "'");
  return *it;
}

std::string string_field(const Json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) fail(ErrorCode::Parse, std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

Json dims_to_json(GridDims dims) { return Json{{"width", dims.width}, {"height", dims.height}}; }

GridDims dims_from_json(const Json& j) {
  return {field(j, "width").get<std::int32_t>(), field(j, "height").get<std::int32_t>()};
}

Json mask_to_json(const BinaryMask& mask) {
  return Json{{"dims", dims_to_json(mask.dims())}, {"runs", mask.runs()}};
}

BinaryMask mask_from_json(const Json& j) {
  return BinaryMask(dims_from_json(field(j, "dims")), field(j, "runs").get<std::vector<std::uint32_t>>());
}

Json box_to_json(const BBox& box) {
  return Json{{"x_min", box.x_min}, {"y_min", box.y_min}, {"x_max", box.x_max}, {"y_max", box.y_max}};
}

BBox box_from_json(const Json& j) {
  BBox box{field(j, "x_min").get<std::int32_t>(), field(j, "y_min").get<std::int32_t>(),
           field(j, "x_max").get<std::int32_t>(), field(j, "y_max").get<std::int32_t>()};
  require(box.is_valid(), ErrorCode::InvalidArgument, "box must satisfy 0 <= min < max");
  return box;
}

Json ring_to_json(const geometry::Ring& ring) {
  Json out = Json::array();
  for (const auto& p : ring) out.push_back(Json::array({p.x, p.y}));
  return out;
}

geometry::Ring ring_from_json(const Json& j) {
  require(j.is_array(), ErrorCode::Parse, "ring must be an array of [x, y] pairs");
  geometry::Ring ring;
  for (const auto& p : j) {
    require(p.is_array() && p.size() == 2, ErrorCode::Parse, "ring vertex must be [x, y]");
    ring.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return ring;
}

Json polygon_to_json(const geometry::Polygon& polygon) {
  Json holes = Json::array();
  for (const auto& h : polygon.holes) holes.push_back(ring_to_json(h));
  return Json{{"exterior", ring_to_json(polygon.exterior)}, {"holes", holes}};
}

geometry::Polygon polygon_from_json(const Json& j) {
  geometry::Polygon polygon;
  polygon.exterior = ring_from_json(field(j, "exterior"));
  if (const auto it = j.find("holes"); it != j.end()) {
    for (const auto& h : *it) polygon.holes.push_back(ring_from_json(h));
  }
  return polygon;
}

Json proposal_to_json(const geometry::Proposal& proposal) {
  return Json{{"runs", proposal.mask.runs()},
              {"dims", dims_to_json(proposal.mask.dims())},
              {"quality", proposal.quality},
              {"source", std::string(geometry::proposal_source_name(proposal.source))}};
}

geometry::Proposal proposal_from_json(const Json& j) {
  geometry::Proposal p{mask_from_json(j), field(j, "quality").get<double>(), geometry::ProposalSource::Prompted};
  require(p.quality >= 0.0 && p.quality <= 1.0, ErrorCode::InvalidArgument, "proposal quality outside [0, 1]");
  if (const auto it = j.find("source"); it != j.end()) p.source = geometry::parse_proposal_source(it->get<std::string>());
  return p;
}

Json prompts_to_json(const provider::PromptSet& prompts) {
  Json points = Json::array();
  for (const auto& p : prompts.points) {
    points.push_back(Json{{"x", p.x},
                          {"y", p.y},
                          {"polarity", p.polarity == provider::Polarity::Positive ? "positive" : "negative"}});
  }
  Json out{{"points", points}};
  if (prompts.box) out["box"] = box_to_json(*prompts.box);
  return out;
}

provider::PromptSet prompts_from_json(const Json& j) {
  provider::PromptSet prompts;
  if (const auto it = j.find("points"); it != j.end()) {
    for (const auto& p : *it) {
      const auto polarity = string_field(p, "polarity");
      require(polarity == "positive" || polarity == "negative", ErrorCode::Parse,
              "polarity must be 'positive' or 'negative'");
      prompts.points.push_back({field(p, "x").get<double>(), field(p, "y").get<double>(),
                                polarity == "positive" ? provider::Polarity::Positive : provider::Polarity::Negative});
    }
  }
  if (const auto it = j.find("box"); it != j.end() && !it->is_null()) prompts.box = box_from_json(*it);
  return prompts;
}

Json detection_to_json(const provider::TextDetection& d) {
  return Json{{"phrase", d.phrase}, {"box", box_to_json(d.box)}, {"confidence", d.confidence}};
}

provider::TextDetection detection_from_json(const Json& j) {
  provider::TextDetection d{string_field(j, "phrase"), box_from_json(field(j, "box")),
                            field(j, "confidence").get<double>()};
  require(d.confidence >= 0.0 && d.confidence <= 1.0, ErrorCode::InvalidArgument, "confidence outside [0, 1]");
  return d;
}

Json tag_to_json(const provider::ImageTag& t) { return Json{{"label_text", t.label_text}, {"confidence", t.confidence}}; }

provider::ImageTag tag_from_json(const Json& j) {
  provider::ImageTag t{string_field(j, "label_text"), field(j, "confidence").get<double>()};
  require(t.confidence >= 0.0 && t.confidence <= 1.0, ErrorCode::InvalidArgument, "confidence outside [0, 1]");
  return t;
}

namespace {

constexpr provider::Capability kCapabilities[] = {
    provider::Capability::PromptSegmentation, provider::Capability::AutoSegmentation,
    provider::Capability::TextDetection, provider::Capability::ImageTagging, provider::Capability::Embedding};

}  // namespace

Json descriptor_to_json(const provider::ProviderDescriptor& d) {
  Json caps = Json::array();
  for (const auto c : kCapabilities) {
    if (d.has(c)) caps.push_back(std::string(provider::capability_name(c)));
  }
  return Json{{"name", d.name}, {"capabilities", caps}, {"concurrent_requests", d.concurrent_requests}};
}

provider::ProviderDescriptor descriptor_from_json(const Json& j) {
  provider::ProviderDescriptor d;
  d.name = string_field(j, "name");
  for (const auto& c : field(j, "capabilities")) {
    const auto name = c.get<std::string>();
    for (const auto cap : kCapabilities) {
      if (provider::capability_name(cap) == name) d.capabilities |= static_cast<std::uint32_t>(cap);
    }
  }
  d.concurrent_requests = field(j, "concurrent_requests").get<std::uint32_t>();
  require(d.capabilities != 0, ErrorCode::InvalidArgument, "provider advertises no capability");
  require(d.concurrent_requests >= 1, ErrorCode::InvalidArgument, "concurrent_requests must be at least 1");
  return d;
}

}  // namespace folioseg::wire
