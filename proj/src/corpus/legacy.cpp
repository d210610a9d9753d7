#include <boost/tokenizer.hpp>

#include <charconv>

#include "folioseg/corpus.hpp"
#include "folioseg/error.hpp"
#include "folioseg/image.hpp"
#include "folioseg/text.hpp"

namespace folioseg::corpus {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::optional<std::vector<std::string>> split_row(const std::string& line) {
  using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  // Backslash is not an escape in ordinary CSV; use a byte that never occurs.
  boost::escaped_list_separator<char> sep('\0', ',', '"');
  try {
    std::vector<std::string> out;
    for (const auto& field : Tokenizer(line, sep)) out.push_back(trim(field));
    return out;
  } catch (const boost::escaped_list_error&) {
    return std::nullopt;
  }
}

bool parse_int(const std::string& s, std::int32_t& out) {
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

const std::vector<std::string> kBoxColumns = {"x_min", "y_min", "x_max", "y_max"};

}  // namespace

std::vector<LegacyRecord> parse_legacy_csv(std::string_view text, std::vector<RecordIssue>& issues) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<LegacyRecord> records;
  std::optional<std::vector<std::string>> header;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    auto fields = split_row(line);
    if (!fields) {
      issues.push_back({line_no, "unbalanced quotes"});
      continue;
    }
    if (!header) {
      auto& h = *fields;
      for (auto& name : h) name = fold_text(name);
      const bool base = h.size() >= 2 && h[0] == "folio_key" && h[1] == "label";
      const bool with_box = h.size() == 6 && std::equal(kBoxColumns.begin(), kBoxColumns.end(), h.begin() + 2);
      if (!base || (h.size() != 2 && !with_box)) {
        issues.push_back({line_no, "header must be folio_key,label[,x_min,y_min,x_max,y_max]"});
        return records;
      }
      header = h;
      continue;
    }
    if (fields->size() != header->size()) {
      issues.push_back({line_no, "expected " + std::to_string(header->size()) + " fields, found " +
                                     std::to_string(fields->size())});
      continue;
    }
    LegacyRecord r{line_no, (*fields)[0], (*fields)[1], std::nullopt};
    if (header->size() == 6) {
      const bool blank = (*fields)[2].empty() && (*fields)[3].empty() && (*fields)[4].empty() && (*fields)[5].empty();
      if (!blank) {
        BBox b;
        if (!parse_int((*fields)[2], b.x_min) || !parse_int((*fields)[3], b.y_min) ||
            !parse_int((*fields)[4], b.x_max) || !parse_int((*fields)[5], b.y_max)) {
          issues.push_back({line_no, "box coordinates must be integers"});
          continue;
        }
        r.box = b;
      }
    }
    records.push_back(std::move(r));
  }
  if (!header) issues.push_back({0, "missing header line"});
  return records;
}

std::vector<LegacyRecord> parse_legacy_json(std::string_view text, std::vector<RecordIssue>& issues) {
  const auto doc = wire::parse(text);
  const Json* list = &doc;
  if (doc.is_object() && doc.contains("records")) list = &doc["records"];
  require(list->is_array(), ErrorCode::Parse, "legacy JSON must be an array of records");
  std::vector<LegacyRecord> records;
  std::size_t index = 0;
  for (const auto& item : *list) {
    ++index;
    try {
      LegacyRecord r{index, wire::string_field(item, "folio_key"), wire::string_field(item, "label"), std::nullopt};
      if (const auto it = item.find("box"); it != item.end() && !it->is_null()) {
        if (it->is_array()) {
          require(it->size() == 4, ErrorCode::Parse, "box array needs four integers");
          r.box = BBox{(*it)[0].get<std::int32_t>(), (*it)[1].get<std::int32_t>(), (*it)[2].get<std::int32_t>(),
                       (*it)[3].get<std::int32_t>()};
        } else {
          r.box = wire::box_from_json(*it);
        }
      }
      records.push_back(std::move(r));
    } catch (const Json::exception& e) {
      issues.push_back({index, std::string("malformed record: ") + e.what()});
    } catch (const Error& e) {
      issues.push_back({index, e.what()});
    }
  }
  return records;
}

std::vector<LegacyRecord> read_legacy_file(const std::filesystem::path& path, std::vector<RecordIssue>& issues) {
  const auto bytes = read_file_bytes(path);
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".json" ? parse_legacy_json(text, issues) : parse_legacy_csv(text, issues);
}

namespace {

ImportReport import_records(Project& project, const std::vector<LegacyRecord>& records, const std::string& actor,
                            bool boxes) {
  ImportReport report;
  std::vector<NewAnnotation> specs;
  for (const auto& r : records) {
    const auto folio = project.folios().find(r.folio_key);
    if (folio == project.folios().end()) {
      report.rejected.push_back({r.line, "unknown folio '" + r.folio_key + "'"});
      continue;
    }
    if (fold_text(r.label_text).empty()) {
      report.rejected.push_back({r.line, "empty label"});
      continue;
    }
    NewAnnotation spec{r.folio_key, std::nullopt, std::nullopt, std::nullopt,
                       boxes ? Provenance::LegacyBox : Provenance::LegacyImageLevel};
    if (boxes) {
      if (!r.box) {
        report.rejected.push_back({r.line, "record has no box"});
        continue;
      }
      const auto clipped = r.box->x_min < r.box->x_max && r.box->y_min < r.box->y_max
                               ? geometry::clip_box(*r.box, folio->second.dims)
                               : std::nullopt;
      if (!clipped) {
        report.rejected.push_back({r.line, "box is empty or entirely outside the image"});
        continue;
      }
      if (*clipped != *r.box) report.warnings.push_back({r.line, "box clipped to the image bounds"});
      spec.legacy_box = clipped;
    } else if (r.box) {
      report.warnings.push_back({r.line, "box ignored for an image-level tag"});
    }
    spec.label = project.resolve_label(r.label_text, ResolveMode::CreateOrMatch, actor);
    specs.push_back(std::move(spec));
  }
  report.created = project.add_annotations(std::move(specs), actor, boxes ? "legacy_boxes_imported" : "legacy_tags_imported");
  return report;
}

}  // namespace

ImportReport import_legacy_image_tags(Project& project, const std::vector<LegacyRecord>& records,
                                      const std::string& actor) {
  return import_records(project, records, actor, false);
}

ImportReport import_legacy_boxes(Project& project, const std::vector<LegacyRecord>& records,
                                 const std::string& actor) {
  return import_records(project, records, actor, true);
}

}  // namespace folioseg::corpus
