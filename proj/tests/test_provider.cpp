#include <doctest.h>

#include <cstdio>

#include <jpeglib.h>

#include <random>
#include <thread>

#include "folioseg/error.hpp"
#include "folioseg/http_provider.hpp"
#include "folioseg/mock_provider.hpp"
#include "folioseg/wire.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace folioseg;
using namespace folioseg::provider;
using geometry::BBox;
using geometry::Bitmap;

namespace {

ImageInput fixture_input(MockProvider& mock, const testsupport::Fixture& f) {
  auto input = make_input(f.image, f.name);
  mock.add_truth(input.key, f.truth);
  return input;
}

PromptSet positive(double x, double y) { return PromptSet{{{x, y, Polarity::Positive}}, std::nullopt}; }

Bitmap decoded_or_empty(const std::vector<geometry::Proposal>& proposals, geometry::GridDims dims) {
  if (proposals.empty()) return Bitmap(dims.pixel_count(), 0);
  return geometry::rle_decode(proposals.front().mask);
}

}  // namespace

TEST_CASE("image codecs and hashing") {
  RgbImage img(5, 3, 0x102030);
  img.set(4, 2, 0xFFEEDD);
  const auto png = encode_png(img);
  CHECK(decode_image(png) == img);
  CHECK_THROWS_AS(decode_image(std::vector<std::uint8_t>{1, 2, 3, 4}), Error);

  const std::string abc = "abc";
  CHECK(sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size())) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  for (std::size_t n = 0; n < 8; ++n) {
    std::vector<std::uint8_t> bytes(n);
    for (std::size_t i = 0; i < n; ++i) bytes[i] = static_cast<std::uint8_t>(i * 37 + 1);
    CHECK(base64_decode(base64_encode(bytes)) == bytes);
  }
  CHECK(pixel_key(img) != pixel_key(RgbImage(5, 3, 0x102030)));
}

TEST_CASE("JPEG decoding") {
  // Encode a flat-colored JPEG with libjpeg directly.
  jpeg_compress_struct info{};
  jpeg_error_mgr err{};
  info.err = jpeg_std_error(&err);
  jpeg_create_compress(&info);
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  jpeg_mem_dest(&info, &buffer, &size);
  info.image_width = 16;
  info.image_height = 8;
  info.input_components = 3;
  info.in_color_space = JCS_RGB;
  jpeg_set_defaults(&info);
  jpeg_set_quality(&info, 100, TRUE);
  jpeg_start_compress(&info, TRUE);
  std::vector<unsigned char> row(16 * 3, 128);
  while (info.next_scanline < info.image_height) {
    JSAMPROW r = row.data();
    jpeg_write_scanlines(&info, &r, 1);
  }
  jpeg_finish_compress(&info);
  jpeg_destroy_compress(&info);
  const auto img = decode_image(std::span<const std::uint8_t>(buffer, size));
  std::free(buffer);
  CHECK(img.width == 16);
  CHECK(img.height == 8);
  CHECK(std::abs(static_cast<int>(img.pixels[0]) - 128) <= 2);
}

TEST_CASE("background colour and prompt validation") {
  const auto f = testsupport::two_disks();
  CHECK(background_color(f.image) == testsupport::kParchment);
  CHECK(background_color(f.image) == testsupport::oracle_background(f.image));
  RgbImage tie(2, 1, 0);
  tie.set(0, 0, 0x00000A);
  tie.set(1, 0, 0x000005);
  CHECK(background_color(tie) == 0x000005);

  const geometry::GridDims d{10, 10};
  CHECK_NOTHROW(validate_prompts(positive(9.5, 0.0), d));
  CHECK_THROWS_AS(validate_prompts(positive(10.0, 0.0), d), Error);
  CHECK_THROWS_AS(validate_prompts(PromptSet{{{1, 1, Polarity::Negative}}, std::nullopt}, d), Error);
  CHECK_THROWS_AS(validate_prompts(PromptSet{{}, std::nullopt}, d), Error);
  CHECK_NOTHROW(validate_prompts(PromptSet{{}, BBox{0, 0, 10, 10}}, d));
  CHECK_THROWS_AS(validate_prompts(PromptSet{{}, BBox{0, 0, 11, 10}}, d), Error);
}

TEST_CASE("mock prompted segmentation on the two-disk fixture") {
  MockProvider mock;
  const auto f = testsupport::two_disks();
  const auto input = fixture_input(mock, f);
  const auto bg = testsupport::oracle_background(f.image);
  const auto disk_a = testsupport::flood_fill(f.image, bg, 18, 32);
  const auto disk_b = testsupport::flood_fill(f.image, bg, 46, 32);

  auto res = mock.segment_with_prompts(input, positive(18.2, 32.7));
  REQUIRE(res.size() == 1);
  CHECK(res[0].quality == 1.0);
  CHECK(geometry::rle_decode(res[0].mask) == disk_a);

  res = mock.segment_with_prompts(input, PromptSet{{{18, 32, Polarity::Positive}, {46, 32, Polarity::Positive}}, {}});
  Bitmap both(disk_a.size());
  for (std::size_t i = 0; i < both.size(); ++i) both[i] = disk_a[i] | disk_b[i];
  REQUIRE(res.size() == 1);
  CHECK(geometry::rle_decode(res[0].mask) == both);

  CHECK(mock.segment_with_prompts(input, positive(1, 1)).empty());

  // Negative point on B removes it from the union.
  res = mock.segment_with_prompts(
      input, PromptSet{{{18, 32, Polarity::Positive}, {46, 32, Polarity::Positive}, {47, 33, Polarity::Negative}}, {}});
  CHECK(geometry::rle_decode(res.at(0).mask) == disk_a);

  // Box around A only.
  res = mock.segment_with_prompts(input, PromptSet{{}, BBox{6, 20, 31, 45}});
  CHECK(geometry::rle_decode(res.at(0).mask) == disk_a);
  // Box with a positive point on B: B is not inside, nothing participates.
  CHECK(mock.segment_with_prompts(input, PromptSet{{{46, 32, Polarity::Positive}}, BBox{6, 20, 31, 45}}).empty());
  // Box over parchment only.
  CHECK(mock.segment_with_prompts(input, PromptSet{{}, BBox{0, 0, 5, 5}}).empty());
  CHECK_THROWS_AS(mock.segment_with_prompts(input, PromptSet{}), Error);
}

TEST_CASE("mock prompted segmentation matches flood fill for every foreground pixel") {
  MockProvider mock;
  for (const auto& f : {testsupport::two_disks(), testsupport::three_components(), testsupport::areas_400_50()}) {
    const auto input = fixture_input(mock, f);
    const auto bg = testsupport::oracle_background(f.image);
    for (int y = 0; y < f.image.height; ++y)
      for (int x = 0; x < f.image.width; ++x) {
        if (f.image.color_at(x, y) == bg) continue;
        const auto got = decoded_or_empty(mock.segment_with_prompts(input, positive(x + 0.5, y + 0.5)), f.image.dims());
        REQUIRE(got == testsupport::flood_fill(f.image, bg, x, y));
      }
  }
}

TEST_CASE("negative points never enlarge the mask") {
  MockProvider mock;
  const auto f = testsupport::folio_1r();
  const auto input = fixture_input(mock, f);
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> ux(0.0, f.image.width - 1e-9);
  std::uniform_real_distribution<double> uy(0.0, f.image.height - 1e-9);
  for (int trial = 0; trial < 200; ++trial) {
    PromptSet prompts;
    for (int i = 0; i < 1 + trial % 4; ++i) prompts.points.push_back({ux(rng), uy(rng), Polarity::Positive});
    const auto before = decoded_or_empty(mock.segment_with_prompts(input, prompts), f.image.dims());
    prompts.points.push_back({ux(rng), uy(rng), Polarity::Negative});
    const auto after = decoded_or_empty(mock.segment_with_prompts(input, prompts), f.image.dims());
    for (std::size_t i = 0; i < before.size(); ++i) REQUIRE(after[i] <= before[i]);
    REQUIRE(after == testsupport::oracle_prompt_result(f.image, prompts));
  }
}

TEST_CASE("mock segment_everything") {
  MockProvider mock;
  const auto f = testsupport::three_components();
  auto props = mock.segment_everything(fixture_input(mock, f));
  CHECK(props.size() == testsupport::oracle_components(f.image).size());
  CHECK(props.size() == 3);
  for (std::size_t i = 0; i < props.size(); ++i) {
    CHECK(props[i].quality >= 0.0);
    CHECK(props[i].quality <= 1.0);
    CHECK(props[i].source == geometry::ProposalSource::Auto);
    CHECK(props[i].quality == geometry::compactness(props[i].mask));
    if (i > 0) CHECK(props[i - 1].quality >= props[i].quality);
    for (std::size_t j = i + 1; j < props.size(); ++j) CHECK(geometry::intersection_area(props[i].mask, props[j].mask) == 0);
  }
  CHECK(mock.segment_everything(fixture_input(mock, testsupport::blank())).empty());

  // A 20x20 square: 4*pi*400/80^2.
  const auto sq = mock.segment_everything(fixture_input(mock, testsupport::areas_400_50()));
  REQUIRE(sq.size() == 2);
  CHECK(sq[0].quality == doctest::Approx(4.0 * 3.14159265358979 * 400.0 / (80.0 * 80.0)));
}

TEST_CASE("mock detection and tagging read the sidecar") {
  MockProvider mock;
  const auto f = testsupport::two_disks();
  const auto input = fixture_input(mock, f);
  const std::vector<std::string> dragon{"dragon"};
  auto d = mock.detect_by_text(input, dragon);
  REQUIRE(d.size() == 1);
  CHECK(d[0].box == BBox{8, 22, 29, 43});
  CHECK(d[0].confidence == 1.0);
  const std::vector<std::string> absent{"licorne"};
  CHECK(mock.detect_by_text(input, absent).empty());
  const std::vector<std::string> both{"Moine", "dragon"};
  d = mock.detect_by_text(input, both);
  REQUIRE(d.size() == 2);
  CHECK(d[0].phrase == "Moine");  // equal confidence: phrase order
  CHECK(d[1].phrase == "dragon");

  const auto tags = mock.tag_image(input);
  REQUIRE(tags.size() == 2);
  CHECK(tags[0].label_text == "dragon");
  CHECK(tags[1].label_text == "moine");
  CHECK(mock.tag_image(fixture_input(mock, testsupport::blank())).empty());
}

TEST_CASE("mock reads sidecars next to image files") {
  const auto dir = testsupport::temp_dir("sidecar");
  const auto path = testsupport::write_fixture(testsupport::two_disks(), dir);
  MockProvider mock;
  const auto input = make_input(load_image(path), path.string());
  const std::vector<std::string> phrase{"moine"};
  CHECK(mock.detect_by_text(input, phrase).size() == 1);

  MockProvider loaded;
  CHECK(loaded.load_fixture_dir(dir) == 1);
  CHECK(loaded.tag_image(make_input(load_image(path))).size() == 2);
}

TEST_CASE("reference embedding") {
  RgbImage img(40, 20, testsupport::kParchment);
  testsupport::fill_rect(img, BBox{2, 2, 8, 8}, testsupport::kRed);
  testsupport::fill_rect(img, BBox{20, 10, 26, 16}, testsupport::kRed);
  const auto m1 = geometry::box_mask(BBox{2, 2, 8, 8}, img.dims());
  const auto m2 = geometry::box_mask(BBox{20, 10, 26, 16}, img.dims());
  const auto e1 = reference_embedding(img, m1);
  const auto e2 = reference_embedding(img, m2);
  CHECK(e1.vector.size() == kReferenceEmbeddingDim);
  CHECK(e1 == e2);
  CHECK(cosine(e1, e2) == doctest::Approx(1.0));
  CHECK_THROWS_AS(reference_embedding(img, geometry::BinaryMask::empty(img.dims())), Error);

  // Red vs blue disk of the same shape.
  RgbImage disks(64, 32, testsupport::kParchment);
  testsupport::fill_disk(disks, 15, 15, 8, testsupport::kRed);
  testsupport::fill_disk(disks, 47, 15, 8, testsupport::kBlue);
  const auto bg = testsupport::oracle_background(disks);
  const auto red_mask = geometry::rle_encode(testsupport::flood_fill(disks, bg, 15, 15), disks.dims());
  const auto blue_mask = geometry::rle_encode(testsupport::flood_fill(disks, bg, 47, 15), disks.dims());
  const auto er = reference_embedding(disks, red_mask);
  const auto eb = reference_embedding(disks, blue_mask);
  // Hand-computed raw histograms: red 0xC0201A -> bins R6 G1 B0,
  // blue 0x1F3FA0 -> bins R0 G1 B5; each with weight 1.
  std::vector<double> red_hist(24, 0.0);
  std::vector<double> blue_hist(24, 0.0);
  red_hist[0 * 8 + 6] = red_hist[1 * 8 + 1] = red_hist[2 * 8 + 0] = 1.0;
  blue_hist[0 * 8 + 0] = blue_hist[1 * 8 + 1] = blue_hist[2 * 8 + 5] = 1.0;
  double norm = 0.0;
  for (const double v : er.vector) norm += v * v;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
  const double scale = er.vector[6];  // same normalization for both: equal shape part
  for (int i = 0; i < 24; ++i) {
    CHECK(er.vector[i] == doctest::Approx(red_hist[i] * scale));
    CHECK(eb.vector[i] == doctest::Approx(blue_hist[i] * scale));
  }
  for (int i = 24; i < 28; ++i) CHECK(er.vector[i] == doctest::Approx(eb.vector[i]));
  CHECK(er.vector[8] == 0.0);
  CHECK(eb.vector[6] == 0.0);
}

TEST_CASE("wire forms round trip") {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int i = 0; i < 20; ++i) {
    PromptSet p;
    p.points.push_back({u(rng), u(rng), i % 2 ? Polarity::Positive : Polarity::Negative});
    if (i % 3 == 0) p.box = BBox{1, 2, 3 + i, 4 + i};
    CHECK(wire::prompts_from_json(wire::prompts_to_json(p)) == p);
  }
  const geometry::Proposal prop{geometry::box_mask(BBox{1, 1, 3, 3}, {4, 4}), 0.25, geometry::ProposalSource::TextGrounded};
  CHECK(wire::proposal_from_json(wire::proposal_to_json(prop)) == prop);
  const ProviderDescriptor desc{"x", kAllCapabilities, 3};
  CHECK(wire::descriptor_from_json(wire::descriptor_to_json(desc)) == desc);
  CHECK(wire::mask_to_json(prop.mask).dump() == R"({"dims":{"width":4,"height":4},"runs":[5,2,2,2,5]})");
}

namespace {

/// Prompt segmentation only, optionally slow.
class LimitedProvider final : public Provider {
 public:
  explicit LimitedProvider(std::chrono::milliseconds delay = {}) : delay_(delay) {}
  ProviderDescriptor describe() override {
    return {"limited", static_cast<std::uint32_t>(Capability::PromptSegmentation), 2};
  }
  std::vector<geometry::Proposal> segment_with_prompts(const ImageInput& image, const PromptSet& prompts) override {
    std::this_thread::sleep_for(delay_);
    return inner_.segment_with_prompts(image, prompts);
  }
  std::vector<geometry::Proposal> segment_everything(const ImageInput&) override {
    ++forbidden_calls;
    return {};
  }
  std::vector<TextDetection> detect_by_text(const ImageInput&, std::span<const std::string>) override {
    ++forbidden_calls;
    return {};
  }
  std::vector<ImageTag> tag_image(const ImageInput&) override {
    ++forbidden_calls;
    return {};
  }
  Embedding embed_segment(const ImageInput&, const geometry::BinaryMask&) override {
    ++forbidden_calls;
    return {};
  }
  std::atomic<int> forbidden_calls{0};

 private:
  std::chrono::milliseconds delay_;
  MockProvider inner_;
};

}  // namespace

TEST_CASE("HTTP provider against the sidecar server") {
  auto mock = std::make_shared<MockProvider>();
  const auto f = testsupport::folio_1r();
  const auto input = fixture_input(*mock, f);
  ProviderServer server(mock);
  server.register_image(input);
  const int port = server.start("127.0.0.1", 0);
  REQUIRE(port > 0);

  for (const bool ids : {false, true}) {
    HttpProvider client({"http://127.0.0.1:" + std::to_string(port), std::chrono::seconds(10), ids});
    CHECK(client.describe() == mock->describe());
    const auto prompts = positive(40, 40);
    CHECK(client.segment_with_prompts(input, prompts) == mock->segment_with_prompts(input, prompts));
    CHECK(client.segment_everything(input) == mock->segment_everything(input));
    const std::vector<std::string> phrases{"mitre", "arbre", "nothing"};
    CHECK(client.detect_by_text(input, phrases) == mock->detect_by_text(input, phrases));
    CHECK(client.tag_image(input) == mock->tag_image(input));
    const auto mask = mock->segment_with_prompts(input, prompts).at(0).mask;
    const auto remote = client.embed_segment(input, mask);
    const auto local = mock->embed_segment(input, mask);
    REQUIRE(remote.vector.size() == local.vector.size());
    for (std::size_t i = 0; i < local.vector.size(); ++i) CHECK(remote.vector[i] == doctest::Approx(local.vector[i]).epsilon(1e-12));
  }

  // Provider-side validation errors come back with their code.
  HttpProvider client({"http://127.0.0.1:" + std::to_string(port), std::chrono::seconds(10), true});
  auto unknown = input;
  unknown.key = "deadbeef";
  try {
    client.segment_everything(unknown);
    FAIL("expected NotFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFound);
  }
  server.stop();
}

TEST_CASE("HTTP provider failure modes") {
  const auto img = make_input(testsupport::two_disks().image);
  {
    HttpProvider dead({"http://127.0.0.1:1", std::chrono::milliseconds(500), false});
    try {
      dead.describe();
      FAIL("expected ProviderUnavailable");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ProviderUnavailable);
    }
  }
  auto limited = std::make_shared<LimitedProvider>(std::chrono::milliseconds(1500));
  ProviderServer server(limited);
  const int port = server.start("127.0.0.1", 0);
  HttpProvider client({"http://127.0.0.1:" + std::to_string(port), std::chrono::milliseconds(300), false});
  try {
    client.segment_everything(img);
    FAIL("expected CapabilityMissing");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CapabilityMissing);
  }
  CHECK(limited->forbidden_calls == 0);
  try {
    client.segment_with_prompts(img, positive(18, 32));
    FAIL("expected ProviderTimeout");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ProviderTimeout);
  }
  server.stop();
}
