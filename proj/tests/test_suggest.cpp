#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "folioseg/error.hpp"
#include "folioseg/mock_provider.hpp"
#include "folioseg/suggest.hpp"
#include "support/fixtures.hpp"
#include "support/projects.hpp"

using namespace folioseg;
using namespace folioseg::suggest;
using corpus::Project;
using corpus::Provenance;

namespace {

IndexEntry entry(const std::string& id, std::vector<double> v, std::optional<std::string> label = std::nullopt) {
  return {id, provider::normalized(std::move(v)), std::move(label), geometry::BinaryMask::empty({1, 1})};
}

// Independent long-double cosine, used as the ranking oracle.
long double slow_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return dot / std::sqrt(na * nb);
}

/// Folio with four colored squares; the two red ones embed identically.
struct ColorScene {
  Project project{"colors", corpus::counting_clock()};
  provider::MockProvider mock;
  provider::ImageInput input;
  std::vector<std::string> ids;  // red (labeled), red, blue, dark red

  ColorScene() {
    testsupport::add_standard_labels(project);
    RgbImage img(64, 64, 0xFAFAFA);
    auto paint = [&](int x0, int y0, std::uint32_t c) {
      for (int y = y0; y < y0 + 10; ++y)
        for (int x = x0; x < x0 + 10; ++x) img.set(x, y, c);
    };
    paint(2, 2, 0xC0201A);
    paint(30, 2, 0xC0201A);
    paint(2, 30, 0x1F3FA0);
    paint(30, 30, 0xA0201A);
    input = provider::make_input(std::move(img), "colors");
    project.add_folio(corpus::Folio{"f", "", "", "f.png", {64, 64}, input.key}, "seed");
    const int corners[4][2] = {{2, 2}, {30, 2}, {2, 30}, {30, 30}};
    for (int i = 0; i < 4; ++i) {
      const auto m = geometry::box_mask({corners[i][0], corners[i][1], corners[i][0] + 10, corners[i][1] + 10}, {64, 64});
      std::optional<std::string> label;
      if (i == 0) label = "codex";
      ids.push_back(project.add_annotation({"f", m, std::nullopt, label, Provenance::Prompted}, "u").id);
    }
  }
  Embedder embedder() {
    return provider_embedder(mock, [this](const std::string&) { return input; });
  }
};

}  // namespace

TEST_CASE("sync indexes masked non-rejected annotations and skips legacy records") {
  ColorScene s;
  s.project.add_annotation({"f", std::nullopt, std::nullopt, std::string("codex"), Provenance::LegacyImageLevel}, "imp");
  s.project.add_annotation({"f", std::nullopt, geometry::BBox{1, 1, 5, 5}, std::string("codex"), Provenance::LegacyBox},
                           "imp");
  const auto rejected =
      s.project.add_annotation({"f", geometry::box_mask({50, 50, 60, 60}, {64, 64}), std::nullopt, std::nullopt,
                                Provenance::Auto},
                               "bot").id;
  s.project.set_status(rejected, corpus::Status::Rejected, "rv");

  SyncReport report;
  auto index = build_index(s.project, s.embedder(), &report);
  CHECK(index.size() == 4);
  CHECK(report.added == 4);
  CHECK(report.failures.empty());
  CHECK(index.find(rejected) == nullptr);
  CHECK(index.find(s.ids[0])->labeled());
  CHECK_FALSE(index.find(s.ids[1])->labeled());

  // Identical crops give similarity 1; the blue square is far away.
  const auto nn = index.knn_unlabeled(s.ids[0], 10);
  REQUIRE(nn.size() == 3);
  CHECK(nn[0].id == s.ids[1]);
  CHECK(nn[0].similarity == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(nn[1].id == s.ids[3]);
  CHECK(nn[2].id == s.ids[2]);
  CHECK(nn[2].similarity < nn[1].similarity);
}

TEST_CASE("sync re-embeds only edited masks and drops deleted ones") {
  ColorScene s;
  auto embed = s.embedder();
  int calls = 0;
  const Embedder counting = [&](const corpus::Annotation& a) {
    ++calls;
    return embed(a);
  };
  SegmentIndex index;
  index.sync(s.project, counting);
  CHECK(calls == 4);

  auto report = index.sync(s.project, counting);
  CHECK(calls == 4);
  CHECK(report.added + report.updated + report.removed == 0);

  // Move the second red square's mask onto the blue one: its embedding must follow.
  s.project.edit_geometry(s.ids[1], geometry::box_mask({2, 30, 12, 40}, {64, 64}), "ed");
  s.project.delete_annotation(s.ids[3], "ed");
  report = index.sync(s.project, counting);
  CHECK(calls == 5);
  CHECK(report.updated == 1);
  CHECK(report.removed == 1);
  CHECK(index.find(s.ids[1])->embedding == index.find(s.ids[2])->embedding);
  CHECK(index.find(s.ids[3]) == nullptr);
}

TEST_CASE("embedding failures are reported and skipped") {
  ColorScene s;
  auto embed = s.embedder();
  const Embedder flaky = [&](const corpus::Annotation& a) {
    if (a.id == s.ids[2]) fail(ErrorCode::ProviderError, "boom");
    return embed(a);
  };
  SyncReport report;
  const auto index = build_index(s.project, flaky, &report);
  CHECK(index.size() == 3);
  REQUIRE(report.failures.size() == 1);
  CHECK(report.failures[0].first == s.ids[2]);

  const Embedder unnormalized = [](const corpus::Annotation&) { return provider::Embedding{{1.0, 1.0}}; };
  build_index(s.project, unnormalized, &report);
  CHECK(report.failures.size() == 4);
}

TEST_CASE("knn argument checks and small populations") {
  SegmentIndex index;
  index.upsert(entry("a", {1, 0}, "x"));
  index.upsert(entry("b", {1, 1}));
  CHECK_THROWS_AS(index.knn_unlabeled("a", 0), Error);
  try {
    index.knn_unlabeled("zz", 3);
    FAIL("expected NotFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotFound);
  }
  const auto nn = index.knn_unlabeled("a", 5);
  REQUIRE(nn.size() == 1);
  CHECK(nn[0].id == "b");
  CHECK(nn[0].similarity == doctest::Approx(std::sqrt(0.5)));
  CHECK(index.knn_unlabeled("b", 5).empty());  // the query itself never appears

  // Ties break by id.
  index.upsert(entry("d", {0, 1}));
  index.upsert(entry("c", {0, 1}));
  const auto tied = index.knn_unlabeled("b", 3);
  REQUIRE(tied.size() == 2);
  CHECK(tied[0].id == "c");
  CHECK(tied[1].id == "d");
}

TEST_CASE("knn matches a brute-force ranking on random embeddings") {
  std::mt19937 rng(28);
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution labeled(0.3);
  SegmentIndex index;
  std::vector<std::pair<std::string, std::vector<double>>> raw;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v(provider::kReferenceEmbeddingDim);
    for (auto& x : v) x = g(rng);
    char id[16];
    std::snprintf(id, sizeof id, "a%06d", i);
    const bool lab = labeled(rng);
    index.upsert(entry(id, v, lab ? std::optional<std::string>("x") : std::nullopt));
    raw.emplace_back(lab ? std::string() : std::string(id), v);
  }
  std::uniform_int_distribution<int> pick(0, 999);
  for (int q = 0; q < 50; ++q) {
    const int qi = pick(rng);
    char qid[16];
    std::snprintf(qid, sizeof qid, "a%06d", qi);
    std::vector<std::pair<long double, std::string>> oracle;
    for (const auto& [id, v] : raw)
      if (!id.empty() && id != qid) oracle.emplace_back(-slow_cosine(raw[qi].second, v), id);
    std::sort(oracle.begin(), oracle.end());
    const std::size_t k = 1 + static_cast<std::size_t>(q % 20);
    const auto nn = index.knn_unlabeled(qid, k);
    REQUIRE(nn.size() == std::min(k, oracle.size()));
    for (std::size_t i = 0; i < nn.size(); ++i) {
      CHECK(nn[i].id == oracle[i].second);
      CHECK(std::abs(nn[i].similarity + static_cast<double>(oracle[i].first)) <= 1e-9);
    }
  }
}

TEST_CASE("propose_batch threshold and seed rules") {
  SegmentIndex index;
  index.upsert(entry("s1", {1, 0, 0}, "codex"));
  index.upsert(entry("s2", {0, 1, 0}, "codex"));
  index.upsert(entry("s3", {0, 0, 1}, "moine"));
  index.upsert(entry("t1", {0.1, 1, 0}));   // closest to the second seed
  index.upsert(entry("t2", {1, 0.2, 0}));   // closest to the first
  index.upsert(entry("t3", {1, 1, 0}));     // equidistant: cites the lower seed id
  index.upsert(entry("t4", {-1, -1, 0}));

  for (const double bad : {1.01, -1.5, static_cast<double>(NAN)}) CHECK_THROWS_AS(index.propose_batch({"s1"}, bad), Error);
  CHECK_THROWS_AS(index.propose_batch({}, 0.5), Error);
  CHECK_THROWS_AS(index.propose_batch({"t1"}, 0.5), Error);
  CHECK_THROWS_AS(index.propose_batch({"s1", "s3"}, 0.5), Error);
  CHECK_THROWS_AS(index.propose_batch({"nope"}, 0.5), Error);

  const auto out = index.propose_batch({"s2", "s1"}, 0.7);
  REQUIRE(out.size() == 3);
  CHECK(out[0].target_id == "t1");
  CHECK(out[0].seed_id == "s2");
  CHECK(out[1].target_id == "t2");
  CHECK(out[1].seed_id == "s1");
  CHECK(out[2].target_id == "t3");
  CHECK(out[2].seed_id == "s1");
  for (const auto& sug : out) {
    CHECK(sug.label == "codex");
    CHECK(sug.similarity >= 0.7);
    CHECK(sug.state == corpus::SuggestionState::Pending);
  }
  CHECK(index.propose_batch({"s1", "s2"}, 1.0).empty());
  CHECK(index.propose_batch({"s1", "s2"}, -1.0).size() == 4);
}

TEST_CASE("raising the threshold only removes suggestions") {
  std::mt19937 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  SegmentIndex index;
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(8);
    for (auto& x : v) x = g(rng);
    index.upsert(entry("e" + std::to_string(1000 + i), v, i < 5 ? std::optional<std::string>("codex") : std::nullopt));
  }
  const std::vector<std::string> seeds{"e1000", "e1001", "e1002", "e1003", "e1004"};
  std::vector<std::string> previous;
  for (double t = -1.0; t <= 1.0; t += 0.05) {
    std::vector<std::string> now;
    for (const auto& s : index.propose_batch(seeds, t)) now.push_back(s.target_id);
    std::sort(now.begin(), now.end());
    if (t > -1.0) CHECK(std::includes(previous.begin(), previous.end(), now.begin(), now.end()));
    previous = std::move(now);
  }
}

TEST_CASE("accepting a suggestion flips the target to labeled in the index") {
  ColorScene s;
  auto embed = s.embedder();
  auto index = build_index(s.project, embed);
  const auto sugs = index.propose_batch({s.ids[0]}, 0.9);
  REQUIRE_FALSE(sugs.empty());
  CHECK(sugs[0].target_id == s.ids[1]);
  const auto ids = s.project.add_suggestions(sugs, "suggester");
  s.project.resolve_suggestion(ids[0], true, "rv");
  CHECK(s.project.annotation(s.ids[1]).label == std::optional<std::string>("codex"));
  index.sync(s.project, embed);
  CHECK(index.find(s.ids[1])->labeled());
  for (const auto& n : index.knn_unlabeled(s.ids[0], 10)) CHECK(n.id != s.ids[1]);
  CHECK(Project::replay("colors", s.project.events()).same_state(s.project));
}
