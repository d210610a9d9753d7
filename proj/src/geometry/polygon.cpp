#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

#include "folioseg/error.hpp"
#include "folioseg/geometry.hpp"
#include "runs.hpp"

namespace folioseg::geometry {

namespace {

// Crack directions, clockwise on screen: east, south, west, north.
constexpr std::array<int, 4> kDx{1, 0, -1, 0};
constexpr std::array<int, 4> kDy{0, 1, 0, -1};

struct Crack {
  std::uint64_t from;
  int dir;
  bool used = false;
};

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  if (len2 == 0.0) return std::hypot(p.x - a.x, p.y - a.y);
  const double t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

// Marks the vertices of ring[first..last] (indices modulo n) that survive
// Douglas-Peucker between the two fixed endpoints.
void douglas_peucker(const Ring& ring, std::size_t first, std::size_t last, double tolerance,
                     std::vector<bool>& keep) {
  const auto n = ring.size();
  std::vector<std::pair<std::size_t, std::size_t>> stack{{first, last}};
  while (!stack.empty()) {
    const auto [lo, hi] = stack.back();
    stack.pop_back();
    double best = -1.0;
    std::size_t best_idx = lo;
    for (std::size_t k = lo + 1; k < hi; ++k) {
      const double d = point_segment_distance(ring[k % n], ring[lo % n], ring[hi % n]);
      if (d > best) {
        best = d;
        best_idx = k;
      }
    }
    if (best > tolerance) {
      keep[best_idx % n] = true;
      stack.emplace_back(lo, best_idx);
      stack.emplace_back(best_idx, hi);
    }
  }
}

// Follows unused cracks from `start` until the ring closes. At a vertex with
// two candidates (a diagonal pinch) the sharpest right turn wins, which keeps
// diagonally touching pixels on separate rings as 4-connectivity requires.
Ring trace_ring(std::vector<Crack>& cracks,
                const std::unordered_map<std::uint64_t, std::array<int, 2>>& outgoing,
                std::size_t start, std::uint64_t stride) {
  std::vector<std::pair<std::uint64_t, int>> steps;
  std::size_t current = start;
  while (true) {
    auto& crack = cracks[current];
    crack.used = true;
    steps.emplace_back(crack.from, crack.dir);
    const auto x = static_cast<std::int64_t>(crack.from % stride) + kDx[crack.dir];
    const auto y = static_cast<std::int64_t>(crack.from / stride) + kDy[crack.dir];
    const auto next_vertex = static_cast<std::uint64_t>(y) * stride + static_cast<std::uint64_t>(x);
    const auto it = outgoing.find(next_vertex);
    if (it == outgoing.end()) fail(ErrorCode::Internal, "open crack chain while tracing contour");
    int chosen = -1;
    for (const int turn : {1, 0, 3}) {
      const int want = (crack.dir + turn) % 4;
      for (const int idx : it->second) {
        if (idx >= 0 && !cracks[idx].used && cracks[idx].dir == want) {
          chosen = idx;
          break;
        }
      }
      if (chosen >= 0) break;
    }
    if (chosen < 0) break;
    current = static_cast<std::size_t>(chosen);
  }
  Ring ring;
  const auto n = steps.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int before = steps[(i + n - 1) % n].second;
    if (steps[i].second == before) continue;
    ring.push_back({static_cast<double>(steps[i].first % stride),
                    static_cast<double>(steps[i].first / stride)});
  }
  return ring;
}

}  // namespace

double ring_signed_area(const Ring& ring) {
  double twice = 0.0;
  const auto n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = ring[i];
    const auto& b = ring[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return twice / 2.0;
}

Ring simplify_ring(const Ring& ring, double tolerance) {
  const auto n = ring.size();
  if (tolerance <= 0.0 || n <= 3) return ring;
  std::size_t far = 0;
  double best = -1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const double d = std::hypot(ring[i].x - ring[0].x, ring[i].y - ring[0].y);
    if (d > best) {
      best = d;
      far = i;
    }
  }
  std::vector<bool> keep(n, false);
  keep[0] = true;
  keep[far] = true;
  douglas_peucker(ring, 0, far, tolerance, keep);
  douglas_peucker(ring, far, n, tolerance, keep);
  Ring out;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.push_back(ring[i]);
  }
  if (out.size() < 3 || ring_signed_area(out) == 0.0) return ring;
  return out;
}

std::vector<Polygon> polygonize(const BinaryMask& mask, double tolerance) {
  require(tolerance >= 0.0, ErrorCode::InvalidArgument, "tolerance must be non-negative");
  std::vector<Polygon> polygons;
  if (mask.is_empty()) return polygons;

  const auto dims = mask.dims();
  const auto bitmap = rle_decode(mask);
  const auto components = label_components(bitmap, dims);
  const auto w = dims.width;
  const auto h = dims.height;
  const auto stride = static_cast<std::uint64_t>(w) + 1;

  // Pixels grouped per component, preserving row-major order.
  std::vector<std::vector<std::uint32_t>> members(components.count + 1);
  for (std::uint32_t idx = 0; idx < components.labels.size(); ++idx) {
    if (const auto label = components.labels[idx]; label != 0) members[label].push_back(idx);
  }

  for (std::uint32_t label = 1; label <= components.count; ++label) {
    auto same = [&](std::int32_t x, std::int32_t y) {
      return x >= 0 && y >= 0 && x < w && y < h &&
             components.labels[static_cast<std::size_t>(y) * w + x] == label;
    };
    std::vector<Crack> cracks;
    std::unordered_map<std::uint64_t, std::array<int, 2>> outgoing;
    auto add = [&](std::int64_t vx, std::int64_t vy, int dir) {
      const auto vertex = static_cast<std::uint64_t>(vy) * stride + static_cast<std::uint64_t>(vx);
      auto [it, inserted] = outgoing.try_emplace(vertex, std::array<int, 2>{-1, -1});
      auto& slots = it->second;
      (slots[0] < 0 ? slots[0] : slots[1]) = static_cast<int>(cracks.size());
      cracks.push_back({vertex, dir});
    };
    for (const auto idx : members[label]) {
      const auto x = static_cast<std::int32_t>(idx % w);
      const auto y = static_cast<std::int32_t>(idx / w);
      if (!same(x, y - 1)) add(x, y, 0);
      if (!same(x + 1, y)) add(x + 1, y, 1);
      if (!same(x, y + 1)) add(x + 1, y + 1, 2);
      if (!same(x - 1, y)) add(x, y + 1, 3);
    }

    Polygon polygon;
    bool have_exterior = false;
    for (std::size_t i = 0; i < cracks.size(); ++i) {
      if (cracks[i].used) continue;
      auto ring = trace_ring(cracks, outgoing, i, stride);
      if (ring_signed_area(ring) > 0.0) {
        require(!have_exterior, ErrorCode::Internal, "component traced with two exteriors");
        polygon.exterior = simplify_ring(ring, tolerance);
        have_exterior = true;
      } else {
        polygon.holes.push_back(simplify_ring(ring, tolerance));
      }
    }
    require(have_exterior, ErrorCode::Internal, "component traced without exterior");
    polygons.push_back(std::move(polygon));
  }
  return polygons;
}

namespace {

void collect_edges(const Ring& ring, std::vector<std::array<Point, 2>>& edges) {
  const auto n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = ring[i];
    const auto& b = ring[(i + 1) % n];
    // Lower endpoint first: an edge and its reverse yield bit-identical crossings.
    if (a.y < b.y) edges.push_back({a, b});
    if (b.y < a.y) edges.push_back({b, a});
  }
}

void fill_even_odd(const std::vector<std::array<Point, 2>>& edges, GridDims dims,
                   std::vector<detail::Interval>& intervals) {
  if (edges.empty()) return;
  double y_lo = edges[0][0].y;
  double y_hi = y_lo;
  for (const auto& e : edges) {
    y_lo = std::min({y_lo, e[0].y, e[1].y});
    y_hi = std::max({y_hi, e[0].y, e[1].y});
  }
  const auto row_first = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(y_lo - 0.5)));
  const auto row_last = std::min<std::int64_t>(dims.height - 1, static_cast<std::int64_t>(std::ceil(y_hi)));
  const auto width = static_cast<std::uint64_t>(dims.width);
  std::vector<double> crossings;
  for (auto row = row_first; row <= row_last; ++row) {
    const double yc = static_cast<double>(row) + 0.5;
    crossings.clear();
    for (const auto& [a, b] : edges) {
      if ((a.y <= yc) != (b.y <= yc)) {
        crossings.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(crossings.begin(), crossings.end());
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      // Centers with x_a <= i + 0.5 < x_b.
      const auto first = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(crossings[k] - 0.5)));
      const auto last = std::min<std::int64_t>(dims.width, static_cast<std::int64_t>(std::ceil(crossings[k + 1] - 0.5)));
      if (first < last) {
        intervals.push_back({static_cast<std::uint64_t>(row) * width + static_cast<std::uint64_t>(first),
                             static_cast<std::uint64_t>(row) * width + static_cast<std::uint64_t>(last)});
      }
    }
  }
}

}  // namespace

BinaryMask rasterize(const Polygon& polygon, GridDims dims) {
  validate_dims(dims);
  require(polygon.exterior.size() >= 3, ErrorCode::InvalidArgument, "exterior ring needs at least 3 vertices");
  for (const auto& hole : polygon.holes) {
    require(hole.size() >= 3, ErrorCode::InvalidArgument, "hole ring needs at least 3 vertices");
  }
  std::vector<std::array<Point, 2>> edges;
  collect_edges(polygon.exterior, edges);
  for (const auto& hole : polygon.holes) collect_edges(hole, edges);
  std::vector<detail::Interval> intervals;
  fill_even_odd(edges, dims, intervals);
  // Rows are visited in order and spans within a row are disjoint and sorted.
  return detail::from_intervals(dims, intervals);
}

BinaryMask rasterize(std::span<const Polygon> polygons, GridDims dims) {
  auto out = BinaryMask::empty(dims);
  for (const auto& polygon : polygons) out = mask_union(out, rasterize(polygon, dims));
  return out;
}

}  // namespace folioseg::geometry
