#include <eitias/mesh.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <numeric>
#include <utility>

namespace eitias {

namespace {

constexpr double kTwoPi = 2.0 * kPi;

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a;
}

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

std::pair<int, int> edge_key(int a, int b) { return a < b ? std::make_pair(a, b) : std::make_pair(b, a); }

using EdgeMap = std::map<std::pair<int, int>, std::vector<int>>;

EdgeMap collect_edges(const std::vector<std::array<int, 3>>& triangles) {
  EdgeMap edges;
  for (int t = 0; t < static_cast<int>(triangles.size()); ++t) {
    const auto& tri = triangles[t];
    for (int k = 0; k < 3; ++k) edges[edge_key(tri[k], tri[(k + 1) % 3])].push_back(t);
  }
  return edges;
}

// Triangulates the strip between two closed vertex rings by merging their
// angular orders. inner/outer hold vertex indices sorted by angle.
void zip_rings(const std::vector<int>& inner, const std::vector<double>& inner_angles,
               const std::vector<int>& outer, const std::vector<double>& outer_angles,
               std::vector<std::array<int, 3>>& triangles) {
  const int na = static_cast<int>(inner.size());
  const int nb = static_cast<int>(outer.size());
  if (na == 1) {
    for (int k = 0; k < nb; ++k) triangles.push_back({inner[0], outer[k], outer[(k + 1) % nb]});
    return;
  }
  const double a0 = inner_angles[0];
  // Outer vertex angularly closest to the first inner vertex.
  int j0 = 0;
  double best = 1e300;
  for (int k = 0; k < nb; ++k) {
    double d = wrap_angle(outer_angles[k] - a0);
    if (d > kPi) d -= kTwoPi;
    if (std::abs(d) < best) {
      best = std::abs(d);
      j0 = k;
    }
  }
  double b0 = wrap_angle(outer_angles[j0] - a0);
  if (b0 > kPi) b0 -= kTwoPi;
  auto rel_a = [&](int i) { return i >= na ? kTwoPi : wrap_angle(inner_angles[i] - a0); };
  auto rel_b = [&](int k) {
    if (k >= nb) return b0 + kTwoPi;
    return b0 + wrap_angle(outer_angles[(j0 + k) % nb] - outer_angles[j0]);
  };
  int i = 0;
  int k = 0;
  while (i < na || k < nb) {
    const bool advance_inner = (k >= nb) || (i < na && rel_a(i + 1) < rel_b(k + 1));
    const int ai = inner[i % na];
    const int bk = outer[(j0 + k) % nb];
    if (advance_inner) {
      triangles.push_back({ai, inner[(i + 1) % na], bk});
      ++i;
    } else {
      triangles.push_back({ai, bk, outer[(j0 + k + 1) % nb]});
      ++k;
    }
  }
}

struct Ring {
  double radius = 0.0;
  std::vector<double> angles;
};

struct MeshPlan {
  std::vector<Ring> rings;  // center excluded, ordered outward
  long triangles = 0;
  bool valid = false;
};

std::vector<double> boundary_angles(const ElectrodeLayout& layout, double h) {
  std::vector<Arc> arcs = layout.arcs;
  std::sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) { return a.start < b.start; });
  std::vector<double> angles;
  const int L = static_cast<int>(arcs.size());
  for (int i = 0; i < L; ++i) {
    const Arc& a = arcs[i];
    const int ne = std::max(1, static_cast<int>(std::lround(a.length() / h)));
    for (int s = 0; s < ne; ++s) angles.push_back(a.start + a.length() * s / ne);
    const double next_start = (i + 1 < L) ? arcs[i + 1].start : arcs[0].start + kTwoPi;
    const double gap = next_start - a.end;
    if (gap > 1e-12) {
      const int ng = std::max(1, static_cast<int>(std::lround(gap / h)));
      for (int s = 0; s < ng; ++s) angles.push_back(a.end + gap * s / ng);
    }
  }
  for (double& a : angles) a = wrap_angle(a);
  std::sort(angles.begin(), angles.end());
  return angles;
}

std::vector<double> uniform_angles(int count, double offset) {
  std::vector<double> a(count);
  for (int i = 0; i < count; ++i) a[i] = wrap_angle(offset + kTwoPi * i / count);
  std::sort(a.begin(), a.end());
  return a;
}

MeshPlan plan_mesh(const ElectrodeLayout& layout, int K, double grading, const DiscMeshOptions& opt) {
  MeshPlan plan;
  const double rd = opt.conforming_radius;
  for (int k = 1; k <= K; ++k) {
    const int count = 6 * k;
    plan.rings.push_back({rd * k / K, uniform_angles(count, (k % 2) * kPi / count)});
  }
  const double h_d = kTwoPi * rd / (6.0 * K);
  const double h_b = h_d / grading;
  std::vector<double> outer = boundary_angles(layout, h_b);
  const double n_d = 6.0 * K;
  const double M = static_cast<double>(outer.size());
  const double width = 1.0 - rd;

  int strips = 1;
  if (M > n_d * opt.max_ring_growth) strips = static_cast<int>(std::ceil(std::log(M / n_d) / std::log(opt.max_ring_growth)));
  auto size_at = [&](int s, int S) { return h_d * std::pow(h_b / h_d, static_cast<double>(s) / S); };
  auto natural_width = [&](int S) {
    double w = 0.0;
    for (int s = 0; s < S; ++s) w += 0.5 * std::sqrt(3.0) * 0.5 * (size_at(s, S) + size_at(s + 1, S));
    return w;
  };
  while (natural_width(strips) < 0.8 * width) ++strips;

  std::vector<double> steps(strips);
  double total = 0.0;
  for (int s = 0; s < strips; ++s) {
    steps[s] = size_at(s, strips) + size_at(s + 1, strips);
    total += steps[s];
  }
  double r = rd;
  for (int s = 1; s < strips; ++s) {
    const double r_prev = r;
    r += width * steps[s - 1] / total;
    int count = std::max(6, static_cast<int>(std::lround(kTwoPi * r / size_at(s, strips))));
    // Chords of this ring must clear the previous ring by a quarter of the gap.
    const double clearance = r_prev + 0.25 * (r - r_prev);
    count = std::max(count, static_cast<int>(std::ceil(kPi / std::acos(clearance / r))));
    plan.rings.push_back({r, uniform_angles(count, (s % 2) * kPi / count)});
  }
  plan.rings.push_back({1.0, std::move(outer)});

  // Without clearance the strip triangulation folds over; such plans are rejected.
  plan.valid = true;
  for (std::size_t k = 1; k < plan.rings.size(); ++k) {
    const auto& a = plan.rings[k].angles;
    double gap = kTwoPi - (a.back() - a.front());
    for (std::size_t i = 1; i < a.size(); ++i) gap = std::max(gap, a[i] - a[i - 1]);
    if (plan.rings[k].radius * std::cos(0.5 * gap) <= plan.rings[k - 1].radius) plan.valid = false;
  }

  plan.triangles = 0;
  long prev = 1;
  for (const Ring& ring : plan.rings) {
    const long cur = static_cast<long>(ring.angles.size());
    plan.triangles += (prev == 1) ? cur : prev + cur;
    prev = cur;
  }
  return plan;
}

void hash_bytes(std::uint64_t& h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

}  // namespace

double ElectrodeLayout::filling_fraction() const {
  double total = 0.0;
  for (const Arc& a : arcs) total += a.length();
  return total / kTwoPi;
}

void ElectrodeLayout::validate() const {
  require(count() >= 2, "electrode layout needs at least two electrodes");
  require(contact_impedance.size() == count(), "one contact impedance per electrode is required");
  for (int i = 0; i < count(); ++i) {
    require(contact_impedance[i] > 0, "contact impedance of electrode " + std::to_string(i) + " must be positive");
    require(arcs[i].length() > 0 && arcs[i].length() < kTwoPi, "electrode " + std::to_string(i) + " has an invalid arc");
  }
  std::vector<Arc> sorted = arcs;
  for (Arc& a : sorted) {
    const double len = a.length();
    a.start = wrap_angle(a.start);
    a.end = a.start + len;
  }
  std::sort(sorted.begin(), sorted.end(), [](const Arc& a, const Arc& b) { return a.start < b.start; });
  constexpr double snap = 1e-12;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    require(sorted[i + 1].start >= sorted[i].end - snap, "electrode arcs overlap");
  require(sorted.front().start + kTwoPi >= sorted.back().end - snap, "electrode arcs overlap");
}

ElectrodeLayout ElectrodeLayout::uniform(int count, double fill, double z0) {
  require(count >= 2, "electrode count must be at least 2");
  require(fill > 0 && fill < 1, "filling fraction must lie in (0, 1)");
  require(z0 > 0, "contact impedance must be positive");
  ElectrodeLayout layout;
  const double width = fill * kTwoPi / count;
  for (int j = 1; j <= count; ++j) {
    const double center = kTwoPi * j / count;
    const double start = wrap_angle(center - 0.5 * width);
    layout.arcs.push_back({start, start + width});
  }
  layout.contact_impedance = Vector::Constant(count, z0);
  return layout;
}

double Mesh::total_area() const {
  return std::accumulate(element_areas.begin(), element_areas.end(), 0.0);
}

Vec2 Mesh::centroid(int element) const {
  const auto& t = triangles.at(element);
  return (vertices[t[0]] + vertices[t[1]] + vertices[t[2]]) / 3.0;
}

Mesh Mesh::from_triangles(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> triangles) {
  Mesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.triangles = std::move(triangles);
  const int nv = mesh.num_vertices();
  mesh.element_areas.reserve(mesh.triangles.size());
  for (auto& t : mesh.triangles) {
    for (int k : t) require(k >= 0 && k < nv, "triangle references a missing vertex");
    double a = signed_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    if (a < 0) {
      std::swap(t[1], t[2]);
      a = -a;
    }
    mesh.element_areas.push_back(a);
  }
  // Boundary edges keep the orientation of their (counter-clockwise) triangle.
  std::map<std::pair<int, int>, int> count;
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) ++count[edge_key(t[k], t[(k + 1) % 3])];
  std::map<int, int> next;
  for (const auto& t : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      if (count[edge_key(a, b)] == 1) next[a] = b;
    }
  if (!next.empty()) {
    const int first = next.begin()->first;
    int v = first;
    do {
      auto it = next.find(v);
      if (it == next.end()) break;
      mesh.boundary_segments.push_back({v, it->second});
      v = it->second;
    } while (v != first && mesh.boundary_segments.size() <= next.size());
    // Any boundary edges not on the first loop are appended so validate() can report them.
    if (mesh.boundary_segments.size() != next.size()) {
      std::map<int, bool> seen;
      for (const auto& s : mesh.boundary_segments) seen[s[0]] = true;
      for (const auto& [a, b] : next)
        if (!seen[a]) mesh.boundary_segments.push_back({a, b});
    }
  }
  return mesh;
}

void Mesh::validate() const {
  const int nv = num_vertices();
  const int nt = num_elements();
  require(nv >= 3 && nt >= 1, "mesh is empty");
  require(static_cast<int>(element_areas.size()) == nt, "element area count does not match triangle count");
  for (const Vec2& p : vertices) require(p.norm() <= 1.0 + 1e-9, "mesh vertex lies outside the unit disc");
  for (int t = 0; t < nt; ++t) {
    const auto& tri = triangles[t];
    for (int k : tri) require(k >= 0 && k < nv, "triangle " + std::to_string(t) + " references a missing vertex");
    const double a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
    require(a > 0, "triangle " + std::to_string(t) + " is not positively oriented");
    require(std::abs(a - element_areas[t]) <= 1e-12 * std::max(1.0, a) + 1e-15,
            "stored area of triangle " + std::to_string(t) + " is inconsistent");
  }
  const EdgeMap edges = collect_edges(triangles);
  std::map<std::pair<int, int>, int> boundary;
  for (const auto& [key, elems] : edges) {
    require(elems.size() <= 2, "edge shared by more than two triangles");
    if (elems.size() == 1) boundary[key] = 0;
  }
  require(boundary.size() == boundary_segments.size(), "boundary segments do not match the boundary edges");
  std::map<int, int> next;
  for (const auto& s : boundary_segments) {
    auto it = boundary.find(edge_key(s[0], s[1]));
    require(it != boundary.end(), "boundary segment is not a boundary edge");
    require(++it->second == 1, "duplicate boundary segment");
    require(next.emplace(s[0], s[1]).second, "boundary segments do not form a simple polygon");
  }
  // Single closed polygon.
  int v = boundary_segments.front()[0];
  std::size_t steps = 0;
  do {
    auto it = next.find(v);
    require(it != next.end(), "boundary polygon is not closed");
    v = it->second;
    ++steps;
  } while (v != boundary_segments.front()[0] && steps <= boundary_segments.size());
  require(steps == boundary_segments.size(), "boundary is not a single closed polygon");
  const double area = total_area();
  require(area > 0 && area <= kPi * (1.0 + 1e-12), "total mesh area is inconsistent with the unit disc");
}

void Mesh::validate_electrodes(const ElectrodeLayout& layout, double tol) const {
  layout.validate();
  std::vector<double> angles;
  for (const auto& s : boundary_segments) {
    const Vec2& p = vertices[s[0]];
    if (std::abs(p.norm() - 1.0) <= tol) angles.push_back(wrap_angle(std::atan2(p.y(), p.x())));
  }
  auto on_boundary = [&](double a) {
    a = wrap_angle(a);
    for (double b : angles) {
      double d = std::abs(a - b);
      d = std::min(d, kTwoPi - d);
      if (d <= tol) return true;
    }
    return false;
  };
  for (int e = 0; e < layout.count(); ++e)
    require(on_boundary(layout.arcs[e].start) && on_boundary(layout.arcs[e].end),
            "endpoint of electrode " + std::to_string(e) + " is not a boundary vertex");
}

std::string Mesh::content_id() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Vec2& p : vertices) {
    const double xy[2] = {p.x(), p.y()};
    hash_bytes(h, xy, sizeof(xy));
  }
  for (const auto& t : triangles) {
    const std::int32_t idx[3] = {t[0], t[1], t[2]};
    hash_bytes(h, idx, sizeof(idx));
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Mesh build_disc_mesh(const ElectrodeLayout& layout, int target_elements, double boundary_grading,
                     const DiscMeshOptions& options) {
  layout.validate();
  require(target_elements >= 64, "target element count must be at least 64");
  require(boundary_grading >= 1.0, "boundary grading must be at least 1");
  require(options.conforming_radius > 0 && options.conforming_radius < 1, "conforming radius must lie in (0, 1)");
  require(options.max_ring_growth > 1.0, "ring growth factor must exceed 1");

  int best_k = 1;
  long best_diff = -1;
  for (int K = 1;; ++K) {
    const MeshPlan candidate = plan_mesh(layout, K, boundary_grading, options);
    const long count = candidate.triangles;
    const long diff = std::labs(count - target_elements);
    if (candidate.valid && (best_diff < 0 || diff < best_diff)) {
      best_diff = diff;
      best_k = K;
    }
    if (count > 2L * target_elements && best_diff >= 0) break;
    require(K < 10000, "no valid ring layout found for this electrode configuration");
  }
  const MeshPlan plan = plan_mesh(layout, best_k, boundary_grading, options);

  std::vector<Vec2> vertices{Vec2::Zero()};
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> prev_idx{0};
  std::vector<double> prev_ang{0.0};
  for (const Ring& ring : plan.rings) {
    std::vector<int> idx;
    for (double a : ring.angles) {
      idx.push_back(static_cast<int>(vertices.size()));
      vertices.emplace_back(ring.radius * std::cos(a), ring.radius * std::sin(a));
    }
    zip_rings(prev_idx, prev_ang, idx, ring.angles, triangles);
    prev_idx = std::move(idx);
    prev_ang = ring.angles;
  }
  Mesh mesh = Mesh::from_triangles(std::move(vertices), std::move(triangles));
  mesh.validate();
  mesh.validate_electrodes(layout);
  return mesh;
}

Mesh refine_inside(const Mesh& mesh, double radius, int levels) {
  require(radius > 0, "refinement radius must be positive");
  require(levels >= 0, "refinement levels must be non-negative");
  Mesh current = mesh;
  for (int level = 0; level < levels; ++level) {
    std::vector<Vec2> vertices = current.vertices;
    std::map<std::pair<int, int>, int> midpoint;
    auto inside = [&](const std::array<int, 3>& t) {
      for (int v : t)
        if (current.vertices[v].norm() > radius + kSubdomainTolerance) return false;
      return true;
    };
    auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
    for (const auto& t : current.triangles) {
      if (!inside(t)) continue;
      for (int i = 0; i < 3; ++i) {
        const auto k = key(t[i], t[(i + 1) % 3]);
        if (midpoint.count(k)) continue;
        midpoint[k] = static_cast<int>(vertices.size());
        vertices.push_back(0.5 * (current.vertices[k.first] + current.vertices[k.second]));
      }
    }
    std::vector<std::array<int, 3>> triangles;
    for (const auto& t : current.triangles) {
      std::array<int, 3> m{-1, -1, -1};  // m[i] splits edge (t[i], t[i+1])
      int marked = 0;
      for (int i = 0; i < 3; ++i) {
        const auto it = midpoint.find(key(t[i], t[(i + 1) % 3]));
        if (it != midpoint.end()) {
          m[i] = it->second;
          ++marked;
        }
      }
      if (marked == 3) {
        triangles.push_back({t[0], m[0], m[2]});
        triangles.push_back({m[0], t[1], m[1]});
        triangles.push_back({m[2], m[1], t[2]});
        triangles.push_back({m[0], m[1], m[2]});
      } else if (marked == 1) {
        const int i = m[0] >= 0 ? 0 : (m[1] >= 0 ? 1 : 2);
        triangles.push_back({t[i], m[i], t[(i + 2) % 3]});
        triangles.push_back({m[i], t[(i + 1) % 3], t[(i + 2) % 3]});
      } else {
        require(marked == 0, "inside refinement produced an element with two split edges");
        triangles.push_back(t);
      }
    }
    current = Mesh::from_triangles(std::move(vertices), std::move(triangles));
  }
  current.validate();
  return current;
}

MarkedMesh mark_subdomain(const Mesh& mesh, double radius) {
  require(radius > 0, "subdomain radius must be positive");
  const int nt = mesh.num_elements();
  std::vector<int> inside;
  std::vector<int> outside;
  for (int t = 0; t < nt; ++t) {
    bool in = true;
    for (int v : mesh.triangles[t]) in = in && mesh.vertices[v].norm() <= radius + kSubdomainTolerance;
    (in ? inside : outside).push_back(t);
  }
  require(!inside.empty(), "no element lies inside the subdomain of radius " + std::to_string(radius));
  MarkedMesh out;
  out.subdomain.n = static_cast<int>(inside.size());
  out.subdomain.radius = radius;
  out.subdomain.permutation = inside;
  out.subdomain.permutation.insert(out.subdomain.permutation.end(), outside.begin(), outside.end());
  out.mesh.vertices = mesh.vertices;
  out.mesh.boundary_segments = mesh.boundary_segments;
  for (int t : out.subdomain.permutation) {
    out.mesh.triangles.push_back(mesh.triangles[t]);
    out.mesh.element_areas.push_back(mesh.element_areas[t]);
  }
  return out;
}

IncrementOperator build_increment_operator(const Mesh& mesh, const SubdomainMap& sub) {
  require(sub.n >= 1 && sub.n <= mesh.num_elements(), "subdomain must contain at least one element");
  const EdgeMap edges = collect_edges(mesh.triangles);
  IncrementOperator op;
  op.n = sub.n;
  for (const auto& [key, elems] : edges) {
    if (elems.size() != 2) continue;
    const int a = std::min(elems[0], elems[1]);
    const int b = std::max(elems[0], elems[1]);
    if (a < sub.n || b < sub.n) op.edges.push_back({a, b});
  }
  std::sort(op.edges.begin(), op.edges.end(), [](const OrientedEdge& x, const OrientedEdge& y) {
    return x.plus != y.plus ? x.plus < y.plus : x.minus < y.minus;
  });
  op.N = static_cast<int>(op.edges.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (int row = 0; row < op.N; ++row) {
    const auto& e = op.edges[row];
    if (e.plus < sub.n) trip.emplace_back(row, e.plus, 1.0);
    if (e.minus < sub.n) trip.emplace_back(row, e.minus, -1.0);
  }
  op.matrix.resize(op.N, op.n);
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  op.matrix.makeCompressed();
  // Full column rank check.
  WeightedPseudoInverse check(op);
  (void)check;
  return op;
}

WeightedPseudoInverse::WeightedPseudoInverse(const IncrementOperator& op, const Vector* theta) : L_(op.matrix) {
  if (theta) {
    require(theta->size() == op.N, "weight vector length must equal the number of increments");
    require(theta->minCoeff() > 0, "weights must be strictly positive");
    inv_sqrt_theta_ = theta->cwiseSqrt().cwiseInverse();
  } else {
    inv_sqrt_theta_ = Vector::Ones(op.N);
  }
  const SparseMatrix scaled = inv_sqrt_theta_.asDiagonal() * L_;
  const SparseMatrix normal = SparseMatrix(scaled.transpose()) * scaled;
  llt_ = std::make_shared<Eigen::SimplicialLLT<SparseMatrix>>(normal);
  if (llt_->info() != Eigen::Success)
    throw NumericalError("factorization of L^T D^-1 L failed: increment operator is rank deficient");
}

Vector WeightedPseudoInverse::apply(const Vector& target) const {
  require(target.size() == L_.rows(), "target length must equal the number of increments");
  return apply_scaled(inv_sqrt_theta_.cwiseProduct(target));
}

Vector WeightedPseudoInverse::apply_scaled(const Vector& alpha) const {
  require(alpha.size() == L_.rows(), "vector length must equal the number of increments");
  const Vector rhs = L_.transpose() * inv_sqrt_theta_.cwiseProduct(alpha);
  return llt_->solve(rhs);
}

Matrix WeightedPseudoInverse::solve_normal(const Matrix& rhs) const {
  require(rhs.rows() == L_.cols(), "right-hand side has the wrong number of rows");
  return llt_->solve(rhs);
}

Vector apply_pseudoinverse(const IncrementOperator& op, const Vector* theta, const Vector& target) {
  return WeightedPseudoInverse(op, theta).apply(target);
}

}  // namespace eitias
