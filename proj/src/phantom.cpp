#include <eitias/phantom.hpp>

#include <cmath>
#include <random>

namespace eitias {

bool Inclusion::contains(const Vec2& p) const {
  if (shape == Shape::Disc) return (p - center).squaredNorm() <= radius * radius;
  return p.x() >= corner.x() && p.x() <= corner.x() + width && p.y() >= corner.y() && p.y() <= corner.y() + height;
}

double Inclusion::max_radius() const {
  if (shape == Shape::Disc) return center.norm() + radius;
  double r = 0.0;
  for (double dx : {0.0, width})
    for (double dy : {0.0, height}) r = std::max(r, (corner + Vec2(dx, dy)).norm());
  return r;
}

void PhantomSpec::validate() const {
  require(sigma0 > 0, "phantom background conductivity must be positive");
  for (const auto& inc : inclusions) {
    require(inc.value > 0, "inclusion conductivity must be positive");
    if (inc.shape == Inclusion::Shape::Disc)
      require(inc.radius > 0, "disc inclusion needs a positive radius");
    else
      require(inc.width > 0 && inc.height > 0, "rectangle inclusion needs positive width and height");
    require(inc.max_radius() < 1.0, "inclusions must lie inside the unit disc");
  }
}

double PhantomSpec::value_at(const Vec2& p) const {
  double v = sigma0;
  for (const auto& inc : inclusions)
    if (inc.contains(p)) v = inc.value;
  return v;
}

PhantomSpec PhantomSpec::one_inclusion() {
  PhantomSpec s;
  Inclusion d;
  d.center = {0.3, 0.25};
  d.radius = 0.25;
  d.value = 4.2;
  s.inclusions.push_back(d);
  return s;
}

PhantomSpec PhantomSpec::two_inclusions() {
  PhantomSpec s;
  Inclusion rect;
  rect.shape = Inclusion::Shape::Rectangle;
  rect.corner = {-0.6, -0.35};
  rect.width = 0.35;
  rect.height = 0.6;
  rect.value = 3.5;
  Inclusion disc;
  disc.center = {0.35, 0.2};
  disc.radius = 0.22;
  disc.value = 0.4;
  s.inclusions = {rect, disc};
  return s;
}

Json phantom_to_json(const PhantomSpec& spec) {
  Json j;
  j["sigma0"] = spec.sigma0;
  Json list = Json::array();
  for (const auto& inc : spec.inclusions) {
    Json e;
    if (inc.shape == Inclusion::Shape::Disc) {
      e["shape"] = "disc";
      e["center"] = {inc.center.x(), inc.center.y()};
      e["radius"] = inc.radius;
    } else {
      e["shape"] = "rectangle";
      e["corner"] = {inc.corner.x(), inc.corner.y()};
      e["width"] = inc.width;
      e["height"] = inc.height;
    }
    e["value"] = inc.value;
    list.push_back(e);
  }
  j["inclusions"] = list;
  return j;
}

PhantomSpec phantom_from_json(const Json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "one-inclusion") return PhantomSpec::one_inclusion();
    if (name == "two-inclusions") return PhantomSpec::two_inclusions();
    throw InputError("unknown phantom preset '" + name + "' (expected one-inclusion or two-inclusions)");
  }
  PhantomSpec s;
  s.sigma0 = j.value("sigma0", 1.0);
  for (const auto& e : j.value("inclusions", Json::array())) {
    Inclusion inc;
    const auto shape = e.at("shape").get<std::string>();
    if (shape == "disc") {
      const auto c = e.at("center").get<std::vector<double>>();
      require(c.size() == 2, "disc center must be [x, y]");
      inc.center = {c[0], c[1]};
      inc.radius = e.at("radius").get<double>();
    } else if (shape == "rectangle") {
      inc.shape = Inclusion::Shape::Rectangle;
      const auto c = e.at("corner").get<std::vector<double>>();
      require(c.size() == 2, "rectangle corner must be [x, y]");
      inc.corner = {c[0], c[1]};
      inc.width = e.at("width").get<double>();
      inc.height = e.at("height").get<double>();
    } else {
      throw InputError("unknown inclusion shape '" + shape + "'");
    }
    inc.value = e.at("value").get<double>();
    s.inclusions.push_back(inc);
  }
  s.validate();
  return s;
}

Vector rasterize_phantom(const PhantomSpec& spec, const Mesh& data_mesh, int subdivisions) {
  spec.validate();
  require(subdivisions >= 1, "subdivisions must be at least 1");
  const int k = subdivisions;
  Vector xi(data_mesh.num_elements());
  for (int e = 0; e < data_mesh.num_elements(); ++e) {
    const auto& t = data_mesh.triangles[e];
    const Vec2& a = data_mesh.vertices[t[0]];
    const Vec2 u = (data_mesh.vertices[t[1]] - a) / k;
    const Vec2 v = (data_mesh.vertices[t[2]] - a) / k;
    double sum = 0.0;
    for (int i = 0; i < k; ++i)
      for (int j = 0; i + j < k; ++j) {
        sum += spec.value_at(a + (i + 1.0 / 3) * u + (j + 1.0 / 3) * v);
        if (i + j + 1 < k) sum += spec.value_at(a + (i + 2.0 / 3) * u + (j + 2.0 / 3) * v);
      }
    xi[e] = sum / (k * k) - spec.sigma0;
    if (!(spec.sigma0 + xi[e] > 0))
      throw InputError("phantom gives non-positive conductivity on element " + std::to_string(e));
  }
  return xi;
}

Vector gaussian_noise(Eigen::Index size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uniform = [&] {
    // 53-bit uniform in (0, 1]
    return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
  };
  Vector out(size);
  for (Eigen::Index i = 0; i < size; i += 2) {
    const double rad = std::sqrt(-2.0 * std::log(uniform()));
    const double ang = 2.0 * kPi * uniform();
    out[i] = rad * std::cos(ang);
    if (i + 1 < size) out[i + 1] = rad * std::sin(ang);
  }
  return out;
}

Simulation simulate_measurement(const PhantomSpec& spec, const Mesh& data_mesh, const ElectrodeLayout& layout,
                                const CurrentBasis& basis, double noise_percent, std::uint64_t seed,
                                const std::string& reconstruction_mesh_id, int subdivisions) {
  require(noise_percent >= 0, "noise percentage must be non-negative");
  const Vector xi_true = rasterize_phantom(spec, data_mesh, subdivisions);
  const CemSystem system(data_mesh, data_mesh.num_elements(), layout, basis, spec.sigma0);
  Simulation sim;
  sim.noiseless = forward_map(system, xi_true);
  sim.max_abs_voltage = sim.noiseless.cwiseAbs().maxCoeff();
  MeasurementSet& ms = sim.measurement;
  ms.L = layout.count();
  ms.basis = basis.kind == "trig" ? "trig" : basis.kind;
  ms.seed = seed;
  ms.mesh_id = data_mesh.content_id();
  ms.noise_std = noise_percent / 100.0 * sim.max_abs_voltage;
  ms.data = sim.noiseless;
  if (ms.noise_std > 0) ms.data += ms.noise_std * gaussian_noise(ms.data.size(), seed);
  if (!reconstruction_mesh_id.empty() && reconstruction_mesh_id == ms.mesh_id)
    ms.warnings.push_back("inverse crime: data simulated on the reconstruction mesh");
  return sim;
}

}  // namespace eitias
