#include "graphtomo/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "graphtomo/errors.hpp"

namespace graphtomo {

namespace {

const Json& need(const Json& j, const std::string& field) {
  if (!j.is_object() || !j.contains(field)) throw ValidationError("missing field '" + field + "'");
  return j.at(field);
}

template <class T>
T get_as(const Json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("field '" + field + "' has the wrong type");
  }
}

Json vector_to_json(const Eigen::VectorXcd& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(complex_to_json(v[i]));
  return a;
}

Eigen::VectorXcd vector_from_json(const Json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError("field '" + field + "' must be an array");
  Eigen::VectorXcd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v[i] = complex_from_json(j[i], field);
  return v;
}

}  // namespace

Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

Complex complex_from_json(const Json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return Complex(j[0].get<double>(), j[1].get<double>());
  throw ValidationError("field '" + field + "' must be a number or [re, im]");
}

Json graph_to_json(const LatticeGraph& g) {
  Json j;
  j["n"] = g.n;
  Json edges = Json::array();
  for (const auto& [a, b] : g.edges) edges.push_back({a, b});
  j["edges"] = edges;
  j["boundary"] = g.boundary;
  return j;
}

LatticeGraph graph_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("graph must be an object");
  if (j.contains("lattice")) {
    const LatticeKind kind = parse_lattice_kind(get_as<std::string>(j.at("lattice"), "lattice"));
    const auto dims = get_as<std::vector<int>>(need(j, "dims"), "dims");
    const BoundarySpec b = parse_boundary_spec(get_as<std::string>(need(j, "boundary"), "boundary"));
    return make_lattice(kind, dims, b);
  }
  const int n = get_as<int>(need(j, "n"), "n");
  std::vector<Edge> edges;
  for (const auto& e : need(j, "edges")) {
    const auto pair = get_as<std::vector<int>>(e, "edges");
    if (pair.size() != 2) throw ValidationError("field 'edges' holds pairs");
    edges.emplace_back(pair[0], pair[1]);
  }
  const auto boundary = get_as<std::vector<int>>(need(j, "boundary"), "boundary");
  return make_graph(n, edges, boundary);
}

Json model_to_json(const HubbardParams& p) {
  Json j;
  j["graph"] = graph_to_json(p.graph);
  Json mu = Json::array();
  for (Complex m : p.mu) mu.push_back(complex_to_json(m));
  j["mu"] = mu;
  Json js = Json::array();
  for (const auto& [e, val] : p.j) js.push_back({{"edge", {e.first, e.second}}, {"value", complex_to_json(val)}});
  j["j"] = js;
  j["chi"] = p.chi;
  Json ports = Json::object();
  for (const auto& [v, g] : p.port_gamma) ports[std::to_string(v)] = g;
  j["port_gamma"] = ports;
  return j;
}

HubbardParams model_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("model must be an object");
  if (j.contains("family")) {
    const Json& f = j.at("family");
    const SshFamily fam = parse_ssh_family(get_as<std::string>(need(f, "kind"), "family.kind"));
    SshOptions o;
    if (f.contains("ratio")) o.ratio = get_as<double>(f.at("ratio"), "family.ratio");
    if (f.contains("j2")) o.j2 = get_as<double>(f.at("j2"), "family.j2");
    if (f.contains("mu0")) o.mu0 = get_as<double>(f.at("mu0"), "family.mu0");
    if (f.contains("disorder")) o.disorder = get_as<double>(f.at("disorder"), "family.disorder");
    if (f.contains("chi")) o.chi = get_as<double>(f.at("chi"), "family.chi");
    if (f.contains("kappa")) o.kappa = get_as<double>(f.at("kappa"), "family.kappa");
    if (f.contains("boundary")) o.boundary = parse_boundary_spec(get_as<std::string>(f.at("boundary"), "family.boundary"));
    const int size = get_as<int>(need(f, "size"), "family.size");
    const auto seed = f.contains("seed") ? get_as<std::uint64_t>(f.at("seed"), "family.seed") : 1;
    return ssh_families(fam, size, o, seed);
  }
  HubbardParams p = blank_params(graph_from_json(need(j, "graph")));
  const Json& mu = need(j, "mu");
  if (!mu.is_array() || static_cast<int>(mu.size()) != p.graph.n)
    throw ValidationError("field 'mu' must hold one entry per vertex");
  for (int v = 0; v < p.graph.n; ++v) p.mu[v] = complex_from_json(mu[v], "mu");
  for (const auto& e : need(j, "j")) {
    const auto pair = get_as<std::vector<int>>(need(e, "edge"), "j.edge");
    if (pair.size() != 2 || !p.graph.has_edge(pair[0], pair[1]))
      throw ValidationError("field 'j.edge' names a pair that is not an edge");
    p.set_coupling(pair[0], pair[1], complex_from_json(need(e, "value"), "j.value"));
  }
  if (j.contains("chi")) {
    p.chi = get_as<std::vector<double>>(j.at("chi"), "chi");
    if (static_cast<int>(p.chi.size()) != p.graph.n) throw ValidationError("field 'chi' must hold one entry per vertex");
  }
  if (j.contains("port_gamma"))
    for (const auto& [k, v] : j.at("port_gamma").items()) {
      int site = 0;
      const auto res = std::from_chars(k.data(), k.data() + k.size(), site);
      if (res.ec != std::errc() || res.ptr != k.data() + k.size()) throw ValidationError("field 'port_gamma' keys are vertices");
      p.port_gamma[site] = get_as<double>(v, "port_gamma");
    }
  validate(p);
  return p;
}

Json spectral_to_json(const SpectralData& d, const LatticeGraph& g) {
  Json j;
  j["graph"] = graph_to_json(g);
  j["e1"] = vector_to_json(d.e1);
  j["e2"] = vector_to_json(d.e2);
  Json m1;
  m1["sites"] = d.m1.sites;
  Json blocks = Json::array();
  for (const auto& b : d.m1.blocks) blocks.push_back(vector_to_json(b));
  m1["blocks"] = blocks;
  j["m1"] = m1;
  if (d.has_m2) {
    Json m2;
    m2["sites"] = d.m2.sites;
    m2["n1"] = d.m2.n1;
    m2["d"] = d.m2.d;
    Json b2 = Json::array();
    for (const auto& t : d.m2.blocks) {
      Json flat = Json::array();
      for (const Complex& z : t.data) flat.push_back(complex_to_json(z));
      b2.push_back(flat);
    }
    m2["blocks"] = b2;
    j["m2"] = m2;
  }
  return j;
}

SpectralData spectral_from_json(const Json& j) {
  SpectralData d;
  d.e1 = vector_from_json(need(j, "e1"), "e1");
  if (j.contains("e2")) d.e2 = vector_from_json(j.at("e2"), "e2");
  const Json& m1 = need(j, "m1");
  d.m1.sites = get_as<std::vector<int>>(need(m1, "sites"), "m1.sites");
  const size_t s = d.m1.sites.size();
  const Json& blocks = need(m1, "blocks");
  if (!blocks.is_array() || blocks.size() != s * s) throw ValidationError("field 'm1.blocks' must hold S^2 blocks");
  for (const auto& b : blocks) {
    d.m1.blocks.push_back(vector_from_json(b, "m1.blocks"));
    if (d.m1.blocks.back().size() != d.e1.size()) throw ValidationError("field 'm1.blocks' does not match e1");
  }
  if (j.contains("m2")) {
    const Json& m2 = j.at("m2");
    d.m2.sites = get_as<std::vector<int>>(need(m2, "sites"), "m2.sites");
    d.m2.n1 = get_as<int>(need(m2, "n1"), "m2.n1");
    d.m2.d = get_as<int>(need(m2, "d"), "m2.d");
    const size_t s2 = d.m2.sites.size();
    const Json& b2 = need(m2, "blocks");
    if (!b2.is_array() || b2.size() != s2 * s2) throw ValidationError("field 'm2.blocks' must hold S^2 blocks");
    for (const auto& b : b2) {
      Tensor3 t(d.m2.n1, d.m2.d, d.m2.n1);
      if (b.size() != t.data.size()) throw ValidationError("field 'm2.blocks' has the wrong size");
      for (size_t k = 0; k < t.data.size(); ++k) t.data[k] = complex_from_json(b[k], "m2.blocks");
      d.m2.blocks.push_back(std::move(t));
    }
    d.has_m2 = true;
  }
  return d;
}

Json gauge_report_to_json(const GaugeReport& r) {
  Json j;
  j["max_mu"] = r.max_mu;
  j["max_abs_j"] = r.max_abs_j;
  j["max_flux"] = r.max_flux;
  j["max_chi"] = r.max_chi;
  j["max_residual"] = r.max_residual();
  j["cycles"] = r.cycles;
  j["mu_residual"] = r.mu_residual;
  Json aj = Json::array();
  for (const auto& [e, v] : r.abs_j_residual) aj.push_back({{"edge", {e.first, e.second}}, {"residual", v}});
  j["abs_j_residual"] = aj;
  j["flux_residual"] = r.flux_residual;
  j["chi_residual"] = r.chi_residual;
  return j;
}

Json budget_to_json(const NoonBudget& b) {
  Json j;
  j["photons"] = b.photons;
  j["t_on"] = b.t_on;
  j["t_prop"] = b.t_prop;
  j["eps0"] = b.eps0;
  j["eps1"] = b.eps1;
  j["eps2"] = b.eps2;
  j["eps3"] = b.eps3;
  j["eps4"] = b.eps4;
  j["k"] = b.k;
  j["delta"] = b.delta;
  j["precision"] = b.precision;
  j["c0"] = b.c0;
  j["lambda0"] = b.lambda0;
  j["j"] = b.j;
  j["d"] = b.d;
  j["n"] = b.n;
  return j;
}

Json fit_to_json(const LinearFit& f) { return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}}; }

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << v;
  return s.str();
}

std::string config_hash(const Json& config) { return hex64(fnv1a(config.dump())); }

void write_text(const std::filesystem::path& path, const std::string& text, bool force) {
  if (std::filesystem::exists(path) && !force)
    throw ValidationError("'" + path.string() + "' exists; pass --force to overwrite");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

void CsvTable::add(std::vector<std::string> row) {
  if (row.size() != header.size()) throw ValidationError("CSV row width does not match the header");
  rows.push_back(std::move(row));
}

std::string CsvTable::render(const std::string& hash, std::uint64_t seed) const {
  std::ostringstream s;
  s << "# config_hash=" << hash << ", seed=" << seed << "\n";
  for (size_t i = 0; i < header.size(); ++i) s << (i ? "," : "") << header[i];
  s << "\n";
  for (const auto& r : rows) {
    for (size_t i = 0; i < r.size(); ++i) s << (i ? "," : "") << r[i];
    s << "\n";
  }
  return s.str();
}

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Json manifest(const std::string& command, const Json& config, std::uint64_t seed,
              const std::vector<std::string>& files) {
  Json m;
  m["command"] = command;
  m["config_hash"] = config_hash(config);
  m["seed"] = seed;
  m["version"] = "0.1.0";
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  m["config"] = config;
  m["files"] = files;
  return m;
}

}  // namespace graphtomo
