#include "geobalance/io.hpp"

#include <fmt/format.h>

#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "geobalance/error.hpp"

namespace geobalance {

namespace {

using json = nlohmann::json;

[[noreturn]] void parse_fail(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::kParseError, where + ": " + what);
}

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParseError, what + ": " + e.what());
  }
}

const json& field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) parse_fail(where, std::string("missing \"") + key + "\"");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) parse_fail(where, "expected a number");
  return v.get<double>();
}

double number_field(const json& obj, const char* key, const std::string& where) {
  return number(field(obj, key, where), where + "." + key);
}

std::vector<double> number_array(const json& v, const std::string& where) {
  if (!v.is_array()) parse_fail(where, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

Matrix square_matrix(const json& v, const std::string& where,
                     std::vector<std::string>* problems) {
  if (!v.is_array()) parse_fail(where, "expected an array of rows");
  const std::size_t n = v.size();
  Matrix out = Matrix::square(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string row_where = where + "[" + std::to_string(i) + "]";
    const auto row = number_array(v[i], row_where);
    if (row.size() != n) {
      const std::string msg = row_where + " has " + std::to_string(row.size()) +
                              " entries, expected " + std::to_string(n);
      if (problems == nullptr) parse_fail(row_where, msg);
      problems->push_back(msg);
      continue;
    }
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

std::vector<Sample> samples_from_json(const json& v, const std::string& where) {
  if (!v.is_array()) parse_fail(where, "expected an array of [load, time] pairs");
  std::vector<Sample> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    const auto pair = number_array(v[i], at);
    if (pair.size() != 2) parse_fail(at, "expected [load, time]");
    out.push_back({pair[0], pair[1]});
  }
  return out;
}

// Builds the load function of one descriptor. Structural problems raise
// kParseError; semantic ones are appended to `problems` and yield nothing.
std::optional<LoadFunction> load_function_from_json(
    const json& d, const std::string& where, std::vector<std::string>& problems) {
  if (!d.is_object()) parse_fail(where, "expected an object");
  const json& kind_value = field(d, "kind", where);
  if (!kind_value.is_string()) parse_fail(where + ".kind", "expected a string");
  const std::string kind = kind_value.get<std::string>();

  const bool has_l_max = d.contains("l_max");
  const bool has_t_max = d.contains("t_max");
  if (has_l_max && has_t_max) {
    problems.push_back(where + ": set exactly one of l_max and t_max");
    return std::nullopt;
  }
  if (!has_l_max && !has_t_max && kind != "empirical") {
    problems.push_back(where + ": set exactly one of l_max and t_max");
    return std::nullopt;
  }
  const double l_max = has_l_max ? number_field(d, "l_max", where) : 0.0;
  const double t_max = has_t_max ? number_field(d, "t_max", where) : 0.0;

  try {
    LoadFunction lf = LoadFunction::batch(1.0, 0.0);
    if (kind == "queuing") {
      lf = LoadFunction::queuing(number_field(d, "mu", where), 0.0);
    } else if (kind == "batch") {
      lf = LoadFunction::batch(number_field(d, "s", where), 0.0);
    } else if (kind == "affine") {
      lf = LoadFunction::affine(number_field(d, "a", where),
                                number_field(d, "b", where), 0.0);
    } else if (kind == "empirical") {
      lf = LoadFunction::empirical(
          samples_from_json(field(d, "points", where), where + ".points"));
      if (!has_l_max && !has_t_max) return lf;
    } else {
      parse_fail(where + ".kind", "unknown kind \"" + kind + "\"");
    }
    return lf.with_l_max(has_l_max ? l_max : l_max_from_budget(lf, t_max));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kParseError) throw;
    problems.push_back(where + ": " + e.what());
    return std::nullopt;
  }
}

std::string format_double(double x) { return fmt::format("{:.17g}", x); }

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (double x : m.row(i)) row.push_back(x);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Instance parse_instance(std::string_view text) {
  const json doc = parse_json(text, "instance");
  if (!doc.is_object()) parse_fail("instance", "expected an object");
  const json& servers_json = field(doc, "servers", "instance");
  if (!servers_json.is_array()) parse_fail("servers", "expected an array");

  std::vector<std::string> problems;
  std::vector<Server> servers;
  for (std::size_t i = 0; i < servers_json.size(); ++i) {
    const std::string where = "servers[" + std::to_string(i) + "]";
    const json& s = servers_json[i];
    if (!s.is_object()) parse_fail(where, "expected an object");
    std::string id = std::to_string(i);
    if (s.contains("id")) {
      if (!s["id"].is_string()) parse_fail(where + ".id", "expected a string");
      id = s["id"].get<std::string>();
    }
    const double n = number_field(s, "n", where);
    auto lf = load_function_from_json(field(s, "load_function", where),
                                      where + ".load_function", problems);
    // Placeholder so the remaining checks still run.
    servers.push_back(Server{
        std::move(id), n,
        lf ? *lf : LoadFunction::affine(0.0, 0.0, std::numeric_limits<double>::max())});
  }
  const Matrix latency = square_matrix(field(doc, "latency", "instance"),
                                       "latency", &problems);
  for (auto& p : validate_instance(servers, latency)) problems.push_back(std::move(p));
  if (!problems.empty()) {
    std::string message = "invalid instance: " + problems.front();
    if (problems.size() > 1) {
      message += " (and " + std::to_string(problems.size() - 1) + " more)";
    }
    throw Error(ErrorKind::kValidationError, message, std::move(problems));
  }
  return Instance(std::move(servers), latency);
}

std::string routing_json(const Routing& routing) {
  json doc;
  doc["r"] = matrix_json(routing.r);
  doc["loads"] = routing.loads;
  doc["objective"] = routing.objective;
  doc["representation"] = routing.representation;
  return doc.dump(2) + "\n";
}

Routing parse_routing(std::string_view text) {
  const json doc = parse_json(text, "routing");
  if (!doc.is_object()) parse_fail("routing", "expected an object");
  Routing out;
  out.r = square_matrix(field(doc, "r", "routing"), "r", nullptr);
  out.loads = number_array(field(doc, "loads", "routing"), "loads");
  out.objective = number_field(doc, "objective", "routing");
  const json& rep = field(doc, "representation", "routing");
  if (!rep.is_string()) parse_fail("representation", "expected a string");
  out.representation = rep.get<std::string>();
  if (out.representation != "edge_flow" && out.representation != "origin") {
    parse_fail("representation", "expected \"edge_flow\" or \"origin\"");
  }
  if (out.loads.size() != out.r.rows()) {
    parse_fail("loads", "length does not match r");
  }
  return out;
}

std::vector<double> parse_loads(std::string_view text) {
  const json doc = parse_json(text, "loads");
  if (doc.is_object()) return number_array(field(doc, "loads", "loads"), "loads");
  return number_array(doc, "loads");
}

std::vector<Sample> parse_samples(std::string_view text) {
  std::size_t first = 0;
  while (first < text.size() && std::isspace(static_cast<unsigned char>(text[first]))) {
    ++first;
  }
  if (first < text.size() && text[first] == '[') {
    return samples_from_json(parse_json(text, "samples"), "samples");
  }
  std::vector<Sample> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    std::string a;
    std::string b;
    std::getline(fields, a, ',');
    std::getline(fields, b, ',');
    try {
      std::size_t used_a = 0;
      std::size_t used_b = 0;
      const double load = std::stod(a, &used_a);
      const double time = std::stod(b, &used_b);
      out.push_back({load, time});
    } catch (const std::exception&) {
      if (out.empty() && line_no == 1) continue;  // header
      throw Error(ErrorKind::kParseError,
                  "samples line " + std::to_string(line_no) + ": expected \"load,time\"");
    }
  }
  return out;
}

std::string load_function_json(const LoadFunction& lf) {
  json d;
  d["kind"] = to_string(lf.kind());
  switch (lf.kind()) {
    case LoadKind::kQueuing: d["mu"] = lf.mu(); break;
    case LoadKind::kBatch: d["s"] = lf.speed(); break;
    case LoadKind::kAffine:
      d["a"] = lf.intercept();
      d["b"] = lf.gradient();
      break;
    case LoadKind::kEmpirical: {
      json points = json::array();
      for (const Sample& s : lf.points()) points.push_back({s.load, s.time});
      d["points"] = std::move(points);
      break;
    }
  }
  d["l_max"] = lf.l_max();
  return d.dump();
}

std::string central_trace_csv(const std::vector<CentralTracePoint>& trace) {
  std::string out = "iteration,objective,max_delta,bound_e,moved_load,pair_i,pair_j\n";
  for (const auto& p : trace) {
    out += fmt::format("{},{},{},{},{},", p.iteration, format_double(p.objective),
                       format_double(p.max_delta), format_double(p.bound_e),
                       format_double(p.moved_load));
    if (p.has_pair) out += fmt::format("{},{}", p.pair_i, p.pair_j);
    else out += ",";
    out += "\n";
  }
  return out;
}

std::string gossip_trace_csv(const std::vector<GossipTracePoint>& trace) {
  std::string out = "round,initiator,partner,objective,impr,estimate_bound\n";
  for (const auto& p : trace) {
    out += fmt::format("{},", p.round);
    if (p.has_pair) out += fmt::format("{},{},", p.initiator, p.partner);
    else out += ",,";
    out += format_double(p.objective) + "," + format_double(p.impr) + ",";
    if (p.estimate) out += format_double(p.estimate->bound);
    out += "\n";
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorKind::kIoError, "failed writing " + path);
}

}  // namespace geobalance
