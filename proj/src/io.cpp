#include "misre/io.hpp"

#include "misre/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace misre {

namespace {

using nlohmann::json;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::vector<double> parse_csv_row(const std::string& line, int line_no) {
  std::vector<double> values;
  size_t pos = 0;
  while (pos <= line.size()) {
    size_t comma = line.find(',', pos);
    if (comma == std::string::npos) comma = line.size();
    std::string field = line.substr(pos, comma - pos);
    const size_t a = field.find_first_not_of(" \t\r");
    if (a == std::string::npos) throw ParseError("empty field", line_no);
    const size_t b = field.find_last_not_of(" \t\r");
    field = field.substr(a, b - a + 1);
    double v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
      throw ParseError("malformed number '" + field + "'", line_no);
    values.push_back(v);
    if (comma == line.size()) break;
    pos = comma + 1;
  }
  return values;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::vector<Eigen::VectorXd> read_csv_points(const std::filesystem::path& path,
                                             int dim) {
  std::ifstream in = open_input(path);
  std::vector<Eigen::VectorXd> points;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line) || line[0] == '#') continue;
    const std::vector<double> vals = parse_csv_row(line, line_no);
    if (static_cast<int>(vals.size()) != dim)
      throw ParseError("expected " + std::to_string(dim) + " fields, got " +
                           std::to_string(vals.size()),
                       line_no);
    points.push_back(Eigen::Map<const Eigen::VectorXd>(vals.data(), dim));
  }
  return points;
}

std::vector<Eigen::VectorXd> read_ply_points(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  int line_no = 0;
  int vertex_count = -1;
  std::vector<std::string> properties;
  bool in_vertex_element = false;
  bool header_done = false;

  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    return true;
  };

  if (!next() || line.rfind("ply", 0) != 0)
    throw ParseError("missing ply magic", line_no);
  while (next()) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt != "ascii") throw ParseError("only ascii PLY is supported", line_no);
    } else if (tok == "element") {
      std::string name;
      int count;
      ss >> name >> count;
      in_vertex_element = (name == "vertex");
      if (in_vertex_element) vertex_count = count;
    } else if (tok == "property" && in_vertex_element) {
      std::string type, name;
      ss >> type >> name;
      properties.push_back(name);
    } else if (tok == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done || vertex_count < 0)
    throw ParseError("incomplete PLY header", line_no);

  int ix = -1, iy = -1, iz = -1;
  for (size_t i = 0; i < properties.size(); ++i) {
    if (properties[i] == "x") ix = static_cast<int>(i);
    if (properties[i] == "y") iy = static_cast<int>(i);
    if (properties[i] == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0)
    throw ParseError("PLY vertex element lacks x/y/z properties", line_no);

  std::vector<Eigen::VectorXd> points;
  points.reserve(vertex_count);
  for (int v = 0; v < vertex_count; ++v) {
    if (!next()) throw ParseError("unexpected end of PLY vertex list", line_no);
    if (blank(line)) {
      --v;
      continue;
    }
    std::istringstream ss(line);
    std::vector<double> vals;
    double x;
    while (ss >> x) vals.push_back(x);
    if (vals.size() < properties.size())
      throw ParseError("short PLY vertex row", line_no);
    Eigen::Vector3d p(vals[ix], vals[iy], vals[iz]);
    points.push_back(p);
  }
  return points;
}

void write_number(std::ostream& out, double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v,
                                 std::chars_format::general, 17);
  out.write(buf, res.ptr - buf);
}

}  // namespace

std::vector<Eigen::VectorXd> read_points(const std::filesystem::path& path,
                                         int dimensionality) {
  if (dimensionality < 2 || dimensionality > 4)
    throw InvalidInputError("unsupported point dimensionality");
  if (path.extension() == ".ply") {
    if (dimensionality != 3)
      throw InvalidInputError("PLY input is only supported for 3D points");
    return read_ply_points(path);
  }
  return read_csv_points(path, dimensionality);
}

std::vector<Eigen::VectorXd> read_correspondences(const std::filesystem::path& path) {
  return read_csv_points(path, 4);
}

void write_points_csv(const std::filesystem::path& path,
                      std::span<const Eigen::VectorXd> points) {
  std::ofstream out = open_output(path);
  for (const auto& p : points) {
    for (int i = 0; i < p.size(); ++i) {
      if (i) out << ',';
      write_number(out, p(i));
    }
    out << '\n';
  }
}

void write_points_ply(const std::filesystem::path& path,
                      std::span<const Eigen::VectorXd> points) {
  std::ofstream out = open_output(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  for (const auto& p : points) {
    write_number(out, p(0));
    out << ' ';
    write_number(out, p(1));
    out << ' ';
    write_number(out, p(2));
    out << '\n';
  }
}

void write_labels_csv(const std::filesystem::path& path,
                      std::span<const int> labels) {
  std::ofstream out = open_output(path);
  for (int v : labels) out << v << '\n';
}

std::vector<int> read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<int> labels;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    try {
      labels.push_back(std::stoi(line));
    } catch (const std::exception&) {
      throw ParseError("malformed label '" + line + "'", line_no);
    }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Result document
// ---------------------------------------------------------------------------

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

json geometry_to_json(const GeometricParams& g) {
  json out;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LineParams>) {
          out["type"] = "line";
          out["normal"] = {p.normal.x(), p.normal.y()};
          out["offset"] = p.offset;
        } else if constexpr (std::is_same_v<T, PlaneParams>) {
          out["type"] = "plane";
          out["normal"] = {p.normal.x(), p.normal.y(), p.normal.z()};
          out["offset"] = p.offset;
        } else if constexpr (std::is_same_v<T, EllipseParams>) {
          out["type"] = "ellipse";
          out["center"] = {p.center.x(), p.center.y()};
          out["semi_axes"] = {p.semi_major, p.semi_minor};
          out["angle"] = p.angle;
        } else if constexpr (std::is_same_v<T, SphereParams>) {
          out["type"] = "sphere";
          out["center"] = {p.center.x(), p.center.y(), p.center.z()};
          out["radius"] = p.radius;
        } else if constexpr (std::is_same_v<T, CylinderParams>) {
          out["type"] = "cylinder";
          out["axis_point"] = {p.axis_point.x(), p.axis_point.y(), p.axis_point.z()};
          out["axis_dir"] = {p.axis_dir.x(), p.axis_dir.y(), p.axis_dir.z()};
          out["radius"] = p.radius;
        } else if constexpr (std::is_same_v<T, MatrixParams>) {
          out["type"] = "matrix";
          json rows = json::array();
          for (int r = 0; r < 3; ++r)
            rows.push_back({p.matrix(r, 0), p.matrix(r, 1), p.matrix(r, 2)});
          out["matrix"] = rows;
        }
      },
      g);
  return out;
}

}  // namespace

json result_to_json(const EstimationResult& result,
                    const EstimationConfig& config) {
  json doc;
  doc["schema_version"] = kResultSchemaVersion;
  doc["model"] = to_string(config.model);
  doc["config"] = {{"trials", config.trials},
                   {"epsilon", config.epsilon},
                   {"seed", config.seed}};

  json structures = json::array();
  for (size_t rank = 0; rank < result.structures.size(); ++rank) {
    const Structure& s = result.structures[rank];
    json js;
    js["rank"] = rank + 1;
    js["strength"] = s.strength;
    js["scale"] = s.sigma;
    js["inlier_count"] = s.inlier_indices.size();
    js["theta"] = vec_to_json(s.theta);
    js["alpha"] = s.alpha;
    js["sigma_exact"] = s.sigma_exact;
    js["tls_skipped"] = s.tls_skipped;
    js["constraint_fallback"] = s.constraint_fallback;
    js["geometry"] = s.geometry ? geometry_to_json(*s.geometry) : json(nullptr);
    js["inlier_indices"] = s.inlier_indices;
    structures.push_back(std::move(js));
  }
  doc["structures"] = std::move(structures);
  doc["residual_indices"] = result.residual_indices;

  json iterations = json::array();
  for (const auto& it : result.iterations) {
    json ji;
    ji["remaining"] = it.remaining;
    ji["n_epsilon"] = it.n_epsilon;
    ji["winner_score"] = it.winner_score;
    ji["sigma_hat"] = it.scale.sigma;
    ji["sigma_effective"] = it.sigma_effective;
    ji["scale_status"] =
        it.scale.status == ScaleStatus::Normal ? "normal" : "no-expansion";
    ji["region_of_interest"] = {it.scale.eta_start, it.scale.eta_end};
    json recs = json::array();
    for (const auto& r : it.scale.records)
      recs.push_back({{"eta", r.eta},
                      {"delta", r.delta},
                      {"k_t", r.k_t},
                      {"extent", r.extent}});
    ji["expansion"] = std::move(recs);
    ji["refine_fell_back"] = it.refine_fell_back;
    ji["refine_kde_height"] = it.refine_kde_height;
    ji["inliers_classified"] = it.inliers_classified;
    ji["failed"] = it.failed;
    if (it.failed) ji["failure_reason"] = it.failure_reason;
    ji["removed_on_failure"] = it.removed_on_failure;
    ji["rejections"] = {{"rank_deficient", it.rejections.rank_deficient},
                        {"constraint", it.rejections.constraint},
                        {"budget_exhausted", it.rejections.budget_exhausted}};
    iterations.push_back(std::move(ji));
  }
  doc["diagnostics"] = {{"iterations", std::move(iterations)}};
  return doc;
}

void write_result(const std::filesystem::path& path,
                  const EstimationResult& result,
                  const EstimationConfig& config) {
  std::ofstream out = open_output(path);
  out << result_to_json(result, config).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// SVG rendering
// ---------------------------------------------------------------------------

namespace {

const char* kPalette[] = {"#d62728", "#2ca02c", "#1f77b4", "#17becf",
                          "#bcbd22", "#9467bd", "#e377c2", "#8c564b",
                          "#ff7f0e", "#7f7f7f"};

std::string color_for(int rank) {
  return kPalette[rank % (sizeof(kPalette) / sizeof(kPalette[0]))];
}

void svg_points(std::ostream& out, std::span<const Eigen::VectorXd> points,
                std::span<const int> assignment, int coord_x, int coord_y,
                double off_x, double off_y) {
  out << "  <g fill=\"#c0c0c0\">\n";
  for (size_t i = 0; i < points.size(); ++i)
    if (assignment[i] < 0)
      out << "    <circle cx=\"" << off_x + points[i](coord_x) << "\" cy=\""
          << off_y + points[i](coord_y) << "\" r=\"1.5\"/>\n";
  out << "  </g>\n";
}

void svg_structure_points(std::ostream& out,
                          std::span<const Eigen::VectorXd> points,
                          const Structure& s, int rank, int coord_x, int coord_y,
                          double off_x, double off_y) {
  out << "  <g fill=\"" << color_for(rank) << "\" class=\"structure-" << rank + 1
      << "\">\n";
  for (int idx : s.inlier_indices)
    out << "    <circle cx=\"" << off_x + points[idx](coord_x) << "\" cy=\""
        << off_y + points[idx](coord_y) << "\" r=\"1.8\"/>\n";
  out << "  </g>\n";
}

}  // namespace

void render_svg(const std::filesystem::path& path,
                std::span<const Eigen::VectorXd> points,
                const EstimationResult& result) {
  if (points.empty()) throw InvalidInputError("nothing to render");
  const int dim = static_cast<int>(points[0].size());

  std::vector<int> assignment(points.size(), -1);
  for (size_t rank = 0; rank < result.structures.size(); ++rank)
    for (int idx : result.structures[rank].inlier_indices)
      if (assignment[idx] < 0) assignment[idx] = static_cast<int>(rank);

  Eigen::VectorXd hi = points[0];
  for (const auto& p : points) hi = hi.cwiseMax(p);

  std::ofstream out = open_output(path);
  out.precision(10);

  if (dim == 2 || dim == 4) {
    const double w = std::ceil(hi(0)), h = std::ceil(hi(1));
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << " "
        << h << "\">\n";
    svg_points(out, points, assignment, 0, 1, 0, 0);
    for (size_t rank = 0; rank < result.structures.size(); ++rank) {
      svg_structure_points(out, points, result.structures[rank],
                           static_cast<int>(rank), 0, 1, 0, 0);
      if (dim == 4) {
        // correspondence displacement strokes
        out << "  <g stroke=\"" << color_for(static_cast<int>(rank))
            << "\" stroke-width=\"0.5\" opacity=\"0.5\">\n";
        for (int idx : result.structures[rank].inlier_indices)
          out << "    <line x1=\"" << points[idx](0) << "\" y1=\""
              << points[idx](1) << "\" x2=\"" << points[idx](2) << "\" y2=\""
              << points[idx](3) << "\"/>\n";
        out << "  </g>\n";
      }
    }
    out << "</svg>\n";
    return;
  }

  // 3D: three orthographic panels (xy, xz, yz) side by side
  const double w = std::ceil(hi(0)), h = std::ceil(hi(1)), d = std::ceil(hi(2));
  const double panel_h = std::max({h, d});
  const double gap = 0.05 * w + 10;
  const double total_w = w + gap + w + gap + h;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << total_w
      << " " << panel_h << "\">\n";
  const int axes[3][2] = {{0, 1}, {0, 2}, {1, 2}};
  double off = 0;
  for (int panel = 0; panel < 3; ++panel) {
    out << " <g class=\"panel-" << panel << "\">\n";
    svg_points(out, points, assignment, axes[panel][0], axes[panel][1], off, 0);
    for (size_t rank = 0; rank < result.structures.size(); ++rank)
      svg_structure_points(out, points, result.structures[rank],
                           static_cast<int>(rank), axes[panel][0],
                           axes[panel][1], off, 0);
    out << " </g>\n";
    off += (panel == 0 ? w : (panel == 1 ? w : h)) + gap;
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Scenario serialization
// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

}  // namespace

json scenario_to_json(const ScenarioSpec& spec) {
  json doc;
  doc["region"] = vec_to_json(spec.region);
  doc["outliers"] = spec.outliers;
  doc["noise_mode"] =
      spec.noise_mode == NoiseMode::Default ? "default" : "ambient";
  json models = json::array();
  for (const auto& m : spec.models) {
    json jm;
    std::visit(
        [&](const auto& shape) {
          using T = std::decay_t<decltype(shape)>;
          if constexpr (std::is_same_v<T, LineSegment2d>) {
            jm["type"] = "line2d";
            jm["from"] = {shape.from.x(), shape.from.y()};
            jm["to"] = {shape.to.x(), shape.to.y()};
          } else if constexpr (std::is_same_v<T, EllipseShape>) {
            jm["type"] = "ellipse2d";
            jm["center"] = {shape.center.x(), shape.center.y()};
            jm["axes"] = {shape.semi_major, shape.semi_minor};
            jm["angle_deg"] = shape.angle_rad * 180.0 / M_PI;
          } else if constexpr (std::is_same_v<T, PlanePatch>) {
            jm["type"] = "plane3d";
            jm["origin"] = {shape.origin.x(), shape.origin.y(), shape.origin.z()};
            jm["u"] = {shape.u.x(), shape.u.y(), shape.u.z()};
            jm["v"] = {shape.v.x(), shape.v.y(), shape.v.z()};
          } else if constexpr (std::is_same_v<T, SphereShape>) {
            jm["type"] = "sphere3d";
            jm["center"] = {shape.center.x(), shape.center.y(), shape.center.z()};
            jm["radius"] = shape.radius;
          } else if constexpr (std::is_same_v<T, CylinderShape>) {
            jm["type"] = "cylinder3d";
            jm["axis_point"] = {shape.axis_point.x(), shape.axis_point.y(),
                                shape.axis_point.z()};
            jm["axis_dir"] = {shape.axis_dir.x(), shape.axis_dir.y(),
                              shape.axis_dir.z()};
            jm["radius"] = shape.radius;
            jm["half_length"] = shape.half_length;
          }
        },
        m.shape);
    jm["inliers"] = m.inliers;
    jm["sigma"] = m.sigma_g;
    models.push_back(std::move(jm));
  }
  doc["models"] = std::move(models);
  return doc;
}

ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec spec;
  spec.region = vec_from_json(j.at("region"));
  spec.outliers = j.value("outliers", 0);
  const std::string mode = j.value("noise_mode", "default");
  if (mode == "default")
    spec.noise_mode = NoiseMode::Default;
  else if (mode == "ambient")
    spec.noise_mode = NoiseMode::Ambient;
  else
    throw InvalidInputError("unknown noise_mode: " + mode);

  for (const auto& jm : j.value("models", json::array())) {
    PlantedModel pm;
    pm.inliers = jm.at("inliers").get<int>();
    pm.sigma_g = jm.at("sigma").get<double>();
    const std::string type = jm.at("type").get<std::string>();
    if (type == "line2d") {
      LineSegment2d s;
      s.from = vec_from_json(jm.at("from"));
      s.to = vec_from_json(jm.at("to"));
      pm.shape = s;
    } else if (type == "ellipse2d") {
      EllipseShape s;
      s.center = vec_from_json(jm.at("center"));
      s.semi_major = jm.at("axes")[0].get<double>();
      s.semi_minor = jm.at("axes")[1].get<double>();
      s.angle_rad = jm.value("angle_deg", 0.0) * M_PI / 180.0;
      pm.shape = s;
    } else if (type == "plane3d") {
      PlanePatch s;
      s.origin = vec_from_json(jm.at("origin"));
      s.u = vec_from_json(jm.at("u"));
      s.v = vec_from_json(jm.at("v"));
      pm.shape = s;
    } else if (type == "sphere3d") {
      SphereShape s;
      s.center = vec_from_json(jm.at("center"));
      s.radius = jm.at("radius").get<double>();
      pm.shape = s;
    } else if (type == "cylinder3d") {
      CylinderShape s;
      s.axis_point = vec_from_json(jm.at("axis_point"));
      s.axis_dir = vec_from_json(jm.at("axis_dir"));
      s.radius = jm.at("radius").get<double>();
      s.half_length = jm.at("half_length").get<double>();
      pm.shape = s;
    } else {
      throw InvalidInputError("unknown planted model type: " + type);
    }
    spec.models.push_back(std::move(pm));
  }
  return spec;
}

ScenarioSpec read_scenario(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid scenario JSON: ") + e.what(), 0);
  }
  return scenario_from_json(j);
}

}  // namespace misre
