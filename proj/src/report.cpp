#include "gazeworld/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gazeworld {

using nlohmann::json;

json make_report(const std::string& command, const json& resolved_config, double wall_seconds,
                 json results) {
  return json{{"command", command},
              {"version", kVersion},
              {"wall_seconds", wall_seconds},
              {"config", resolved_config},
              {"results", std::move(results)}};
}

void write_json(const json& doc, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("I/O error writing report: " + path.string());
}

namespace {

const char* json_type_name(const json& v) {
  if (v.is_object()) return "object";
  if (v.is_array()) return "array";
  if (v.is_string()) return "string";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_integer() || v.is_number_unsigned()) return "integer";
  if (v.is_number()) return "number";
  return "null";
}

bool type_matches(const json& v, const std::string& want) {
  if (want == "number") return v.is_number();
  if (want == "integer") return v.is_number_integer() || v.is_number_unsigned();
  return want == json_type_name(v);
}

void check(const json& value, const json& schema, const std::string& path,
           std::vector<std::string>& problems) {
  if (schema.contains("oneOf")) {
    for (const auto& option : schema["oneOf"]) {
      std::vector<std::string> sub;
      check(value, option, path, sub);
      if (sub.empty()) return;
    }
    problems.push_back(path + ": matches no oneOf alternative");
    return;
  }
  if (schema.contains("enum")) {
    const auto& allowed = schema["enum"];
    if (std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
      problems.push_back(path + ": value not in enum");
      return;
    }
  }
  if (schema.contains("type")) {
    const std::string want = schema["type"].get<std::string>();
    if (!type_matches(value, want)) {
      problems.push_back(path + ": expected " + want + ", got " + json_type_name(value));
      return;
    }
  }
  if (value.is_object()) {
    if (schema.contains("required")) {
      for (const auto& req : schema["required"]) {
        if (!value.contains(req.get<std::string>())) {
          problems.push_back(path + ": missing required key '" + req.get<std::string>() + "'");
        }
      }
    }
    const json props = schema.value("properties", json::object());
    const bool extra_ok = schema.value("additionalProperties", true);
    for (const auto& [key, sub] : value.items()) {
      if (props.contains(key)) {
        check(sub, props[key], path + "." + key, problems);
      } else if (!extra_ok) {
        problems.push_back(path + "." + key + ": unexpected key");
      }
    }
  } else if (value.is_array() && schema.contains("items")) {
    for (std::size_t i = 0; i < value.size(); ++i) {
      check(value[i], schema["items"], path + "[" + std::to_string(i) + "]", problems);
    }
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::vector<std::string> validate_against_schema(const json& value, const json& schema) {
  std::vector<std::string> problems;
  check(value, schema, "$", problems);
  return problems;
}

std::string loss_curve_svg(const TrainReport& report) {
  constexpr double kW = 720, kH = 420;
  constexpr double kL = 60, kR = 20, kT = 20, kB = 40;  // margins
  const double plot_w = kW - kL - kR;
  const double plot_h = kH - kT - kB;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
      << "\" viewBox=\"0 0 " << kW << " " << kH << "\">\n";
  svg << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";

  if (report.steps.empty()) {
    svg << "<text x=\"20\" y=\"40\" font-family=\"monospace\">no steps recorded</text>\n</svg>\n";
    return svg.str();
  }

  double lo = report.steps[0].l_total, hi = lo;
  for (const auto& s : report.steps) {
    lo = std::min({lo, s.l_ar, s.l_sc, s.l_total});
    hi = std::max({hi, s.l_ar, s.l_sc, s.l_total});
  }
  if (hi == lo) hi = lo + 1.0;
  const double x0 = static_cast<double>(report.steps.front().step);
  const double x1 = static_cast<double>(report.steps.back().step);
  const double span_x = x1 > x0 ? x1 - x0 : 1.0;

  auto px = [&](double step) { return kL + (step - x0) / span_x * plot_w; };
  auto py = [&](double v) { return kT + (hi - v) / (hi - lo) * plot_h; };

  auto polyline = [&](const char* color, auto getter) {
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& s : report.steps) {
      svg << fmt(px(static_cast<double>(s.step))) << "," << fmt(py(getter(s))) << " ";
    }
    svg << "\"/>\n";
  };

  // axes
  svg << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kT + plot_h
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kL << "\" y1=\"" << kT + plot_h << "\" x2=\"" << kL + plot_w
      << "\" y2=\"" << kT + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"4\" y=\"" << kT + 10 << "\" font-family=\"monospace\" font-size=\"11\">"
      << fmt(hi) << "</text>\n";
  svg << "<text x=\"4\" y=\"" << kT + plot_h << "\" font-family=\"monospace\" font-size=\"11\">"
      << fmt(lo) << "</text>\n";
  svg << "<text x=\"" << kL << "\" y=\"" << kH - 12
      << "\" font-family=\"monospace\" font-size=\"11\">step " << fmt(x0) << "</text>\n";
  svg << "<text x=\"" << kL + plot_w - 80 << "\" y=\"" << kH - 12
      << "\" font-family=\"monospace\" font-size=\"11\">step " << fmt(x1) << "</text>\n";

  polyline("#1f77b4", [](const StepLog& s) { return s.l_total; });
  polyline("#d62728", [](const StepLog& s) { return s.l_ar; });
  polyline("#2ca02c", [](const StepLog& s) { return s.l_sc; });

  svg << "<text x=\"" << kL + 8 << "\" y=\"" << kT + 14
      << "\" font-family=\"monospace\" font-size=\"12\" fill=\"#1f77b4\">total</text>\n";
  svg << "<text x=\"" << kL + 60 << "\" y=\"" << kT + 14
      << "\" font-family=\"monospace\" font-size=\"12\" fill=\"#d62728\">ar</text>\n";
  svg << "<text x=\"" << kL + 92 << "\" y=\"" << kT + 14
      << "\" font-family=\"monospace\" font-size=\"12\" fill=\"#2ca02c\">sc</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace gazeworld
