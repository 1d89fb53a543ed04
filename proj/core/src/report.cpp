#include "vivecap/report.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace vivecap::report {
namespace {

constexpr double kCanvas = 520.0;
constexpr double kCentre = kCanvas / 2.0;
constexpr std::array<const char*, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Row {
  std::string name;
  std::vector<std::optional<double>> values;
};

void render_grid(const std::string& title, const std::vector<std::string>& labels, const std::vector<Row>& rows,
                 std::string& md, std::string& csv) {
  md += "### " + title + "\n\n| Metric |";
  for (const auto& l : labels) md += " " + md_cell(l) + " |";
  md += "\n|---|";
  for (std::size_t i = 0; i < labels.size(); ++i) md += "---:|";
  md += "\n";
  csv += "metric";
  for (const auto& l : labels) csv += "," + csv_cell(l);
  csv += "\n";
  for (const auto& r : rows) {
    md += "| " + r.name + " |";
    csv += csv_cell(r.name);
    for (const auto& v : r.values) {
      md += v ? fmt::format(" {:.2f} |", *v) : std::string(" - |");
      csv += v ? fmt::format(",{}", *v) : std::string(",");
    }
    md += "\n";
    csv += "\n";
  }
  md += "\n";
}

std::array<double, 2> axis_point(std::size_t axis, double radius) {
  const double theta = 2.0 * std::numbers::pi * static_cast<double>(axis) / static_cast<double>(kRadarAxes.size());
  return {kCentre + radius * std::sin(theta), kCentre - radius * std::cos(theta)};
}

std::string coord(double v) {
  std::string s = fmt::format("{:.3f}", v);
  return s == "-0.000" ? "0.000" : s;
}

}  // namespace

JudgedMeans mean_scorecards(const std::vector<vlm::Scorecard>& cards) {
  if (cards.empty()) throw Error("cannot average an empty list of scorecards");
  JudgedMeans m;
  for (const auto& c : cards) {
    m.scene += c.scene;
    m.background += c.background;
    m.characters += c.characters;
    m.salient_objects += c.salient_objects;
  }
  const double n = static_cast<double>(cards.size());
  m.scene /= n;
  m.background /= n;
  m.characters /= n;
  m.salient_objects /= n;
  m.n = cards.size();
  return m;
}

Tables emit_aggregate_tables(const std::vector<Variant>& variants) {
  if (variants.empty()) throw Error("tables need at least one variant");
  std::vector<std::string> labels;
  for (const auto& v : variants) labels.push_back(v.label);

  std::vector<Row> grounded = {{"Precision", {}}, {"Recall", {}}, {"Macro F1", {}}, {"# Mistakes", {}}};
  std::vector<Row> judged = {
      {"Overall", {}}, {"Salient Objects", {}}, {"Characters", {}}, {"Background", {}}, {"Scene", {}}};
  for (const auto& v : variants) {
    const auto& g = v.grounded;
    grounded[0].values.push_back(g ? std::optional(g->mean_precision) : std::nullopt);
    grounded[1].values.push_back(g ? std::optional(g->mean_recall) : std::nullopt);
    grounded[2].values.push_back(g ? std::optional(g->macro_f1) : std::nullopt);
    grounded[3].values.push_back(g ? std::optional(g->mean_mistakes) : std::nullopt);
    const auto& j = v.judged;
    judged[0].values.push_back(j ? std::optional(j->overall()) : std::nullopt);
    judged[1].values.push_back(j ? std::optional(j->salient_objects) : std::nullopt);
    judged[2].values.push_back(j ? std::optional(j->characters) : std::nullopt);
    judged[3].values.push_back(j ? std::optional(j->background) : std::nullopt);
    judged[4].values.push_back(j ? std::optional(j->scene) : std::nullopt);
  }
  Tables t;
  render_grid("Instance-grounded metrics", labels, grounded, t.markdown, t.grounded_csv);
  render_grid("Judge scores (/10)", labels, judged, t.markdown, t.judged_csv);
  return t;
}

void RadarData::validate() const {
  for (const auto& s : series) {
    for (auto axis : kRadarAxes) {
      auto it = s.scores.find(std::string(axis));
      if (it == s.scores.end()) throw Error("radar series " + s.label + " lacks axis " + std::string(axis));
      if (!(it->second >= 1.0 && it->second <= 10.0))
        throw Error(fmt::format("radar series {} has {} = {} outside [1, 10]", s.label, axis, it->second));
    }
    if (s.scores.size() != kRadarAxes.size()) throw Error("radar series " + s.label + " has unknown axes");
  }
}

std::string render_radar_svg(const RadarData& data) {
  data.validate();
  std::string svg = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<desc>Judge scores per section. Radial scale is linear: 1 at the centre, 10 on the outer ring.</desc>\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kCanvas, kCanvas + 40.0 + 20.0 * static_cast<double>(data.series.size()));
  svg += "<g id=\"grid\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\">\n";
  for (int score = 2; score <= 10; ++score)
    svg += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\"/>\n", coord(kCentre), coord(kCentre),
                       coord(kRadarRadius * (score - 1) / 9.0));
  for (std::size_t a = 0; a < kRadarAxes.size(); ++a) {
    auto p = axis_point(a, kRadarRadius);
    svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\"/>\n", coord(kCentre), coord(kCentre),
                       coord(p[0]), coord(p[1]));
  }
  svg += "</g>\n<g id=\"axes\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">\n";
  for (std::size_t a = 0; a < kRadarAxes.size(); ++a) {
    auto p = axis_point(a, kRadarRadius + 22.0);
    svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", coord(p[0]), coord(p[1] + 4.0),
                       xml_escape(std::string(kRadarAxes[a])));
  }
  svg += "</g>\n<g id=\"series\" stroke-width=\"2\" fill-opacity=\"0.15\">\n";
  for (std::size_t i = 0; i < data.series.size(); ++i) {
    const auto& s = data.series[i];
    std::string points;
    for (std::size_t a = 0; a < kRadarAxes.size(); ++a) {
      const double score = s.scores.at(std::string(kRadarAxes[a]));
      auto p = axis_point(a, kRadarRadius * (score - 1.0) / 9.0);
      if (!points.empty()) points += ' ';
      points += coord(p[0]) + "," + coord(p[1]);
    }
    const char* colour = kPalette[i % kPalette.size()];
    svg += fmt::format("<polygon points=\"{}\" stroke=\"{}\" fill=\"{}\"><title>{}</title></polygon>\n", points,
                       colour, colour, xml_escape(s.label));
  }
  svg += "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"13\">\n";
  for (std::size_t i = 0; i < data.series.size(); ++i) {
    const double y = kCanvas + 20.0 * static_cast<double>(i);
    svg += fmt::format("<rect x=\"20\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n", coord(y),
                       kPalette[i % kPalette.size()]);
    svg += fmt::format("<text x=\"40\" y=\"{}\">{}</text>\n", coord(y + 11.0), xml_escape(data.series[i].label));
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

void emit_radar_svg(const RadarData& data, const std::filesystem::path& path) {
  write_text_file(path, render_radar_svg(data));
}

std::string distribution_chart_json(const std::map<std::string, std::size_t>& dist) {
  std::size_t total = 0;
  for (const auto& [name, count] : dist) total += count;
  nlohmann::ordered_json j;
  j["total"] = total;
  auto& series = j["series"] = nlohmann::ordered_json::array();
  for (const auto& [name, count] : dist)
    series.push_back({{"name", name},
                      {"count", count},
                      {"share", total ? 100.0 * static_cast<double>(count) / static_cast<double>(total) : 0.0}});
  return j.dump(2) + "\n";
}

void emit_distribution_chart_data(const std::map<std::string, std::size_t>& dist,
                                  const std::filesystem::path& path) {
  write_text_file(path, distribution_chart_json(dist));
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot write file");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError(path.string(), "failed writing file");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace vivecap::report
