#include "blocknav/harness/report.hpp"

#include "blocknav/errors.hpp"
#include "blocknav/harness/train.hpp"
#include "blocknav/world_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace blocknav::harness {

using nlohmann::json;

namespace {

std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num3(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string xml_escape(std::string_view s) {
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

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc{} && ptr == s.data() + s.size();
}

} // namespace

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const MetricsRow& r : rows) {
    if (r.run_id.find_first_of(",\n") != std::string::npos || r.split.find_first_of(",\n") != std::string::npos) {
      throw Error("metrics row '" + r.run_id + "' contains a comma or newline");
    }
    out += r.run_id + ',' + r.split + ',' + num17(r.tc) + ',' + num17(r.spd) + ',' + num17(r.sed) + ',' +
           std::to_string(r.seed) + ',' + r.config_hash + '\n';
  }
  return out;
}

std::vector<MetricsRow> parse_metrics_csv(std::string_view text, std::string_view source) {
  std::vector<MetricsRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto fail = [&](const std::string& reason) {
    throw SchemaViolation(std::string(source) + ":" + std::to_string(line_no) + ": " + reason);
  };
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kMetricsHeader) fail("expected header '" + std::string(kMetricsHeader) + "'");
      continue;
    }
    if (line.empty()) fail("empty line");
    const auto f = split_fields(line);
    if (f.size() != 7) fail("expected 7 fields, got " + std::to_string(f.size()));
    MetricsRow r;
    r.run_id = f[0];
    r.split = f[1];
    if (!parse_number(f[2], r.tc)) fail("tc is not a number");
    if (!parse_number(f[3], r.spd)) fail("spd is not a number");
    if (!parse_number(f[4], r.sed)) fail("sed is not a number");
    if (!parse_number(f[5], r.seed)) fail("seed is not an unsigned integer");
    r.config_hash = f[6];
    rows.push_back(std::move(r));
  }
  if (line_no == 0) {
    line_no = 1;
    fail("missing header");
  }
  return rows;
}

std::vector<MetricsRow> metrics_rows(const SuiteResult& suite) {
  std::vector<MetricsRow> rows;
  for (const RunOutcome& r : suite.runs) {
    if (!r.result) continue;
    rows.push_back({r.run_id, suite.split, r.result->tc, r.result->spd, r.result->sed, r.seed, r.config_hash});
  }
  return rows;
}

std::string episodes_csv(const EvalResult& result) {
  std::string out = "id,stop,goal,success,spd,sed,forced_stop,instruction_length,intersections\n";
  for (const EpisodeRow& r : result.rows) {
    out += r.id + ',' + std::to_string(r.stop) + ',' + std::to_string(r.goal) + ',' + (r.success ? "1" : "0") +
           ',' + num17(r.spd) + ',' + num17(r.sed) + ',' + (r.forced_stop ? "1" : "0") + ',' +
           std::to_string(r.instruction_length) + ',' + std::to_string(r.intersections) + '\n';
  }
  return out;
}

std::string markdown_table(const SuiteResult& suite) {
  const Grid& g = suite.grid;
  std::ostringstream out;
  out << "### " << g.title << " (" << suite.split << ")\n\n| ID |";
  if (!g.label_column.empty()) out << ' ' << g.label_column << " |";
  for (const auto& m : g.mark_columns) out << ' ' << m << " |";
  out << " TC | SPD | SED x100 | runs |\n|---|";
  if (!g.label_column.empty()) out << "---|";
  for (std::size_t i = 0; i < g.mark_columns.size(); ++i) out << ":-:|";
  out << "---|---|---|---|\n";
  auto cell = [](const Stat& s, int digits) { return fixed(s.mean, digits) + " ± " + fixed(s.std, digits); };
  for (std::size_t v = 0; v < g.variants.size(); ++v) {
    const Variant& var = g.variants[v];
    const VariantSummary& sum = suite.summary.at(v);
    out << "| " << v + 1 << " |";
    if (!g.label_column.empty()) out << ' ' << var.label << (var.is_default ? " (default)" : "") << " |";
    for (std::size_t m = 0; m < g.mark_columns.size(); ++m) {
      out << ' ' << (m < var.marks.size() && var.marks[m] ? "✓" : "") << " |";
    }
    if (sum.completed == 0) {
      out << " - | - | - |";
    } else {
      out << ' ' << cell(sum.tc, 1) << " | " << cell(sum.spd, 2) << " | " << cell(Stat{sum.sed.mean * 100.0, sum.sed.std * 100.0}, 1) << " |";
    }
    out << ' ' << sum.completed << '/' << sum.completed + sum.failed << " |\n";
  }
  bool header = false;
  for (const RunOutcome& r : suite.runs) {
    if (r.result) continue;
    if (!header) {
      out << "\nFailed runs:\n\n";
      header = true;
    }
    out << "- " << r.run_id << ": " << r.error << '\n';
  }
  return out.str();
}

std::vector<Bucket> quartile_buckets(const std::vector<EpisodeRow>& rows, Complexity measure) {
  auto value_of = [measure](const EpisodeRow& r) {
    return static_cast<double>(measure == Complexity::InstructionLength ? r.instruction_length : r.intersections);
  };
  std::vector<Bucket> out;
  if (rows.empty()) return out;
  std::vector<double> values;
  for (const auto& r : rows) values.push_back(value_of(r));
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::vector<double> edges{values.front()};
  for (std::size_t k = 1; k <= 3; ++k) {
    const std::size_t rank = (k * n + 3) / 4; // ceil(k n / 4), nearest-rank quartile
    edges.push_back(values[std::max<std::size_t>(rank, 1) - 1]);
  }
  edges.push_back(values.back());
  for (std::size_t b = 0; b < 4; ++b) {
    Bucket bucket{edges[b], edges[b + 1], 0, 0.0};
    for (const auto& r : rows) {
      const double x = value_of(r);
      const bool inside = b == 0 ? (x >= bucket.lo && x <= bucket.hi) : (x > bucket.lo && x <= bucket.hi);
      if (!inside) continue;
      ++bucket.count;
      bucket.mean_sed += r.sed;
    }
    if (bucket.count == 0) continue;
    bucket.mean_sed /= static_cast<double>(bucket.count);
    out.push_back(bucket);
  }
  return out;
}

std::string svg_line_plot(const LinePlot& plot) {
  constexpr double W = 480, H = 320, L = 60, R = 20, T = 40, B = 50;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool any = false;
  for (const auto& s : plot.series) {
    for (const auto& [x, y] : s.points) {
      if (!any) {
        x0 = x1 = x;
        y0 = y1 = y;
        any = true;
      }
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  y0 = std::min(y0, 0.0);
  if (x1 - x0 < 1e-12) {
    x0 -= 1;
    x1 += 1;
  }
  if (y1 - y0 < 1e-12) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
      << W << ' ' << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(plot.title)
      << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << xml_escape(plot.x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << H / 2 << ")\">" << xml_escape(plot.y_label) << "</text>\n";
  for (double y : {y0, y1}) {
    out << "<text x=\"" << L - 6 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << num3(y)
        << "</text>\n";
  }
  for (double x : {x0, x1}) {
    out << "<text x=\"" << px(x) << "\" y=\"" << H - B + 14 << "\" text-anchor=\"middle\" font-size=\"10\">"
        << num3(x) << "</text>\n";
  }
  for (std::size_t i = 0; i < plot.series.size(); ++i) {
    const Series& s = plot.series[i];
    const char* color = colors[i % 5];
    out << "<g class=\"series\" data-name=\"" << xml_escape(s.name) << "\">\n";
    if (s.points.size() > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t k = 0; k < s.points.size(); ++k) {
        out << (k ? " " : "") << num3(px(s.points[k].first)) << ',' << num3(py(s.points[k].second));
      }
      out << "\"/>\n";
    }
    for (const auto& [x, y] : s.points) {
      out << "<circle class=\"point\" cx=\"" << num3(px(x)) << "\" cy=\"" << num3(py(y)) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    }
    out << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (i + 1) << "\" text-anchor=\"end\" font-size=\"11\" fill=\""
        << color << "\">" << xml_escape(s.name) << "</text>\n</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::vector<std::pair<std::string, std::string>> complexity_plots(const EvalResult& result) {
  std::vector<std::pair<std::string, std::string>> out;
  const std::pair<Complexity, const char*> measures[] = {
      {Complexity::InstructionLength, "instruction_length"}, {Complexity::Intersections, "intersections"}};
  for (const auto& [measure, name] : measures) {
    Series s{"SED", {}};
    for (const Bucket& b : quartile_buckets(result.rows, measure)) s.points.emplace_back(b.hi, b.mean_sed);
    LinePlot plot{std::string("SED by ") + (measure == Complexity::InstructionLength ? "instruction length"
                                                                                       : "intersections on path"),
                  std::string(measure == Complexity::InstructionLength ? "tokens" : "intersections") +
                      " (quartile bucket upper edge)",
                  "mean SED",
                  {s}};
    out.emplace_back(std::string("sed_vs_") + name + ".svg", svg_line_plot(plot));
  }
  return out;
}

json trace_json(const agent::EpisodeTrace& trace, const InstructionRecord& record) {
  json steps = json::array();
  json pred = json::array();
  json label = json::array();
  bool has_relevance = !trace.steps.empty();
  for (const auto& s : trace.steps) {
    json scores = json::array();
    for (double v : s.scores) scores.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    steps.push_back(json{{"t", s.t},
                         {"node", s.node},
                         {"heading", s.heading},
                         {"action", std::string(to_string(s.action))},
                         {"scores", scores},
                         {"e_p", s.e_p},
                         {"e_p_label", s.e_p_label},
                         {"g_c", s.g_c},
                         {"g_l", s.g_l},
                         {"relevance", s.relevance}});
    pred.push_back(s.e_p);
    label.push_back(s.e_p_label);
    if (s.relevance.empty()) has_relevance = false;
  }
  json heatmap = nullptr;
  if (has_relevance) {
    json values = json::array();
    for (const auto& s : trace.steps) values.push_back(s.relevance);
    heatmap = json{{"rows", trace.steps.size()}, {"cols", record.sentence_count()}, {"values", values}};
  }
  return json{{"episode_id", trace.episode_id},
              {"path", trace.path},
              {"gold_path", record.gold_path},
              {"forced_stop", trace.forced_stop},
              {"steps", steps},
              {"progress", {{"predicted", pred}, {"label", label}}},
              {"relevance_heatmap", heatmap}};
}

std::string trace_svg(const agent::EpisodeTrace& trace, const InstructionRecord& record) {
  const std::size_t T = trace.steps.size();
  const std::size_t S = record.sentence_count();
  const bool heat = T > 0 && !trace.steps.front().relevance.empty();
  constexpr double W = 640, P = 50, PH = 200;
  const double cell_h = 18;
  const double H = P + PH + 40 + (heat ? S * cell_h + 40 : 0);
  const double step_w = T > 1 ? (W - 2 * P) / static_cast<double>(T - 1) : 0.0;
  auto px = [&](std::size_t t) { return P + (T > 1 ? step_w * static_cast<double>(t) : (W - 2 * P) / 2); };
  auto py = [&](double v) { return P + PH - v * PH; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
      << W << ' ' << H << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">Block progress, episode "
      << xml_escape(trace.episode_id) << "</text>\n";
  out << "<rect x=\"" << P << "\" y=\"" << P << "\" width=\"" << W - 2 * P << "\" height=\"" << PH
      << "\" fill=\"none\" stroke=\"#999\"/>\n";
  const std::pair<const char*, const char*> lines[] = {{"label", "#2ca02c"}, {"predicted", "#9467bd"}};
  for (const auto& [name, color] : lines) {
    const bool is_label = std::string_view(name) == "label";
    out << "<g class=\"" << name << "\">\n";
    if (T > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
      for (std::size_t t = 0; t < T; ++t) {
        const double v = is_label ? trace.steps[t].e_p_label : trace.steps[t].e_p;
        out << (t ? " " : "") << num3(px(t)) << ',' << num3(py(v));
      }
      out << "\"/>\n";
    }
    for (std::size_t t = 0; t < T; ++t) {
      const double v = is_label ? trace.steps[t].e_p_label : trace.steps[t].e_p;
      out << "<circle class=\"point\" cx=\"" << num3(px(t)) << "\" cy=\"" << num3(py(v)) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    }
    out << "</g>\n";
  }
  out << "<text x=\"" << W - P << "\" y=\"" << P - 6 << "\" text-anchor=\"end\" font-size=\"11\">"
      << "<tspan fill=\"#2ca02c\">label</tspan> <tspan fill=\"#9467bd\">predicted</tspan></text>\n";

  if (heat) {
    const double top = P + PH + 40;
    const double cw = (W - 2 * P) / static_cast<double>(T);
    out << "<text x=\"" << P << "\" y=\"" << top - 8 << "\" font-size=\"12\">Sentence relevance (rows: sentences, "
        << "columns: steps)</text>\n<g class=\"heatmap\" data-rows=\"" << T << "\" data-cols=\"" << S << "\">\n";
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t s = 0; s < S && s < trace.steps[t].relevance.size(); ++s) {
        const double v = std::clamp(trace.steps[t].relevance[s], 0.0, 1.0);
        const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
        out << "<rect class=\"cell\" x=\"" << num3(P + cw * static_cast<double>(t)) << "\" y=\""
            << num3(top + cell_h * static_cast<double>(s)) << "\" width=\"" << num3(cw) << "\" height=\"" << cell_h
            << "\" fill=\"rgb(255," << shade << ',' << shade << ")\"/>\n";
      }
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_run(const std::filesystem::path& dir, const TrainConfig& config, const TrainResult& trained,
               const EvalResult& eval, const MetricsRow& row) {
  write_file(dir / "config.json", to_json(config).dump(2) + "\n");
  std::string log;
  for (const EpochLog& e : trained.log) log += to_json(e).dump() + "\n";
  write_file(dir / "log.jsonl", log);
  save_model(dir / "checkpoint.bin", trained.model);
  write_file(dir / "metrics.csv", metrics_csv({row}));
  write_file(dir / "episodes.csv", episodes_csv(eval));
  for (const auto& [name, svg] : complexity_plots(eval)) write_file(dir / "plots" / name, svg);
}

} // namespace blocknav::harness
