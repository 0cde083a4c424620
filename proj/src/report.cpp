// SPDX-License-Identifier: Apache-2.0
#include "scalaw/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "scalaw/errors.hpp"
#include "scalaw/text.hpp"

namespace scalaw {

namespace {

template <class T>
Json opt(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::string num(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }

}  // namespace

Json to_json(const LawParams& p) {
  Json j;
  j["E"] = p.E;
  j["A"] = p.A;
  j["alpha"] = p.alpha;
  j["B"] = p.B;
  j["beta"] = p.beta;
  return j;
}

Json to_json(const FitConfig& c) {
  Json j;
  j["loss"] = c.loss.is_huber() ? "huber" : "square";
  if (c.loss.is_huber()) j["delta"] = c.loss.delta;
  Json frozen = Json::object();
  if (c.frozen.A) frozen["A"] = *c.frozen.A;
  if (c.frozen.alpha) frozen["alpha"] = *c.frozen.alpha;
  j["frozen"] = frozen;
  j["restarts"] = c.restarts;
  j["max_iterations"] = c.max_iterations;
  j["tolerance"] = c.tolerance;
  j["rng_seed"] = c.rng_seed;
  return j;
}

Json to_json(const FitResult& r) {
  Json j;
  j["params"] = to_json(r.params);
  const auto v = r.params.to_array();
  j["vector"] = Json(std::vector<double>(v.begin(), v.end()));
  j["objective"] = r.objective;
  j["converged"] = r.converged;
  j["restarts_tried"] = r.restarts_tried;
  j["n_points"] = r.n_points;
  j["iterations"] = r.iterations;
  j["best_start"] = r.best_start;
  return j;
}

Json to_json(const SubsetSpec& s) {
  Json j;
  j["num_models"] = opt(s.num_models);
  j["train_fraction_max"] = opt(s.train_fraction_max);
  j["suffix_fraction"] = opt(s.suffix_fraction);
  j["cutoff_tokens"] = opt(s.cutoff_tokens);
  j["max_train_params"] = opt(s.max_train_params);
  j["target_fraction"] = s.target_fraction;
  return j;
}

Json to_json(const EvalReport& r) {
  Json j;
  j["predictor"] = r.predictor;
  j["are"] = r.are;
  j["n_targets"] = r.n_targets;
  j["meaningful_floor"] = r.meaningful_floor;
  Json rows = Json::array();
  for (const auto& t : r.per_target) {
    Json row;
    row["model_id"] = t.model_id;
    row["seed"] = t.seed;
    row["num_params"] = t.num_params;
    row["tokens_seen"] = t.tokens_seen;
    row["observed"] = t.observed;
    row["predicted"] = t.predicted;
    row["relative_error"] = t.relative_error;
    rows.push_back(std::move(row));
  }
  j["per_target"] = std::move(rows);
  return j;
}

Json to_json(const FamilySummary& s) {
  Json j;
  j["family_id"] = s.family_id;
  j["num_runs"] = s.num_runs;
  j["num_sizes"] = s.num_sizes;
  j["num_checkpoints"] = s.num_checkpoints;
  j["params_range"] = {s.min_params, s.max_params};
  j["tokens_range"] = {s.min_tokens, s.max_tokens};
  j["corpora"] = s.corpora;
  return j;
}

Json to_json(const GridReport& g, const std::vector<ContourLevel>& contours,
             const std::vector<Star>& stars) {
  Json j;
  j["construction"] = kGridConstruction;
  j["row_axis"] = axis_name(g.axes.row_axis);
  j["row_values"] = g.axes.row_values;
  j["col_axis"] = axis_name(g.axes.col_axis);
  j["col_values"] = g.axes.col_values;
  j["base_spec"] = to_json(g.axes.base);
  Json cells = Json::array();
  for (const auto& c : g.cells) {
    Json cj;
    cj["row"] = c.row;
    cj["col"] = c.col;
    cj["row_value"] = c.row_value;
    cj["col_value"] = c.col_value;
    cj["spec"] = to_json(c.spec);
    cj["num_models"] = c.num_models;
    cj["scale_up"] = c.scale_up;
    cj["train_flops"] = std::isfinite(c.train_flops) ? Json(c.train_flops) : Json(nullptr);
    cj["are"] = opt(c.are);
    cj["failure"] = c.failure;
    cj["n_train"] = c.n_train;
    cj["n_target"] = c.n_target;
    cj["fit"] = c.fit ? to_json(*c.fit) : Json(nullptr);
    cells.push_back(std::move(cj));
  }
  j["cells"] = std::move(cells);
  Json cl = Json::array();
  for (const auto& level : contours) {
    Json lj;
    lj["level"] = level.level;
    lj["covers_all"] = level.covers_all;
    Json lines = Json::array();
    for (const auto& line : level.polylines) {
      Json pts = Json::array();
      for (const auto& p : line) pts.push_back({p.x, p.y});
      lines.push_back(std::move(pts));
    }
    lj["polylines"] = std::move(lines);
    cl.push_back(std::move(lj));
  }
  j["contours"] = std::move(cl);
  Json sj = Json::array();
  for (const auto& s : stars) sj.push_back({{"threshold", s.threshold}, {"cell", opt(s.cell)}});
  j["stars"] = std::move(sj);
  return j;
}

Json to_json(const std::vector<CvRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    Json j;
    j["held_out_params"] = r.held_out_params;
    j["model_ids"] = r.model_ids;
    j["are"] = opt(r.are);
    j["failure"] = r.failure;
    j["n_train"] = r.n_train;
    j["n_target"] = r.n_target;
    j["fit"] = r.fit ? to_json(*r.fit) : Json(nullptr);
    out.push_back(std::move(j));
  }
  return out;
}

Json to_json(const PcaReport& r, std::span<const std::string> labels) {
  Json j;
  j["standardized"] = r.standardized;
  j["parameter_order"] = {"E", "A", "alpha", "B", "beta"};
  j["mean"] = r.mean;
  j["scale"] = r.scale;
  j["components"] = r.components;
  j["eigenvalues"] = r.eigenvalues;
  j["explained_variance_ratio"] = r.explained_variance_ratio;
  j["labels"] = std::vector<std::string>(labels.begin(), labels.end());
  j["scores"] = r.scores;
  Json aa = Json::array(), bb = Json::array();
  for (auto [a, al] : r.a_alpha) aa.push_back({a, al});
  for (auto [b, be] : r.b_beta) bb.push_back({b, be});
  j["A_alpha"] = std::move(aa);
  j["B_beta"] = std::move(bb);
  return j;
}

LawParams law_params_from_json(const Json& j) {
  try {
    if (j.is_array()) {
      if (j.size() != 5) throw UsageError("parameter array needs 5 entries");
      return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(),
              j[4].get<double>()};
    }
    if (j.contains("params")) return law_params_from_json(j.at("params"));
    return {j.at("E").get<double>(), j.at("A").get<double>(), j.at("alpha").get<double>(),
            j.at("B").get<double>(), j.at("beta").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("invalid law parameter document: ") + e.what());
  }
}

std::string eval_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "predictor,model_id,seed,num_params,tokens_seen,observed,predicted,relative_error\n";
  for (const auto& t : r.per_target)
    os << r.predictor << ',' << csv_escape(t.model_id) << ',' << t.seed << ',' << t.num_params
       << ',' << t.tokens_seen << ',' << num(t.observed) << ',' << num(t.predicted) << ','
       << num(t.relative_error) << '\n';
  return os.str();
}

std::string grid_csv(const GridReport& g) {
  std::ostringstream os;
  os << "row,col," << axis_name(g.axes.row_axis) << ',' << axis_name(g.axes.col_axis)
     << ",train_sizes,scale_up,train_flops,are,converged,failure,n_train,n_target,E,A,alpha,B,"
        "beta\n";
  for (const auto& c : g.cells) {
    os << c.row << ',' << c.col << ',' << num(c.row_value) << ',' << num(c.col_value) << ','
       << c.num_models << ',' << num(c.scale_up) << ',' << num(c.train_flops) << ','
       << (c.are ? num(*c.are) : "") << ',' << (c.fit && c.fit->converged ? 1 : 0) << ','
       << csv_escape(c.failure) << ',' << c.n_train << ',' << c.n_target;
    if (c.fit) {
      for (double v : c.fit->params.to_array()) os << ',' << num(v);
    } else {
      os << ",,,,,";
    }
    os << '\n';
  }
  return os.str();
}

std::string contours_csv(const GridReport& g, const std::vector<ContourLevel>& contours) {
  std::ostringstream os;
  os << "level,polyline,point,col_index,row_index," << axis_name(g.axes.col_axis) << ','
     << axis_name(g.axes.row_axis) << '\n';
  for (const auto& level : contours)
    for (std::size_t l = 0; l < level.polylines.size(); ++l)
      for (std::size_t p = 0; p < level.polylines[l].size(); ++p) {
        const auto& pt = level.polylines[l][p];
        os << num(level.level) << ',' << l << ',' << p << ',' << num(pt.x) << ',' << num(pt.y)
           << ',' << num(axis_value_at(g.axes.col_values, pt.x)) << ','
           << num(axis_value_at(g.axes.row_values, pt.y)) << '\n';
      }
  return os.str();
}

std::string stars_csv(const GridReport& g, const std::vector<Star>& stars) {
  std::ostringstream os;
  os << "threshold,row,col," << axis_name(g.axes.row_axis) << ',' << axis_name(g.axes.col_axis)
     << ",are,train_flops\n";
  for (const auto& s : stars) {
    os << num(s.threshold);
    if (s.cell) {
      const auto& c = g.cells[*s.cell];
      os << ',' << c.row << ',' << c.col << ',' << num(c.row_value) << ',' << num(c.col_value)
         << ',' << num(*c.are) << ',' << num(c.train_flops);
    } else {
      os << ",,,,,,";
    }
    os << '\n';
  }
  return os.str();
}

std::string cv_csv(const std::vector<CvRow>& rows) {
  std::ostringstream os;
  os << "held_out_params,model_ids,are,failure,n_train,n_target\n";
  for (const auto& r : rows) {
    std::string ids;
    for (const auto& m : r.model_ids) ids += (ids.empty() ? "" : ";") + m;
    os << r.held_out_params << ',' << csv_escape(ids) << ',' << (r.are ? num(*r.are) : "") << ','
       << csv_escape(r.failure) << ',' << r.n_train << ',' << r.n_target << '\n';
  }
  return os.str();
}

std::string pca_csv(const PcaReport& r, std::span<const std::string> labels,
                    std::span<const LawParams> fits) {
  std::ostringstream os;
  os << "family_id,E,A,alpha,B,beta";
  for (std::size_t k = 0; k < r.components.size(); ++k) os << ",pc" << (k + 1);
  os << '\n';
  for (std::size_t i = 0; i < fits.size(); ++i) {
    os << csv_escape(i < labels.size() ? labels[i] : std::to_string(i));
    for (double v : fits[i].to_array()) os << ',' << num(v);
    for (std::size_t k = 0; k < r.components.size(); ++k) os << ',' << num(r.scores[i][k]);
    os << '\n';
  }
  return os.str();
}

// --- SVG ---------------------------------------------------------------------

namespace {

// Perceptually ordered ramp (viridis key colors), low error = dark.
std::string ramp(double t) {
  static constexpr double kStops[][3] = {{68, 1, 84},    {59, 82, 139},  {33, 145, 140},
                                         {94, 201, 98},  {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const auto i = std::min(static_cast<int>(t), 3);
  const double f = t - i;
  char buf[8];
  const auto mix = [&](int c) {
    return static_cast<int>(std::lround(kStops[i][c] + f * (kStops[i + 1][c] - kStops[i][c])));
  };
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(0), mix(1), mix(2));
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v, int digits = 3) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

}  // namespace

std::string grid_svg(const GridReport& g, const std::vector<ContourLevel>& contours,
                     const std::vector<Star>& stars, const std::string& title) {
  constexpr double kCell = 60.0, kLeft = 90.0, kTop = 50.0, kLegend = 110.0;
  const double w = kLeft + kCell * static_cast<double>(g.cols) + kLegend;
  const double h = kTop + kCell * static_cast<double>(g.rows) + 60.0;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(w, 6) << "\" height=\""
     << fmt(h, 6) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kLeft << "\" y=\"20\" font-size=\"14\">" << xml_escape(title)
     << "</text>\n";

  auto cx = [&](double col) { return kLeft + kCell * (col + 0.5); };
  auto cy = [&](double row) { return kTop + kCell * (row + 0.5); };

  for (const auto& c : g.cells) {
    const double x = kLeft + kCell * static_cast<double>(c.col);
    const double y = kTop + kCell * static_cast<double>(c.row);
    const std::string fill = c.ok() ? ramp(*c.are / kHeatmapMaxAre) : "#ffffff";
    os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\""
       << kCell << "\" fill=\"" << fill << "\" stroke=\"#888\" stroke-width=\"0.5\">"
       << "<title>" << (c.ok() ? "ARE " + fmt(*c.are) : xml_escape(c.failure))
       << "</title></rect>\n";
    if (c.ok())
      os << "<text x=\"" << cx(static_cast<double>(c.col)) << "\" y=\""
         << cy(static_cast<double>(c.row)) + 4 << "\" text-anchor=\"middle\" fill=\""
         << (*c.are / kHeatmapMaxAre > 0.6 ? "#000" : "#fff") << "\">"
         << fmt(100.0 * *c.are, 2) << "%</text>\n";
  }

  for (const auto& level : contours)
    for (const auto& line : level.polylines) {
      if (line.size() < 2) continue;
      os << "<polyline fill=\"none\" stroke=\"#ff8c00\" stroke-width=\"2\" points=\"";
      for (const auto& p : line) os << fmt(cx(p.x), 6) << ',' << fmt(cy(p.y), 6) << ' ';
      os << "\"><title>iso-FLOP " << fmt(level.level) << "</title></polyline>\n";
    }

  for (const auto& s : stars) {
    if (!s.cell) continue;
    const auto& c = g.cells[*s.cell];
    const double x = cx(static_cast<double>(c.col)), y = cy(static_cast<double>(c.row)) - 16;
    os << "<text x=\"" << x << "\" y=\"" << y
       << "\" text-anchor=\"middle\" font-size=\"16\" fill=\"#ff8c00\" stroke=\"#000\" "
          "stroke-width=\"0.4\">&#9733;<title>cheapest ARE &lt;= "
       << fmt(s.threshold) << "</title></text>\n";
  }

  for (std::size_t c = 0; c < g.cols; ++c)
    os << "<text x=\"" << cx(static_cast<double>(c)) << "\" y=\""
       << kTop + kCell * static_cast<double>(g.rows) + 16 << "\" text-anchor=\"middle\">"
       << fmt(g.axes.col_values[c]) << "</text>\n";
  for (std::size_t r = 0; r < g.rows; ++r)
    os << "<text x=\"" << kLeft - 8 << "\" y=\"" << cy(static_cast<double>(r)) + 4
       << "\" text-anchor=\"end\">" << fmt(g.axes.row_values[r]) << "</text>\n";
  os << "<text x=\"" << kLeft + kCell * static_cast<double>(g.cols) / 2 << "\" y=\""
     << kTop + kCell * static_cast<double>(g.rows) + 36 << "\" text-anchor=\"middle\">"
     << axis_name(g.axes.col_axis) << "</text>\n";
  os << "<text x=\"14\" y=\"" << kTop + kCell * static_cast<double>(g.rows) / 2
     << "\" transform=\"rotate(-90 14 " << kTop + kCell * static_cast<double>(g.rows) / 2
     << ")\" text-anchor=\"middle\">" << axis_name(g.axes.row_axis) << "</text>\n";

  // Legend.
  const double lx = kLeft + kCell * static_cast<double>(g.cols) + 30;
  for (int i = 0; i < 10; ++i)
    os << "<rect x=\"" << lx << "\" y=\"" << kTop + 15.0 * i << "\" width=\"15\" height=\"15\" fill=\""
       << ramp(i / 9.0) << "\"/>\n";
  os << "<text x=\"" << lx + 20 << "\" y=\"" << kTop + 11 << "\">0%</text>\n";
  os << "<text x=\"" << lx + 20 << "\" y=\"" << kTop + 15.0 * 9 + 11 << "\">&gt;="
     << fmt(100.0 * kHeatmapMaxAre) << "%</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace scalaw
