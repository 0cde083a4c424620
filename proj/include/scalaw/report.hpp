// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "scalaw/checkpoint.hpp"
#include "scalaw/evaluation.hpp"
#include "scalaw/fit.hpp"
#include "scalaw/meta.hpp"
#include "scalaw/subset.hpp"

namespace scalaw {

using Json = nlohmann::ordered_json;

Json to_json(const LawParams& p);
Json to_json(const FitConfig& c);
Json to_json(const FitResult& r);
Json to_json(const SubsetSpec& s);
Json to_json(const EvalReport& r);
Json to_json(const FamilySummary& s);
Json to_json(const GridReport& g, const std::vector<ContourLevel>& contours,
             const std::vector<Star>& stars);
Json to_json(const std::vector<CvRow>& rows);
Json to_json(const PcaReport& r, std::span<const std::string> labels);

/// Accepts {"E":..,"A":..,"alpha":..,"B":..,"beta":..}, a FitResult document
/// ({"params": {...}}), or a 5-element array.
LawParams law_params_from_json(const Json& j);

/// One row per target checkpoint.
std::string eval_csv(const EvalReport& r);
/// One row per cell.
std::string grid_csv(const GridReport& g);
std::string contours_csv(const GridReport& g, const std::vector<ContourLevel>& contours);
std::string stars_csv(const GridReport& g, const std::vector<Star>& stars);
std::string cv_csv(const std::vector<CvRow>& rows);
/// family_id, E, A, alpha, B, beta, then one score column per component.
std::string pca_csv(const PcaReport& r, std::span<const std::string> labels,
                    std::span<const LawParams> fits);

/// Upper end of the fixed ARE color scale; larger errors saturate.
inline constexpr double kHeatmapMaxAre = 0.5;

/// Heatmap of ARE per cell (failed cells white) with iso-FLOP polylines and
/// star markers overlaid.
std::string grid_svg(const GridReport& g, const std::vector<ContourLevel>& contours,
                     const std::vector<Star>& stars, const std::string& title);

}  // namespace scalaw
