#pragma once

// JSON encodings of the domain types. Finite doubles survive a round trip bit for bit; the
// infinite sanitary capacity and failed costs are written as the strings "inf" / "-inf" / "nan".

#include "json.hpp"

#include "vaxopt/analysis.hpp"
#include "vaxopt/calibration.hpp"
#include "vaxopt/optimizer.hpp"
#include "vaxopt/trajectory.hpp"

namespace vaxopt {

using Json = nlohmann::json;

Json number_to_json(double x);
double number_from_json(const Json& j);

void to_json(Json& j, const GridSpec& g);
void from_json(const Json& j, GridSpec& g);
void to_json(Json& j, const WeeklySeries& s);
void from_json(const Json& j, WeeklySeries& s);
void to_json(Json& j, const SquareMatrix& m);
void from_json(const Json& j, SquareMatrix& m);
void to_json(Json& j, const AgeAxis& a);
void from_json(const Json& j, AgeAxis& a);
void to_json(Json& j, const ModelParams& p);
void from_json(const Json& j, ModelParams& p);
void to_json(Json& j, const EpiState& x);
void from_json(const Json& j, EpiState& x);
void to_json(Json& j, const DosingPolicy& p);
void from_json(const Json& j, DosingPolicy& p);
void to_json(Json& j, const IterationRecord& r);
void from_json(const Json& j, IterationRecord& r);
void to_json(Json& j, const OptimizationTrace& t);
void from_json(const Json& j, OptimizationTrace& t);
void to_json(Json& j, const VariationReport& r);
void from_json(const Json& j, VariationReport& r);
void to_json(Json& j, const SensitivityScan& s);
void from_json(const Json& j, SensitivityScan& s);
void to_json(Json& j, const ParameterSummary& s);
void from_json(const Json& j, ParameterSummary& s);

/// Daily compartment series plus H: {"days": [...], "ages": [...], "S": [[age][day]], ...}.
Json trajectory_json(const Trajectory& traj, const ModelParams& params);

}  // namespace vaxopt
