#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "empc/learn.hpp"
#include "empc/mpqp.hpp"
#include "empc/relunet.hpp"
#include "empc/verify.hpp"

namespace empc::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Round-trip decimal form ("%.17g").
std::string format_double(double v);

json to_json(const Matrix& m);
json to_json(const Polytope& p);
json to_json(const PwaFunction& f);
json to_json(const ExplicitLaw& law);
json to_json(const ReluNetwork& n);
json to_json(const AffineTransform& t);
json to_json(const ExactRepresentation& r);
json to_json(const Polynomial& p);
json to_json(const EllipsoidSafeSet& s);
json to_json(const SvmSafeSet& s);
json to_json(const Scenario& s);

/// `cols` is needed only when the matrix may have zero rows.
Matrix matrix_from_json(const json& j, std::size_t cols = 0);
Vector vector_from_json(const json& j);
/// "dim" may be omitted; it then comes from C, or from dim_hint when C has no rows.
Polytope polytope_from_json(const json& j, std::size_t dim_hint = 0);
PwaFunction pwa_from_json(const json& j);
ReluNetwork network_from_json(const json& j);
AffineTransform transform_from_json(const json& j);
ExactRepresentation exact_from_json(const json& j);
Polynomial polynomial_from_json(const json& j);
EllipsoidSafeSet ellipsoid_from_json(const json& j);
SvmSafeSet svm_from_json(const json& j);
/// A builtin name, or an object with "base" (builtin name) and any fields of
/// to_json(Scenario) overriding it.
Scenario scenario_from_json(const json& j);

/// Throws Io on failure. Files end with a newline; no timestamps.
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

/// Header x0..x{n-1},u0..u{m-1}; one row per point.
void write_dataset_csv(const fs::path& path, const Dataset& d);
Dataset read_dataset_csv(const fs::path& path);

/// Header x0..x{n-1},label.
void write_labeled_csv(const fs::path& path, const LabeledInitialSet& s);
LabeledInitialSet read_labeled_csv(const fs::path& path);

}  // namespace empc::io
