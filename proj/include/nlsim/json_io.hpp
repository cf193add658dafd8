#pragma once

#include <json.hpp>

#include "nlsim/statevec.hpp"

namespace nlsim {

using Json = nlohmann::json;

// Amplitudes serialize as [re, im] pairs, row-major for matrices.
Json ket_to_json(const Ket& psi);
Ket ket_from_json(const Json& j);
Json operator_to_json(const Operator& op);
Json density_to_json(const DensityMatrix& rho);

}  // namespace nlsim
