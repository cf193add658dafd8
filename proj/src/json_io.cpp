#include "nlsim/json_io.hpp"

namespace nlsim {

namespace {

Json complex_list(const Vec& v) {
  Json out = Json::array();
  for (long i = 0; i < v.size(); ++i) out.push_back({v(i).real(), v(i).imag()});
  return out;
}

}  // namespace

Json ket_to_json(const Ket& psi) {
  return Json{{"dims", psi.dims()}, {"amps", complex_list(psi.amps())}};
}

Ket ket_from_json(const Json& j) {
  std::vector<int> dims = j.at("dims").get<std::vector<int>>();
  const Json& amps = j.at("amps");
  Vec v(amps.size());
  for (std::size_t i = 0; i < amps.size(); ++i)
    v(static_cast<long>(i)) = cx(amps[i].at(0).get<double>(), amps[i].at(1).get<double>());
  return Ket(std::move(dims), std::move(v), true);
}

Json operator_to_json(const Operator& op) {
  Json rows = Json::array();
  for (long r = 0; r < op.dim(); ++r) {
    Json row = Json::array();
    for (long c = 0; c < op.dim(); ++c) row.push_back({op.mat()(r, c).real(), op.mat()(r, c).imag()});
    rows.push_back(std::move(row));
  }
  const char* kind = op.kind() == Operator::Kind::Hermitian  ? "hermitian"
                     : op.kind() == Operator::Kind::Unitary ? "unitary"
                                                            : "general";
  return Json{{"dims", op.dims()}, {"kind", kind}, {"mat", std::move(rows)}};
}

Json density_to_json(const DensityMatrix& rho) {
  Json rows = Json::array();
  for (long r = 0; r < rho.mat.rows(); ++r) {
    Json row = Json::array();
    for (long c = 0; c < rho.mat.cols(); ++c)
      row.push_back({rho.mat(r, c).real(), rho.mat(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return Json{{"dims", rho.dims}, {"mat", std::move(rows)}};
}

}  // namespace nlsim
