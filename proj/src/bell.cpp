#include "nlsim/bell.hpp"

#include <array>
#include <cmath>

namespace nlsim {

const char* bell_name(BellKind kind) {
  switch (kind) {
    case BellKind::PsiMinus: return "PsiMinus";
    case BellKind::PsiPlus: return "PsiPlus";
    case BellKind::PhiMinus: return "PhiMinus";
    case BellKind::PhiPlus: return "PhiPlus";
  }
  throw InternalError("bell_name: unknown kind");
}

Ket make_bell(BellKind kind) {
  const double s = 1.0 / std::sqrt(2.0);
  Vec v = Vec::Zero(4);
  switch (kind) {
    case BellKind::PsiMinus: v(1) = s; v(2) = -s; break;
    case BellKind::PsiPlus: v(1) = s; v(2) = s; break;
    case BellKind::PhiMinus: v(0) = s; v(3) = -s; break;
    case BellKind::PhiPlus: v(0) = s; v(3) = s; break;
  }
  return Ket({2, 2}, std::move(v));
}

BellMeasureResult bell_measure(const Ket& psi, int first, int second, RngStream& rng) {
  if (first < 0 || first >= psi.subsystems() || second < 0 || second >= psi.subsystems() ||
      first == second)
    throw PreconditionError("bell_measure: bad subsystem pair");
  if (psi.dims()[first] != 2 || psi.dims()[second] != 2)
    throw PreconditionError("bell_measure: both subsystems must be qubits");

  constexpr std::array<BellKind, 4> kinds = {BellKind::PsiMinus, BellKind::PsiPlus,
                                             BellKind::PhiMinus, BellKind::PhiPlus};
  // Unnormalized partial overlaps; their squared norms are the Born weights.
  std::array<Vec, 4> branches;
  std::array<double, 4> weights{};
  std::vector<int> restDims;
  for (int k = 0; k < 4; ++k) {
    Ket bell = make_bell(kinds[k]);
    // Inline partial contraction onto the Bell vector at (first, second).
    Vec rest;
    {
      const auto& dims = psi.dims();
      long restDim = psi.dim() / 4;
      rest = Vec::Zero(restDim);
      std::vector<long> digits(dims.size());
      for (long idx = 0; idx < psi.dim(); ++idx) {
        long rem = idx;
        for (int i = static_cast<int>(dims.size()) - 1; i >= 0; --i) {
          digits[i] = rem % dims[i];
          rem /= dims[i];
        }
        long g = digits[first] * 2 + digits[second];
        long r = 0;
        for (int i = 0; i < static_cast<int>(dims.size()); ++i)
          if (i != first && i != second) r = r * dims[i] + digits[i];
        rest(r) += std::conj(bell.amps()(g)) * psi.amps()(idx);
      }
      if (restDims.empty())
        for (int i = 0; i < psi.subsystems(); ++i)
          if (i != first && i != second) restDims.push_back(dims[i]);
    }
    branches[k] = std::move(rest);
    weights[k] = branches[k].squaredNorm();
  }
  std::size_t pick = rng.pick(weights);
  if (restDims.empty()) restDims.push_back(1);
  return BellMeasureResult{kinds[pick], weights[pick],
                           Ket(restDims, std::move(branches[pick]), true)};
}

Operator pauli_correction(BellKind kind) {
  const cx mi(0, -1);
  switch (kind) {
    case BellKind::PsiMinus: return Operator::unitary({2}, Mat::Identity(2, 2));
    case BellKind::PsiPlus: return Operator::unitary({2}, mi * pauli_z());
    case BellKind::PhiMinus: return Operator::unitary({2}, mi * pauli_x());
    case BellKind::PhiPlus: return Operator::unitary({2}, mi * pauli_y());
  }
  throw InternalError("pauli_correction: unknown kind");
}

}  // namespace nlsim
