#pragma once

#include "nlsim/statevec.hpp"

namespace nlsim {

enum class BellKind { PsiMinus, PsiPlus, PhiMinus, PhiPlus };

const char* bell_name(BellKind kind);

// The four Bell kets, dims {2,2}:
//   PsiMinus = (ud - du)/sqrt2   (the singlet)
//   PsiPlus  = (ud + du)/sqrt2
//   PhiMinus = (uu - dd)/sqrt2
//   PhiPlus  = (uu + dd)/sqrt2
Ket make_bell(BellKind kind);

struct BellMeasureResult {
  BellKind kind;
  double probability;
  Ket post;  // measured pair projected out and dropped from the factorization
};

// Projective measurement of the (first, second) qubit pair in the Bell basis.
// The measured subsystems are removed from the returned state.
BellMeasureResult bell_measure(const Ket& psi, int first, int second, RngStream& rng);

// Single-qubit pi rotation undoing the teleportation distortion labeled by the
// Bell outcome at the source: PsiMinus -> I, PsiPlus -> R_z(pi), PhiMinus ->
// R_x(pi), PhiPlus -> R_y(pi), with R_k(pi) = -i sigma_k.
Operator pauli_correction(BellKind kind);

// Accounting for a supply of pre-distributed entangled pairs. The pairs
// themselves are materialized by the protocol (tensored in on demand); the
// pool only enforces the budget and keeps the ledger.
class EbitPool {
 public:
  EbitPool(long available, BellKind kind) : available_(available), kind_(kind) {
    if (available < 0) throw PreconditionError("EbitPool: negative supply");
  }

  // Consume one pair; returns its ket.
  Ket take() {
    if (available_ == 0) throw ResourceError("EbitPool: supply exhausted");
    --available_;
    ++consumed_;
    return make_bell(kind_);
  }

  long available() const { return available_; }
  long consumed() const { return consumed_; }
  BellKind kind() const { return kind_; }

 private:
  long available_;
  long consumed_ = 0;
  BellKind kind_;
};

}  // namespace nlsim
