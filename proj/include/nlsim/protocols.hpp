#pragma once

#include <optional>

#include "nlsim/bell.hpp"
#include "nlsim/meters.hpp"
#include "nlsim/transcript.hpp"

namespace nlsim {

struct ProtocolResult {
  Json inferred;             // measured value / verdict / identified index
  std::optional<Ket> post;   // nullopt when the protocol destroys the state
  Resources resources;
  Transcript transcript;
  Json extra;                // protocol-specific diagnostics
};

// The twisted product basis on qubits (A, B), indices 1..4:
//   1: up,up   2: up,down
//   3: down (x) (up+down)/sqrt2   4: down (x) (up-down)/sqrt2
// The alpha variant tilts the B factor of states 3 and 4 by an extra angle,
// reducing to the standard basis at alpha = 0.
Ket twisted_state(int index);
Ket twisted_state(int index, double alpha);

// Nondemolition measurement of the z-component of total spin of two qubits
// through a correlated meter pair. Values in {-1, 0, +1}.
ProtocolResult aa_total_spin_z(const Ket& psi, RngStream& rng);

// Verification of the singlet via sequential meter measurements of the x, y
// and z spin sums; "yes" iff all three read zero.
ProtocolResult aa_verify_singlet(const Ket& psi, RngStream& rng);

// Verification that a state of M parties with local dimension K is the
// equal-coefficient canonical state sum_i |i...i>/sqrt(K). Stage 1 checks
// the index sums; stage 2 checks the modular sum of shift generators.
ProtocolResult verify_canonical_equal(const Ket& psi, int parties, int localDim, RngStream& rng);

// Deterministic replay of one ancilla branch (nuA, nuB in {+1,-1}) of the
// twisted-basis measurement. finalA/finalB are the reported labels
// (0 = up, 1 = down); full is the post state over (a, b, A, B).
struct GrBranch {
  int nuA;
  int nuB;
  int finalA;
  int finalB;
  double probability;
  Ket full;
};
GrBranch gr_twisted_branch(const Ket& psi, int nuA, int nuB);

// Same, with the final z readouts also fixed; works for any input with
// nonzero weight on that record. Used to check that the residual state is a
// function of the classical record alone.
GrBranch gr_twisted_branch(const Ket& psi, int nuA, int nuB, int finalA, int finalB);

// Twisted-basis measurement via one shared PhiPlus pair and local
// operations; the classical combination identifies the eigenstate index.
ProtocolResult gr_twisted_basis_measure(const Ket& psi, EbitPool& pool, RngStream& rng);

// Generalized-angle variant: a repeat-until-success remote conditional
// rotation untilts the basis, then the standard twisted measurement runs.
// Attempt j rotates by 2^(j-1) * alpha; attempts whose angle is a multiple
// of pi/2 always succeed, so alpha = pi*k/2^n terminates by round n.
ProtocolResult gr_general_angle_measure(const Ket& psi, double alpha, EbitPool& pool,
                                        int maxRounds, RngStream& rng);

struct PartialTeleportResult {
  std::vector<BellKind> outcomes;   // one Bell verdict per teleported qubit
  Ket post;
  std::vector<int> destinations;    // post-index of each teleported qubit
  std::vector<int> survivors;       // original index -> post index, -1 if consumed
};

// Teleportation with the corrections withheld: per source qubit, consume a
// singlet, Bell-measure (source, near half), record the outcome. The far
// half ends up carrying the source state up to a known pi rotation.
PartialTeleportResult partial_teleport(const Ket& psi, const std::vector<int>& sourceQubits,
                                       EbitPool& pool, RngStream& rng,
                                       Transcript* transcript = nullptr,
                                       const std::string& site = "", int tick = 1);

// Nested-round measurement of a nondegenerate observable O on 2K qubits
// (Alice holds the first K, Bob the rest). Degenerate O is accepted only
// when diagonal in the computational basis or when an explicit eigenbasis
// is supplied.
ProtocolResult vaidman_bipartite_measure(const Ket& psi, const Operator& O, int K,
                                         EbitPool& pool, int maxRounds, RngStream& rng,
                                         std::optional<Mat> eigenbasis = std::nullopt);

// Three-party variant, one qubit per site (A, B, C).
ProtocolResult vaidman_three_party_measure(const Ket& psi, const Operator& O, EbitPool& pool,
                                           int maxRounds, RngStream& rng,
                                           std::optional<Mat> eigenbasis = std::nullopt);

}  // namespace nlsim
