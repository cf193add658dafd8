#pragma once

#include <optional>
#include <vector>

#include "nlsim/errors.hpp"
#include "nlsim/rng.hpp"
#include "nlsim/types.hpp"

namespace nlsim {

// Normalized state vector over a tensor factorization of subsystems.
// Subsystem 0 is the slowest-varying index; for a qubit, up precedes down.
class Ket {
 public:
  Ket(std::vector<int> dims, Vec amps, bool renormalize = false);

  static Ket basis(std::vector<int> dims, long index);
  // Single qubit conveniences.
  static Ket up() { return basis({2}, 0); }
  static Ket down() { return basis({2}, 1); }

  const std::vector<int>& dims() const { return dims_; }
  long dim() const { return amps_.size(); }
  int subsystems() const { return static_cast<int>(dims_.size()); }
  const Vec& amps() const { return amps_; }

  cx overlap(const Ket& other) const;               // <this|other>
  double fidelity(const Ket& other) const;          // |<this|other>|^2
  bool sameUpToPhase(const Ket& other, double tol = kPhaseTol) const;

 private:
  std::vector<int> dims_;
  Vec amps_;
};

// Complex square matrix tagged with the subsystem dimensions it acts on.
class Operator {
 public:
  enum class Kind { Hermitian, Unitary, General };

  Operator(std::vector<int> dims, Mat mat, Kind kind = Kind::General);

  static Operator identity(std::vector<int> dims);
  static Operator hermitian(std::vector<int> dims, Mat mat) {
    return Operator(std::move(dims), std::move(mat), Kind::Hermitian);
  }
  static Operator unitary(std::vector<int> dims, Mat mat) {
    return Operator(std::move(dims), std::move(mat), Kind::Unitary);
  }

  const std::vector<int>& dims() const { return dims_; }
  long dim() const { return mat_.rows(); }
  const Mat& mat() const { return mat_; }
  Kind kind() const { return kind_; }

 private:
  std::vector<int> dims_;
  Mat mat_;
  Kind kind_;
};

// Reduced state of a subsystem group: Hermitian, unit trace, PSD.
struct DensityMatrix {
  std::vector<int> dims;
  Mat mat;

  DensityMatrix(std::vector<int> d, Mat m);
  std::vector<double> eigenvalues() const;
};

// Canonical (Schmidt) form across a bipartition.
struct SchmidtForm {
  std::vector<double> coeffs;   // descending, sum of squares = 1
  std::vector<Vec> leftBasis;   // orthonormal
  std::vector<Vec> rightBasis;  // orthonormal
};

// Pauli matrices with spin-1/2 eigenvalues +-1/2 (hbar = 1), and the bare
// +-1 versions used as unitaries.
Mat pauli_x();
Mat pauli_y();
Mat pauli_z();
Operator spin_x();  // pauli_x()/2, Hermitian
Operator spin_y();
Operator spin_z();

Ket tensor(const Ket& a, const Ket& b);
Operator tensor(const Operator& a, const Operator& b);

// I x ... x op x ... x I with op at position target.
Operator embed_local(const Operator& op, int target, const std::vector<int>& dims);
// Multi-site embedding; targets must be distinct and ascending.
Operator embed_on(const Operator& op, const std::vector<int>& targets,
                  const std::vector<int>& dims);

// Apply op to the given target subsystems. Unitary operators preserve the
// norm; anything else requires renormalize = true.
Ket apply(const Operator& op, const Ket& psi, const std::vector<int>& targets,
          bool renormalize = false);

struct MeasureResult {
  int outcome;
  double probability;
  Ket post;
};

// Projective measurement over a complete orthogonal projector set.
MeasureResult measure_projective(const Ket& psi, const std::vector<Operator>& projectors,
                                 RngStream& rng);
// Exact Born probabilities for the same projector set.
std::vector<double> born_probabilities(const Ket& psi, const std::vector<Operator>& projectors);

DensityMatrix reduced_density(const Ket& psi, const std::vector<int>& keep);

// Schmidt form across (leftSites | complement).
SchmidtForm schmidt_canonical(const Ket& psi, const std::vector<int>& leftSites);

double expectation(const Operator& op, const Ket& psi);

// Project the given sites onto |v> and drop them from the factorization.
// Returns the renormalized remainder; fails on (near-)zero overlap.
Ket contract_sites(const Ket& psi, const std::vector<int>& sites, const Vec& v);

// Reorder subsystems; perm[i] = index of the old subsystem that becomes
// subsystem i.
Ket permute_subsystems(const Ket& psi, const std::vector<int>& perm);

// In-place apply on a raw amplitude vector with explicit dims, for joint
// system-apparatus vectors that are not normalized Kets (or exceed the Ket
// size cap). Norm is not re-checked.
void apply_in_place(Vec& amps, const std::vector<int>& dims, const Operator& op,
                    const std::vector<int>& targets);

}  // namespace nlsim
