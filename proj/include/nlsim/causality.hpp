#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nlsim/json_io.hpp"
#include "nlsim/statevec.hpp"

namespace nlsim {

// A measurement process for the no-signaling auditor: a unitary interaction
// between the system and a private apparatus register. `evolve` maps a
// system state to the joint (system x apparatus) amplitude vector, with the
// apparatus as one trailing subsystem of dimension apparatusDim. Models too
// large for a dense matrix implement evolve directly.
struct MeasurementModel {
  std::string name;
  std::vector<int> systemDims;
  int site1 = 0;
  int site2 = 1;
  long apparatusDim = 1;
  std::function<Vec(const Ket&)> evolve;
};

// Dense builder: joint = U (psi x apparatusInit). U must be unitary within
// 1e-10 and apparatusInit normalized.
MeasurementModel model_from_unitary(std::string name, std::vector<int> systemDims,
                                    long apparatusDim, const Vec& apparatusInit, const Mat& U,
                                    int site1 = 0, int site2 = 1);

// Ideal repeatable measurement with projector set {P_k}: the apparatus is a
// pointer of dimension K shifted by k on branch k.
MeasurementModel projective_model(std::string name, std::vector<int> systemDims,
                                  const std::vector<Mat>& projectors, int site1 = 0,
                                  int site2 = 1);

// Probability of eigenvalue a of the local observable A at the given system
// subsystem, after the model has run on psi.
double local_outcome_prob(const MeasurementModel& model, const Ket& psi, int site,
                          const Operator& A, double a);

struct SignalingReport {
  double maxDeviation = 0.0;
  Json witness;
  long samplesTested = 0;
};

Json signaling_report_to_json(const SignalingReport& r);

// Deviation of the site1 outcome statistics under unitaries applied at
// site2 before the measurement runs. Each u2 sample is a local matrix of
// the site2 dimension; each a1 sample is (observable at site1, eigenvalue).
SignalingReport signaling_score(const MeasurementModel& model, const Ket& psi,
                                const std::vector<Mat>& u2samples,
                                const std::vector<std::pair<Operator, double>>& a1samples);

// Deterministic local unitary battery: for qubits the Paulis and the
// quarter-turn rotations exp(+-i pi/4 sigma); for larger dimensions cyclic
// shifts, the Fourier matrix and a phase gradient.
std::vector<Mat> structured_unitaries(int dim);

// Seeded Haar samples via QR of a Gaussian matrix with the phase fix.
std::vector<Mat> haar_unitaries(int dim, int count, std::uint64_t seed);

// (observable, eigenvalue) battery at one site: Pauli eigenprojectors for
// qubits, computational and Fourier basis projectors otherwise.
std::vector<std::pair<Operator, double>> observable_battery(int dim);

// Full scan in both site roles: probe each party with the observable
// battery while the other party runs the structured set plus haarCount
// seeded Haar samples.
SignalingReport bidirectional_scan(const MeasurementModel& model, const Ket& psi,
                                   int haarCount, std::uint64_t seed);

// Verification-measurement statements. h0dim1 is the dimension of the
// subspace of site1 supporting psi0 (its first h0dim1 basis states).
// Theorem 1: over states in that subspace tensor the full site2 space, the
// site1 outcome statistics equal those of psi0. Returns the max spread;
// rejects test states with weight outside the subspace.
double check_pv_theorem1(const MeasurementModel& model, const Ket& psi0, int h0dim1,
                         const std::vector<Ket>& testStates, const Operator& A1, double a);

// Theorem 2: for psi = alpha psi' + beta psi'' with psi' inside the
// subspace and psi'' fully outside it, p(psi) = |alpha|^2 p(psi0) +
// |beta|^2 p(psi''). Returns the identity residual.
double check_pv_theorem2(const MeasurementModel& model, const Ket& psi0, int h0dim1,
                         const Ket& psiPrime, const Ket& psiDoublePrime, cx alpha, cx beta,
                         const Operator& A1, double a);

// Ideal measurement of the basis containing alpha|uu> + beta|dd>; signaling
// vanishes only at |alpha| = |beta| (and in the trivial product limits).
SignalingReport entangled_projector_signaling(double alpha, double beta);

// Self-contained demonstration that measuring a variable whose degenerate
// eigenstates are entangled-with-nondegenerate-partners signals: site1's
// choice of preparation moves site2's verification probability.
SignalingReport degenerate_eigenstate_signal_demo();

// Model builders for the shipped protocols and scenarios.
MeasurementModel total_spin_z_model();
MeasurementModel verify_singlet_model();
MeasurementModel canonical_equal_model();        // M = 2 parties, K = 2
MeasurementModel gr_twisted_model();
MeasurementModel vaidman_round1_model();
MeasurementModel pv_psi0_model();                // verification of (|00>+|11>)/sqrt2 on 3x3
MeasurementModel phi_model(double phi);
MeasurementModel entangled_projector_model(double alpha, double beta);

// Deviation of the ideal phi-family measurement on the singlet over an
// evenly spaced grid on [0, pi). Vanishes exactly at multiples of pi/4.
std::vector<std::pair<double, double>> phi_scan(int gridPoints = 32);

}  // namespace nlsim
