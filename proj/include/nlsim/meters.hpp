#pragma once

#include <utility>
#include <vector>

#include "nlsim/statevec.hpp"

namespace nlsim {

// A bank of N correlated meter registers, each a discrete Weyl pair of
// dimension D. Register basis index j stands for the dial label
// k = j for j <= (D-1)/2, else j - D (symmetric window, odd D), and the
// initial state is the equal superposition over all configurations with
// sum(j) = 0 (mod D). Equivalently it is the equal-position state
// (1/sqrt D) sum_q |q...q> on the Fourier-dual side, which is what makes a
// single dial carry no information while the dial sum tracks the coupled
// observable.
struct MeterBank {
  int registers;
  int dim;
  Ket state;
};

// Correlated bank for the standard measurement classes. Requires odd D >= 3
// so dial labels unwrap to a symmetric window around zero.
MeterBank prepare_bank(int registers, int dim);

// Cyclic bank without the symmetric-window contract, any D >= 2. Modular
// sums live on Z_D directly and sometimes need even D (sum mod 2 of
// half-integer spins wants D = 4); everything else should use prepare_bank.
MeterBank prepare_cyclic_bank(int registers, int dim);

// One observable to couple, tagged with the system site it acts on.
struct SiteObservable {
  Operator op;
  int site;
};

struct MeterOutcome {
  double value;
  double probability;        // exact Born weight of the realized branch
  Ket post;                  // renormalized projection of the input
  std::vector<int> dials;    // one dial label per register, sampled
  double spacing;            // lattice spacing Delta used by the coupling
};

// Largest Delta such that every value is an integer multiple of it, with
// the integer ratios representable as fractions of denominator <= 64.
// Returns 0 when all values vanish; throws on incommensurate input.
double lattice_spacing(const std::vector<double>& values);

// Measure sum_i A_i with one meter per observable. The value is the dial
// sum unwrapped to the symmetric window; requires odd-D bank wide enough
// that no two achievable sums alias mod D.
MeterOutcome measure_sum(const Ket& psi, const std::vector<SiteObservable>& obs,
                         MeterBank bank, RngStream& rng);

// Measure sum_i w_i A_i. Weights must be commensurate so a common lattice
// exists (denominator bound 64).
MeterOutcome measure_linear_combination(const Ket& psi, const std::vector<SiteObservable>& obs,
                                        const std::vector<double>& weights, MeterBank bank,
                                        RngStream& rng);

// Measure prod_i A_i for strictly positive-definite A_i, via the log trick.
MeterOutcome measure_product_positive(const Ket& psi, const std::vector<SiteObservable>& obs,
                                      MeterBank bank, RngStream& rng);

// Measure (sum_i a_i) mod a, with a = D * Delta for the supplied bank.
// Superpositions within one modular class survive untouched.
MeterOutcome measure_modular_sum(const Ket& psi, const std::vector<SiteObservable>& obs,
                                 double modulus, MeterBank bank, RngStream& rng);

// Exact outcome distributions (value, probability), probability > 0,
// values ascending. Same branch bookkeeping the sampling paths use.
std::vector<std::pair<double, double>> sum_distribution(const Ket& psi,
                                                        const std::vector<SiteObservable>& obs);
std::vector<std::pair<double, double>> linear_combination_distribution(
    const Ket& psi, const std::vector<SiteObservable>& obs, const std::vector<double>& weights);
std::vector<std::pair<double, double>> product_positive_distribution(
    const Ket& psi, const std::vector<SiteObservable>& obs);
std::vector<std::pair<double, double>> modular_sum_distribution(
    const Ket& psi, const std::vector<SiteObservable>& obs, double modulus);

// Unitary meter coupling acting on a raw joint vector (system + meter
// registers), for auditors that keep the apparatus coherent instead of
// reading dials. Shifts the meter register at jointDims[meterSite] by the
// local eigenvalue of `op` (in units of delta) on jointDims[systemSite].
void couple_meter(Vec& joint, const std::vector<int>& jointDims, const Operator& op,
                  int systemSite, int meterSite, double delta);

}  // namespace nlsim
