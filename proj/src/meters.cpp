#include "nlsim/meters.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace nlsim {

namespace {

constexpr double kLatticeTol = 1e-9;
constexpr long kDenominatorBound = 64;

// Best rational p/q approximation with q <= bound, by continued fractions.
std::pair<long, long> approx_rational(double x, long bound) {
  long p0 = 1, q0 = 0, p1 = static_cast<long>(std::floor(x)), q1 = 1;
  double frac = x - std::floor(x);
  while (frac > 1e-12) {
    double inv = 1.0 / frac;
    long a = static_cast<long>(std::floor(inv));
    frac = inv - std::floor(inv);
    long p2 = a * p1 + p0, q2 = a * q1 + q0;
    if (q2 > bound) break;
    p0 = p1; q0 = q1; p1 = p2; q1 = q2;
  }
  return {p1, q1};
}

int symmetric_label(int index, int d) { return index <= (d - 1) / 2 ? index : index - d; }

// Eigen-decomposed total observable grouped into lattice classes.
struct ClassDecomp {
  double delta = 0.0;
  std::vector<long> sums;       // integer class labels, ascending
  std::vector<Mat> projectors;  // one per class, on the full system
};

ClassDecomp decompose(const Ket& psi, const std::vector<SiteObservable>& obs,
                      const std::vector<double>& weights, bool takeLog) {
  if (obs.empty()) throw PreconditionError("meters: empty observable list");
  if (weights.size() != obs.size())
    throw PreconditionError("meters: weight count does not match observables");

  const auto& dims = psi.dims();
  long n = psi.dim();
  Mat total = Mat::Zero(n, n);
  std::vector<double> localValues;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Operator& a = obs[i].op;
    if ((a.mat() - a.mat().adjoint()).cwiseAbs().maxCoeff() > 1e-12)
      throw PreconditionError("meters: observable is not Hermitian");
    Eigen::SelfAdjointEigenSolver<Mat> es(a.mat());
    Mat local = a.mat();
    if (takeLog) {
      if (es.eigenvalues().minCoeff() < 1e-6)
        throw PreconditionError("meters: product measurement needs positive-definite observables");
      local = es.eigenvectors() *
              es.eigenvalues().array().log().matrix().asDiagonal().toDenseMatrix().cast<cx>() *
              es.eigenvectors().adjoint();
    }
    for (long k = 0; k < es.eigenvalues().size(); ++k) {
      double v = takeLog ? std::log(es.eigenvalues()(k)) : es.eigenvalues()(k);
      localValues.push_back(weights[i] * v);
    }
    total += weights[i] * embed_local(Operator::hermitian(a.dims(), (local + local.adjoint()) / 2.0),
                                      obs[i].site, dims)
                              .mat();
  }

  ClassDecomp out;
  out.delta = lattice_spacing(localValues);

  Eigen::SelfAdjointEigenSolver<Mat> es((total + total.adjoint()) / 2.0);
  std::map<long, Mat> classes;
  for (long k = 0; k < n; ++k) {
    double t = es.eigenvalues()(k);
    long m = 0;
    if (out.delta > 0) {
      m = std::llround(t / out.delta);
      if (std::abs(t - m * out.delta) > 1e-7)
        throw InternalError("meters: total spectrum drifted off the local lattice");
    } else if (std::abs(t) > 1e-7) {
      throw InternalError("meters: nonzero spectrum on a null lattice");
    }
    auto [it, fresh] = classes.try_emplace(m, Mat::Zero(n, n));
    it->second += es.eigenvectors().col(k) * es.eigenvectors().col(k).adjoint();
    (void)fresh;
  }
  for (auto& [m, p] : classes) {
    out.sums.push_back(m);
    out.projectors.push_back(std::move(p));
  }
  return out;
}

std::vector<double> unit_weights(std::size_t n) { return std::vector<double>(n, 1.0); }

std::vector<std::pair<double, double>> branch_distribution(
    const Ket& psi, const std::vector<long>& labels, const std::vector<Mat>& projectors,
    double delta, bool exponentiate) {
  std::map<double, double> acc;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double p = (projectors[i] * psi.amps()).squaredNorm();
    if (p < 1e-14) continue;
    double value = labels[i] * delta;
    acc[exponentiate ? std::exp(value) : value] += p;
  }
  return {acc.begin(), acc.end()};
}

void check_bank(const MeterBank& bank, std::size_t observables, bool needOdd) {
  if (bank.registers != static_cast<int>(observables))
    throw PreconditionError("meters: bank size does not match observable count");
  if (needOdd && bank.dim % 2 == 0)
    throw PreconditionError("meters: sum-type measurements need an odd-dimension bank");
}

// Sample one dial per register, uniform over the shell sum(j) = shell (mod D).
std::vector<int> sample_dials(int registers, int d, long shell, RngStream& rng) {
  std::vector<int> dials(registers);
  long acc = 0;
  std::vector<double> flat(d, 1.0);
  for (int i = 0; i + 1 < registers; ++i) {
    dials[i] = static_cast<int>(rng.pick(flat));
    acc += dials[i];
  }
  dials[registers - 1] = static_cast<int>((((shell - acc) % d) + d) % d);
  if (d % 2 == 1)
    for (int& j : dials) j = symmetric_label(j, d);
  return dials;
}

MeterOutcome realize(const Ket& psi, const ClassDecomp& dec, const MeterBank& bank,
                     RngStream& rng, bool exponentiate) {
  const std::vector<long>& labels = dec.sums;
  std::vector<double> probs(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    probs[i] = (dec.projectors[i] * psi.amps()).squaredNorm();
  std::size_t k = rng.pick(probs);
  Vec post = dec.projectors[k] * psi.amps();
  post /= post.norm();
  // Dials read -sum(m) mod D; the classical combination recovers the class.
  long shell = ((-labels[k]) % bank.dim + bank.dim) % bank.dim;
  double value = labels[k] * dec.delta;
  return MeterOutcome{exponentiate ? std::exp(value) : value, probs[k],
                      Ket(psi.dims(), std::move(post)),
                      sample_dials(bank.registers, bank.dim, shell, rng), dec.delta};
}

}  // namespace

double lattice_spacing(const std::vector<double>& values) {
  std::vector<double> nz;
  for (double v : values)
    if (std::abs(v) > kLatticeTol) nz.push_back(std::abs(v));
  if (nz.empty()) return 0.0;
  double ref = *std::min_element(nz.begin(), nz.end());
  long lcmQ = 1;
  for (double v : nz) {
    auto [p, q] = approx_rational(v / ref, kDenominatorBound);
    if (p <= 0 || q <= 0 || std::abs(v / ref - static_cast<double>(p) / q) > kLatticeTol)
      throw PreconditionError("meters: incommensurate spectrum, no common lattice");
    lcmQ = std::lcm(lcmQ, q);
    if (lcmQ > (1L << 30))
      throw PreconditionError("meters: incommensurate spectrum, no common lattice");
  }
  double delta = ref / static_cast<double>(lcmQ);
  long g = 0;
  for (double v : nz) g = std::gcd(g, std::llround(v / delta));
  if (g > 1) delta *= static_cast<double>(g);
  for (double v : nz)
    if (std::abs(v - std::llround(v / delta) * delta) > 10 * kLatticeTol)
      throw PreconditionError("meters: incommensurate spectrum, no common lattice");
  return delta;
}

MeterBank prepare_bank(int registers, int dim) {
  if (dim < 3 || dim % 2 == 0)
    throw PreconditionError("prepare_bank: dimension must be odd and at least 3");
  return prepare_cyclic_bank(registers, dim);
}

MeterBank prepare_cyclic_bank(int registers, int dim) {
  if (registers < 1) throw PreconditionError("prepare_bank: need at least one register");
  if (dim < 2) throw PreconditionError("prepare_bank: dimension must be at least 2");
  std::vector<int> dims(registers, dim);
  long total = product_of(dims);
  Vec amps = Vec::Zero(total);
  double amp = 1.0 / std::sqrt(std::pow(static_cast<double>(dim), registers - 1));
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx, s = 0;
    for (int i = 0; i < registers; ++i) {
      s += rem % dim;
      rem /= dim;
    }
    if (s % dim == 0) amps(idx) = amp;
  }
  Ket state(dims, std::move(amps));

  // Fourier identity: the shell state is the equal-position state
  // (1/sqrt D) sum_q F|q> x ... x F|q|.
  Vec dual = Vec::Zero(total);
  for (int q = 0; q < dim; ++q) {
    Vec column = Vec::Constant(1, 1.0);
    for (int i = 0; i < registers; ++i) {
      Vec f(dim);
      for (int j = 0; j < dim; ++j)
        f(j) = std::polar(1.0 / std::sqrt(static_cast<double>(dim)),
                          2.0 * M_PI * j * q / dim);
      Vec next(column.size() * dim);
      for (long a = 0; a < column.size(); ++a)
        for (int j = 0; j < dim; ++j) next(a * dim + j) = column(a) * f(j);
      column = std::move(next);
    }
    dual += column / std::sqrt(static_cast<double>(dim));
  }
  if (std::abs(std::abs(state.amps().dot(dual)) - 1.0) > 1e-12)
    throw InternalError("prepare_bank: Fourier identity violated");

  return MeterBank{registers, dim, std::move(state)};
}

MeterOutcome measure_sum(const Ket& psi, const std::vector<SiteObservable>& obs, MeterBank bank,
                         RngStream& rng) {
  return measure_linear_combination(psi, obs, unit_weights(obs.size()), std::move(bank), rng);
}

MeterOutcome measure_linear_combination(const Ket& psi, const std::vector<SiteObservable>& obs,
                                        const std::vector<double>& weights, MeterBank bank,
                                        RngStream& rng) {
  check_bank(bank, obs.size(), true);
  ClassDecomp dec = decompose(psi, obs, weights, false);
  for (long m : dec.sums)
    if (std::abs(m) > (bank.dim - 1) / 2)
      throw PreconditionError("meters: bank too small, dial sum would alias");
  return realize(psi, dec, bank, rng, false);
}

MeterOutcome measure_product_positive(const Ket& psi, const std::vector<SiteObservable>& obs,
                                      MeterBank bank, RngStream& rng) {
  check_bank(bank, obs.size(), true);
  ClassDecomp dec = decompose(psi, obs, unit_weights(obs.size()), true);
  for (long m : dec.sums)
    if (std::abs(m) > (bank.dim - 1) / 2)
      throw PreconditionError("meters: bank too small, dial sum would alias");
  return realize(psi, dec, bank, rng, true);
}

MeterOutcome measure_modular_sum(const Ket& psi, const std::vector<SiteObservable>& obs,
                                 double modulus, MeterBank bank, RngStream& rng) {
  check_bank(bank, obs.size(), false);
  if (modulus <= 0) throw PreconditionError("meters: modulus must be positive");
  ClassDecomp dec = decompose(psi, obs, unit_weights(obs.size()), false);
  if (dec.delta == 0.0) {
    // All observables vanish; the sum is identically zero mod anything.
    std::vector<int> dials = sample_dials(bank.registers, bank.dim, 0, rng);
    return MeterOutcome{0.0, 1.0, psi, std::move(dials), 0.0};
  }
  if (std::abs(modulus - bank.dim * dec.delta) > 1e-9 * std::max(1.0, modulus))
    throw PreconditionError("meters: modulus must equal D * Delta for this bank");

  // Merge lattice classes that coincide mod D.
  std::map<long, Mat> merged;
  long n = psi.dim();
  for (std::size_t i = 0; i < dec.sums.size(); ++i) {
    long r = ((dec.sums[i] % bank.dim) + bank.dim) % bank.dim;
    auto [it, fresh] = merged.try_emplace(r, Mat::Zero(n, n));
    it->second += dec.projectors[i];
    (void)fresh;
  }
  ClassDecomp moddec;
  moddec.delta = dec.delta;
  for (auto& [r, p] : merged) {
    moddec.sums.push_back(r);
    moddec.projectors.push_back(std::move(p));
  }
  return realize(psi, moddec, bank, rng, false);
}

std::vector<std::pair<double, double>> sum_distribution(const Ket& psi,
                                                        const std::vector<SiteObservable>& obs) {
  return linear_combination_distribution(psi, obs, unit_weights(obs.size()));
}

std::vector<std::pair<double, double>> linear_combination_distribution(
    const Ket& psi, const std::vector<SiteObservable>& obs, const std::vector<double>& weights) {
  ClassDecomp dec = decompose(psi, obs, weights, false);
  return branch_distribution(psi, dec.sums, dec.projectors, dec.delta, false);
}

std::vector<std::pair<double, double>> product_positive_distribution(
    const Ket& psi, const std::vector<SiteObservable>& obs) {
  ClassDecomp dec = decompose(psi, obs, unit_weights(obs.size()), true);
  return branch_distribution(psi, dec.sums, dec.projectors, dec.delta, true);
}

std::vector<std::pair<double, double>> modular_sum_distribution(
    const Ket& psi, const std::vector<SiteObservable>& obs, double modulus) {
  if (modulus <= 0) throw PreconditionError("meters: modulus must be positive");
  ClassDecomp dec = decompose(psi, obs, unit_weights(obs.size()), false);
  if (dec.delta == 0.0) return {{0.0, 1.0}};
  double ratio = modulus / dec.delta;
  long d = std::lround(ratio);
  if (d < 1 || std::abs(ratio - d) > 1e-9)
    throw PreconditionError("meters: modulus must be an integer multiple of Delta");
  std::map<double, double> acc;
  for (std::size_t i = 0; i < dec.sums.size(); ++i) {
    double p = (dec.projectors[i] * psi.amps()).squaredNorm();
    if (p < 1e-14) continue;
    long r = ((dec.sums[i] % d) + d) % d;
    acc[r * dec.delta] += p;
  }
  return {acc.begin(), acc.end()};
}

void couple_meter(Vec& joint, const std::vector<int>& jointDims, const Operator& op,
                  int systemSite, int meterSite, double delta) {
  int ns = static_cast<int>(jointDims.size());
  if (systemSite < 0 || systemSite >= ns || meterSite < 0 || meterSite >= ns ||
      systemSite == meterSite)
    throw PreconditionError("couple_meter: bad site pair");
  int ds = jointDims[systemSite];
  int d = jointDims[meterSite];
  if (op.dim() != ds) throw PreconditionError("couple_meter: operator dimension mismatch");

  Eigen::SelfAdjointEigenSolver<Mat> es(op.mat());
  std::vector<long> shift(ds);
  for (int e = 0; e < ds; ++e) {
    double lambda = es.eigenvalues()(e);
    long m = delta > 0 ? std::llround(lambda / delta) : 0;
    if (std::abs(lambda - m * delta) > 1e-7)
      throw PreconditionError("couple_meter: spectrum off the lattice");
    shift[e] = ((-m) % d + d) % d;
  }

  long total = 1;
  for (int x : jointDims) total *= x;
  if (joint.size() != total) throw PreconditionError("couple_meter: vector size mismatch");

  std::vector<long> digits(ns);
  Mat block(ds, d);
  // Strides for reassembling a flat index from its digits.
  std::vector<long> stride(ns, 1);
  for (int i = ns - 2; i >= 0; --i) stride[i] = stride[i + 1] * jointDims[i + 1];

  long restTotal = total / (static_cast<long>(ds) * d);
  std::vector<int> restSites;
  for (int i = 0; i < ns; ++i)
    if (i != systemSite && i != meterSite) restSites.push_back(i);

  for (long r = 0; r < restTotal; ++r) {
    long rem = r;
    long base = 0;
    for (int i = static_cast<int>(restSites.size()) - 1; i >= 0; --i) {
      base += (rem % jointDims[restSites[i]]) * stride[restSites[i]];
      rem /= jointDims[restSites[i]];
    }
    for (int s = 0; s < ds; ++s)
      for (int j = 0; j < d; ++j)
        block(s, j) = joint(base + s * stride[systemSite] + j * stride[meterSite]);
    Mat rotated = es.eigenvectors().adjoint() * block;
    Mat shifted(ds, d);
    for (int e = 0; e < ds; ++e)
      for (int j = 0; j < d; ++j) shifted(e, (j + shift[e]) % d) = rotated(e, j);
    Mat back = es.eigenvectors() * shifted;
    for (int s = 0; s < ds; ++s)
      for (int j = 0; j < d; ++j)
        joint(base + s * stride[systemSite] + j * stride[meterSite]) = back(s, j);
  }
}

}  // namespace nlsim
