#include "nlsim/causality.hpp"

#include <Eigen/QR>
#include <cmath>
#include <numbers>

#include "nlsim/bell.hpp"
#include "nlsim/meters.hpp"
#include "nlsim/protocols.hpp"

namespace nlsim {

namespace {

constexpr double kPi = std::numbers::pi;

Mat kron_mat(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vec kron_vec(const Vec& a, const Vec& b) {
  Vec out(a.size() * b.size());
  for (long i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

Vec pointer_zero(long dim) {
  Vec v = Vec::Zero(dim);
  v(0) = 1;
  return v;
}

Mat eigenspace_projector(const Operator& A, double a) {
  if ((A.mat() - A.mat().adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw PreconditionError("causality: observable must be Hermitian");
  Eigen::SelfAdjointEigenSolver<Mat> es(A.mat());
  Mat P = Mat::Zero(A.dim(), A.dim());
  bool hit = false;
  for (long i = 0; i < A.dim(); ++i) {
    if (std::abs(es.eigenvalues()(i) - a) < 1e-8) {
      P += es.eigenvectors().col(i) * es.eigenvectors().col(i).adjoint();
      hit = true;
    }
  }
  if (!hit) throw PreconditionError("causality: value is not in the observable's spectrum");
  return P;
}

std::vector<int> joint_dims(const MeasurementModel& m) {
  std::vector<int> dims = m.systemDims;
  if (m.apparatusDim > 1) dims.push_back(static_cast<int>(m.apparatusDim));
  return dims;
}

Ket perturb_site(const Ket& psi, int site, const Mat& u) {
  return apply(Operator::unitary({static_cast<int>(u.rows())}, u), psi, {site});
}

// Worst deviation with the measured and perturbed roles fixed.
void scan_direction(const MeasurementModel& model, const Ket& psi, int measSite, int uSite,
                    const std::vector<Mat>& us,
                    const std::vector<std::pair<Operator, double>>& obs,
                    SignalingReport& report) {
  for (std::size_t oi = 0; oi < obs.size(); ++oi) {
    double p0 = local_outcome_prob(model, psi, measSite, obs[oi].first, obs[oi].second);
    for (std::size_t ui = 0; ui < us.size(); ++ui) {
      double p1 =
          local_outcome_prob(model, perturb_site(psi, uSite, us[ui]), measSite, obs[oi].first,
                             obs[oi].second);
      ++report.samplesTested;
      double dev = std::abs(p1 - p0);
      if (dev > report.maxDeviation) {
        report.maxDeviation = dev;
        report.witness = {{"measuredSite", measSite},
                          {"perturbedSite", uSite},
                          {"unitaryIndex", ui},
                          {"eigenvalue", obs[oi].second},
                          {"pBaseline", p0},
                          {"pPerturbed", p1}};
      }
    }
  }
}

// Controlled pointer shift: pointer index advances by the joint basis index
// of the control subsystems, modulo the pointer dimension.
Operator record_into_pointer(const std::vector<int>& controlDims, int pointerDim) {
  long c = product_of(controlDims);
  long n = c * pointerDim;
  Mat m = Mat::Zero(n, n);
  for (long k = 0; k < c; ++k)
    for (long p = 0; p < pointerDim; ++p)
      m(k * pointerDim + (p + k) % pointerDim, k * pointerDim + p) = 1;
  std::vector<int> dims = controlDims;
  dims.push_back(pointerDim);
  return Operator::unitary(std::move(dims), std::move(m));
}

Mat hadamard() {
  Mat h(2, 2);
  h << 1, 1, 1, -1;
  return h / std::sqrt(2.0);
}

Mat cnot() {
  Mat m = Mat::Zero(4, 4);
  m(0, 0) = m(1, 1) = m(2, 3) = m(3, 2) = 1;
  return m;
}

// Maps the Bell basis of a qubit pair to the computational basis.
Operator bell_to_computational() {
  Mat m = tensor(Operator::unitary({2}, hadamard()), Operator::identity({2})).mat() *
          Operator::unitary({2, 2}, cnot()).mat();
  return Operator::unitary({2, 2}, std::move(m));
}

Vec t_vec(int which) {
  Vec v = Vec::Zero(4);
  switch (which) {
    case 1: v(0) = 1; break;  // uu
    case 2: v(3) = 1; break;  // dd
    case 3: v(1) = 1; break;  // ud
    case 4: v(2) = 1; break;  // du
  }
  return v;
}

std::vector<Mat> rank_one_projectors(const std::vector<Vec>& basis) {
  std::vector<Mat> out;
  for (const Vec& v : basis) out.push_back(v * v.adjoint());
  return out;
}

}  // namespace

MeasurementModel model_from_unitary(std::string name, std::vector<int> systemDims,
                                    long apparatusDim, const Vec& apparatusInit, const Mat& U,
                                    int site1, int site2) {
  long sysDim = product_of(systemDims);
  long jointDim = sysDim * apparatusDim;
  if (apparatusInit.size() != apparatusDim)
    throw PreconditionError("model_from_unitary: apparatus initial state has the wrong size");
  if (std::abs(apparatusInit.norm() - 1.0) > 1e-9)
    throw PreconditionError("model_from_unitary: apparatus initial state must be normalized");
  if (U.rows() != jointDim || U.cols() != jointDim)
    throw PreconditionError("model_from_unitary: unitary has the wrong dimension");
  if ((U.adjoint() * U - Mat::Identity(jointDim, jointDim)).cwiseAbs().maxCoeff() > 1e-10)
    throw PreconditionError("model_from_unitary: interaction is not unitary");

  MeasurementModel m;
  m.name = std::move(name);
  m.systemDims = std::move(systemDims);
  m.site1 = site1;
  m.site2 = site2;
  m.apparatusDim = apparatusDim;
  m.evolve = [U, init = Vec(apparatusInit), dims = m.systemDims](const Ket& psi) {
    if (psi.dims() != dims) throw PreconditionError("model: state shape mismatch");
    return Vec(U * kron_vec(psi.amps(), init));
  };
  return m;
}

MeasurementModel projective_model(std::string name, std::vector<int> systemDims,
                                  const std::vector<Mat>& projectors, int site1, int site2) {
  long sysDim = product_of(systemDims);
  int k = static_cast<int>(projectors.size());
  if (k < 2) throw PreconditionError("projective_model: need at least two outcomes");
  Mat sum = Mat::Zero(sysDim, sysDim);
  for (const Mat& p : projectors) {
    if (p.rows() != sysDim || (p - p.adjoint()).cwiseAbs().maxCoeff() > 1e-10 ||
        (p * p - p).cwiseAbs().maxCoeff() > 1e-10)
      throw PreconditionError("projective_model: not a projector");
    sum += p;
  }
  if ((sum - Mat::Identity(sysDim, sysDim)).cwiseAbs().maxCoeff() > 1e-10)
    throw PreconditionError("projective_model: projectors do not resolve the identity");

  Mat shift = Mat::Zero(k, k);
  for (int i = 0; i < k; ++i) shift((i + 1) % k, i) = 1;
  Mat u = Mat::Zero(sysDim * k, sysDim * k);
  Mat power = Mat::Identity(k, k);
  for (int i = 0; i < k; ++i) {
    u += kron_mat(projectors[i], power);
    power = shift * power;
  }
  return model_from_unitary(std::move(name), std::move(systemDims), k, pointer_zero(k), u,
                            site1, site2);
}

double local_outcome_prob(const MeasurementModel& model, const Ket& psi, int site,
                          const Operator& A, double a) {
  if (psi.dims() != model.systemDims)
    throw PreconditionError("local_outcome_prob: state shape mismatch");
  if (site < 0 || site >= static_cast<int>(model.systemDims.size()))
    throw PreconditionError("local_outcome_prob: no such system site");
  if (A.dim() != model.systemDims[site])
    throw PreconditionError("local_outcome_prob: observable dimension mismatch");
  Mat P = eigenspace_projector(A, a);
  Vec joint = model.evolve(psi);
  std::vector<int> dims = joint_dims(model);
  if (joint.size() != product_of(dims))
    throw InternalError("local_outcome_prob: evolve produced the wrong dimension");
  apply_in_place(joint, dims, Operator::hermitian({model.systemDims[site]}, P), {site});
  double p = joint.squaredNorm();
  if (p < -1e-10 || p > 1 + 1e-10)
    throw InternalError("local_outcome_prob: probability out of range");
  return p;
}

Json signaling_report_to_json(const SignalingReport& r) {
  return Json{{"maxDeviation", r.maxDeviation},
              {"witness", r.witness},
              {"samplesTested", r.samplesTested}};
}

SignalingReport signaling_score(const MeasurementModel& model, const Ket& psi,
                                const std::vector<Mat>& u2samples,
                                const std::vector<std::pair<Operator, double>>& a1samples) {
  for (const Mat& u : u2samples) {
    if (u.rows() != model.systemDims[model.site2] || u.rows() != u.cols())
      throw PreconditionError("signaling_score: sample not local to site 2");
    if ((u.adjoint() * u - Mat::Identity(u.rows(), u.rows())).cwiseAbs().maxCoeff() > 1e-10)
      throw PreconditionError("signaling_score: sample not unitary");
  }
  SignalingReport report;
  scan_direction(model, psi, model.site1, model.site2, u2samples, a1samples, report);
  return report;
}

std::vector<Mat> structured_unitaries(int dim) {
  std::vector<Mat> out;
  if (dim == 2) {
    for (const Mat& s : {pauli_x(), pauli_y(), pauli_z()}) {
      out.push_back(s);
      for (double ang : {kPi / 4, -kPi / 4})
        out.push_back(std::cos(ang) * Mat::Identity(2, 2) + cx(0, 1) * std::sin(ang) * s);
    }
    return out;
  }
  Mat shift = Mat::Zero(dim, dim);
  for (int i = 0; i < dim; ++i) shift((i + 1) % dim, i) = 1;
  Mat power = shift;
  for (int p = 1; p < dim; ++p, power = shift * power) out.push_back(power);
  Mat f(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      f(i, j) = std::polar(1.0 / std::sqrt(static_cast<double>(dim)), 2 * kPi * i * j / dim);
  out.push_back(f);
  out.push_back(f.adjoint());
  Vec phases(dim);
  for (int i = 0; i < dim; ++i) phases(i) = std::polar(1.0, kPi * i / dim);
  out.push_back(Mat(phases.asDiagonal()));
  return out;
}

std::vector<Mat> haar_unitaries(int dim, int count, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<Mat> out;
  for (int n = 0; n < count; ++n) {
    RngStream sub = rng.derive(n);
    Mat g(dim, dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) g(i, j) = cx(sub.gaussian(), sub.gaussian());
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ();
    Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < dim; ++i) {
      cx d = r(i, i);
      q.col(i) *= d / std::abs(d);
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<std::pair<Operator, double>> observable_battery(int dim) {
  std::vector<std::pair<Operator, double>> out;
  if (dim == 2) {
    for (const Mat& s : {pauli_x(), pauli_y(), pauli_z()}) {
      Operator op = Operator::hermitian({2}, s);
      out.emplace_back(op, 1.0);
      out.emplace_back(op, -1.0);
    }
    return out;
  }
  Vec values(dim);
  for (int i = 0; i < dim; ++i) values(i) = cx(i, 0);
  Operator diag = Operator::hermitian({dim}, values.asDiagonal());
  Mat f(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      f(i, j) = std::polar(1.0 / std::sqrt(static_cast<double>(dim)), 2 * kPi * i * j / dim);
  Operator fourier = Operator::hermitian({dim}, f * values.asDiagonal() * f.adjoint());
  for (int i = 0; i < dim; ++i) {
    out.emplace_back(diag, static_cast<double>(i));
    out.emplace_back(fourier, static_cast<double>(i));
  }
  return out;
}

SignalingReport bidirectional_scan(const MeasurementModel& model, const Ket& psi,
                                   int haarCount, std::uint64_t seed) {
  SignalingReport report;
  int pass = 0;
  for (auto [meas, pert] : {std::pair{model.site1, model.site2},
                            std::pair{model.site2, model.site1}}) {
    std::vector<Mat> us = structured_unitaries(model.systemDims[pert]);
    if (haarCount > 0) {
      auto haar = haar_unitaries(model.systemDims[pert], haarCount, seed + pass);
      us.insert(us.end(), haar.begin(), haar.end());
    }
    scan_direction(model, psi, meas, pert, us, observable_battery(model.systemDims[meas]),
                   report);
    ++pass;
  }
  return report;
}

namespace {

void require_in_subspace(const Ket& psi, int site1, int h0dim1, bool inside) {
  // `inside`: all weight on the first h0dim1 site1 levels; otherwise all
  // weight strictly outside them.
  const std::vector<int>& dims = psi.dims();
  long stride = 1;
  for (std::size_t s = site1 + 1; s < dims.size(); ++s) stride *= dims[s];
  double bad = 0;
  for (long i = 0; i < psi.dim(); ++i) {
    long level = (i / stride) % dims[site1];
    bool in = level < h0dim1;
    if (in != inside) bad += std::norm(psi.amps()(i));
  }
  if (bad > 1e-10)
    throw PreconditionError("pv check: state has weight outside the stated subspace");
}

}  // namespace

double check_pv_theorem1(const MeasurementModel& model, const Ket& psi0, int h0dim1,
                         const std::vector<Ket>& testStates, const Operator& A1, double a) {
  require_in_subspace(psi0, model.site1, h0dim1, true);
  double p0 = local_outcome_prob(model, psi0, model.site1, A1, a);
  double spread = 0;
  for (const Ket& psi : testStates) {
    require_in_subspace(psi, model.site1, h0dim1, true);
    spread = std::max(spread,
                      std::abs(local_outcome_prob(model, psi, model.site1, A1, a) - p0));
  }
  return spread;
}

double check_pv_theorem2(const MeasurementModel& model, const Ket& psi0, int h0dim1,
                         const Ket& psiPrime, const Ket& psiDoublePrime, cx alpha, cx beta,
                         const Operator& A1, double a) {
  if (std::abs(std::norm(alpha) + std::norm(beta) - 1.0) > 1e-9)
    throw PreconditionError("pv theorem 2: |alpha|^2 + |beta|^2 must be 1");
  require_in_subspace(psi0, model.site1, h0dim1, true);
  require_in_subspace(psiPrime, model.site1, h0dim1, true);
  require_in_subspace(psiDoublePrime, model.site1, h0dim1, false);
  Ket combined(psiPrime.dims(), alpha * psiPrime.amps() + beta * psiDoublePrime.amps(), true);
  double lhs = local_outcome_prob(model, combined, model.site1, A1, a);
  double rhs = std::norm(alpha) * local_outcome_prob(model, psi0, model.site1, A1, a) +
               std::norm(beta) * local_outcome_prob(model, psiDoublePrime, model.site1, A1, a);
  return std::abs(lhs - rhs);
}

MeasurementModel phi_model(double phi) {
  std::vector<Vec> basis = {std::cos(phi) * t_vec(3) + std::sin(phi) * t_vec(4),
                            std::sin(phi) * t_vec(3) - std::cos(phi) * t_vec(4), t_vec(1),
                            t_vec(2)};
  return projective_model("phi_family", {2, 2}, rank_one_projectors(basis));
}

MeasurementModel entangled_projector_model(double alpha, double beta) {
  Vec uu = t_vec(1), dd = t_vec(2), ud = t_vec(3), du = t_vec(4);
  std::vector<Vec> basis = {alpha * uu + beta * dd, beta * uu - alpha * dd,
                            alpha * ud + beta * du, beta * ud - alpha * du};
  return projective_model("entangled_projector", {2, 2}, rank_one_projectors(basis));
}

SignalingReport entangled_projector_signaling(double alpha, double beta) {
  if (std::abs(alpha * alpha + beta * beta - 1.0) > 1e-9)
    throw PreconditionError("entangled_projector_signaling: alpha^2 + beta^2 must be 1");
  MeasurementModel model = entangled_projector_model(alpha, beta);
  double isq = 1 / std::sqrt(2.0);
  std::vector<Ket> tests = {Ket({2, 2}, t_vec(1)), Ket({2, 2}, t_vec(2)),
                            Ket({2, 2}, isq * (t_vec(1) + t_vec(2))), make_bell(BellKind::PsiMinus),
                            Ket({2, 2}, t_vec(3))};
  SignalingReport worst;
  for (const Ket& psi : tests) {
    SignalingReport r = bidirectional_scan(model, psi, 0, 0);
    worst.samplesTested += r.samplesTested;
    if (r.maxDeviation > worst.maxDeviation) {
      worst.maxDeviation = r.maxDeviation;
      worst.witness = r.witness;
      worst.witness["testState"] = ket_to_json(psi);
    }
  }
  return worst;
}

SignalingReport degenerate_eigenstate_signal_demo() {
  // Variable on two qubits with eigenvalue 0 on span{00, 01, 10} and a
  // distinct eigenvalue on |11>. Site 2 holds a1|0> + a2|1>; site 1
  // prepares |0> (joint state degenerate, undisturbed) or |1> (measurement
  // resolves site 2's superposition). Site 2 then verifies its own state.
  double a1 = std::sqrt(0.7), a2 = std::sqrt(0.3);
  Mat pnd = Mat::Zero(4, 4);
  pnd(3, 3) = 1;
  MeasurementModel model = projective_model("degenerate_demo", {2, 2},
                                            {Mat::Identity(4, 4) - pnd, pnd});
  Vec local(2);
  local << a1, a2;
  Operator verify = Operator::hermitian({2}, local * local.adjoint());

  auto yes_prob = [&](int prep1) {
    Vec v = Vec::Zero(4);
    v(prep1 * 2 + 0) = a1;
    v(prep1 * 2 + 1) = a2;
    return local_outcome_prob(model, Ket({2, 2}, v), 1, verify, 1.0);
  };
  double pKeep = yes_prob(0);
  double pDisturb = yes_prob(1);
  SignalingReport r;
  r.maxDeviation = std::abs(pKeep - pDisturb);
  r.samplesTested = 2;
  r.witness = {{"yesGivenDegeneratePrep", pKeep},
               {"yesGivenResolvingPrep", pDisturb},
               {"amplitudeSquared", a1 * a1}};
  return r;
}

std::vector<std::pair<double, double>> phi_scan(int gridPoints) {
  if (gridPoints < 1) throw PreconditionError("phi_scan: need at least one grid point");
  std::vector<std::pair<double, double>> out;
  Ket singlet = make_bell(BellKind::PsiMinus);
  for (int k = 0; k < gridPoints; ++k) {
    double phi = k * kPi / gridPoints;
    SignalingReport r = bidirectional_scan(phi_model(phi), singlet, 0, 0);
    out.emplace_back(phi, r.maxDeviation);
  }
  return out;
}

namespace {

Operator spin_along(const Mat& pauli) { return Operator::hermitian({2}, 0.5 * pauli); }

}  // namespace

MeasurementModel total_spin_z_model() {
  MeterBank bank = prepare_bank(2, 5);
  MeasurementModel m;
  m.name = "aa_total_spin_z";
  m.systemDims = {2, 2};
  m.apparatusDim = bank.state.dim();
  m.evolve = [bankState = bank.state](const Ket& psi) {
    Vec joint = kron_vec(psi.amps(), bankState.amps());
    std::vector<int> dims = {2, 2, 5, 5};
    couple_meter(joint, dims, spin_along(pauli_z()), 0, 2, 0.5);
    couple_meter(joint, dims, spin_along(pauli_z()), 1, 3, 0.5);
    return joint;
  };
  return m;
}

MeasurementModel verify_singlet_model() {
  MeterBank bank = prepare_bank(2, 5);
  MeasurementModel m;
  m.name = "aa_verify_singlet";
  m.systemDims = {2, 2};
  m.apparatusDim = bank.state.dim() * bank.state.dim() * bank.state.dim();
  m.evolve = [bankState = bank.state](const Ket& psi) {
    Vec joint = kron_vec(psi.amps(), bankState.amps());
    joint = kron_vec(joint, bankState.amps());
    joint = kron_vec(joint, bankState.amps());
    std::vector<int> dims = {2, 2, 5, 5, 5, 5, 5, 5};
    const Mat paulis[3] = {pauli_x(), pauli_y(), pauli_z()};
    for (int axis = 0; axis < 3; ++axis) {
      couple_meter(joint, dims, spin_along(paulis[axis]), 0, 2 + 2 * axis, 0.5);
      couple_meter(joint, dims, spin_along(paulis[axis]), 1, 3 + 2 * axis, 0.5);
    }
    return joint;
  };
  return m;
}

MeasurementModel canonical_equal_model() {
  MeterBank sumBank = prepare_bank(2, 3);
  MeterBank modBank = prepare_cyclic_bank(2, 2);
  MeasurementModel m;
  m.name = "verify_canonical_equal";
  m.systemDims = {2, 2};
  m.apparatusDim = sumBank.state.dim() * modBank.state.dim();
  m.evolve = [sumState = sumBank.state, modState = modBank.state](const Ket& psi) {
    Vec joint = kron_vec(psi.amps(), sumState.amps());
    joint = kron_vec(joint, modState.amps());
    std::vector<int> dims = {2, 2, 3, 3, 2, 2};
    Vec lower(2), raise(2);
    lower << cx(0, 0), cx(-1, 0);
    raise << cx(0, 0), cx(1, 0);
    couple_meter(joint, dims, Operator::hermitian({2}, lower.asDiagonal()), 0, 2, 1.0);
    couple_meter(joint, dims, Operator::hermitian({2}, raise.asDiagonal()), 1, 3, 1.0);
    // Hermitian generator of the local cyclic shift: spectrum {0, pi}.
    Mat gen = kPi * 0.5 * (Mat::Identity(2, 2) - pauli_x());
    couple_meter(joint, dims, Operator::hermitian({2}, gen), 0, 4, kPi);
    couple_meter(joint, dims, Operator::hermitian({2}, gen), 1, 5, kPi);
    return joint;
  };
  return m;
}

MeasurementModel pv_psi0_model() {
  MeterBank sumBank = prepare_bank(2, 7);
  MeterBank modBank = prepare_cyclic_bank(2, 2);
  MeasurementModel m;
  m.name = "pv_psi0_verification";
  m.systemDims = {3, 3};
  m.apparatusDim = sumBank.state.dim() * modBank.state.dim();
  m.evolve = [sumState = sumBank.state, modState = modBank.state](const Ket& psi) {
    Vec joint = kron_vec(psi.amps(), sumState.amps());
    joint = kron_vec(joint, modState.amps());
    std::vector<int> dims = {3, 3, 7, 7, 2, 2};
    Vec a1(3), a2(3);
    a1 << cx(0, 0), cx(-1, 0), cx(-3, 0);
    a2 << cx(0, 0), cx(1, 0), cx(2, 0);
    couple_meter(joint, dims, Operator::hermitian({3}, a1.asDiagonal()), 0, 2, 1.0);
    couple_meter(joint, dims, Operator::hermitian({3}, a2.asDiagonal()), 1, 3, 1.0);
    // Phase observable separating (|00>+|11>) from (|00>-|11>) by its sum
    // mod 2 pi: pi * |v><v| with v = (|0>-|1>)/sqrt2.
    Vec v(3);
    v << 1 / std::sqrt(2.0), -1 / std::sqrt(2.0), 0;
    Mat b = kPi * (v * v.adjoint());
    couple_meter(joint, dims, Operator::hermitian({3}, b), 0, 4, kPi);
    couple_meter(joint, dims, Operator::hermitian({3}, b), 1, 5, kPi);
    return joint;
  };
  return m;
}

MeasurementModel gr_twisted_model() {
  MeasurementModel m;
  m.name = "gr_twisted";
  m.systemDims = {2, 2};
  m.apparatusDim = 64;  // ancillas a, b plus four record qubits
  m.evolve = [](const Ket& psi) {
    Vec joint = kron_vec(psi.amps(), make_bell(BellKind::PhiPlus).amps());
    joint = kron_vec(joint, pointer_zero(16));
    // Order: A, B, a, b, r1..r4.
    std::vector<int> dims = {2, 2, 2, 2, 2, 2, 2, 2};
    Mat csy = Mat::Zero(4, 4);
    csy.block(0, 0, 2, 2) = pauli_y();
    csy.block(2, 2, 2, 2) = Mat::Identity(2, 2);
    apply_in_place(joint, dims, Operator::unitary({2, 2}, csy), {3, 1});
    Mat rot = std::cos(kPi / 4) * Mat::Identity(2, 2) +
              cx(0, 1) * std::sin(kPi / 4) * pauli_x();
    Mat cu = Mat::Zero(4, 4);
    // Rotation on a fires when A is down; control second here.
    cu(0, 0) = 1;
    cu(2, 2) = 1;
    cu(1, 1) = rot(0, 0);
    cu(1, 3) = rot(0, 1);
    cu(3, 1) = rot(1, 0);
    cu(3, 3) = rot(1, 1);
    apply_in_place(joint, dims, Operator::unitary({2, 2}, cu), {2, 0});
    // Deferred measurements: rotate sigma_x(b) to the z basis, then copy
    // each readout into its record qubit.
    apply_in_place(joint, dims, Operator::unitary({2}, hadamard()), {3});
    Operator copy = Operator::unitary({2, 2}, cnot());
    apply_in_place(joint, dims, copy, {3, 4});
    apply_in_place(joint, dims, copy, {2, 5});
    apply_in_place(joint, dims, copy, {0, 6});
    apply_in_place(joint, dims, copy, {1, 7});
    return joint;
  };
  return m;
}

MeasurementModel vaidman_round1_model() {
  MeasurementModel m;
  m.name = "vaidman_round1";
  m.systemDims = {2, 2};
  m.apparatusDim = 4096;  // three singlets and three Bell-outcome pointers
  m.evolve = [](const Ket& psi) {
    Vec singlet = make_bell(BellKind::PsiMinus).amps();
    Vec joint = kron_vec(psi.amps(), singlet);
    joint = kron_vec(joint, singlet);
    joint = kron_vec(joint, singlet);
    joint = kron_vec(joint, pointer_zero(64));
    // Order: s0 (Alice), s1 (Bob), n/f pair 1, pair 2, pair 3, pointers.
    std::vector<int> dims = {2, 2, 2, 2, 2, 2, 2, 2, 4, 4, 4};
    Operator toZ = bell_to_computational();
    Operator rec = record_into_pointer({2, 2}, 4);
    // Bob hands s1 to Alice (far half is site 3).
    apply_in_place(joint, dims, toZ, {1, 2});
    apply_in_place(joint, dims, rec, {1, 2, 8});
    // Alice rotates her register (s0 and the teleported qubit) to the
    // eigenbasis of the measured variable, here the twisted basis.
    Mat v(4, 4);
    v.col(0) = twisted_state(1).amps();
    v.col(1) = twisted_state(2).amps();
    v.col(2) = twisted_state(3).amps();
    v.col(3) = twisted_state(4).amps();
    apply_in_place(joint, dims, Operator::unitary({2, 2}, v.adjoint()), {0, 3});
    // Alice hands both qubits to Bob.
    apply_in_place(joint, dims, toZ, {0, 4});
    apply_in_place(joint, dims, rec, {0, 4, 9});
    apply_in_place(joint, dims, toZ, {3, 6});
    apply_in_place(joint, dims, rec, {3, 6, 10});
    return joint;
  };
  return m;
}

}  // namespace nlsim
