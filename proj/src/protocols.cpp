#include "nlsim/protocols.hpp"

#include <cmath>
#include <numbers>

namespace nlsim {

namespace {

constexpr double kPi = std::numbers::pi;

Vec qubit_up() { return Vec{{cx(1, 0), cx(0, 0)}}; }
Vec qubit_down() { return Vec{{cx(0, 0), cx(1, 0)}}; }
Vec qubit_xplus() { return (Vec(2) << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0)).finished(); }
Vec qubit_xminus() { return (Vec(2) << 1 / std::sqrt(2.0), -1 / std::sqrt(2.0)).finished(); }

Operator projector_on(const Vec& v) {
  return Operator::hermitian({static_cast<int>(v.size())}, v * v.adjoint());
}

// Measure one qubit site in the given orthonormal two-vector basis.
struct SiteOutcome {
  int index;
  double probability;
  Ket post;
};

SiteOutcome measure_site(const Ket& psi, int site, const Vec& v0, const Vec& v1,
                         RngStream& rng) {
  std::vector<Operator> projs = {embed_local(projector_on(v0), site, psi.dims()),
                                 embed_local(projector_on(v1), site, psi.dims())};
  MeasureResult r = measure_projective(psi, projs, rng);
  return SiteOutcome{r.outcome, r.probability, r.post};
}

void record_meter_stage(Transcript& tr, int tick, const MeterOutcome& out,
                        const std::vector<std::string>& sites, const std::string& label) {
  for (std::size_t i = 0; i < sites.size(); ++i) {
    tr.add(tick, sites[i], EventKind::LocalOp, {{"kind", "meterCoupling"}, {"stage", label}});
    tr.add(tick, sites[i], EventKind::LocalMeasure,
           {{"kind", "dialReadout"}, {"stage", label}, {"dialValue", out.dials[i]}});
  }
}

// Classical combination: every site after the first sends its record to the
// first site, which computes the value.
long combine_classically(Transcript& tr, const std::vector<std::string>& sites, Json summary) {
  long messages = 0;
  std::vector<int> ids;
  for (std::size_t i = 1; i < sites.size(); ++i) {
    ids.push_back(tr.send(2, sites[i], {{"kind", "record"}}));
    ++messages;
  }
  Json payload = {{"kind", "record"}, {"combined", std::move(summary)}};
  for (int id : ids) tr.receive(3, sites[0], id, payload);
  return messages;
}

Operator index_lower(int dim) {
  Vec d(dim);
  for (int i = 0; i < dim; ++i) d(i) = cx(-i, 0);
  return Operator::hermitian({dim}, d.asDiagonal());
}

Operator index_raise(int dim) {
  Vec d(dim);
  for (int i = 0; i < dim; ++i) d(i) = cx(i, 0);
  return Operator::hermitian({dim}, d.asDiagonal());
}

// Hermitian generator of the cyclic shift |i> -> |i+1 mod K>, with spectrum
// {2 pi k / K}.
Operator shift_generator(int dim) {
  Mat b = Mat::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    Vec f(dim);
    for (int j = 0; j < dim; ++j)
      f(j) = std::polar(1.0 / std::sqrt(static_cast<double>(dim)), 2.0 * kPi * j * k / dim);
    b += (2.0 * kPi * k / dim) * (f * f.adjoint());
  }
  return Operator::hermitian({dim}, std::move(b));
}

// Controlled-sigma_y on (b, B): sigma_y fires when the control is up.
Operator controlled_sigma_y() {
  Mat m = Mat::Zero(4, 4);
  m.block(0, 0, 2, 2) = pauli_y();
  m.block(2, 2, 2, 2) = Mat::Identity(2, 2);
  return Operator::unitary({2, 2}, std::move(m));
}

// Alice's untwist on (a, A): exp(i pi sigma_x / 4) on a when A is down.
Operator untwist_op() {
  Mat r = std::cos(kPi / 4) * Mat::Identity(2, 2) + cx(0, 1) * std::sin(kPi / 4) * pauli_x();
  Mat p0 = Mat::Zero(2, 2), p1 = Mat::Zero(2, 2);
  p0(0, 0) = 1;
  p1(1, 1) = 1;
  Mat m = Mat::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      m.block(2 * i, 2 * j, 2, 2) = r(i, j) * p1 + (i == j ? 1.0 : 0.0) * p0;
    }
  return Operator::unitary({2, 2}, std::move(m));
}

// Conditional rotation on (A, B): exp(i theta sigma_y) on B when A is down.
Operator conditional_rotation(double theta) {
  Mat rot = std::cos(theta) * Mat::Identity(2, 2) + cx(0, 1) * std::sin(theta) * pauli_y();
  Mat m = Mat::Zero(4, 4);
  m.block(0, 0, 2, 2) = Mat::Identity(2, 2);
  m.block(2, 2, 2, 2) = rot;
  return Operator::unitary({2, 2}, std::move(m));
}

Ket gr_joint_evolved(const Ket& psi) {
  if (psi.dims() != std::vector<int>{2, 2})
    throw PreconditionError("gr: input must be two qubits");
  Ket joint = tensor(make_bell(BellKind::PhiPlus), psi);  // order a, b, A, B
  joint = apply(controlled_sigma_y(), joint, {1, 3});
  joint = apply(untwist_op(), joint, {0, 2});
  return joint;
}

GrBranch gr_branch_projected(const Ket& psi, int nuA, int nuB, int zA, int zB) {
  Ket joint = gr_joint_evolved(psi);
  Vec amps = joint.amps();
  std::vector<int> dims = joint.dims();
  auto project = [&](int site, const Vec& v) {
    apply_in_place(amps, dims, embed_local(projector_on(v), site, dims), {0, 1, 2, 3});
  };
  project(0, nuA > 0 ? qubit_up() : qubit_down());
  project(1, nuB > 0 ? qubit_xplus() : qubit_xminus());
  project(2, zA == 0 ? qubit_up() : qubit_down());
  project(3, zB == 0 ? qubit_up() : qubit_down());
  double p = amps.squaredNorm();
  GrBranch out{nuA, nuB, zA ^ 1, zB, p, psi};
  if (p > 1e-12) out.full = Ket(dims, std::move(amps), true);
  return out;
}

// One nested-teleportation layer shared by the Vaidman protocols.
Mat distortion_word(const std::vector<BellKind>& word, int totalQubits, int firstQubit) {
  // Qubit 0 is the slowest-varying index, so it goes outermost.
  Mat m = Mat::Identity(1, 1);
  for (int q = totalQubits - 1; q >= 0; --q) {
    Mat local = Mat::Identity(2, 2);
    if (q >= firstQubit && q < firstQubit + static_cast<int>(word.size()))
      local = pauli_correction(word[q - firstQubit]).mat();
    Mat next(m.rows() * 2, m.cols() * 2);
    next.block(0, 0, m.rows(), m.cols()) = local(0, 0) * m;
    next.block(0, m.cols(), m.rows(), m.cols()) = local(0, 1) * m;
    next.block(m.rows(), 0, m.rows(), m.cols()) = local(1, 0) * m;
    next.block(m.rows(), m.cols(), m.rows(), m.cols()) = local(1, 1) * m;
    m = std::move(next);
  }
  return m;
}

bool word_trivial(const std::vector<BellKind>& word) {
  for (BellKind k : word)
    if (k != BellKind::PsiMinus) return false;
  return true;
}

long flip_mask(const std::vector<BellKind>& word) {
  long mask = 0;
  for (BellKind k : word) {
    mask <<= 1;
    if (k == BellKind::PhiMinus || k == BellKind::PhiPlus) mask |= 1;
  }
  return mask;
}

std::vector<std::string> word_names(const std::vector<BellKind>& word) {
  std::vector<std::string> out;
  for (BellKind k : word) out.emplace_back(bell_name(k));
  return out;
}

// Teleport the listed logical qubits and restore logical subsystem order.
std::vector<BellKind> teleport_phase(Ket& state, const std::vector<int>& logical,
                                     EbitPool& pool, RngStream& rng, Transcript& tr,
                                     const std::string& site) {
  PartialTeleportResult r = partial_teleport(state, logical, pool, rng, &tr, site, 1);
  // Reassemble: survivors keep their relative order, teleported qubits land
  // at their destinations; build the permutation back to logical order.
  int n = state.subsystems();
  std::vector<int> perm(n);
  for (int i = 0, d = 0; i < n; ++i) {
    if (r.survivors[i] >= 0)
      perm[i] = r.survivors[i];
    else
      perm[i] = r.destinations[d++];
  }
  // survivors entries index untouched originals; teleported ones are -1 and
  // consumed in order, matching `logical`'s order.
  state = permute_subsystems(r.post, perm);
  return r.outcomes;
}

struct EigenFrame {
  Mat v;                       // columns are eigenvectors
  std::vector<double> values;  // eigenvalue per column
};

EigenFrame resolve_eigenframe(const Operator& O, const std::optional<Mat>& eigenbasis) {
  long d = O.dim();
  if ((O.mat() - O.mat().adjoint()).cwiseAbs().maxCoeff() > 1e-10)
    throw PreconditionError("vaidman: observable must be Hermitian");
  EigenFrame out;
  if (eigenbasis) {
    const Mat& v = *eigenbasis;
    if (v.rows() != d || v.cols() != d ||
        (v.adjoint() * v - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
      throw PreconditionError("vaidman: supplied eigenbasis is not unitary");
    Mat diag = v.adjoint() * O.mat() * v;
    for (long i = 0; i < d; ++i)
      for (long j = 0; j < d; ++j)
        if (i != j && std::abs(diag(i, j)) > 1e-8)
          throw PreconditionError("vaidman: supplied basis does not diagonalize the observable");
    out.v = v;
    for (long i = 0; i < d; ++i) out.values.push_back(diag(i, i).real());
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(O.mat());
  bool degenerate = false;
  for (long i = 0; i + 1 < d; ++i)
    if (std::abs(es.eigenvalues()(i + 1) - es.eigenvalues()(i)) < 1e-8) degenerate = true;
  if (degenerate) {
    Mat off = O.mat();
    off.diagonal().setZero();
    if (off.cwiseAbs().maxCoeff() > 1e-10)
      throw PreconditionError(
          "vaidman: degenerate observable; supply an explicit product-resolvable eigenbasis");
    // Diagonal observable: the computational basis is an eigenbasis.
    out.v = Mat::Identity(d, d);
    for (long i = 0; i < d; ++i) out.values.push_back(O.mat()(i, i).real());
    return out;
  }
  out.v = es.eigenvectors();
  for (long i = 0; i < d; ++i) out.values.push_back(es.eigenvalues()(i));
  return out;
}

long sample_z_product(const Ket& state, RngStream& rng, Ket& collapsed) {
  std::vector<double> probs(state.dim());
  for (long i = 0; i < state.dim(); ++i) probs[i] = std::norm(state.amps()(i));
  long b = static_cast<long>(rng.pick(probs));
  collapsed = Ket::basis(state.dims(), b);
  return b;
}

ProtocolResult vaidman_failure(Transcript tr, Resources res, const std::string& reason) {
  ProtocolResult out;
  out.inferred = {{"success", false}, {"reason", reason}};
  out.post = std::nullopt;
  out.resources = res;
  out.transcript = std::move(tr);
  return out;
}

}  // namespace

Ket twisted_state(int index) { return twisted_state(index, 0.0); }

Ket twisted_state(int index, double alpha) {
  double g = alpha + kPi / 4;
  Vec v = Vec::Zero(4);
  switch (index) {
    case 1: v(0) = 1; break;                                // up, up
    case 2: v(1) = 1; break;                                // up, down
    case 3: v(2) = std::cos(g); v(3) = std::sin(g); break;  // down, tilted +
    case 4: v(2) = std::sin(g); v(3) = -std::cos(g); break; // down, tilted -
    default: throw PreconditionError("twisted_state: index must be 1..4");
  }
  return Ket({2, 2}, std::move(v));
}

ProtocolResult aa_total_spin_z(const Ket& psi, RngStream& rng) {
  if (psi.dims() != std::vector<int>{2, 2})
    throw PreconditionError("aa_total_spin_z: input must be two qubits");
  MeterBank bank = prepare_bank(2, 5);
  MeterOutcome out = measure_sum(psi, {{spin_z(), 0}, {spin_z(), 1}}, std::move(bank), rng);

  ProtocolResult result;
  std::vector<std::string> sites = {"Alice", "Bob"};
  record_meter_stage(result.transcript, 1, out, sites, "sigma_z sum");
  result.resources.messages = combine_classically(result.transcript, sites,
                                                  {{"value", out.value}});
  result.inferred = {{"value", out.value}};
  result.post = out.post;
  result.extra = {{"dials", out.dials},
                  {"probability", out.probability},
                  {"spacing", out.spacing}};
  return result;
}

ProtocolResult aa_verify_singlet(const Ket& psi, RngStream& rng) {
  if (psi.dims() != std::vector<int>{2, 2})
    throw PreconditionError("aa_verify_singlet: input must be two qubits");
  ProtocolResult result;
  std::vector<std::string> sites = {"Alice", "Bob"};
  Ket state = psi;
  Json values = Json::array();
  bool yes = true;
  const struct {
    Operator op;
    const char* label;
  } axes[] = {{spin_x(), "sigma_x sum"}, {spin_y(), "sigma_y sum"}, {spin_z(), "sigma_z sum"}};
  for (const auto& axis : axes) {
    MeterOutcome out =
        measure_sum(state, {{axis.op, 0}, {axis.op, 1}}, prepare_bank(2, 5), rng);
    record_meter_stage(result.transcript, 1, out, sites, axis.label);
    values.push_back(out.value);
    if (std::abs(out.value) > 1e-9) yes = false;
    state = out.post;
  }
  result.resources.messages =
      combine_classically(result.transcript, sites, {{"verified", yes}});
  result.inferred = {{"verified", yes}};
  result.post = state;
  result.extra = {{"sumValues", values}};
  return result;
}

ProtocolResult verify_canonical_equal(const Ket& psi, int parties, int localDim,
                                      RngStream& rng) {
  if (parties < 2 || localDim < 2)
    throw PreconditionError("verify_canonical_equal: need M >= 2 parties of dimension K >= 2");
  if (psi.dims() != std::vector<int>(parties, localDim))
    throw PreconditionError("verify_canonical_equal: state shape does not match (M, K)");

  ProtocolResult result;
  std::vector<std::string> sites;
  for (int m = 0; m < parties; ++m) sites.push_back("party" + std::to_string(m + 1));

  Ket state = psi;
  bool yes = true;
  Json stage1 = Json::array();
  Operator a1 = index_lower(localDim);
  Operator al = index_raise(localDim);
  for (int l = 1; l < parties; ++l) {
    MeterOutcome out =
        measure_sum(state, {{a1, 0}, {al, l}}, prepare_bank(2, 2 * localDim - 1), rng);
    record_meter_stage(result.transcript, 1, out, {sites[0], sites[l]},
                       "index sum party" + std::to_string(l + 1));
    stage1.push_back(out.value);
    if (std::abs(out.value) > 1e-9) yes = false;
    state = out.post;
  }

  Operator b = shift_generator(localDim);
  std::vector<SiteObservable> obs;
  for (int m = 0; m < parties; ++m) obs.push_back({b, m});
  MeterOutcome stage2 = measure_modular_sum(state, obs, 2.0 * kPi,
                                            prepare_cyclic_bank(parties, localDim), rng);
  record_meter_stage(result.transcript, 1, stage2, sites, "shift-phase modular sum");
  if (std::abs(stage2.value) > 1e-9) yes = false;
  state = stage2.post;

  result.resources.messages =
      combine_classically(result.transcript, sites, {{"verified", yes}});
  result.inferred = {{"verified", yes}};
  result.post = state;
  result.extra = {{"stage1Values", stage1}, {"stage2Value", stage2.value}};
  return result;
}

GrBranch gr_twisted_branch(const Ket& psi, int nuA, int nuB) {
  GrBranch found{nuA, nuB, -1, -1, 0.0, psi};
  int hits = 0;
  for (int zA = 0; zA < 2; ++zA)
    for (int zB = 0; zB < 2; ++zB) {
      GrBranch b = gr_branch_projected(psi, nuA, nuB, zA, zB);
      if (b.probability > 1e-12) {
        found = b;
        ++hits;
      }
    }
  if (hits != 1)
    throw PreconditionError("gr_twisted_branch: final readouts are not deterministic here");
  return found;
}

GrBranch gr_twisted_branch(const Ket& psi, int nuA, int nuB, int finalA, int finalB) {
  return gr_branch_projected(psi, nuA, nuB, finalA ^ 1, finalB);
}

namespace {

struct GrCoreOutcome {
  int index;
  int nuA, nuB, finalA, finalB;
};

GrCoreOutcome gr_twisted_core(const Ket& psi, EbitPool& pool, RngStream& rng, Transcript& tr,
                              Resources& res) {
  if (pool.kind() != BellKind::PhiPlus)
    throw PreconditionError("gr: needs a PhiPlus resource pool");
  pool.take();
  ++res.ebitsConsumed;
  Ket joint = gr_joint_evolved(psi);
  tr.add(1, "Bob", EventKind::LocalOp, {{"kind", "controlledSigmaY"}});
  tr.add(1, "Alice", EventKind::LocalOp, {{"kind", "conditionalUntwist"}});

  SiteOutcome b = measure_site(joint, 1, qubit_xplus(), qubit_xminus(), rng);
  int nuB = b.index == 0 ? 1 : -1;
  tr.add(1, "Bob", EventKind::LocalMeasure, {{"kind", "sigma_x(b)"}, {"nu", nuB}});
  SiteOutcome a = measure_site(b.post, 0, qubit_up(), qubit_down(), rng);
  int nuA = a.index == 0 ? 1 : -1;
  tr.add(1, "Alice", EventKind::LocalMeasure, {{"kind", "sigma_z(a)"}, {"nu", nuA}});
  SiteOutcome mA = measure_site(a.post, 2, qubit_up(), qubit_down(), rng);
  tr.add(1, "Alice", EventKind::LocalMeasure, {{"kind", "sigma_z(A)"}, {"value", mA.index}});
  SiteOutcome mB = measure_site(mA.post, 3, qubit_up(), qubit_down(), rng);
  tr.add(1, "Bob", EventKind::LocalMeasure, {{"kind", "sigma_z(B)"}, {"value", mB.index}});

  int finalA = mA.index ^ 1;  // reported with the table's labeling convention
  int finalB = mB.index;

  int index = 0;
  for (int i = 1; i <= 4; ++i) {
    GrBranch cell = gr_twisted_branch(twisted_state(i), nuA, nuB);
    if (cell.finalA == finalA && cell.finalB == finalB) {
      index = i;
      break;
    }
  }
  if (index == 0) throw InternalError("gr: readout matches no twisted eigenstate");
  return GrCoreOutcome{index, nuA, nuB, finalA, finalB};
}

}  // namespace

ProtocolResult gr_twisted_basis_measure(const Ket& psi, EbitPool& pool, RngStream& rng) {
  ProtocolResult result;
  result.resources.rounds = 1;
  GrCoreOutcome out = gr_twisted_core(psi, pool, rng, result.transcript, result.resources);
  result.resources.messages = combine_classically(
      result.transcript, {"Alice", "Bob"}, {{"index", out.index}});
  result.inferred = {{"index", out.index}};
  result.post = std::nullopt;  // all four readouts consumed the state
  result.extra = {{"nuA", out.nuA},
                  {"nuB", out.nuB},
                  {"finalA", out.finalA},
                  {"finalB", out.finalB}};
  return result;
}

ProtocolResult gr_general_angle_measure(const Ket& psi, double alpha, EbitPool& pool,
                                        int maxRounds, RngStream& rng) {
  if (maxRounds < 1) throw PreconditionError("gr_general_angle: maxRounds must be >= 1");
  ProtocolResult result;
  Ket state = psi;

  auto near_multiple = [](double x, double unit) {
    double r = std::fmod(std::abs(x), unit);
    return r < 1e-12 || unit - r < 1e-12;
  };

  // Exact prospective accounting: each attempt whose angle is a multiple of
  // pi/2 is deterministic, anything else succeeds with probability 1/2.
  Json roundProbs = Json::array();
  double cumulativeFail = 1.0;
  Json cumulative = Json::array();
  {
    double th = alpha;
    for (int j = 0; j < maxRounds; ++j) {
      double p = near_multiple(th, kPi / 2) ? 1.0 : 0.5;
      roundProbs.push_back(p);
      cumulativeFail *= 1.0 - p;
      cumulative.push_back(1.0 - cumulativeFail);
      th *= 2;
    }
  }

  bool rotated = near_multiple(alpha, 2 * kPi);  // nothing to untilt
  double theta = alpha;
  int rounds = 0;
  while (!rotated && rounds < maxRounds) {
    if (pool.available() == 0)
      return vaidman_failure(std::move(result.transcript), result.resources,
                             "ebit pool exhausted during rotation rounds");
    pool.take();
    ++result.resources.ebitsConsumed;
    ++rounds;
    bool deterministic = near_multiple(theta, kPi / 2);
    int sign = rng.uniform() < 0.5 ? 1 : -1;
    state = apply(conditional_rotation(sign * theta), state, {0, 1});
    result.transcript.add(1, "Bob", EventKind::LocalOp,
                          {{"kind", "statorRotation"}, {"theta", sign * theta}});
    if (sign < 0 && deterministic) {
      // The wrong-sign map differs by exp(2i theta sigma_y) on B given A
      // down, which at these angles is a conditional phase Alice removes.
      state = apply(conditional_rotation(2 * theta), state, {0, 1});
      result.transcript.add(1, "Alice", EventKind::LocalOp,
                            {{"kind", "conditionalPhaseFix"}});
      sign = 1;
    }
    if (sign > 0) {
      rotated = true;
    } else {
      theta *= 2;
    }
  }
  if (!rotated)
    return vaidman_failure(std::move(result.transcript), result.resources,
                           "rotation did not succeed within maxRounds");

  if (pool.available() == 0)
    return vaidman_failure(std::move(result.transcript), result.resources,
                           "ebit pool exhausted before the twisted measurement");
  GrCoreOutcome out = gr_twisted_core(state, pool, rng, result.transcript, result.resources);
  result.resources.rounds = std::max(rounds, 1);
  result.resources.messages = combine_classically(
      result.transcript, {"Alice", "Bob"}, {{"index", out.index}});
  result.inferred = {{"success", true}, {"index", out.index}};
  result.post = std::nullopt;
  result.extra = {{"rotationRounds", rounds},
                  {"roundSuccessProbabilities", roundProbs},
                  {"cumulativeSuccess", cumulative},
                  {"nuA", out.nuA},
                  {"nuB", out.nuB}};
  return result;
}

PartialTeleportResult partial_teleport(const Ket& psi, const std::vector<int>& sourceQubits,
                                       EbitPool& pool, RngStream& rng, Transcript* transcript,
                                       const std::string& site, int tick) {
  if (pool.kind() != BellKind::PsiMinus)
    throw PreconditionError("partial_teleport: needs a singlet resource pool");
  for (int s : sourceQubits)
    if (s < 0 || s >= psi.subsystems() || psi.dims()[s] != 2)
      throw PreconditionError("partial_teleport: source must be an existing qubit");

  PartialTeleportResult out{.outcomes = {}, .post = psi, .destinations = {}, .survivors = {}};
  std::vector<int> pos(psi.subsystems());
  for (int i = 0; i < psi.subsystems(); ++i) pos[i] = i;

  for (int s : sourceQubits) {
    if (pos[s] < 0) throw PreconditionError("partial_teleport: qubit teleported twice");
    Ket joint = tensor(out.post, pool.take());
    int near = joint.subsystems() - 2;
    BellMeasureResult r = bell_measure(joint, pos[s], near, rng);
    if (transcript)
      transcript->add(tick, site, EventKind::LocalMeasure,
                      {{"kind", "bellMeasure"}, {"outcome", bell_name(r.kind)}});
    out.outcomes.push_back(r.kind);
    int r1 = pos[s], r2 = near;
    auto shift = [r1, r2](int t) { return t - (t > r1 ? 1 : 0) - (t > r2 ? 1 : 0); };
    for (int& t : pos)
      if (t >= 0 && t != r1) t = shift(t);
    for (int& t : out.destinations) t = shift(t);
    pos[s] = -1;
    out.destinations.push_back(r.post.subsystems() - 1);  // the far half, appended last
    out.post = r.post;
  }
  out.survivors = pos;
  return out;
}

namespace {

ProtocolResult vaidman_run(const Ket& psi, const Operator& O, int K, bool threeParty,
                           EbitPool& pool, int maxRounds, RngStream& rng,
                           const std::optional<Mat>& eigenbasis) {
  int qubits = threeParty ? 3 : 2 * K;
  if (psi.dims() != std::vector<int>(qubits, 2))
    throw PreconditionError("vaidman: state must be the expected register of qubits");
  if (O.dim() != psi.dim()) throw PreconditionError("vaidman: observable dimension mismatch");
  if (maxRounds < 1) throw PreconditionError("vaidman: maxRounds must be >= 1");
  if (pool.kind() != BellKind::PsiMinus)
    throw PreconditionError("vaidman: needs a singlet resource pool");

  EigenFrame frame = resolve_eigenframe(O, eigenbasis);
  std::vector<int> dims(qubits, 2);
  Operator vdag = Operator::unitary(dims, frame.v.adjoint());
  std::vector<int> all(qubits);
  for (int i = 0; i < qubits; ++i) all[i] = i;

  ProtocolResult result;
  Transcript& tr = result.transcript;
  Resources& res = result.resources;
  long poolStart = pool.consumed();
  Ket state = psi;

  Mat inside;                       // operator under which V-dagger was correct
  std::vector<BellKind> successWord;
  std::vector<BellKind> lastAliceWord, lastBobToCollinWord;
  bool success = false;
  int round = 0;

  try {
    // Round 1: the remote parties hand their qubits to Alice.
    round = 1;
    std::vector<BellKind> n;
    if (threeParty) {
      auto nB = teleport_phase(state, {1}, pool, rng, tr, "Bob");
      auto nC = teleport_phase(state, {2}, pool, rng, tr, "Collin");
      n = {BellKind::PsiMinus, nB[0], nC[0]};
      successWord = {nB[0], nC[0]};
    } else {
      std::vector<int> bobQubits;
      for (int q = K; q < 2 * K; ++q) bobQubits.push_back(q);
      auto w = teleport_phase(state, bobQubits, pool, rng, tr, "Bob");
      n.assign(K, BellKind::PsiMinus);
      n.insert(n.end(), w.begin(), w.end());
      successWord = w;
    }
    state = apply(vdag, state, all);
    tr.add(1, "Alice", EventKind::LocalOp, {{"kind", "eigenbasisToZ"}});
    inside = vdag.mat() * distortion_word(n, qubits, 0);

    lastAliceWord = teleport_phase(state, all, pool, rng, tr, "Alice");
    Mat trailing = distortion_word(lastAliceWord, qubits, 0);
    if (threeParty) {
      lastBobToCollinWord = teleport_phase(state, all, pool, rng, tr, "Bob");
      trailing = distortion_word(lastBobToCollinWord, qubits, 0) * trailing;
    }

    while (true) {
      if (word_trivial(successWord)) {
        success = true;
        break;
      }
      if (round == maxRounds) break;
      ++round;
      // Back to Alice; the channel choice conveys every index she lacks.
      auto m = teleport_phase(state, all, pool, rng, tr, threeParty ? "Collin" : "Bob");
      Mat known = trailing * inside;
      Operator correction = Operator::unitary(dims, vdag.mat() * known.adjoint());
      state = apply(correction, state, all);
      tr.add(1, "Alice", EventKind::LocalOp,
             {{"kind", "roundCorrection"}, {"round", round}});
      inside = correction.mat() * distortion_word(m, qubits, 0) * known;

      lastAliceWord = teleport_phase(state, all, pool, rng, tr, "Alice");
      trailing = distortion_word(lastAliceWord, qubits, 0);
      if (threeParty) {
        lastBobToCollinWord = teleport_phase(state, all, pool, rng, tr, "Bob");
        trailing = distortion_word(lastBobToCollinWord, qubits, 0) * trailing;
      }
      successWord = m;
    }
  } catch (const ResourceError&) {
    res.ebitsConsumed = pool.consumed() - poolStart;
    res.rounds = round;
    return vaidman_failure(std::move(tr), res, "ebit pool exhausted");
  }

  res.ebitsConsumed = pool.consumed() - poolStart;
  res.rounds = round;
  if (!success) return vaidman_failure(std::move(tr), res, "no undistorted round within maxRounds");

  const std::string reader = threeParty ? "Collin" : "Bob";
  Ket collapsed = state;
  long bits = sample_z_product(state, rng, collapsed);
  tr.add(1, reader, EventKind::LocalMeasure, {{"kind", "zProductReadout"}, {"bits", bits}});
  long index = bits ^ flip_mask(lastAliceWord);
  if (threeParty) index ^= flip_mask(lastBobToCollinWord);

  Json summary = {{"index", index}, {"eigenvalue", frame.values[index]}};
  std::vector<std::string> sites = threeParty
                                       ? std::vector<std::string>{"Alice", "Bob", "Collin"}
                                       : std::vector<std::string>{"Alice", "Bob"};
  res.messages = combine_classically(tr, sites, summary);

  result.inferred = {{"success", true},
                     {"eigenvalue", frame.values[index]},
                     {"index", index}};
  result.post = Ket::basis(dims, index);
  result.extra = {{"rawBits", bits},
                  {"lastAliceWord", word_names(lastAliceWord)},
                  {"rounds", round}};
  if (threeParty) result.extra["lastBobWord"] = word_names(lastBobToCollinWord);
  return result;
}

}  // namespace

ProtocolResult vaidman_bipartite_measure(const Ket& psi, const Operator& O, int K,
                                         EbitPool& pool, int maxRounds, RngStream& rng,
                                         std::optional<Mat> eigenbasis) {
  if (K < 1) throw PreconditionError("vaidman: K must be >= 1");
  return vaidman_run(psi, O, K, false, pool, maxRounds, rng, eigenbasis);
}

ProtocolResult vaidman_three_party_measure(const Ket& psi, const Operator& O, EbitPool& pool,
                                           int maxRounds, RngStream& rng,
                                           std::optional<Mat> eigenbasis) {
  return vaidman_run(psi, O, 1, true, pool, maxRounds, rng, eigenbasis);
}

}  // namespace nlsim
