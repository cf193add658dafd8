#include "nlsim/statevec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nlsim {

namespace {

// Decompose a flat amplitude index into (code over `sites`, code over the
// complement), with subsystem 0 slowest-varying.
struct IndexSplit {
  long groupDim = 1;
  long restDim = 1;
  std::vector<long> groupCode;  // flat index -> index within `sites`
  std::vector<long> restCode;   // flat index -> index within complement
};

IndexSplit split_indices(const std::vector<int>& dims, const std::vector<int>& sites) {
  const long total = product_of(dims);
  std::vector<bool> inGroup(dims.size(), false);
  for (int s : sites) {
    if (s < 0 || s >= static_cast<int>(dims.size()))
      throw PreconditionError("subsystem index out of range");
    if (inGroup[s]) throw PreconditionError("duplicate subsystem index");
    inGroup[s] = true;
  }
  IndexSplit out;
  for (int s : sites) out.groupDim *= dims[s];
  out.restDim = total / out.groupDim;
  out.groupCode.resize(total);
  out.restCode.resize(total);

  std::vector<long> digits(dims.size());
  for (long idx = 0; idx < total; ++idx) {
    long rem = idx;
    for (int i = static_cast<int>(dims.size()) - 1; i >= 0; --i) {
      digits[i] = rem % dims[i];
      rem /= dims[i];
    }
    long g = 0;
    for (int s : sites) g = g * dims[s] + digits[s];
    long r = 0;
    for (int i = 0; i < static_cast<int>(dims.size()); ++i)
      if (!inGroup[i]) r = r * dims[i] + digits[i];
    out.groupCode[idx] = g;
    out.restCode[idx] = r;
  }
  return out;
}

// Amplitudes rearranged as a (group x rest) matrix.
Mat group_matrix(const Ket& psi, const std::vector<int>& sites) {
  IndexSplit ix = split_indices(psi.dims(), sites);
  Mat m = Mat::Zero(ix.groupDim, ix.restDim);
  for (long idx = 0; idx < psi.dim(); ++idx) m(ix.groupCode[idx], ix.restCode[idx]) = psi.amps()(idx);
  return m;
}

}  // namespace

Ket::Ket(std::vector<int> dims, Vec amps, bool renormalize)
    : dims_(std::move(dims)), amps_(std::move(amps)) {
  for (int d : dims_)
    if (d < 1) throw PreconditionError("Ket: subsystem dimension must be >= 1");
  long total = product_of(dims_);
  if (total > kMaxTotalDim) throw PreconditionError("Ket: total dimension exceeds 2^14");
  if (amps_.size() != total) throw PreconditionError("Ket: amplitude count does not match dims");
  double n = amps_.norm();
  if (renormalize) {
    if (n < kNormTol) throw PreconditionError("Ket: cannot normalize the zero vector");
    amps_ /= n;
  } else if (std::abs(n - 1.0) > 1e-9) {
    throw PreconditionError("Ket: amplitudes are not normalized");
  } else {
    amps_ /= n;  // trim residual drift so invariants hold to 1e-12
  }
}

Ket Ket::basis(std::vector<int> dims, long index) {
  long total = product_of(dims);
  if (index < 0 || index >= total) throw PreconditionError("Ket::basis: index out of range");
  Vec v = Vec::Zero(total);
  v(index) = 1.0;
  return Ket(std::move(dims), std::move(v));
}

cx Ket::overlap(const Ket& other) const {
  if (dim() != other.dim()) throw PreconditionError("overlap: dimension mismatch");
  return amps_.dot(other.amps_);
}

double Ket::fidelity(const Ket& other) const { return std::norm(overlap(other)); }

bool Ket::sameUpToPhase(const Ket& other, double tol) const {
  return std::abs(overlap(other)) >= 1.0 - tol;
}

Operator::Operator(std::vector<int> dims, Mat mat, Kind kind)
    : dims_(std::move(dims)), mat_(std::move(mat)), kind_(kind) {
  long total = product_of(dims_);
  if (mat_.rows() != mat_.cols()) throw PreconditionError("Operator: matrix must be square");
  if (mat_.rows() != total) throw PreconditionError("Operator: matrix side does not match dims");
  if (kind_ == Kind::Hermitian) {
    if ((mat_ - mat_.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
      throw PreconditionError("Operator: matrix is not Hermitian");
  } else if (kind_ == Kind::Unitary) {
    Mat delta = mat_ * mat_.adjoint() - Mat::Identity(total, total);
    if (delta.cwiseAbs().maxCoeff() > 1e-12)
      throw PreconditionError("Operator: matrix is not unitary");
  }
}

Operator Operator::identity(std::vector<int> dims) {
  long total = product_of(dims);
  return Operator(std::move(dims), Mat::Identity(total, total), Kind::Unitary);
}

DensityMatrix::DensityMatrix(std::vector<int> d, Mat m) : dims(std::move(d)), mat(std::move(m)) {
  long total = product_of(dims);
  if (mat.rows() != total || mat.cols() != total)
    throw PreconditionError("DensityMatrix: shape does not match dims");
  if ((mat - mat.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
    throw InternalError("DensityMatrix: not Hermitian");
  if (std::abs(mat.trace().real() - 1.0) > 1e-12 || std::abs(mat.trace().imag()) > 1e-12)
    throw InternalError("DensityMatrix: trace is not 1");
  for (double ev : eigenvalues())
    if (ev < -1e-10) throw InternalError("DensityMatrix: negative eigenvalue");
}

std::vector<double> DensityMatrix::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<Mat> es(mat, Eigen::EigenvaluesOnly);
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + mat.rows());
  return out;
}

Mat pauli_x() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Mat pauli_y() {
  Mat m(2, 2);
  m << 0, cx(0, -1), cx(0, 1), 0;
  return m;
}

Mat pauli_z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Operator spin_x() { return Operator::hermitian({2}, pauli_x() / 2.0); }
Operator spin_y() { return Operator::hermitian({2}, pauli_y() / 2.0); }
Operator spin_z() { return Operator::hermitian({2}, pauli_z() / 2.0); }

Ket tensor(const Ket& a, const Ket& b) {
  std::vector<int> dims = a.dims();
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  Vec v(a.dim() * b.dim());
  for (long i = 0; i < a.dim(); ++i)
    for (long j = 0; j < b.dim(); ++j) v(i * b.dim() + j) = a.amps()(i) * b.amps()(j);
  return Ket(std::move(dims), std::move(v));
}

Operator tensor(const Operator& a, const Operator& b) {
  std::vector<int> dims = a.dims();
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  Mat m(a.dim() * b.dim(), a.dim() * b.dim());
  for (long i = 0; i < a.dim(); ++i)
    for (long j = 0; j < a.dim(); ++j)
      m.block(i * b.dim(), j * b.dim(), b.dim(), b.dim()) = a.mat()(i, j) * b.mat();
  auto kind = (a.kind() == b.kind()) ? a.kind() : Operator::Kind::General;
  return Operator(std::move(dims), std::move(m), kind);
}

Operator embed_local(const Operator& op, int target, const std::vector<int>& dims) {
  return embed_on(op, {target}, dims);
}

Operator embed_on(const Operator& op, const std::vector<int>& targets,
                  const std::vector<int>& dims) {
  if (!std::is_sorted(targets.begin(), targets.end()))
    throw PreconditionError("embed_on: targets must be ascending");
  if (targets.size() != op.dims().size())
    throw PreconditionError("embed_on: target count does not match operator factorization");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    int t = targets[i];
    if (t < 0 || t >= static_cast<int>(dims.size()))
      throw PreconditionError("embed_on: target out of range");
    if (dims[t] != op.dims()[i]) throw PreconditionError("embed_on: dimension mismatch");
  }
  IndexSplit ix = split_indices(dims, targets);
  long total = product_of(dims);
  std::vector<long> indexOf(static_cast<std::size_t>(ix.groupDim) * ix.restDim);
  for (long idx = 0; idx < total; ++idx)
    indexOf[ix.groupCode[idx] * ix.restDim + ix.restCode[idx]] = idx;
  Mat full = Mat::Zero(total, total);
  for (long r = 0; r < ix.restDim; ++r)
    for (long gi = 0; gi < ix.groupDim; ++gi)
      for (long gj = 0; gj < ix.groupDim; ++gj) {
        cx v = op.mat()(gi, gj);
        if (v != cx(0, 0)) full(indexOf[gi * ix.restDim + r], indexOf[gj * ix.restDim + r]) = v;
      }
  auto kind = op.kind() == Operator::Kind::General ? Operator::Kind::General : op.kind();
  return Operator(dims, std::move(full), kind);
}

Ket apply(const Operator& op, const Ket& psi, const std::vector<int>& targets,
          bool renormalize) {
  if (targets.size() != op.dims().size())
    throw PreconditionError("apply: target count does not match operator factorization");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    int t = targets[i];
    if (t < 0 || t >= psi.subsystems()) throw PreconditionError("apply: target out of range");
    if (psi.dims()[t] != op.dims()[i]) throw PreconditionError("apply: dimension mismatch");
  }
  if (op.kind() != Operator::Kind::Unitary && !renormalize)
    throw PreconditionError("apply: non-unitary operator requires renormalize");

  IndexSplit ix = split_indices(psi.dims(), targets);
  Mat m = Mat::Zero(ix.groupDim, ix.restDim);
  for (long idx = 0; idx < psi.dim(); ++idx) m(ix.groupCode[idx], ix.restCode[idx]) = psi.amps()(idx);
  m = op.mat() * m;
  Vec out(psi.dim());
  for (long idx = 0; idx < psi.dim(); ++idx) out(idx) = m(ix.groupCode[idx], ix.restCode[idx]);
  return Ket(psi.dims(), std::move(out), renormalize);
}

std::vector<double> born_probabilities(const Ket& psi,
                                       const std::vector<Operator>& projectors) {
  if (projectors.empty()) throw PreconditionError("born_probabilities: empty projector set");
  long d = psi.dim();
  Mat sum = Mat::Zero(d, d);
  for (const auto& p : projectors) {
    if (p.dim() != d) throw PreconditionError("born_probabilities: projector dimension mismatch");
    if ((p.mat() - p.mat().adjoint()).cwiseAbs().maxCoeff() > kProjTol)
      throw PreconditionError("born_probabilities: projector not Hermitian");
    if ((p.mat() * p.mat() - p.mat()).cwiseAbs().maxCoeff() > kProjTol)
      throw PreconditionError("born_probabilities: projector not idempotent");
    sum += p.mat();
  }
  if ((sum - Mat::Identity(d, d)).cwiseAbs().maxCoeff() > kProjTol)
    throw PreconditionError("born_probabilities: projectors do not resolve the identity");
  std::vector<double> probs;
  probs.reserve(projectors.size());
  for (const auto& p : projectors) probs.push_back((p.mat() * psi.amps()).squaredNorm());
  return probs;
}

MeasureResult measure_projective(const Ket& psi, const std::vector<Operator>& projectors,
                                 RngStream& rng) {
  std::vector<double> probs = born_probabilities(psi, projectors);
  std::size_t k = rng.pick(probs);
  if (probs[k] < kNormTol)
    throw InternalError("measure_projective: drew a zero-probability branch");
  Vec post = projectors[k].mat() * psi.amps();
  post /= post.norm();
  return MeasureResult{static_cast<int>(k), probs[k], Ket(psi.dims(), std::move(post))};
}

DensityMatrix reduced_density(const Ket& psi, const std::vector<int>& keep) {
  if (keep.empty()) throw PreconditionError("reduced_density: keep set is empty");
  Mat m = group_matrix(psi, keep);
  std::vector<int> keptDims;
  for (int s : keep) keptDims.push_back(psi.dims()[s]);
  return DensityMatrix(keptDims, m * m.adjoint());
}

SchmidtForm schmidt_canonical(const Ket& psi, const std::vector<int>& leftSites) {
  if (leftSites.empty() || leftSites.size() >= static_cast<std::size_t>(psi.subsystems()))
    throw PreconditionError("schmidt_canonical: bipartition groups must both be nonempty");
  Mat m = group_matrix(psi, leftSites);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SchmidtForm out;
  for (long i = 0; i < svd.singularValues().size(); ++i) {
    double s = svd.singularValues()(i);
    if (s < 1e-12) break;  // singular values are descending; rest is null space
    out.coeffs.push_back(s);
    out.leftBasis.push_back(svd.matrixU().col(i));
    out.rightBasis.push_back(svd.matrixV().col(i).conjugate());
  }
  return out;
}

double expectation(const Operator& op, const Ket& psi) {
  if (op.kind() != Operator::Kind::Hermitian &&
      (op.mat() - op.mat().adjoint()).cwiseAbs().maxCoeff() > 1e-12)
    throw PreconditionError("expectation: operator is not Hermitian");
  if (op.dim() != psi.dim()) throw PreconditionError("expectation: dimension mismatch");
  cx v = psi.amps().dot(op.mat() * psi.amps());
  if (std::abs(v.imag()) >= 1e-10)
    throw InternalError("expectation: imaginary part exceeds tolerance");
  return v.real();
}

Ket contract_sites(const Ket& psi, const std::vector<int>& sites, const Vec& v) {
  IndexSplit ix = split_indices(psi.dims(), sites);
  if (v.size() != ix.groupDim) throw PreconditionError("contract_sites: vector size mismatch");
  Vec rest = Vec::Zero(ix.restDim);
  for (long idx = 0; idx < psi.dim(); ++idx)
    rest(ix.restCode[idx]) += std::conj(v(ix.groupCode[idx])) * psi.amps()(idx);
  if (rest.norm() < 1e-9) throw PreconditionError("contract_sites: state has no overlap with |v>");
  std::vector<bool> drop(psi.subsystems(), false);
  for (int s : sites) drop[s] = true;
  std::vector<int> dims;
  for (int i = 0; i < psi.subsystems(); ++i)
    if (!drop[i]) dims.push_back(psi.dims()[i]);
  if (dims.empty()) dims.push_back(1);
  return Ket(std::move(dims), std::move(rest), true);
}

void apply_in_place(Vec& amps, const std::vector<int>& dims, const Operator& op,
                    const std::vector<int>& targets) {
  if (targets.size() != op.dims().size())
    throw PreconditionError("apply_in_place: target count mismatch");
  for (std::size_t i = 0; i < targets.size(); ++i) {
    int t = targets[i];
    if (t < 0 || t >= static_cast<int>(dims.size()))
      throw PreconditionError("apply_in_place: target out of range");
    if (dims[t] != op.dims()[i]) throw PreconditionError("apply_in_place: dimension mismatch");
  }
  if (amps.size() != product_of(dims))
    throw PreconditionError("apply_in_place: vector size does not match dims");
  IndexSplit ix = split_indices(dims, targets);
  Mat m = Mat::Zero(ix.groupDim, ix.restDim);
  for (long idx = 0; idx < amps.size(); ++idx) m(ix.groupCode[idx], ix.restCode[idx]) = amps(idx);
  m = op.mat() * m;
  for (long idx = 0; idx < amps.size(); ++idx) amps(idx) = m(ix.groupCode[idx], ix.restCode[idx]);
}

Ket permute_subsystems(const Ket& psi, const std::vector<int>& perm) {
  if (perm.size() != static_cast<std::size_t>(psi.subsystems()))
    throw PreconditionError("permute_subsystems: permutation size mismatch");
  IndexSplit ix = split_indices(psi.dims(), perm);  // group order = new order
  std::vector<int> dims;
  for (int p : perm) dims.push_back(psi.dims()[p]);
  Vec out(psi.dim());
  for (long idx = 0; idx < psi.dim(); ++idx) out(ix.groupCode[idx]) = psi.amps()(idx);
  return Ket(std::move(dims), std::move(out));
}

}  // namespace nlsim
