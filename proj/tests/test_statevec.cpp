#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nlsim/statevec.hpp"

using namespace nlsim;

namespace {

Ket random_ket(std::vector<int> dims, RngStream& rng) {
  Vec v(product_of(dims));
  for (long i = 0; i < v.size(); ++i) v(i) = cx(rng.gaussian(), rng.gaussian());
  return Ket(std::move(dims), std::move(v), true);
}

}  // namespace

TEST_CASE("ket construction and ordering") {
  // Subsystem 0 is the slowest index: |down,up> sits at position 2.
  Vec v = Vec::Zero(4);
  v(2) = 1;
  Ket du({2, 2}, v);
  CHECK(du.fidelity(tensor(Ket::down(), Ket::up())) == doctest::Approx(1.0));

  CHECK_THROWS_AS(Ket({2, 2}, Vec::Zero(4)), PreconditionError);   // not normalized
  CHECK_THROWS_AS(Ket({2, 3}, Vec::Ones(4)), PreconditionError);   // dims mismatch
  CHECK_THROWS_AS(Ket(std::vector<int>(15, 2), Vec::Zero(1 << 15)), PreconditionError);
}

TEST_CASE("overlap and phase comparison") {
  RngStream rng(3);
  Ket a = random_ket({2, 2, 2}, rng);
  Ket b(a.dims(), Vec(cx(0, 1) * a.amps()));
  CHECK(a.sameUpToPhase(b));
  CHECK(a.fidelity(b) == doctest::Approx(1.0));
  Ket c = random_ket({2, 2, 2}, rng);
  CHECK(std::abs(a.overlap(c)) < 1.0);
}

TEST_CASE("operator kinds are validated") {
  Mat m(2, 2);
  m << 0, 1, 0, 0;
  CHECK_THROWS_AS(Operator::hermitian({2}, m), PreconditionError);
  CHECK_THROWS_AS(Operator::unitary({2}, m), PreconditionError);
  CHECK_NOTHROW(Operator::unitary({2}, pauli_y()));
  CHECK_NOTHROW(Operator::hermitian({2}, pauli_y()));
}

TEST_CASE("embed and apply") {
  RngStream rng(7);
  Ket psi = random_ket({2, 2, 2}, rng);
  Operator x1 = embed_local(Operator::unitary({2}, pauli_x()), 1, psi.dims());
  Ket viaEmbed = apply(x1, psi, {0, 1, 2});
  Ket viaTarget = apply(Operator::unitary({2}, pauli_x()), psi, {1});
  CHECK(viaEmbed.fidelity(viaTarget) == doctest::Approx(1.0));

  // embed_on over two non-adjacent sites equals a manual kron with identity.
  Operator zz = tensor(Operator::hermitian({2}, pauli_z()), Operator::hermitian({2}, pauli_z()));
  Operator emb = embed_on(zz, {0, 2}, psi.dims());
  double direct = expectation(emb, psi);
  Ket zpsi = apply(Operator::unitary({2}, pauli_z()), psi, {0});
  zpsi = apply(Operator::unitary({2}, pauli_z()), zpsi, {2});
  CHECK(direct == doctest::Approx(psi.overlap(zpsi).real()));
}

TEST_CASE("non-unitary apply requires renormalize") {
  Ket plus({2}, (Vec(2) << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0)).finished());
  Mat p0 = Mat::Zero(2, 2);
  p0(0, 0) = 1;
  Operator proj = Operator::hermitian({2}, p0);
  CHECK_THROWS_AS(apply(proj, plus, {0}), PreconditionError);
  Ket up = apply(proj, plus, {0}, true);
  CHECK(up.fidelity(Ket::up()) == doctest::Approx(1.0));
}

TEST_CASE("projective measurement statistics") {
  RngStream rng(11);
  Ket psi = random_ket({2, 2}, rng);
  std::vector<Operator> projs;
  for (int i = 0; i < 4; ++i) {
    Mat p = Mat::Zero(4, 4);
    p(i, i) = 1;
    projs.push_back(Operator::hermitian({2, 2}, p));
  }
  auto probs = born_probabilities(psi, projs);
  double total = 0;
  for (int i = 0; i < 4; ++i) {
    CHECK(probs[i] == doctest::Approx(std::norm(psi.amps()(i))));
    total += probs[i];
  }
  CHECK(total == doctest::Approx(1.0));

  MeasureResult r = measure_projective(psi, projs, rng);
  CHECK(r.post.fidelity(Ket::basis({2, 2}, r.outcome)) == doctest::Approx(1.0));

  // Incomplete projector sets are rejected.
  projs.pop_back();
  CHECK_THROWS_AS(born_probabilities(psi, projs), PreconditionError);
}

TEST_CASE("reduced density and schmidt form") {
  Vec bell(4);
  bell << 1 / std::sqrt(2.0), 0, 0, 1 / std::sqrt(2.0);
  Ket phi({2, 2}, bell);
  DensityMatrix rho = reduced_density(phi, {0});
  CHECK(rho.mat(0, 0).real() == doctest::Approx(0.5));
  CHECK(rho.mat(1, 1).real() == doctest::Approx(0.5));
  CHECK(std::abs(rho.mat(0, 1)) < 1e-12);

  SchmidtForm sf = schmidt_canonical(phi, {0});
  REQUIRE(sf.coeffs.size() == 2);
  CHECK(sf.coeffs[0] == doctest::Approx(1 / std::sqrt(2.0)));
  CHECK(sf.coeffs[1] == doctest::Approx(1 / std::sqrt(2.0)));

  // Reconstruct the state from its canonical form.
  RngStream rng(5);
  Ket psi = random_ket({2, 3}, rng);
  SchmidtForm g = schmidt_canonical(psi, {0});
  Vec rebuilt = Vec::Zero(6);
  for (std::size_t k = 0; k < g.coeffs.size(); ++k)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 3; ++j)
        rebuilt(i * 3 + j) += g.coeffs[k] * g.leftBasis[k](i) * g.rightBasis[k](j);
  CHECK(Ket({2, 3}, rebuilt, true).fidelity(psi) == doctest::Approx(1.0));
}

TEST_CASE("contract and permute") {
  RngStream rng(9);
  Ket psi = random_ket({2, 2, 2}, rng);
  Ket up = Ket::up();
  Ket projected = contract_sites(tensor(psi, up), {3}, up.amps());
  CHECK(projected.fidelity(psi) == doctest::Approx(1.0));

  Ket swapped = permute_subsystems(psi, {2, 1, 0});
  Ket back = permute_subsystems(swapped, {2, 1, 0});
  CHECK(back.fidelity(psi) == doctest::Approx(1.0));
  // perm[i] names the old subsystem landing at slot i.
  Ket abc = tensor(tensor(Ket::up(), Ket::down()), Ket::up());
  Ket rotated = permute_subsystems(abc, {1, 2, 0});
  CHECK(rotated.fidelity(tensor(tensor(Ket::down(), Ket::up()), Ket::up())) ==
        doctest::Approx(1.0));
}

TEST_CASE("apply_in_place matches apply") {
  RngStream rng(13);
  Ket psi = random_ket({2, 3, 2}, rng);
  Vec amps = psi.amps();
  Operator u = Operator::unitary({2, 2}, Mat(tensor(Operator::unitary({2}, pauli_x()),
                                                    Operator::unitary({2}, pauli_z()))
                                                 .mat()));
  apply_in_place(amps, psi.dims(), u, {2, 0});
  Ket viaApply = apply(u, psi, {2, 0});
  CHECK((amps - viaApply.amps()).norm() < 1e-12);
}
