#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "nlsim/bell.hpp"
#include "nlsim/json_io.hpp"
#include "nlsim/transcript.hpp"

using namespace nlsim;

TEST_CASE("ket json round trip") {
  Ket psi = make_bell(BellKind::PhiMinus);
  Ket back = ket_from_json(ket_to_json(psi));
  CHECK(back.fidelity(psi) == doctest::Approx(1.0));
  CHECK(back.dims() == psi.dims());
}

TEST_CASE("operator and density serialization") {
  Operator sy = Operator::hermitian({2}, pauli_y());
  Json j = operator_to_json(sy);
  CHECK(j.at("kind") == "hermitian");
  CHECK(j.at("mat")[0][1][1].get<double>() == doctest::Approx(-1.0));  // -i

  DensityMatrix rho = reduced_density(make_bell(BellKind::PsiMinus), {0});
  Json d = density_to_json(rho);
  CHECK(d.at("mat")[0][0][0].get<double>() == doctest::Approx(0.5));
}

TEST_CASE("transcript ordering rules") {
  Transcript tr;
  tr.add(1, "Alice", EventKind::LocalMeasure, {{"kind", "demo"}});
  tr.add(1, "Bob", EventKind::LocalOp);
  int id = tr.send(2, "Bob", {{"kind", "record"}});
  tr.receive(3, "Alice", id);
  tr.add(4, "Alice", EventKind::LocalOp, {{"kind", "combine"}, {"dependsOn", Json::array({id})}});
  CHECK_NOTHROW(tr.verify_causality());
  CHECK(tr.count(EventKind::ClassicalSend) == 1);

  // Receiving before sending is rejected.
  Transcript bad;
  bad.receive(1, "Alice", 99);
  CHECK_THROWS_AS(bad.verify_causality(), InternalError);

  // Depending on a message the site never received is rejected.
  Transcript bad2;
  int id2 = bad2.send(1, "Bob");
  bad2.receive(2, "Alice", id2);
  bad2.add(3, "Carol", EventKind::LocalOp, {{"dependsOn", Json::array({id2})}});
  CHECK_THROWS_AS(bad2.verify_causality(), InternalError);
}

TEST_CASE("instantaneity marker") {
  Transcript tr;
  tr.add(1, "Alice", EventKind::LocalMeasure);
  tr.add(1, "Bob", EventKind::LocalMeasure);
  int id = tr.send(2, "Bob");
  tr.receive(3, "Alice", id);
  CHECK(tr.stage_is_instantaneous());

  // A second quantum tick at one site breaks the marker.
  tr.add(4, "Alice", EventKind::LocalMeasure);
  CHECK_FALSE(tr.stage_is_instantaneous());

  // Classical traffic during the quantum stage breaks it too.
  Transcript mixed;
  mixed.add(2, "Alice", EventKind::LocalMeasure);
  mixed.send(1, "Bob");
  CHECK_FALSE(mixed.stage_is_instantaneous());
}

TEST_CASE("json lines output") {
  Transcript tr;
  tr.add(1, "Alice", EventKind::LocalOp, {{"kind", "x"}});
  tr.send(2, "Alice");
  std::istringstream in(tr.to_json_lines());
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    Json j = Json::parse(line);
    CHECK(j.contains("tick"));
    CHECK(j.contains("site"));
    CHECK(j.contains("kind"));
    CHECK(j.contains("payload"));
    ++n;
  }
  CHECK(n == 2);
}
