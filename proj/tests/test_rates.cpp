#include <catch2/catch_amalgamated.hpp>

#include "irsdp/rates.hpp"
#include "irsdp/rng.hpp"

using namespace irsdp;

namespace {

CMat unit_rows(int k, int m) {
  CMat q = CMat::Zero(k, m);
  for (int i = 0; i < k; ++i) q(i, 0) = 1.0;
  return q;
}

}  // namespace

TEST_CASE("noma rates") {
  SECTION("single user has no interference") {
    CMat q = unit_rows(1, 1);
    PowerAllocation pw{VecX::Constant(1, 3.0), 3.0};
    VecX r = noma_rates(q, CVec::Ones(1), pw, DecodingOrder::identity(1), 1.0);
    REQUIRE(r[0] == Catch::Approx(std::log2(4.0)).epsilon(1e-12));
  }
  SECTION("zero power gives zero rate") {
    CMat q = unit_rows(2, 1);
    PowerAllocation pw{(VecX(2) << 0.0, 1.0).finished(), 1.0};
    VecX r = noma_rates(q, CVec::Ones(1), pw, DecodingOrder::identity(2), 1.0);
    REQUIRE(r[0] == 0.0);
  }
  SECTION("two-user hand example") {
    CMat q = unit_rows(2, 1);
    PowerAllocation pw{(VecX(2) << 2.0, 1.0).finished(), 3.0};
    VecX r = noma_rates(q, CVec::Ones(1), pw, DecodingOrder::identity(2), 1.0);
    REQUIRE(r[0] == Catch::Approx(1.0).epsilon(1e-12));  // log2(1 + 2/(1+1))
    REQUIRE(r[1] == Catch::Approx(1.0).epsilon(1e-12));  // log2(1 + 1)
  }
  SECTION("invariant to a global phase rotation of v") {
    Rng rng(3);
    CMat q(2, 3);
    for (int k = 0; k < 2; ++k)
      for (int m = 0; m < 3; ++m) q(k, m) = Complex(rng.normal(), rng.normal());
    CVec v(3);
    for (int i = 0; i < 3; ++i) v[i] = std::polar(1.0, rng.uniform(0, 2 * kPi));
    PowerAllocation pw{(VecX(2) << 0.6, 0.4).finished(), 1.0};
    VecX r0 = noma_rates(q, v, pw, DecodingOrder::identity(2), 0.1);
    for (double theta : {0.3, 1.7, 4.4}) {
      VecX r = noma_rates(q, std::polar(1.0, theta) * v, pw, DecodingOrder::identity(2), 0.1);
      REQUIRE((r - r0).norm() < 1e-12);
    }
  }
  SECTION("sum rate non-decreasing under proportional power scaling") {
    CMat q(2, 1);
    q(0, 0) = 0.4;
    q(1, 0) = 1.3;
    double prev = -1.0;
    for (double pmax : {0.5, 1.0, 2.0, 4.0, 8.0}) {
      PowerAllocation pw{(VecX(2) << 0.7 * pmax, 0.3 * pmax).finished(), pmax};
      const double sum = noma_rates(q, CVec::Ones(1), pw, DecodingOrder::identity(2), 1.0).sum();
      REQUIRE(sum >= prev - 1e-12);
      prev = sum;
    }
  }
}

TEST_CASE("fdma rates") {
  SECTION("single user reduces to the point-to-point rate") {
    CMat q = unit_rows(1, 1);
    PowerAllocation pw{VecX::Constant(1, 2.0), 2.0};
    VecX r = fdma_rates(q, CVec::Ones(1), pw, 1.0);
    REQUIRE(r[0] == Catch::Approx(std::log2(3.0)).epsilon(1e-12));
  }
  SECTION("two users, unit gain and power") {
    CMat q = unit_rows(2, 1);
    PowerAllocation pw{VecX::Ones(2), 2.0};
    VecX r = fdma_rates(q, CVec::Ones(1), pw, 1.0);
    for (int k = 0; k < 2; ++k)
      REQUIRE(r[k] == Catch::Approx(0.5 * std::log2(3.0)).epsilon(1e-12));
  }
  SECTION("zero power gives zero rate") {
    CMat q = unit_rows(2, 1);
    PowerAllocation pw{VecX::Zero(2), 1.0};
    REQUIRE(fdma_rates(q, CVec::Ones(1), pw, 1.0).norm() == 0.0);
  }
}

TEST_CASE("tdma rates") {
  SECTION("single user, unit gain") {
    CMat q = unit_rows(1, 1);
    VecX r = tdma_rates(q, {CVec::Ones(1)}, 1.0, 1.0);
    REQUIRE(r[0] == Catch::Approx(1.0).epsilon(1e-12));
  }
  SECTION("zero gain gives zero rate") {
    CMat q = CMat::Zero(1, 1);
    VecX r = tdma_rates(q, {CVec::Ones(1)}, 1.0, 1.0);
    REQUIRE(r[0] == 0.0);
  }
  SECTION("matched phases reach the l1 bound at M=2") {
    CMat q(1, 2);
    q(0, 0) = Complex(0.3, 0.4);
    q(0, 1) = Complex(-1.0, 0.2);
    CVec v(2);
    for (int i = 0; i < 2; ++i) v[i] = std::polar(1.0, -std::arg(q(0, i)));
    double l1 = std::abs(q(0, 0)) + std::abs(q(0, 1));
    VecX r = tdma_rates(q, {v}, 2.0, 1.0);
    REQUIRE(r[0] == Catch::Approx(std::log2(1.0 + 2.0 * l1 * l1)).epsilon(1e-12));
  }
}

TEST_CASE("noma ordering validation") {
  SECTION("single user always valid") {
    CMat q = unit_rows(1, 1);
    PowerAllocation pw{VecX::Ones(1), 1.0};
    REQUIRE(!validate_noma(q, CVec::Ones(1), pw, DecodingOrder::identity(1)));
  }
  SECTION("equal gains and powers are valid for any order") {
    CMat q = unit_rows(2, 1);
    PowerAllocation pw{VecX::Constant(2, 0.5), 1.0};
    DecodingOrder fwd = DecodingOrder::identity(2);
    DecodingOrder rev;
    rev.mu = {1, 0};
    REQUIRE(!validate_noma(q, CVec::Ones(1), pw, fwd));
    REQUIRE(!validate_noma(q, CVec::Ones(1), pw, rev));
  }
  SECTION("reports the gain violation") {
    CMat q(2, 1);
    q(0, 0) = 1.0;
    q(1, 0) = std::sqrt(2.0);
    // user 1 has the larger gain but is decoded first under rev
    DecodingOrder rev;
    rev.mu = {1, 0};
    PowerAllocation pw{VecX::Constant(2, 0.5), 1.0};
    auto violation = validate_noma(q, CVec::Ones(1), pw, rev);
    REQUIRE(violation);
    REQUIRE(violation->kind == OrderViolation::Kind::gain);
    REQUIRE(violation->user_k == 0);
    REQUIRE(violation->user_j == 1);
  }
  SECTION("reports the power violation") {
    CMat q = unit_rows(2, 1);
    PowerAllocation pw{(VecX(2) << 0.2, 0.8).finished(), 1.0};
    auto violation = validate_noma(q, CVec::Ones(1), pw, DecodingOrder::identity(2));
    REQUIRE(violation);
    REQUIRE(violation->kind == OrderViolation::Kind::power);
  }
}

TEST_CASE("weighted sum rate") {
  VecX rates = VecX::Ones(4);
  SECTION("uniform weights give the mean rate") {
    REQUIRE(wsr(VecX::Constant(4, 0.25), rates) == Catch::Approx(1.0));
  }
  SECTION("zero weights give zero") { REQUIRE(wsr(VecX::Zero(4), rates) == 0.0); }
  SECTION("paper weight vector on unit rates") {
    REQUIRE(wsr((VecX(4) << 0.1, 0.2, 0.3, 0.4).finished(), rates) == Catch::Approx(1.0));
  }
}

TEST_CASE("decoding order helpers") {
  DecodingOrder d;
  d.mu = {2, 0, 1};
  REQUIRE(d.valid());
  auto by_pos = d.users_by_position();
  REQUIRE(by_pos == std::vector<int>{1, 2, 0});
  DecodingOrder bad;
  bad.mu = {0, 0, 1};
  REQUIRE(!bad.valid());
}
