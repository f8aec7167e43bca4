#include <doctest.h>

#include <chrono>

#include "oracle.hpp"
#include "support.hpp"

using namespace polnarr;
using namespace polnarr::testing;

TEST_SUITE("oracle") {

TEST_CASE("planner matches exhaustive enumeration on random micro-domains") {
  MicroDomainGenerator gen(20261015);
  const auto start = std::chrono::steady_clock::now();
  int compared = 0, nonempty = 0;
  for (int i = 0; i < 60; ++i) {
    MicroDomain d = gen.next();
    CAPTURE(i);
    CAPTURE(d.policy);
    CAPTURE(d.query);
    PolicyModel m = policy(d.policy);
    ResolvedQuery q = resolve_query(m, query(d.query, m));
    q.max_narratives = 1'000'000;
    q.timeout_ms = 60'000;
    auto expected = brute_force_narratives(m, q);
    auto got = sequence_keys(enumerate_narratives(m, q));
    std::sort(expected.begin(), expected.end());
    std::sort(got.begin(), got.end());
    CHECK(got == expected);
    ++compared;
    if (!expected.empty()) ++nonempty;
  }
  CHECK(compared >= 50);
  CHECK(nonempty >= 25);
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs < 60.0);
}

}
