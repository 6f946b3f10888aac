#include <cmath>
#include <cstdint>

#include "doctest.h"
#include "snipe/rng.hpp"

using namespace snipe;

TEST_SUITE("rng") {

TEST_CASE("identical keys produce identical streams") {
  Rng a = make_stream(42, 3, 17, StreamPurpose::kTreatment);
  Rng b = make_stream(42, 3, 17, StreamPurpose::kTreatment);
  for (int k = 0; k < 64; ++k) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("streams separate by replicate, sweep point, and purpose") {
  Rng base = make_stream(42, 3, 17, StreamPurpose::kTreatment);
  Rng other_rep = make_stream(42, 3, 18, StreamPurpose::kTreatment);
  Rng other_sweep = make_stream(42, 4, 17, StreamPurpose::kTreatment);
  Rng other_purpose = make_stream(42, 3, 17, StreamPurpose::kGraph);
  const std::uint64_t first = base.next_u64();
  CHECK(first != other_rep.next_u64());
  CHECK(first != other_sweep.next_u64());
  CHECK(first != other_purpose.next_u64());
}

TEST_CASE("uniform stays in [0, 1) and uniform_pos in (0, 1]") {
  Rng rng(7);
  for (int k = 0; k < 10000; ++k) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.uniform_pos();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("normal draws have standard moments") {
  Rng rng(12345);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("bernoulli matches its probability") {
  Rng rng(99);
  const int n = 100000;
  int hits = 0;
  for (int k = 0; k < n; ++k) hits += rng.bernoulli(0.3) ? 1 : 0;
  CHECK(std::abs(static_cast<double>(hits) / n - 0.3) < 0.02);
}

TEST_CASE("mix64 is a pure function of key and counter") {
  CHECK(mix64(5, 10) == mix64(5, 10));
  CHECK(mix64(5, 10) != mix64(5, 11));
  CHECK(mix64(5, 10) != mix64(6, 10));
}

}  // TEST_SUITE
