#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "weic/channel.hpp"

using namespace weic;

TEST_SUITE("channel") {
  TEST_CASE("seeded draws repeat exactly and links are reciprocal") {
    SystemConfig c;
    const ChannelSet a = sample_channels(11, c);
    const ChannelSet b = sample_channels(11, c);
    for (int t = 0; t < c.users; ++t)
      for (int k = 0; k < c.users; ++k) {
        if (t == k) continue;
        CHECK(a.link(t, k) == b.link(t, k));
        CHECK((a.link(t, k) - a.link(k, t).transpose()).norm() == 0.0);
      }
    CHECK_THROWS_AS(a.link(2, 2), std::out_of_range);
    CHECK(sample_channels(12, c).link(0, 1) != a.link(0, 1));
  }

  TEST_CASE("per-round refresh breaks reciprocity") {
    SystemConfig c;
    const ChannelSet a = sample_channels(3, c, ChannelOptions{true});
    CHECK((a.link(0, 1) - a.link(1, 0).transpose()).norm() > 0.0);
  }

  TEST_CASE("entries have unit variance") {
    SystemConfig c;
    c.users = 2;
    c.antennas = 1;
    double sum = 0.0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) sum += std::norm(sample_channels(static_cast<std::uint64_t>(i), c).link(0, 1)(0, 0));
    CHECK(sum / draws == doctest::Approx(1.0).epsilon(0.05));
  }

  TEST_CASE("composite channel") {
    ChannelSet ch(3, 2);
    ch.link(0, 1) = CMatrix::Identity(2, 2);
    CMatrix h(2, 2);
    h << std::complex<double>(1, 1), 2, 0, std::complex<double>(0, -3);
    ch.link(0, 2) = h;
    const std::vector<UserId> one{1};
    CHECK((composite_channel(ch, 0, one) - CMatrix::Identity(2, 2) / 2.0).norm() < 1e-15);
    const std::vector<UserId> two{2};
    const CMatrix s2 = composite_channel(ch, 0, two);
    CHECK(std::abs(s2.trace() - 1.0) < 1e-15);
    // H^dagger H by explicit loops.
    oracle::Mat m = oracle::to_mat(h);
    CMatrix g(2, 2);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) {
        std::complex<double> acc = 0;
        for (int i = 0; i < 2; ++i) acc += std::conj(m[i][r]) * m[i][c];
        g(r, c) = acc;
      }
    const double tr = g(0, 0).real() + g(1, 1).real();
    const std::vector<UserId> both{1, 2};
    const CMatrix expect = (CMatrix::Identity(2, 2) / 2.0 + g / tr) / 2.0;
    CHECK((composite_channel(ch, 0, both) - expect).norm() < 1e-15);
    const std::vector<UserId> self{0};
    CHECK_THROWS(composite_channel(ch, 0, self));
    CHECK_THROWS(composite_channel(ch, 0, std::vector<UserId>{}));
  }

  TEST_CASE("composite similarity") {
    const int nt = 4;
    const CMatrix iso = CMatrix::Identity(nt, nt) / double(nt);
    CMatrix e1 = CMatrix::Zero(nt, nt);
    e1(0, 0) = 1.0;
    CHECK(composite_similarity(iso, iso) == doctest::Approx(1.0));
    CHECK(composite_similarity(iso, e1) == doctest::Approx(1.0 / std::sqrt(nt)));
    std::mt19937_64 rng(5);
    for (int i = 0; i < 200; ++i) {
      const CMatrix a = oracle::random_matrix(rng, 3);
      const CMatrix b = oracle::random_matrix(rng, 3);
      const double c = composite_similarity(a, b);
      CHECK(std::abs(c) <= 1.0);
      CHECK(c == doctest::Approx(composite_similarity(b, a)));
      // PSD inputs: nonnegative.
      CHECK(composite_similarity(a.adjoint() * a, b.adjoint() * b) >= 0.0);
    }
    CHECK_THROWS(composite_similarity(iso, CMatrix::Zero(nt, nt)));
  }

  TEST_CASE("JSON round trip") {
    SystemConfig c;
    c.users = 3;
    c.antennas = 2;
    const ChannelSet a = sample_channels(8, c);
    const auto j = channels_to_json(a);
    CHECK(j[1][1].is_null());
    CHECK(j[0][1][0][1].size() == 2);  // [re, im]
    CHECK(j[0][1][1][0][0].get<double>() == a.link(0, 1)(1, 0).real());
    const ChannelSet b = channels_from_json(j);
    for (int t = 0; t < 3; ++t)
      for (int k = 0; k < 3; ++k)
        if (t != k) CHECK(a.link(t, k) == b.link(t, k));
    const CVector v = a.link(0, 2).col(1);
    CHECK(vector_from_json(vector_to_json(v)) == v);
  }
}
