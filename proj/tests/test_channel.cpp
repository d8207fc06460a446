// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <complex>

#include "moma/channel.hpp"
#include "test_support.hpp"

using namespace moma;

TEST_CASE("tap delay profiles", "[channel]") {
  for (const char* name : {"EPA", "EVA", "FLAT", "IID"}) {
    TapDelayProfile p = TapDelayProfile::by_name(name);
    CHECK(p.name == name);
    if (!p.per_subcarrier_iid) {
      const auto powers = p.normalized_powers();
      double sum = 0.0;
      for (double v : powers) sum += v;
      CHECK(sum == Catch::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(TapDelayProfile::by_name("ETU"), std::invalid_argument);

  TapDelayProfile bad{"bad", {{10e-9, 0.0}, {10e-9, -3.0}}, false};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  TapDelayProfile none{"none", {}, false};
  CHECK_THROWS_AS(none.validate(), std::invalid_argument);
}

TEST_CASE("small-scale sampling", "[channel]") {
  SystemConfig sys = test::small_system(16, 4);

  SECTION("single tap is frequency flat") {
    Rng rng(1);
    ChannelRealization ch = sample_small_scale_channel(TapDelayProfile::flat(), sys, 3, rng);
    REQUIRE(ch.num_users() == 3);
    REQUIRE(ch.num_antennas() == 4);
    REQUIRE(ch.block_length() == 16);
    for (int u = 0; u < 3; ++u)
      for (int a = 0; a < 4; ++a)
        for (int n = 1; n < 16; ++n)
          CHECK(std::abs(ch.per_user[u](a, n) - ch.per_user[u](a, 0)) < 1e-15);
  }

  SECTION("per-subcarrier and per-user layouts agree") {
    Rng rng(2);
    ChannelRealization ch = sample_small_scale_channel(TapDelayProfile::epa(), sys, 3, rng);
    for (int u = 0; u < 3; ++u)
      for (int n = 0; n < 16; ++n)
        CHECK((ch.per_subcarrier[n].col(u) - ch.per_user[u].col(n)).norm() == 0.0);
  }

  SECTION("normalization: unit variance per subcarrier") {
    Rng rng(3);
    const int draws = 10000;
    SystemConfig one = test::small_system(8, 1);
    double acc = 0.0;
    for (int t = 0; t < draws / 100; ++t) {
      ChannelRealization ch =
          sample_small_scale_channel(TapDelayProfile::epa(), one, 100, rng);
      for (int u = 0; u < 100; ++u) acc += ch.per_user[u].cwiseAbs2().mean();
    }
    CHECK(acc / (draws / 100 * 100) == Catch::Approx(1.0).epsilon(0.03));
  }

  SECTION("determinism in the seed") {
    Rng a(9), b(9), c(10);
    ChannelRealization ca = sample_small_scale_channel(TapDelayProfile::eva(), sys, 2, a);
    ChannelRealization cb = sample_small_scale_channel(TapDelayProfile::eva(), sys, 2, b);
    ChannelRealization cc = sample_small_scale_channel(TapDelayProfile::eva(), sys, 2, c);
    CHECK((ca.per_user[1] - cb.per_user[1]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ca.per_user[1] - cc.per_user[1]).cwiseAbs().maxCoeff() > 0.0);
  }

  SECTION("common-across-users option shares the draw") {
    Rng rng(4);
    ChannelOptions opt;
    opt.common_across_users = true;
    ChannelRealization ch = sample_small_scale_channel(TapDelayProfile::flat(), sys, 3, rng, opt);
    CHECK((ch.per_user[2] - ch.per_user[0]).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("IID profile decorrelates subcarriers") {
    Rng rng(5);
    SystemConfig wide = test::small_system(32, 1);
    const int users = 4000;
    ChannelRealization ch = sample_small_scale_channel(TapDelayProfile::iid(), wide, users, rng);
    std::complex<double> lag1 = 0.0;
    for (int u = 0; u < users; ++u)
      for (int n = 0; n + 1 < 32; ++n)
        lag1 += std::conj(ch.per_user[u](0, n)) * ch.per_user[u](0, n + 1);
    lag1 /= static_cast<double>(users * 31);
    CHECK(std::abs(lag1) < 0.02);
  }
}

TEST_CASE("frequency autocorrelation", "[channel]") {
  SECTION("single tap: flat, c_u = 1") {
    FrequencyAutocorrelation c = freq_autocorrelation(TapDelayProfile::flat(), 15e3, 31);
    for (int u = 0; u <= 31; ++u) CHECK(std::abs(c.at(u) - 1.0) < 1e-15);
  }

  SECTION("two equal taps: |c_u|^2 = cos^2(pi tau u spacing)") {
    const double tau = 2e-6;
    TapDelayProfile two{"two", {{0.0, 0.0}, {tau, 0.0}}, false};
    FrequencyAutocorrelation c = freq_autocorrelation(two, 15e3, 16);
    for (int u = 0; u <= 16; ++u) {
      const double expected = std::pow(std::cos(std::numbers::pi * tau * u * 15e3), 2);
      CHECK(std::norm(c.at(u)) == Catch::Approx(expected).margin(1e-12));
    }
  }

  SECTION("Hermitian symmetry") {
    FrequencyAutocorrelation c = freq_autocorrelation(TapDelayProfile::eva(), 15e3, 8);
    for (int u = 1; u <= 8; ++u) CHECK(c.at(-u) == std::conj(c.at(u)));
  }

  SECTION("EPA stays nearly flat across one spreading block") {
    FrequencyAutocorrelation c = freq_autocorrelation(TapDelayProfile::epa(), 15e3, 31);
    double min_sq = 1.0;
    for (int u = 0; u <= 31; ++u) min_sq = std::min(min_sq, std::norm(c.at(u)));
    CHECK(min_sq >= 0.9);
  }

  SECTION("c_0 is one and magnitudes never exceed one") {
    for (const char* name : {"EPA", "EVA"}) {
      FrequencyAutocorrelation c =
          freq_autocorrelation(TapDelayProfile::by_name(name), 15e3, 64);
      CHECK(std::abs(c.at(0) - 1.0) < 1e-12);
      for (int u = 0; u <= 64; ++u) CHECK(std::abs(c.at(u)) <= 1.0 + 1e-12);
    }
  }

  SECTION("empirical autocorrelation matches") {
    Rng rng(6);
    SystemConfig sys = test::small_system(16, 1);
    const int users = 10000;
    ChannelRealization ch = sample_small_scale_channel(TapDelayProfile::eva(), sys, users, rng);
    FrequencyAutocorrelation c = freq_autocorrelation(TapDelayProfile::eva(), 15e3, 8);
    for (int lag : {1, 4, 8}) {
      std::complex<double> acc = 0.0;
      int count = 0;
      for (int u = 0; u < users; ++u)
        for (int n = 0; n + lag < 16; ++n) {
          acc += std::conj(ch.per_user[u](0, n)) * ch.per_user[u](0, n + lag);
          ++count;
        }
      acc /= static_cast<double>(count);
      CHECK(std::abs(acc - c.at(lag)) < 0.05);
    }
  }
}

TEST_CASE("channel hardening and cross-user statistics", "[channel]") {
  SECTION("var[(1/M) h^H h] falls like 1/M") {
    Rng rng(8);
    std::vector<double> log_m, log_var;
    for (int m : {4, 16, 64, 256}) {
      SystemConfig sys = test::small_system(8, m);
      const int users = 1000;
      ChannelRealization ch = sample_small_scale_channel(TapDelayProfile::iid(), sys, users, rng);
      std::vector<double> samples;
      for (int u = 0; u < users; ++u)
        for (int n = 0; n < 8; ++n)
          samples.push_back(ch.per_user[u].col(n).squaredNorm() / m);
      double mean = 0.0;
      for (double s : samples) mean += s;
      mean /= samples.size();
      double var = 0.0;
      for (double s : samples) var += (s - mean) * (s - mean);
      var /= samples.size() - 1;
      log_m.push_back(std::log(static_cast<double>(m)));
      log_var.push_back(std::log(var));
    }
    // least-squares slope
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < log_m.size(); ++i) {
      mx += log_m[i];
      my += log_var[i];
    }
    mx /= log_m.size();
    my /= log_var.size();
    double num = 0, den = 0;
    for (std::size_t i = 0; i < log_m.size(); ++i) {
      num += (log_m[i] - mx) * (log_var[i] - my);
      den += (log_m[i] - mx) * (log_m[i] - mx);
    }
    CHECK(num / den == Catch::Approx(-1.0).margin(0.1));
  }

  SECTION("cross-user inner products have zero mean and variance 1/M") {
    Rng rng(9);
    const int m = 32;
    SystemConfig sys = test::small_system(8, m);
    const int users = 2000;
    ChannelRealization ch = sample_small_scale_channel(TapDelayProfile::flat(), sys, users, rng);
    std::complex<double> mean = 0.0;
    double second = 0.0;
    const int pairs = users / 2;
    for (int p = 0; p < pairs; ++p) {
      const std::complex<double> ip =
          ch.per_user[2 * p].col(0).dot(ch.per_user[2 * p + 1].col(0)) / static_cast<double>(m);
      mean += ip;
      second += std::norm(ip);
    }
    mean /= static_cast<double>(pairs);
    second /= pairs;
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(m) * pairs));
    CHECK(second == Catch::Approx(1.0 / m).epsilon(0.15));
  }
}
