#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "lorasync/channel.hpp"
#include "lorasync/chirp.hpp"
#include "lorasync/sync.hpp"
#include "lorasync/txrx.hpp"
#include "oracles.hpp"

using namespace lorasync;

namespace {

constexpr double kPi = std::numbers::pi;

ModemConfig short_cfg(int symbols = 40, int q = 1) {
    ModemConfig cfg;
    cfg.data_symbols_per_burst = symbols;
    cfg.psk_order = q;
    return cfg;
}

IqBuffer through(const Burst& b, const ModemConfig& cfg, double tau, double eps, double psi,
                 double snr_db = INFINITY, std::uint64_t seed = 0) {
    ChannelParams ch;
    ch.tau_ui = tau;
    ch.epsilon_ui = eps;
    ch.psi_rad = psi;
    ch.snr_db = snr_db;
    ch.seed = seed;
    return apply_channel(transmit(b, cfg), ch, cfg);
}

long symbol_errors(BurstReport rep, const Burst& b, const ModemConfig& cfg) {
    score_report(rep, b, cfg);
    return *rep.symbol_errors;
}

}  // namespace

TEST_CASE("random burst") {
    ModemConfig cfg = short_cfg(300, 4);
    std::mt19937_64 rng(5);
    const Burst b = make_random_burst(cfg, rng);
    REQUIRE(b.data.size() == 300);
    bool any_p = false;
    for (int s = 0; s < 300; ++s) {
        if (s < cfg.noncoherent_head) {
            CHECK(b.data[s].p == 0);
        }
        any_p = any_p || b.data[s].p != 0;
        CHECK(b.data[s].m >= 0);
        CHECK(b.data[s].m < 256);
    }
    CHECK(any_p);
    CHECK_NOTHROW(check_burst(cfg, b));

    Burst bad = b;
    bad.data[3].p = 1;
    CHECK_THROWS_AS(check_burst(cfg, bad), std::invalid_argument);
    bad = b;
    bad.data.pop_back();
    CHECK_THROWS_AS(check_burst(cfg, bad), std::invalid_argument);
}

TEST_CASE("baseband burst is the preamble followed by the data chirps") {
    const ModemConfig cfg = short_cfg(3, 4);
    Burst b;
    b.data = {{0, 0}, {17, 0}, {200, 0}};
    const IqBuffer x = burst_baseband(b, cfg);
    REQUIRE(x.size() == static_cast<std::size_t>(cfg.burst_length()));
    const IqBuffer pre = build_preamble(cfg);
    for (std::size_t n = 0; n < pre.size(); ++n) {
        CHECK(x[n] == pre[n]);
    }
    for (int s = 0; s < 3; ++s) {
        const IqBuffer c = gen_symbol_chirp(cfg, b.data[s]);
        for (int n = 0; n < cfg.m_count; ++n) {
            CHECK(x[cfg.data_symbol_start(s) + n] == c[n]);
        }
    }
}

TEST_CASE("transmit length") {
    const ModemConfig cfg;
    Burst b;
    b.data.assign(256, CssSymbol{});
    const IqBuffer x = transmit(b, cfg);
    CHECK(x.rate == SampleRate::oversampled_Lx);
    CHECK(x.size() == static_cast<std::size_t>(2 * (4352 + 256 * 256) + cfg.srrc_order));
}

TEST_CASE("transmitted burst resembles the chirp after the matched filter") {
    ModemConfig cfg = short_cfg(1);
    Burst b;
    b.data = {{0, 0}};
    const IqBuffer x2 = ReceiveChain(cfg).process(transmit(b, cfg));
    const IqBuffer c = gen_basic_chirp(cfg, ChirpDirection::up);
    const int start = 2 * cfg.data_symbol_start(0);
    cplx corr{};
    double e = 0.0;
    for (int n = 0; n < cfg.m_count; ++n) {
        corr += x2[start + 2 * n] * std::conj(c[n]);
        e += std::norm(x2[start + 2 * n]);
    }
    // Correlation coefficient; the RC pulse smears the chirp's fast edges.
    CHECK(std::abs(corr) / std::sqrt(e * cfg.m_count) > 0.97);
}

TEST_CASE("spectral occupancy") {
    ModemConfig cfg = short_cfg(32);
    std::mt19937_64 rng(7);
    const IqBuffer x = transmit(make_random_burst(cfg, rng), cfg);
    const int n = 512;
    std::vector<double> psd(n, 0.0);
    std::vector<cplx> tw(n);
    for (int k = 0; k < n; ++k) {
        tw[k] = std::polar(1.0, -2.0 * kPi * k / n);
    }
    for (std::size_t b0 = 0; b0 + n <= x.size(); b0 += n) {
        for (int k = 0; k < n; ++k) {
            cplx acc{};
            for (int i = 0; i < n; ++i) {
                acc += x[b0 + i] * tw[(static_cast<long>(i) * k) % n];
            }
            psd[k] += std::norm(acc);
        }
    }
    const double edge = (1.0 + cfg.srrc_rolloff) / (2.0 * cfg.oversample);
    double in = 0.0;
    double all = 0.0;
    for (int k = 0; k < n; ++k) {
        const double f = static_cast<double>(signed_bin(k, n)) / n;
        all += psd[k];
        if (std::abs(f) <= edge) {
            in += psd[k];
        }
    }
    CHECK(in / all >= 0.99);
}

TEST_CASE("noiseless decoding over the offset grid") {
    const ModemConfig cfg = short_cfg(40);
    const Receiver rx(cfg);
    std::mt19937_64 rng(11);
    const Burst b = make_random_burst(cfg, rng);
    const IqBuffer tx = transmit(b, cfg);
    for (double tau = -0.5; tau <= 0.5; tau += 0.25) {
        for (double eps = -0.5; eps <= 0.5; eps += 0.25) {
            ChannelParams ch;
            ch.tau_ui = tau;
            ch.epsilon_ui = eps;
            ch.psi_rad = 2.0;
            const IqBuffer y = apply_channel(tx, ch, cfg);
            CAPTURE(tau);
            CAPTURE(eps);
            CHECK(symbol_errors(rx.noncoherent(y), b, cfg) == 0);
            CHECK(symbol_errors(rx.coherent(y), b, cfg) == 0);
            CHECK(symbol_errors(rx.ideal(y, ch, DetectionMode::coherent), b, cfg) == 0);
            CHECK(symbol_errors(rx.ideal(y, ch, DetectionMode::noncoherent), b, cfg) == 0);
        }
    }
}

TEST_CASE("pure noise is flagged as a sync failure") {
    ModemConfig cfg = short_cfg(4);
    cfg.noncoherent_head = 4;
    const Receiver rx(cfg);
    std::mt19937_64 rng(13);
    int flagged = 0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        const auto len = static_cast<std::size_t>(2 * cfg.burst_length());
        const IqBuffer noise(oracle::awgn(len, 1.0, rng), SampleRate::oversampled_Lx);
        const BurstReport rep = rx.noncoherent(noise);
        CHECK(rep.decoded.size() == 4);
        flagged += rep.sync_failure ? 1 : 0;
    }
    // The estimate is plausible only when both peaks land within a bin of 0.
    CHECK(flagged >= trials - 2);
}

TEST_CASE("rate accounting") {
    ModemConfig cfg;
    cfg.psk_order = 4;
    CHECK(burst_bits(cfg) == 2528);
    const RateGain g = rate_improvement(cfg);
    CHECK(g.numerator * 2048 == 2528 * g.denominator);
    CHECK(g.percent() == doctest::Approx(123.4375));
    ModemConfig c10 = ModemConfig::for_sf(10);
    c10.psk_order = 4;
    CHECK(burst_bits(c10) == 10 * 16 + 12 * 240);
    CHECK(rate_improvement(c10).percent() == doctest::Approx(118.75));
    CHECK(rate_improvement(ModemConfig{}).percent() == doctest::Approx(100.0));
    CHECK(symbol_bits(cfg, 0) == 8);
    CHECK(symbol_bits(cfg, 16) == 10);
    CHECK(bits_per_symbol(cfg) == doctest::Approx(2528.0 / 256.0));
}

TEST_CASE("Gray labels") {
    for (std::uint32_t bits = 0; bits < 8; ++bits) {
        CHECK(psk_bits_of(psk_point_of(bits)) == bits);
    }
    // Neighbouring points differ in one bit.
    for (int p = 0; p < 8; ++p) {
        CHECK(std::popcount(psk_bits_of(p) ^ psk_bits_of((p + 1) % 8)) == 1);
    }
}

TEST_CASE("scoring") {
    ModemConfig cfg = short_cfg(18, 4);
    Burst b;
    b.data.assign(18, CssSymbol{});
    BurstReport rep;
    rep.decoded = b.data;
    rep.decoded[0].m = 3;    // two bits
    rep.decoded[17].p = 2;   // label 0b11, two bits
    score_report(rep, b, cfg);
    CHECK(*rep.bit_errors == 4);
    CHECK(*rep.symbol_errors == 2);
    CHECK(rep.bits_sent == 8 * 16 + 10 * 2);
    rep.decoded.pop_back();
    CHECK_THROWS_AS(score_report(rep, b, cfg), std::invalid_argument);
}

TEST_CASE("trace and coarse fields") {
    const ModemConfig cfg = short_cfg(24);
    std::mt19937_64 rng(17);
    const Burst b = make_random_burst(cfg, rng);
    const IqBuffer y = through(b, cfg, 0.2, -0.3, 0.5);
    const Receiver rx(cfg);
    const BurstReport nc = rx.noncoherent(y);
    const BurstReport co = rx.coherent(y);
    CHECK(nc.trace.size() == 24);
    CHECK(co.trace.size() == 24);
    CHECK_FALSE(co.sync_failure);
    CHECK(std::abs(co.coarse.tau_coarse - 0.2) < 0.03);
    CHECK(std::abs(co.trace.back().tau_hat - 0.2) < 0.02);
    CHECK(std::abs(co.trace.back().f_hat + 0.3) < 0.01);
    CHECK(std::isinf(co.psnr_estimate_db) == false);
    // Noiseless: the floor is RC leakage into the bins used for N0.
    CHECK(co.psnr_estimate_db > 35.0);
}

TEST_CASE("naive receiver fails under offsets") {
    const ModemConfig cfg = short_cfg(40);
    std::mt19937_64 rng(19);
    const Burst b = make_random_burst(cfg, rng);
    const IqBuffer y = through(b, cfg, 0.45, 0.45, 0.0, -6.0, 3);
    const Receiver rx(cfg);
    CHECK(symbol_errors(rx.naive(y), b, cfg) > symbol_errors(rx.noncoherent(y), b, cfg));
    CHECK(symbol_errors(rx.naive(through(b, cfg, 0.0, 0.0, 0.0)), b, cfg) == 0);
}

TEST_CASE("free functions match the receiver") {
    const ModemConfig cfg = short_cfg(20, 4);
    std::mt19937_64 rng(23);
    const Burst b = make_random_burst(cfg, rng);
    const IqBuffer y = through(b, cfg, -0.1, 0.2, 1.0, -8.0, 5);
    const Receiver rx(cfg);
    CHECK(receive_coherent(y, cfg).decoded == rx.coherent(y).decoded);
    CHECK(receive_noncoherent(y, cfg).decoded == rx.noncoherent(y).decoded);
    CHECK(receive_naive(y, cfg).decoded == rx.naive(y).decoded);
}

TEST_SUITE("properties") {
    TEST_CASE("noiseless random bursts decode exactly") {
        const ModemConfig cfg = short_cfg(40);
        const Receiver rx(cfg);
        std::mt19937_64 rng(29);
        std::uniform_real_distribution<double> off(-0.5, 0.5);
        std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
        long nc = 0;
        long co = 0;
        for (int t = 0; t < 100; ++t) {
            const Burst b = make_random_burst(cfg, rng);
            const IqBuffer y = through(b, cfg, off(rng), off(rng), ang(rng));
            nc += symbol_errors(rx.noncoherent(y), b, cfg);
            co += symbol_errors(rx.coherent(y), b, cfg);
        }
        CHECK(nc == 0);
        CHECK(co == 0);
    }

    TEST_CASE("noiseless PSK-CSS decodes every point") {
        const ModemConfig cfg = short_cfg(80, 4);
        const Receiver rx(cfg);
        std::mt19937_64 rng(31);
        std::uniform_real_distribution<double> off(-0.5, 0.5);
        std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
        for (int t = 0; t < 10; ++t) {
            const Burst b = make_random_burst(cfg, rng);
            const ChannelParams truth{off(rng), off(rng), ang(rng)};
            const IqBuffer y = apply_channel(transmit(b, cfg), truth, cfg);
            CHECK(rx.coherent(y).decoded == b.data);
            CHECK(rx.ideal(y, truth, DetectionMode::coherent).decoded == b.data);
        }
    }

    TEST_CASE("receivers are deterministic") {
        const ModemConfig cfg = short_cfg(30, 4);
        std::mt19937_64 rng(37);
        const Burst b = make_random_burst(cfg, rng);
        const IqBuffer y = through(b, cfg, 0.3, -0.4, 2.5, -9.0, 41);
        const Receiver rx(cfg);
        const BurstReport a = rx.coherent(y);
        const BurstReport c = rx.coherent(y);
        CHECK(a.decoded == c.decoded);
        REQUIRE(a.trace.size() == c.trace.size());
        for (std::size_t s = 0; s < a.trace.size(); ++s) {
            CHECK(a.trace[s].tau_hat == c.trace[s].tau_hat);
            CHECK(a.trace[s].phi_hat == c.trace[s].phi_hat);
        }
        CHECK(rx.noncoherent(y).decoded == rx.noncoherent(y).decoded);
    }

    TEST_CASE("coherent and non-coherent heads agree") {
        const ModemConfig cfg = short_cfg(24);
        const Receiver rx(cfg);
        std::mt19937_64 rng(43);
        std::uniform_real_distribution<double> off(-0.5, 0.5);
        for (int t = 0; t < 20; ++t) {
            const Burst b = make_random_burst(cfg, rng);
            const IqBuffer y = through(b, cfg, off(rng), off(rng), 1.0, -12.0, 100 + t);
            const BurstReport nc = rx.noncoherent(y);
            const BurstReport co = rx.coherent(y);
            for (int s = 0; s < cfg.noncoherent_head; ++s) {
                CHECK(nc.decoded[s] == co.decoded[s]);
            }
        }
    }
}
