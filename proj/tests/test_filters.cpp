#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "lorasync/channel.hpp"
#include "lorasync/chirp.hpp"
#include "lorasync/filters.hpp"
#include "lorasync/sync.hpp"
#include "oracles.hpp"

using namespace lorasync;

namespace {

constexpr double kPi = std::numbers::pi;

bool symmetric(const FirFilter& f) {
    for (std::size_t k = 0; k < f.size(); ++k) {
        if (f.taps[k] != f.taps[f.size() - 1 - k]) {
            return false;
        }
    }
    return true;
}

// Sum of random complex tones with |f| <= fmax cycles per sample.
std::vector<cplx> multitone(std::size_t n, double fmax, std::mt19937_64& rng, int tones = 12) {
    std::uniform_real_distribution<double> f(-fmax, fmax);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * kPi);
    std::vector<cplx> x(n);
    for (int t = 0; t < tones; ++t) {
        const double ft = f(rng);
        const double p = ph(rng);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += std::polar(1.0 / tones, 2.0 * kPi * ft * static_cast<double>(i) + p);
        }
    }
    return x;
}

// Noiseless 2x receive-chain output for the default preamble.
IqBuffer received_preamble(const ModemConfig& cfg, double tau) {
    const IqBuffer tx = TransmitChain(cfg).process(build_preamble(cfg));
    ChannelParams ch;
    ch.tau_ui = tau;
    return ReceiveChain(cfg).process(apply_channel(tx, ch, cfg));
}

}  // namespace

TEST_CASE("raised cosine special points") {
    const FirFilter rc = design_rc(0.25, 16, 2);
    REQUIRE(rc.size() == 33);
    CHECK(rc.design_rate == 2);
    CHECK(rc.group_delay == 16.0);
    CHECK(rc.taps[16] == 1.0);
    // t = +-2 is the pole 1/(2 beta); its limit (pi/4) sinc(2) is 0.
    CHECK(std::abs(rc.taps[16 + 4]) < 1e-15);
    CHECK(std::abs(rc.taps[16 - 4]) < 1e-15);
    CHECK(std::abs(rc.taps[16 + 2]) < 1e-15);
    for (std::size_t k = 0; k < rc.size(); ++k) {
        const double t = (static_cast<double>(k) - 16.0) / 2.0;
        CHECK(rc.taps[k] == doctest::Approx(oracle::rc(t, 0.25)).epsilon(1e-12));
    }
    // A pole that is not a sinc zero: beta = 0.3 at rate 3 has t = 5/3.
    const FirFilter odd = design_rc(0.3, 8, 3);
    const double limit = kPi / 4.0 * std::sin(kPi / 0.6) / (kPi / 0.6);
    CHECK(odd.taps[12 + 5] == doctest::Approx(limit).epsilon(1e-12));
    CHECK(std::isfinite(odd.taps[12 - 5]));
    CHECK_THROWS_AS(design_rc(0.0, 16, 2), std::invalid_argument);
    CHECK_THROWS_AS(design_rc(1.0, 16, 2), std::invalid_argument);
}

TEST_CASE("SRRC taps") {
    const FirFilter h = design_srrc(0.25, 16, 2);
    REQUIRE(h.size() == 33);
    CHECK(symmetric(h));
    double energy = 0.0;
    for (double v : h.taps) {
        energy += v * v;
    }
    CHECK(energy == doctest::Approx(1.0).epsilon(1e-12));
    // t = +-1/(4 beta) = +-1 lands on a tap; the limit must agree with the
    // closed form evaluated just beside it.
    const FirFilter wide = design_srrc(0.25, 16, 2);
    const double ratio = wide.taps[16 + 2] / wide.taps[16];
    const double b = 0.25;
    auto closed = [b](double t) {
        const double x = 4.0 * b * t;
        return (std::sin(kPi * t * (1 - b)) + x * std::cos(kPi * t * (1 + b))) /
               (kPi * t * (1 - x * x));
    };
    const double near = 0.5 * (closed(1.0 + 1e-6) + closed(1.0 - 1e-6));
    CHECK(ratio == doctest::Approx(near / (1.0 - b + 4.0 * b / kPi)).epsilon(1e-6));
}

TEST_SUITE("properties") {
    TEST_CASE("SRRC convolved with itself matches the raised cosine") {
        const FirFilter h = design_srrc(0.25, 16, 2);
        const int n = static_cast<int>(h.size());
        double worst = 0.0;
        for (int lag = -(n - 1); lag <= n - 1; ++lag) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k) {
                const int j = k + lag;
                if (j >= 0 && j < n) {
                    acc += h.taps[k] * h.taps[j];
                }
            }
            worst = std::max(worst, std::abs(acc - oracle::rc(lag / 2.0, 0.25)));
        }
        CHECK(worst < 1e-3);
    }

    TEST_CASE("designed filters have linear phase") {
        CHECK(symmetric(design_rc(0.25, 16, 2)));
        CHECK(symmetric(design_rc(0.5, 10, 4)));
        CHECK(symmetric(design_srrc(0.25, 16, 2)));
        CHECK(symmetric(design_srrc(0.35, 12, 8)));
        CHECK(symmetric(design_lowpass(0.2, 41, 6.0, 1.0)));
        CHECK(symmetric(design_rate_change_filter(2, 2.0)));
        CHECK(symmetric(design_rate_change_filter(4, 1.0)));
        CHECK(design_rate_change_filter(3, 1.0).size() % 2 == 1);
    }

    TEST_CASE("preamble DFT magnitudes follow the raised cosine") {
        const ModemConfig cfg;
        const int m = cfg.m_count;
        const Demodulator demod(cfg);
        for (double tau : {0.0, 0.2, -0.35}) {
            const IqBuffer x2 = received_preamble(cfg, tau);
            const auto [a, b] = half_sample_branch(x2);
            const int start = cfg.down_symbol_start(3);
            const std::span<const cplx> y(a.samples.data() + start, static_cast<std::size_t>(m));
            const std::span<const cplx> yh(b.samples.data() + start, static_cast<std::size_t>(m));
            std::vector<cplx> u;
            BinSpectrum spec;
            demod.spectrum(y, ChirpDirection::down, u, spec);
            BinSpectrum half;
            demod.spectrum(yh, ChirpDirection::down, u, half);
            // Down chirps put a delay tau at +tau bins; half bin k is v[k - 0.5].
            const double peak = std::sqrt(static_cast<double>(m));
            for (int d = -2; d <= 2; ++d) {
                const double mag = std::abs(spec.bins[(d + m) % m]) / peak;
                const double ref = std::abs(oracle::rc(d - tau, cfg.srrc_rolloff));
                if (ref > 0.1) {
                    CHECK(std::abs(mag - ref) < 0.02 * ref);
                } else {
                    CHECK(std::abs(mag - ref) < 0.02);
                }
                const double hmag = std::abs(half.bins[(d + m) % m]) / peak;
                const double href = std::abs(oracle::rc(d - 0.5 - tau, cfg.srrc_rolloff));
                if (href > 0.1) {
                    CHECK(std::abs(hmag - href) < 0.02 * href);
                } else {
                    CHECK(std::abs(hmag - href) < 0.02);
                }
            }
        }
    }

    TEST_CASE("Farrow round trip on band-limited signals") {
        std::mt19937_64 rng(41);
        std::uniform_real_distribution<double> mu(-0.5, 0.5);
        FarrowInterpolator interp;
        double worst = 0.0;
        for (int t = 0; t < 100; ++t) {
            const IqBuffer x(multitone(512, FarrowInterpolator::kPassband, rng),
                             SampleRate::half_shift_2x);
            const double d = mu(rng);
            const IqBuffer y = farrow_shift(interp, farrow_shift(interp, x, d), -d);
            for (std::size_t i = 16; i + 16 < x.size(); ++i) {
                worst = std::max(worst, std::abs(y[i] - x[i]));
            }
        }
        CHECK(worst < 1e-2);
    }
}

TEST_CASE("resample identity and round trip") {
    std::mt19937_64 rng(43);
    const IqBuffer x(oracle::awgn(100, 1.0, rng), SampleRate::baseband_1x);
    const IqBuffer same = resample(x, FirFilter{{1.0}, 1, 0.0}, 1, 1, SampleRate::baseband_1x);
    REQUIRE(same.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(same[i] == x[i]);
    }

    for (int l : {2, 4}) {
        const IqBuffer dc(std::vector<cplx>(400, cplx{0.6, -0.8}), SampleRate::half_shift_2x);
        const IqBuffer up = resample(dc, design_rate_change_filter(l, l), l, 1,
                                     SampleRate::oversampled_Lx);
        const IqBuffer back = resample(up, design_rate_change_filter(l, 1.0), 1, l,
                                       SampleRate::half_shift_2x);
        for (std::size_t i = 100; i < 300; ++i) {
            CHECK(std::abs(back[i] - dc[i]) < 1e-3);
        }
    }

    std::vector<cplx> imp(64);
    imp[20] = 1.0;
    const IqBuffer up = resample(IqBuffer(imp, SampleRate::baseband_1x),
                                 design_rate_change_filter(2, 2.0), 2, 1, SampleRate::half_shift_2x);
    const IqBuffer down = resample(up, design_rate_change_filter(2, 1.0), 1, 2,
                                   SampleRate::baseband_1x);
    // A full-band impulse keeps transition-band ripple from the two low-pass
    // stages; the delay must be compensated exactly.
    CHECK(oracle::argmax(down.samples) == 20);
    CHECK(std::abs(down[20] - cplx{1.0, 0.0}) < 5e-2);
    for (std::size_t i = 0; i < down.size(); ++i) {
        if (i != 20) {
            CHECK(std::abs(down[i]) < 5e-2);
        }
    }

    CHECK_THROWS_AS(resample(IqBuffer(std::vector<cplx>(5), SampleRate::baseband_1x),
                             design_srrc(0.25, 16, 2), 1, 1, SampleRate::baseband_1x),
                    std::invalid_argument);
    CHECK_THROWS_AS(resample(x, FirFilter{{1.0}, 1, 0.0}, 0, 1, SampleRate::baseband_1x),
                    std::invalid_argument);
}

TEST_CASE("resample output length keeps the trailing filter half") {
    const IqBuffer x(std::vector<cplx>(100, cplx{1.0, 0.0}), SampleRate::baseband_1x);
    const FirFilter h = design_srrc(0.25, 16, 2);
    CHECK(resample(x, h, 2, 1, SampleRate::half_shift_2x).size() == 216);
    CHECK(resample(x, h, 1, 1, SampleRate::baseband_1x).size() == 116);
    CHECK(resample(x, h, 1, 2, SampleRate::baseband_1x).size() == 58);
}

TEST_CASE("Farrow shift") {
    std::mt19937_64 rng(47);
    FarrowInterpolator interp;
    CHECK(interp.order() == 5);
    CHECK(interp.oversample() == 2);
    const IqBuffer x(multitone(600, 0.25, rng), SampleRate::half_shift_2x);

    const IqBuffer zero = farrow_shift(interp, x, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(zero[i] == x[i]);
    }

    const IqBuffer fwd = farrow_shift(interp, x, 0.25);
    const IqBuffer back = farrow_shift(interp, fwd, -0.25);
    double worst = 0.0;
    for (std::size_t i = 16; i + 16 < x.size(); ++i) {
        worst = std::max(worst, std::abs(back[i] - x[i]));
    }
    CHECK(worst < 1e-3);

    // A tone at 0.2 B is 0.1 cycles per 2x sample; a delay of mu UI rotates
    // it by -2 pi 0.2 mu.
    for (double mu : {0.5, 0.25, -0.3}) {
        std::vector<cplx> tone(400);
        for (std::size_t i = 0; i < tone.size(); ++i) {
            tone[i] = std::polar(1.0, 2.0 * kPi * 0.1 * static_cast<double>(i));
        }
        const IqBuffer y = farrow_shift(interp, IqBuffer(tone, SampleRate::half_shift_2x), mu);
        const double shift = std::arg(y[200] * std::conj(tone[200]));
        CHECK(shift == doctest::Approx(-2.0 * kPi * 0.2 * mu).epsilon(0.01));
    }

    // Streaming and random-access forms agree.
    const double pos = 123.375;
    interp.reset();
    for (int i = 0; i <= 123 + FarrowInterpolator::kTaps - 1 - FarrowInterpolator::kCenter; ++i) {
        interp.push(x[i]);
    }
    CHECK(std::abs(interp.output(0.375) - interp.at(x.view(), pos)) < 1e-12);
    CHECK(interp.at(x.view(), 50.0) == x[50]);
    CHECK_THROWS_AS(farrow_shift(interp, x, 0.6), std::invalid_argument);
}

TEST_CASE("Farrow frequency response over the raised-cosine band") {
    const FarrowInterpolator f;
    double worst = 0.0;
    for (double fr : {-0.3125, -0.2, -0.05, 0.0, 0.1, 0.25, 0.3125}) {
        std::vector<cplx> x(64);
        for (int i = 0; i < 64; ++i) {
            x[i] = std::polar(1.0, 2.0 * kPi * fr * i);
        }
        for (double mu = 0.0; mu < 1.0; mu += 0.0625) {
            const double pos = 30.0 + mu;
            worst = std::max(worst, std::abs(f.at(x, pos) - std::polar(1.0, 2.0 * kPi * fr * pos)));
        }
    }
    CHECK(worst < 1e-3);
    // Weights sum to one at DC within the least-squares fit error.
    for (double mu : {0.1, 0.5, 0.9}) {
        double sum = 0.0;
        for (double w : f.weights(mu)) {
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("half-sample branch split") {
    std::vector<cplx> x2(9);
    for (int i = 0; i < 9; ++i) {
        x2[i] = static_cast<double>(i + 1);
    }
    const auto [a, b] = half_sample_branch(IqBuffer(x2, SampleRate::half_shift_2x));
    REQUIRE(a.size() == 4);
    REQUIRE(b.size() == 4);
    for (std::size_t n = 0; n < 4; ++n) {
        CHECK(a[n] == x2[2 * n]);
    }
    CHECK(b[0] == cplx{});
    for (std::size_t n = 1; n < 4; ++n) {
        CHECK(b[n] == x2[2 * n - 1]);
    }
    CHECK(a.rate == SampleRate::baseband_1x);

    std::vector<cplx> imp(16);
    imp[6] = 1.0;
    const auto [ia, ib] = half_sample_branch(IqBuffer(imp, SampleRate::half_shift_2x));
    CHECK(ia[3] == cplx{1.0, 0.0});
    CHECK(std::abs(ib[3]) == 0.0);
    std::vector<cplx> imp_odd(16);
    imp_odd[7] = 1.0;
    const auto [oa, ob] = half_sample_branch(IqBuffer(imp_odd, SampleRate::half_shift_2x));
    CHECK(ob[4] == cplx{1.0, 0.0});
    CHECK(std::abs(oa[4]) == 0.0);
}

TEST_CASE("sinc fractional delay") {
    std::mt19937_64 rng(53);
    const auto x = multitone(800, 0.3, rng, 6);
    const auto y = sinc_fractional_delay(x, 3.0);
    for (std::size_t i = 3; i < x.size(); ++i) {
        CHECK(y[i] == x[i - 3]);
    }
    // Tone delayed by a fraction of a sample.
    std::vector<cplx> tone(800);
    for (std::size_t i = 0; i < tone.size(); ++i) {
        tone[i] = std::polar(1.0, 2.0 * kPi * 0.15 * static_cast<double>(i));
    }
    const auto d = sinc_fractional_delay(tone, 0.37);
    double worst = 0.0;
    for (std::size_t i = 100; i < 700; ++i) {
        const cplx ref = std::polar(1.0, 2.0 * kPi * 0.15 * (static_cast<double>(i) - 0.37));
        worst = std::max(worst, std::abs(d[i] - ref));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("filter design argument checks") {
    CHECK_THROWS_AS(design_lowpass(0.2, 40, 6.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(design_lowpass(0.7, 41, 6.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(design_rate_change_filter(0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(design_srrc(0.25, -1, 2), std::invalid_argument);
    CHECK_THROWS_AS(FarrowInterpolator(0), std::invalid_argument);
    const FirFilter lp = design_lowpass(0.2, 41, 6.0, 3.0);
    double dc = 0.0;
    for (double v : lp.taps) {
        dc += v;
    }
    CHECK(dc == doctest::Approx(3.0));
}

TEST_CASE("receive chain aligns 2x sample 2n with baseband sample n") {
    for (int l : {2, 4}) {
        ModemConfig cfg;
        cfg.oversample = l;
        cfg.data_symbols_per_burst = 4;
        cfg.noncoherent_head = 0;
        const IqBuffer base = build_preamble(cfg);
        const IqBuffer x2 = ReceiveChain(cfg).process(TransmitChain(cfg).process(base));
        REQUIRE(x2.size() >= 2 * base.size());
        CHECK(x2.rate == SampleRate::half_shift_2x);
        double worst = 0.0;
        for (std::size_t n = 200; n + 200 < base.size(); ++n) {
            worst = std::max(worst, std::abs(x2[2 * n] - base[n]));
        }
        CHECK(worst < 0.05);
    }
}
