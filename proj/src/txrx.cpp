#include "lorasync/txrx.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lorasync {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Bins closer than this to the peak are excluded from the noise estimate.
constexpr int kNoiseGuardBins = 4;

std::array<double, 5> magnitudes_around(const BinSpectrum& spec, const std::pair<cplx, cplx>& hb,
                                        int k) {
    const int m = static_cast<int>(spec.bins.size());
    return {std::abs(spec.bins[(k + m - 1) % m]), std::abs(hb.first), std::abs(spec.bins[k]),
            std::abs(hb.second), std::abs(spec.bins[(k + 1) % m])};
}

}  // namespace

Burst make_random_burst(const ModemConfig& cfg, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> sym(0, cfg.m_count - 1);
    std::uniform_int_distribution<int> psk(0, cfg.psk_order - 1);
    Burst b;
    b.data.resize(static_cast<std::size_t>(cfg.data_symbols_per_burst));
    for (int s = 0; s < cfg.data_symbols_per_burst; ++s) {
        b.data[s].m = sym(rng);
        b.data[s].p = (cfg.psk_order > 1 && s >= cfg.noncoherent_head) ? psk(rng) : 0;
    }
    return b;
}

void check_burst(const ModemConfig& cfg, const Burst& burst) {
    if (static_cast<int>(burst.data.size()) != cfg.data_symbols_per_burst) {
        throw std::invalid_argument("burst holds " + std::to_string(burst.data.size()) +
                                    " symbols, expected " +
                                    std::to_string(cfg.data_symbols_per_burst));
    }
    for (std::size_t s = 0; s < burst.data.size(); ++s) {
        check_symbol(cfg, burst.data[s]);
        if (static_cast<int>(s) < cfg.noncoherent_head && burst.data[s].p != 0) {
            throw std::invalid_argument("head symbol " + std::to_string(s) +
                                        " must not be phase modulated");
        }
    }
}

IqBuffer burst_baseband(const Burst& burst, const ModemConfig& cfg) {
    check_burst(cfg, burst);
    IqBuffer out = build_preamble(cfg);
    const int m = cfg.m_count;
    const std::vector<cplx> up = gen_basic_chirp(cfg, ChirpDirection::up).samples;
    out.samples.reserve(static_cast<std::size_t>(cfg.burst_length()));
    for (const auto& sym : burst.data) {
        const cplx rot = std::polar(1.0, kTwoPi * sym.p / cfg.psk_order);
        for (int n = 0; n < m; ++n) {
            out.samples.push_back(up[(n + sym.m) % m] * rot);
        }
    }
    return out;
}

IqBuffer transmit(const Burst& burst, const ModemConfig& cfg) {
    return TransmitChain(cfg).process(burst_baseband(burst, cfg));
}

Receiver::Receiver(const ModemConfig& cfg)
    : cfg_(cfg), demod_(cfg), chain_(cfg), farrow_(2) {
    cfg_.validate();
}

void Receiver::extract(const IqBuffer& x2, int start, double tau_hat, double phase_cycles,
                       double freq, Window& w) const {
    const int m = cfg_.m_count;
    w.main.resize(static_cast<std::size_t>(m));
    w.half.resize(static_cast<std::size_t>(m));
    const std::span<const cplx> xs = x2.view();
    const double center = 0.5 * (m - 1);
    // Correction exp(-j 2 pi (phase + freq (t - center) / M)) evaluated at
    // t = n on the main branch and t = n - 0.5 on the half branch.
    const cplx step = std::polar(1.0, -kTwoPi * freq / m);
    const cplx half_step = std::polar(1.0, kTwoPi * 0.5 * freq / m);
    cplx rot = std::polar(1.0, -kTwoPi * (phase_cycles - freq * center / m));
    // Read positions 2 (start + n) + 2 tau_hat; the fractional part is the
    // same for every sample of the symbol.
    const double shift = 2.0 * tau_hat;
    const double whole = std::floor(shift);
    const double mu = shift - whole;
    const long long offset = static_cast<long long>(whole);
    const bool trivial = mu == 0.0;
    const FarrowInterpolator::Weights fw = trivial ? FarrowInterpolator::Weights{}
                                                   : farrow_.weights(mu);
    const long long n2 = static_cast<long long>(x2.size());
    for (int n = 0; n < m; ++n) {
        const long long idx = 2LL * (start + n) + offset;
        cplx a;
        cplx b;
        if (trivial) {
            a = (idx >= 0 && idx < n2) ? xs[idx] : cplx{};
            b = (idx >= 1 && idx - 1 < n2) ? xs[idx - 1] : cplx{};
        } else {
            a = farrow_.at(xs, idx, fw);
            b = farrow_.at(xs, idx - 1, fw);
        }
        w.main[n] = a * rot;
        w.half[n] = b * rot * half_step;
        rot *= step;
    }
}

void Receiver::extract_coarse(const IqBuffer& x2, int start, double tau, double eps,
                              Window& w) const {
    // Continuous ramp exp(-j 2 pi eps t / M) referenced to the burst start.
    const double phase = eps * (start + 0.5 * (cfg_.m_count - 1)) / cfg_.m_count;
    extract(x2, start, tau, phase, eps, w);
}

CoarseSync Receiver::preamble_sync(const IqBuffer& x2, double* n0_estimate) const {
    const int m = cfg_.m_count;
    std::vector<BinSpectrum> down;
    std::vector<BinSpectrum> up;
    Window w;
    double noise_power = 0.0;
    long noise_bins = 0;
    auto accumulate_noise = [&](const BinSpectrum& sp) {
        for (int k = 0; k < m; ++k) {
            int d = std::abs(k - sp.peak_index);
            d = std::min(d, m - d);
            if (d > kNoiseGuardBins) {
                noise_power += std::norm(sp.bins[k]);
                ++noise_bins;
            }
        }
    };
    for (int b = 0; b < cfg_.n_down; ++b) {
        extract(x2, cfg_.down_symbol_start(b), 0.0, 0.0, 0.0, w);
        DtdResult r = dtd(demod_, w.main, w.half, ChirpDirection::down, true);
        accumulate_noise(r.spectrum);
        down.push_back(std::move(r.spectrum));
    }
    for (int b = 0; b < cfg_.n_up; ++b) {
        extract(x2, cfg_.up_symbol_start(b), 0.0, 0.0, 0.0, w);
        DtdResult r = dtd(demod_, w.main, w.half, ChirpDirection::up, true);
        accumulate_noise(r.spectrum);
        up.push_back(std::move(r.spectrum));
    }
    if (n0_estimate != nullptr) {
        *n0_estimate = noise_bins > 0 ? noise_power / static_cast<double>(noise_bins) : 0.0;
    }
    return coarse_estimate(down, up);
}

BurstReport Receiver::detect_with_coarse(const IqBuffer& x2, const CoarseSync& coarse,
                                         bool correct) const {
    BurstReport rep;
    rep.coarse = coarse;
    rep.sync_failure = correct && !coarse.plausible();
    const int m = cfg_.m_count;
    const double tau = correct ? coarse.tau_coarse : 0.0;
    const double eps = correct ? coarse.epsilon_coarse : 0.0;
    Window w;
    BinSpectrum spec;
    std::vector<cplx> u;
    std::vector<cplx> u_half(static_cast<std::size_t>(m));
    for (int s = 0; s < cfg_.data_symbols_per_burst; ++s) {
        const int start = cfg_.data_symbol_start(s);
        extract_coarse(x2, start, tau, eps, w);
        demod_.spectrum(w.main, ChirpDirection::up, u, spec);
        const int k = spec.peak_index;
        demod_.dechirp_into(w.half, ChirpDirection::up, u_half);
        const auto hb = half_bins_at(demod_, u_half, ChirpDirection::up, k);
        const double frac = peak_offset(magnitudes_around(spec, hb, k));
        rep.decoded.push_back({k, 0});
        rep.trace.push_back({tau, eps, 0.0, -frac, 0.0});
    }
    return rep;
}

BurstReport Receiver::naive(const IqBuffer& rx) const {
    const IqBuffer x2 = chain_.process(rx);
    return detect_with_coarse(x2, CoarseSync{}, false);
}

BurstReport Receiver::noncoherent(const IqBuffer& rx) const {
    const IqBuffer x2 = chain_.process(rx);
    double n0 = 0.0;
    const CoarseSync coarse = preamble_sync(x2, &n0);
    BurstReport rep = detect_with_coarse(x2, coarse, true);
    rep.psnr_estimate_db = psnr(cfg_, std::max(n0, 1e-12));
    return rep;
}

BurstReport Receiver::coherent(const IqBuffer& rx) const {
    const IqBuffer x2 = chain_.process(rx);
    const int m = cfg_.m_count;
    double n0 = 0.0;
    const CoarseSync coarse = preamble_sync(x2, &n0);
    BurstReport rep;
    rep.coarse = coarse;
    rep.sync_failure = !coarse.plausible();
    rep.psnr_estimate_db = psnr(cfg_, std::max(n0, 1e-12));

    Window w;
    Window hw;
    BinSpectrum spec;
    BinSpectrum head_spec;
    std::vector<cplx> u;
    std::vector<cplx> u_half(static_cast<std::size_t>(m));

    // Seed the phase accumulator from the last up chirp of the preamble,
    // corrected with the coarse estimates. Its phase is referenced to the
    // centre of that symbol, as is the loop state.
    extract(x2, cfg_.up_symbol_start(cfg_.n_up - 1), coarse.tau_coarse, 0.0,
            coarse.epsilon_coarse, w);
    demod_.spectrum(w.main, ChirpDirection::up, u, spec);
    const double seed_phase = phase_error(spec.bins[spec.peak_index],
                                          chirp_phase(spec.peak_index, m), 1);
    PhaseLoopState pl = phase_loop_seed(seed_phase, coarse.epsilon_coarse,
                                        sigma_phi_sq(rep.psnr_estimate_db),
                                        cfg_.n_down + cfg_.n_up, cfg_.q_phase, cfg_.q_freq);
    // Advance to the centre of the first data symbol.
    pl.x_hat[0] += pl.x_hat[1];
    const Mat2 p0 = pl.p_mat;
    pl.p_mat = {{{p0[0][0] + p0[1][1], p0[1][1]}, {p0[1][1], p0[1][1]}}};
    TimingLoopState tl = TimingLoopState::seeded(coarse.tau_coarse);

    const int q = cfg_.psk_order;
    for (int s = 0; s < cfg_.data_symbols_per_burst; ++s) {
        const bool head = s < cfg_.noncoherent_head;
        extract(x2, cfg_.data_symbol_start(s), tl.accumulator, pl.x_hat[0], pl.x_hat[1], w);
        demod_.spectrum(w.main, ChirpDirection::up, u, spec);
        const int k = spec.peak_index;
        CssSymbol sym;
        if (head) {
            // Head decisions come from the coarse-corrected window, as in the
            // non-coherent receiver; the loops still measure on the tracked one.
            extract_coarse(x2, cfg_.data_symbol_start(s), coarse.tau_coarse,
                           coarse.epsilon_coarse, hw);
            demod_.spectrum(hw.main, ChirpDirection::up, u, head_spec);
            sym = {head_spec.peak_index, 0};
        } else {
            sym = detect_coherent(spec, 0.0, cfg_, q);
        }

        double e_tau = 0.0;
        if (sym.m == k) {
            demod_.dechirp_into(w.half, ChirpDirection::up, u_half);
            const auto hb = half_bins_at(demod_, u_half, ChirpDirection::up, k);
            // Data chirps place a late arrival at a lower bin.
            e_tau = -peak_offset(magnitudes_around(spec, hb, k));
        }
        const double e_phi =
            phase_error(spec.bins[sym.m], chirp_phase(sym.m, m), head ? 1 : q);

        tl = timing_loop_update(tl, e_tau);
        pl = phase_loop_update(pl, e_phi);
        rep.decoded.push_back(sym);
        rep.trace.push_back({tl.accumulator, pl.x_hat[1], pl.x_hat[0], e_tau, e_phi});
    }
    return rep;
}

BurstReport Receiver::ideal(const IqBuffer& rx, const ChannelParams& truth,
                            DetectionMode mode) const {
    const IqBuffer x2 = chain_.process(rx);
    const int m = cfg_.m_count;
    // Undo the rotation at the received sample times, then advance by tau.
    std::vector<cplx> z(x2.samples);
    const double step = truth.epsilon_ui / (2.0 * m);
    for (std::size_t i = 0; i < z.size(); ++i) {
        double cycles = step * static_cast<double>(i);
        cycles -= std::floor(cycles);
        z[i] *= std::polar(1.0, -(kTwoPi * cycles + truth.psi_rad));
    }
    const IqBuffer aligned(truth.tau_ui == 0.0 ? std::move(z)
                                               : sinc_fractional_delay(z, -2.0 * truth.tau_ui),
                           SampleRate::half_shift_2x);

    BurstReport rep;
    rep.coarse = {truth.tau_ui, truth.epsilon_ui, truth.tau_ui + truth.epsilon_ui,
                  truth.epsilon_ui - truth.tau_ui};
    Window w;
    BinSpectrum spec;
    std::vector<cplx> u;
    for (int s = 0; s < cfg_.data_symbols_per_burst; ++s) {
        extract(aligned, cfg_.data_symbol_start(s), 0.0, 0.0, 0.0, w);
        demod_.spectrum(w.main, ChirpDirection::up, u, spec);
        CssSymbol sym{spec.peak_index, 0};
        if (mode == DetectionMode::coherent) {
            const bool head = s < cfg_.noncoherent_head;
            sym = detect_coherent(spec, 0.0, cfg_, head ? 1 : cfg_.psk_order);
        }
        rep.decoded.push_back(sym);
        rep.trace.push_back({truth.tau_ui, truth.epsilon_ui, 0.0, 0.0, 0.0});
    }
    return rep;
}

BurstReport receive_naive(const IqBuffer& rx, const ModemConfig& cfg) {
    return Receiver(cfg).naive(rx);
}

BurstReport receive_noncoherent(const IqBuffer& rx, const ModemConfig& cfg) {
    return Receiver(cfg).noncoherent(rx);
}

BurstReport receive_coherent(const IqBuffer& rx, const ModemConfig& cfg) {
    return Receiver(cfg).coherent(rx);
}

BurstReport receive_ideal(const IqBuffer& rx, const ModemConfig& cfg, const ChannelParams& truth,
                          DetectionMode mode) {
    return Receiver(cfg).ideal(rx, truth, mode);
}

int symbol_bits(const ModemConfig& cfg, int s) {
    return cfg.sf + (s >= cfg.noncoherent_head ? cfg.psk_bits() : 0);
}

long burst_bits(const ModemConfig& cfg) {
    long total = 0;
    for (int s = 0; s < cfg.data_symbols_per_burst; ++s) {
        total += symbol_bits(cfg, s);
    }
    return total;
}

double bits_per_symbol(const ModemConfig& cfg) {
    if (cfg.data_symbols_per_burst == 0) {
        return cfg.sf;
    }
    return static_cast<double>(burst_bits(cfg)) / cfg.data_symbols_per_burst;
}

std::uint32_t psk_bits_of(int p) {
    const auto v = static_cast<std::uint32_t>(p);
    return v ^ (v >> 1);
}

int psk_point_of(std::uint32_t bits) {
    // Inverse Gray code.
    std::uint32_t v = bits;
    for (std::uint32_t shift = bits >> 1; shift != 0; shift >>= 1) {
        v ^= shift;
    }
    return static_cast<int>(v);
}

void score_report(BurstReport& report, const Burst& burst, const ModemConfig& cfg) {
    if (report.decoded.size() != burst.data.size()) {
        throw std::invalid_argument("score_report: decoded length differs from burst length");
    }
    long bit_err = 0;
    long sym_err = 0;
    for (std::size_t s = 0; s < burst.data.size(); ++s) {
        const CssSymbol& tx = burst.data[s];
        const CssSymbol& rx = report.decoded[s];
        int e = std::popcount(static_cast<std::uint32_t>(tx.m ^ rx.m));
        if (static_cast<int>(s) >= cfg.noncoherent_head && cfg.psk_order > 1) {
            e += std::popcount(psk_bits_of(tx.p) ^ psk_bits_of(rx.p));
        }
        bit_err += e;
        sym_err += (tx.m != rx.m || tx.p != rx.p) ? 1 : 0;
    }
    report.bit_errors = bit_err;
    report.symbol_errors = sym_err;
    report.bits_sent = burst_bits(cfg);
}

RateGain rate_improvement(const ModemConfig& cfg) {
    const long num = burst_bits(cfg);
    const long den = static_cast<long>(cfg.sf) * cfg.data_symbols_per_burst;
    const long g = std::gcd(num, den);
    return {num / g, den / g};
}

}  // namespace lorasync
