#include "lorasync/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace lorasync {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

double calibrate_noise(const ReceiveChain& chain, double snr_db) {
    if (!std::isfinite(snr_db)) {
        return 0.0;
    }
    const int lx = chain.oversample();
    // White input of variance s^2 gives output variance s^2 * sum_p E_p, where
    // E_p is the baseband output energy for an impulse at L x phase p.
    const std::size_t len = 1024 * static_cast<std::size_t>(lx);
    double gain = 0.0;
    for (int p = 0; p < lx; ++p) {
        IqBuffer impulse(std::vector<cplx>(len), SampleRate::oversampled_Lx);
        impulse[len / 2 + static_cast<std::size_t>(p)] = 1.0;
        const IqBuffer out = chain.process(impulse);
        for (std::size_t i = 0; i < out.size(); i += 2) {
            gain += std::norm(out[i]);
        }
    }
    const double n0 = std::pow(10.0, -snr_db / 10.0);
    return n0 / gain;
}

double calibrate_noise(const ModemConfig& cfg, double snr_db) {
    return calibrate_noise(ReceiveChain(cfg), snr_db);
}

IqBuffer apply_channel(const IqBuffer& x, const ChannelParams& params, const ModemConfig& cfg,
                       const ReceiveChain& chain) {
    if (!std::isfinite(params.tau_ui) || !std::isfinite(params.epsilon_ui) ||
        !std::isfinite(params.psi_rad)) {
        throw std::invalid_argument("apply_channel: non-finite channel offset");
    }
    const int lx = cfg.oversample;
    std::vector<cplx> y = params.tau_ui == 0.0
                              ? x.samples
                              : sinc_fractional_delay(x.view(), params.tau_ui * lx);
    if (params.epsilon_ui != 0.0 || params.psi_rad != 0.0) {
        const double step = params.epsilon_ui / (static_cast<double>(cfg.m_count) * lx);
        for (std::size_t n = 0; n < y.size(); ++n) {
            double cycles = step * static_cast<double>(n);
            cycles -= std::floor(cycles);
            y[n] *= std::polar(1.0, kTwoPi * cycles + params.psi_rad);
        }
    }
    const double var = calibrate_noise(chain, params.snr_db);
    if (var > 0.0) {
        std::mt19937_64 rng(params.seed);
        std::normal_distribution<double> gauss(0.0, std::sqrt(var / 2.0));
        for (auto& v : y) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            v += cplx{re, im};
        }
    }
    return {std::move(y), SampleRate::oversampled_Lx};
}

IqBuffer apply_channel(const IqBuffer& x, const ChannelParams& params, const ModemConfig& cfg) {
    return apply_channel(x, params, cfg, ReceiveChain(cfg));
}

double ebn0_to_snr(const ModemConfig& cfg, double ebn0_db, double bits_per_symbol) {
    if (!(bits_per_symbol > 0.0)) {
        throw std::invalid_argument("bits_per_symbol must be positive");
    }
    return ebn0_db - 10.0 * std::log10(static_cast<double>(cfg.m_count) / bits_per_symbol);
}

double epsilon_to_hz(const ModemConfig& cfg, double epsilon_ui) {
    return epsilon_ui * cfg.bandwidth_hz / cfg.m_count;
}

double hz_to_epsilon(const ModemConfig& cfg, double df_hz) {
    return cfg.m_count * df_hz / cfg.bandwidth_hz;
}

}  // namespace lorasync
