#pragma once

#include <cstdint>
#include <limits>

#include "lorasync/config.hpp"
#include "lorasync/filters.hpp"

namespace lorasync {

/// Channel impairments for one burst. Offsets are fractional, in UI.
struct ChannelParams {
    double tau_ui = 0.0;        ///< delay, positive = late
    double epsilon_ui = 0.0;    ///< CFO normalized as M * df / B
    double psi_rad = 0.0;       ///< carrier phase
    double snr_db = std::numeric_limits<double>::infinity();  ///< per baseband sample, 1/N0
    std::uint64_t seed = 0;     ///< noise stream
};

/// Delay, rotate and add AWGN to an L x burst.
///
/// AWGN is scaled so the noise variance after the receive chain, per
/// baseband sample, equals N0 = 10^(-snr_db / 10).
IqBuffer apply_channel(const IqBuffer& x, const ChannelParams& params, const ModemConfig& cfg);

/// Same, with the noise injected against an explicit receive chain.
IqBuffer apply_channel(const IqBuffer& x, const ChannelParams& params, const ModemConfig& cfg,
                       const ReceiveChain& chain);

/// Variance per L x sample that yields baseband noise variance N0 at the
/// output of `chain`. Measured by driving the chain itself, so any change to
/// its filters is picked up.
double calibrate_noise(const ReceiveChain& chain, double snr_db);
double calibrate_noise(const ModemConfig& cfg, double snr_db);

/// snr_db = ebn0_db - 10 log10(M / bits_per_symbol).
double ebn0_to_snr(const ModemConfig& cfg, double ebn0_db, double bits_per_symbol);

/// Hertz offset corresponding to a normalized CFO, df = epsilon * B / M.
double epsilon_to_hz(const ModemConfig& cfg, double epsilon_ui);
double hz_to_epsilon(const ModemConfig& cfg, double df_hz);

}  // namespace lorasync
