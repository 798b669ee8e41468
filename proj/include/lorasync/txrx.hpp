#pragma once

// End-to-end pipelines: the shaped transmitter and the naive, non-coherent,
// coherent and genie (ideal) receivers.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "lorasync/channel.hpp"
#include "lorasync/chirp.hpp"
#include "lorasync/config.hpp"
#include "lorasync/filters.hpp"
#include "lorasync/sync.hpp"

namespace lorasync {

struct Burst {
    std::vector<CssSymbol> data;
};

/// Uniform random data; the non-coherent head carries p = 0.
Burst make_random_burst(const ModemConfig& cfg, std::mt19937_64& rng);

/// Throws unless the burst has the configured length, valid symbols and an
/// unmodulated head.
void check_burst(const ModemConfig& cfg, const Burst& burst);

/// Preamble followed by the data chirps at the baseband rate.
IqBuffer burst_baseband(const Burst& burst, const ModemConfig& cfg);

/// Burst at the L x rate, SRRC shaped; length burst_length * L + filter tail.
IqBuffer transmit(const Burst& burst, const ModemConfig& cfg);

struct SyncTraceEntry {
    double tau_hat = 0.0;
    double f_hat = 0.0;
    double phi_hat = 0.0;
    double e_tau = 0.0;
    double e_phi = 0.0;
};

struct BurstReport {
    std::vector<CssSymbol> decoded;
    std::vector<SyncTraceEntry> trace;
    CoarseSync coarse;
    bool sync_failure = false;
    double psnr_estimate_db = 0.0;
    // Filled by score_report when the transmitted burst is known.
    std::optional<long> bit_errors;
    std::optional<long> symbol_errors;
    long bits_sent = 0;
};

enum class DetectionMode { noncoherent, coherent };

/// Reusable receiver for one configuration. All members are const and keep
/// their scratch on the stack, so one instance can serve many threads.
class Receiver {
public:
    explicit Receiver(const ModemConfig& cfg);

    const ModemConfig& config() const { return cfg_; }

    /// Matched filter only; no timing or frequency correction.
    BurstReport naive(const IqBuffer& rx) const;
    /// Coarse preamble sync, then non-coherent detection.
    BurstReport noncoherent(const IqBuffer& rx) const;
    /// Coarse sync seeding the timing and phase loops, decision-directed tracking.
    BurstReport coherent(const IqBuffer& rx) const;
    /// Exact compensation with the true channel offsets.
    BurstReport ideal(const IqBuffer& rx, const ChannelParams& truth, DetectionMode mode) const;

    /// Coarse estimate from a 2 x stream; exposed for tests.
    CoarseSync preamble_sync(const IqBuffer& x2, double* n0_estimate = nullptr) const;

    const ReceiveChain& chain() const { return chain_; }

private:
    struct Window {
        std::vector<cplx> main;
        std::vector<cplx> half;
    };

    void extract(const IqBuffer& x2, int start, double tau_hat, double phase_cycles,
                 double freq, Window& w) const;
    void extract_coarse(const IqBuffer& x2, int start, double tau, double eps, Window& w) const;
    BurstReport detect_with_coarse(const IqBuffer& x2, const CoarseSync& coarse, bool correct) const;

    ModemConfig cfg_;
    Demodulator demod_;
    ReceiveChain chain_;
    FarrowInterpolator farrow_;
};

BurstReport receive_naive(const IqBuffer& rx, const ModemConfig& cfg);
BurstReport receive_noncoherent(const IqBuffer& rx, const ModemConfig& cfg);
BurstReport receive_coherent(const IqBuffer& rx, const ModemConfig& cfg);
BurstReport receive_ideal(const IqBuffer& rx, const ModemConfig& cfg, const ChannelParams& truth,
                          DetectionMode mode);

/// Bits carried by data symbol s (SF plus PSK bits after the head).
int symbol_bits(const ModemConfig& cfg, int s);
long burst_bits(const ModemConfig& cfg);
double bits_per_symbol(const ModemConfig& cfg);

/// Bit labels: natural binary for m, Gray for p (label of point p is p ^ (p >> 1)).
std::uint32_t psk_bits_of(int p);
int psk_point_of(std::uint32_t bits);

/// Count bit and symbol errors of `report` against the transmitted burst.
void score_report(BurstReport& report, const Burst& burst, const ModemConfig& cfg);

struct RateGain {
    long numerator = 0;    ///< bits per burst
    long denominator = 0;  ///< bits per conventional burst
    double percent() const { return 100.0 * static_cast<double>(numerator) / denominator; }
};

/// Bits of a PSK-CSS burst relative to the conventional burst, reduced.
RateGain rate_improvement(const ModemConfig& cfg);

}  // namespace lorasync
