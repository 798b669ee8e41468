#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace lorasync {

using cplx = std::complex<double>;

/// Static modem parameters shared by the transmitter, channel and receivers.
///
/// The default-constructed value is the reference operating point: SF 8,
/// 125 kHz, two-times oversampling, an 8 down / 8 up chirp preamble and a
/// 33-tap SRRC with roll-off 0.25.
struct ModemConfig {
    int sf = 8;
    int m_count = 256;               ///< M = 2^sf samples per symbol
    double bandwidth_hz = 125e3;
    int oversample = 2;              ///< L, transmitter / ADC rate factor
    int psk_order = 1;               ///< Q, PSK points carried by chirp phase
    int n_cp = 128;                  ///< cyclic prefix in front of each preamble group
    int n_down = 8;
    int n_up = 8;
    int data_symbols_per_burst = 256;
    double srrc_rolloff = 0.25;
    int srrc_order = 16;             ///< taps = 2 * order + 1 at the 2x rate
    int noncoherent_head = 16;       ///< leading data symbols detected non-coherently

    // Phase-loop process noise (UI^2 per symbol).
    double q_phase = 1e-10;
    double q_freq = 1e-12;

    /// Reference configuration for a spreading factor; n_cp follows M / 2.
    static ModemConfig for_sf(int sf);

    /// Throws std::invalid_argument when an invariant is broken.
    void validate() const;

    int srrc_taps() const { return 2 * srrc_order + 1; }
    int preamble_length() const { return 2 * n_cp + (n_down + n_up) * m_count; }
    int data_start() const { return preamble_length(); }
    int burst_length() const { return preamble_length() + data_symbols_per_burst * m_count; }
    int down_symbol_start(int b) const { return n_cp + b * m_count; }
    int up_symbol_start(int b) const { return 2 * n_cp + (n_down + b) * m_count; }
    int data_symbol_start(int s) const { return data_start() + s * m_count; }
    int psk_bits() const;
};

enum class ChirpDirection { up, down };

enum class SampleRate { baseband_1x, half_shift_2x, oversampled_Lx };

struct IqBuffer {
    std::vector<cplx> samples;
    SampleRate rate = SampleRate::baseband_1x;

    IqBuffer() = default;
    IqBuffer(std::vector<cplx> s, SampleRate r) : samples(std::move(s)), rate(r) {}

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    cplx& operator[](std::size_t i) { return samples[i]; }
    const cplx& operator[](std::size_t i) const { return samples[i]; }
    std::span<const cplx> view() const { return samples; }
};

struct CssSymbol {
    int m = 0;
    int p = 0;

    friend bool operator==(const CssSymbol&, const CssSymbol&) = default;
};

/// Throws unless 0 <= m < M and 0 <= p < Q.
void check_symbol(const ModemConfig& cfg, const CssSymbol& sym);

}  // namespace lorasync
