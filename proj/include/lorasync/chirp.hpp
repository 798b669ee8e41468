#pragma once

// Chirp waveform mathematics: basic chirp, cyclic-shift symbol mapping,
// de-chirping, the 1/sqrt(M) DFT and the two detection rules.

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "lorasync/config.hpp"

namespace lorasync {

/// M complex DFT bins of one de-chirped symbol.
struct BinSpectrum {
    std::vector<cplx> bins;
    int peak_index = 0;
    /// (v[k_peak - 0.5], v[k_peak + 0.5]); filled by the timing detector.
    std::optional<std::pair<cplx, cplx>> half_bins;
    /// Full DFT of the half-sample branch. Only preamble processing keeps it,
    /// because the coarse estimator picks its own peak from the power sum.
    std::vector<cplx> half_branch_bins;
};

/// Forward DFT of a fixed power-of-two size, unnormalized.
///
/// Plans are cached process-wide; execute() is safe to call concurrently.
class Dft {
public:
    explicit Dft(int size);

    int size() const { return size_; }
    void execute(std::span<const cplx> in, std::span<cplx> out) const;

private:
    int size_;
    std::shared_ptr<void> plan_;
};

/// Chirp phase 2*pi*(k^2/(2M) - k/2) reduced to [0, 2*pi).
double chirp_phase(long long k, int m_count);

IqBuffer gen_basic_chirp(const ModemConfig& cfg, ChirpDirection direction);
IqBuffer gen_symbol_chirp(const ModemConfig& cfg, const CssSymbol& sym);

/// u[n] = y[n] * conj(x0[n]) for up-chirp data, y[n] * x0[n] for down chirps.
IqBuffer dechirp(const ModemConfig& cfg, const IqBuffer& y, ChirpDirection direction);

/// bins[k] = (1/sqrt(M)) sum_n u[n] exp(-j 2 pi n k / M).
BinSpectrum dft_detect(const IqBuffer& u);

int detect_noncoherent(const BinSpectrum& spec);

/// Coherent decision with a known carrier phase psi_hat (radians).
///
/// The metric for bin k is max over PSK points p of
/// Re{bins[k] exp(-j psi_k) exp(-j 2 pi p / Q)}; for Q = 1 this is the plain
/// real part. `psk_order` overrides cfg.psk_order when positive, which is how
/// the unmodulated head of a PSK-CSS burst is detected.
CssSymbol detect_coherent(const BinSpectrum& spec, double psi_hat, const ModemConfig& cfg,
                          int psk_order = 0);

/// Peak SNR in dB, 10 log10(M / n0).
double psnr(const ModemConfig& cfg, double n0);

/// Precomputed chirp tables and DFT for one configuration.
///
/// Receivers keep one of these per pipeline so per-symbol processing does not
/// allocate or rebuild the basic chirp.
class Demodulator {
public:
    explicit Demodulator(const ModemConfig& cfg);

    int m_count() const { return m_; }
    const std::vector<cplx>& up_chirp() const { return up_; }

    /// De-chirp and DFT in one pass; `u` is scratch of length M.
    void spectrum(std::span<const cplx> y, ChirpDirection direction, std::vector<cplx>& u,
                  BinSpectrum& out) const;

    /// Normalized DFT of an already de-chirped block evaluated at one bin.
    cplx single_bin(std::span<const cplx> u, int k) const;

    void dechirp_into(std::span<const cplx> y, ChirpDirection direction,
                      std::span<cplx> u) const;

private:
    int m_;
    double scale_;
    std::vector<cplx> up_;
    std::vector<cplx> twiddle_;  // exp(-j 2 pi n / M)
    Dft dft_;
};

/// argmax_k |bins[k]|, smallest index on ties.
int argmax_magnitude(std::span<const cplx> bins);

}  // namespace lorasync
