#pragma once

// Synchronization: preamble construction and accumulation, the demodulator
// and timing detector (DTD), coarse timing/frequency estimation from the
// down/up preamble, the 1/s timing loop and the Kalman-gain phase loop.

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "lorasync/chirp.hpp"
#include "lorasync/config.hpp"

namespace lorasync {

struct TimingEstimate {
    int tau_int = 0;        ///< signed peak bin in [-M/2, M/2)
    double tau_frac = 0.0;  ///< parabolic offset in [-0.5, 0.5]
    double tau = 0.0;       ///< tau_int + tau_frac (UI)
};

struct CoarseSync {
    double tau_coarse = 0.0;
    double epsilon_coarse = 0.0;
    double tau_down = 0.0;  ///< tau + epsilon
    double tau_up = 0.0;    ///< epsilon - tau

    /// Both estimates inside [-1, 1], the range a fractional-only channel can produce.
    bool plausible() const;
};

struct TimingLoopState {
    double accumulator = 0.0;  ///< tau_hat (UI)
    int s = 1;                 ///< next update uses gain 1/s

    static TimingLoopState seeded(double tau_coarse) { return {tau_coarse, 1}; }
};

using Mat2 = std::array<std::array<double, 2>, 2>;

/// Second-order phase loop held as a two-state Kalman filter.
///
/// State is (phase, frequency) in cycles and cycles per symbol. The phase
/// refers to the centre of the symbol about to be processed.
struct PhaseLoopState {
    std::array<double, 2> x_hat{0.0, 0.0};
    Mat2 p_mat{};
    Mat2 q_mat{};
    double sigma_phi_sq = 0.0;
    int s = 1;
    double k_p = 0.0;  ///< gains applied by the most recent update
    double k_i = 0.0;
};

/// 0 <= k < M mapped to [-M/2, M/2).
int signed_bin(int k, int m_count);

/// [CP | N_D down chirps | CP | N_U up chirps] at the baseband rate.
IqBuffer build_preamble(const ModemConfig& cfg);

/// y[n] = (1/n_rep) sum_b r[n + bM].
IqBuffer accumulate_preamble(const IqBuffer& r, int n_rep, const ModemConfig& cfg);

/// Offset of the vertex of the parabola through (-0.5, vm), (0, v0), (0.5, vp).
/// A flat or degenerate triple returns 0; the result is clamped to [-0.5, 0.5].
double parabolic_offset(double vm, double v0, double vp);

/// Fractional peak location from magnitudes on the half-sample grid around
/// the integer peak k: w = (|v[k-1]|, |v[k-0.5]|, |v[k]|, |v[k+0.5]|, |v[k+1]|).
///
/// The three-point parabola is centred on the largest of the middle three
/// samples, so the vertex always lies within a quarter sample of the centre.
/// Result is relative to k, clamped to [-0.5, 0.5].
double peak_offset(const std::array<double, 5>& w);

/// (v[k - 0.5], v[k + 0.5]) from the half-delayed branch.
///
/// For down chirps the half-delayed branch samples the pulse at k - 0.5 in
/// bin k; for up chirps (time delay maps to negative bin shift) it samples
/// k + 0.5 in bin k.
std::pair<cplx, cplx> half_bins_at(const Demodulator& demod, std::span<const cplx> u_half,
                                   ChirpDirection direction, int k);

struct DtdResult {
    BinSpectrum spectrum;
    TimingEstimate timing;
};

/// Demodulator and timing detector for one symbol.
///
/// `keep_half_branch` stores the full half-branch DFT in the spectrum (used
/// by coarse preamble processing).
DtdResult dtd(const Demodulator& demod, std::span<const cplx> y, std::span<const cplx> y_half,
              ChirpDirection direction, bool keep_half_branch = false);

DtdResult dtd(const IqBuffer& y, const IqBuffer& y_half, ChirpDirection direction,
              const ModemConfig& cfg);

/// Combine power-summed down and up preamble spectra into coarse offsets.
/// Each spectrum must carry its half-branch DFT.
CoarseSync coarse_estimate(std::span<const BinSpectrum> down_specs,
                           std::span<const BinSpectrum> up_specs);

/// tau_hat += e_tau / s; s += 1.
TimingLoopState timing_loop_update(TimingLoopState state, double e_tau);

/// Signed modulo, a - round(a / b) * b.
double smod(double a, double b);

/// Phase error (UI) of bin `value` after removing psi_ref, folded to +-1/(2q).
double phase_error(cplx value, double psi_ref, int q);

/// Phase error of the peak bin of `spec`.
double phase_detect(const BinSpectrum& spec, double psi_ref, int q);

/// sigma_phi^2 = 0.5 * 10^(-PSNR/10) / (2 pi)^2 in UI^2.
double sigma_phi_sq(double psnr_db);

/// Seed the phase loop: P0 = diag(sigma_phi^2, sigma_phi^2 / n_preamble).
PhaseLoopState phase_loop_seed(double phase, double frequency, double sigma_phi_sq,
                               int n_preamble, double q_phase, double q_freq);

/// One Kalman step: gains, state correction, covariance update and the F
/// prediction to the next symbol.
PhaseLoopState phase_loop_update(PhaseLoopState state, double e_phi);

}  // namespace lorasync
