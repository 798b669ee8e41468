#pragma once

// Pulse shaping and resampling: RC/SRRC design, polyphase interpolation and
// decimation, the oracle-grade sinc delay used by the channel, the Farrow
// timing corrector and the half-sample branch split.

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "lorasync/config.hpp"

namespace lorasync {

struct FirFilter {
    std::vector<double> taps;
    int design_rate = 1;        ///< samples per UI the taps are spaced at
    double group_delay = 0.0;   ///< in samples at design_rate

    std::size_t size() const { return taps.size(); }
};

/// Raised cosine sampled at t = k / rate over span_ui UI; peak value 1.
FirFilter design_rc(double beta, int span_ui, int rate);

/// Square-root raised cosine over span_ui UI, normalized to unit energy.
FirFilter design_srrc(double beta, int span_ui, int rate);

/// Kaiser-windowed sinc low-pass. `cutoff` is in cycles per sample at the
/// filter's own rate; DC gain is `gain`.
FirFilter design_lowpass(double cutoff, int num_taps, double kaiser_beta, double gain);

/// Zero-stuff by `up`, filter, keep every `down`-th sample.
///
/// Group delay is removed: output sample i sits at input time i * down / up.
/// The output keeps the trailing half of the filter response, so its length is
/// ceil((N * up + group_delay) / down).
IqBuffer resample(const IqBuffer& x, const FirFilter& filt, int up, int down,
                  SampleRate out_rate);

/// y[n] = x(n - delay) using a 64-tap Kaiser-windowed sinc. Same length as x.
/// Used by the channel and by the genie receiver; kept separate from the
/// Farrow corrector on purpose.
std::vector<cplx> sinc_fractional_delay(std::span<const cplx> x, double delay_samples);

/// Fifth-order polynomial interpolator in Farrow form.
///
/// Each of the six subfilters spans a 16-sample window at the 2x rate. The
/// coefficients are a least-squares fit to the ideal fractional delay over
/// |f| <= kPassband cycles per sample, which covers the raised-cosine band
/// (1 + beta) B / 2 for beta <= 0.25. The output at offset mu is evaluated by
/// Horner's rule over the subfilter outputs.
class FarrowInterpolator {
public:
    static constexpr int kOrder = 5;
    static constexpr int kTaps = 16;
    static constexpr int kCenter = kTaps / 2 - 1;  ///< window index of node 0
    static constexpr double kPassband = 0.3125;

    using Weights = std::array<double, kTaps>;
    using Coefficients = std::array<std::array<double, kOrder + 1>, kTaps>;

    explicit FarrowInterpolator(int oversample = 2);

    int order() const { return kOrder; }
    int oversample() const { return oversample_; }

    /// x at a fractional index; samples outside [0, x.size()) read as zero.
    cplx at(std::span<const cplx> x, double position) const;

    /// Window weights h_j(mu) for a fixed offset mu in [0, 1).
    Weights weights(double mu) const;
    /// x(base + mu) with precomputed weights for mu.
    cplx at(std::span<const cplx> x, long long base, const Weights& w) const;

    /// Streaming interface: push one input sample into the delay line.
    void push(cplx sample);
    /// Output at offset mu in [0, 1) past the window centre, which trails the
    /// newest sample by kTaps - 1 - kCenter samples.
    cplx output(double mu) const;
    void reset();

    /// coefficients[j][p]: weight of window tap j for mu^p.
    const Coefficients& coefficients() const { return *coef_; }

private:
    int oversample_;
    const Coefficients* coef_;
    std::array<cplx, kTaps> line_{};
};

/// Delay a 2x-rate buffer by mu UI (mu * oversample samples), |mu| <= 0.5.
/// Output has the same length and no added group delay.
IqBuffer farrow_shift(FarrowInterpolator& interp, const IqBuffer& x, double mu);

/// Split a 2x stream into y[n] (even samples) and y[n - 0.5] (x2[2n - 1],
/// with x2[-1] = 0). An odd trailing sample is dropped.
std::pair<IqBuffer, IqBuffer> half_sample_branch(const IqBuffer& x2);

/// Receiver front end: L x -> 2x decimation (when L > 2) and the SRRC matched
/// filter at 2x. Output sample 2n is aligned with baseband sample n.
class ReceiveChain {
public:
    explicit ReceiveChain(const ModemConfig& cfg, double srrc_gain = 1.0);

    IqBuffer process(const IqBuffer& rx) const;

    const FirFilter& srrc() const { return srrc_; }
    const FirFilter& decimator() const { return h_down_; }
    int decimation() const { return decim_; }
    int oversample() const { return oversample_; }

private:
    int oversample_;
    int decim_;
    FirFilter srrc_;
    FirFilter h_down_;
};

/// Transmit shaping: 1x -> 2x SRRC -> L x interpolation (when L > 2).
class TransmitChain {
public:
    explicit TransmitChain(const ModemConfig& cfg);

    IqBuffer process(const IqBuffer& x1) const;

    const FirFilter& srrc() const { return srrc_; }

private:
    int interp_;
    FirFilter srrc_;
    FirFilter h_up_;
};

/// Anti-alias filter for a factor-r rate change between 2x and L x.
FirFilter design_rate_change_filter(int factor, double gain);

}  // namespace lorasync
