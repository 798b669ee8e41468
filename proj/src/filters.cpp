#include "lorasync/filters.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lorasync {

namespace {

constexpr double kPi = std::numbers::pi;

double sinc(double t) {
    if (t == 0.0) {
        return 1.0;
    }
    if (t == std::round(t)) {
        return 0.0;
    }
    return std::sin(kPi * t) / (kPi * t);
}

double kaiser(double x, double beta) {
    // x normalized to [-1, 1]
    if (std::abs(x) > 1.0) {
        return 0.0;
    }
    return std::cyl_bessel_i(0.0, beta * std::sqrt(1.0 - x * x)) / std::cyl_bessel_i(0.0, beta);
}

void check_rolloff(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) {
        throw std::invalid_argument("roll-off must lie in (0, 1)");
    }
}

std::vector<double> tap_times(int span_ui, int rate) {
    if (span_ui < 0 || rate < 1) {
        throw std::invalid_argument("filter span and rate must be positive");
    }
    const int n = span_ui * rate + 1;
    std::vector<double> t(static_cast<std::size_t>(n));
    const int center = (n - 1) / 2;
    for (int k = 0; k < n; ++k) {
        t[k] = static_cast<double>(k - center) / rate;
    }
    return t;
}

double rc_value(double t, double beta) {
    if (t == 0.0) {
        return 1.0;
    }
    const double x = 2.0 * beta * t;
    if (std::abs(std::abs(x) - 1.0) < 1e-12) {
        return kPi / 4.0 * sinc(1.0 / (2.0 * beta));
    }
    return sinc(t) * std::cos(beta * kPi * t) / (1.0 - x * x);
}

double srrc_value(double t, double beta) {
    if (t == 0.0) {
        return 1.0 - beta + 4.0 * beta / kPi;
    }
    const double x = 4.0 * beta * t;
    if (std::abs(std::abs(x) - 1.0) < 1e-12) {
        const double a = kPi / (4.0 * beta);
        return beta / std::sqrt(2.0) *
               ((1.0 + 2.0 / kPi) * std::sin(a) + (1.0 - 2.0 / kPi) * std::cos(a));
    }
    return (std::sin(kPi * t * (1.0 - beta)) + x * std::cos(kPi * t * (1.0 + beta))) /
           (kPi * t * (1.0 - x * x));
}

constexpr int kSincHalfWidth = 32;
constexpr double kSincKaiserBeta = 8.0;

}  // namespace

FirFilter design_rc(double beta, int span_ui, int rate) {
    check_rolloff(beta);
    FirFilter f;
    f.design_rate = rate;
    for (double t : tap_times(span_ui, rate)) {
        f.taps.push_back(rc_value(t, beta));
    }
    f.group_delay = static_cast<double>(f.taps.size() - 1) / 2.0;
    return f;
}

FirFilter design_srrc(double beta, int span_ui, int rate) {
    check_rolloff(beta);
    FirFilter f;
    f.design_rate = rate;
    double energy = 0.0;
    for (double t : tap_times(span_ui, rate)) {
        const double v = srrc_value(t, beta);
        f.taps.push_back(v);
        energy += v * v;
    }
    const double scale = 1.0 / std::sqrt(energy);
    for (auto& v : f.taps) {
        v *= scale;
    }
    // Enforce exact symmetry; the closed form is even but the two halves are
    // evaluated independently.
    const std::size_t n = f.taps.size();
    for (std::size_t k = 0; k < n / 2; ++k) {
        f.taps[n - 1 - k] = f.taps[k];
    }
    f.group_delay = static_cast<double>(n - 1) / 2.0;
    return f;
}

FirFilter design_lowpass(double cutoff, int num_taps, double kaiser_beta, double gain) {
    if (num_taps < 1 || num_taps % 2 == 0) {
        throw std::invalid_argument("low-pass needs an odd tap count");
    }
    if (!(cutoff > 0.0 && cutoff <= 0.5)) {
        throw std::invalid_argument("low-pass cutoff must lie in (0, 0.5]");
    }
    FirFilter f;
    f.design_rate = 1;
    const int center = (num_taps - 1) / 2;
    double sum = 0.0;
    for (int k = 0; k < num_taps; ++k) {
        const double t = static_cast<double>(k - center);
        const double w = center == 0 ? 1.0 : kaiser(t / center, kaiser_beta);
        const double v = 2.0 * cutoff * sinc(2.0 * cutoff * t) * w;
        f.taps.push_back(v);
        sum += v;
    }
    for (auto& v : f.taps) {
        v *= gain / sum;
    }
    for (int k = 0; k < center; ++k) {
        f.taps[num_taps - 1 - k] = f.taps[k];
    }
    f.group_delay = center;
    return f;
}

FirFilter design_rate_change_filter(int factor, double gain) {
    if (factor < 1) {
        throw std::invalid_argument("rate change factor must be >= 1");
    }
    if (factor == 1) {
        return FirFilter{{gain}, 1, 0.0};
    }
    return design_lowpass(0.5 / factor, 24 * factor + 1, 6.0, gain);
}

IqBuffer resample(const IqBuffer& x, const FirFilter& filt, int up, int down,
                  SampleRate out_rate) {
    if (up < 1 || down < 1) {
        throw std::invalid_argument("resample factors must be >= 1");
    }
    const int taps = static_cast<int>(filt.taps.size());
    if (taps == 0 || taps % 2 == 0) {
        throw std::invalid_argument("resample needs an odd, non-empty filter");
    }
    const long long n_in = static_cast<long long>(x.size());
    if (n_in * up < taps) {
        throw std::invalid_argument("resample: buffer (" + std::to_string(n_in) +
                                    " samples) shorter than filter span");
    }
    const long long gd = (taps - 1) / 2;
    const long long n_out = (n_in * up + gd + down - 1) / down;
    std::vector<cplx> y(static_cast<std::size_t>(n_out));
    const double* h = filt.taps.data();
    const cplx* in = x.samples.data();
    for (long long i = 0; i < n_out; ++i) {
        const long long p = i * down + gd;
        // Only taps aligned with a non-zero (un-stuffed) input contribute.
        long long k = p % up;
        long long j = (p - k) / up;
        if (j >= n_in) {
            const long long skip = j - n_in + 1;
            k += skip * up;
            j -= skip;
        }
        double re = 0.0;
        double im = 0.0;
        for (; k < taps && j >= 0; k += up, --j) {
            re += h[k] * in[j].real();
            im += h[k] * in[j].imag();
        }
        y[i] = {re, im};
    }
    return {std::move(y), out_rate};
}

std::vector<cplx> sinc_fractional_delay(std::span<const cplx> x, double delay_samples) {
    const double whole = std::floor(delay_samples);
    const double frac = delay_samples - whole;
    const long long shift = static_cast<long long>(whole);
    const int lo = -(kSincHalfWidth - 1);
    const int hi = kSincHalfWidth;
    std::vector<double> h(static_cast<std::size_t>(hi - lo + 1));
    double sum = 0.0;
    for (int k = lo; k <= hi; ++k) {
        const double t = k - frac;
        const double v = sinc(t) * kaiser(t / kSincHalfWidth, kSincKaiserBeta);
        h[k - lo] = v;
        sum += v;
    }
    if (frac != 0.0) {
        for (auto& v : h) {
            v /= sum;
        }
    }
    const long long n = static_cast<long long>(x.size());
    std::vector<cplx> y(x.size());
    if (frac == 0.0) {
        for (long long i = 0; i < n; ++i) {
            const long long j = i - shift;
            if (j >= 0 && j < n) {
                y[i] = x[j];
            }
        }
        return y;
    }
    const double* xd = reinterpret_cast<const double*>(x.data());
    for (long long i = 0; i < n; ++i) {
        // Taps k with 0 <= i - shift - k < n.
        const long long k0 = std::max<long long>(lo, i - shift - n + 1);
        const long long k1 = std::min<long long>(hi, i - shift);
        double re = 0.0;
        double im = 0.0;
        for (long long k = k0; k <= k1; ++k) {
            const double c = h[k - lo];
            const long long j = i - shift - k;
            re += c * xd[2 * j];
            im += c * xd[2 * j + 1];
        }
        y[i] = {re, im};
    }
    return y;
}

namespace {

// Least-squares Farrow design: minimize the squared error of
// sum_j h_j(mu) exp(j 2 pi f n_j) against exp(j 2 pi f mu) over a grid of
// offsets mu in [0, 1] and frequencies |f| <= passband.
FarrowInterpolator::Coefficients design_farrow() {
    constexpr int n = FarrowInterpolator::kTaps;
    constexpr int np = FarrowInterpolator::kOrder + 1;
    constexpr int n_mu = 33;
    constexpr int n_f = 81;
    const double fp = FarrowInterpolator::kPassband;
    Eigen::MatrixXd a(2 * n_mu * n_f, n * np);
    Eigen::VectorXd y(2 * n_mu * n_f);
    int row = 0;
    for (int im = 0; im < n_mu; ++im) {
        const double mu = static_cast<double>(im) / (n_mu - 1);
        for (int jf = 0; jf < n_f; ++jf) {
            const double f = -fp + 2.0 * fp * jf / (n_f - 1);
            for (int j = 0; j < n; ++j) {
                const double phase = 2.0 * kPi * f * (j - FarrowInterpolator::kCenter);
                double mp = 1.0;
                for (int p = 0; p < np; ++p) {
                    a(row, j * np + p) = std::cos(phase) * mp;
                    a(row + 1, j * np + p) = std::sin(phase) * mp;
                    mp *= mu;
                }
            }
            y(row) = std::cos(2.0 * kPi * f * mu);
            y(row + 1) = std::sin(2.0 * kPi * f * mu);
            row += 2;
        }
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(y);
    FarrowInterpolator::Coefficients out{};
    for (int j = 0; j < n; ++j) {
        for (int p = 0; p < np; ++p) {
            out[j][p] = c(j * np + p);
        }
    }
    return out;
}

}  // namespace

FarrowInterpolator::FarrowInterpolator(int oversample) : oversample_(oversample) {
    if (oversample < 1) {
        throw std::invalid_argument("Farrow oversample must be >= 1");
    }
    static const Coefficients table = design_farrow();
    coef_ = &table;
}

FarrowInterpolator::Weights FarrowInterpolator::weights(double mu) const {
    Weights w{};
    for (int j = 0; j < kTaps; ++j) {
        const auto& c = (*coef_)[j];
        double v = c[kOrder];
        for (int p = kOrder - 1; p >= 0; --p) {
            v = v * mu + c[p];
        }
        w[j] = v;
    }
    return w;
}

cplx FarrowInterpolator::at(std::span<const cplx> x, long long base, const Weights& w) const {
    const long long n = static_cast<long long>(x.size());
    const long long first = base - kCenter;
    double re = 0.0;
    double im = 0.0;
    if (first >= 0 && first + kTaps <= n) {
        const double* xd = reinterpret_cast<const double*>(x.data() + first);
        for (int j = 0; j < kTaps; ++j) {
            re += w[j] * xd[2 * j];
            im += w[j] * xd[2 * j + 1];
        }
        return {re, im};
    }
    for (int j = 0; j < kTaps; ++j) {
        const long long idx = first + j;
        if (idx >= 0 && idx < n) {
            re += w[j] * x[idx].real();
            im += w[j] * x[idx].imag();
        }
    }
    return {re, im};
}

cplx FarrowInterpolator::at(std::span<const cplx> x, double position) const {
    const double base = std::floor(position);
    const double mu = position - base;
    const long long i0 = static_cast<long long>(base);
    if (mu == 0.0) {
        return (i0 >= 0 && i0 < static_cast<long long>(x.size())) ? x[i0] : cplx{};
    }
    return at(x, i0, weights(mu));
}

void FarrowInterpolator::push(cplx sample) {
    for (int j = 0; j < kTaps - 1; ++j) {
        line_[j] = line_[j + 1];
    }
    line_[kTaps - 1] = sample;
}

cplx FarrowInterpolator::output(double mu) const {
    if (mu == 0.0) {
        return line_[kCenter];
    }
    return at(line_, kCenter, weights(mu));
}

void FarrowInterpolator::reset() { line_.fill(cplx{}); }

IqBuffer farrow_shift(FarrowInterpolator& interp, const IqBuffer& x, double mu) {
    if (std::abs(mu) > 0.5) {
        throw std::invalid_argument("farrow_shift: |mu| must not exceed 0.5 UI");
    }
    const double d = mu * interp.oversample();
    // Output n reads position n - d = n + k0 + frac with frac in [0, 1).
    const double base = std::floor(-d);
    const long long k0 = static_cast<long long>(base);
    const double frac = -d - base;
    const long long lag = k0 + (FarrowInterpolator::kTaps - 1 - FarrowInterpolator::kCenter);
    const long long n = static_cast<long long>(x.size());
    std::vector<cplx> y(x.size());
    interp.reset();
    for (long long idx = 0; idx < n + lag; ++idx) {
        interp.push(idx < n ? x[idx] : cplx{});
        const long long out = idx - lag;
        if (out >= 0 && out < n) {
            y[out] = interp.output(frac);
        }
    }
    return {std::move(y), x.rate};
}

std::pair<IqBuffer, IqBuffer> half_sample_branch(const IqBuffer& x2) {
    std::size_t n2 = x2.size();
    if (n2 % 2 != 0) {
        std::clog << "half_sample_branch: dropping trailing sample of odd-length buffer\n";
        --n2;
    }
    const std::size_t n = n2 / 2;
    std::vector<cplx> a(n);
    std::vector<cplx> b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = x2[2 * i];
        b[i] = i == 0 ? cplx{} : x2[2 * i - 1];
    }
    return {IqBuffer(std::move(a), SampleRate::baseband_1x),
            IqBuffer(std::move(b), SampleRate::baseband_1x)};
}

ReceiveChain::ReceiveChain(const ModemConfig& cfg, double srrc_gain)
    : oversample_(cfg.oversample),
      decim_(cfg.oversample / 2),
      srrc_(design_srrc(cfg.srrc_rolloff, cfg.srrc_order, 2)),
      h_down_(design_rate_change_filter(cfg.oversample / 2, 1.0)) {
    for (auto& v : srrc_.taps) {
        v *= srrc_gain;
    }
}

IqBuffer ReceiveChain::process(const IqBuffer& rx) const {
    if (decim_ == 1) {
        return resample(rx, srrc_, 1, 1, SampleRate::half_shift_2x);
    }
    const IqBuffer x2 = resample(rx, h_down_, 1, decim_, SampleRate::half_shift_2x);
    return resample(x2, srrc_, 1, 1, SampleRate::half_shift_2x);
}

TransmitChain::TransmitChain(const ModemConfig& cfg)
    : interp_(cfg.oversample / 2),
      srrc_(design_srrc(cfg.srrc_rolloff, cfg.srrc_order, 2)),
      h_up_(design_rate_change_filter(cfg.oversample / 2, static_cast<double>(cfg.oversample / 2))) {}

IqBuffer TransmitChain::process(const IqBuffer& x1) const {
    IqBuffer x2 = resample(x1, srrc_, 2, 1, SampleRate::half_shift_2x);
    if (interp_ == 1) {
        x2.rate = SampleRate::oversampled_Lx;
        return x2;
    }
    return resample(x2, h_up_, interp_, 1, SampleRate::oversampled_Lx);
}

}  // namespace lorasync
