#include "lorasync/chirp.hpp"

#include <fftw3.h>

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lorasync {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::shared_ptr<void> cached_plan(int size) {
    // FFTW planning is not thread-safe; execution with the new-array API is.
    static std::mutex mutex;
    static std::map<int, std::shared_ptr<void>> plans;
    std::lock_guard lock(mutex);
    auto it = plans.find(size);
    if (it != plans.end()) {
        return it->second;
    }
    std::vector<cplx> in(static_cast<std::size_t>(size));
    std::vector<cplx> out(static_cast<std::size_t>(size));
    fftw_plan plan = fftw_plan_dft_1d(size, reinterpret_cast<fftw_complex*>(in.data()),
                                      reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) {
        throw std::runtime_error("fftw planning failed for size " + std::to_string(size));
    }
    std::shared_ptr<void> handle(plan, [](void* p) { fftw_destroy_plan(static_cast<fftw_plan>(p)); });
    plans.emplace(size, handle);
    return handle;
}

void require_length(const ModemConfig& cfg, std::size_t n, const char* what) {
    if (n != static_cast<std::size_t>(cfg.m_count)) {
        throw std::invalid_argument(std::string(what) + ": expected " +
                                    std::to_string(cfg.m_count) + " samples, got " +
                                    std::to_string(n));
    }
}

}  // namespace

Dft::Dft(int size) : size_(size), plan_(cached_plan(size)) {}

void Dft::execute(std::span<const cplx> in, std::span<cplx> out) const {
    if (in.size() != static_cast<std::size_t>(size_) || out.size() != in.size()) {
        throw std::invalid_argument("Dft::execute size mismatch");
    }
    // FFTW takes a non-const input pointer but does not write to it out of place.
    fftw_execute_dft(static_cast<fftw_plan>(plan_.get()),
                     reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

double chirp_phase(long long k, int m_count) {
    const long long two_m = 2LL * m_count;
    long long kk = k % two_m;
    if (kk < 0) {
        kk += two_m;
    }
    // k^2/(2M) - k/2 in cycles; both terms reduced exactly before scaling.
    const long long sq = (kk * kk) % two_m;
    double cycles = static_cast<double>(sq) / static_cast<double>(two_m) -
                    0.5 * static_cast<double>(kk & 1LL);
    if (cycles < 0.0) {
        cycles += 1.0;
    }
    return kTwoPi * cycles;
}

IqBuffer gen_basic_chirp(const ModemConfig& cfg, ChirpDirection direction) {
    const int m = cfg.m_count;
    std::vector<cplx> x(static_cast<std::size_t>(m));
    for (int n = 0; n < m; ++n) {
        const double ph = chirp_phase(n, m);
        x[n] = std::polar(1.0, direction == ChirpDirection::up ? ph : -ph);
    }
    return {std::move(x), SampleRate::baseband_1x};
}

IqBuffer gen_symbol_chirp(const ModemConfig& cfg, const CssSymbol& sym) {
    check_symbol(cfg, sym);
    const int m = cfg.m_count;
    const double psk = kTwoPi * static_cast<double>(sym.p) / static_cast<double>(cfg.psk_order);
    std::vector<cplx> x(static_cast<std::size_t>(m));
    for (int n = 0; n < m; ++n) {
        x[n] = std::polar(1.0, chirp_phase((n + sym.m) % m, m) + psk);
    }
    return {std::move(x), SampleRate::baseband_1x};
}

IqBuffer dechirp(const ModemConfig& cfg, const IqBuffer& y, ChirpDirection direction) {
    require_length(cfg, y.size(), "dechirp");
    const Demodulator demod(cfg);
    std::vector<cplx> u(y.size());
    demod.dechirp_into(y.view(), direction, u);
    return {std::move(u), SampleRate::baseband_1x};
}

BinSpectrum dft_detect(const IqBuffer& u) {
    const int m = static_cast<int>(u.size());
    if (m == 0 || (m & (m - 1)) != 0) {
        throw std::invalid_argument("dft_detect: length must be a power of two");
    }
    BinSpectrum spec;
    spec.bins.resize(u.size());
    Dft(m).execute(u.view(), spec.bins);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (auto& b : spec.bins) {
        b *= scale;
    }
    spec.peak_index = argmax_magnitude(spec.bins);
    return spec;
}

int argmax_magnitude(std::span<const cplx> bins) {
    int best = 0;
    double best_mag = -1.0;
    for (std::size_t k = 0; k < bins.size(); ++k) {
        const double mag = std::norm(bins[k]);
        if (mag > best_mag) {
            best_mag = mag;
            best = static_cast<int>(k);
        }
    }
    return best;
}

int detect_noncoherent(const BinSpectrum& spec) { return argmax_magnitude(spec.bins); }

CssSymbol detect_coherent(const BinSpectrum& spec, double psi_hat, const ModemConfig& cfg,
                          int psk_order) {
    const int q = psk_order > 0 ? psk_order : cfg.psk_order;
    const int m = static_cast<int>(spec.bins.size());
    int best = 0;
    double best_metric = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < m; ++k) {
        const cplx z = spec.bins[k] * std::polar(1.0, -(psi_hat + chirp_phase(k, m)));
        double metric = z.real();
        if (q > 1) {
            const double a = std::arg(z) / kTwoPi;
            const double p = std::round(a * q);
            metric = std::abs(z) * std::cos(kTwoPi * (a - p / q));
        }
        if (metric > best_metric) {
            best_metric = metric;
            best = k;
        }
    }
    const cplx z = spec.bins[best] * std::polar(1.0, -(psi_hat + chirp_phase(best, m)));
    int p = static_cast<int>(std::round(q * std::arg(z) / kTwoPi)) % q;
    if (p < 0) {
        p += q;
    }
    return {best, p};
}

double psnr(const ModemConfig& cfg, double n0) {
    if (!(n0 > 0.0)) {
        throw std::invalid_argument("psnr: noise power must be positive");
    }
    return 10.0 * std::log10(static_cast<double>(cfg.m_count) / n0);
}

Demodulator::Demodulator(const ModemConfig& cfg)
    : m_(cfg.m_count),
      scale_(1.0 / std::sqrt(static_cast<double>(cfg.m_count))),
      up_(gen_basic_chirp(cfg, ChirpDirection::up).samples),
      twiddle_(static_cast<std::size_t>(cfg.m_count)),
      dft_(cfg.m_count) {
    for (int n = 0; n < m_; ++n) {
        twiddle_[n] = std::polar(1.0, -kTwoPi * static_cast<double>(n) / m_);
    }
}

void Demodulator::dechirp_into(std::span<const cplx> y, ChirpDirection direction,
                               std::span<cplx> u) const {
    if (y.size() != static_cast<std::size_t>(m_) || u.size() != y.size()) {
        throw std::invalid_argument("dechirp: block length must equal M");
    }
    if (direction == ChirpDirection::up) {
        for (int n = 0; n < m_; ++n) {
            u[n] = y[n] * std::conj(up_[n]);
        }
    } else {
        for (int n = 0; n < m_; ++n) {
            u[n] = y[n] * up_[n];
        }
    }
}

void Demodulator::spectrum(std::span<const cplx> y, ChirpDirection direction,
                           std::vector<cplx>& u, BinSpectrum& out) const {
    u.resize(static_cast<std::size_t>(m_));
    dechirp_into(y, direction, u);
    out.bins.resize(static_cast<std::size_t>(m_));
    dft_.execute(u, out.bins);
    for (auto& b : out.bins) {
        b *= scale_;
    }
    out.peak_index = argmax_magnitude(out.bins);
    out.half_bins.reset();
    out.half_branch_bins.clear();
}

cplx Demodulator::single_bin(std::span<const cplx> u, int k) const {
    k %= m_;
    if (k < 0) {
        k += m_;
    }
    cplx acc{0.0, 0.0};
    int idx = 0;
    for (int n = 0; n < m_; ++n) {
        acc += u[n] * twiddle_[idx];
        idx += k;
        if (idx >= m_) {
            idx -= m_;
        }
    }
    return acc * scale_;
}

}  // namespace lorasync
