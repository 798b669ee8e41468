#include "lorasync/sync.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lorasync {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

int wrap_bin(int k, int m) {
    k %= m;
    return k < 0 ? k + m : k;
}

}  // namespace

bool CoarseSync::plausible() const {
    return std::abs(tau_coarse) <= 1.0 && std::abs(epsilon_coarse) <= 1.0;
}

int signed_bin(int k, int m_count) {
    k = wrap_bin(k, m_count);
    return k >= m_count / 2 ? k - m_count : k;
}

IqBuffer build_preamble(const ModemConfig& cfg) {
    const int m = cfg.m_count;
    const IqBuffer down = gen_basic_chirp(cfg, ChirpDirection::down);
    const IqBuffer up = gen_basic_chirp(cfg, ChirpDirection::up);
    std::vector<cplx> p;
    p.reserve(static_cast<std::size_t>(cfg.preamble_length()));
    auto group = [&](const IqBuffer& chirp, int count) {
        for (int n = m - cfg.n_cp; n < m; ++n) {
            p.push_back(chirp[n]);
        }
        for (int b = 0; b < count; ++b) {
            p.insert(p.end(), chirp.samples.begin(), chirp.samples.end());
        }
    };
    group(down, cfg.n_down);
    group(up, cfg.n_up);
    return {std::move(p), SampleRate::baseband_1x};
}

IqBuffer accumulate_preamble(const IqBuffer& r, int n_rep, const ModemConfig& cfg) {
    const std::size_t m = static_cast<std::size_t>(cfg.m_count);
    if (n_rep < 1 || r.size() != m * static_cast<std::size_t>(n_rep)) {
        throw std::invalid_argument("accumulate_preamble: expected " + std::to_string(n_rep) +
                                    " blocks of " + std::to_string(m) + " samples, got " +
                                    std::to_string(r.size()));
    }
    std::vector<cplx> y(m);
    for (int b = 0; b < n_rep; ++b) {
        for (std::size_t n = 0; n < m; ++n) {
            y[n] += r[n + static_cast<std::size_t>(b) * m];
        }
    }
    for (auto& v : y) {
        v /= static_cast<double>(n_rep);
    }
    return {std::move(y), SampleRate::baseband_1x};
}

double parabolic_offset(double vm, double v0, double vp) {
    const double denom = 4.0 * (vm + vp - 2.0 * v0);
    if (denom == 0.0 || !std::isfinite(denom)) {
        return 0.0;
    }
    const double t = (vm - vp) / denom;
    if (!std::isfinite(t)) {
        return 0.0;
    }
    return std::clamp(t, -0.5, 0.5);
}

double peak_offset(const std::array<double, 5>& w) {
    if (w[1] > w[2] && w[1] >= w[3]) {
        return std::clamp(-0.5 + parabolic_offset(w[0], w[1], w[2]), -0.5, 0.5);
    }
    if (w[3] > w[2] && w[3] > w[1]) {
        return std::clamp(0.5 + parabolic_offset(w[2], w[3], w[4]), -0.5, 0.5);
    }
    return parabolic_offset(w[1], w[2], w[3]);
}

std::pair<cplx, cplx> half_bins_at(const Demodulator& demod, std::span<const cplx> u_half,
                                   ChirpDirection direction, int k) {
    if (direction == ChirpDirection::down) {
        return {demod.single_bin(u_half, k), demod.single_bin(u_half, k + 1)};
    }
    return {demod.single_bin(u_half, k - 1), demod.single_bin(u_half, k)};
}

DtdResult dtd(const Demodulator& demod, std::span<const cplx> y, std::span<const cplx> y_half,
              ChirpDirection direction, bool keep_half_branch) {
    const int m = demod.m_count();
    DtdResult out;
    std::vector<cplx> u;
    demod.spectrum(y, direction, u, out.spectrum);
    const int k = out.spectrum.peak_index;

    std::vector<cplx> u_half(static_cast<std::size_t>(m));
    demod.dechirp_into(y_half, direction, u_half);
    std::pair<cplx, cplx> hb;
    if (keep_half_branch) {
        BinSpectrum half;
        demod.spectrum(y_half, direction, u, half);
        out.spectrum.half_branch_bins = std::move(half.bins);
        const auto& hbins = out.spectrum.half_branch_bins;
        hb = direction == ChirpDirection::down
                 ? std::pair{hbins[wrap_bin(k, m)], hbins[wrap_bin(k + 1, m)]}
                 : std::pair{hbins[wrap_bin(k - 1, m)], hbins[wrap_bin(k, m)]};
    } else {
        hb = half_bins_at(demod, u_half, direction, k);
    }
    out.spectrum.half_bins = hb;

    const auto& bins = out.spectrum.bins;
    out.timing.tau_int = signed_bin(k, m);
    out.timing.tau_frac = peak_offset({std::abs(bins[wrap_bin(k - 1, m)]), std::abs(hb.first),
                                       std::abs(bins[k]), std::abs(hb.second),
                                       std::abs(bins[wrap_bin(k + 1, m)])});
    out.timing.tau = out.timing.tau_int + out.timing.tau_frac;
    return out;
}

DtdResult dtd(const IqBuffer& y, const IqBuffer& y_half, ChirpDirection direction,
              const ModemConfig& cfg) {
    const Demodulator demod(cfg);
    return dtd(demod, y.view(), y_half.view(), direction, false);
}

CoarseSync coarse_estimate(std::span<const BinSpectrum> down_specs,
                           std::span<const BinSpectrum> up_specs) {
    if (down_specs.empty() || up_specs.empty()) {
        throw std::invalid_argument("coarse_estimate needs at least one spectrum per direction");
    }
    auto estimate = [](std::span<const BinSpectrum> specs, ChirpDirection direction) {
        const std::size_t m = specs.front().bins.size();
        std::vector<double> power(m, 0.0);
        for (const auto& sp : specs) {
            if (sp.bins.size() != m || sp.half_branch_bins.size() != m) {
                throw std::invalid_argument(
                    "coarse_estimate: spectra must share M and carry the half branch");
            }
            for (std::size_t k = 0; k < m; ++k) {
                power[k] += std::norm(sp.bins[k]);
            }
        }
        int peak = 0;
        for (std::size_t k = 1; k < m; ++k) {
            if (power[k] > power[static_cast<std::size_t>(peak)]) {
                peak = static_cast<int>(k);
            }
        }
        const int mi = static_cast<int>(m);
        const int lo = direction == ChirpDirection::down ? peak : peak - 1;
        const int hi = direction == ChirpDirection::down ? peak + 1 : peak;
        double p_lo = 0.0;
        double p_hi = 0.0;
        for (const auto& sp : specs) {
            p_lo += std::norm(sp.half_branch_bins[wrap_bin(lo, mi)]);
            p_hi += std::norm(sp.half_branch_bins[wrap_bin(hi, mi)]);
        }
        const double frac = peak_offset({std::sqrt(power[wrap_bin(peak - 1, mi)]), std::sqrt(p_lo),
                                         std::sqrt(power[peak]), std::sqrt(p_hi),
                                         std::sqrt(power[wrap_bin(peak + 1, mi)])});
        return signed_bin(peak, mi) + frac;
    };
    CoarseSync c;
    c.tau_down = estimate(down_specs, ChirpDirection::down);
    c.tau_up = estimate(up_specs, ChirpDirection::up);
    c.tau_coarse = 0.5 * (c.tau_down - c.tau_up);
    c.epsilon_coarse = 0.5 * (c.tau_down + c.tau_up);
    return c;
}

TimingLoopState timing_loop_update(TimingLoopState state, double e_tau) {
    state.accumulator += e_tau / static_cast<double>(state.s);
    ++state.s;
    return state;
}

double smod(double a, double b) { return a - std::round(a / b) * b; }

double phase_error(cplx value, double psi_ref, int q) {
    if (value == cplx{}) {
        return 0.0;
    }
    const cplx z = value * std::polar(1.0, -psi_ref);
    return smod(std::arg(z) / kTwoPi, 1.0 / static_cast<double>(q));
}

double phase_detect(const BinSpectrum& spec, double psi_ref, int q) {
    return phase_error(spec.bins.at(static_cast<std::size_t>(spec.peak_index)), psi_ref, q);
}

double sigma_phi_sq(double psnr_db) {
    return 0.5 * std::pow(10.0, -psnr_db / 10.0) / (kTwoPi * kTwoPi);
}

PhaseLoopState phase_loop_seed(double phase, double frequency, double sigma_phi_sq,
                               int n_preamble, double q_phase, double q_freq) {
    if (n_preamble < 1) {
        throw std::invalid_argument("phase_loop_seed: n_preamble must be positive");
    }
    PhaseLoopState st;
    st.x_hat = {phase, frequency};
    st.p_mat = {{{sigma_phi_sq, 0.0}, {0.0, sigma_phi_sq / n_preamble}}};
    st.q_mat = {{{q_phase, 0.0}, {0.0, q_freq}}};
    st.sigma_phi_sq = sigma_phi_sq;
    st.s = 1;
    return st;
}

PhaseLoopState phase_loop_update(PhaseLoopState st, double e_phi) {
    const Mat2& p = st.p_mat;
    const double innovation_var = p[0][0] + st.sigma_phi_sq;
    double k0 = 0.0;
    double k1 = 0.0;
    if (innovation_var > 0.0) {
        k0 = p[0][0] / innovation_var;
        k1 = p[1][0] / innovation_var;
    }
    st.k_p = k0;
    st.k_i = k1;

    // Correct, then predict with F = [[1, 1], [0, 1]].
    const double phase = st.x_hat[0] + k0 * e_phi;
    const double freq = st.x_hat[1] + k1 * e_phi;
    st.x_hat = {phase + freq, freq};

    // A = (I - K H) P
    const Mat2 a = {{{(1.0 - k0) * p[0][0], (1.0 - k0) * p[0][1]},
                     {p[1][0] - k1 * p[0][0], p[1][1] - k1 * p[0][1]}}};
    // F A F^T + Q
    Mat2 n{};
    n[0][0] = a[0][0] + a[0][1] + a[1][0] + a[1][1] + st.q_mat[0][0];
    n[0][1] = a[0][1] + a[1][1] + st.q_mat[0][1];
    n[1][0] = a[1][0] + a[1][1] + st.q_mat[1][0];
    n[1][1] = a[1][1] + st.q_mat[1][1];
    const double off = 0.5 * (n[0][1] + n[1][0]);
    n[0][1] = off;
    n[1][0] = off;
    st.p_mat = n;
    ++st.s;
    return st;
}

}  // namespace lorasync
