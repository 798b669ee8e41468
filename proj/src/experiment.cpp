#include "lorasync/experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace lorasync {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Bursts evaluated between stopping-rule checks. Fixed so that the set of
// simulated trials does not depend on the thread count.
constexpr long kBatch = 32;

struct TrialOutcome {
    long bits = 0;
    long bit_errors = 0;
    bool sync_failure = false;
    // Per data symbol: squared timing, frequency and phase errors.
    std::vector<std::array<double, 3>> sq;
};

const std::map<std::string, ExperimentKind>& kind_names() {
    static const std::map<std::string, ExperimentKind> names = {
        {"timing_mse", ExperimentKind::timing_mse},
        {"freq_mse", ExperimentKind::freq_mse},
        {"phase_mse", ExperimentKind::phase_mse},
        {"ber_noncoherent", ExperimentKind::ber_noncoherent},
        {"ber_coherent", ExperimentKind::ber_coherent},
        {"ber_pskcss", ExperimentKind::ber_pskcss},
        {"ber_naive", ExperimentKind::ber_naive},
        {"ber_ideal", ExperimentKind::ber_ideal},
    };
    return names;
}

TrialOutcome run_trial(const ExperimentSpec& spec, const ModemConfig& cfg, const Receiver& rx,
                       double ebn0_db, double snr_db, long trial) {
    const TrialDraw draw = draw_trial(cfg, spec.master_seed, ebn0_db, trial, snr_db);
    const IqBuffer y = apply_channel(transmit(draw.burst, cfg), draw.channel, cfg, rx.chain());

    BurstReport rep;
    switch (spec.kind) {
        case ExperimentKind::ber_noncoherent:
            rep = rx.noncoherent(y);
            break;
        case ExperimentKind::ber_naive:
            rep = rx.naive(y);
            break;
        case ExperimentKind::ber_ideal:
            rep = rx.ideal(y, draw.channel, spec.ideal_mode);
            break;
        default:
            rep = rx.coherent(y);
            break;
    }
    score_report(rep, draw.burst, cfg);

    TrialOutcome out;
    out.bits = rep.bits_sent;
    out.bit_errors = rep.bit_errors.value_or(0);
    out.sync_failure = rep.sync_failure;
    if (!is_ber(spec.kind)) {
        const ChannelParams& ch = draw.channel;
        out.sq.resize(rep.trace.size());
        for (std::size_t s = 0; s < rep.trace.size(); ++s) {
            // Timing and frequency against the channel truth; phase as the
            // phase-detector output.
            const SyncTraceEntry& e = rep.trace[s];
            const double dt = e.tau_hat - ch.tau_ui;
            const double df = e.f_hat - ch.epsilon_ui;
            const double dp = e.e_phi;
            out.sq[s] = {dt * dt, df * df, dp * dp};
        }
    }
    return out;
}

SimResult run(const ExperimentSpec& spec, bool parallel) {
    spec.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const ModemConfig cfg = spec.effective_config();
    const Receiver rx(cfg);
    const double bps = bits_per_symbol(cfg);
    const bool ber_run = is_ber(spec.kind);
    const long budget = ber_run ? spec.error_budget : 0;

    SimResult res;
    res.kind = spec.kind;
    res.cfg = cfg;
    res.master_seed = spec.master_seed;
    res.trials = spec.trials;

    for (const double ebn0 : spec.ebn0_grid_db) {
        const double snr = spec.noiseless ? std::numeric_limits<double>::infinity()
                                          : ebn0_to_snr(cfg, ebn0, bps);
        BerPoint bp;
        bp.ebn0_db = ebn0;
        bp.snr_db = snr;
        const std::size_t n_sym = static_cast<std::size_t>(cfg.data_symbols_per_burst);
        std::vector<std::array<double, 3>> sum_sq(ber_run ? 0 : n_sym, {0.0, 0.0, 0.0});

        bool stop = false;
        for (long base = 0; base < spec.trials && !stop; base += kBatch) {
            const long count = std::min(kBatch, spec.trials - base);
            std::vector<TrialOutcome> batch(static_cast<std::size_t>(count));
            const auto one = [&](long i) {
                batch[static_cast<std::size_t>(i)] = run_trial(spec, cfg, rx, ebn0, snr, base + i);
            };
            if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
                for (long i = 0; i < count; ++i) {
                    one(i);
                }
            } else {
                for (long i = 0; i < count; ++i) {
                    one(i);
                }
            }
            // Merge in trial order so sums and the stopping point are reproducible.
            for (const TrialOutcome& t : batch) {
                ++bp.bursts;
                bp.bits += t.bits;
                bp.bit_errors += t.bit_errors;
                bp.sync_failures += t.sync_failure ? 1 : 0;
                for (std::size_t s = 0; s < sum_sq.size(); ++s) {
                    for (int c = 0; c < 3; ++c) {
                        sum_sq[s][c] += t.sq[s][c];
                    }
                }
                if (budget > 0 && bp.bit_errors >= budget) {
                    stop = true;
                    break;
                }
            }
        }
        bp.ber = bp.bits > 0 ? static_cast<double>(bp.bit_errors) / bp.bits : 0.0;

        if (ber_run) {
            res.ber.push_back(bp);
            continue;
        }
        const std::array<ExperimentKind, 3> kinds = {
            ExperimentKind::timing_mse, ExperimentKind::freq_mse, ExperimentKind::phase_mse};
        for (int c = 0; c < 3; ++c) {
            auto& series = res.tracking[kinds[c]];
            for (std::size_t s = 0; s < n_sym; ++s) {
                MsePoint p;
                p.ebn0_db = ebn0;
                p.symbol_index = static_cast<int>(s) + 1;
                p.mse_ui2 = sum_sq[s][c] / static_cast<double>(bp.bursts);
                p.mse_db = 10.0 * std::log10(p.mse_ui2);
                series.push_back(p);
            }
        }
    }
    if (!ber_run) {
        res.mse = res.tracking[spec.kind];
    }
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    for (const auto& [name, k] : kind_names()) {
        if (k == kind) {
            return name;
        }
    }
    return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
    const auto it = kind_names().find(name);
    if (it == kind_names().end()) {
        throw std::invalid_argument("unknown experiment kind '" + name + "'");
    }
    return it->second;
}

bool is_ber(ExperimentKind kind) {
    return kind != ExperimentKind::timing_mse && kind != ExperimentKind::freq_mse &&
           kind != ExperimentKind::phase_mse;
}

void ExperimentSpec::validate() const {
    if (trials < 1) {
        throw std::invalid_argument("trials must be at least 1");
    }
    if (ebn0_grid_db.empty()) {
        throw std::invalid_argument("Eb/N0 grid is empty");
    }
    for (const double v : ebn0_grid_db) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("Eb/N0 grid contains a non-finite value");
        }
    }
    if (error_budget < 0) {
        throw std::invalid_argument("error budget must be non-negative");
    }
    effective_config().validate();
}

ModemConfig ExperimentSpec::effective_config() const {
    ModemConfig c = cfg;
    switch (kind) {
        case ExperimentKind::ber_pskcss:
            if (c.psk_order < 2) {
                c.psk_order = 4;
            }
            break;
        case ExperimentKind::ber_ideal:
            break;
        default:
            c.psk_order = 1;
            break;
    }
    return c;
}

TrialDraw draw_trial(const ModemConfig& cfg, std::uint64_t master_seed, double ebn0_db,
                     long trial, double snr_db) {
    const auto point = static_cast<std::uint32_t>(std::llround(1000.0 * ebn0_db));
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32), point,
                      static_cast<std::uint32_t>(trial),
                      static_cast<std::uint32_t>(static_cast<std::uint64_t>(trial) >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> offset(-0.5, 0.5);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    TrialDraw d;
    d.channel.tau_ui = offset(rng);
    d.channel.epsilon_ui = offset(rng);
    d.channel.psi_rad = phase(rng);
    d.channel.snr_db = snr_db;
    d.channel.seed = rng();
    d.burst = make_random_burst(cfg, rng);
    return d;
}

SimResult run_experiment(const ExperimentSpec& spec) { return run(spec, true); }

SimResult run_experiment_serial(const ExperimentSpec& spec) { return run(spec, false); }

std::optional<double> ber_crossing(const std::vector<BerPoint>& points, double target) {
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        const BerPoint& a = points[i];
        const BerPoint& b = points[i + 1];
        if (a.ber <= 0.0 || b.ber <= 0.0) {
            continue;
        }
        const double la = std::log10(a.ber);
        const double lb = std::log10(b.ber);
        const double lt = std::log10(target);
        if ((la - lt) * (lb - lt) <= 0.0 && la != lb) {
            return a.ebn0_db + (lt - la) / (lb - la) * (b.ebn0_db - a.ebn0_db);
        }
    }
    return std::nullopt;
}

double mse_slope_db_per_decade(const std::vector<MsePoint>& points, int s_lo, int s_hi) {
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double sxy = 0.0;
    long n = 0;
    for (const MsePoint& p : points) {
        if (p.symbol_index < s_lo || p.symbol_index > s_hi || !std::isfinite(p.mse_db)) {
            continue;
        }
        const double x = std::log10(static_cast<double>(p.symbol_index));
        sx += x;
        sy += p.mse_db;
        sxx += x * x;
        sxy += x * p.mse_db;
        ++n;
    }
    const double den = n * sxx - sx * sx;
    if (n < 2 || den == 0.0) {
        throw std::invalid_argument("mse_slope_db_per_decade: fewer than two points in range");
    }
    return (n * sxy - sx * sy) / den;
}

double ber_ci_halfwidth(long bits, long errors) {
    if (bits <= 0) {
        return 0.0;
    }
    const double p = static_cast<double>(errors) / static_cast<double>(bits);
    return 1.959963984540054 * std::sqrt(p * (1.0 - p) / static_cast<double>(bits));
}

}  // namespace lorasync
