#pragma once

// Monte Carlo experiment engine for the MSE-convergence and BER curves.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "lorasync/channel.hpp"
#include "lorasync/config.hpp"
#include "lorasync/txrx.hpp"

namespace lorasync {

enum class ExperimentKind {
    timing_mse,
    freq_mse,
    phase_mse,
    ber_noncoherent,
    ber_coherent,
    ber_pskcss,
    ber_naive,
    ber_ideal,
};

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);
bool is_ber(ExperimentKind kind);

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::ber_noncoherent;
    ModemConfig cfg;
    std::vector<double> ebn0_grid_db{6.0};
    long trials = 100;                 ///< burst cap per grid point
    std::uint64_t master_seed = 1;
    std::string output_path;
    DetectionMode ideal_mode = DetectionMode::coherent;  ///< for ber_ideal
    long error_budget = 200;           ///< BER runs stop once this many bit errors are seen
    bool noiseless = false;

    void validate() const;
    /// Modem configuration actually simulated: conventional CSS (Q = 1) for
    /// the non-PSK kinds, Q = 4 for ber_pskcss unless cfg already sets Q > 1.
    ModemConfig effective_config() const;
};

struct BerPoint {
    double ebn0_db = 0.0;
    double snr_db = 0.0;
    long bursts = 0;
    long bits = 0;
    long bit_errors = 0;
    double ber = 0.0;
    long sync_failures = 0;
};

struct MsePoint {
    double ebn0_db = 0.0;
    int symbol_index = 0;  ///< 1-based count of loop updates
    double mse_ui2 = 0.0;
    double mse_db = 0.0;
};

struct SimResult {
    ExperimentKind kind = ExperimentKind::ber_noncoherent;
    ModemConfig cfg;
    std::uint64_t master_seed = 0;
    long trials = 0;
    double wall_seconds = 0.0;
    std::vector<BerPoint> ber;
    std::vector<MsePoint> mse;
    /// MSE runs measure all three loop errors in one pass; every series is
    /// kept here, keyed by its MSE kind.
    std::map<ExperimentKind, std::vector<MsePoint>> tracking;
};

/// Offsets, data and noise stream of one burst.
struct TrialDraw {
    ChannelParams channel;
    Burst burst;
};

/// Deterministic draw for (master seed, Eb/N0 point, trial): tau and epsilon
/// uniform in [-0.5, 0.5), psi uniform in [0, 2 pi), then the noise seed and
/// the data. Identical across receiver kinds for the same arguments.
TrialDraw draw_trial(const ModemConfig& cfg, std::uint64_t master_seed, double ebn0_db,
                     long trial, double snr_db);

/// Parallel over bursts (OpenMP); results do not depend on the thread count.
SimResult run_experiment(const ExperimentSpec& spec);
/// Single-threaded reference producing identical results.
SimResult run_experiment_serial(const ExperimentSpec& spec);

/// Eb/N0 where the BER curve crosses `target`, log-linear interpolation
/// between the first bracketing pair of points.
std::optional<double> ber_crossing(const std::vector<BerPoint>& points, double target);

/// Least-squares slope of mse_db against log10(symbol_index) over [s_lo, s_hi].
double mse_slope_db_per_decade(const std::vector<MsePoint>& points, int s_lo, int s_hi);

/// Normal-approximation 95% half-width of a binomial proportion.
double ber_ci_halfwidth(long bits, long errors);

}  // namespace lorasync
