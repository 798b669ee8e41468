// lorasync command-line front end: sim, tx, rx, filters.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "lorasync/channel.hpp"
#include "lorasync/experiment.hpp"
#include "lorasync/filters.hpp"
#include "lorasync/io.hpp"
#include "lorasync/txrx.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace lorasync;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ModemConfig config_from_meta(const IqMeta& meta) {
    ModemConfig cfg = ModemConfig::for_sf(meta.sf);
    cfg.bandwidth_hz = meta.bandwidth_hz;
    cfg.oversample = meta.oversample;
    if (const auto it = meta.extra.find("psk_order"); it != meta.extra.end()) {
        cfg.psk_order = std::stoi(it->second);
    }
    if (const auto it = meta.extra.find("data_symbols"); it != meta.extra.end()) {
        cfg.data_symbols_per_burst = std::stoi(it->second);
    }
    if (const auto it = meta.extra.find("noncoherent_head"); it != meta.extra.end()) {
        cfg.noncoherent_head = std::stoi(it->second);
    }
    return cfg;
}

void write_taps(std::ostream& out, const FirFilter& f) {
    out << "index,tap\n";
    for (std::size_t i = 0; i < f.size(); ++i) {
        out << i << ',' << fmt(f.taps[i]) << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chirp spread spectrum modem simulator with timing, frequency and phase sync"};
    app.require_subcommand(1);

    // sim
    auto* sim = app.add_subcommand("sim", "Run a Monte Carlo experiment and emit CSV or JSON");
    std::string sim_config;
    std::string experiment;
    int sim_sf = 0;
    int sim_q = 0;
    std::vector<double> ebn0;
    long trials = 0;
    std::uint64_t seed = 0;
    std::string out_path;
    std::string format = "csv";
    long budget = 0;
    std::string ideal_mode;
    bool noiseless = false;
    int threads = 0;
    sim->add_option("-c,--config", sim_config,
                    "key=value file; keys: sf bandwidth_hz oversample psk_order n_cp n_down n_up "
                    "data_symbols srrc_rolloff srrc_order noncoherent_head q_phase q_freq "
                    "experiment ebn0 trials seed out error_budget ideal_mode noiseless")
        ->check(CLI::ExistingFile);
    auto* o_exp = sim->add_option("-e,--experiment", experiment,
                                  "timing_mse | freq_mse | phase_mse | ber_noncoherent | "
                                  "ber_coherent | ber_pskcss | ber_naive | ber_ideal");
    auto* o_sf = sim->add_option("--sf", sim_sf, "Spreading factor (default 8)");
    auto* o_q = sim->add_option("--psk-order", sim_q, "PSK points Q (ber_pskcss default 4)");
    auto* o_ebn0 = sim->add_option("--ebn0", ebn0, "Eb/N0 grid in dB, e.g. --ebn0 5 5.5 6")
                       ->delimiter(',');
    auto* o_trials = sim->add_option("--trials", trials, "Burst cap per grid point (default 100)");
    auto* o_seed = sim->add_option("--seed", seed, "Master seed (default 1)");
    auto* o_out = sim->add_option("-o,--out", out_path, "Output file; stdout when omitted or -");
    sim->add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    auto* o_budget = sim->add_option("--error-budget", budget,
                                     "Stop a BER point after this many bit errors (default 200, 0 = off)");
    auto* o_mode = sim->add_option("--ideal-mode", ideal_mode, "coherent | noncoherent (ber_ideal)")
                       ->check(CLI::IsMember({"coherent", "noncoherent"}));
    auto* o_noiseless = sim->add_flag("--noiseless", noiseless, "Disable AWGN");
    sim->add_option("--threads", threads, "OpenMP threads (0 = runtime default)");

    // tx
    auto* tx = app.add_subcommand("tx", "Write a random burst as an IQ file with a .meta sidecar");
    std::string tx_out;
    int tx_sf = 8;
    int tx_q = 1;
    std::uint64_t data_seed = 1;
    double tau = 0.0;
    double eps = 0.0;
    double psi = 0.0;
    double snr_db = 0.0;
    std::uint64_t noise_seed = 1;
    tx->add_option("-o,--out", tx_out, "IQ output path")->required();
    tx->add_option("--sf", tx_sf, "Spreading factor")->check(CLI::Range(6, 12));
    tx->add_option("--psk-order", tx_q, "PSK points Q");
    tx->add_option("--seed", data_seed, "Data seed (stored in the sidecar)");
    tx->add_option("--tau", tau, "Channel delay in UI");
    tx->add_option("--eps", eps, "Normalized CFO in UI");
    tx->add_option("--psi", psi, "Carrier phase in radians");
    auto* o_snr = tx->add_option("--snr-db", snr_db, "Add AWGN at this per-sample SNR");
    tx->add_option("--noise-seed", noise_seed, "Noise stream seed");

    // rx
    auto* rx = app.add_subcommand("rx", "Decode an IQ file and print the burst report as JSON");
    std::string rx_in;
    std::string receiver = "coherent";
    bool summary = false;
    rx->add_option("-i,--in", rx_in, "IQ input path (reads <path>.meta)")->required();
    rx->add_option("-r,--receiver", receiver, "naive | noncoherent | coherent | ideal")
        ->check(CLI::IsMember({"naive", "noncoherent", "coherent", "ideal"}));
    rx->add_flag("--summary", summary, "Omit the per-symbol decoded list and sync trace");

    // filters
    auto* filt = app.add_subcommand("filters", "Dump designed filter taps as CSV");
    std::string which = "srrc";
    std::string filt_out;
    double rolloff = 0.25;
    int oversample = 4;
    filt->add_option("-k,--kind", which, "srrc | rc | farrow | rate_change")
        ->check(CLI::IsMember({"srrc", "rc", "farrow", "rate_change"}));
    filt->add_option("--rolloff", rolloff, "SRRC / RC roll-off");
    filt->add_option("--oversample", oversample, "L for the rate-change filter");
    filt->add_option("-o,--out", filt_out, "Output file; stdout when omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (sim->parsed()) {
            ExperimentSpec spec;
            if (!sim_config.empty()) {
                apply_config(read_key_values(sim_config), spec);
            }
            KeyValues kv;
            if (o_sf->count() > 0) kv["sf"] = std::to_string(sim_sf);
            if (o_q->count() > 0) kv["psk_order"] = std::to_string(sim_q);
            if (o_exp->count() > 0) kv["experiment"] = experiment;
            if (o_trials->count() > 0) kv["trials"] = std::to_string(trials);
            if (o_seed->count() > 0) kv["seed"] = std::to_string(seed);
            if (o_out->count() > 0) kv["out"] = out_path;
            if (o_budget->count() > 0) kv["error_budget"] = std::to_string(budget);
            if (o_mode->count() > 0) kv["ideal_mode"] = ideal_mode;
            if (o_noiseless->count() > 0) kv["noiseless"] = noiseless ? "1" : "0";
            if (o_ebn0->count() > 0) {
                std::string list;
                for (const double v : ebn0) {
                    list += (list.empty() ? "" : ",") + fmt(v);
                }
                kv["ebn0"] = list;
            }
            apply_config(kv, spec);
#ifdef _OPENMP
            if (threads > 0) {
                omp_set_num_threads(threads);
            }
#endif
            const SimResult res = run_experiment(spec);
            emit_results(res, parse_result_format(format), spec.output_path);
            return 0;
        }

        if (tx->parsed()) {
            ModemConfig cfg = ModemConfig::for_sf(tx_sf);
            cfg.psk_order = tx_q;
            cfg.validate();
            std::mt19937_64 rng(data_seed);
            const Burst burst = make_random_burst(cfg, rng);
            ChannelParams ch;
            ch.tau_ui = tau;
            ch.epsilon_ui = eps;
            ch.psi_rad = psi;
            ch.seed = noise_seed;
            if (o_snr->count() > 0) {
                ch.snr_db = snr_db;
            }
            const IqBuffer y = apply_channel(transmit(burst, cfg), ch, cfg);
            IqMeta meta = IqMeta::for_config(cfg);
            meta.extra["data_seed"] = std::to_string(data_seed);
            meta.extra["psk_order"] = std::to_string(cfg.psk_order);
            meta.extra["data_symbols"] = std::to_string(cfg.data_symbols_per_burst);
            meta.extra["noncoherent_head"] = std::to_string(cfg.noncoherent_head);
            meta.extra["tau_ui"] = fmt(tau);
            meta.extra["epsilon_ui"] = fmt(eps);
            meta.extra["psi_rad"] = fmt(psi);
            write_iq(tx_out, y, meta);
            std::cerr << "wrote " << y.size() << " samples to " << tx_out << '\n';
            return 0;
        }

        if (rx->parsed()) {
            const IqRecording rec = read_iq(rx_in);
            const ModemConfig cfg = config_from_meta(rec.meta);
            cfg.validate();
            const Receiver r(cfg);
            BurstReport rep;
            if (receiver == "naive") {
                rep = r.naive(rec.buffer);
            } else if (receiver == "noncoherent") {
                rep = r.noncoherent(rec.buffer);
            } else if (receiver == "coherent") {
                rep = r.coherent(rec.buffer);
            } else {
                ChannelParams truth;
                const auto& ex = rec.meta.extra;
                if (!ex.contains("tau_ui") || !ex.contains("epsilon_ui") || !ex.contains("psi_rad")) {
                    throw std::runtime_error("ideal receiver needs tau_ui, epsilon_ui and psi_rad in '" +
                                             sidecar_path(rx_in) + "'");
                }
                truth.tau_ui = std::stod(ex.at("tau_ui"));
                truth.epsilon_ui = std::stod(ex.at("epsilon_ui"));
                truth.psi_rad = std::stod(ex.at("psi_rad"));
                rep = r.ideal(rec.buffer, truth, DetectionMode::coherent);
            }
            if (const auto it = rec.meta.extra.find("data_seed"); it != rec.meta.extra.end()) {
                std::mt19937_64 rng(std::stoull(it->second));
                score_report(rep, make_random_burst(cfg, rng), cfg);
            }
            nlohmann::json j = to_json(rep);
            if (summary) {
                j.erase("decoded");
                j.erase("sync_trace");
            }
            std::cout << j.dump(2) << '\n';
            return 0;
        }

        if (filt->parsed()) {
            std::ofstream file;
            if (!filt_out.empty()) {
                file.open(filt_out, std::ios::trunc);
                if (!file) {
                    throw std::runtime_error("cannot open '" + filt_out + "' for writing");
                }
            }
            std::ostream& out = filt_out.empty() ? std::cout : file;
            ModemConfig cfg;
            cfg.srrc_rolloff = rolloff;
            if (which == "srrc") {
                write_taps(out, design_srrc(rolloff, cfg.srrc_order, 2));
            } else if (which == "rc") {
                write_taps(out, design_rc(rolloff, cfg.srrc_order, 2));
            } else if (which == "rate_change") {
                if (oversample < 4 || oversample % 2 != 0) {
                    throw std::invalid_argument("--oversample must be an even value of at least 4");
                }
                write_taps(out, design_rate_change_filter(oversample / 2, 1.0));
            } else {
                const FarrowInterpolator f;
                out << "tap,c0,c1,c2,c3,c4,c5\n";
                for (int j = 0; j < FarrowInterpolator::kTaps; ++j) {
                    out << j;
                    for (int p = 0; p <= FarrowInterpolator::kOrder; ++p) {
                        out << ',' << fmt(f.coefficients()[j][p]);
                    }
                    out << '\n';
                }
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
