#include <benchmark/benchmark.h>

#include <random>

#include "lorasync/channel.hpp"
#include "lorasync/chirp.hpp"
#include "lorasync/experiment.hpp"
#include "lorasync/txrx.hpp"

using namespace lorasync;

namespace {

struct Fixture {
    ModemConfig cfg;
    Burst burst;
    ChannelParams ch;
    IqBuffer tx;
    IqBuffer rx;

    explicit Fixture(int sf) : cfg(ModemConfig::for_sf(sf)) {
        std::mt19937_64 rng(1);
        burst = make_random_burst(cfg, rng);
        ch.tau_ui = 0.3;
        ch.epsilon_ui = -0.2;
        ch.psi_rad = 1.0;
        ch.snr_db = -10.0;
        ch.seed = 7;
        tx = transmit(burst, cfg);
        rx = apply_channel(tx, ch, cfg);
    }
};

void BM_Transmit(benchmark::State& st) {
    const Fixture f(static_cast<int>(st.range(0)));
    for (auto _ : st) {
        benchmark::DoNotOptimize(transmit(f.burst, f.cfg));
    }
}

void BM_Channel(benchmark::State& st) {
    const Fixture f(static_cast<int>(st.range(0)));
    const ReceiveChain chain(f.cfg);
    for (auto _ : st) {
        benchmark::DoNotOptimize(apply_channel(f.tx, f.ch, f.cfg, chain));
    }
}

void BM_ReceiveNoncoherent(benchmark::State& st) {
    const Fixture f(static_cast<int>(st.range(0)));
    const Receiver rx(f.cfg);
    for (auto _ : st) {
        benchmark::DoNotOptimize(rx.noncoherent(f.rx));
    }
}

void BM_ReceiveCoherent(benchmark::State& st) {
    const Fixture f(static_cast<int>(st.range(0)));
    const Receiver rx(f.cfg);
    for (auto _ : st) {
        benchmark::DoNotOptimize(rx.coherent(f.rx));
    }
}

void BM_Spectrum(benchmark::State& st) {
    const ModemConfig cfg = ModemConfig::for_sf(static_cast<int>(st.range(0)));
    const Demodulator demod(cfg);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    std::vector<cplx> y(static_cast<std::size_t>(cfg.m_count));
    for (auto& v : y) {
        v = {g(rng), g(rng)};
    }
    std::vector<cplx> u(y.size());
    BinSpectrum out;
    for (auto _ : st) {
        demod.spectrum(y, ChirpDirection::up, u, out);
        benchmark::DoNotOptimize(out.peak_index);
    }
}

ExperimentSpec small_spec() {
    ExperimentSpec spec;
    spec.kind = ExperimentKind::ber_coherent;
    spec.cfg.data_symbols_per_burst = 64;
    spec.ebn0_grid_db = {2.0};
    spec.trials = 64;
    spec.error_budget = 1000000;
    return spec;
}

void BM_ExperimentSerial(benchmark::State& st) {
    const ExperimentSpec spec = small_spec();
    for (auto _ : st) {
        benchmark::DoNotOptimize(run_experiment_serial(spec));
    }
}

void BM_ExperimentParallel(benchmark::State& st) {
    const ExperimentSpec spec = small_spec();
    for (auto _ : st) {
        benchmark::DoNotOptimize(run_experiment(spec));
    }
}

}  // namespace

BENCHMARK(BM_Transmit)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Channel)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReceiveNoncoherent)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReceiveCoherent)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Spectrum)->Arg(8)->Arg(10)->Arg(12);
BENCHMARK(BM_ExperimentSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExperimentParallel)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
