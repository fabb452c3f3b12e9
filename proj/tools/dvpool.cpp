// dvpool: batch front-end for dual-view pyramid pooling, linear probes,
// synthetic datasets and the metric suite.

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dvpool/dvpool.hpp"
#include "dvpool/json_io.hpp"
#include "run_manifest.hpp"

namespace fs = std::filesystem;
using namespace dvpool;
using dvpool::cli::RunManifest;

namespace {

fs::path sibling_manifest(const fs::path& output) {
    return fs::path(output.string() + ".manifest.json");
}

NpyArray labels_npy(const std::vector<std::int64_t>& labels) {
    return NpyArray::of({labels.size()}, labels);
}

// ---------------------------------------------------------------- pool

struct PoolArgs {
    std::string input, config, output, manifest;
    int threads = 0;
};

int run_pool(const PoolArgs& a) {
    RunManifest run("pool");
    const DvppConfig cfg = dvpp_config_from_json(cli::read_json_file(a.config));
    const unsigned threads = cli::resolve_threads(a.threads);
    run.set_config(Json{{"dvpp", to_json(cfg)}, {"threads", threads}});
    run.add_input(a.input);
    run.add_input(a.config);

    const auto maps = to_feature_maps(load_npy(a.input));
    const std::size_t len = output_len(cfg, maps.front().shape());
    std::vector<double> out(maps.size() * len);
    parallel_for(maps.size(), threads, [&](std::size_t i) {
        const auto z = dvpp(maps[i], cfg);
        if (z.size() != len) throw ContractViolation("pooled length disagrees with output_len");
        std::copy(z.data.begin(), z.data.end(), out.begin() + static_cast<std::ptrdiff_t>(i * len));
    });
    run.write_npy_output(a.output, NpyArray::of({maps.size(), len}, std::move(out)));
    run.finish(a.manifest.empty() ? sibling_manifest(a.output) : fs::path(a.manifest));
    return 0;
}

// ------------------------------------------------------------- metrics

struct MetricsArgs {
    std::string probs, logits, labels, output = "metrics.json", reliability_csv, manifest;
    std::size_t bins = kDefaultEceBins;
    std::string kappa = "unweighted";
    bool fit_temperature = false;
};

std::string reliability_csv(const ReliabilityTable& t) {
    std::ostringstream out;
    out.precision(17);
    out << "lower,upper,count,confidence,accuracy\n";
    for (const auto& b : t.bins)
        out << b.lower << ',' << b.upper << ',' << b.count << ',' << b.mean_confidence << ','
            << b.accuracy << '\n';
    return out.str();
}

int run_metrics(const MetricsArgs& a) {
    RunManifest run("metrics");
    const auto weighting = kappa_weighting_from_string(a.kappa);
    run.set_config(Json{{"bins", a.bins}, {"kappa", a.kappa}, {"fit_temperature", a.fit_temperature}});

    Matrix logits;
    Matrix probs;
    if (!a.logits.empty()) {
        run.add_input(a.logits);
        logits = to_matrix(load_npy(a.logits));
        probs = softmax(logits);
    } else {
        run.add_input(a.probs);
        probs = to_matrix(load_npy(a.probs));
        // log p recovers logits up to a per-row shift, which softmax ignores.
        logits = Matrix(probs.rows(), probs.cols());
        for (std::size_t i = 0; i < probs.data().size(); ++i)
            logits.data()[i] = std::log(std::max(probs.data()[i], 1e-300));
    }
    run.add_input(a.labels);
    auto labels = read_labels(a.labels);
    const PredictionSet set(probs, labels);

    Json report = metrics_report(set, a.bins, weighting);
    if (a.fit_temperature) {
        const auto fit = temperature_fit(logits, labels);
        const PredictionSet scaled(softmax(scale_logits(logits, fit.temperature)), labels);
        const double scaled_ece = ece(scaled, a.bins).ece;
        const double scaled_brier = brier(scaled);
        report["temperature"] = Json{{"T", fit.temperature},
                                     {"nll", fit.nll},
                                     {"degenerate", fit.degenerate},
                                     {"at_boundary", fit.at_boundary},
                                     {"ece", percent(scaled_ece)},
                                     {"brier", percent(scaled_brier)},
                                     {"raw", {{"ece", scaled_ece}, {"brier", scaled_brier}}}};
    }
    run.write_json_output(a.output, report);
    if (!a.reliability_csv.empty()) {
        const std::string csv = reliability_csv(ece(set, a.bins));
        run.write_output(a.reliability_csv,
                         std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
    }
    std::cout << report.dump(2) << '\n';
    run.finish(a.manifest.empty() ? sibling_manifest(a.output) : fs::path(a.manifest));
    return 0;
}

// --------------------------------------------------------------- synth

struct SynthArgs {
    std::string spec, out, manifest;
    int threads = 0;
};

int run_synth(const SynthArgs& a) {
    RunManifest run("synth");
    SynthSpec spec;
    if (!a.spec.empty()) {
        spec = synth_spec_from_json(cli::read_json_file(a.spec));
        run.add_input(a.spec);
    }
    const unsigned threads = cli::resolve_threads(a.threads);
    run.set_config(Json{{"synth", to_json(spec)}, {"threads", threads}});

    const fs::path dir(a.out);
    fs::create_directories(dir);
    const auto ds = generate(spec, threads);
    const auto split = stratified_split(ds.labels, spec.seed);

    run.write_npy_output(dir / "maps.npy", from_feature_maps(ds.maps));
    run.write_npy_output(dir / "labels.npy", labels_npy(ds.labels));
    for (const auto& [name, idx] : {std::pair{"train", &split.train}, std::pair{"test", &split.test}}) {
        std::vector<FeatureMap> maps;
        std::vector<std::int64_t> labels;
        for (auto i : *idx) {
            maps.push_back(ds.maps[i]);
            labels.push_back(ds.labels[i]);
        }
        run.write_npy_output(dir / (std::string(name) + "_maps.npy"), from_feature_maps(maps));
        run.write_npy_output(dir / (std::string(name) + "_labels.npy"), labels_npy(labels));
    }
    Json manifest = to_json(ds.manifest);
    manifest["samples"] = ds.labels.size();
    manifest["train_indices"] = split.train;
    manifest["test_indices"] = split.test;
    run.write_json_output(dir / "manifest.json", manifest);
    run.finish(a.manifest.empty() ? dir / "run_manifest.json" : fs::path(a.manifest));
    return 0;
}

// --------------------------------------------------------------- probe

struct ProbeArgs {
    std::string features, labels, spec, out, eval_features, manifest;
};

LinearProbe load_probe(const fs::path& dir) {
    const Json side = cli::read_json_file(dir / "probe.json");
    LinearProbe p;
    p.weights = to_matrix(load_npy(dir / "W.npy"));
    const auto b = load_npy(dir / "b.npy");
    p.bias = b.as_doubles();
    p.standardizer.mean = side.at("mean").get<std::vector<double>>();
    p.standardizer.scale = side.at("scale").get<std::vector<double>>();
    if (p.bias.size() != p.classes() || side.at("D").get<std::size_t>() != p.dims() ||
        side.at("K").get<std::size_t>() != p.classes())
        throw IoError(dir.string() + ": probe files disagree on D or K");
    return p;
}

int run_probe(const ProbeArgs& a) {
    RunManifest run("probe");
    TrainSpec spec;
    if (!a.spec.empty()) {
        spec = train_spec_from_json(cli::read_json_file(a.spec));
        run.add_input(a.spec);
    }
    run.set_config(Json{{"train", to_json(spec)}});
    run.add_input(a.features);
    run.add_input(a.labels);
    const Matrix features = to_matrix(load_npy(a.features));
    const auto labels = read_labels(a.labels);

    const auto result = train(features, labels, spec);
    const fs::path dir(a.out);
    fs::create_directories(dir);
    run.write_npy_output(dir / "W.npy", from_matrix(result.probe.weights));
    run.write_npy_output(dir / "b.npy", NpyArray::of({result.probe.bias.size()}, result.probe.bias));
    Json side = probe_sidecar(result.probe, spec);
    side["loss_history"] = result.loss_history;
    side["train_accuracy"] = accuracy(PredictionSet(predict_proba(result.probe, features), labels));
    run.write_json_output(dir / "probe.json", side);

    if (!a.eval_features.empty()) {
        run.add_input(a.eval_features);
        const Matrix eval = to_matrix(load_npy(a.eval_features));
        const Matrix logits = predict_logits(result.probe, eval);
        run.write_npy_output(dir / "eval_logits.npy", from_matrix(logits));
        run.write_npy_output(dir / "eval_probs.npy", from_matrix(softmax(logits)));
    }
    run.finish(a.manifest.empty() ? dir / "run_manifest.json" : fs::path(a.manifest));
    return 0;
}

struct PredictArgs {
    std::string probe, features, output, logits_output, manifest;
};

int run_predict(const PredictArgs& a) {
    RunManifest run("predict");
    const fs::path dir(a.probe);
    for (const char* f : {"W.npy", "b.npy", "probe.json"}) run.add_input(dir / f);
    run.add_input(a.features);
    const LinearProbe probe = load_probe(dir);
    const Matrix features = to_matrix(load_npy(a.features));
    const Matrix logits = predict_logits(probe, features);
    run.write_npy_output(a.output, from_matrix(softmax(logits)));
    if (!a.logits_output.empty()) run.write_npy_output(a.logits_output, from_matrix(logits));
    run.finish(a.manifest.empty() ? sibling_manifest(a.output) : fs::path(a.manifest));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dvpool: dual-view pyramid pooling, probes and calibration metrics"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    PoolArgs pool;
    auto* pool_cmd = app.add_subcommand("pool", "Pool N x C x [D x] H x W maps into N x L features");
    pool_cmd->add_option("--input", pool.input, "Feature maps (.npy, f4 or f8)")->required()->check(CLI::ExistingFile);
    pool_cmd->add_option("--config", pool.config, "DVPP config JSON")->required()->check(CLI::ExistingFile);
    pool_cmd->add_option("--output", pool.output, "Pooled features (.npy, f8)")->required();
    pool_cmd->add_option("--threads", pool.threads, "Worker threads (default: DVPOOL_THREADS or all cores)");
    pool_cmd->add_option("--manifest", pool.manifest, "Run manifest path (default: <output>.manifest.json)");

    MetricsArgs metrics;
    auto* metrics_cmd = app.add_subcommand("metrics", "Classification and calibration report");
    auto* probs_opt = metrics_cmd->add_option("--probs", metrics.probs, "N x K probabilities (.npy)")
                          ->check(CLI::ExistingFile);
    auto* logits_opt = metrics_cmd->add_option("--logits", metrics.logits, "N x K logits (.npy)")
                           ->check(CLI::ExistingFile);
    probs_opt->excludes(logits_opt);
    metrics_cmd->add_option("--labels", metrics.labels, "Labels (.npy i8 or .csv)")->required()->check(CLI::ExistingFile);
    metrics_cmd->add_option("--bins", metrics.bins, "ECE bin count")->check(CLI::PositiveNumber);
    metrics_cmd->add_option("--kappa", metrics.kappa, "Kappa weighting")
        ->check(CLI::IsMember({"unweighted", "quadratic"}));
    metrics_cmd->add_flag("--fit-temperature", metrics.fit_temperature, "Fit and report temperature scaling");
    metrics_cmd->add_option("--output", metrics.output, "Report JSON path")->capture_default_str();
    metrics_cmd->add_option("--reliability-csv", metrics.reliability_csv, "Reliability table CSV path");
    metrics_cmd->add_option("--manifest", metrics.manifest, "Run manifest path");

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dual-view dataset");
    synth_cmd->add_option("--spec", synth.spec, "Synth spec JSON (default spec if omitted)")->check(CLI::ExistingFile);
    synth_cmd->add_option("--out", synth.out, "Output directory")->required();
    synth_cmd->add_option("--threads", synth.threads, "Worker threads");
    synth_cmd->add_option("--manifest", synth.manifest, "Run manifest path");

    ProbeArgs probe;
    auto* probe_cmd = app.add_subcommand("probe", "Train a linear probe on pooled features");
    probe_cmd->add_option("--features", probe.features, "N x D features (.npy)")->required()->check(CLI::ExistingFile);
    probe_cmd->add_option("--labels", probe.labels, "Labels (.npy i8 or .csv)")->required()->check(CLI::ExistingFile);
    probe_cmd->add_option("--spec", probe.spec, "Train spec JSON")->check(CLI::ExistingFile);
    probe_cmd->add_option("--out", probe.out, "Output directory")->required();
    probe_cmd->add_option("--eval-features", probe.eval_features, "Features to score after training")
        ->check(CLI::ExistingFile);
    probe_cmd->add_option("--manifest", probe.manifest, "Run manifest path");

    PredictArgs predict;
    auto* predict_cmd = app.add_subcommand("predict", "Score features with a trained probe");
    predict_cmd->add_option("--probe", predict.probe, "Probe directory")->required()->check(CLI::ExistingDirectory);
    predict_cmd->add_option("--features", predict.features, "N x D features (.npy)")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--output", predict.output, "Probabilities (.npy)")->required();
    predict_cmd->add_option("--logits-output", predict.logits_output, "Logits (.npy)");
    predict_cmd->add_option("--manifest", predict.manifest, "Run manifest path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*pool_cmd) return run_pool(pool);
        if (*metrics_cmd) {
            if (metrics.probs.empty() && metrics.logits.empty())
                throw ContractViolation("metrics: one of --probs or --logits is required");
            return run_metrics(metrics);
        }
        if (*synth_cmd) return run_synth(synth);
        if (*probe_cmd) return run_probe(probe);
        if (*predict_cmd) return run_predict(predict);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
