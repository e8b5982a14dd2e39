// dirsep: batch front end for mixing, separation, evaluation and figure-data
// export. Exit codes: 0 success, 2 usage error, 1 runtime error.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "dirsep/audio.hpp"
#include "dirsep/em.hpp"
#include "dirsep/errors.hpp"
#include "dirsep/evaluate.hpp"
#include "dirsep/separate.hpp"
#include "dirsep/serialize.hpp"
#include "dirsep/sparsify.hpp"
#include "dirsep/stft.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
    if (const char* env = std::getenv("DIRSEP_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

// Angle spec: K-1 semicolon-separated rows of L comma-separated degrees, the
// row layout used for multi-sensor angle sets. Source l takes column l of
// every row.
std::vector<std::vector<double>> parse_angle_rows(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::size_t begin = 0;
    while (begin <= text.size()) {
        const std::size_t end = std::min(text.find(';', begin), text.size());
        std::vector<double> row;
        std::size_t v = begin;
        while (v < end) {
            const std::size_t comma = std::min(text.find(',', v), end);
            const std::string token = text.substr(v, comma - v);
            try {
                std::size_t used = 0;
                row.push_back(std::stod(token, &used));
                while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used]))) ++used;
                if (used != token.size()) throw std::invalid_argument(token);
            } catch (const std::exception&) {
                throw UsageError("bad angle value '" + token + "'");
            }
            v = comma + 1;
        }
        if (!row.empty()) rows.push_back(std::move(row));
        if (end == text.size()) break;
        begin = end + 1;
    }
    if (rows.empty()) throw UsageError("empty --angles spec");
    return rows;
}

std::vector<std::vector<double>> angles_per_source(const std::vector<std::vector<double>>& rows) {
    const std::size_t L = rows.front().size();
    for (const auto& r : rows)
        if (r.size() != L) throw UsageError("angle rows have different lengths");
    std::vector<std::vector<double>> per_source(L);
    for (std::size_t l = 0; l < L; ++l)
        for (const auto& r : rows) per_source[l].push_back(r[l]);
    return per_source;
}

std::vector<fs::path> wav_files_sorted(const std::string& dir) {
    if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".wav") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

struct MixArgs {
    std::vector<std::string> sources;
    std::string angles;
    std::string out;
    bool normalize = false;
    std::uint64_t seed = default_seed();
};

int run_mix(const MixArgs& args) {
    const auto rows = parse_angle_rows(args.angles);
    const auto per_source = angles_per_source(rows);
    if (per_source.size() != args.sources.size())
        throw UsageError("angle spec has " + std::to_string(per_source.size()) + " sources but "
                         + std::to_string(args.sources.size()) + " files were given");
    const std::size_t K = rows.size() + 1;

    const dirsep::MixingSpec spec = dirsep::mixing_matrix(per_source, K);
    for (const auto& w : spec.warnings) std::cerr << "warning: " << w << "\n";

    std::vector<dirsep::AudioBuffer> sources;
    sources.reserve(args.sources.size());
    for (const auto& path : args.sources) sources.push_back(dirsep::read_wav(path));

    dirsep::AudioBuffer mixture = dirsep::mix(sources, spec);
    double gain = 1.0;
    if (args.normalize) {
        double peak = 0.0;
        for (const auto& ch : mixture.channels)
            for (double v : ch) peak = std::max(peak, std::fabs(v));
        if (peak > 0.0) gain = 0.99 / peak;
        for (auto& ch : mixture.channels)
            for (double& v : ch) v *= gain;
    }
    dirsep::write_wav(mixture, args.out, dirsep::SampleFormat::float32);

    json sidecar = dirsep::mixing_to_json(spec);
    sidecar["applied_gain"] = gain;
    sidecar["config"] = {{"command", "mix"},
                         {"sources", args.sources},
                         {"angles", args.angles},
                         {"out", args.out},
                         {"normalize", args.normalize},
                         {"seed", args.seed}};
    dirsep::write_json_file(sidecar, args.out + ".json");
    return 0;
}

struct SeparateArgs {
    std::string input;
    std::size_t num_sources = 0;
    std::string material = "speech";
    double frame_ms = 0.0;  // 0 means "per material"
    std::size_t q = 0;      // 0 means "per material"
    double conf_threshold = 300.0;
    std::size_t min_points = 0;  // 0 means 100 per source
    std::string mode = "wmdld";
    std::uint64_t seed = default_seed();
    std::string out_dir;
    bool pcm16 = false;
};

int run_separate(const SeparateArgs& args) {
    if (args.material != "speech" && args.material != "music")
        throw UsageError("--material must be speech or music");
    if (args.mode != "wmdld" && args.mode != "mdld") throw UsageError("--mode must be wmdld or mdld");

    const dirsep::AudioBuffer mixture = dirsep::read_wav(args.input);
    if (mixture.channel_count() < 2) throw UsageError("separation needs at least 2 input channels");

    double frame_ms = args.frame_ms;
    if (frame_ms <= 0.0) {
        if (args.material == "speech")
            frame_ms = 32.0;
        else
            frame_ms = mixture.sample_rate > 32000.0 ? 46.4 : 128.0;
    }
    const std::size_t q = args.q != 0 ? args.q : (args.material == "speech" ? 2 : 3);

    const dirsep::StftConfig stft_cfg = dirsep::StftConfig::from_frame_ms(frame_ms, mixture.sample_rate);
    dirsep::SparsifierConfig sparse_cfg;
    sparse_cfg.q = q;
    sparse_cfg.confidence_threshold = args.conf_threshold;
    sparse_cfg.min_points = args.min_points;
    dirsep::EmConfig em_cfg;
    em_cfg.seed = args.seed;
    const dirsep::MixtureMode mode =
        args.mode == "wmdld" ? dirsep::MixtureMode::weighted : dirsep::MixtureMode::unweighted;

    dirsep::SeparationDiagnostics diag;
    const dirsep::SeparatedSources result =
        dirsep::separate(mixture, args.num_sources, stft_cfg, sparse_cfg, em_cfg, mode, &diag);

    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    for (std::size_t i = 0; i < result.buffers.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "source_%02zu.wav", i + 1);
        dirsep::write_wav(result.buffers[i], (dir / name).string(),
                          args.pcm16 ? dirsep::SampleFormat::pcm16 : dirsep::SampleFormat::float32);
    }
    dirsep::save_model(result.model, (dir / "model.json").string());

    json summary;
    summary["per_source_counts"] = diag.assignment.per_source_counts(args.num_sources);
    summary["tie_count"] = diag.assignment.tie_count;
    summary["selected_points"] = diag.selected_points;
    summary["effective_confidence_threshold"] = diag.effective_threshold;
    dirsep::write_json_file(summary, (dir / "assignment.json").string());

    json config;
    config["command"] = "separate";
    config["input"] = args.input;
    config["num_sources"] = args.num_sources;
    config["material"] = args.material;
    config["frame_ms"] = frame_ms;
    config["q"] = q;
    config["conf_threshold"] = args.conf_threshold;
    config["min_points"] = args.min_points;
    config["mode"] = args.mode;
    config["seed"] = args.seed;
    config["out_dir"] = args.out_dir;
    config["pcm16"] = args.pcm16;
    dirsep::write_json_file(config, (dir / "config.json").string());
    return 0;
}

struct EvaluateArgs {
    std::string estimates;
    std::string references;
    std::string report;
    std::string csv;
};

int run_evaluate(const EvaluateArgs& args) {
    const auto est_files = wav_files_sorted(args.estimates);
    const auto ref_files = wav_files_sorted(args.references);
    if (est_files.size() != ref_files.size())
        throw UsageError("estimate count " + std::to_string(est_files.size())
                         + " != reference count " + std::to_string(ref_files.size()));
    if (est_files.empty()) throw UsageError("no .wav files found");

    std::vector<dirsep::AudioBuffer> estimates, references;
    for (const auto& p : est_files) estimates.push_back(dirsep::read_wav(p.string()));
    for (const auto& p : ref_files) references.push_back(dirsep::read_wav(p.string()));
    const std::size_t n = references.front().sample_count();
    for (const auto& b : references)
        if (b.sample_count() != n) throw UsageError("reference lengths differ");
    for (const auto& b : estimates)
        if (b.sample_count() != n) throw UsageError("estimate/reference lengths differ");

    const dirsep::SeparationReport report = dirsep::bss_metrics(estimates, references);

    json j = dirsep::report_to_json(report);
    json files_est = json::array(), files_ref = json::array();
    for (const auto& p : est_files) files_est.push_back(p.string());
    for (const auto& p : ref_files) files_ref.push_back(p.string());
    j["config"] = {{"command", "evaluate"},
                   {"estimates", files_est},
                   {"references", files_ref},
                   {"report", args.report}};
    dirsep::write_json_file(j, args.report);

    std::string csv = args.csv;
    if (csv.empty()) {
        csv = args.report;
        const std::size_t dot = csv.rfind(".json");
        if (dot != std::string::npos && dot == csv.size() - 5) csv.resize(dot);
        csv += ".csv";
    }
    dirsep::write_report_csv(report, csv);

    std::cout << "average SDR " << report.averages.sdr << " dB, SIR " << report.averages.sir
              << " dB, SAR " << report.averages.sar << " dB\n";
    return 0;
}

struct HistArgs {
    std::string input;
    std::size_t bins = 180;
    std::string method = "confidence";
    std::size_t q = 2;
    double conf_threshold = 300.0;
    double norm_threshold = -1.0;  // negative: match the confidence selection count
    std::string out;
    std::string scatter;
};

int run_hist(const HistArgs& args) {
    if (args.method != "confidence" && args.method != "norm")
        throw UsageError("--method must be confidence or norm");
    const dirsep::AudioBuffer mixture = dirsep::read_wav(args.input);
    if (mixture.channel_count() != 2) throw UsageError("hist requires a 2-channel input");

    const dirsep::StftConfig stft_cfg = dirsep::StftConfig::from_frame_ms(32.0, mixture.sample_rate);
    const dirsep::Spectrogram spec = dirsep::stft(mixture, stft_cfg);

    dirsep::SparseDirectionalSet set;
    if (args.method == "confidence") {
        dirsep::SparsifierConfig cfg;
        cfg.q = args.q;
        cfg.confidence_threshold = args.conf_threshold;
        set = dirsep::select_points(spec, cfg);
    } else if (args.norm_threshold >= 0.0) {
        set = dirsep::norm_threshold_points(spec, args.norm_threshold);
    } else {
        // Match the confidence method's selected count so the two histograms
        // are comparable.
        dirsep::SparsifierConfig cfg;
        cfg.q = args.q;
        cfg.confidence_threshold = args.conf_threshold;
        const std::size_t target = dirsep::select_points(spec, cfg).count();
        set = dirsep::norm_threshold_points(spec, dirsep::norm_threshold_for_count(spec, target));
    }

    const auto hist = dirsep::angle_histogram(set, args.bins);
    dirsep::write_histogram_csv(hist, args.out);
    if (!args.scatter.empty()) dirsep::write_scatter_csv(set, args.scatter);

    json config;
    config["command"] = "hist";
    config["input"] = args.input;
    config["bins"] = args.bins;
    config["method"] = args.method;
    config["q"] = args.q;
    config["conf_threshold"] = args.conf_threshold;
    config["norm_threshold"] = args.norm_threshold;
    config["out"] = args.out;
    config["selected_points"] = set.count();
    config["effective_threshold"] = set.effective_threshold;
    dirsep::write_json_file(config, args.out + ".config.json");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Underdetermined audio source separation via sparse STFT points and "
                 "weighted directional Laplacian mixtures"};
    app.require_subcommand(1);

    MixArgs mix_args;
    CLI::App* cmd_mix = app.add_subcommand("mix", "Mix mono sources through an angle-parameterized matrix");
    cmd_mix->add_option("--sources", mix_args.sources, "Mono source WAV files")->required()->expected(-1);
    cmd_mix->add_option("--angles", mix_args.angles,
                        "K-1 rows of L angles in degrees, rows ';'-separated, e.g. \"0,-87,-60;85,0,-60\"")
        ->required();
    cmd_mix->add_option("--out", mix_args.out, "Output mixture WAV")->required();
    cmd_mix->add_flag("--normalize", mix_args.normalize, "Peak-normalize the mixture to 0.99");
    cmd_mix->add_option("--seed", mix_args.seed, "Seed recorded in the sidecar")->envname("DIRSEP_SEED");

    SeparateArgs sep_args;
    CLI::App* cmd_separate = app.add_subcommand("separate", "Separate a mixture into L sources");
    cmd_separate->add_option("--input", sep_args.input, "Mixture WAV (K >= 2 channels)")->required();
    cmd_separate->add_option("--num-sources", sep_args.num_sources, "Number of sources L")->required();
    cmd_separate->add_option("--material", sep_args.material, "speech|music preset for frame length and Q");
    cmd_separate->add_option("--frame-ms", sep_args.frame_ms, "STFT frame length in ms (overrides preset)");
    cmd_separate->add_option("--q", sep_args.q, "Neighborhood side length Q (overrides preset)");
    cmd_separate->add_option("--conf-threshold", sep_args.conf_threshold, "Confidence threshold d");
    cmd_separate->add_option("--min-points", sep_args.min_points, "Adaptive fallback floor (default 100*L)");
    cmd_separate->add_option("--mode", sep_args.mode, "wmdld (weighted) or mdld (unweighted)");
    cmd_separate->add_option("--seed", sep_args.seed, "EM seed")->envname("DIRSEP_SEED");
    cmd_separate->add_option("--out-dir", sep_args.out_dir, "Output directory")->required();
    cmd_separate->add_flag("--pcm16", sep_args.pcm16, "Write 16-bit PCM instead of float32");

    EvaluateArgs eval_args;
    CLI::App* cmd_evaluate = app.add_subcommand("evaluate", "Score estimates against references");
    cmd_evaluate->add_option("--estimates", eval_args.estimates, "Directory of estimate WAVs")->required();
    cmd_evaluate->add_option("--references", eval_args.references, "Directory of reference WAVs")->required();
    cmd_evaluate->add_option("--report", eval_args.report, "Report JSON path")->required();
    cmd_evaluate->add_option("--csv", eval_args.csv, "Report CSV path (default: report stem + .csv)");

    HistArgs hist_args;
    CLI::App* cmd_hist = app.add_subcommand("hist", "Export the folded angle histogram of selected points");
    cmd_hist->add_option("--input", hist_args.input, "Stereo mixture WAV")->required();
    cmd_hist->add_option("--bins", hist_args.bins, "Histogram bin count");
    cmd_hist->add_option("--method", hist_args.method, "confidence|norm point selection");
    cmd_hist->add_option("--q", hist_args.q, "Neighborhood side length Q");
    cmd_hist->add_option("--conf-threshold", hist_args.conf_threshold, "Confidence threshold d");
    cmd_hist->add_option("--norm-threshold", hist_args.norm_threshold,
                         "Norm threshold (default: match the confidence selection count)");
    cmd_hist->add_option("--out", hist_args.out, "Histogram CSV path")->required();
    cmd_hist->add_option("--scatter", hist_args.scatter, "Optional scatter CSV of selected points");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << "\n";
        return 2;
    }

    try {
        if (cmd_mix->parsed()) return run_mix(mix_args);
        if (cmd_separate->parsed()) return run_separate(sep_args);
        if (cmd_evaluate->parsed()) return run_evaluate(eval_args);
        if (cmd_hist->parsed()) return run_hist(hist_args);
        std::cerr << app.help() << "\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const dirsep::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
