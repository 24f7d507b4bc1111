// Copyright 2026 The simtrack authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "simtrack/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "simtrack/dsp.hpp"
#include "simtrack/errors.hpp"
#include "simtrack/fingerprint.hpp"
#include "simtrack/io.hpp"
#include "simtrack/parallel.hpp"
#include "simtrack/rpca.hpp"

using nlohmann::json;

namespace simtrack {

namespace {

std::string join_path(const std::string& a, const std::string& b) {
    if (b.empty()) return a;
    if (b.front() == '/') return b;
    return a + "/" + b;
}

std::string iq_path(const std::string& out_dir, std::uint32_t sensor) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "iq/d%03u.iq", sensor);
    return join_path(out_dir, buf);
}

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& context) {
    if (!obj.is_object()) throw ConfigError(context + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ConfigError("unknown key '" + key + "' in " + context);
        }
    }
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
    const auto it = obj.find(key);
    if (it != obj.end()) out = it->get<T>();
}

}  // namespace

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    check_keys(j,
               {"scenario", "out_dir", "seed", "threads", "rpca", "mask", "eo", "tdoa",
                "fingerprint", "fusion"},
               "config");
    PipelineConfig cfg;
    try {
        if (!j.contains("scenario")) throw ConfigError("config needs a 'scenario' entry");
        const json& s = j.at("scenario");
        if (s.is_string()) {
            cfg.scenario = preset(s.get<std::string>());
        } else {
            check_keys(s, {"path", "preset", "pass"}, "config.scenario");
            if (s.contains("path")) {
                cfg.scenario = load_scenario(s.at("path").get<std::string>());
            } else if (s.contains("preset")) {
                cfg.scenario = preset_pass(s.at("preset").get<std::string>(),
                                           s.contains("pass") ? s.at("pass").get<int>() : 1);
            } else {
                throw ConfigError("config.scenario needs 'path' or 'preset'");
            }
        }
        maybe(j, "out_dir", cfg.out_dir);
        if (j.contains("seed")) cfg.scenario.seed = j.at("seed").get<std::uint64_t>();
        maybe(j, "threads", cfg.threads);

        if (j.contains("rpca")) {
            const json& r = j.at("rpca");
            check_keys(r, {"tau", "lambda", "rho", "beta0", "max_iters", "tol"}, "config.rpca");
            if (r.contains("tau")) cfg.rpca.tau = r.at("tau").get<double>();
            if (r.contains("lambda")) cfg.rpca.lambda = r.at("lambda").get<double>();
            if (r.contains("rho")) cfg.rpca.rho = r.at("rho").get<double>();
            if (r.contains("beta0")) cfg.rpca.beta0 = r.at("beta0").get<double>();
            if (r.contains("tol")) cfg.rpca.tol = r.at("tol").get<double>();
            if (r.contains("max_iters")) cfg.rpca.max_iters = r.at("max_iters").get<int>();
        }
        if (j.contains("mask")) {
            const json& m = j.at("mask");
            check_keys(m, {"k_sigma", "min_area", "max_area", "dedup_radius"}, "config.mask");
            maybe(m, "k_sigma", cfg.mask.k_sigma);
            maybe(m, "min_area", cfg.mask.min_area);
            maybe(m, "max_area", cfg.mask.max_area);
            maybe(m, "dedup_radius", cfg.mask.dedup_radius);
        }
        if (j.contains("eo")) {
            const json& e = j.at("eo");
            check_keys(e, {"batch", "tile_rows", "tile_cols", "external_detections"}, "config.eo");
            maybe(e, "batch", cfg.eo.batch);
            maybe(e, "tile_rows", cfg.eo.tile_rows);
            maybe(e, "tile_cols", cfg.eo.tile_cols);
            maybe(e, "external_detections", cfg.eo.external_detections);
        }
        if (j.contains("tdoa")) {
            const json& t = j.at("tdoa");
            check_keys(t,
                       {"output_rate_hz", "min_peak_quality", "altitude", "sigma_z", "weight_z",
                        "max_lag_guard_s"},
                       "config.tdoa");
            maybe(t, "output_rate_hz", cfg.tdoa.output_rate_hz);
            maybe(t, "min_peak_quality", cfg.tdoa.min_peak_quality);
            maybe(t, "altitude", cfg.tdoa.altitude);
            maybe(t, "sigma_z", cfg.tdoa.sigma_z);
            maybe(t, "weight_z", cfg.tdoa.weight_z);
            maybe(t, "max_lag_guard_s", cfg.tdoa.max_lag_guard_s);
        }
        if (j.contains("fingerprint")) {
            const json& fp = j.at("fingerprint");
            check_keys(fp,
                       {"templates", "train", "report_scenarios", "conf_scale", "min_conf",
                        "min_per_label", "external_confidences"},
                       "config.fingerprint");
            maybe(fp, "templates", cfg.fingerprint.templates);
            maybe(fp, "conf_scale", cfg.fingerprint.conf_scale);
            maybe(fp, "min_conf", cfg.fingerprint.min_conf);
            maybe(fp, "min_per_label", cfg.fingerprint.min_per_label);
            maybe(fp, "external_confidences", cfg.fingerprint.external_confidences);
            if (fp.contains("train")) {
                for (const auto& t : fp.at("train")) {
                    check_keys(t, {"scenario", "pass"}, "config.fingerprint.train[]");
                    FingerprintStageConfig::TrainSpec spec;
                    spec.scenario = t.at("scenario").get<std::string>();
                    if (t.contains("pass")) spec.pass = t.at("pass").get<int>();
                    cfg.fingerprint.train.push_back(spec);
                }
            }
            if (fp.contains("report_scenarios")) {
                for (const auto& r : fp.at("report_scenarios")) {
                    cfg.fingerprint.report_scenarios.push_back(r.get<std::string>());
                }
            }
        }
        if (j.contains("fusion")) {
            const json& fu = j.at("fusion");
            check_keys(fu,
                       {"gate", "q", "r_eo", "r_rf", "m_confirm", "confirm_window", "n_miss",
                        "offsets", "rf_as_measurement", "use_rf", "label_radius_px"},
                       "config.fusion");
            maybe(fu, "gate", cfg.fusion.gate);
            maybe(fu, "q", cfg.fusion.q);
            maybe(fu, "r_eo", cfg.fusion.r_eo);
            maybe(fu, "r_rf", cfg.fusion.r_rf);
            maybe(fu, "m_confirm", cfg.fusion.m_confirm);
            maybe(fu, "confirm_window", cfg.fusion.confirm_window);
            maybe(fu, "n_miss", cfg.fusion.n_miss);
            maybe(fu, "rf_as_measurement", cfg.fusion.rf_as_measurement);
            maybe(fu, "use_rf", cfg.fusion_use_rf);
            maybe(fu, "label_radius_px", cfg.fusion.label_radius_px);
            if (fu.contains("offsets")) {
                cfg.fusion_offsets_explicit = true;
                for (const auto& [key, value] : fu.at("offsets").items()) {
                    cfg.fusion.offsets[key] = value.get<double>();
                }
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return cfg;
}

void apply_overrides(PipelineConfig& cfg, const CliOverrides& ov) {
    if (ov.out_dir) cfg.out_dir = *ov.out_dir;
    if (ov.seed) cfg.scenario.seed = *ov.seed;
    if (ov.threads) cfg.threads = *ov.threads;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

void cmd_simulate(const PipelineConfig& cfg) {
    const Scenario& scn = cfg.scenario;
    scn.validate();
    ensure_dir(cfg.out_dir);
    ensure_dir(join_path(cfg.out_dir, "frames"));
    ensure_dir(join_path(cfg.out_dir, "iq"));

    log_info("simulate: generating EO frames for " + scn.name);
    EoGenResult eo = generate_eo(scn);
    for (const auto& w : eo.warnings) log_warn(w);
    for (std::size_t k = 0; k < eo.frames.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof name, "frames/frame_%05zu.pgm", k);
        write_pgm(join_path(cfg.out_dir, name), eo.frames[k]);
    }
    write_eo_truth_csv(join_path(cfg.out_dir, "eo_truth.csv"), eo.truth);
    write_world_truth_csv(join_path(cfg.out_dir, "world_truth.csv"), eo.world_truth);

    log_info("simulate: generating RF captures");
    for (const auto& w : rf_band_warnings(scn)) log_warn(w);
    write_rf_truth_csv(join_path(cfg.out_dir, "rf_truth.csv"), rf_truth(scn));

    std::vector<std::uint32_t> tuned;
    for (const auto& [id, f] : scn.sensor_tuning) tuned.push_back(id);
    const std::int64_t total = static_cast<std::int64_t>(std::llround(scn.duration * scn.rf_fs));
    constexpr std::int64_t kChunk = 1 << 20;
    parallel_for(tuned.size(), cfg.threads, [&](std::size_t i) {
        const std::uint32_t id = tuned[i];
        const auto off_it = scn.rf_offsets.find(id);
        const double t0 = off_it != scn.rf_offsets.end() ? off_it->second : 0.0;
        IqWriter writer(iq_path(cfg.out_dir, id), scn.rf_fs, scn.sensor_tuning.at(id), t0, id);
        Eigen::VectorXcd buf;
        for (std::int64_t n0 = 0; n0 < total; n0 += kChunk) {
            const std::int64_t n1 = std::min(n0 + kChunk, total);
            render_rf_chunk(scn, id, n0, n1, buf);
            writer.append(buf);
        }
        writer.close();
    });

    save_scenario(join_path(cfg.out_dir, "scenario.json"), scn);
    log_info("simulate: done (" + std::to_string(eo.frames.size()) + " frames, " +
             std::to_string(tuned.size()) + " IQ captures)");
}

// ---------------------------------------------------------------------------
// detect-eo
// ---------------------------------------------------------------------------

namespace {

Scenario load_run_scenario(const PipelineConfig& cfg) {
    const std::string path = join_path(cfg.out_dir, "scenario.json");
    if (!file_exists(path)) {
        throw IOError("missing " + path + " (run the simulate stage first)");
    }
    return load_scenario(path);
}

}  // namespace

void cmd_detect_eo(const PipelineConfig& cfg) {
    const Scenario scn = load_run_scenario(cfg);
    const std::string frames_dir = join_path(cfg.out_dir, "frames");
    std::vector<Eigen::MatrixXf> frames = read_frames_dir(frames_dir);
    log_info("detect-eo: " + std::to_string(frames.size()) + " frames");

    std::vector<Detection2D> all;
    const int batch = std::max(2, cfg.eo.batch);
    std::size_t start = 0;
    while (start < frames.size()) {
        std::size_t count = std::min<std::size_t>(batch, frames.size() - start);
        if (frames.size() - (start + count) == 1) ++count;  // avoid a trailing 1-frame batch
        std::vector<Eigen::MatrixXd> stack;
        stack.reserve(count);
        for (std::size_t k = 0; k < count; ++k) stack.push_back(frames[start + k].cast<double>());

        RpcaParams params = RpcaParams::defaults_for(
            ObservationMatrix::from_frames(stack, {}).data);
        if (cfg.rpca.tau) params.tau = *cfg.rpca.tau;
        if (cfg.rpca.lambda) params.lambda = *cfg.rpca.lambda;
        if (cfg.rpca.rho) params.rho = *cfg.rpca.rho;
        if (cfg.rpca.beta0) params.beta0 = *cfg.rpca.beta0;
        if (cfg.rpca.tol) params.tol = *cfg.rpca.tol;
        if (cfg.rpca.max_iters) params.max_iters = *cfg.rpca.max_iters;

        TiledRpcaResult tiled =
            rpca_tiled(stack, cfg.eo.tile_rows, cfg.eo.tile_cols, params, cfg.threads);
        for (std::size_t k = 0; k < count; ++k) {
            const double t = (start + k) / scn.frame_rate;
            auto pos = extract_detections(tiled.sparse_frames[k], t, Contrast::positive, cfg.mask);
            auto neg = extract_detections(tiled.sparse_frames[k], t, Contrast::negative, cfg.mask);
            auto fused = fuse_contrast_detections(pos, neg, cfg.mask.dedup_radius);
            all.insert(all.end(), fused.begin(), fused.end());
        }
        start += count;
    }
    write_detections_csv(join_path(cfg.out_dir, "detections_eo.csv"), all);
    log_info("detect-eo: " + std::to_string(all.size()) + " detections");
}

// ---------------------------------------------------------------------------
// localize-rf helpers
// ---------------------------------------------------------------------------

namespace {

struct BandInfo {
    int index = 0;
    double freq = 0.0;
    std::vector<std::uint32_t> sensors;
    std::uint32_t reference = 0;
    double source_offset = 0.0;               // RF-common minus unified (the global lag)
    std::map<std::uint32_t, double> intra;    // per-sensor offset inside the band
};

std::vector<BandInfo> band_plan(const Scenario& scn) {
    std::vector<BandInfo> bands;
    int index = 0;
    for (const auto& group : scn.tuning_groups()) {
        BandInfo b;
        b.index = index++;
        b.freq = scn.sensor_tuning.at(group.front());
        b.sensors = group;
        b.reference = group.front();
        double min_off = std::numeric_limits<double>::infinity();
        for (auto id : group) {
            const auto it = scn.rf_offsets.find(id);
            const double off = it != scn.rf_offsets.end() ? it->second : 0.0;
            min_off = std::min(min_off, off);
        }
        if (!std::isfinite(min_off)) min_off = 0.0;
        b.source_offset = min_off;
        for (auto id : group) {
            const auto it = scn.rf_offsets.find(id);
            const double off = it != scn.rf_offsets.end() ? it->second : 0.0;
            b.intra[id] = off - min_off;
        }
        bands.push_back(std::move(b));
    }
    return bands;
}

void write_bands_json(const std::string& path, const std::vector<BandInfo>& bands) {
    json j;
    j["bands"] = json::array();
    for (const auto& b : bands) {
        json bj;
        bj["index"] = b.index;
        bj["freq_hz"] = b.freq;
        bj["sensors"] = b.sensors;
        bj["reference"] = b.reference;
        bj["source_offset"] = b.source_offset;
        j["bands"].push_back(bj);
    }
    std::ofstream f(path);
    if (!f) throw IOError("cannot write " + path);
    f << j.dump(2) << "\n";
}

std::vector<BandInfo> read_bands_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IOError("cannot open " + path + " (run the localize-rf stage first)");
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    std::vector<BandInfo> bands;
    for (const auto& bj : j.at("bands")) {
        BandInfo b;
        b.index = bj.at("index").get<int>();
        b.freq = bj.at("freq_hz").get<double>();
        for (const auto& s : bj.at("sensors")) b.sensors.push_back(s.get<std::uint32_t>());
        b.reference = bj.at("reference").get<std::uint32_t>();
        b.source_offset = bj.at("source_offset").get<double>();
        bands.push_back(std::move(b));
    }
    return bands;
}

std::string band_csv(const std::string& out_dir, const char* stem, int index) {
    return join_path(out_dir, std::string(stem) + "_b" + std::to_string(index) + ".csv");
}

// Per-sensor streaming view of one band capture on the band's common clock.
struct SensorStream {
    std::unique_ptr<IqReader> reader;
    std::uint32_t id = 0;
    double common_start = 0.0;  // t0 - intra offset
    double fs = 0.0;
    std::int64_t n = 0;
    double window_floor = 0.0;  // lowest-decile window energy
};

constexpr int kWindowSamples10M = 210000;  // 0.0210 s at 10 MHz

double window_energy(const Eigen::VectorXcd& x) {
    return x.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(x.size(), 1));
}

}  // namespace

void cmd_localize_rf(const PipelineConfig& cfg) {
    const Scenario scn = load_run_scenario(cfg);
    const std::vector<BandInfo> bands = band_plan(scn);
    if (bands.empty()) throw IOError("scenario has no tuned sensors");

    const double window_sec = kDecisionWindowSec;
    const int stride = std::max(
        1, static_cast<int>(std::llround(1.0 / (window_sec * cfg.tdoa.output_rate_hz))));

    std::vector<std::vector<RFLocation>> per_band(bands.size());
    for (std::size_t bi = 0; bi < bands.size(); ++bi) {
        const BandInfo& band = bands[bi];
        if (band.sensors.size() < 3) {
            log_warn("band " + std::to_string(band.index) + ": fewer than 3 sensors, skipping");
            write_locations_csv(band_csv(cfg.out_dir, "rf_locations", band.index), {});
            continue;
        }

        std::vector<SensorStream> streams;
        for (auto id : band.sensors) {
            SensorStream s;
            s.reader = std::make_unique<IqReader>(iq_path(cfg.out_dir, id));
            s.id = id;
            s.fs = s.reader->header().fs;
            if (std::abs(s.fs - scn.rf_fs) > 1e-3) {
                throw IOError("capture rate mismatch for sensor " + std::to_string(id));
            }
            s.n = static_cast<std::int64_t>(s.reader->header().n);
            s.common_start = s.reader->header().t0 - band.intra.at(id);
            streams.push_back(std::move(s));
        }
        const int win = static_cast<int>(std::llround(window_sec * scn.rf_fs));

        // One pass of sampled windows: noise floors per sensor plus the band's
        // occupied spectrum from the strongest window of the reference stream.
        Eigen::VectorXcd strongest;
        double strongest_energy = -1.0;
        for (auto& s : streams) {
            const std::int64_t windows_total = s.n / win;
            std::vector<double> energies;
            const std::int64_t step = std::max<std::int64_t>(1, windows_total / 40);
            for (std::int64_t w = 0; w < windows_total; w += step) {
                Eigen::VectorXcd x = s.reader->read(w * win, win);
                const double e = window_energy(x);
                energies.push_back(e);
                if (s.id == band.reference && e > strongest_energy) {
                    strongest_energy = e;
                    strongest = x;
                }
            }
            std::sort(energies.begin(), energies.end());
            s.window_floor = energies.empty() ? 0.0 : energies[energies.size() / 10];
        }
        double lo = 0.0, hi = 0.0, floor_power = 0.0;
        Eigen::VectorXcd band_taps;
        if (strongest.size() > 0 &&
            detail::occupied_band(strongest, scn.rf_fs, &lo, &hi, &floor_power)) {
            const double transition = std::max((hi - lo) * 0.1, 0.02 * scn.rf_fs) / scn.rf_fs;
            band_taps = fir_bandpass_complex(fir_taps_for_transition(transition),
                                             (lo - 0.01 * scn.rf_fs) / scn.rf_fs,
                                             (hi + 0.01 * scn.rf_fs) / scn.rf_fs);
        } else {
            log_warn("band " + std::to_string(band.index) + ": no occupied spectrum found");
            write_locations_csv(band_csv(cfg.out_dir, "rf_locations", band.index), {});
            continue;
        }
        const int margin = (static_cast<int>(band_taps.size()) - 1) / 2;

        // Window grid on the band's common clock.
        double span_start = -std::numeric_limits<double>::infinity();
        double span_end = std::numeric_limits<double>::infinity();
        for (const auto& s : streams) {
            span_start = std::max(span_start, s.common_start);
            span_end = std::min(span_end, s.common_start + s.n / s.fs);
        }
        const std::int64_t w_lo = static_cast<std::int64_t>(std::ceil(span_start / window_sec - 1e-9));
        const std::int64_t w_hi = static_cast<std::int64_t>(std::floor(span_end / window_sec + 1e-9)) - 1;

        SensorLayout band_layout;
        band_layout.reference_id = band.reference;
        for (auto id : band.sensors) {
            band_layout.sensors.push_back({id, scn.sensors.position_of(id)});
        }
        double max_baseline = 0.0;
        for (std::size_t i = 0; i < band.sensors.size(); ++i) {
            for (std::size_t k = i + 1; k < band.sensors.size(); ++k) {
                max_baseline =
                    std::max(max_baseline, band_layout.baseline(band.sensors[i], band.sensors[k]));
            }
        }
        const double max_lag = max_baseline / kSpeedOfLight + cfg.tdoa.max_lag_guard_s;

        std::vector<std::int64_t> selected;
        for (std::int64_t w = w_lo; w <= w_hi; w += stride) selected.push_back(w);

        std::vector<std::vector<RFLocation>> results(selected.size());
        // Window estimates are independent; parallelize across windows.
        // IqReader is not shared across threads, so guard reads per stream.
        std::vector<std::unique_ptr<std::mutex>> read_locks;
        for (std::size_t i = 0; i < streams.size(); ++i) {
            read_locks.push_back(std::make_unique<std::mutex>());
        }
        parallel_for(selected.size(), cfg.threads, [&](std::size_t wi) {
            const std::int64_t w = selected[wi];
            const double t_w = static_cast<double>(w) * window_sec;
            std::vector<RFCapture> caps;
            std::vector<std::size_t> present;
            for (std::size_t si = 0; si < streams.size(); ++si) {
                auto& s = streams[si];
                const std::int64_t n0 =
                    static_cast<std::int64_t>(std::llround((t_w - s.common_start) * s.fs));
                Eigen::VectorXcd padded;
                {
                    std::lock_guard<std::mutex> lock(*read_locks[si]);
                    padded = s.reader->read(n0 - margin, win + 2 * margin);
                }
                Eigen::VectorXcd central = padded.segment(margin, win);
                if (window_energy(central) < 3.9810717055349722 * s.window_floor) continue;
                RFCapture cap;
                cap.samples = fir_apply_same(padded, band_taps).segment(margin, win);
                cap.fs = s.fs;
                cap.f_center = band.freq;
                cap.t0 = t_w;
                cap.sensor_id = s.id;
                cap.clock_offset = 0.0;  // already on the band's common clock
                caps.push_back(std::move(cap));
                present.push_back(si);
            }
            if (caps.size() < 3) return;

            std::size_t ref_idx = caps.size();
            for (std::size_t i = 0; i < caps.size(); ++i) {
                if (caps[i].sensor_id == band.reference) ref_idx = i;
            }
            if (ref_idx == caps.size()) return;

            // reference pairs drive the SX solve; the ML fallback uses every
            // pair so hyperbola-intersection ambiguities resolve
            std::vector<TdoaMeasurement> ref_tdoas;
            std::vector<TdoaMeasurement> all_tdoas;
            for (std::size_t i = 0; i < caps.size(); ++i) {
                for (std::size_t j = i + 1; j < caps.size(); ++j) {
                    try {
                        TdoaMeasurement m =
                            estimate_tdoa(caps[i], caps[j], max_lag, cfg.tdoa.min_peak_quality);
                        m.t = t_w;
                        all_tdoas.push_back(m);
                        if (j == ref_idx) ref_tdoas.push_back(m);
                        if (i == ref_idx) ref_tdoas.push_back(m);
                    } catch (const NoPeak&) {
                    }
                }
            }
            try {
                if (band.sensors.size() >= 4 && ref_tdoas.size() >= 3) {
                    results[wi].push_back(spherical_intersection(ref_tdoas, band_layout));
                } else if (all_tdoas.size() >= 2) {
                    AltitudePrior prior{cfg.tdoa.altitude, cfg.tdoa.sigma_z, cfg.tdoa.weight_z};
                    results[wi].push_back(ml_localize(all_tdoas, band_layout, prior));
                }
            } catch (const Error& e) {
                log_debug("band " + std::to_string(band.index) + " window " + std::to_string(w) +
                          ": " + e.what());
            }
        });
        // Sequential continuity pass: the 3-sensor altitude-constrained solve
        // is two-fold ambiguous in the worst case; when a window reports a
        // near-tie, keep the basin consistent with the previous fix.
        bool have_last = false;
        Eigen::Vector3d last = Eigen::Vector3d::Zero();
        for (auto& r : results) {
            for (auto& loc : r) {
                if (loc.ambiguous && have_last &&
                    (loc.alternate - last).norm() < (loc.position - last).norm()) {
                    std::swap(loc.position, loc.alternate);
                }
                last = loc.position;
                have_last = true;
                per_band[bi].push_back(std::move(loc));
            }
        }
        write_locations_csv(band_csv(cfg.out_dir, "rf_locations", band.index), per_band[bi]);
        log_info("localize-rf: band " + std::to_string(band.index) + " -> " +
                 std::to_string(per_band[bi].size()) + " fixes");
    }
    write_bands_json(join_path(cfg.out_dir, "bands.json"), bands);
}

// ---------------------------------------------------------------------------
// fingerprint
// ---------------------------------------------------------------------------

namespace {

// One fingerprint vector out of one 0.0210 s slice of a 10 MHz stream:
// hop-center detection, downconversion to the 250 kHz fingerprint band, and
// burst trimming, all window-local.
std::optional<FingerprintVector> fingerprint_window(const Eigen::VectorXcd& padded_input,
                                                    int margin_in, double fs_in, double tuned_hz,
                                                    double window_t) {
    const int win_in = static_cast<int>(padded_input.size()) - 2 * margin_in;
    RFCapture slice;
    slice.samples = padded_input;
    slice.fs = fs_in;
    slice.f_center = tuned_hz;
    slice.t0 = window_t - margin_in / fs_in;
    slice.sensor_id = 0;

    double hop = tuned_hz;
    try {
        hop = detect_hop_center(slice, static_cast<double>(padded_input.size()) / fs_in);
    } catch (const NoSignal&) {
        return std::nullopt;
    } catch (const InvalidArgument&) {
        return std::nullopt;
    }
    hop = std::round((hop - tuned_hz) / 1e4) * 1e4 + tuned_hz;  // stabilize to a 10 kHz grid
    if (std::abs(hop - tuned_hz) + kFingerprintRate / 2.0 > fs_in / 2.0) hop = tuned_hz;

    RFCapture base = downconvert_filter_decimate(slice, hop, kFingerprintRate);
    const int factor = static_cast<int>(std::llround(fs_in / kFingerprintRate));
    const int margin_out = margin_in / factor;
    const int win_out = win_in / factor;
    if (base.samples.size() < margin_out + win_out) return std::nullopt;

    RFCapture window_cap;
    window_cap.samples = base.samples.segment(margin_out, win_out);
    window_cap.fs = kFingerprintRate;
    window_cap.f_center = hop;
    window_cap.t0 = window_t;
    auto vectors = segment_and_trim(window_cap);
    if (vectors.empty()) return std::nullopt;
    return vectors.front();
}

constexpr int kFingerprintMarginIn = 6000;  // covers the decimation filter spans

struct BandDevice {
    std::uint32_t sensor = 0;
    double freq = 0.0;
    std::string device;
};

// Bands of a scenario with the single in-band device identified (training and
// confusion reporting need the truth label).
std::vector<BandDevice> scenario_band_devices(const Scenario& scn) {
    std::vector<BandDevice> out;
    for (const auto& group : scn.tuning_groups()) {
        BandDevice bd;
        bd.sensor = group.front();
        bd.freq = scn.sensor_tuning.at(bd.sensor);
        int count = 0;
        for (const auto& t : scn.targets) {
            const double bw = t.tx.symbol_rate > 0.0 ? 1.35 * t.tx.symbol_rate : t.tx.bandwidth;
            if (t.tx.center_freq > 0.0 && std::abs(t.tx.center_freq - bd.freq) < bw + scn.rf_fs) {
                if (std::abs(t.tx.center_freq - bd.freq) + bw / 2.0 <= 0.49 * scn.rf_fs) {
                    bd.device = t.device;
                    ++count;
                }
            }
        }
        if (count == 1) out.push_back(bd);
    }
    return out;
}

// Renders a scenario band and extracts labeled fingerprint vectors window by
// window (no full capture is materialized).
std::vector<FingerprintVector> harvest_vectors(const Scenario& scn, const BandDevice& bd,
                                               int threads) {
    const double fs = scn.rf_fs;
    const int win_in = static_cast<int>(std::llround(kDecisionWindowSec * fs));
    const int windows = static_cast<int>(std::floor(scn.rf_active() / kDecisionWindowSec));
    std::vector<std::optional<FingerprintVector>> slots(static_cast<std::size_t>(windows));
    parallel_for(static_cast<std::size_t>(windows), threads, [&](std::size_t w) {
        const std::int64_t n0 = static_cast<std::int64_t>(w) * win_in;
        Eigen::VectorXcd buf;
        render_rf_chunk(scn, bd.sensor, n0 - kFingerprintMarginIn,
                        n0 + win_in + kFingerprintMarginIn, buf);
        auto v = fingerprint_window(buf, kFingerprintMarginIn, fs, bd.freq,
                                    static_cast<double>(w) * kDecisionWindowSec);
        if (v) {
            v->device_truth = bd.device;
            slots[w] = std::move(v);
        }
    });
    std::vector<FingerprintVector> out;
    for (auto& s : slots) {
        if (s) out.push_back(std::move(*s));
    }
    return out;
}

}  // namespace

void cmd_fingerprint(const PipelineConfig& cfg) {
    ensure_dir(cfg.out_dir);
    const std::string tpl_path = join_path(cfg.out_dir, cfg.fingerprint.templates);

    ClassTemplates templates;
    if (!cfg.fingerprint.train.empty()) {
        std::vector<FingerprintVector> training;
        for (const auto& spec : cfg.fingerprint.train) {
            Scenario scn = preset_pass(spec.scenario, spec.pass);
            for (const auto& bd : scenario_band_devices(scn)) {
                auto vectors = harvest_vectors(scn, bd, cfg.threads);
                log_info("fingerprint: " + scn.name + " " + bd.device + " -> " +
                         std::to_string(vectors.size()) + " vectors");
                training.insert(training.end(), std::make_move_iterator(vectors.begin()),
                                std::make_move_iterator(vectors.end()));
            }
        }
        templates = train_templates(training, cfg.fingerprint.min_per_label,
                                    cfg.fingerprint.conf_scale);
        templates.save(tpl_path);
        log_info("fingerprint: trained " + std::to_string(templates.classes.size()) +
                 " classes -> " + tpl_path);
    } else if (cfg.fingerprint.external_confidences.empty()) {
        if (!file_exists(tpl_path)) {
            throw TrainRequired("no template store at " + tpl_path +
                                " and no training configured");
        }
        templates = ClassTemplates::load(tpl_path);
    }

    // Classify the main scenario's captures per band (if simulated).
    const std::string scn_path = join_path(cfg.out_dir, "scenario.json");
    if (file_exists(scn_path) && cfg.fingerprint.external_confidences.empty()) {
        const Scenario scn = load_scenario(scn_path);
        ClassSet classes;
        for (const auto& c : templates.classes) classes.labels.push_back(c.label);
        for (const BandInfo& band : band_plan(scn)) {
            const std::string path = iq_path(cfg.out_dir, band.sensors.front());
            if (!file_exists(path)) continue;
            IqReader reader(path);
            const double fs = reader.header().fs;
            const int win_in = static_cast<int>(std::llround(kDecisionWindowSec * fs));
            const std::int64_t windows = static_cast<std::int64_t>(reader.header().n) / win_in;
            const double common_start =
                reader.header().t0 - band.intra.at(band.sensors.front());
            std::vector<ConfidenceVector> stream;
            for (std::int64_t w = 0; w < windows; ++w) {
                Eigen::VectorXcd buf = reader.read(w * win_in - kFingerprintMarginIn,
                                                   win_in + 2 * kFingerprintMarginIn);
                const double window_t = common_start + static_cast<double>(w) * kDecisionWindowSec;
                auto v = fingerprint_window(buf, kFingerprintMarginIn, fs, band.freq, window_t);
                if (!v) continue;
                stream.push_back(classify(*v, templates));
            }
            write_confidences_csv(band_csv(cfg.out_dir, "confidences", band.index), classes,
                                  stream);
            log_info("fingerprint: band " + std::to_string(band.index) + " -> " +
                     std::to_string(stream.size()) + " confidence vectors");
        }
    }

    // Confusion report over held-out scenarios.
    if (!cfg.fingerprint.report_scenarios.empty()) {
        ClassSet classes;
        for (const auto& c : templates.classes) classes.labels.push_back(c.label);
        std::ofstream f(join_path(cfg.out_dir, "confusion.csv"));
        if (!f) throw IOError("cannot write confusion.csv");
        f << "tested_class";
        for (const auto& l : classes.labels) f << ",mean_conf_" << l;
        f << "\n";
        for (const auto& name : cfg.fingerprint.report_scenarios) {
            Scenario scn = preset(name);
            for (const auto& bd : scenario_band_devices(scn)) {
                auto vectors = harvest_vectors(scn, bd, cfg.threads);
                std::vector<ConfidenceVector> stream;
                stream.reserve(vectors.size());
                for (const auto& v : vectors) stream.push_back(classify(v, templates));
                if (stream.empty()) continue;
                auto means = average_confidence(stream);
                f << bd.device;
                for (const auto& l : classes.labels) {
                    f << ',' << format_double(means.count(l) ? means.at(l) : 0.0);
                }
                f << "\n";
            }
        }
    }
}

// ---------------------------------------------------------------------------
// fuse
// ---------------------------------------------------------------------------

namespace {

std::vector<ConfidenceVector> read_band_confidences(const std::string& path) {
    if (!file_exists(path)) return {};
    return ingest_external_confidences(path, ClassSet::default_set()).confidences;
}

}  // namespace

void cmd_fuse(const PipelineConfig& cfg) {
    const Scenario scn = load_run_scenario(cfg);
    const std::string det_path = join_path(cfg.out_dir, "detections_eo.csv");
    if (!file_exists(det_path)) {
        throw IOError("missing " + det_path + " (run the detect-eo stage first)");
    }
    std::vector<Detection2D> eo_dets = read_detections_csv(det_path);
    if (!cfg.eo.external_detections.empty()) {
        auto ext = ingest_external_detections(cfg.eo.external_detections, scn.frame_width,
                                              scn.frame_height);
        log_info("fuse: merged " + std::to_string(ext.detections.size()) +
                 " external detections (" + std::to_string(ext.rejected) + " rejected)");
        eo_dets.insert(eo_dets.end(), ext.detections.begin(), ext.detections.end());
    }

    std::vector<Detection2D> rf_dets;
    double source_offset = 0.0;
    if (cfg.fusion_use_rf) {
        const std::vector<BandInfo> bands = read_bands_json(join_path(cfg.out_dir, "bands.json"));
        std::vector<ConfidenceVector> external;
        if (!cfg.fingerprint.external_confidences.empty()) {
            external = ingest_external_confidences(cfg.fingerprint.external_confidences,
                                                   ClassSet::default_set())
                           .confidences;
        }
        int projected_dropped = 0;
        for (const auto& band : bands) {
            const std::string loc_path = band_csv(cfg.out_dir, "rf_locations", band.index);
            if (!file_exists(loc_path)) continue;
            std::vector<RFLocation> locs = read_locations_csv(loc_path);
            source_offset = band.source_offset;

            const std::vector<ConfidenceVector> confs =
                !external.empty()
                    ? external
                    : read_band_confidences(band_csv(cfg.out_dir, "confidences", band.index));
            for (auto& loc : locs) {
                // nearest confidence window labels the fix
                double best_dt = kDecisionWindowSec * 0.75;
                const ConfidenceVector* best = nullptr;
                for (const auto& cv : confs) {
                    const double dt = std::abs(cv.t - loc.t);
                    if (dt < best_dt) {
                        best_dt = dt;
                        best = &cv;
                    }
                }
                if (best != nullptr) {
                    const std::string label = best->argmax();
                    if (!label.empty() && best->conf.at(label) >= cfg.fingerprint.min_conf) {
                        loc.device_label = label;
                    }
                }
            }
            ProjectedLocations proj = project_rf_locations(locs, scn.camera);
            projected_dropped += proj.dropped;
            rf_dets.insert(rf_dets.end(), proj.detections.begin(), proj.detections.end());
        }
        log_info("fuse: " + std::to_string(rf_dets.size()) + " projected RF detections (" +
                 std::to_string(projected_dropped) + " dropped)");
    }

    std::map<std::string, double> offsets = cfg.fusion.offsets;
    if (!cfg.fusion_offsets_explicit) {
        offsets["eo"] = 0.0;
        if (cfg.fusion_use_rf) offsets["rf"] = source_offset;
    }
    std::vector<std::pair<std::string, std::vector<Detection2D>>> streams;
    streams.emplace_back("eo", std::move(eo_dets));
    if (cfg.fusion_use_rf) streams.emplace_back("rf", std::move(rf_dets));
    std::vector<Detection2D> merged = align_timeline(streams, offsets);

    // epoch grouping on a microsecond grid
    std::vector<TrackState> tracks;
    std::vector<TrackRow> rows;
    int next_id = 1;
    double t_prev = 0.0;
    bool first = true;
    std::size_t i = 0;
    StepDiagnostics diag;
    while (i < merged.size()) {
        std::size_t j = i;
        while (j < merged.size() && merged[j].t - merged[i].t < 1e-6) ++j;
        std::vector<Detection2D> epoch(merged.begin() + static_cast<std::ptrdiff_t>(i),
                                       merged.begin() + static_cast<std::ptrdiff_t>(j));
        if (!cfg.fusion.rf_as_measurement) {
            epoch.erase(std::remove_if(epoch.begin(), epoch.end(),
                                       [](const Detection2D& d) {
                                           return d.source == DetectionSource::rf_projected;
                                       }),
                        epoch.end());
        }
        const double t = merged[i].t;
        const double dt = first ? 1.0 / scn.frame_rate : std::max(t - t_prev, 1e-4);
        tracks = track_step(tracks, epoch, cfg.fusion, dt, next_id, &diag);

        std::vector<Detection2D> rf_epoch;
        for (std::size_t k = i; k < j; ++k) {
            if (merged[k].source == DetectionSource::rf_projected) rf_epoch.push_back(merged[k]);
        }
        assign_device_labels(tracks, rf_epoch, cfg.fusion.label_radius_px);

        for (const auto& tr : tracks) {
            if (tr.status == TrackStatus::deleted) continue;
            rows.push_back({t, tr.track_id, tr.device_label, to_string(tr.provenance), tr.state(0),
                            tr.state(1), tr.state(2), tr.state(3), to_string(tr.status)});
        }
        t_prev = t;
        first = false;
        i = j;
    }
    write_tracks_csv(join_path(cfg.out_dir, "tracks.csv"), rows);

    // per-track summary
    json summary;
    summary["tracks"] = json::array();
    std::map<int, std::vector<const TrackRow*>> by_id;
    for (const auto& r : rows) by_id[r.track_id].push_back(&r);
    int confirmed = 0;
    for (const auto& [id, trs] : by_id) {
        json tj;
        tj["track_id"] = id;
        tj["first_t"] = trs.front()->t;
        tj["last_t"] = trs.back()->t;
        tj["epochs"] = trs.size();
        tj["device_label"] = trs.back()->device_label;
        tj["provenance"] = trs.back()->provenance;
        bool was_confirmed = false;
        for (const auto* r : trs) was_confirmed |= r->status == "confirmed";
        tj["confirmed"] = was_confirmed;
        confirmed += was_confirmed ? 1 : 0;
        summary["tracks"].push_back(tj);
    }
    summary["confirmed_tracks"] = confirmed;
    summary["covariance_repairs"] = diag.covariance_repairs;
    if (!diag.nis.empty()) {
        double mean = 0.0;
        for (double v : diag.nis) mean += v;
        summary["mean_nis"] = mean / static_cast<double>(diag.nis.size());
    }
    std::ofstream sf(join_path(cfg.out_dir, "track_summary.json"));
    sf << summary.dump(2) << "\n";
    log_info("fuse: " + std::to_string(by_id.size()) + " tracks (" + std::to_string(confirmed) +
             " confirmed)");
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

namespace {

struct TruthTrack {
    std::string target;
    std::vector<double> t, u, v;
    std::vector<Eigen::Vector3d> world;

    bool sample(double query, double* uu, double* vv, Eigen::Vector3d* pos) const {
        if (t.empty() || query < t.front() - 0.1 || query > t.back() + 0.1) return false;
        const auto it = std::lower_bound(t.begin(), t.end(), query);
        std::size_t hi = static_cast<std::size_t>(std::distance(t.begin(), it));
        hi = std::min(hi, t.size() - 1);
        const std::size_t lo = hi == 0 ? 0 : hi - 1;
        const double span = t[hi] - t[lo];
        const double a = span > 0.0 ? std::clamp((query - t[lo]) / span, 0.0, 1.0) : 0.0;
        if (uu != nullptr) *uu = (1.0 - a) * u[lo] + a * u[hi];
        if (vv != nullptr) *vv = (1.0 - a) * v[lo] + a * v[hi];
        if (pos != nullptr) *pos = (1.0 - a) * world[lo] + a * world[hi];
        return true;
    }
};

constexpr double kAttributionRadiusPx = 15.0;

}  // namespace

void cmd_evaluate(const PipelineConfig& cfg) {
    const std::string tracks_path = join_path(cfg.out_dir, "tracks.csv");
    const std::string eo_truth_path = join_path(cfg.out_dir, "eo_truth.csv");
    const std::string world_truth_path = join_path(cfg.out_dir, "world_truth.csv");
    if (!file_exists(eo_truth_path) || !file_exists(world_truth_path)) {
        throw EvalUnavailable("truth files missing in " + cfg.out_dir);
    }
    if (!file_exists(tracks_path)) {
        throw EvalUnavailable("tracks.csv missing in " + cfg.out_dir +
                              " (run the fuse stage first)");
    }

    const auto eo_truth = read_eo_truth_csv(eo_truth_path);
    const auto world_truth = read_world_truth_csv(world_truth_path);
    std::map<std::string, TruthTrack> truth;
    for (const auto& r : eo_truth) {
        auto& tt = truth[r.target];
        tt.target = r.target;
        tt.t.push_back(r.t);
        tt.u.push_back(r.u);
        tt.v.push_back(r.v);
    }
    for (const auto& r : world_truth) {
        auto& tt = truth[r.target];
        if (tt.world.size() < tt.t.size()) tt.world.push_back(r.position);
    }
    for (auto& [name, tt] : truth) {
        if (tt.world.size() != tt.t.size()) {
            throw EvalUnavailable("world truth does not align with eo truth for " + name);
        }
    }

    const auto rows = read_tracks_csv(tracks_path);
    std::map<int, std::vector<const TrackRow*>> by_id;
    for (const auto& r : rows) by_id[r.track_id].push_back(&r);

    json report;
    report["tracks"] = json::array();
    double min_purity = 1.0;
    int evaluated_tracks = 0;

    for (const auto& [id, trs] : by_id) {
        bool was_confirmed = false;
        for (const auto* r : trs) was_confirmed |= r->status == "confirmed";
        if (!was_confirmed) continue;
        std::map<std::string, int> votes;
        int attributed = 0;
        for (const auto* r : trs) {
            double best = kAttributionRadiusPx;
            std::string who;
            for (const auto& [name, tt] : truth) {
                double uu = 0.0, vv = 0.0;
                if (!tt.sample(r->t, &uu, &vv, nullptr)) continue;
                const double d = std::hypot(uu - r->u, vv - r->v);
                if (d < best) {
                    best = d;
                    who = name;
                }
            }
            if (!who.empty()) {
                ++votes[who];
                ++attributed;
            }
        }
        json tj;
        tj["track_id"] = id;
        tj["epochs"] = trs.size();
        tj["device_label"] = trs.back()->device_label;
        if (attributed == 0) {
            tj["purity"] = 0.0;
            tj["majority_target"] = "";
            report["tracks"].push_back(tj);
            continue;
        }
        std::string majority;
        int majority_votes = 0;
        for (const auto& [name, n] : votes) {
            if (n > majority_votes) {
                majority_votes = n;
                majority = name;
            }
        }
        const double purity = static_cast<double>(majority_votes) / attributed;
        ++evaluated_tracks;
        min_purity = std::min(min_purity, purity);

        double se = 0.0;
        int se_n = 0;
        for (const auto* r : trs) {
            double uu = 0.0, vv = 0.0;
            if (!truth.at(majority).sample(r->t, &uu, &vv, nullptr)) continue;
            const double du = uu - r->u;
            const double dv = vv - r->v;
            se += du * du + dv * dv;
            ++se_n;
        }
        tj["purity"] = purity;
        tj["majority_target"] = majority;
        tj["attributed_fraction"] = static_cast<double>(attributed) / trs.size();
        tj["rmse_px"] = se_n > 0 ? std::sqrt(se / se_n) : -1.0;
        tj["label_correct"] = trs.back()->device_label == majority;
        report["tracks"].push_back(tj);
    }

    // first-detection range per target from the EO detections
    const std::string det_path = join_path(cfg.out_dir, "detections_eo.csv");
    if (file_exists(det_path)) {
        json fd;
        const auto dets = read_detections_csv(det_path);
        for (const auto& [name, tt] : truth) {
            double first_t = -1.0;
            for (const auto& d : dets) {
                double uu = 0.0, vv = 0.0;
                if (!tt.sample(d.t, &uu, &vv, nullptr)) continue;
                if (std::hypot(uu - d.u, vv - d.v) <= kAttributionRadiusPx) {
                    first_t = d.t;
                    break;
                }
            }
            if (first_t >= 0.0) {
                Eigen::Vector3d pos;
                tt.sample(first_t, nullptr, nullptr, &pos);
                fd[name] = {{"t", first_t}, {"range_m", pos.norm()}};
            } else {
                fd[name] = {{"t", nullptr}, {"range_m", nullptr}};
            }
        }
        report["first_eo_detection"] = fd;
    }

    // label-assignment latency relative to the first RF fix
    if (file_exists(join_path(cfg.out_dir, "bands.json"))) {
        const auto bands = read_bands_json(join_path(cfg.out_dir, "bands.json"));
        double first_fix = std::numeric_limits<double>::infinity();
        for (const auto& band : bands) {
            const std::string p = band_csv(cfg.out_dir, "rf_locations", band.index);
            if (!file_exists(p)) continue;
            for (const auto& loc : read_locations_csv(p)) {
                first_fix = std::min(first_fix, loc.t - band.source_offset);
            }
        }
        if (std::isfinite(first_fix)) {
            report["first_rf_fix_t"] = first_fix;
            json lat;
            for (const auto& [name, tt] : truth) {
                double when = -1.0;
                for (const auto& [id, trs] : by_id) {
                    for (const auto* r : trs) {
                        if (r->device_label != name) continue;
                        double uu = 0.0, vv = 0.0;
                        if (!tt.sample(r->t, &uu, &vv, nullptr)) continue;
                        if (std::hypot(uu - r->u, vv - r->v) <= kAttributionRadiusPx) {
                            when = r->t;
                            break;
                        }
                    }
                    if (when >= 0.0) break;
                }
                if (when >= 0.0) {
                    lat[name] = when - first_fix;
                } else {
                    lat[name] = nullptr;
                }
            }
            report["label_latency_s"] = lat;
        }
    }

    report["min_confirmed_purity"] = evaluated_tracks > 0 ? min_purity : -1.0;
    report["confirmed_tracks_evaluated"] = evaluated_tracks;

    std::ofstream f(join_path(cfg.out_dir, "metrics.json"));
    f << report.dump(2) << "\n";
    std::cout << report.dump(2) << "\n";
}

}  // namespace simtrack
